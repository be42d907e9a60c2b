import numpy as np
import pytest

from cosmon.background import BackgroundParams, ModeParams
from cosmon.grid import GridSpec
from cosmon.wavefront import (
    FlowoutThresholds, PhaseEnergy, Region, ResolutionWarning, backward_packet, elliptic_support_probe,
    flowout_consistency, phase_energy, slice_consistency,
)

BG = BackgroundParams(1.0)
G = GridSpec(6.4, 128, 8.0, 256)


def _packet(t0, r0, lam, xi, w):
    P = G.t_period
    return G.field(lambda T, R: np.exp(-(((T - t0 + P / 2) % P - P / 2) ** 2 + (R - r0) ** 2) / (2 * w * w)
                                       + 1j * (lam * T + xi * R)))


def test_zero_field():
    m = phase_energy(G.zeros())
    assert m.total == 0.0 and m.parseval_defect() == 0.0


def test_parseval_exact():
    rng = np.random.default_rng(0)
    u = G.field(lambda T, R: rng.standard_normal(T.shape) + 1j * rng.standard_normal(T.shape))
    assert phase_energy(u).parseval_defect() < 1e-12


def test_plane_wave_single_dominant_cell():
    lam0 = 2 * np.pi * 10 / G.t_period
    xi0 = 20.0
    u = G.field(lambda T, R: np.exp(1j * (lam0 * T + xi0 * R) - (R - 4.0) ** 2 / (2 * 1.5**2)))
    m = phase_energy(u)
    dl = m.lam[1] - m.lam[0]
    dx = m.xi[1] - m.xi[0]
    for j in np.flatnonzero(np.abs(m.r_centers - 4.0) < 1.0):
        for i in range(m.t_centers.size):
            p, q = np.unravel_index(np.argmax(m.energy[i, j]), m.energy[i, j].shape)
            assert abs(m.lam[p] - lam0) <= dl and abs(m.xi[q] - xi0) <= dx


def test_two_packets_energies():
    a = _packet(1.6, 2.0, 20.0, 15.0, 0.3)
    b = _packet(4.8, 6.0, -20.0, -15.0, 0.3)
    m = phase_energy(a.like(a.values + b.values))
    left = m.energy[:, m.r_centers < 4.0].sum()
    right = m.energy[:, m.r_centers >= 4.0].sum()
    assert left == pytest.approx(a.norm2(), rel=0.05)
    assert right == pytest.approx(b.norm2(), rel=0.05)
    # dominant directions sit in opposite quadrants
    ea = m.energy[:, m.r_centers < 4.0].sum(axis=(0, 1))
    p, q = np.unravel_index(np.argmax(ea), ea.shape)
    assert m.lam[p] > 0 and m.xi[q] > 0


def test_resolution_warning():
    with pytest.warns(ResolutionWarning):
        phase_energy(G.zeros(), window=0.05)


def test_transformer_matches_function():
    u = _packet(3.2, 3.0, 10.0, 5.0, 0.4)
    a = PhaseEnergy(window=0.25).fit().transform(u)
    b = phase_energy(u, 0.25)
    assert np.array_equal(a.energy, b.energy)
    assert PhaseEnergy().get_params() == {"bins": (2, 2), "window": 0.2}


def test_region_periodic():
    reg = Region(6.0, 7.0, 1.0, 2.0)
    assert reg.contains(6.5, 1.5)
    assert not reg.contains(0.1, 1.5)
    assert reg.contains(0.1 + 6.5, 1.5, period=6.5)
    assert not reg.contains(6.5, 2.5)


def test_flowout_vacuous():
    m = phase_energy(G.zeros())
    rep = flowout_consistency(m, [], Region(0, 1, 0, 1), BG, 4.0, FlowoutThresholds())
    assert rep.vacuous and rep.passed()


def test_backward_packet_without_rays_is_off():
    from cosmon.background import PhasePoint

    u = backward_packet(G.zeros(), PhasePoint(3.2, 3.0, 0, -1.0, -0.9), 40.0, 0.15)
    with pytest.warns(RuntimeWarning):
        rep = flowout_consistency(phase_energy(u), [], Region(0, 0.1, 0, 0.1), BG, 4.0)
    assert rep.off_fraction == 1.0 and not rep.passed()


def test_elliptic_probe_zero():
    assert elliptic_support_probe(G.zeros(), BG).fraction == 0.0


def test_slice_supported_outside_is_flagged():
    lam_index = 3
    lam = G.lam[lam_index]
    vals = np.where(G.r[None, :] > 1.0, np.sin(3 * G.r)[None, :], 0.0) * np.exp(1j * lam * G.t)[:, None]
    rep = slice_consistency(G.zeros().like(vals), BG, ModeParams(0), lam_index, (0.5, 2.0))
    assert rep["flagged"] and rep["mass_below"] == 0.0
    ok = G.field(lambda T, R: np.exp(1j * lam * T) * np.cos(R))
    assert not slice_consistency(ok, BG, ModeParams(0), lam_index, (0.5, 2.0))["flagged"]
