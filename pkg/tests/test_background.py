import math

import numpy as np
import pytest

from cosmon.background import (
    BackgroundParams, DomainError, ModeParams, PhasePoint, apply_box_k, apply_box_k_factored,
    in_characteristic_set, in_sigma_minus, principal_symbol, system_symbol_gap,
)
from cosmon.grid import GridSpec
from cosmon.specfun import bessel_j

BG = BackgroundParams(1.0)
S2 = math.sqrt(2.0)


def test_principal_symbol_values():
    assert principal_symbol(BG, PhasePoint(0, 2.0, 0, 2.0, 0.0, 7.0)) == pytest.approx(-3.0)
    assert principal_symbol(BG, PhasePoint(0, S2, 0, S2, 1.0)) == pytest.approx(0.0, abs=1e-15)
    assert principal_symbol(BackgroundParams(2.5), PhasePoint(0, 0.3, 0, 0.0, 0.0)) == 0.0


def test_characteristic_set():
    assert in_characteristic_set(BG, PhasePoint(0, S2, 0, S2, 1.0), 1e-12)
    assert not in_characteristic_set(BG, PhasePoint(0, 2.0, 0, 1.0, 1.0), 1e-12)
    assert in_characteristic_set(BG, PhasePoint(0, 1.0, 0, 5.0, 0.0), 1e-12)
    with pytest.raises(DomainError):
        in_characteristic_set(BG, PhasePoint(0, 1.0, 0, 0.0, 0.0), 1e-12)


def test_sigma_minus():
    assert in_sigma_minus(BG, PhasePoint(0, S2, 0, S2, 1.0))
    assert not in_sigma_minus(BG, PhasePoint(0, S2, 0, S2, -1.0))
    assert not in_sigma_minus(BG, PhasePoint(0, 1.0, 0, 5.0, 0.0))


def test_phase_point_guards():
    with pytest.raises(DomainError):
        PhasePoint(0, 0.0, 0, 1.0, 0.0)
    with pytest.raises(ValueError):
        BackgroundParams(-1.0)
    with pytest.raises(ValueError):
        ModeParams(0.5)


def test_elliptic_gap_sign():
    assert system_symbol_gap(BG, 0.5) > 0
    assert system_symbol_gap(BG, 2.0) < 1e-2 * system_symbol_gap(BG, 0.5)


def test_box_zero_and_constant():
    g = GridSpec(2 * np.pi, 16, 6.0, 200)
    assert not np.any(apply_box_k(BG, ModeParams(), g.zeros()).values)
    one = g.field(lambda T, R: np.ones_like(T))
    out = apply_box_k(BG, ModeParams(), one).values
    assert np.max(np.abs(out[:, 5:-5])) < 1e-8


def _bessel_residual(n_r):
    lam = 1.0
    g = GridSpec(2 * np.pi, 8, 12.0, n_r)
    u = g.field(lambda T, R: np.exp(1j * lam * T) * bessel_j(1.0, lam * R))
    res = apply_box_k(BG, ModeParams(), u).values
    res2 = apply_box_k_factored(BG, ModeParams(), u).values
    inner = (g.r > 1) & (g.r < 11)
    return np.max(np.abs(res[:, inner])), np.nanmax(np.abs(res2[:, inner]))


def test_bessel_residual_converges_both_routes():
    a1, b1 = _bessel_residual(200)
    a2, b2 = _bessel_residual(400)
    assert a2 < a1 / 8 and b2 < b1 / 8
    assert a2 < 1e-5 and b2 < 1e-5
