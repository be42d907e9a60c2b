import math

import numpy as np
import pytest

from cosmon.background import BackgroundParams, ModeParams
from cosmon.grid import GridSpec
from cosmon.modes import (
    CounterexampleGrids, SingularityGuardError, ZetaSpec, counterexample, exact_mode,
    f1_coefficient, f1_numerical_check, h1k_norm, mode_residual, solve_mode_ode,
    unique_continuation_check,
)
from cosmon.specfun import GammaPoleError, bessel_j

BG = BackgroundParams(1.0)


def test_exact_mode_is_j1():
    ex = exact_mode(BG, ModeParams(0, 0.0), 1.0)
    r = np.linspace(0.2, 9, 40)
    assert np.allclose(ex(r), bessel_j(1.0, r), rtol=0, atol=1e-15)
    res = mode_residual(BG, ModeParams(0, 0.0), 1.0, ex, r)
    assert np.max(np.abs(res)) < 1e-9


def test_exact_mode_massive_branch_uses_i():
    ex = exact_mode(BG, ModeParams(0, 2.0), 1.0)
    assert ex.kind == "I" and ex.kappa == pytest.approx(math.sqrt(3.0))


def test_branches_small_r_powers():
    # nu = a lam + k = -0.4
    bg, mode, lam = BG, ModeParams(-1, 0.0), 0.6
    reg = exact_mode(bg, mode, lam, "regular")
    sing = exact_mode(bg, mode, lam, "singular")
    r1, r2 = 1e-4, 2e-4
    p_reg = math.log(reg(r2) / reg(r1)) / math.log(2)
    p_sing = math.log(sing(r2) / sing(r1)) / math.log(2)
    assert p_reg == pytest.approx(0.4, abs=1e-6)
    assert p_sing == pytest.approx(-0.4, abs=1e-6)
    with pytest.raises(GammaPoleError):
        exact_mode(bg, ModeParams(0, 0.0), 1.0, "singular")


def test_ode_matches_j1_from_r1():
    ex = exact_mode(BG, ModeParams(0, 0.0), 1.0)
    r = np.linspace(1.0, 8.0, 300)
    p = solve_mode_ode(BG, ModeParams(0, 0.0), 1.0, (1.0, 8.0), (ex(1.0), ex.derivative(1.0)), r_eval=r)
    assert np.max(np.abs(p.values - ex(r))) / np.max(np.abs(ex(r))) < 1e-8


def test_ode_zero_data_and_reversibility():
    mode = ModeParams(1, 0.5)
    z = solve_mode_ode(BG, mode, 2.0, (0.3, 5.0), (0.0, 0.0))
    assert not np.any(z.values)
    fwd = solve_mode_ode(BG, mode, 2.0, (0.5, 4.0), (1.0, -0.3), r_eval=np.array([0.5, 4.0]))
    back = solve_mode_ode(BG, mode, 2.0, (0.5, 4.0), (fwd.values[1], fwd.derivative[1]),
                          r_start=4.0, r_eval=np.array([0.5, 4.0]))
    assert abs(back.values[0] - 1.0) < 1e-8 and abs(back.derivative[0] + 0.3) < 1e-8


def test_ode_guard():
    with pytest.raises(SingularityGuardError):
        solve_mode_ode(BG, ModeParams(), 1.0, (0.0, 1.0), (1.0, 0.0))


def test_unique_continuation_small():
    rep = unique_continuation_check(BG, ModeParams(0, 0.0), 1.3, (0.2, 2.0), n_trials=10, seed=4)
    assert rep.zero_data_sup == 0.0
    assert rep.bessel_window_mass > 0 and rep.min_window_mass > 0
    assert rep.passed()


def test_h1k_zero_and_separable():
    g = GridSpec(2 * np.pi, 32, 4.0, 400, k=0)
    assert h1k_norm(g.zeros(), BG).total == 0.0
    omega = 3.0
    gfun = lambda r: np.exp(-((r - 2.0) ** 2) / 0.1)  # noqa: E731
    u = g.field(lambda T, R: np.exp(1j * omega * T) * gfun(R))
    rep = h1k_norm(u, BG)
    r = g.r
    # separable quadrature oracle
    g2 = 2 * np.pi * np.sum(gfun(r) ** 2 * r) * g.dr
    g2r = 2 * np.pi * np.sum(gfun(r) ** 2 / r) * g.dr
    assert rep.dt == pytest.approx(omega**2 * g2, rel=1e-10)
    assert rep.twisted == pytest.approx(omega**2 * g2r, rel=1e-10)
    assert rep.l2 == pytest.approx(g2, rel=1e-12)


def test_h1k_twisted_grows_for_k_nonzero():
    vals = []
    for r_min in (1e-1, 1e-2, 1e-3):
        n = 400
        r = np.linspace(r_min, 1.0, n)
        u = np.exp(-(r**2)) * (1 - r) ** 2
        from cosmon.grid import SpacetimeField

        f = SpacetimeField(np.arange(4) * np.pi / 2, r, np.tile(u, (4, 1)).astype(complex), k=1)
        vals.append(h1k_norm(f, BG).twisted)
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] > 1.5 * vals[1]


def test_f1_coefficient():
    assert f1_numerical_check(-0.5, 1.0) < 1e-6
    assert f1_coefficient(-0.5, 1.0) == pytest.approx(-0.5 * math.sqrt(2 / math.pi) / 1.0, rel=1e-12)


def test_counterexample_coarse():
    grids = CounterexampleGrids(n_lambda=60, n_t=256, levels=2, n_r_per_decade=24)
    _, rep = counterexample(BG, 0, ZetaSpec(), grids)
    assert rep.l2_stable(0.01)
    assert -4 / 3 - 0.2 < rep.slope < -2 / 3 + 0.2
    _, ctl = counterexample(BG, 0, ZetaSpec.control(), grids)
    assert abs(ctl.slope) < 0.05
