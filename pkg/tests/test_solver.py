import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cosmon.background import BackgroundParams, ModeParams
from cosmon.cutoffs import smooth_step
from cosmon.grid import GridMismatchError, GridSpec
from cosmon.modes import exact_mode
from cosmon.solver import (
    AbsorberSpec, BumpTrial, ForwardSolver, PreconditionError, W_block, absorber_symbol, apply_W,
    assemble_P_lambda, coercivity_check, damping_probe, solve_forward,
)

SPEC = AbsorberSpec(1.0, 4.0, 3.0)


def test_spec_constraints():
    with pytest.raises(ValueError):
        AbsorberSpec(1.0, 3.0, 3.0)
    with pytest.raises(ValueError):
        AbsorberSpec(2.0, 3.0, 2.5)  # 1 - 4/9 < 9/10
    with pytest.raises(GridMismatchError):
        SPEC.check_grid(GridSpec(1.0, 8, 5.5, 64))
    assert all(SPEC.invariants(np.linspace(0.01, 8, 999)).values())


def test_symbol_values():
    assert absorber_symbol(SPEC, SPEC.R + 2, -2.0, -2.0, 0.0) == pytest.approx(4.0)
    assert absorber_symbol(SPEC, SPEC.R - 0.1, -2.0, -2.0, 0.0) == 0.0
    assert absorber_symbol(SPEC, 7.0, 0.0, 1.0, 0.0) == 0.0


def test_symbol_sign_random():
    rng = np.random.default_rng(0)
    r = rng.uniform(0, 10, 20000)
    lam = rng.uniform(-50, 50, 20000)
    xi = lam * rng.uniform(0.5, 1.5, 20000)
    w = absorber_symbol(SPEC, r, lam, xi, 0.0)
    nz = w != 0
    assert nz.sum() > 1000
    assert np.all(np.sign(w[nz]) == -np.sign(lam[nz]))


def test_apply_W_support_and_symmetry():
    g = GridSpec(2 * np.pi, 16, 8.0, 256)
    rng = np.random.default_rng(1)
    u = g.field(lambda T, R: rng.standard_normal(T.shape) + 1j * rng.standard_normal(T.shape))
    v = g.field(lambda T, R: rng.standard_normal(T.shape))
    Wu, Wv = apply_W(SPEC, g, u), apply_W(SPEC, g, v)
    assert not np.any(Wu.values[:, g.r <= SPEC.R])
    inside = u.like(np.where(g.r[None, :] < SPEC.R, u.values, 0))
    assert not np.any(apply_W(SPEC, g, inside).values)
    lhs, rhs = Wu.inner(v), u.inner(Wv)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_apply_W_elliptic_plateau():
    lam0 = -20.0
    g = GridSpec(2 * np.pi, 64, 16.0, 640, k=0)
    u = g.field(lambda T, R: np.exp(1j * lam0 * T + 1j * lam0 * R - (R - 10.0) ** 2 / 4.5))
    Wu = apply_W(SPEC, g, u)
    sel = np.abs(g.r - 10.0) < 2.0
    ratio = Wu.values[:, sel] / u.values[:, sel]
    # the envelope is cut off at the ends of the absorber window (e^-8), hence 1e-4
    assert np.max(np.abs(ratio - lam0**2)) < 1e-4 * lam0**2


def test_W_block_vanishes_in_psi_window():
    g = GridSpec(2 * np.pi, 64, 8.0, 128, k=3)
    assert W_block(SPEC, g, 2.0) is None
    assert W_block(SPEC, g, 15.0) is None
    assert W_block(SPEC, g, 31.0) is not None
    assert W_block(SPEC, g, 0.0) is None


def _interior_bessel_residual(n_r):
    lam = 3.0
    g = GridSpec(2 * np.pi, 8, 8.0, n_r, k=0)
    ex = exact_mode(BackgroundParams(1.0), ModeParams(0, 0.0), lam)
    A = assemble_P_lambda(SPEC, g, lam)
    res = A @ ex(g.r)
    inner = g.r < SPEC.R
    return np.max(np.abs(res[inner]))


def test_P_lambda_bessel_residual_converges():
    a, b = _interior_bessel_residual(256), _interior_bessel_residual(512)
    assert b < a / 8 and b < 1e-4


def test_static_massive_block_positive():
    g = GridSpec(2 * np.pi, 8, 8.0, 256, k=0, m=1.0)
    A = assemble_P_lambda(SPEC, g, 0.0)
    f = np.exp(-((g.r - 2.0) ** 2) / 0.1)
    u = np.linalg.solve(A, f)
    assert np.max(np.abs(u.imag)) < 1e-12 * np.max(np.abs(u))
    assert np.all(u.real > 0)


def _small_problem(n_r=256, k=0):
    g = GridSpec(6.4, 64, 8.0, n_r, k=k)
    f = g.field(lambda T, R: np.exp(-((T - 3.2) ** 2) / 0.08 - (R - 2.0) ** 2 / 0.08)
                * (1 - smooth_step(R, 2.5, 3.0)))
    return g, f


def test_solve_forward_small():
    g, f = _small_problem()
    u, rep = solve_forward(SPEC, g, f)
    assert rep.residual_rel < 1e-8
    assert rep.elliptic_mass_fraction > 0
    assert rep.n_regularized == 0
    zero, _ = solve_forward(SPEC, g, g.zeros())
    assert not np.any(zero.values)


def test_solve_forward_threads_identical():
    g, f = _small_problem(128, k=1)
    u1, _ = solve_forward(SPEC, g, f, threads=1)
    u2, _ = solve_forward(SPEC, g, f, threads=3)
    assert np.array_equal(u1.values, u2.values)


def test_source_support_enforced():
    g = GridSpec(6.4, 16, 8.0, 128)
    with pytest.raises(ValueError):
        solve_forward(SPEC, g, g.field(lambda T, R: np.ones_like(T)))


def test_forward_solver_estimator():
    est = ForwardSolver(t_period=6.4, n_t=64, n_r=256)
    assert est.get_params()["n_r"] == 256
    assert clone(est).get_params() == est.get_params()
    g, f = _small_problem()
    with pytest.raises(NotFittedError):
        est.transform(f)
    u = est.fit().transform(f.values)
    ref, _ = solve_forward(SPEC, g, f)
    assert np.array_equal(u.values, ref.values)
    assert est.report_.residual_rel < 1e-8
    est.set_params(n_r=100)
    with pytest.raises(GridMismatchError):
        est.fit().transform(f)


def test_coercivity_small():
    bg = BackgroundParams(1.0)
    rep = coercivity_check(bg, ModeParams(1), trial_count=10, seed=3)
    assert rep.max_identity_defect < 1e-8 and rep.min_slack >= 0
    zero = BumpTrial(0.05, 0.25, np.array([1.0, 2.0]), np.zeros((2, 3), complex))
    z = coercivity_check(bg, ModeParams(1), trials=[zero])
    assert z.max_identity_defect == 0.0 and z.min_slack == 0.0
    with pytest.raises(PreconditionError):
        coercivity_check(bg, ModeParams(0), trials=[BumpTrial(0.1, 0.5, np.array([1.0]),
                                                               np.ones((1, 1), complex))])


def test_damping_probe_high_frequency():
    g = GridSpec(12.8, 8, 8.0, 512)
    p = damping_probe(SPEC, g, 50.0)
    assert p["ratio"] < 0.1 and p["control_ratio"] > 0.5
