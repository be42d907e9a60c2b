"""Absorbing operator W and the forward solve of ``(box_k + m^2 - iW) u = f``.

Everything acts frequency by frequency after an FFT in the periodic time
variable.  On one frequency the mode operator is the radial block

    L_lam = -d_r^2 - r^-1 d_r + nu^2/r^2 + m^2 - lam^2,   nu = a lam + k,

and W is a dense block living on the grid points with r > R.

The symbol ``w = -sgn(lam) lam^2 rho(xi/lam) psi(|eta/lam|) chi(r)`` is
quantised on the left by an FFT in r (``d_r <-> i xi``) and then symmetrised
in the ``r dr`` inner product.  On a fixed mode ``eta = k``, so
``psi(|k/lam|)`` is one number per frequency and W vanishes for
``|lam| <= 5|k|``; those blocks are solved with the plain mode operator and
Dirichlet walls.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import roots_legendre
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_field, check_positive
from .background import BackgroundParams, ModeParams, apply_box_k, apply_box_k_factored, radial_operator
from .cutoffs import plateau, smooth_step
from .grid import GridMismatchError, GridSpec, SpacetimeField
from .prng import SplitMix64

MIN_ABSORBER_POINTS = 16
TIKHONOV_SCALE = 1e-10


class ResolutionWarning(UserWarning):
    """The absorber band holds too few grid points."""


class SolveFailureError(RuntimeError):
    def __init__(self, lam: float, rcond: float, msg: str = ""):
        super().__init__(f"solve failed at lambda={lam:.6g} (rcond={rcond:.3g}) {msg}".rstrip())
        self.lam = lam
        self.rcond = rcond


class PreconditionError(ValueError):
    """A trial field violates the support hypothesis of the estimate."""


class IdentityViolation(AssertionError):
    def __init__(self, trial: dict, msg: str):
        super().__init__(msg)
        self.trial = trial


# ---------------------------------------------------------------------------
# absorber


@dataclass(frozen=True)
class AbsorberSpec:
    """Absorber geometry and cutoffs.

    ``chi`` rises on ``[R + 1/4, R + 1]`` and ``chi_tilde`` on
    ``[R, R + 1/4]``, so both are supported in ``(R, inf)`` and
    ``chi_tilde = 1`` on ``supp chi``.
    """

    a_rot: float
    R: float
    R0: float
    rho_flat: tuple = (0.75, 1.25)
    rho_support: tuple = (2.0 / 3.0, 4.0 / 3.0)
    psi_flat: tuple = (-0.1, 0.1)
    psi_support: tuple = (-0.2, 0.2)

    def __post_init__(self):
        check_positive(self.a_rot, "a_rot")
        check_positive(self.R0, "R0")
        if not self.R > max(self.a_rot, self.R0):
            raise ValueError(f"need R > max(a_rot, R0), got R={self.R}")
        if not 1.0 - self.a_rot**2 / self.R**2 > 0.9:
            raise ValueError("need 1 - a^2/R^2 > 9/10")

    @property
    def bg(self) -> BackgroundParams:
        return BackgroundParams(self.a_rot)

    def rho(self, x):
        return plateau(x, self.rho_support, self.rho_flat)

    def psi(self, x):
        return plateau(x, self.psi_support, self.psi_flat)

    def chi(self, r):
        return smooth_step(r, self.R + 0.25, self.R + 1.0)

    def chi_tilde(self, r):
        return smooth_step(r, self.R, self.R + 0.25)

    def check_grid(self, grid: GridSpec) -> None:
        if not grid.r_max > self.R + 2.0:
            raise GridMismatchError(f"need R_max > R + 2, got R_max={grid.r_max}, R={self.R}")
        if not math.isclose(grid.a_rot, self.a_rot):
            raise GridMismatchError("grid and absorber disagree on a_rot")

    def invariants(self, r) -> dict:
        """Pointwise checks of the plateau and support conditions on ``r``."""
        r = np.asarray(r, dtype=float)
        x = np.linspace(-2.0, 2.0, 4001)
        c, ct = self.chi(r), self.chi_tilde(r)
        return {
            "rho_plateau": bool(np.all(self.rho(x)[(x > 0.75) & (x < 1.25)] == 1.0)),
            "rho_support": bool(np.all(self.rho(x)[(x <= 2 / 3) | (x >= 4 / 3)] == 0.0)),
            "psi_plateau": bool(np.all(self.psi(x)[np.abs(x) < 0.1] == 1.0)),
            "psi_support": bool(np.all(self.psi(x)[np.abs(x) >= 0.2] == 0.0)),
            "chi_plateau": bool(np.all(c[r > self.R + 1] == 1.0)),
            "chi_support": bool(np.all(c[r <= self.R] == 0.0)),
            "chi_tilde_support": bool(np.all(ct[r <= self.R] == 0.0)),
            "chi_tilde_chi": bool(np.array_equal(ct * c, c)),
        }


def absorber_symbol(spec: AbsorberSpec, r, lam, xi, eta=0.0):
    """``-sgn(lam) lam^2 rho(xi/lam) psi(|eta/lam|) chi(r)``, zero at ``lam = 0``."""
    r, lam, xi, eta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, lam, xi, eta)))
    out = np.zeros(r.shape)
    nz = lam != 0
    if np.any(nz):
        L = lam[nz]
        # tiny |lam| overflows the ratios to inf, where rho and psi vanish
        with np.errstate(over="ignore"):
            x_ratio, e_ratio = xi[nz] / L, np.abs(eta[nz] / L)
        out[nz] = -np.sign(L) * L * L * spec.rho(x_ratio) * spec.psi(e_ratio) * spec.chi(r[nz])
    return out[()] if out.ndim == 0 else out


def _absorber_index(spec: AbsorberSpec, r: np.ndarray):
    idx = np.flatnonzero(spec.chi_tilde(r) > 0)
    if idx.size < MIN_ABSORBER_POINTS:
        warnings.warn(
            f"absorber band resolved by {idx.size} < {MIN_ABSORBER_POINTS} points",
            ResolutionWarning, stacklevel=3,
        )
    return idx


def W_block(spec: AbsorberSpec, grid: GridSpec, lam: float, idx=None):
    """Dense W on the absorber indices at frequency ``lam``, or ``None`` if it vanishes."""
    if lam == 0:
        return None
    scal = float(spec.psi(abs(grid.k / lam)))
    if scal == 0.0:
        return None
    r = grid.r
    if idx is None:
        idx = _absorber_index(spec, r)
    m = idx.size
    if m == 0:
        return None
    n_pad = 1 << int(math.ceil(math.log2(2 * m)))
    xi = 2.0 * np.pi * np.fft.fftfreq(n_pad, d=grid.dr)
    s = -np.sign(lam) * lam * lam * spec.rho(xi / lam) * scal
    c = np.fft.ifft(s)
    j = np.arange(m)
    conv = c[(j[:, None] - j[None, :]) % n_pad]
    rr = r[idx]
    A = spec.chi(rr)[:, None] * conv * spec.chi_tilde(rr)[None, :]
    # symmetrise in <u, v> = sum u conj(v) r
    return 0.5 * (A + (A.conj().T * rr[None, :]) / rr[:, None])


def apply_W(spec: AbsorberSpec, grid: GridSpec, u: SpacetimeField) -> SpacetimeField:
    """Apply W frequency by frequency; the output vanishes on ``r <= R``."""
    spec.check_grid(grid)
    u = check_field(u, grid)
    idx = _absorber_index(spec, grid.r)
    uh = np.fft.fft(u.values, axis=0)
    out = np.zeros_like(uh)
    for i, lam in enumerate(grid.lam):
        if not np.any(uh[i, idx]):
            continue
        B = W_block(spec, grid, lam, idx)
        if B is not None:
            out[i, idx] = B @ uh[i, idx]
    return u.like(np.fft.ifft(out, axis=0))


def assemble_P_lambda(spec: AbsorberSpec, grid: GridSpec, lam: float, idx=None) -> np.ndarray:
    """Dense radial block of ``box_k + m^2 - iW`` at frequency ``lam``.

    Regular-branch inner closure through the ``r^|nu|`` factorisation and
    homogeneous Dirichlet data at ``R_max``.
    """
    bg = BackgroundParams(grid.a_rot)
    mode = ModeParams(grid.k, grid.m)
    A = radial_operator(bg, mode, lam, grid.r, outer="dirichlet").toarray().astype(complex)
    if idx is None:
        idx = _absorber_index(spec, grid.r)
    B = W_block(spec, grid, lam, idx)
    if B is not None:
        A[np.ix_(idx, idx)] -= 1j * B
    return A


# ---------------------------------------------------------------------------
# forward solve


@dataclass
class SolveReport:
    residual_rel: float
    residual_factored_rel: float
    elliptic_mass_fraction: float
    n_blocks: int
    n_regularized: int
    worst_rcond: float
    regularized: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=1, sort_keys=True)


def _solve_block(A: np.ndarray, b: np.ndarray, lam: float, rcond_min: float):
    anorm = float(np.max(np.sum(np.abs(A), axis=0)))
    lu, piv, info = sla.lapack.zgetrf(A)
    rcond = 0.0
    if info == 0:
        rcond, _ = sla.lapack.zgecon(lu, anorm, norm="1")
        rcond = float(rcond)
    if info == 0 and rcond >= rcond_min:
        x, info2 = sla.lapack.zgetrs(lu, piv, b)
        if info2 != 0 or not np.all(np.isfinite(x)):
            raise SolveFailureError(lam, rcond, "back substitution failed")
        return x, rcond, False
    # near-singular block: Tikhonov-regularised least squares
    eps = TIKHONOV_SCALE * anorm
    AH = A.conj().T
    x = np.linalg.solve(AH @ A + eps * eps * np.eye(A.shape[0]), AH @ b)
    if not np.all(np.isfinite(x)):
        raise SolveFailureError(lam, rcond, "regularised solve failed")
    return x, rcond, True


def elliptic_mass_fraction(u: SpacetimeField, a_rot: float, delta: float = 0.1,
                           r_cap: float | None = None) -> float:
    """``|u|^2`` on ``r < a(1 - delta)`` over ``|u|^2`` on ``r < r_cap`` (whole grid by default)."""
    total_mask = np.ones(u.r.size, bool) if r_cap is None else u.r < r_cap
    total = u.norm2(total_mask[None, :])
    if total == 0:
        return 0.0
    return u.norm2((u.r < a_rot * (1 - delta))[None, :]) / total


def solve_forward(spec: AbsorberSpec, grid: GridSpec, f: SpacetimeField,
                  rcond_min: float = 1e-13, threads: int = 1):
    """Solve ``(box_k + m^2 - iW) u = f`` frequency by frequency.

    Returns ``(u, SolveReport)``.  The residual in the report is
    ``|(box_k + m^2) u - f| / |f|`` over ``K = {r < R}``, where W vanishes;
    ``residual_factored_rel`` recomputes it with the independent plain-stencil
    operator on interior rows.
    """
    spec.check_grid(grid)
    f = check_field(f, grid, "f")
    if np.any(f.values[:, grid.r >= spec.R0] != 0):
        raise ValueError("source must be supported in r < R0")
    idx = _absorber_index(spec, grid.r)
    fh = np.fft.fft(f.values, axis=0)
    uh = np.zeros_like(fh)
    active = [i for i in range(grid.n_t) if np.any(fh[i])]
    lams = grid.lam

    def work(i):
        A = assemble_P_lambda(spec, grid, lams[i], idx)
        return i, _solve_block(A, fh[i], lams[i], rcond_min)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, active))
    else:
        results = [work(i) for i in active]

    regularized, worst = [], math.inf
    for i, (x, rcond, reg) in results:
        uh[i] = x
        worst = min(worst, rcond)
        if reg:
            regularized.append({"lambda": float(lams[i]), "rcond": rcond})
    u = f.like(np.fft.ifft(uh, axis=0))

    res, res_f = residuals(spec, grid, u, f)
    report = SolveReport(
        residual_rel=res, residual_factored_rel=res_f,
        elliptic_mass_fraction=elliptic_mass_fraction(u, grid.a_rot, r_cap=spec.R),
        n_blocks=len(active), n_regularized=len(regularized),
        worst_rcond=float(worst) if active else float("nan"), regularized=regularized,
    )
    return u, report


def residuals(spec: AbsorberSpec, grid: GridSpec, u: SpacetimeField, f: SpacetimeField):
    """Relative residuals of ``(box_k + m^2) u = f`` on ``{r < R}`` by both discretisations."""
    bg = BackgroundParams(grid.a_rot)
    mode = ModeParams(grid.k, grid.m)
    K = (grid.r < spec.R)[None, :]
    fn = f.norm2(K)
    if fn == 0:
        return 0.0, 0.0
    res = apply_box_k(bg, mode, u, outer="dirichlet").values - f.values
    rf = apply_box_k_factored(bg, mode, u).values - f.values
    rf = np.where(np.isnan(rf), 0.0, rf)
    return (math.sqrt(u.like(res).norm2(K) / fn), math.sqrt(u.like(rf).norm2(K) / fn))


class ForwardSolver(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` fixes grid and absorber, ``transform`` maps f to u."""

    def __init__(self, a_rot=1.0, k=0, m=0.0, R=4.0, R0=3.0, t_period=20.0, n_t=512,
                 r_max=8.0, n_r=512, rcond_min=1e-13, threads=1):
        self.a_rot = a_rot
        self.k = k
        self.m = m
        self.R = R
        self.R0 = R0
        self.t_period = t_period
        self.n_t = n_t
        self.r_max = r_max
        self.n_r = n_r
        self.rcond_min = rcond_min
        self.threads = threads

    def fit(self, X=None, y=None):
        self.spec_ = AbsorberSpec(self.a_rot, self.R, self.R0)
        self.grid_ = GridSpec(self.t_period, self.n_t, self.r_max, self.n_r,
                              k=self.k, a_rot=self.a_rot, m=self.m)
        self.spec_.check_grid(self.grid_)
        self.absorber_index_ = _absorber_index(self.spec_, self.grid_.r)
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        u, self.report_ = solve_forward(self.spec_, self.grid_, check_field(X, self.grid_, "f"),
                                        self.rcond_min, self.threads)
        return u


# ---------------------------------------------------------------------------
# coercivity


@dataclass
class BumpTrial:
    """``phi(t, r) = sum_n e^{i lam_n t} beta(r) p_n(r)`` on ``(r_lo, r_hi)``."""

    r_lo: float
    r_hi: float
    lams: np.ndarray
    coeffs: np.ndarray  # (n_modes, degree + 1), ascending powers of (r - r_lo)

    def as_dict(self) -> dict:
        return {"r_lo": self.r_lo, "r_hi": self.r_hi, "lams": np.asarray(self.lams).tolist(),
                "coeffs_re": self.coeffs.real.tolist(), "coeffs_im": self.coeffs.imag.tolist()}

    def radial(self, r):
        """Values, first and second r-derivatives of each ``beta p_n``: shape (3, n_modes, len(r))."""
        r = np.asarray(r, dtype=float)
        lo, hi = self.r_lo, self.r_hi
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        y = (r - mid) / half
        q = 1.0 - y * y
        inside = q > 0
        qs = np.where(inside, q, 1.0)
        dq = -2.0 * y / half
        ddq = -2.0 / half**2
        beta = np.where(inside, np.exp(-1.0 / qs), 0.0)
        g1 = dq / qs**2
        g2 = ddq / qs**2 - 2.0 * dq * dq / qs**3
        b1 = np.where(inside, g1 * beta, 0.0)
        b2 = np.where(inside, (g2 + g1 * g1) * beta, 0.0)
        x = r - lo
        P = np.polynomial.polynomial
        p0 = np.array([P.polyval(x, c) for c in self.coeffs])
        p1 = np.array([P.polyval(x, P.polyder(c)) for c in self.coeffs])
        p2 = np.array([P.polyval(x, P.polyder(c, 2)) for c in self.coeffs])
        v = beta * p0
        d1 = b1 * p0 + beta * p1
        d2 = b2 * p0 + 2 * b1 * p1 + beta * p2
        return np.stack([v, d1, d2])


@dataclass
class CoercivityReport:
    k: int
    n_trials: int
    max_identity_defect: float
    min_slack: float
    min_relative_slack: float
    constant: float
    trials: list

    @property
    def passed(self) -> bool:
        return self.max_identity_defect <= 1e-8 and self.min_slack >= 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def pairing_terms(bg: BackgroundParams, mode: ModeParams, trial: BumpTrial,
                  t_period: float, n_quad: int = 800) -> dict:
    """Both sides of the pairing identity for one trial, by Gauss-Legendre and Plancherel.

    ``pairing`` integrates ``(P phi) conj(phi) r`` using second derivatives;
    the norms use first derivatives only.  W is absent since the trial lives
    in ``r < a/4 < R``.
    """
    if trial.r_lo <= 0 or trial.r_hi > bg.a_rot / 4 * (1 + 1e-12):
        raise PreconditionError(
            f"trial support ({trial.r_lo}, {trial.r_hi}) not inside (0, a/4)"
        )
    x, w = roots_legendre(n_quad)
    half = 0.5 * (trial.r_hi - trial.r_lo)
    r = trial.r_lo + half * (x + 1.0)
    wr = w * half * r  # measure r dr
    v, d1, d2 = trial.radial(r)
    lam = np.asarray(trial.lams, dtype=float)[:, None]
    nu = bg.a_rot * lam + mode.k
    P_phi = -d2 - d1 / r + (nu * nu / r**2 + mode.m**2 - lam * lam) * v
    T = t_period

    def q(arr):
        return float(T * np.sum(np.abs(arr) ** 2 * wr))

    pairing = complex(T * np.sum(P_phi * np.conj(v) * wr))
    return {
        "pairing": pairing,
        "l2": q(v),
        "dt": q(lam * v),
        "dr": q(d1),
        "twisted": q(nu * v / r),
    }


def random_trial(rng: SplitMix64, a_rot: float, t_period: float, n_modes: int = 4,
                 degree: int = 4) -> BumpTrial:
    r_hi = a_rot / 4.0
    r_lo = rng.uniform(0.02, 0.6) * r_hi
    lams = 2.0 * np.pi / t_period * np.arange(-n_modes, n_modes + 1)
    width = r_hi - r_lo
    scale = width ** -np.arange(degree + 1)
    coeffs = rng.complex_normal((lams.size, degree + 1)) * scale[None, :]
    return BumpTrial(r_lo, r_hi, lams, coeffs)


def coercivity_check(bg: BackgroundParams, mode: ModeParams, trial_count: int = 100,
                     t_period: float = 2.0 * np.pi, seed: int = 0, n_quad: int = 800,
                     trials=None) -> CoercivityReport:
    """Check the pairing identity and the elliptic estimate on random trials near r = 0.

    The inequality tested is
    ``<P phi, phi> >= 3/4 |twisted|^2 + |d_t phi|^2 + |d_r phi|^2 + |phi|^2 - C |phi|^2``
    with ``C = 1 + 4 k^2 / a^2``.
    """
    rng = SplitMix64(seed)
    C = 1.0 + 4.0 * mode.k**2 / bg.a_rot**2
    if trials is None:
        trials = [random_trial(rng, bg.a_rot, t_period) for _ in range(trial_count)]
    worst_id, worst_slack, worst_rel = 0.0, math.inf, math.inf
    out = []
    for tr in trials:
        p = pairing_terms(bg, mode, tr, t_period, n_quad)
        rhs = p["twisted"] - p["dt"] + p["dr"] + mode.m**2 * p["l2"]
        scale = p["twisted"] + p["dt"] + p["dr"] + mode.m**2 * p["l2"]
        defect = abs(p["pairing"] - rhs) / scale if scale > 0 else abs(p["pairing"])
        lower = 0.75 * p["twisted"] + p["dt"] + p["dr"] + p["l2"] - C * p["l2"]
        slack = p["pairing"].real - lower
        worst_id = max(worst_id, defect)
        worst_slack = min(worst_slack, slack)
        worst_rel = min(worst_rel, slack / scale if scale > 0 else 0.0)
        out.append({"identity_defect": defect, "slack": slack})
        if not np.isfinite(defect):
            raise IdentityViolation(tr.as_dict(), "non-finite pairing")
    return CoercivityReport(int(mode.k), len(trials), float(worst_id),
                            float(worst_slack) if trials else 0.0,
                            float(worst_rel) if trials else 0.0, C, out)


def damping_probe(spec: AbsorberSpec, grid: GridSpec, lam: float, width: float = 0.3,
                  r_source: float | None = None) -> dict:
    """Amplitude ratio of an incoming packet across the absorber band ``(R, R+1)``.

    A packet ``exp(-(r - r_s)^2 / 2 w^2 + i xi r)`` with ``sgn xi = sgn lam``
    (incoming) is placed at ``r_s = R + 2`` and the single-frequency problem
    is solved with and without W.  Returns the ratio of the mean ``|u|`` near
    ``r = R`` to that near ``r = R + 1`` for both.
    """
    spec.check_grid(grid)
    r = grid.r
    rs = spec.R + 2.0 if r_source is None else r_source
    xi = lam * math.sqrt(1.0 - spec.a_rot**2 / rs**2)
    f = np.exp(-((r - rs) ** 2) / (2 * width**2) + 1j * xi * r)
    bg = BackgroundParams(grid.a_rot)
    mode = ModeParams(grid.k, grid.m)
    out = {}
    for name, A in (("absorbed", assemble_P_lambda(spec, grid, lam)),
                    ("control", radial_operator(bg, mode, lam, r).toarray().astype(complex))):
        u = np.linalg.solve(A, f)
        inner = np.mean(np.abs(u[np.abs(r - spec.R) < 0.1]))
        outer = np.mean(np.abs(u[np.abs(r - spec.R - 1.0) < 0.1]))
        out[name] = float(inner / outer)
    return {"lambda": float(lam), "ratio": out["absorbed"], "control_ratio": out["control"]}
