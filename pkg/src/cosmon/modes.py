"""Single-mode analysis in the temporal Fourier variable.

With ``u = sum_lam uhat(lam, r) e^{i lam t}`` the mode equation
``(box_k + m^2) u = 0`` becomes, frequency by frequency,

    (r d_r)^2 uhat = [nu^2 + (m^2 - lam^2) r^2] uhat,      nu = a lam + k,

which is Bessel's equation in ``kappa r`` (``lam^2 > m^2``) or the modified
Bessel equation in ``mu r`` (``lam^2 < m^2``).  Note that nothing singular
happens at r = a on a single frequency; the degeneracy there lives in the
joint (t, r) symbol.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import roots_legendre

from . import _fd, specfun
from .background import BackgroundParams, DomainError, ModeParams, frequencies
from .cutoffs import plateau, plateau_derivative
from .grid import SpacetimeField
from .prng import SplitMix64

R_MIN = 1e-6


class StepFailureError(RuntimeError):
    """The adaptive integrator gave up."""


class SingularityGuardError(DomainError):
    """Integration requested at or below ``R_MIN``."""


@dataclass
class ModeProfile:
    """Radial profile ``uhat(lam, r)`` of one temporal frequency."""

    lam: float
    r: np.ndarray
    values: np.ndarray
    bg: BackgroundParams
    mode: ModeParams
    derivative: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.r.ndim != 1 or self.r.size != self.values.size:
            raise ValueError("r and values must be 1-d of equal length")
        if self.r[0] <= 0 or np.any(np.diff(self.r) <= 0):
            raise ValueError("r grid must be positive and strictly increasing")

    @property
    def nu(self) -> float:
        return float(self.mode.order(self.bg, self.lam))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "re", "im"])
            for rj, v in zip(self.r, self.values):
                w.writerow([repr(float(rj)), repr(float(v.real)), repr(float(v.imag))])


# ---------------------------------------------------------------------------
# exact solutions


@dataclass(frozen=True)
class ExactMode:
    """``r -> J_order(kappa r)`` or ``r -> I_order(kappa r)``."""

    kind: str  # "J" or "I"
    order: float
    kappa: float
    branch: str

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("exact modes are evaluated on r > 0")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", specfun.AccuracyWarning)
            if self.kind == "J":
                return specfun.bessel_j(self.order, self.kappa * r)
            return specfun.bessel_i(self.order, self.kappa * r)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", specfun.AccuracyWarning)
            if self.kind == "J":
                return self.kappa * specfun.bessel_j_derivative(self.order, self.kappa * r)
            return self.kappa * specfun.bessel_i_derivative(self.order, self.kappa * r)


def exact_mode(bg: BackgroundParams, mode: ModeParams, lam: float,
               branch: str = "regular") -> ExactMode:
    """Closed-form radial solution at frequency ``lam``.

    ``branch="regular"`` picks order ``+|nu|``, ``"singular"`` picks ``-|nu|``
    (only for non-integer ``nu``, otherwise the two coincide up to sign).
    """
    if branch not in ("regular", "singular"):
        raise ValueError(f"unknown branch {branch!r}")
    disc = lam * lam - mode.m**2
    if disc == 0:
        raise DomainError("lam^2 = m^2 is a turning-degenerate frequency")
    nu = float(mode.order(bg, lam))
    if branch == "singular" and float(nu).is_integer():
        raise specfun.GammaPoleError("singular branch needs a non-integer order")
    order = abs(nu) if branch == "regular" else -abs(nu)
    kind = "J" if disc > 0 else "I"
    return ExactMode(kind, order, math.sqrt(abs(disc)), branch)


# ---------------------------------------------------------------------------
# ODE integration


def _rhs(r, y, nu2, shift):
    # y = (uhat, r uhat');  (r uhat')' = (nu^2/r + (m^2 - lam^2) r) uhat
    return np.array([y[1] / r, (nu2 / r + shift * r) * y[0]])


def solve_mode_ode(bg: BackgroundParams, mode: ModeParams, lam: float, r_span,
                   initial, r_start: float | None = None, tol: float = 1e-12,
                   r_eval=None) -> ModeProfile:
    """Integrate the radial mode equation from ``(uhat, uhat')`` at ``r_start``.

    The system is solved in ``(uhat, r uhat')`` with DOP853, outward and
    inward from ``r_start`` (default ``r_span[0]``).  ``r_eval`` defaults to
    401 equispaced points in ``r_span``.
    """
    r_lo, r_hi = float(r_span[0]), float(r_span[1])
    if r_lo <= R_MIN:
        raise SingularityGuardError(f"r_span must stay above r_min = {R_MIN}")
    if not r_hi > r_lo:
        raise ValueError("r_span must be increasing")
    r0 = r_lo if r_start is None else float(r_start)
    if not (r_lo <= r0 <= r_hi):
        raise ValueError("r_start must lie in r_span")
    if r_eval is None:
        r_eval = np.linspace(r_lo, r_hi, 401)
    r_eval = np.asarray(r_eval, dtype=float)
    u0, du0 = complex(initial[0]), complex(initial[1])
    nu = float(mode.order(bg, lam))
    shift = mode.m**2 - lam * lam
    vals = np.zeros(r_eval.size, complex)
    ders = np.zeros(r_eval.size, complex)
    y0 = np.array([u0, r0 * du0])
    scale = float(np.max(np.abs(y0)))
    if scale == 0.0:
        return ModeProfile(lam, r_eval, vals, bg, mode, ders, {"nfev": 0})

    nfev = 0
    for sel, end in ((r_eval >= r0, r_hi), (r_eval < r0, r_lo)):
        if not np.any(sel) or end == r0:
            continue
        pts = r_eval[sel]
        order = np.argsort(pts) if end > r0 else np.argsort(-pts)
        sol = solve_ivp(_rhs, (r0, end), y0, method="DOP853", t_eval=pts[order],
                        rtol=tol, atol=tol * 1e-6 * scale, args=(nu * nu, shift))
        if sol.status != 0:
            raise StepFailureError(sol.message)
        nfev += sol.nfev
        idx = np.flatnonzero(sel)[order]
        vals[idx] = sol.y[0]
        ders[idx] = sol.y[1] / pts[order]
    return ModeProfile(lam, r_eval, vals, bg, mode, ders, {"nfev": int(nfev)})


def mode_residual(bg: BackgroundParams, mode: ModeParams, lam: float, fn, r,
                  h: float = 1e-3) -> np.ndarray:
    """``(r d_r)^2 f - (nu^2 + (m^2 - lam^2) r^2) f`` by 8th-order differences in ``log r``."""
    r = np.asarray(r, dtype=float)
    x = np.log(r)
    offs = np.arange(-4, 5)
    w = _fd.fornberg_weights(0.0, offs * h, 2)[2]
    samples = np.stack([fn(np.exp(x + o * h)) for o in offs])
    d2 = np.tensordot(w, samples, axes=1)
    nu = float(mode.order(bg, lam))
    return d2 - (nu * nu + (mode.m**2 - lam * lam) * r * r) * fn(r)


# ---------------------------------------------------------------------------
# unique continuation


@dataclass
class UniqueContinuationReport:
    lam: float
    interval: tuple
    window: tuple
    zero_data_sup: float
    bessel_window_mass: float
    min_window_mass: float
    n_trials: int
    window_masses: list

    def passed(self, tol: float = 1e-12) -> bool:
        return (self.zero_data_sup <= tol and self.min_window_mass > 0
                and self.bessel_window_mass > 0)

    def as_dict(self) -> dict:
        return asdict(self)


def _window_mass(profile: ModeProfile, window) -> float:
    sel = (profile.r >= window[0]) & (profile.r <= window[1])
    rr = profile.r[sel]
    return float(np.trapezoid(np.abs(profile.values[sel]) ** 2 * rr, rr))


def unique_continuation_check(bg: BackgroundParams, mode: ModeParams, lam: float,
                              interval, tol: float = 1e-12, n_trials: int = 100,
                              seed: int = 0, n_eval: int = 801) -> UniqueContinuationReport:
    """Numerical counterpart of unique continuation across r = a on one frequency.

    (i) zero Cauchy data at a point of ``interval`` below ``a`` propagates to
    the zero profile; (ii) nontrivial data, one Bessel-initialised and
    ``n_trials`` random, keep positive L^2 mass on the window
    ``(a/2, a)`` clipped to ``interval``.  Masses are normalised by the size
    of the Cauchy data.
    """
    lo, hi = float(interval[0]), float(interval[1])
    a = bg.a_rot
    if not (0 < lo < a < hi):
        raise ValueError("interval must lie in (0, inf) and contain a_rot")
    window = (max(lo, 0.5 * a), a)
    r0 = 0.5 * (window[0] + window[1])
    r_eval = np.linspace(lo, hi, n_eval)

    zero = solve_mode_ode(bg, mode, lam, (lo, hi), (0.0, 0.0), r_start=r0, r_eval=r_eval)
    zero_sup = float(np.max(np.abs(zero.values)))

    if lam * lam != mode.m**2:
        ex = exact_mode(bg, mode, lam, "regular")
        init = (ex(r0), ex.derivative(r0))
    else:
        init = (1.0, 0.0)
    prof = solve_mode_ode(bg, mode, lam, (lo, hi), init, r_start=r0, r_eval=r_eval, tol=tol)
    bessel_mass = _window_mass(prof, window) / (abs(init[0]) ** 2 + abs(init[1]) ** 2)

    rng = SplitMix64(seed)
    masses = []
    for _ in range(n_trials):
        c = rng.complex_normal(2)
        prof = solve_mode_ode(bg, mode, lam, (lo, hi), c, r_start=r0, r_eval=r_eval, tol=tol)
        masses.append(_window_mass(prof, window) / float(np.sum(np.abs(c) ** 2)))
    return UniqueContinuationReport(
        lam=float(lam), interval=(lo, hi), window=window, zero_data_sup=zero_sup,
        bessel_window_mass=float(bessel_mass),
        min_window_mass=float(min(masses)) if masses else float("nan"),
        n_trials=n_trials, window_masses=[float(m) for m in masses],
    )


# ---------------------------------------------------------------------------
# H^1_k norm


@dataclass
class H1kNormReport:
    l2: float
    dt: float
    dr: float
    twisted: float

    @property
    def total(self) -> float:
        return self.l2 + self.dt + self.dr + self.twisted

    @property
    def parts(self) -> tuple:
        return (self.l2, self.dt, self.dr, self.twisted)

    def as_dict(self) -> dict:
        return {"total": self.total, "l2": self.l2, "dt": self.dt, "dr": self.dr,
                "twisted": self.twisted}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=1, sort_keys=True)


def h1k_norm(u: SpacetimeField, bg: BackgroundParams) -> H1kNormReport:
    """Squared H^1_k norm with measure ``r dr dt`` on a periodic, uniform grid.

    ``d_t`` is spectral, ``d_r`` fourth-order finite differences, and the
    twisted term is ``|r^-1 (a d_t + ik) u|^2``.
    """
    w = u.weights()
    lam = frequencies(u.t)[:, None]
    uh = np.fft.fft(u.values, axis=0)
    ut = np.fft.ifft(1j * lam * uh, axis=0)
    twist = np.fft.ifft(1j * (bg.a_rot * lam + u.k) * uh, axis=0) / u.r[None, :]
    ur = (_fd.first_derivative(u.r) @ u.values.T).T

    def q(v):
        return float(np.sum(np.abs(v) ** 2 * w))

    return H1kNormReport(q(u.values), q(ut), q(ur), q(twist))


# ---------------------------------------------------------------------------
# counterexample


@dataclass(frozen=True)
class ZetaSpec:
    """Window in the order ``nu = a lam + k``: ``bump(nu) = zeta(lam) f1(nu)``.

    ``bump`` is 1 on ``plateau`` and vanishes outside ``support``.
    """

    support: tuple = (-0.75, -0.25)
    plateau: tuple = (-2.0 / 3.0, -1.0 / 3.0)

    def bump(self, nu):
        return plateau(nu, self.support, self.plateau)

    @classmethod
    def control(cls) -> "ZetaSpec":
        return cls((0.25, 0.75), (1.0 / 3.0, 2.0 / 3.0))


@dataclass(frozen=True)
class CounterexampleGrids:
    """Base resolution; level ``l`` doubles the node counts ``l`` times."""

    n_lambda: int = 200
    t_half: float = 400.0
    n_t: int = 1024
    r_min: float = 1e-7
    n_r_per_decade: int = 48
    levels: int = 3
    eps: tuple = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3)


@dataclass
class CounterexampleReport:
    nu_window: tuple
    l2_norms: list
    l2_ratios: list
    eps: list
    dr_norms: list  # squared, per level, per eps
    slope: float
    slope_window: tuple
    plancherel_defect: float
    f1_check: float

    def l2_stable(self, rel: float = 0.01) -> bool:
        return all(abs(q - 1.0) <= rel for q in self.l2_ratios)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=1, sort_keys=True)


def f1_coefficient(nu, kappa):
    r"""``f1`` with :math:`\partial_r J_\nu(\kappa r) = f_1 r^{\nu-1} + O(r^{\nu+1})`."""
    nu = np.asarray(nu, dtype=float)
    return nu * (0.5 * kappa) ** nu * specfun.rgamma(nu + 1.0)


def f1_numerical_check(nu: float, kappa: float = 1.0, r: float = 1e-4) -> float:
    """Relative gap between ``f1 r^(nu-1)`` and a centred difference of ``J_nu(kappa r)``."""
    h = 1e-3 * r
    d = (specfun.bessel_j(nu, kappa * (r + h)) - specfun.bessel_j(nu, kappa * (r - h))) / (2 * h)
    lead = float(f1_coefficient(nu, kappa)) * r ** (nu - 1.0)
    return float(abs(d - lead) / abs(lead))


def _chi(bg: BackgroundParams):
    a = bg.a_rot
    sup, flat = (-np.inf, a), (-np.inf, 0.5 * a)
    return (lambda r: plateau(r, sup, flat)), (lambda r: plateau_derivative(r, sup, flat))


def _assemble(bg, k, zeta, grids, level):
    a = bg.a_rot
    n_lam = grids.n_lambda * 2**level
    x, wq = roots_legendre(n_lam)
    nu_lo, nu_hi = zeta.support
    nu = 0.5 * (nu_hi - nu_lo) * x + 0.5 * (nu_hi + nu_lo)
    lam = (nu - k) / a
    w_lam = wq * 0.5 * (nu_hi - nu_lo) / a
    kap = np.abs(lam)
    f1 = f1_coefficient(nu, kap)
    if np.any(f1 == 0):
        warnings.warn("zeta construction hit a zero of f1", RuntimeWarning, stacklevel=3)
    bump = zeta.bump(nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta_vals = np.where(bump > 0, bump / f1, 0.0)

    n_t = grids.n_t * 2**level
    t = np.linspace(-grids.t_half, grids.t_half, n_t, endpoint=False)
    decades = math.log10(a / grids.r_min)
    n_r = int(round(decades * grids.n_r_per_decade * 2**level)) + 1
    r = np.logspace(math.log10(grids.r_min), math.log10(a), n_r)

    chi, dchi = _chi(bg)
    c, dc = chi(r), dchi(r)
    X = kap[:, None] * r[None, :]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", specfun.AccuracyWarning)
        J = specfun.bessel_j(nu[:, None], X)
        dJ = kap[:, None] * specfun.bessel_j_derivative(nu[:, None], X)
    A = (w_lam * zeta_vals)[:, None] * (c[None, :] * J)
    dA = (w_lam * zeta_vals)[:, None] * (dc[None, :] * J + c[None, :] * dJ)
    E = np.exp(1j * np.outer(t, lam))
    return {"t": t, "r": r, "phi": E @ A, "dphi": E @ dA, "lam": lam, "w_lam": w_lam,
            "coef": A / w_lam[:, None], "dcoef": dA / w_lam[:, None]}


def _radial_integral(vals_sq, r):
    """``int |.|^2 r dr`` on a log grid: trapezoid in ``log r`` with weight ``r^2``."""
    return np.trapezoid(vals_sq * r**2, np.log(r), axis=-1)


def _tail_integral(vals_sq, r, eps):
    """``int_{r > eps} vals_sq r dr`` by trapezoid plus linear interpolation at ``eps``."""
    x = np.log(r)
    g = vals_sq * r**2
    seg = 0.5 * (g[1:] + g[:-1]) * np.diff(x)
    tail = np.concatenate((np.cumsum(seg[::-1])[::-1], [0.0]))
    xe = math.log(eps)
    j = int(np.searchsorted(x, xe)) - 1
    j = max(0, min(j, x.size - 2))
    th = (xe - x[j]) / (x[j + 1] - x[j])
    ge = g[j] + th * (g[j + 1] - g[j])
    return float(tail[j + 1] + 0.5 * (ge + g[j + 1]) * (x[j + 1] - xe))


def counterexample(bg: BackgroundParams, k: int, zeta_spec: ZetaSpec | None = None,
                   grids: CounterexampleGrids | None = None):
    """Superpose ``zeta(lam) chi(r) e^{i lam t} J_nu(|lam| r)`` over the ``nu`` window.

    Returns the field on the finest level and a :class:`CounterexampleReport`
    with the L^2 norm per level and ``|d_r phi|^2`` integrated over
    ``r > eps`` for each ``eps`` in the ladder.  The slope is a least-squares
    fit of ``log`` of the finest-level tail norms against ``log eps``.
    """
    zeta = zeta_spec or ZetaSpec()
    grids = grids or CounterexampleGrids()
    l2, dr_norms = [], []
    lv = None
    for level in range(grids.levels):
        lv = _assemble(bg, k, zeta, grids, level)
        t, r = lv["t"], lv["r"]
        dt = t[1] - t[0]
        dens = np.sum(np.abs(lv["phi"]) ** 2, axis=0) * dt
        l2.append(float(_radial_integral(dens, r)))
        ddens = np.sum(np.abs(lv["dphi"]) ** 2, axis=0) * dt
        dr_norms.append([_tail_integral(ddens, r, e) for e in grids.eps])
    ratios = [l2[i + 1] / l2[i] for i in range(len(l2) - 1)]

    # Plancherel on the finest level: int |phi|^2 dt ~ 2 pi sum w |coef|^2
    r = lv["r"]
    pl = 2 * np.pi * np.sum(lv["w_lam"][:, None] * np.abs(lv["coef"]) ** 2, axis=0)
    pl_norm = float(_radial_integral(pl, r))
    pl_defect = abs(pl_norm - l2[-1]) / pl_norm

    eps = np.log(np.asarray(grids.eps))
    vals = np.log(np.asarray(dr_norms[-1]))
    slope = float(np.polyfit(eps, vals, 1)[0])
    mid = 0.5 * (zeta.support[0] + zeta.support[1])
    check = f1_numerical_check(mid, abs((mid - k) / bg.a_rot))
    report = CounterexampleReport(
        nu_window=tuple(zeta.support), l2_norms=l2, l2_ratios=ratios,
        eps=list(grids.eps), dr_norms=dr_norms, slope=slope,
        slope_window=(2 * zeta.support[0], 2 * zeta.support[1]),
        plancherel_defect=float(pl_defect), f1_check=check,
    )
    field_ = SpacetimeField(lv["t"], r, lv["phi"], k=k, meta={"r_grid": "log"})
    return field_, report
