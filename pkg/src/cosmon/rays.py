"""Null bicharacteristics of the mode operator.

Rays are integrated upstairs in the cotangent bundle, where the Hamilton
field of ``p = (a^2/r^2 - 1) lam^2 + xi^2`` is smooth; the base projection
is singular at r = a (t is stationary there) so neither t nor r is ever used
as the flow parameter.  ``lam`` and ``eta`` are conserved and, for null rays,
``r(s)^2 = a^2 + (2 lam s + c)^2`` with ``c = r(0) xi(0) / lam``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .background import BackgroundParams, DomainError, PhasePoint, in_characteristic_set

DEFAULT_TOL = 1e-10
# |dt/ds| >= |lam| holds once 1 - a^2/r^2 >= 1/2
MONOTONE_RADIUS_FACTOR = 2.0


class StepFailureError(RuntimeError):
    pass


class HorizonExceededError(RuntimeError):
    pass


@dataclass
class RayPath:
    """Samples ``(s, q)`` of one bicharacteristic, ordered by ``s``."""

    s: np.ndarray
    states: np.ndarray  # (n, 6): t, r, phi, lam, xi, eta
    params: BackgroundParams
    tol: float = DEFAULT_TOL
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.s.size

    @property
    def t(self):
        return self.states[:, 0]

    @property
    def r(self):
        return self.states[:, 1]

    @property
    def lam(self):
        return self.states[:, 3]

    @property
    def xi(self):
        return self.states[:, 4]

    @property
    def eta(self):
        return self.states[:, 5]

    def point(self, i: int) -> PhasePoint:
        return PhasePoint.from_array(self.states[i])

    def closed_form_defect(self) -> np.ndarray:
        """``r(s)^2 - a^2 - (2 lam s + c)^2`` along the samples (null rays)."""
        i0 = int(np.argmin(np.abs(self.s)))
        s0 = self.s[i0]
        lam = self.states[i0, 3]
        c = self.states[i0, 1] * self.states[i0, 4] / lam - 2.0 * lam * s0
        return self.r**2 - self.params.a_rot**2 - (2.0 * lam * self.s + c) ** 2

    def rows(self):
        for s, q in zip(self.s, self.states):
            yield (float(s), *(float(v) for v in q))

    def to_csv(self, path_or_file) -> None:
        write_rays_csv(path_or_file, [self])


def write_rays_csv(path, rays, with_index: bool = False) -> None:
    """CSV with header ``s,t,r,phi,lambda,xi,eta`` (``ray,`` prepended if indexed)."""
    header = ["s", "t", "r", "phi", "lambda", "xi", "eta"]
    if with_index:
        header = ["ray"] + header
    own = not hasattr(path, "write")
    fh = open(path, "w", newline="") if own else path
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, ray in enumerate(rays):
            for row in ray.rows():
                vals = [repr(v) for v in row]
                w.writerow(([str(i)] if with_index else []) + vals)
    finally:
        if own:
            fh.close()


def hamilton_field(bg: BackgroundParams, q: PhasePoint) -> np.ndarray:
    """``(dt, dr, dphi, dlam, dxi, deta)`` of the Hamilton vector field."""
    if q.r <= 0:
        raise DomainError("Hamilton field needs r > 0")
    return _rhs(0.0, q.as_array(), bg.a_rot * bg.a_rot)


def _rhs(s, y, a2):
    _, r, _, lam, xi, _ = y
    return np.array([
        -2.0 * lam * (1.0 - a2 / (r * r)),
        2.0 * xi,
        0.0,
        0.0,
        2.0 * a2 * lam * lam / (r * r * r),
        0.0,
    ])


def _integrate(bg, y0, s_end, tol, s_eval=None, events=None):
    a2 = bg.a_rot**2
    lam = y0[3]
    scale = max(abs(lam), abs(y0[4]), 1.0)
    sol = solve_ivp(
        _rhs, (0.0, s_end), y0, method="DOP853", args=(a2,), rtol=tol,
        atol=tol * 1e-3 * scale, t_eval=s_eval, events=events, dense_output=False,
    )
    if sol.status == -1:
        raise StepFailureError(sol.message)
    return sol


def integrate_ray(bg: BackgroundParams, q0: PhasePoint, s_range=(-1.0, 1.0),
                  tol: float = DEFAULT_TOL, n_samples: int = 201, s_eval=None) -> RayPath:
    """Integrate the bicharacteristic through ``q0`` over ``s_range``.

    ``q0`` must lie on Sigma with ``eta = 0``; ``s_range`` must contain 0.
    Samples are uniform in ``s`` unless ``s_eval`` is given.
    """
    s_lo, s_hi = float(s_range[0]), float(s_range[1])
    if not s_lo <= 0.0 <= s_hi:
        raise ValueError("s_range must contain 0")
    if q0.eta != 0:
        raise ValueError("only eta = 0 rays are supported")
    if not in_characteristic_set(bg, q0, max(tol, 1e-12) * 1e2):
        raise ValueError("initial point is not on the characteristic set")
    if q0.lam == 0:
        raise DomainError("null rays need lam != 0")
    if s_eval is None:
        s_eval = np.linspace(s_lo, s_hi, n_samples)
    s_eval = np.asarray(s_eval, dtype=float)
    y0 = q0.as_array()
    parts = []
    back = s_eval[s_eval < 0]
    fwd = s_eval[s_eval >= 0]
    if back.size:
        sol = _integrate(bg, y0, s_lo, tol, s_eval=back[::-1])
        parts.append((sol.t[::-1], sol.y[:, ::-1].T))
    if fwd.size and s_hi == 0.0:
        parts.append((fwd[:1], y0[None, :]))
    elif fwd.size:
        sol = _integrate(bg, y0, s_hi, tol, s_eval=fwd)
        parts.append((sol.t, sol.y.T))
    s = np.concatenate([p[0] for p in parts])
    states = np.concatenate([p[1] for p in parts])
    # r_min = a on null rays, so this only trips on a broken integration
    if np.any(states[:, 1] <= 0.5 * bg.a_rot):
        raise DomainError("ray reached the r_min guard")
    return RayPath(s, states, bg, tol)


def sigma_point(bg: BackgroundParams, t: float, r: float, lam: float, xi_sign: float) -> PhasePoint:
    """The point of Sigma over ``(t, r)`` with given ``lam`` and sign of ``xi`` (r >= a)."""
    if r < bg.a_rot:
        raise DomainError("Sigma lies over r >= a")
    xi = math.copysign(abs(lam) * math.sqrt(max(0.0, 1.0 - bg.a_rot**2 / r**2)), xi_sign)
    return PhasePoint(t, r, 0.0, lam, xi, 0.0)


def _flow_until(bg, q, direction, t_stop_fn, r_stop, tol, s_cap):
    """Integrate from ``q`` in ``direction`` (+1/-1 in s) until an event."""
    y0 = q.as_array()
    events = []

    def leave_r(s, y, *a):
        return y[1] - r_stop

    leave_r.terminal = True
    events.append(leave_r)
    if t_stop_fn is not None:
        def leave_t(s, y, *a):
            return t_stop_fn(y[0])

        leave_t.terminal = True
        events.append(leave_t)
    s_end = direction * s_cap
    a2 = bg.a_rot**2
    scale = max(abs(y0[3]), abs(y0[4]), 1.0)
    sol = solve_ivp(
        _rhs, (0.0, s_end), y0, method="DOP853", args=(a2,), rtol=tol,
        atol=tol * 1e-3 * scale, events=events, dense_output=True,
    )
    if sol.status == -1:
        raise StepFailureError(sol.message)
    return sol


def forward_flowout(bg: BackgroundParams, seeds, horizon: float, tol: float = 1e-8,
                    r_stop: float = np.inf, n_samples: int = 200, threads: int = 1):
    """Forward-in-time flowout of ``seeds``.

    Both flow directions are integrated until ``t - t(seed)`` reaches
    ``horizon`` (or r exceeds ``r_stop``); only samples with
    ``t >= t(seed)`` are kept.  Since ``dt/ds = -2 lam (1 - a^2/r^2)`` has a
    fixed sign on Sigma, t is monotone along every null ray and each seed
    contributes exactly one half-ray (t is only stationary, not reversed, at
    r = a).  Output order follows the seed order.
    """
    seeds = list(seeds)

    def one(q):
        out = []
        s_cap = 50.0 * (horizon + r_stop if np.isfinite(r_stop) else horizon + 10.0) / max(abs(q.lam), 1e-300)
        for direction in (1.0, -1.0):
            sol = _flow_until(bg, q, direction, lambda t: t - (q.t + horizon), r_stop, tol, s_cap)
            s_end = sol.t[-1]
            s = np.linspace(0.0, s_end, n_samples)
            y = sol.sol(s).T
            keep = y[:, 0] >= q.t - 1e-9 * max(1.0, abs(q.t))
            if keep.sum() < 2:
                continue
            if direction < 0:
                s, y, keep = s[::-1], y[::-1], keep[::-1]
            out.append(RayPath(s[keep], y[keep], bg, tol, meta={"direction": direction}))
        return out

    if threads > 1 and len(seeds) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, seeds))
    else:
        results = [one(q) for q in seeds]
    return [ray for group in results for ray in group]


@dataclass
class EscapeReport:
    T: float
    n_seeds: int
    escape_times: np.ndarray  # t at escape, per seed
    seeds: list
    incoming: np.ndarray  # bool per seed

    def as_dict(self):
        return {
            "T": self.T,
            "n_seeds": self.n_seeds,
            "min_escape_t": float(np.min(self.escape_times)) if self.n_seeds else None,
            "max_escape_t": float(np.max(self.escape_times)) if self.n_seeds else None,
            "all_incoming": bool(np.all(self.incoming)),
        }


def escape_time_closed_form(a_rot: float, q: PhasePoint, r_target: float) -> float:
    """Exact t at which the backward-in-time ray through ``q`` reaches ``r_target``.

    With ``u = 2 lam s + c``, ``r^2 = a^2 + u^2`` and
    ``t(u) = t0 - (u - c) + a (atan(u/a) - atan(c/a))``.
    """
    c = q.r * q.xi / q.lam
    # dt/du = -u^2 / (a^2 + u^2) for either sign of lam, so the past is u -> +inf
    u = math.sqrt(r_target**2 - a_rot**2)
    if u < c:
        return q.t
    return q.t - (u - c) + a_rot * (math.atan(u / a_rot) - math.atan(c / a_rot))


def escape_analysis(bg: BackgroundParams, K, R: float, tol: float = 1e-10,
                    n_t: int = 5, n_r: int = 9, s_cap: float = 1e4) -> EscapeReport:
    """Backward-in-time escape of rays from ``K = (t_lo, t_hi, r_lo, r_hi)``.

    Seeds are placed on the unit-``|lam|`` slice of Sigma over an ``n_t x n_r``
    lattice of K (all four sign choices of ``(lam, xi)``).  Each ray is
    followed in the direction of decreasing t until it is outside
    ``r = R + 1`` at an incoming point (``sgn dr/ds = -sgn dt/ds``).  Returns
    the smallest ``T`` with every escape, and K itself, inside ``|t| <= T``.
    """
    t_lo, t_hi, r_lo, r_hi = map(float, K)
    if not (t_lo <= t_hi and 0 < r_lo <= r_hi):
        raise ValueError("K must be a box with 0 < r_lo <= r_hi")
    if R <= bg.a_rot:
        raise ValueError("R must exceed a_rot")
    a = bg.a_rot
    ts = np.linspace(t_lo, t_hi, n_t) if t_hi > t_lo else np.array([t_lo])
    rs = np.linspace(max(r_lo, a), r_hi, n_r) if r_hi > max(r_lo, a) else np.array([max(r_lo, a)])
    if r_hi < a:
        rs = np.array([])
    r_target = R + 1.0
    seeds, escapes, incoming = [], [], []
    for t0 in ts:
        for r0 in rs:
            for lam in (1.0, -1.0):
                for xs in (1.0, -1.0):
                    q = sigma_point(bg, t0, r0, lam, xs)
                    if q.xi == 0 and xs < 0:
                        continue
                    seeds.append(q)
                    # t decreases along +s when lam > 0
                    direction = 1.0 if lam > 0 else -1.0
                    if r0 > r_target and q.xi * q.lam > 0:
                        escapes.append(t0)
                        incoming.append(True)
                        continue
                    t_esc, y_esc = _escape(bg, q, direction, r_target, tol, s_cap)
                    dr = 2.0 * y_esc[4]
                    dt = -2.0 * y_esc[3] * (1.0 - a * a / y_esc[1] ** 2)
                    incoming.append(bool(np.sign(dr) == -np.sign(dt)))
                    escapes.append(t_esc)
    escapes = np.asarray(escapes, dtype=float)
    T = max(abs(t_lo), abs(t_hi))
    if escapes.size:
        T = max(T, float(np.max(np.abs(escapes))))
    return EscapeReport(T, len(seeds), escapes, seeds, np.asarray(incoming, dtype=bool))


def _escape(bg, q, direction, r_target, tol, s_cap):
    a2 = bg.a_rot**2
    y0 = q.as_array()

    # crossing r_target while moving outward
    def cross(s, y, *args):
        return y[1] - r_target

    cross.terminal = True
    cross.direction = 1.0
    sol = solve_ivp(
        _rhs, (0.0, direction * s_cap), y0, method="DOP853", args=(a2,), rtol=tol,
        atol=tol * 1e-3, events=[cross],
    )
    if sol.status == -1:
        raise StepFailureError(sol.message)
    if not sol.t_events[0].size:
        raise HorizonExceededError(f"ray from {q} did not reach r = {r_target}")
    y = sol.y_events[0][0]
    return float(y[0]), y
