"""Windowed-Fourier phase-space energy and the flowout comparison.

The map is a discrete Gabor transform with Gaussian windows on a lattice of
centres.  Each sample of ``u sqrt(r dr dt)`` is divided by the square root of
the frame function ``F = sum_c g_c^2`` before windowing, which makes the cell
energies add up to the weighted norm of ``u`` exactly (up to round-off), with
the raw frame constant kept for reference.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import svg
from ._validation import check_field
from .background import BackgroundParams, ModeParams
from .grid import SpacetimeField, _spacing
from .modes import unique_continuation_check
from .rays import forward_flowout, integrate_ray, sigma_point


class ResolutionWarning(UserWarning):
    pass


@dataclass
class PhaseEnergyMap:
    sigma: tuple  # (sigma_t, sigma_r)
    t_centers: np.ndarray
    r_centers: np.ndarray
    lam: np.ndarray
    xi: np.ndarray
    energy: np.ndarray  # (n_tc, n_rc, n_lam, n_xi)
    frame_constant: float
    norm2: float
    period: float
    k: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(self.energy.sum())

    def parseval_defect(self) -> float:
        if self.norm2 == 0:
            return 0.0 if self.total == 0 else math.inf
        return abs(self.total - self.norm2) / self.norm2

    def cells(self, min_energy: float = 0.0):
        """Indices and energies of cells with energy above ``min_energy``."""
        idx = np.argwhere(self.energy > min_energy)
        return idx, self.energy[tuple(idx.T)]

    def band_mask(self, min_frequency: float) -> np.ndarray:
        """``(n_lam, n_xi)`` mask of frequency cells with ``|(lam, xi)| >= min_frequency``."""
        return np.hypot(self.lam[:, None], self.xi[None, :]) >= min_frequency

    def band_max(self, min_frequency: float) -> float:
        band = self.band_mask(min_frequency)
        if not np.any(band):
            return 0.0
        return float(self.energy[:, :, band].max())

    def to_csv(self, path, min_energy: float = 0.0) -> None:
        """Rows ``t,r,lambda,xi,energy`` for cells with energy above ``min_energy``."""
        idx, e = self.cells(min_energy)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "r", "lambda", "xi", "energy"])
            for (i, j, p, q), ev in zip(idx, e):
                w.writerow([repr(float(self.t_centers[i])), repr(float(self.r_centers[j])),
                            repr(float(self.lam[p])), repr(float(self.xi[q])), repr(float(ev))])

    def to_svg(self, path, t_index: int | None = None) -> None:
        """Heat map over (r, xi) at one t-centre, summed over lambda."""
        if t_index is None:
            t_index = int(np.argmax(self.energy.sum(axis=(1, 2, 3))))
        sl = self.energy[t_index].sum(axis=1)  # (n_rc, n_xi)
        svg.heatmap(path, self.r_centers, self.xi, sl,
                    title=f"phase energy at t = {self.t_centers[t_index]:.4g}",
                    xlabel="r", ylabel="xi")


def _sigmas(window):
    if np.isscalar(window):
        return float(window), float(window)
    return float(window[0]), float(window[1])


def _bin(arr, factor, axis):
    if factor == 1:
        return arr
    shape = list(arr.shape)
    n = shape[axis]
    shape[axis:axis + 1] = [n // factor, factor]
    return arr.reshape(shape).sum(axis=axis + 1)


def phase_energy(u: SpacetimeField, window=0.2, bins=(2, 2), period: float | None = None) -> PhaseEnergyMap:
    """Gaussian-windowed 2-d FFT energy per lattice centre, summing to ``|u|^2``.

    ``window`` is ``sigma`` or ``(sigma_t, sigma_r)``; centres are spaced by
    about one window width, periodic in t and extending ``3 sigma`` past both
    ends of the r grid.  ``bins`` sums adjacent frequencies to save memory.
    """
    dt = _spacing(u.t)
    dr = _spacing(u.r)
    st, sr = _sigmas(window)
    if st < 4 * dt or sr < 4 * dr:
        warnings.warn("window narrower than 4 grid spacings", ResolutionWarning, stacklevel=2)
    n_t, n_r = u.values.shape
    T = period if period is not None else n_t * dt

    step_t = 1 << max(0, int(math.floor(math.log2(max(st / dt, 1.0)))))
    while n_t % step_t:
        step_t //= 2
    step_r = max(1, int(round(sr / dr)))
    ht = int(math.ceil(4 * st / dt))
    hr = int(math.ceil(4 * sr / dr))
    nwt = 1 << int(math.ceil(math.log2(2 * ht + 1)))
    nwr = 1 << int(math.ceil(math.log2(2 * hr + 1)))
    bt, br = bins
    if nwt % bt or nwr % br:
        raise ValueError("bins must divide the window FFT sizes")

    ot = np.arange(nwt) - nwt // 2
    orr = np.arange(nwr) - nwr // 2
    gt = np.exp(-((ot * dt) ** 2) / (2 * st * st)) * (np.abs(ot) <= ht)
    gr = np.exp(-((orr * dr) ** 2) / (2 * sr * sr)) * (np.abs(orr) <= hr)

    ext = int(math.ceil(3 * sr / dr))
    rc_idx = np.arange(-ext, n_r + ext, step_r)
    tc_idx = np.arange(0, n_t, step_t)

    # frame function on the grid
    Ft = np.zeros(n_t)
    for i in tc_idx:
        np.add.at(Ft, (i + ot) % n_t, gt**2)
    Fr = np.zeros(n_r)
    for j in rc_idx:
        sel = (j + orr >= 0) & (j + orr < n_r)
        Fr[(j + orr)[sel]] += gr[sel] ** 2
    F = np.outer(Ft, Fr)
    frame_const = float(np.sum(gt**2) * np.sum(gr**2) / (step_t * step_r))

    w = dt * dr * u.r[None, :]
    v = u.values * np.sqrt(w / F)
    vpad = np.zeros((n_t, n_r + 2 * (ext + nwr)), complex)
    off = ext + nwr
    vpad[:, off:off + n_r] = v
    g2 = np.outer(gt, gr)

    lam = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(nwt, d=dt))
    xi = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(nwr, d=dr))
    energy = np.zeros((tc_idx.size, rc_idx.size, nwt // bt, nwr // br))
    cols = (rc_idx[:, None] + orr[None, :]) + off
    for a, i in enumerate(tc_idx):
        rows = (i + ot) % n_t
        patch = vpad[rows][:, cols]  # (nwt, n_rc, nwr)
        patch = np.transpose(patch, (1, 0, 2)) * g2[None]
        spec = np.fft.fftshift(np.fft.fft2(patch), axes=(1, 2))
        e = np.abs(spec) ** 2 / (nwt * nwr)
        e = _bin(_bin(e, bt, 1), br, 2)
        energy[a] = e
    lam_b = lam.reshape(-1, bt).mean(axis=1)
    xi_b = xi.reshape(-1, br).mean(axis=1)
    return PhaseEnergyMap(
        sigma=(st, sr), t_centers=u.t[0] + tc_idx * dt, r_centers=u.r[0] + rc_idx * dr,
        lam=lam_b, xi=xi_b, energy=energy, frame_constant=frame_const,
        norm2=u.norm2(), period=T, k=int(u.k),
        meta={"window_fft": [nwt, nwr], "bins": list(bins), "step": [int(step_t), int(step_r)]},
    )


class PhaseEnergy(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`phase_energy` (stateless)."""

    def __init__(self, window=0.2, bins=(2, 2)):
        self.window = window
        self.bins = bins

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return phase_energy(check_field(X, name="u"), self.window, self.bins)


# ---------------------------------------------------------------------------
# flowout comparison


@dataclass(frozen=True)
class FlowoutThresholds:
    energy_rel: float = 1e-3  # fraction of the band maximum treated as noise
    tube_sigmas: float = 3.0
    angle_deg: float = 15.0
    # |(lam, xi)| floor; the window blurs directions by about 1/(sigma |zeta|)
    # radians, so 6/sigma keeps that below the angular tube for sigma = 0.2
    min_frequency: float = 30.0


@dataclass(frozen=True)
class Region:
    """Axis-aligned (t, r) box, periodic in t when ``period`` is set."""

    t_lo: float
    t_hi: float
    r_lo: float
    r_hi: float

    def contains(self, t, r, period=None):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        if period:
            mid = 0.5 * (self.t_lo + self.t_hi)
            dt = (t - mid + 0.5 * period) % period - 0.5 * period
            in_t = np.abs(dt) <= 0.5 * (self.t_hi - self.t_lo)
        else:
            in_t = (t >= self.t_lo) & (t <= self.t_hi)
        return in_t & (r >= self.r_lo) & (r <= self.r_hi)


@dataclass
class FlowoutReport:
    off_fraction: float
    on_energy: float
    off_energy: float
    n_on: int
    n_off: int
    n_rays: int
    vacuous: bool

    def passed(self, max_off: float = 0.05) -> bool:
        return self.vacuous or self.off_fraction <= max_off

    def as_dict(self) -> dict:
        return asdict(self)


def _unit(lam, xi):
    n = np.hypot(lam, xi)
    return lam / n, xi / n


def flowout_seeds(bg: BackgroundParams, fmap: PhaseEnergyMap, thresholds: FlowoutThresholds,
                  k: int = 0):
    """Points of Sigma over f's above-threshold cells, one per (t, r, sgn lam, sgn xi)."""
    top = fmap.band_max(thresholds.min_frequency)
    if top == 0:
        return []
    cut = thresholds.energy_rel * top
    idx, _ = fmap.cells(cut)
    cos_tol = math.cos(math.radians(thresholds.angle_deg))
    seen = {}
    for i, j, p, q in idx:
        t, r, lam, xi = fmap.t_centers[i], fmap.r_centers[j], fmap.lam[p], fmap.xi[q]
        if r <= bg.a_rot or lam == 0 or xi == 0 or abs(lam) <= 5 * abs(k):
            continue
        if math.hypot(lam, xi) < thresholds.min_frequency:
            continue
        q_sig = sigma_point(bg, float(t), float(r), float(lam), float(np.sign(xi)))
        e1 = _unit(lam, xi)
        e2 = _unit(q_sig.lam, q_sig.xi)
        if e1[0] * e2[0] + e1[1] * e2[1] < cos_tol:
            continue
        key = (int(i), int(j), int(np.sign(lam)), int(np.sign(xi)))
        if key not in seen:
            # unit-size lam: ray geometry is independent of the scale
            seen[key] = sigma_point(bg, float(t), float(r), float(np.sign(lam)), float(np.sign(xi)))
    return [seen[key] for key in sorted(seen)]


def flowout_consistency(umap: PhaseEnergyMap, rays, f_support: Region, bg: BackgroundParams,
                        r_limit: float, thresholds: FlowoutThresholds | None = None) -> FlowoutReport:
    """Split u's above-threshold energy into cells on and off the forward flowout.

    Only cells with ``r < r_limit``, outside ``f_support`` and with
    ``|lam| > 5|k|`` are classified.  A cell is on the flowout when some ray
    sample lies within ``tube_sigmas`` window widths in both t and r and
    within ``angle_deg`` of the cell's ``(lam, xi)`` direction.
    """
    th = thresholds or FlowoutThresholds()
    top = umap.band_max(th.min_frequency)
    if top == 0:
        return FlowoutReport(0.0, 0.0, 0.0, 0, 0, len(rays), True)
    if not rays:
        warnings.warn("empty ray set: every classified cell is off-flowout", RuntimeWarning, stacklevel=2)
    cut = th.energy_rel * top
    idx, en = umap.cells(cut)
    tc = umap.t_centers[idx[:, 0]]
    rc = umap.r_centers[idx[:, 1]]
    lc = umap.lam[idx[:, 2]]
    xc = umap.xi[idx[:, 3]]
    keep = ((rc < r_limit) & ~f_support.contains(tc, rc, umap.period)
            & (np.abs(lc) > 5 * abs(umap.k)) & (np.hypot(lc, xc) >= max(th.min_frequency, 1e-300)))
    idx, en, tc, rc, lc, xc = idx[keep], en[keep], tc[keep], rc[keep], lc[keep], xc[keep]
    if idx.size == 0:
        return FlowoutReport(0.0, 0.0, 0.0, 0, 0, len(rays), True)

    if rays:
        S = np.concatenate([ray.states for ray in rays])
        st_, sr_, sl_, sx_ = S[:, 0], S[:, 1], S[:, 3], S[:, 4]
        ul, ux = _unit(sl_, sx_)
    on = np.zeros(idx.shape[0], bool)
    cos_tol = math.cos(math.radians(th.angle_deg))
    tt = th.tube_sigmas * umap.sigma[0]
    rr = th.tube_sigmas * umap.sigma[1]
    P = umap.period
    if rays:
        # group cells by centre so that the position test is done once per centre
        centres = {}
        for n, (i, j) in enumerate(idx[:, :2]):
            centres.setdefault((int(i), int(j)), []).append(n)
        for (i, j), members in sorted(centres.items()):
            dtt = st_ - umap.t_centers[i]
            if P:
                dtt = (dtt + 0.5 * P) % P - 0.5 * P
            near = (np.abs(dtt) <= tt) & (np.abs(sr_ - umap.r_centers[j]) <= rr)
            if not np.any(near):
                continue
            ulx, uxx = ul[near], ux[near]
            m = np.asarray(members)
            cl, cx = _unit(lc[m], xc[m])
            cosang = np.outer(cl, ulx) + np.outer(cx, uxx)
            on[m] = np.max(cosang, axis=1) >= cos_tol
    on_e = float(en[on].sum())
    off_e = float(en[~on].sum())
    return FlowoutReport(off_e / (on_e + off_e), on_e, off_e, int(on.sum()), int((~on).sum()),
                         len(rays), False)


def flowout_rays(bg: BackgroundParams, fmap: PhaseEnergyMap, horizon: float, r_stop: float,
                 thresholds: FlowoutThresholds | None = None, k: int = 0, threads: int = 1):
    seeds = flowout_seeds(bg, fmap, thresholds or FlowoutThresholds(), k)
    return seeds, forward_flowout(bg, seeds, horizon, r_stop=r_stop, threads=threads)


def backward_point(bg: BackgroundParams, seed, back_time: float):
    """Phase point on ``seed``'s ray at time ``t(seed) - back_time``."""
    # t decreases along s when lam > 0, since dt/ds = -2 lam (1 - a^2/r^2)
    sgn = 1.0 if seed.lam > 0 else -1.0
    s_end = sgn * back_time
    for _ in range(60):
        ray = integrate_ray(bg, seed, (0.0, s_end) if s_end > 0 else (s_end, 0.0),
                            tol=1e-10, n_samples=801)
        if ray.t.min() <= seed.t - back_time:
            break
        s_end *= 2.0
    i = int(np.argmin(np.abs(ray.t - (seed.t - back_time))))
    return ray.point(i)


def backward_packet(like: SpacetimeField, q, lam_mag: float, width: float) -> SpacetimeField:
    """Gaussian packet at ``q`` with covector direction ``(lam, xi)`` scaled to ``|lam| = lam_mag``."""
    scale = lam_mag / abs(q.lam)
    T, R = np.meshgrid(like.t, like.r, indexing="ij")
    P = like.t.size * _spacing(like.t)
    dT = (T - q.t + 0.5 * P) % P - 0.5 * P
    vals = np.exp(-(dT**2 + (R - q.r) ** 2) / (2 * width**2)
                  + 1j * scale * (q.lam * dT + q.xi * (R - q.r)))
    return like.like(vals)


def negative_control(bg: BackgroundParams, like: SpacetimeField, seeds, f_support: Region,
                     r_limit: float, back_time: float = 3.0, lam_mag: float = 40.0,
                     width: float = 0.15):
    """Packet on the backward ray of the first seed that lands in ``(a, r_limit)`` away from f.

    Returns ``(field, point)`` or ``(None, None)`` when no seed qualifies.
    """
    P = like.t.size * _spacing(like.t)
    margin = 3 * width
    for q in seeds:
        p = backward_point(bg, q, back_time)
        if not (bg.a_rot + margin < p.r < r_limit - margin):
            continue
        if f_support.contains(p.t % P, p.r, P):
            continue
        return backward_packet(like, p, lam_mag, width), p
    return None, None


# ---------------------------------------------------------------------------
# elliptic region


@dataclass
class EllipticReport:
    delta: float
    fraction: float
    profile_t: list
    uc_zero_sup: float | None = None
    uc_min_window_mass: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def elliptic_support_probe(u: SpacetimeField, bg: BackgroundParams, delta: float = 0.1,
                           r_cap: float | None = None, uc_lambda: float | None = None,
                           uc_interval=None, seed: int = 0, n_trials: int = 20) -> EllipticReport:
    """Mass of ``u`` in ``{r < a(1 - delta)}`` relative to ``{r < r_cap}``, with its t-profile.

    When ``uc_lambda`` is given, the unique-continuation experiment is run on
    that frequency slice as the contrapositive check.
    """
    w = u.weights()
    dens = np.abs(u.values) ** 2 * w
    inner = u.r < bg.a_rot * (1 - delta)
    cap = np.ones(u.r.size, bool) if r_cap is None else u.r < r_cap
    total = float(dens[:, cap].sum())
    frac = float(dens[:, inner].sum() / total) if total > 0 else 0.0
    prof = dens[:, inner].sum(axis=1)
    prof_tot = dens[:, cap].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        profile = np.where(prof_tot > 0, prof / prof_tot, 0.0)
    rep = EllipticReport(delta, frac, [float(x) for x in profile])
    if uc_lambda is not None:
        interval = uc_interval or (0.25 * bg.a_rot, 2.0 * bg.a_rot)
        uc = unique_continuation_check(bg, ModeParams(u.k), uc_lambda, interval,
                                       n_trials=n_trials, seed=seed)
        rep.uc_zero_sup = uc.zero_data_sup
        rep.uc_min_window_mass = uc.min_window_mass
    return rep


def slice_consistency(u: SpacetimeField, bg: BackgroundParams, mode: ModeParams, lam_index: int,
                      interval, tol: float = 1e-10) -> dict:
    """Test one frequency slice of ``u`` against unique continuation across r = a.

    A slice that vanishes on ``interval`` below ``a`` but not above cannot
    solve the radial equation there; such slices are flagged.  The residual of
    the radial operator on the interval is reported alongside.
    """
    from .background import radial_operator

    lam = 2 * np.pi * np.fft.fftfreq(u.t.size, d=_spacing(u.t))[lam_index]
    uh = np.fft.fft(u.values, axis=0)[lam_index]
    lo, hi = interval
    sel = (u.r >= lo) & (u.r <= hi)
    below = sel & (u.r < bg.a_rot)
    above = sel & (u.r >= bg.a_rot)
    m_below = float(np.sum(np.abs(uh[below]) ** 2 * u.r[below]))
    m_above = float(np.sum(np.abs(uh[above]) ** 2 * u.r[above]))
    L = radial_operator(bg, mode, lam, u.r, outer="free")
    res = L @ uh
    inner_rows = sel.copy()
    inner_rows[:2] = False
    inner_rows[-2:] = False
    denom = math.sqrt(np.sum(np.abs(uh[sel]) ** 2)) or 1.0
    residual = float(math.sqrt(np.sum(np.abs(res[inner_rows]) ** 2)) / denom)
    vanishes_below = m_below <= tol * max(m_above, 1e-300)
    flagged = vanishes_below and m_above > 0
    return {"lambda": float(lam), "mass_below": m_below, "mass_above": m_above,
            "residual_rel": residual, "flagged": bool(flagged)}
