"""Rotating cosmic string background and the single-mode wave operator.

The metric is ``g = (dr^2 + r^2 dphi^2) - (dt^2 - 2a dt dphi + a^2 dphi^2)``
with ``a > 0``; the opposite sign of the rotation is recovered by ``k -> -k``.
On the mode ``e^{ik phi} u(t, r)`` the wave operator reduces to

    box_k = (1 - a^2/r^2) d_t^2 - r^-2 (r d_r)^2 - (2 a i k / r^2) d_t + k^2 / r^2

which is hyperbolic for r > a and elliptic for r < a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _fd
from .grid import GridMismatchError, SpacetimeField, _spacing


class DomainError(ValueError):
    """Evaluation at r <= 0 or at the zero covector."""


@dataclass(frozen=True)
class BackgroundParams:
    a_rot: float

    def __post_init__(self):
        if not (self.a_rot > 0 and math.isfinite(self.a_rot)):
            raise ValueError(f"a_rot must be positive, got {self.a_rot}")


@dataclass(frozen=True)
class ModeParams:
    k: int = 0
    m: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k:
            raise ValueError(f"k must be an integer, got {self.k}")
        if not self.m >= 0:
            raise ValueError(f"mass must be non-negative, got {self.m}")

    def order(self, bg: BackgroundParams, lam):
        """Bessel order ``nu = a lam + k`` of the frequency-``lam`` radial problem."""
        return bg.a_rot * np.asarray(lam, dtype=float) + self.k


@dataclass(frozen=True)
class PhasePoint:
    """Point ``(t, r, phi; lam, xi, eta)`` of the cotangent bundle."""

    t: float
    r: float
    phi: float
    lam: float
    xi: float
    eta: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.r, self.phi, self.lam, self.xi, self.eta])

    @classmethod
    def from_array(cls, y) -> "PhasePoint":
        return cls(*(float(v) for v in y))

    def covector_norm(self) -> float:
        return math.sqrt(self.lam**2 + self.xi**2 + self.eta**2)


def principal_symbol(bg: BackgroundParams, q: PhasePoint) -> float:
    """``(a^2/r^2) lam^2 - lam^2 + xi^2``."""
    if q.r <= 0:
        raise DomainError("principal symbol needs r > 0")
    return (bg.a_rot**2 / q.r**2) * q.lam**2 - q.lam**2 + q.xi**2


def principal_symbol_array(a_rot: float, r, lam, xi):
    r = np.asarray(r, dtype=float)
    return (a_rot**2 / r**2 - 1.0) * np.asarray(lam) ** 2 + np.asarray(xi) ** 2


def in_characteristic_set(bg: BackgroundParams, q: PhasePoint, tol: float = 1e-12) -> bool:
    """Membership in ``Sigma = {(r^2 - a^2) lam^2 = r^2 xi^2, eta = 0}``.

    The polynomial form is used, with a tolerance relative to the covector
    size so that membership is conic.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mag2 = q.lam**2 + q.xi**2
    if mag2 == 0 and q.eta == 0:
        raise DomainError("zero covector")
    a2 = bg.a_rot**2
    r2 = q.r**2
    defect = abs((r2 - a2) * q.lam**2 - r2 * q.xi**2)
    return bool(defect <= tol * mag2 * max(r2, a2) and abs(q.eta) <= tol * math.sqrt(mag2))


def in_sigma_minus(bg: BackgroundParams, q: PhasePoint, tol: float = 1e-12) -> bool:
    """Incoming part of Sigma: r > a and ``sgn lam = sgn xi`` (both non-zero)."""
    if not in_characteristic_set(bg, q, tol):
        return False
    if q.r <= bg.a_rot or q.lam == 0 or q.xi == 0:
        return False
    return math.copysign(1.0, q.lam) == math.copysign(1.0, q.xi)


def system_symbol_gap(bg: BackgroundParams, r: float, n_dirs: int = 721) -> float:
    """``min |symbol| + |eta|`` over unit covectors at radius ``r``.

    Positive for r < a, which is ellipticity of the pair (box_k, d_phi - ik).
    """
    theta = np.linspace(0.0, 2.0 * np.pi, n_dirs)
    # unit sphere in (lam, xi, eta); eta = 0 is the only place the second
    # symbol can vanish, sample it densely together with a polar grid
    phi = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_dirs // 4 + 1)
    TH, PH = np.meshgrid(theta, phi)
    lam = np.cos(PH) * np.cos(TH)
    xi = np.cos(PH) * np.sin(TH)
    eta = np.sin(PH)
    sym = principal_symbol_array(bg.a_rot, r, lam, xi)
    return float(np.min(np.abs(sym) + np.abs(eta)))


# ---------------------------------------------------------------------------
# discrete operator


def _check_mode_grid(u: SpacetimeField):
    try:
        dt = _spacing(u.t)
        dr = _spacing(u.r)
    except GridMismatchError:
        raise
    if u.r.size < 8:
        raise GridMismatchError("need at least 8 radial nodes")
    if not np.isclose(u.r[0], 0.5 * dr, rtol=1e-9):
        raise GridMismatchError("radial grid must be staggered, r_j = (j + 1/2) dr")
    return dt, dr


def frequencies(t: np.ndarray) -> np.ndarray:
    dt = _spacing(t)
    return 2.0 * np.pi * np.fft.fftfreq(t.size, d=dt)


def radial_operator(bg: BackgroundParams, mode: ModeParams, lam: float, r: np.ndarray,
                    outer: str = "dirichlet"):
    """Sparse radial block of ``box_k + m^2`` at frequency ``lam``.

    ``-(1 - a^2/r^2) lam^2 - r^-2 (r d_r)^2 + 2 a k lam / r^2 + k^2/r^2 + m^2``,
    which equals ``-d_r^2 - r^-1 d_r + nu^2/r^2 + m^2 - lam^2``.
    """
    nu = float(mode.order(bg, lam))
    return _fd.radial_matrix(r, nu, mode.m**2 - lam * lam, outer=outer)


def apply_box_k(bg: BackgroundParams, mode: ModeParams, u: SpacetimeField,
                outer: str = "free") -> SpacetimeField:
    """Discrete ``(box_k + m^2) u``: spectral in periodic t, finite differences in r.

    ``outer="free"`` uses one-sided stencils at the last radial nodes;
    ``"dirichlet"`` assumes ``u = 0`` half a cell beyond the last node.
    """
    _check_mode_grid(u)
    lam = frequencies(u.t)
    uh = np.fft.fft(u.values, axis=0)
    out = _fd.apply_radial(u.r, mode.order(bg, lam), mode.m**2 - lam**2, uh, outer=outer)
    return u.like(np.fft.ifft(out, axis=0))


def apply_box_k_factored(bg: BackgroundParams, mode: ModeParams, u: SpacetimeField) -> SpacetimeField:
    """``-r^-2 (a d_t + ik)^2 + d_t^2 - d_r^2 - r^-1 d_r + m^2`` with plain stencils.

    Independent of :func:`apply_box_k`'s near-origin and outer treatment: only
    rows ``2..n_r-3`` are computed, the rest are NaN.
    """
    _, dr = _check_mode_grid(u)
    r = u.r[2:-2]
    lam = frequencies(u.t)[:, None]
    uh = np.fft.fft(u.values, axis=0)
    twist = 1j * (bg.a_rot * lam + mode.k)
    c = uh[:, 2:-2]
    d1 = (uh[:, :-4] - 8 * uh[:, 1:-3] + 8 * uh[:, 3:-1] - uh[:, 4:]) / (12 * dr)
    d2 = (-uh[:, :-4] + 16 * uh[:, 1:-3] - 30 * c + 16 * uh[:, 3:-1] - uh[:, 4:]) / (12 * dr**2)
    out = np.full_like(uh, np.nan)
    out[:, 2:-2] = -(twist**2) * c / r**2 - lam**2 * c - d2 - d1 / r + mode.m**2 * c
    interior = np.fft.ifft(out[:, 2:-2], axis=0)
    vals = np.full(u.values.shape, np.nan, dtype=complex)
    vals[:, 2:-2] = interior
    return u.like(vals)
