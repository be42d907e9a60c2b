r"""Bessel functions of real order.

:math:`J_\nu` and :math:`I_\nu` for real (non-integer allowed) order and
non-negative argument, plus the scaled form :math:`x^{-\nu} J_\nu(x)` which is
analytic in :math:`x^2`.

Three evaluation methods are used for :math:`J_\nu`:

* ``series``: the ascending power series, for small arguments,
* ``recurrence``: Miller's backward recurrence normalised by the Neumann sum
  :math:`(x/2)^\alpha = \sum_k (\alpha + 2k)\,\Gamma(\alpha+k)/k!\,J_{\alpha+2k}(x)`,
* ``asymptotic``: the Hankel expansion, for large arguments.

Negative non-integer orders are reached by one or more steps of the three-term
recurrence taken downward in order, which is the stable direction for the
dominant solution.

Accuracy has been validated on the box ``nu in [-1, 10], x in [0, 100]``;
outside of it an :class:`AccuracyWarning` is emitted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

NU_BOX = (-1.0, 10.0)
X_BOX = (0.0, 100.0)

# below this argument the series has no cancellation worth mentioning
SERIES_X = 2.0
# Hankel expansion switch; the truncation error is ~exp(-2x)
ASYMPTOTIC_X = 25.0


class AccuracyWarning(UserWarning):
    """Evaluation outside the validated (order, argument) box."""


class BesselDomainError(ValueError):
    pass


class GammaPoleError(ValueError):
    pass


@dataclass(frozen=True)
class BesselEval:
    nu: float
    x: float
    value: float
    method: str


def _is_integer(nu) -> np.ndarray:
    return np.asarray(nu) == np.round(nu)


def _check_box(nu, x):
    nu = np.asarray(nu)
    x = np.asarray(x)
    if np.any((nu < NU_BOX[0]) | (nu > NU_BOX[1]) | (x > X_BOX[1])):
        warnings.warn(
            "Bessel evaluation outside the validated box "
            f"nu in {NU_BOX}, x in {X_BOX}",
            AccuracyWarning,
            stacklevel=3,
        )


def _asymptotic_threshold(nu):
    return np.maximum(ASYMPTOTIC_X, 0.5 * np.asarray(nu, dtype=float) ** 2)


def rgamma(z):
    """Reciprocal Gamma function, zero at the poles."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pole = (z <= 0) & _is_integer(z)
    ok = ~pole
    if np.any(ok):
        zz = z[ok]
        sign = np.where((zz < 0) & (np.floor(zz) % 2 == 1), -1.0, 1.0)
        out[ok] = sign * np.exp(-gammaln(zz))
    return out


# ---------------------------------------------------------------------------
# series


def _scaled_series(nu, x, sign):
    r"""Sum of ``(sign x^2/4)^k / (k! Gamma(nu+k+1))``.

    Multiplying by ``(x/2)^nu`` gives J (sign=-1) or I (sign=+1).
    """
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    q = sign * 0.25 * x * x
    term = rgamma(nu + 1.0)
    total = term.copy()
    # terms keep shrinking once k > x; 40 extra terms reach round-off
    kmax = int(np.max(x, initial=0.0)) + 40
    for k in range(1, kmax + 1):
        nxt = term * q / (k * (nu + k))
        term = nxt
        total = total + term
        if k > 8 and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


# ---------------------------------------------------------------------------
# Miller recurrence


def _miller(alpha, x, nmax):
    """Return J_{alpha+n}(x) for n = 0..nmax, alpha in [0, 1), x > 0.

    Arrays ``alpha`` and ``x`` share a shape; the result has that shape plus a
    trailing axis of length ``nmax + 1``.
    """
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    start = int(np.max(x)) + 2 * int(np.max(x) ** (1 / 3) * 4) + nmax + 30
    start += start % 2
    out = np.zeros(x.shape + (nmax + 1,))
    j_hi = np.zeros_like(x)
    j = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    # g_k = Gamma(alpha + k) / k!
    gk = [None] * (start // 2 + 1)
    g = rgamma(alpha + 1.0)
    g = np.where(g != 0, 1.0 / g, np.inf)  # Gamma(alpha + 1)
    gk[0] = g
    for k in range(1, start // 2 + 1):
        if k == 1:
            gk[1] = gk[0]
        else:
            gk[k] = gk[k - 1] * (alpha + k - 1) / k
    for n in range(start, -1, -1):
        if n <= nmax:
            out[..., n] = j
        if n % 2 == 0:
            kk = n // 2
            if kk == 0:
                norm = norm + gk[0] * j
            else:
                norm = norm + (alpha + n) * gk[kk] * j
        if n == 0:
            break
        j_lo = 2.0 * (alpha + n) / x * j - j_hi
        j_hi, j = j, j_lo
        big = np.abs(j) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            j = j * scale
            j_hi = j_hi * scale
            norm = norm * scale
            out = out * scale[..., None]
    factor = np.exp(alpha * np.log(0.5 * x)) / norm
    return out * factor[..., None]


# ---------------------------------------------------------------------------
# Hankel asymptotic expansion


def _hankel(nu, x):
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    last = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 200):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        # stop each lane at its smallest term
        active &= mag < last
        if not np.any(active):
            break
        contrib = np.where(active, term, 0.0)
        # a_k enters with sign (-1)^{floor(k/2)}
        s = -1.0 if (k // 2) % 2 == 1 else 1.0
        if k % 2 == 0:
            p = p + s * contrib
        else:
            q = q + s * contrib
        last = np.where(active, mag, last)
        active &= mag > 1e-17
    omega = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(omega) - q * np.sin(omega))


# ---------------------------------------------------------------------------
# public API


def _bessel_j_nonneg(nu, x):
    """J_nu(x) for nu >= 0, x > 0 (arrays of equal shape)."""
    out = np.empty_like(x)
    small = x <= SERIES_X
    large = x >= _asymptotic_threshold(nu)
    mid = ~small & ~large
    if np.any(small):
        xs, ns = x[small], nu[small]
        out[small] = np.exp(ns * np.log(0.5 * xs)) * _scaled_series(ns, xs, -1.0)
    if np.any(large):
        out[large] = _hankel(nu[large], x[large])
    if np.any(mid):
        xm, nm = x[mid], nu[mid]
        base = np.floor(nm)
        alpha = nm - base
        shift = base.astype(int)
        nmax = int(shift.max())
        table = _miller(alpha, xm, nmax)
        out[mid] = np.take_along_axis(table, shift[:, None], axis=1)[:, 0]
    return out


def _bessel_j_neg(nu, x):
    """J_nu(x) for nu < 0 non-integer, x > 0, by downward recurrence."""
    base = np.floor(nu)
    alpha = nu - base  # in (0, 1)
    steps = (-base).astype(int)
    hi = _bessel_j_nonneg(alpha + 1.0, x)
    lo = _bessel_j_nonneg(alpha, x)
    out = np.empty_like(x)
    for n in range(1, int(steps.max()) + 1):
        # J_{alpha-n} = 2 (alpha-n+1)/x J_{alpha-n+1} - J_{alpha-n+2}
        new = 2.0 * (alpha - n + 1.0) / x * lo - hi
        hi, lo = lo, new
        done = steps == n
        out[done] = lo[done]
    return out


def _method_j(nu, x):
    if x == 0.0 or x <= SERIES_X:
        return "series"
    if x >= float(_asymptotic_threshold(abs(nu))):
        return "asymptotic"
    return "recurrence"


def bessel_j(nu, x):
    r"""Bessel function of the first kind :math:`J_\nu(x)`.

    Accepts scalars or broadcastable arrays; ``x`` must be non-negative and
    ``x = 0`` requires ``nu >= 0`` or an integer order.
    """
    nu_a, x_a = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(x, dtype=float)
    )
    if np.any(x_a < 0):
        raise BesselDomainError("bessel_j needs x >= 0")
    at_zero = x_a == 0
    nonint = ~_is_integer(nu_a)
    if np.any(at_zero & (nu_a < 0) & nonint):
        raise BesselDomainError("J_nu(0) diverges for negative non-integer nu")
    _check_box(nu_a, x_a)

    nu_f = nu_a.ravel()
    x_f = x_a.ravel()
    out = np.zeros(nu_f.shape)
    out[(x_f == 0) & (nu_f == 0)] = 1.0
    pos = x_f > 0

    # integer negative orders reflect: J_{-n} = (-1)^n J_n
    neg_int = pos & (nu_f < 0) & ~nonint.ravel()
    order = np.where(neg_int, -nu_f, nu_f)
    sign = np.where(neg_int & (np.abs(nu_f) % 2 == 1), -1.0, 1.0)

    nonneg = pos & (order >= 0)
    if np.any(nonneg):
        out[nonneg] = sign[nonneg] * _bessel_j_nonneg(order[nonneg], x_f[nonneg])
    neg = pos & (order < 0)
    if np.any(neg):
        small = neg & (x_f <= SERIES_X)
        if np.any(small):
            xs, ns = x_f[small], order[small]
            out[small] = np.exp(ns * np.log(0.5 * xs)) * _scaled_series(ns, xs, -1.0)
        rest = neg & ~small
        if np.any(rest):
            out[rest] = _bessel_j_neg(order[rest], x_f[rest])
    out = out.reshape(nu_a.shape)
    return out[()] if out.ndim == 0 else out


def evaluate_j(nu: float, x: float) -> BesselEval:
    """Scalar :func:`bessel_j` with the method that produced the value."""
    value = float(bessel_j(nu, x))
    return BesselEval(float(nu), float(x), value, _method_j(float(nu), float(x)))


def scaled_bessel_j(nu, x):
    r""":math:`x^{-\nu} J_\nu(x)`, analytic in :math:`x^2`.

    At ``x = 0`` this is :math:`1/(2^\nu \Gamma(\nu+1))`.  Negative integer
    orders are rejected (pole of the Gamma function in the leading
    coefficient).
    """
    nu_a, x_a = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(x, dtype=float)
    )
    if np.any((nu_a < 0) & _is_integer(nu_a)):
        raise GammaPoleError("scaled_bessel_j has a Gamma pole at negative integer nu")
    if np.any(x_a < 0):
        raise BesselDomainError("scaled_bessel_j needs x >= 0")
    nu_f = nu_a.ravel()
    x_f = x_a.ravel()
    out = np.empty(nu_f.shape)
    small = x_f <= SERIES_X
    if np.any(small):
        out[small] = 2.0 ** (-nu_f[small]) * _scaled_series(nu_f[small], x_f[small], -1.0)
    if np.any(~small):
        xr = x_f[~small]
        out[~small] = bessel_j(nu_f[~small], xr) * np.exp(-nu_f[~small] * np.log(xr))
    out = out.reshape(nu_a.shape)
    return out[()] if out.ndim == 0 else out


def bessel_j_derivative(nu, x):
    r""":math:`J_\nu'(x) = (\nu/x) J_\nu(x) - J_{\nu+1}(x)` for ``x > 0``."""
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    return nu / x * bessel_j(nu, x) - bessel_j(nu + 1.0, x)


def bessel_i(nu, x):
    r"""Modified Bessel function of the first kind :math:`I_\nu(x)`.

    Positive-term power series, so no cancellation for ``nu > -1``.
    """
    nu_a, x_a = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(x, dtype=float)
    )
    if np.any(x_a < 0):
        raise BesselDomainError("bessel_i needs x >= 0")
    nonint = ~_is_integer(nu_a)
    if np.any((x_a == 0) & (nu_a < 0) & nonint):
        raise BesselDomainError("I_nu(0) diverges for negative non-integer nu")
    _check_box(nu_a, x_a)
    # I_{-n} = I_n for integer n
    order = np.where(~nonint & (nu_a < 0), -nu_a, nu_a)
    out = np.zeros(order.shape)
    out[(x_a == 0) & (order == 0)] = 1.0
    pos = x_a > 0
    if np.any(pos):
        xp, npos = x_a[pos], order[pos]
        out[pos] = np.exp(npos * np.log(0.5 * xp)) * _scaled_series(npos, xp, 1.0)
    return out[()] if out.ndim == 0 else out


def bessel_i_derivative(nu, x):
    r""":math:`I_\nu'(x) = I_{\nu+1}(x) + (\nu/x) I_\nu(x)` for ``x > 0``."""
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    return bessel_i(nu + 1.0, x) + nu / x * bessel_i(nu, x)


def leading_coefficients(nu: float, kappa: float) -> tuple[float, float]:
    r"""Leading small-r coefficients of :math:`J_\nu(\kappa r)`.

    Returns ``(f0, f1)`` with :math:`J_\nu(\kappa r) = f_0 r^\nu + O(r^{\nu+2})`
    and :math:`\partial_r J_\nu(\kappa r) = f_1 r^{\nu-1} + O(r^{\nu+1})`,
    i.e. ``f0 = (kappa/2)^nu / Gamma(nu+1)`` and ``f1 = nu * f0``.
    """
    if nu < 0 and float(nu).is_integer():
        raise GammaPoleError("no leading power at negative integer order")
    f0 = (0.5 * kappa) ** nu / math.gamma(nu + 1.0)
    return f0, nu * f0
