"""Smooth plateau cutoffs built from ``exp(-1/x)``."""

from __future__ import annotations

import numpy as np


def _f(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x, lo: float, hi: float):
    """C-infinity step: 0 for ``x <= lo``, 1 for ``x >= hi``."""
    y = (np.asarray(x, dtype=float) - lo) / (hi - lo)
    a = _f(y)
    b = _f(1.0 - y)
    return a / (a + b)


def smooth_step_derivative(x, lo: float, hi: float):
    y = (np.asarray(x, dtype=float) - lo) / (hi - lo)
    a = _f(y)
    b = _f(1.0 - y)
    inside = (y > 0) & (y < 1)
    da = np.zeros_like(y)
    db = np.zeros_like(y)
    da[inside] = a[inside] / y[inside] ** 2
    db[inside] = -b[inside] / (1.0 - y[inside]) ** 2
    den = (a + b) ** 2
    out = np.zeros_like(y)
    out[inside] = (da[inside] * b[inside] - a[inside] * db[inside]) / den[inside]
    return out / (hi - lo)


def plateau(x, support, flat):
    """1 on ``flat = (p, q)``, 0 outside ``support = (a, b)``, smooth between.

    Either end of ``support`` may be infinite, in which case the function is a
    one-sided step.
    """
    a, b = support
    p, q = flat
    if not (a <= p <= q <= b):
        raise ValueError(f"need support {support} to contain plateau {flat}")
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    if np.isfinite(a):
        out = out * smooth_step(x, a, p)
    if np.isfinite(b):
        out = out * (1.0 - smooth_step(x, q, b))
    return out


def plateau_derivative(x, support, flat):
    a, b = support
    p, q = flat
    x = np.asarray(x, dtype=float)
    up = smooth_step(x, a, p) if np.isfinite(a) else np.ones_like(x)
    dup = smooth_step_derivative(x, a, p) if np.isfinite(a) else np.zeros_like(x)
    down = 1.0 - smooth_step(x, q, b) if np.isfinite(b) else np.ones_like(x)
    ddown = -smooth_step_derivative(x, q, b) if np.isfinite(b) else np.zeros_like(x)
    return dup * down + up * ddown
