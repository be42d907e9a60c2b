"""Finite-difference machinery for the radial part of the mode operator.

The radial block of one temporal frequency is

    L = -d^2/dr^2 - (1/r) d/dr + nu^2 / r^2 + m^2 - lam^2,   nu = a lam + k,

on the staggered grid ``r_j = (j + 1/2) dr``.  Regular solutions behave like
``r^|nu| g(r)`` with ``g`` smooth and even, so for moderate ``|nu|`` the
operator is applied through that factorisation,

    L u = r^p [ -g'' - (1 + 2p) g' / r ] + (m^2 - lam^2) u,   g = r^-p u, p = |nu|,

with fourth-order centred differences on ``g`` and even reflection
(``g_{-1} = g_0``, ``g_{-2} = g_1``) across r = 0.  This is exact on the
Frobenius branch up to truncation error and needs no boundary condition at the
origin.  For ``|nu| > NU_FROBENIUS`` the weights ``r^p`` become badly scaled;
there the regular solution vanishes to high order at r = 0 and ``u`` is
differenced directly with one-sided rows anchored on ``u(0) = 0``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse

NU_FROBENIUS = 4.0

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def fornberg_weights(x0: float, nodes, order: int) -> np.ndarray:
    """Finite-difference weights for derivatives ``0..order`` at ``x0``.

    Returns an array of shape ``(order + 1, len(nodes))``.  Fornberg (1988).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    c = np.zeros((order + 1, n))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _outer_rows(r, outer, order_idx):
    """Rows ``n-2, n-1`` of a derivative: list of (row, cols, weights)."""
    n = r.size
    h = r[1] - r[0]
    out = []
    for j in (n - 2, n - 1):
        if outer == "dirichlet":
            nodes = np.append(r[n - 5 :], r[-1] + 0.5 * h)
            w = fornberg_weights(r[j], nodes, 2)[order_idx, :-1]
            cols = list(range(n - 5, n))
        elif outer == "free":
            nodes = r[n - 6 :]
            w = fornberg_weights(r[j], nodes, 2)[order_idx]
            cols = list(range(n - 6, n))
        else:
            raise ValueError(f"unknown outer boundary {outer!r}")
        out.append((j, cols, w))
    return out


def _assemble(n, entries):
    rows, cols, vals = [], [], []
    for j, cc, ww in entries:
        rows += [j] * len(cc)
        cols += list(cc)
        vals += list(ww)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@lru_cache(maxsize=32)
def _even_derivatives_cached(n, h, outer):
    r = (np.arange(n) + 0.5) * h
    mats = []
    for order_idx, st, scale in ((1, _D1, h), (2, _D2, h * h)):
        entries = []
        for j in range(n - 2):
            acc = {}
            for off, w in zip(range(-2, 3), st / scale):
                l = j + off
                if l < 0:
                    l = -l - 1  # even reflection on the staggered grid
                acc[l] = acc.get(l, 0.0) + w
            entries.append((j, list(acc), list(acc.values())))
        entries += _outer_rows(r, outer, order_idx)
        mats.append(_assemble(n, entries))
    return tuple(mats)


def even_derivatives(r: np.ndarray, outer: str = "dirichlet"):
    """``(D1, D2)`` for an even function sampled on the staggered grid ``r``."""
    return _even_derivatives_cached(r.size, float(r[1] - r[0]), outer)


@lru_cache(maxsize=32)
def _origin_derivatives_cached(n, h, outer):
    r = (np.arange(n) + 0.5) * h
    mats = []
    for order_idx, st, scale in ((1, _D1, h), (2, _D2, h * h)):
        entries = []
        nodes = np.concatenate(([0.0], r[:5]))
        for j in (0, 1):
            w = fornberg_weights(r[j], nodes, 2)[order_idx, 1:]
            entries.append((j, list(range(5)), w))
        for j in range(2, n - 2):
            entries.append((j, list(range(j - 2, j + 3)), st / scale))
        entries += _outer_rows(r, outer, order_idx)
        mats.append(_assemble(n, entries))
    return tuple(mats)


def origin_derivatives(r: np.ndarray, outer: str = "dirichlet"):
    """``(D1, D2)`` for a function vanishing to high order at r = 0."""
    return _origin_derivatives_cached(r.size, float(r[1] - r[0]), outer)


def radial_matrix(r: np.ndarray, nu: float, shift: float, outer: str = "dirichlet"):
    """Sparse ``-d^2 - r^-1 d + nu^2/r^2 + shift`` acting on ``u``."""
    p = abs(nu)
    if p <= NU_FROBENIUS:
        d1, d2 = even_derivatives(r, outer)
        rp = r**p
        core = -d2 - sparse.diags((1.0 + 2.0 * p) / r) @ d1
        mat = sparse.diags(rp) @ core @ sparse.diags(1.0 / rp)
    else:
        d1, d2 = origin_derivatives(r, outer)
        mat = -d2 - sparse.diags(1.0 / r) @ d1 + sparse.diags(nu * nu / r**2)
    return (mat + shift * sparse.identity(r.size)).tocsr()


def apply_radial(r: np.ndarray, nu: np.ndarray, shift: np.ndarray, uh: np.ndarray,
                 outer: str = "free") -> np.ndarray:
    """Row-wise ``radial_matrix(r, nu[i], shift[i]) @ uh[i]`` without forming matrices."""
    nu = np.asarray(nu, dtype=float)
    p = np.abs(nu)
    out = np.empty_like(uh)
    low = p <= NU_FROBENIUS
    if np.any(low):
        d1, d2 = even_derivatives(r, outer)
        rp = r[None, :] ** p[low, None]
        g = uh[low] / rp
        g1 = (d1 @ g.T).T
        g2 = (d2 @ g.T).T
        out[low] = rp * (-g2 - (1.0 + 2.0 * p[low, None]) * g1 / r[None, :])
    if np.any(~low):
        d1, d2 = origin_derivatives(r, outer)
        u = uh[~low]
        out[~low] = -(d2 @ u.T).T - (d1 @ u.T).T / r[None, :] + nu[~low, None] ** 2 / r[None, :] ** 2 * u
    return out + np.asarray(shift)[:, None] * uh


def first_derivative(r: np.ndarray) -> sparse.csr_matrix:
    """Fourth-order d/dr with one-sided six-point stencils at both ends."""
    n = r.size
    h = r[1] - r[0]
    entries = []
    for j in range(n):
        if 2 <= j < n - 2:
            entries.append((j, list(range(j - 2, j + 3)), _D1 / h))
        else:
            lo = 0 if j < 2 else n - 6
            idx = list(range(lo, lo + 6))
            entries.append((j, idx, fornberg_weights(r[j], r[idx], 1)[1]))
    return _assemble(n, entries)
