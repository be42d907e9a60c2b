"""Tensor-product (t, r) grids and complex fields on them."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GridMismatchError(ValueError):
    """A field does not live on the grid an operation expects."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic-in-t, staggered-in-r grid for one angular mode.

    ``r_j = (j + 1/2) * dr`` so that r = 0 is never a node.
    """

    t_period: float
    n_t: int
    r_max: float
    n_r: int
    k: int = 0
    a_rot: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if not _is_power_of_two(self.n_t):
            raise ValueError(f"n_t must be a power of two, got {self.n_t}")
        if self.t_period <= 0 or self.r_max <= 0 or self.n_r < 8:
            raise ValueError("grid needs t_period > 0, r_max > 0 and n_r >= 8")
        if self.a_rot <= 0 or self.m < 0:
            raise ValueError("grid needs a_rot > 0 and m >= 0")
        if int(self.k) != self.k:
            raise ValueError("k must be an integer")

    @property
    def dt(self) -> float:
        return self.t_period / self.n_t

    @property
    def dr(self) -> float:
        return self.r_max / self.n_r

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.dr

    @property
    def lam(self) -> np.ndarray:
        """Temporal frequencies in FFT order (``u = sum uhat e^{i lam t}``)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_t, d=self.dt)

    def zeros(self) -> "SpacetimeField":
        return SpacetimeField(self.t, self.r, np.zeros((self.n_t, self.n_r), complex), k=self.k)

    def field(self, fn) -> "SpacetimeField":
        """Sample ``fn(T, R)`` on the grid (``T, R`` from ``meshgrid(ij)``)."""
        T, R = np.meshgrid(self.t, self.r, indexing="ij")
        return SpacetimeField(self.t, self.r, np.asarray(fn(T, R), dtype=complex), k=self.k)


@dataclass
class SpacetimeField:
    """Complex field ``u(t, r)`` of a fixed angular mode, measure ``r dr dt``."""

    t: np.ndarray
    r: np.ndarray
    values: np.ndarray
    k: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.t.size, self.r.size):
            raise GridMismatchError(
                f"values shape {self.values.shape} != ({self.t.size}, {self.r.size})"
            )
        if np.any(self.r <= 0):
            raise GridMismatchError("r grid must avoid r <= 0")

    @property
    def shape(self):
        return self.values.shape

    def like(self, values) -> "SpacetimeField":
        return SpacetimeField(self.t, self.r, values, k=self.k, meta=dict(self.meta))

    def check_grid(self, grid: GridSpec) -> None:
        if self.values.shape != (grid.n_t, grid.n_r):
            raise GridMismatchError(
                f"field shape {self.values.shape} does not match grid ({grid.n_t}, {grid.n_r})"
            )
        if not (np.allclose(self.t, grid.t) and np.allclose(self.r, grid.r)):
            raise GridMismatchError("field coordinates do not match the grid")

    def weights(self) -> np.ndarray:
        """Quadrature weights for ``r dr dt`` on uniform grids."""
        dt = _spacing(self.t)
        dr = _spacing(self.r)
        return dt * dr * np.broadcast_to(self.r, self.values.shape)

    def inner(self, other: "SpacetimeField") -> complex:
        return complex(np.sum(self.values * np.conj(other.values) * self.weights()))

    def norm2(self, mask=None) -> float:
        w = self.weights()
        dens = np.abs(self.values) ** 2 * w
        if mask is not None:
            dens = dens * np.broadcast_to(mask, dens.shape)
        return float(np.sum(dens))

    # -- serialization -----------------------------------------------------

    def to_csv(self, path) -> None:
        """Write rows ``t,r,re,im`` in C order (t slowest)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "r", "re", "im"])
            for i, ti in enumerate(self.t):
                for j, rj in enumerate(self.r):
                    v = self.values[i, j]
                    w.writerow([repr(float(ti)), repr(float(rj)), repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path, k: int = 0) -> "SpacetimeField":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = np.unique(data[:, 0])
        r = np.unique(data[:, 1])
        vals = (data[:, 2] + 1j * data[:, 3]).reshape(t.size, r.size)
        return cls(t, r, vals, k=k)

    def to_binary(self, path) -> None:
        """JSON header ``<path>.json`` plus little-endian complex128 columns in ``<path>.bin``."""
        path = Path(path)
        header = {
            "format": "cosmon-field-v1",
            "k": int(self.k),
            "n_t": int(self.t.size),
            "n_r": int(self.r.size),
            "dtype": "<c16",
            "order": "C",
            "t": self.t.tolist(),
            "r": self.r.tolist(),
            "meta": self.meta,
        }
        path.with_suffix(".json").write_text(json.dumps(header, indent=1, sort_keys=True))
        self.values.astype("<c16").tofile(path.with_suffix(".bin"))

    @classmethod
    def from_binary(cls, path) -> "SpacetimeField":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        vals = np.fromfile(path.with_suffix(".bin"), dtype=header["dtype"])
        vals = vals.reshape(header["n_t"], header["n_r"])
        return cls(header["t"], header["r"], vals, k=header["k"], meta=header.get("meta", {}))


def _spacing(x: np.ndarray) -> float:
    if x.size < 2:
        return 1.0
    d = np.diff(x)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise GridMismatchError("uniform spacing required")
    return float(d[0])
