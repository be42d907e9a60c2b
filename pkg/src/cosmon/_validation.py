"""Input checks shared by the estimator-style classes.

sklearn's ``check_array`` rejects complex input, so fields are validated here.
"""

from __future__ import annotations

import numpy as np

from .grid import GridMismatchError, GridSpec, SpacetimeField


def check_field(u, grid: GridSpec | None = None, name: str = "u") -> SpacetimeField:
    """Return ``u`` as a finite :class:`SpacetimeField`, wrapping bare arrays on ``grid``."""
    if not isinstance(u, SpacetimeField):
        arr = np.asarray(u)
        if grid is None:
            raise TypeError(f"{name} must be a SpacetimeField when no grid is given")
        if arr.shape != (grid.n_t, grid.n_r):
            raise GridMismatchError(
                f"{name} has shape {arr.shape}, grid expects ({grid.n_t}, {grid.n_r})"
            )
        u = SpacetimeField(grid.t, grid.r, arr.astype(complex), k=grid.k)
    elif grid is not None:
        u.check_grid(grid)
    if not np.all(np.isfinite(u.values)):
        raise ValueError(f"{name} contains NaN or inf")
    return u


def check_positive(value, name: str) -> float:
    value = float(value)
    if not (value > 0 and np.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value

