"""Rank <-> value maps used by both pre-processing methods."""

import numpy as np


def quantile_grid(values, max_points=2001) -> np.ndarray:
    """Sorted sample (or an evenly spaced subset of its quantiles)."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size <= max_points:
        return values
    return np.quantile(values, np.linspace(0.0, 1.0, max_points))


def grid_probs(grid) -> np.ndarray:
    return np.linspace(0.0, 1.0, len(grid)) if len(grid) > 1 else np.array([0.5])


def rank_of(x, grid) -> np.ndarray:
    """Probability rank of ``x`` under the piecewise-linear CDF through ``grid``."""
    grid = np.asarray(grid)
    if grid.size == 1:
        return np.full(np.shape(x), 0.5)
    return np.interp(x, grid, grid_probs(grid))


def value_at(u, grid) -> np.ndarray:
    """Inverse of :func:`rank_of`; non-decreasing in ``u``."""
    grid = np.asarray(grid)
    if grid.size == 1:
        return np.full(np.shape(u), grid[0])
    return np.interp(u, grid_probs(grid), grid)


def binary_rank(x, p_one, v) -> np.ndarray:
    """Randomised probability rank of a 0/1 outcome with success probability ``p_one``.

    ``v`` is U(0,1); the rank is uniform on the probability mass of the
    observed value, with zeros occupying [0, 1-p) and ones [1-p, 1).
    """
    p_zero = 1.0 - np.asarray(p_one)
    return np.where(np.asarray(x) == 1, p_zero + v * (1.0 - p_zero), v * p_zero)


def binary_value(u, p_one) -> np.ndarray:
    return (np.asarray(u) >= 1.0 - np.asarray(p_one)).astype(float)
