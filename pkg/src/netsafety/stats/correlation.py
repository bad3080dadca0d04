"""Pearson, Spearman, and Kendall correlation coefficients."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import DataError, ParameterError


def _as_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError(f"need two equal-length 1-D sequences, got {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ParameterError(f"need at least 2 observations, got {x.size}")
    return x, y


def pearson(x, y) -> float:
    """Linear correlation: centered cross-product over the product of norms."""
    x, y = _as_pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.sum(dx * dx))
    sy = np.sqrt(np.sum(dy * dy))
    if sx == 0 or sy == 0:
        raise DataError("correlation undefined for a constant sequence")
    return float(np.sum(dx * dy) / (sx * sy))


def _mean_ranks(x: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the mean of their positions."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=float)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Rank correlation: Pearson on mean ranks."""
    x, y = _as_pair(x, y)
    return pearson(_mean_ranks(x), _mean_ranks(y))


def kendall(x, y) -> float:
    """Kendall tau-a: concordant minus discordant pairs over all n(n-1)/2 pairs.

    Tied pairs contribute 0 (no tie normalization); a constant sequence
    therefore yields 0, which is flagged with a warning rather than raised.
    """
    x, y = _as_pair(x, y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        warnings.warn("kendall tau on a constant sequence is 0 by convention", stacklevel=2)
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    n = x.size
    total = np.sum(np.triu(sx * sy, k=1))
    return float(2.0 * total / (n * (n - 1)))
