"""Chi-square tests: r x c contingency with Yates correction, and one-way goodness of fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .special import chi2_sf


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    df: int
    p_value: float


def chi2_contingency_yates(table) -> Chi2Result:
    """Pearson chi-square for an r x c table of counts.

    Expected counts come from the row/column margins. Yates's continuity
    correction (|O - E| reduced by 0.5, floored at 0) is applied only to
    two-row tables; wider tables use the plain statistic.
    """
    obs = np.asarray(table, dtype=float)
    if obs.ndim != 2 or obs.shape[0] < 2 or obs.shape[1] < 2:
        raise DataError(f"contingency table must be at least 2x2, got shape {obs.shape}")
    if np.any(obs < 0):
        raise DataError("contingency table contains negative counts")
    row = obs.sum(axis=1)
    col = obs.sum(axis=0)
    if np.any(row == 0) or np.any(col == 0):
        raise DataError("contingency table has a zero margin; drop empty rows/columns first")
    expected = np.outer(row, col) / obs.sum()
    dev = np.abs(obs - expected)
    if obs.shape[0] == 2:
        dev = np.maximum(dev - 0.5, 0.0)
    statistic = float(np.sum(dev * dev / expected))
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    return Chi2Result(statistic=statistic, df=df, p_value=chi2_sf(statistic, df))


def chi2_oneway(observed, expected=None) -> Chi2Result:
    """One-way chi-square of observed counts against expected (uniform by default)."""
    obs = np.asarray(observed, dtype=float)
    if obs.ndim != 1 or obs.size < 2:
        raise DataError(f"need a 1-D vector of at least 2 counts, got shape {obs.shape}")
    if np.any(obs < 0):
        raise DataError("observed counts must be non-negative")
    total = obs.sum()
    if total == 0:
        raise DataError("all observed counts are zero")
    if expected is None:
        exp = np.full(obs.size, total / obs.size)
    else:
        exp = np.asarray(expected, dtype=float)
        if exp.shape != obs.shape:
            raise DataError("expected counts must match observed in length")
        if np.any(exp <= 0):
            raise DataError("expected counts must all be positive")
    statistic = float(np.sum((obs - exp) ** 2 / exp))
    df = obs.size - 1
    return Chi2Result(statistic=statistic, df=df, p_value=chi2_sf(statistic, df))
