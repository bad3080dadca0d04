"""Exact Shapley attribution of model fit across predictor coalitions.

Players are predictors; the value of a coalition is the adjusted R-squared
of the OLS model built from exactly those columns (empty coalition: 0).
Exact enumeration over all 2^M coalitions, so M is capped at 16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from ..errors import ParameterError, SingularDesignError
from .regression import Dataset, adjusted_r2, independent_columns, ols_fit

MAX_PLAYERS = 16


@dataclass
class ShapleyReport:
    predictor_names: list[str]
    phi: list[float]
    coalition_values: dict[frozenset[int], float]
    degenerate_coalitions: list[frozenset[int]] = field(default_factory=list)

    def by_name(self) -> dict[str, float]:
        return dict(zip(self.predictor_names, self.phi))

    def to_dict(self) -> dict:
        return {
            "phi": {name: float(v) for name, v in self.by_name().items()},
            "n_coalitions": len(self.coalition_values),
            "n_degenerate": len(self.degenerate_coalitions),
        }


def shapley_from_game(n_players: int, value_fn: Callable[[frozenset[int]], float]) -> ShapleyReport:
    """Shapley values of an arbitrary coalition game by exact enumeration.

    phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)).
    Efficiency (sum phi = v(all) - v(empty)) holds by construction.
    """
    if not 1 <= n_players <= MAX_PLAYERS:
        raise ParameterError(f"exact enumeration supports 1..{MAX_PLAYERS} players, got {n_players}")
    values: dict[frozenset[int], float] = {}
    for mask in range(1 << n_players):
        coalition = frozenset(i for i in range(n_players) if mask >> i & 1)
        values[coalition] = float(value_fn(coalition))

    fact = [math.factorial(i) for i in range(n_players + 1)]
    weights = [fact[s] * fact[n_players - s - 1] / fact[n_players] for s in range(n_players)]
    phi = []
    for i in range(n_players):
        total = 0.0
        for coalition, v in values.items():
            if i in coalition:
                continue
            total += weights[len(coalition)] * (values[coalition | {i}] - v)
        phi.append(total)
    return ShapleyReport(
        predictor_names=[str(i) for i in range(n_players)],
        phi=phi,
        coalition_values=values,
    )


def shapley_values(d: Dataset) -> ShapleyReport:
    """Shapley attribution of adjusted R-squared across a dataset's predictors.

    A coalition whose design is singular (duplicated or collinear columns)
    inherits the value of its largest nested non-singular subset and is
    flagged in the report.
    """
    if d.m > MAX_PLAYERS:
        raise ParameterError(f"exact Shapley enumeration capped at {MAX_PLAYERS} predictors, got {d.m}")
    if d.n <= d.m + 1:
        raise ParameterError(f"need n > M + 1 rows for the full-coalition fit (n={d.n}, M={d.m})")
    degenerate: list[frozenset[int]] = []

    def value(coalition: frozenset[int]) -> float:
        if not coalition:
            return 0.0
        idx = sorted(coalition)
        try:
            return ols_fit(d.subset_columns(idx)).adj_r2
        except SingularDesignError:
            keep = independent_columns(d.x[:, idx])
            degenerate.append(coalition)
            if not keep:
                return 0.0
            return ols_fit(d.subset_columns([idx[j] for j in keep])).adj_r2

    report = shapley_from_game(d.m, value)
    report.predictor_names = list(d.predictor_names)
    report.degenerate_coalitions = degenerate
    return report
