"""Association analysis between interval metrics and crash counts.

Builds regression datasets by joining metric rows with binned crash counts
on (segment, slot), then runs per-metric correlations, the cross-validated
full-predictor models (linear and Poisson), leave-one-segment-out
generalization checks, and Shapley attribution.
"""

from __future__ import annotations

import csv
import io
import itertools
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .crashes import CRASH_FAMILIES, CrashBinning
from .errors import DataError, ParameterError
from .network_metrics import IntervalMetrics
from .stats import (
    Dataset,
    RegressionReport,
    ShapleyReport,
    kendall,
    kfold_cv,
    n_mse,
    ols_fit,
    pearson,
    predict,
    r2_score,
    shapley_values,
    spearman,
)
from .stats.regression import adjusted_r2
from .trajectories import VehicleClass

DEFAULT_PREDICTORS = ("ttc_cv", "ivvr", "ovvr", "osr_1.0", "tci", "ntc")
CORRELATION_METHODS = {"pearson": pearson, "spearman": spearman, "kendall": kendall}
BASELINE_COLUMNS = ("volume", "e_ttc")


@dataclass
class AnalysisConfig:
    slot_minutes: int = 10
    families: tuple[str, ...] = CRASH_FAMILIES
    methods: tuple[str, ...] = ("pearson", "spearman", "kendall")
    cv_folds: int = 5
    seed: int = 0
    predictors: tuple[str, ...] = DEFAULT_PREDICTORS
    # Manual exclusions for known camera outages: (segment_id, slot) pairs.
    exclude_slots: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.slot_minutes not in (10, 15, 20, 30, 60):
            raise ParameterError(f"slot_minutes must be one of 10/15/20/30/60, got {self.slot_minutes}")
        bad = [m for m in self.methods if m not in CORRELATION_METHODS]
        if bad:
            raise ParameterError(f"unknown correlation methods: {bad}")
        bad_fam = [f for f in self.families if f not in CRASH_FAMILIES]
        if bad_fam:
            raise ParameterError(f"unknown crash families: {bad_fam}")
        self.exclude_slots = tuple((str(s), int(slot)) for s, slot in self.exclude_slots)


def metric_value(m: IntervalMetrics, name: str) -> float | None:
    """Pull one predictor value out of an IntervalMetrics row by column name."""
    if name.startswith("osr_"):
        return m.osr.get(float(name[len("osr_") :]))
    if name == "f_truck":
        return m.f_c.get(VehicleClass.TRUCK.value)
    if name == "volume":
        return float(m.n_vehicles)
    if not hasattr(m, name):
        raise ParameterError(f"unknown metric column {name!r}")
    return getattr(m, name)


def build_dataset(
    metrics: Sequence[IntervalMetrics],
    binning: CrashBinning,
    family: str,
    predictors: Sequence[str] = DEFAULT_PREDICTORS,
    exclude_slots: Sequence[tuple[str, int]] = (),
) -> Dataset:
    """Inner-join metric rows with crash counts on (segment, slot).

    Rows whose slot has no crash data, with any absent predictor, or on the
    manual exclusion list are dropped and itemized in ``Dataset.dropped``.
    Baseline columns (traffic volume, mean pairwise TTC) ride along in
    ``extras``.
    """
    slot_seconds = binning.slot_minutes * 60
    slots_per_day = 24 * 60 // binning.slot_minutes
    excluded = {(str(s), int(slot)) for s, slot in exclude_slots}
    rows_x: list[list[float]] = []
    rows_y: list[float] = []
    keys: list[tuple] = []
    extras: dict[str, list[float]] = {name: [] for name in BASELINE_COLUMNS}
    dropped = {"no_crash_data": 0, "absent_metric": 0, "excluded": 0}
    for m in metrics:
        slot = int(m.t_start // slot_seconds)
        if not 0 <= slot < slots_per_day:
            raise DataError(
                f"interval start {m.t_start}s falls outside the slot grid "
                f"(slot {slot} of {slots_per_day}); intervals must lie within one day"
            )
        if (m.segment_id, slot) in excluded:
            dropped["excluded"] += 1
            continue
        cell = binning.counts.get((m.segment_id, slot))
        if cell is None:
            dropped["no_crash_data"] += 1
            continue
        values = [metric_value(m, p) for p in predictors]
        if any(v is None for v in values):
            dropped["absent_metric"] += 1
            continue
        rows_x.append([float(v) for v in values])
        rows_y.append(cell.mean_count(family))
        keys.append((m.segment_id, slot))
        extras["volume"].append(float(m.n_vehicles))
        extras["e_ttc"].append(float("nan") if m.e_ttc is None else float(m.e_ttc))
    if not rows_x:
        raise DataError(
            f"empty join for family {family!r}: no metric interval matched a crash slot "
            f"(dropped: {dropped})"
        )
    return Dataset(
        x=np.array(rows_x),
        y=np.array(rows_y),
        predictor_names=list(predictors),
        row_keys=keys,
        extras={k: np.array(v) for k, v in extras.items()},
        dropped=dropped,
    )


def per_metric_correlations(d: Dataset, methods: Sequence[str]) -> dict[str, dict[str, float | None]]:
    """Correlation of each predictor (and each baseline) with the response.

    Returns {method: {column: r or None}}; None marks columns that are
    constant or (for baselines) have no defined values.
    """
    out: dict[str, dict[str, float | None]] = {}
    columns: list[tuple[str, np.ndarray]] = [
        (name, d.x[:, j]) for j, name in enumerate(d.predictor_names)
    ]
    for name in BASELINE_COLUMNS:
        if name in d.extras:
            columns.append((name, d.extras[name]))
    for method in methods:
        fn = CORRELATION_METHODS[method]
        row: dict[str, float | None] = {}
        for name, col in columns:
            mask = ~np.isnan(col)
            if mask.sum() < 2 or np.all(col[mask] == col[mask][0]) or np.all(d.y[mask] == d.y[mask][0]):
                row[name] = None
                continue
            try:
                row[name] = fn(col[mask], d.y[mask])
            except DataError:
                row[name] = None
        out[method] = row
    return out


def full_model_analysis(d: Dataset, cfg: AnalysisConfig) -> dict[str, RegressionReport]:
    """Cross-validated linear and Poisson full-predictor models."""
    if d.n < 8 * d.m:
        warnings.warn(
            f"only {d.n} rows for {d.m} predictors (recommend n >= {8 * d.m}); estimates will be noisy",
            stacklevel=2,
        )
    return {
        "linear": kfold_cv(d, cfg.cv_folds, cfg.seed, "linear"),
        "poisson": kfold_cv(d, cfg.cv_folds, cfg.seed, "poisson"),
    }


@dataclass
class HoldoutRow:
    held_out: str
    n_test: int
    r2: float | None = None
    adj_r2: float | None = None
    n_mse: float | None = None
    unevaluable: bool = False


@dataclass
class CombinationRow:
    size: int
    n_combinations: int
    mean_abs_pooled_r: dict[str, float | None]
    mean_abs_segment_r: dict[str, float | None]


def _abs_pearson_or_none(x: np.ndarray, y: np.ndarray) -> float | None:
    if x.size < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    return abs(pearson(x, y))


def cross_segment_analysis(
    per_segment: Mapping[str, Dataset],
) -> tuple[list[HoldoutRow], list[CombinationRow]]:
    """Generalization across segments.

    Hold-out: fit on all-but-one segment, score on the unseen one (R-squared
    reported unclamped; it can go negative). Combinations: for every subset
    of segments, the absolute Pearson correlation of each predictor with the
    response over the pooled rows, averaged across subsets of the same size;
    the per-segment-averaged variant is reported alongside.
    """
    seg_ids = sorted(per_segment)
    if len(seg_ids) < 2:
        raise ParameterError("cross-segment analysis needs at least 2 segments")
    names = per_segment[seg_ids[0]].predictor_names
    for sid in seg_ids:
        if per_segment[sid].predictor_names != names:
            raise ParameterError("all segments must share the same predictor columns")

    holdout: list[HoldoutRow] = []
    for sid in seg_ids:
        test = per_segment[sid]
        train_x = np.vstack([per_segment[s].x for s in seg_ids if s != sid])
        train_y = np.concatenate([per_segment[s].y for s in seg_ids if s != sid])
        row = HoldoutRow(held_out=sid, n_test=test.n)
        try:
            model = ols_fit(Dataset(train_x, train_y, list(names)))
            yhat = predict(model, test.x)
            row.r2 = r2_score(test.y, yhat)
            p = len(names) + 1
            row.adj_r2 = adjusted_r2(row.r2, test.n, p) if test.n > p else None
            row.n_mse = n_mse(test.y, yhat)
        except DataError:
            row.unevaluable = True
        holdout.append(row)

    combinations: list[CombinationRow] = []
    for size in range(1, len(seg_ids) + 1):
        pooled_acc: dict[str, list[float]] = {n: [] for n in names}
        segavg_acc: dict[str, list[float]] = {n: [] for n in names}
        combos = list(itertools.combinations(seg_ids, size))
        for combo in combos:
            x = np.vstack([per_segment[s].x for s in combo])
            y = np.concatenate([per_segment[s].y for s in combo])
            for j, name in enumerate(names):
                r = _abs_pearson_or_none(x[:, j], y)
                if r is not None:
                    pooled_acc[name].append(r)
                per_seg = [
                    _abs_pearson_or_none(per_segment[s].x[:, j], per_segment[s].y) for s in combo
                ]
                per_seg = [r for r in per_seg if r is not None]
                if per_seg:
                    segavg_acc[name].append(float(np.mean(per_seg)))
        combinations.append(
            CombinationRow(
                size=size,
                n_combinations=len(combos),
                mean_abs_pooled_r={
                    n: (float(np.mean(v)) if v else None) for n, v in pooled_acc.items()
                },
                mean_abs_segment_r={
                    n: (float(np.mean(v)) if v else None) for n, v in segavg_acc.items()
                },
            )
        )
    return holdout, combinations


def shapley_analysis(d: Dataset) -> ShapleyReport:
    """Shapley attribution of adjusted R-squared across the predictors."""
    return shapley_values(d)


# ---------------------------------------------------------------------------
# Full report assembly
# ---------------------------------------------------------------------------


@dataclass
class AssociationReport:
    config: AnalysisConfig
    n_intervals: int
    families: dict[str, dict] = field(default_factory=dict)
    cross_segment: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": {
                "slot_minutes": self.config.slot_minutes,
                "families": list(self.config.families),
                "methods": list(self.config.methods),
                "cv_folds": self.config.cv_folds,
                "seed": self.config.seed,
                "predictors": list(self.config.predictors),
            },
            "n_intervals": self.n_intervals,
            "families": self.families,
            "cross_segment": self.cross_segment,
        }


def run_association(
    metrics: Sequence[IntervalMetrics], binning: CrashBinning, cfg: AnalysisConfig
) -> AssociationReport:
    """Run every configured analysis for every crash family.

    Family analyses that cannot run (empty join, constant response, ...)
    are marked ``insufficient_data`` with the reason instead of failing the
    whole report.
    """
    report = AssociationReport(config=cfg, n_intervals=len(metrics))
    segment_ids = sorted({m.segment_id for m in metrics})
    for family in cfg.families:
        entry: dict = {}
        try:
            d = build_dataset(metrics, binning, family, cfg.predictors, cfg.exclude_slots)
        except DataError as exc:
            report.families[family] = {"insufficient_data": str(exc)}
            continue
        entry["n_rows"] = d.n
        entry["dropped"] = dict(d.dropped)
        entry["correlations"] = {
            method: row for method, row in per_metric_correlations(d, cfg.methods).items()
        }
        try:
            models = full_model_analysis(d, cfg)
            entry["full_model"] = {kind: rep.to_dict() for kind, rep in models.items()}
        except DataError as exc:
            entry["full_model"] = {"insufficient_data": str(exc)}
        try:
            entry["shapley"] = shapley_analysis(d).to_dict()
        except (DataError, ParameterError) as exc:
            entry["shapley"] = {"insufficient_data": str(exc)}
        report.families[family] = entry

        if len(segment_ids) >= 2:
            per_segment = {}
            try:
                for sid in segment_ids:
                    seg_metrics = [m for m in metrics if m.segment_id == sid]
                    per_segment[sid] = build_dataset(
                        seg_metrics, binning, family, cfg.predictors, cfg.exclude_slots
                    )
                holdout, combos = cross_segment_analysis(per_segment)
                report.cross_segment[family] = {
                    "holdout": [vars(h) for h in holdout],
                    "combinations": [
                        {
                            "size": c.size,
                            "n_combinations": c.n_combinations,
                            "mean_abs_pooled_r": c.mean_abs_pooled_r,
                            "mean_abs_segment_r": c.mean_abs_segment_r,
                        }
                        for c in combos
                    ],
                }
            except (DataError, ParameterError) as exc:
                report.cross_segment[family] = {"insufficient_data": str(exc)}
    return report


# ---------------------------------------------------------------------------
# Flat CSV table writers (shapes mirror the report tables)
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def correlations_table_csv(report: AssociationReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    columns = list(report.config.predictors) + list(BASELINE_COLUMNS)
    writer.writerow(["method", "family"] + columns)
    for family in report.config.families:
        entry = report.families.get(family, {})
        corr = entry.get("correlations")
        if not corr:
            continue
        for method in report.config.methods:
            row = corr.get(method, {})
            writer.writerow([method, family] + [_fmt(row.get(c)) for c in columns])
    return out.getvalue()


def full_model_table_csv(report: AssociationReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["family", "f_pvalue", "r2", "adj_r2", "n_mse_linear", "n_mse_poisson"])
    for family in report.config.families:
        models = report.families.get(family, {}).get("full_model")
        if not models or "insufficient_data" in models:
            continue
        linear = models["linear"]
        poisson = models["poisson"]
        writer.writerow(
            [
                family,
                _fmt(linear["f_pvalue"]),
                _fmt(linear["r2"]),
                _fmt(linear["adj_r2"]),
                _fmt(linear["n_mse"]),
                _fmt(poisson["n_mse"]),
            ]
        )
    return out.getvalue()


def shapley_table_csv(report: AssociationReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["family"] + list(report.config.predictors))
    for family in report.config.families:
        shap = report.families.get(family, {}).get("shapley")
        if not shap or "insufficient_data" in shap:
            continue
        phi = shap["phi"]
        writer.writerow([family] + [_fmt(phi.get(p)) for p in report.config.predictors])
    return out.getvalue()


def cross_segment_tables_csv(report: AssociationReport) -> tuple[str, str]:
    """Returns (combinations_csv, holdout_csv)."""
    combos_out = io.StringIO()
    writer = csv.writer(combos_out, lineterminator="\n")
    writer.writerow(
        ["family", "size", "n_combinations", "aggregation"] + list(report.config.predictors)
    )
    for family in report.config.families:
        cs = report.cross_segment.get(family)
        if not cs or "insufficient_data" in cs:
            continue
        for combo in cs["combinations"]:
            for agg_key, label in (("mean_abs_pooled_r", "pooled"), ("mean_abs_segment_r", "segment_mean")):
                writer.writerow(
                    [family, combo["size"], combo["n_combinations"], label]
                    + [_fmt(combo[agg_key].get(p)) for p in report.config.predictors]
                )

    holdout_out = io.StringIO()
    writer = csv.writer(holdout_out, lineterminator="\n")
    writer.writerow(["family", "held_out", "n_test", "r2", "adj_r2", "n_mse", "unevaluable"])
    for family in report.config.families:
        cs = report.cross_segment.get(family)
        if not cs or "insufficient_data" in cs:
            continue
        for row in cs["holdout"]:
            writer.writerow(
                [
                    family,
                    row["held_out"],
                    row["n_test"],
                    _fmt(row["r2"]),
                    _fmt(row["adj_r2"]),
                    _fmt(row["n_mse"]),
                    str(row["unevaluable"]).lower(),
                ]
            )
    return combos_out.getvalue(), holdout_out.getvalue()
