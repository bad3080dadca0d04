"""Run configuration: one JSON file wiring paths, segments, and analysis options.

All relative paths are resolved against the directory containing the config
file, so a generated bundle (config + data files) is relocatable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .association import AnalysisConfig
from .errors import ParameterError, SchemaError
from .geo import TangentPlane
from .network_metrics import ClusterConfig, SegmentConfig
from .trajectories import (
    DEFAULT_CLASS_THRESHOLD_M,
    DEFAULT_MAX_GAP_FRAMES,
    DEFAULT_MIN_DISPLACEMENT_M,
    DEFAULT_SG_ORDER,
    DEFAULT_SG_WINDOW,
)


@dataclass
class TrackPrepConfig:
    max_gap_frames: int = DEFAULT_MAX_GAP_FRAMES
    sg_window: int = DEFAULT_SG_WINDOW
    sg_order: int = DEFAULT_SG_ORDER
    class_threshold_m: float = DEFAULT_CLASS_THRESHOLD_M
    min_displacement_m: float = DEFAULT_MIN_DISPLACEMENT_M


@dataclass
class IntervalGrid:
    """Explicit metric windows: ``count`` windows of ``window_seconds`` every stride."""

    count: int
    window_seconds: float
    stride_seconds: float
    start_seconds: float = 0.0

    def windows(self) -> list[tuple[float, float]]:
        return [
            (self.start_seconds + i * self.stride_seconds,
             self.start_seconds + i * self.stride_seconds + self.window_seconds)
            for i in range(self.count)
        ]


@dataclass
class TrtConfig:
    theta: float = 0.5
    t_min_seconds: float = 30.0
    free_flow: float | None = None  # default: 85th percentile of frame mean speeds


@dataclass
class RunConfig:
    fps: float
    seed: int = 0
    output_dir: Path = Path(".")
    segments: list[SegmentConfig] = field(default_factory=list)
    trajectory_paths: dict[str, Path] = field(default_factory=dict)
    keypoints_path: Path | None = None
    crashes_path: Path | None = None
    metrics_path: Path | None = None
    anchor: tuple[float, float] | None = None
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    prep: TrackPrepConfig = field(default_factory=TrackPrepConfig)
    intervals: IntervalGrid | None = None
    trt: TrtConfig = field(default_factory=TrtConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    crash_years: tuple[int, int] | None = None

    def tangent_plane(self) -> TangentPlane:
        if self.anchor is None:
            raise ParameterError("config has no anchor latitude/longitude")
        return TangentPlane(self.anchor[0], self.anchor[1])


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise SchemaError(f"config {context} is missing required field {key!r}")
    return obj[key]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise SchemaError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config file is not valid JSON: {exc}") from exc
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    segments = []
    trajectory_paths = {}
    for i, seg in enumerate(obj.get("segments", [])):
        cfg = SegmentConfig(
            segment_id=_require(seg, "segment_id", f"segments[{i}]"),
            lane_count=int(_require(seg, "lane_count", f"segments[{i}]")),
            length_m=float(_require(seg, "length_m", f"segments[{i}]")),
            speed_limit=float(_require(seg, "speed_limit", f"segments[{i}]")),
            travel_axis=tuple(seg.get("travel_axis", (1.0, 0.0))),
            osr_thresholds=tuple(seg.get("osr_thresholds", (1.0,))),
            bbox=tuple(seg["bbox"]) if "bbox" in seg else None,
        )
        segments.append(cfg)
        if "trajectories" in seg:
            trajectory_paths[cfg.segment_id] = resolve(seg["trajectories"])

    cluster = ClusterConfig(**obj.get("cluster", {}))
    prep = TrackPrepConfig(**obj.get("prep", {}))
    trt = TrtConfig(**obj.get("trt", {}))

    analysis_obj = dict(obj.get("analysis", {}))
    for key in ("families", "methods", "predictors"):
        if key in analysis_obj:
            analysis_obj[key] = tuple(analysis_obj[key])
    analysis = AnalysisConfig(**analysis_obj)

    intervals = None
    if "intervals" in obj:
        intervals = IntervalGrid(**obj["intervals"])

    paths = obj.get("paths", {})
    return RunConfig(
        fps=float(_require(obj, "fps", "root")),
        seed=int(obj.get("seed", 0)),
        output_dir=resolve(paths.get("output_dir", ".")),
        segments=segments,
        trajectory_paths=trajectory_paths,
        keypoints_path=resolve(paths["keypoints"]) if "keypoints" in paths else None,
        crashes_path=resolve(paths["crashes"]) if "crashes" in paths else None,
        metrics_path=resolve(paths["metrics"]) if "metrics" in paths else None,
        anchor=tuple(obj["anchor"]) if "anchor" in obj else None,
        cluster=cluster,
        prep=prep,
        intervals=intervals,
        trt=trt,
        analysis=analysis,
        crash_years=tuple(obj["crash_years"]) if "crash_years" in obj else None,
    )
