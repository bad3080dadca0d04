"""Command-line entry point for reproducible batch runs.

Subcommands cover the whole pipeline: ``synth`` generates a desk-scale
scenario bundle, ``project`` maps pixel trajectories into world meters,
``metrics`` extracts per-interval network metrics, ``ssm`` emits pairwise
surrogate metrics, and ``associate``/``shapley`` run the crash-association
statistics. All randomness flows from the single config seed, so repeated
runs produce byte-identical outputs.

Exit codes: 0 on success, 2 for input/schema/fit errors (a JSON error
object is printed to stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import association, crashes, network_metrics, synth, trajectories
from .config import IntervalGrid, RunConfig, load_config
from .errors import NetSafetyError, ParameterError
from .geo import TangentPlane
from .projection import apply_homography, fit_homography, load_keypoints
from .surrogate import PairState, drac, ttc


def _fail(exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return 2


def _read(path: Path) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise NetSafetyError(f"input file not found: {path}") from None


def _prepare_segment_tracks(cfg: RunConfig, segment, path: Path):
    trajs = trajectories.parse_trajectories(_read(path), cfg.fps)
    return trajectories.prepare_tracks(
        trajs,
        segment.travel_axis,
        max_gap=cfg.prep.max_gap_frames,
        sg_window=cfg.prep.sg_window,
        sg_order=cfg.prep.sg_order,
        class_threshold_m=cfg.prep.class_threshold_m,
        min_displacement_m=cfg.prep.min_displacement_m,
    )


def _windows_for(cfg: RunConfig, tracks) -> list[tuple[float, float]]:
    if cfg.intervals is not None:
        return cfg.intervals.windows()
    # Fall back to slot-aligned windows covering the observed span.
    slot = cfg.analysis.slot_minutes * 60.0
    t_values = [t for track in tracks for t in (track.t[0], track.t[-1])]
    if not t_values:
        return []
    t0 = (min(t_values) // slot) * slot
    t1 = max(t_values)
    count = int((t1 - t0) // slot) + 1
    return IntervalGrid(count=count, window_seconds=slot, stride_seconds=slot, start_seconds=t0).windows()


def cmd_synth(args) -> int:
    spec = synth.ScenarioSpec.from_json(_read(Path(args.spec)))
    if args.seed is not None:
        spec.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plane = TangentPlane(spec.anchor_lat, spec.anchor_lon)
    segments = spec.segment_configs()

    traj_csvs = synth.generate_trajectories(spec)
    for sid, text in traj_csvs.items():
        (out / f"trajectories_{sid}.csv").write_text(text)
    (out / "keypoints.json").write_text(synth.identity_keypoints_json(spec, plane))

    # Interval metrics feed the planted crash model.
    rows = []
    for seg in segments:
        trajs = trajectories.parse_trajectories(traj_csvs[seg.segment_id], spec.fps)
        tracks = trajectories.prepare_tracks(trajs, seg.travel_axis)
        rows.extend(
            network_metrics.compute_interval_metrics(
                tracks, seg, network_metrics.ClusterConfig(), spec.fps, spec.windows()
            )
        )
    plant = synth.generate_crash_counts(
        rows,
        spec.beta_star or {"intercept": 1.5},
        noise_kind=spec.noise_kind,
        seed=spec.seed,
        slot_minutes=spec.slot_minutes,
        target_r2=spec.target_r2,
    )
    (out / "crashes.csv").write_text(
        synth.crash_records_csv(plant, segments, spec.slot_minutes, plane, seed=spec.seed)
    )
    (out / "plant.json").write_text(
        json.dumps(
            {"beta_star": plant.beta_star, "sigma": plant.sigma, "noise_kind": spec.noise_kind},
            indent=2,
            sort_keys=True,
        )
    )
    (out / "scenario.json").write_text(spec.to_json())

    config = {
        "fps": spec.fps,
        "seed": spec.seed,
        "anchor": [spec.anchor_lat, spec.anchor_lon],
        "paths": {
            "output_dir": ".",
            "keypoints": "keypoints.json",
            "crashes": "crashes.csv",
            "metrics": "metrics.csv",
        },
        "segments": [
            {
                "segment_id": seg.segment_id,
                "lane_count": seg.lane_count,
                "length_m": seg.length_m,
                "speed_limit": seg.speed_limit,
                "travel_axis": list(seg.travel_axis),
                "osr_thresholds": list(seg.osr_thresholds),
                "bbox": list(seg.bbox),
                "trajectories": f"trajectories_{seg.segment_id}.csv",
            }
            for seg in segments
        ],
        "intervals": {
            "count": spec.n_intervals,
            "window_seconds": spec.interval_seconds,
            "stride_seconds": spec.slot_seconds,
            "start_seconds": 0.0,
        },
        "analysis": {"slot_minutes": spec.slot_minutes, "seed": spec.seed},
        "crash_years": [synth.BASE_DATE.year, synth.BASE_DATE.year],
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True))
    return 0


def cmd_project(args) -> int:
    cfg = load_config(args.config)
    if cfg.keypoints_path is None:
        raise NetSafetyError("config has no paths.keypoints entry")
    pairs = load_keypoints(_read(cfg.keypoints_path), cfg.tangent_plane())
    h = fit_homography(pairs)
    trajs = trajectories.parse_trajectories(_read(Path(args.infile)), cfg.fps)
    projected = []
    for traj in trajs:
        points = []
        for p in traj.points:
            corners = [
                apply_homography(h, (p.x1, p.y1)),
                apply_homography(h, (p.x1, p.y2)),
                apply_homography(h, (p.x2, p.y1)),
                apply_homography(h, (p.x2, p.y2)),
            ]
            xs = [c[0] for c in corners]
            ys = [c[1] for c in corners]
            points.append(
                trajectories.TrackPoint(p.frame, p.timestamp, min(xs), min(ys), max(xs), max(ys))
            )
        projected.append(trajectories.Trajectory(traj.vehicle_id, points, traj.fps))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(trajectories.serialize_trajectories(projected))
    out.with_suffix(out.suffix + ".homography.json").write_text(h.to_json())
    return 0


def cmd_metrics(args) -> int:
    cfg = load_config(args.config)
    if not cfg.segments:
        raise NetSafetyError("config defines no segments")
    thresholds = cfg.segments[0].osr_thresholds
    for seg in cfg.segments[1:]:
        if seg.osr_thresholds != thresholds:
            raise ParameterError("all segments must share osr_thresholds for one metrics file")
    if args.infile is not None:
        if len(cfg.segments) != 1:
            raise ParameterError("--in requires a single-segment config")
        paths = {cfg.segments[0].segment_id: Path(args.infile)}
    else:
        paths = cfg.trajectory_paths
    rows: list[network_metrics.IntervalMetrics] = []
    for seg in cfg.segments:
        if seg.segment_id not in paths:
            raise NetSafetyError(f"no trajectory path configured for segment {seg.segment_id!r}")
        tracks = _prepare_segment_tracks(cfg, seg, paths[seg.segment_id])
        rows.extend(
            network_metrics.compute_interval_metrics(
                tracks,
                seg,
                cfg.cluster,
                cfg.fps,
                _windows_for(cfg, tracks),
                trt_theta=cfg.trt.theta,
                trt_t_min=cfg.trt.t_min_seconds,
                free_flow=cfg.trt.free_flow,
            )
        )
    out = Path(args.out) if args.out else (cfg.metrics_path or cfg.output_dir / "metrics.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(network_metrics.write_metrics_csv(rows, thresholds))
    return 0


def _monotone_passage_times(track) -> tuple[np.ndarray, np.ndarray]:
    pos = np.maximum.accumulate(track["pos"])
    return pos, track["t"]


def cmd_ssm(args) -> int:
    cfg = load_config(args.config)
    if not cfg.segments:
        raise NetSafetyError("config defines no segments")
    seg = cfg.segments[0]
    tracks = _prepare_segment_tracks(cfg, seg, Path(args.infile))
    ux, uy = seg.travel_axis
    per_vehicle = {}
    samples = []
    for track in tracks:
        pos = track.x * ux + track.y * uy
        vel = track.vx * ux + track.vy * uy
        per_vehicle.setdefault(track.vehicle_id, []).append((track.t, pos))
        for i in range(track.t.size):
            samples.append((track.t[i], track.vehicle_id, pos[i], vel[i]))
    passage = {
        vid: (np.concatenate([np.maximum.accumulate(p) for _, p in runs]),
              np.concatenate([t for t, _ in runs]))
        for vid, runs in per_vehicle.items()
    }
    samples.sort(key=lambda s: (s[0], s[1]))

    by_time: dict[float, list] = {}
    for s in samples:
        by_time.setdefault(s[0], []).append(s)

    out_buf = io.StringIO()
    writer = csv.writer(out_buf, lineterminator="\n")
    writer.writerow(["t", "follower_id", "leader_id", "ttc", "drac", "pet", "gap", "v_follower", "v_leader"])
    for t in sorted(by_time):
        frame = sorted(by_time[t], key=lambda s: s[2])
        for (t_f, fid, pos_f, vel_f), (_, lid, pos_l, vel_l) in zip(frame, frame[1:]):
            if pos_l <= pos_f:
                continue
            state = PairState(x_leader=pos_l, x_follower=pos_f, v_leader=vel_l, v_follower=vel_f)
            ttc_v = ttc(state)
            drac_v = drac(state)
            lead_pos, lead_t = passage[lid]
            pet_v = None
            if lead_pos[0] <= pos_f <= lead_pos[-1]:
                t_pass = float(np.interp(pos_f, lead_pos, lead_t))
                if t_pass <= t_f:
                    pet_v = t_f - t_pass
            writer.writerow(
                [
                    repr(float(t_f)),
                    fid,
                    lid,
                    "" if ttc_v is None else repr(float(ttc_v)),
                    repr(float(drac_v)),
                    "" if pet_v is None else repr(float(pet_v)),
                    repr(float(pos_l - pos_f)),
                    repr(float(vel_f)),
                    repr(float(vel_l)),
                ]
            )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(out_buf.getvalue())
    return 0


def _run_association(cfg: RunConfig):
    if cfg.metrics_path is None:
        raise NetSafetyError("config has no paths.metrics entry")
    if cfg.crashes_path is None:
        raise NetSafetyError("config has no paths.crashes entry")
    rows = network_metrics.read_metrics_csv(_read(cfg.metrics_path))
    records = crashes.parse_crashes(_read(cfg.crashes_path))
    binning = crashes.bin_crashes(
        records,
        cfg.segments,
        cfg.analysis.slot_minutes,
        cfg.tangent_plane(),
        year_range=cfg.crash_years,
    )
    return association.run_association(rows, binning, cfg.analysis)


def cmd_associate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.analysis.seed = args.seed
    report = _run_association(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.format in ("json", "both"):
        (out / "association_report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    if args.format in ("csv", "both"):
        (out / "correlations.csv").write_text(association.correlations_table_csv(report))
        (out / "full_model.csv").write_text(association.full_model_table_csv(report))
        (out / "shapley.csv").write_text(association.shapley_table_csv(report))
        combos, holdout = association.cross_segment_tables_csv(report)
        (out / "cross_segment_correlations.csv").write_text(combos)
        (out / "cross_segment_holdout.csv").write_text(holdout)
    return 0


def cmd_shapley(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.analysis.seed = args.seed
    report = _run_association(cfg)
    text = association.shapley_table_csv(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netsafety", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario bundle")
    p.add_argument("--spec", required=True, help="scenario spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("project", help="fit the keypoint homography and project trajectories")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", required=True, help="pixel-domain trajectory CSV")
    p.add_argument("--out", required=True, help="world-frame trajectory CSV")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("metrics", help="compute per-interval network metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", default=None, help="trajectory CSV (single-segment runs)")
    p.add_argument("--out", default=None, help="metrics CSV (default from config)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("ssm", help="emit pairwise surrogate safety metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", required=True, help="world-frame trajectory CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ssm)

    p = sub.add_parser("associate", help="run the crash-association analyses")
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--seed", type=int, default=None, help="override the analysis seed")
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("shapley", help="Shapley attribution table only")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the analysis seed")
    p.set_defaults(func=cmd_shapley)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NetSafetyError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
