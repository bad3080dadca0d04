import math

import numpy as np
import pytest

from netsafety.errors import DataError, ParameterError, SchemaError
from netsafety.trajectories import (
    Trajectory,
    VehicleClass,
    box_length_along_axis,
    classify_by_length,
    derive_kinematics,
    drop_static_objects,
    fill_gaps,
    parse_trajectories,
    prepare_tracks,
    serialize_trajectories,
    smooth_savitzky_golay,
    smooth_trajectory,
)

from oracles import sg_window_fit_oracle


def make_traj(frames_xy, fps=1.0, vid="v1", size=2.0):
    rows = ["frame,vehicle_id,x1,y1,x2,y2"]
    for f, x, y in frames_xy:
        rows.append(f"{f},{vid},{x - size / 2},{y - size / 2},{x + size / 2},{y + size / 2}")
    return parse_trajectories("\n".join(rows) + "\n", fps)[0]


class TestParse:
    def test_two_rows_one_vehicle(self):
        text = "frame,vehicle_id,x1,y1,x2,y2\n0,a,0,0,2,1\n1,a,1,0,3,1\n"
        trajs = parse_trajectories(text, fps=30.0)
        assert len(trajs) == 1
        assert [p.frame for p in trajs[0].points] == [0, 1]
        assert trajs[0].points[0].cx == 1.0

    def test_interleaved_vehicles_split_and_ordered(self):
        text = (
            "frame,vehicle_id,x1,y1,x2,y2\n"
            "0,a,0,0,1,1\n0,b,5,0,6,1\n1,b,6,0,7,1\n1,a,1,0,2,1\n"
        )
        trajs = parse_trajectories(text, fps=10.0)
        assert {t.vehicle_id for t in trajs} == {"a", "b"}
        for t in trajs:
            assert [p.frame for p in t.points] == [0, 1]

    def test_missing_field_names_line(self):
        text = "frame,vehicle_id,x1,y1,x2,y2\n0,a,0,0,2,1\n1,a,1,0,3\n"
        with pytest.raises(SchemaError, match="line 3"):
            parse_trajectories(text, fps=30.0)

    def test_missing_column_is_schema_error(self):
        with pytest.raises(SchemaError, match="x2"):
            parse_trajectories("frame,vehicle_id,x1,y1,y2\n", fps=30.0)

    def test_non_monotone_frames_name_vehicle(self):
        text = "frame,vehicle_id,x1,y1,x2,y2\n5,car7,0,0,1,1\n3,car7,1,0,2,1\n"
        with pytest.raises(DataError, match="car7"):
            parse_trajectories(text, fps=30.0)

    def test_timestamps_from_fps(self):
        traj = make_traj([(0, 0, 0), (30, 1, 0)], fps=30.0)
        assert traj.points[1].timestamp == pytest.approx(1.0)

    def test_round_trip_is_lossless(self):
        text = (
            "frame,vehicle_id,x1,y1,x2,y2\n"
            "0,a,0.25,0.5,2.75,1.5\n3,a,1.1,0.5,3.6,1.5\n0,b,9,9,11,10\n"
        )
        first = parse_trajectories(text, fps=4.0)
        second = parse_trajectories(serialize_trajectories(first), fps=4.0)
        assert len(first) == len(second)
        for t1, t2 in zip(first, second):
            assert t1.vehicle_id == t2.vehicle_id
            for p1, p2 in zip(t1.points, t2.points):
                assert (p1.frame, p1.x1, p1.y1, p1.x2, p1.y2) == (p2.frame, p2.x1, p2.y1, p2.x2, p2.y2)


class TestFillGaps:
    def test_linear_midpoint(self):
        traj = make_traj([(0, 0.0, 0.0), (2, 10.0, 0.0)], fps=1.0)
        filled, flags = fill_gaps(traj, max_gap=5)
        assert flags == []
        assert [p.frame for p in filled.points] == [0, 1, 2]
        assert filled.points[1].cx == pytest.approx(5.0)
        assert filled.points[1].timestamp == pytest.approx(1.0)

    def test_no_gaps_identity(self):
        traj = make_traj([(0, 0, 0), (1, 1, 0), (2, 2, 0)])
        filled, flags = fill_gaps(traj)
        assert flags == []
        assert [(p.frame, p.cx) for p in filled.points] == [(0, 0), (1, 1), (2, 2)]

    def test_gap_over_threshold_left_and_flagged(self):
        traj = make_traj([(0, 0, 0), (5, 10, 0)], fps=1.0)  # 4 missing frames
        filled, flags = fill_gaps(traj, max_gap=3)
        assert [p.frame for p in filled.points] == [0, 5]
        assert flags == [(0, 5)]

    def test_boundary_gap_exactly_max_gap_filled(self):
        traj = make_traj([(0, 0, 0), (4, 8, 0)], fps=1.0)  # 3 missing frames
        filled, flags = fill_gaps(traj, max_gap=3)
        assert flags == []
        assert [p.frame for p in filled.points] == [0, 1, 2, 3, 4]

    def test_idempotent(self):
        traj = make_traj([(0, 0, 0), (3, 6, 3), (10, 20, 10), (30, 40, 30)], fps=2.0)
        once, flags1 = fill_gaps(traj, max_gap=8)
        twice, flags2 = fill_gaps(once, max_gap=8)
        assert flags1 == flags2
        assert [(p.frame, p.x1, p.y1, p.x2, p.y2) for p in once.points] == [
            (p.frame, p.x1, p.y1, p.x2, p.y2) for p in twice.points
        ]


class TestSavitzkyGolay:
    def test_constant_preserved(self):
        out = smooth_savitzky_golay([5.0] * 7, window=5, order=2)
        np.testing.assert_allclose(out, 5.0, atol=1e-12)

    def test_linear_ramp_preserved(self):
        ramp = np.arange(0.0, 21.0)
        out = smooth_savitzky_golay(ramp, window=5, order=2)
        np.testing.assert_allclose(out, ramp, atol=1e-12)

    def test_cubic_matches_window_fit_oracle(self):
        t = np.arange(30, dtype=float)
        series = 0.02 * t**3 - 0.5 * t**2 + 3.0 * t - 7.0
        out = smooth_savitzky_golay(series, window=7, order=3)
        np.testing.assert_allclose(out, sg_window_fit_oracle(series, 7, 3), atol=1e-9)
        np.testing.assert_allclose(out, series, atol=1e-9)

    def test_noisy_series_matches_oracle(self):
        rng = np.random.default_rng(11)
        series = rng.normal(size=60)
        for window, order in [(5, 2), (7, 3), (21, 3)]:
            np.testing.assert_allclose(
                smooth_savitzky_golay(series, window, order),
                sg_window_fit_oracle(series, window, order),
                atol=1e-9,
            )

    @pytest.mark.parametrize("window,order", [(4, 2), (5, 5), (5, 6), (3, -1)])
    def test_bad_parameters(self, window, order):
        with pytest.raises(ParameterError):
            smooth_savitzky_golay(np.zeros(30), window, order)

    def test_short_series_rejected(self):
        with pytest.raises(ParameterError, match="shorter than window"):
            smooth_savitzky_golay(np.zeros(4), 5, 2)

    def test_polynomial_preserved_at_edges(self):
        # Degree <= order series are fixed points of the filter, edges included.
        t = np.arange(25, dtype=float)
        for window, order in [(5, 2), (7, 3), (21, 3)]:
            series = 1.0 + 2.0 * t + (0.3 * t**2 if order >= 2 else 0)
            out = smooth_savitzky_golay(series, window, order)
            np.testing.assert_allclose(out, series, atol=1e-9)


class TestKinematics:
    def test_unit_step_speed(self):
        traj = make_traj([(i, i * 1.0, 0.0) for i in range(5)], fps=30.0)
        samples = derive_kinematics(traj, fps=30.0)
        assert all(s.speed == pytest.approx(30.0) for s in samples)

    def test_stationary_zero(self):
        traj = make_traj([(i, 2.0, 3.0) for i in range(4)], fps=10.0)
        samples = derive_kinematics(traj)
        assert all(s.speed == 0.0 for s in samples)

    def test_three_four_five(self):
        traj = make_traj([(i, 3.0 * i, 4.0 * i) for i in range(4)], fps=1.0)
        samples = derive_kinematics(traj)
        assert all(s.speed == pytest.approx(5.0) for s in samples)

    def test_first_sample_copies_second(self):
        traj = make_traj([(0, 0, 0), (1, 1, 0), (2, 3, 0)], fps=1.0)
        samples = derive_kinematics(traj)
        assert samples[0].v_x == samples[1].v_x == pytest.approx(1.0)
        assert samples[2].v_x == pytest.approx(2.0)

    def test_single_point_rejected(self):
        traj = make_traj([(0, 0, 0)])
        with pytest.raises(DataError):
            derive_kinematics(traj)

    def test_gap_rejected(self):
        traj = make_traj([(0, 0, 0), (2, 2, 0)])
        with pytest.raises(DataError, match="gaps"):
            derive_kinematics(traj)

    def test_uniform_translation_constant_speed(self):
        rng = np.random.default_rng(2)
        dx, dy = rng.uniform(-3, 3, 2)
        fps = 12.0
        traj = make_traj([(i, 100 + i * dx, 50 + i * dy) for i in range(40)], fps=fps)
        samples = derive_kinematics(traj)
        expected = math.hypot(dx, dy) * fps
        assert all(s.speed == pytest.approx(expected) for s in samples)


class TestClassification:
    def test_car(self):
        assert classify_by_length(4.5, 8.0) is VehicleClass.CAR

    def test_truck(self):
        assert classify_by_length(16.0, 8.0) is VehicleClass.TRUCK

    def test_boundary_is_truck(self):
        assert classify_by_length(8.0, 8.0) is VehicleClass.TRUCK

    def test_non_positive_rejected(self):
        with pytest.raises(DataError):
            classify_by_length(0.0)

    def test_box_length_along_axis(self):
        traj = make_traj([(0, 0, 0), (1, 1, 0)], size=4.0)
        assert box_length_along_axis(traj, (1.0, 0.0)) == pytest.approx(4.0)
        # Perpendicular travel sees the y extent instead.
        assert box_length_along_axis(traj, (0.0, 1.0)) == pytest.approx(4.0)


class TestPreparation:
    def test_static_objects_dropped(self):
        moving = make_traj([(i, i * 1.0, 0) for i in range(5)], vid="m")
        parked = make_traj([(i, 0.05 * i, 0) for i in range(5)], vid="p")
        kept = drop_static_objects([moving, parked], min_displacement_m=2.0)
        assert [t.vehicle_id for t in kept] == ["m"]

    def test_long_gap_splits_runs(self):
        traj = make_traj([(0, 0, 0), (1, 25, 0), (30, 60, 0), (31, 85, 0)], fps=1.0)
        tracks = prepare_tracks([traj], (1, 0), max_gap=5, sg_window=3, sg_order=1, min_displacement_m=1.0)
        assert len(tracks) == 2
        assert all(t.vehicle_id == "v1" for t in tracks)
        assert list(tracks[0].frames) == [0, 1]
        assert list(tracks[1].frames) == [30, 31]

    def test_short_tracks_pass_unsmoothed(self):
        traj = make_traj([(i, 10.0 * i, 0) for i in range(4)], fps=1.0)
        tracks = prepare_tracks([traj], (1, 0), sg_window=21, sg_order=3, min_displacement_m=1.0)
        assert len(tracks) == 1
        np.testing.assert_allclose(tracks[0].x, [0, 10, 20, 30])

    def test_smooth_trajectory_helper_matches_filter(self):
        rng = np.random.default_rng(5)
        pts = [(i, float(i + rng.normal(0, 0.1)), 0.0) for i in range(30)]
        traj = make_traj(pts, fps=1.0)
        sm = smooth_trajectory(traj, window=7, order=2)
        expected = smooth_savitzky_golay([p.x1 for p in traj.points], 7, 2)
        np.testing.assert_allclose([p.x1 for p in sm.points], expected, atol=1e-12)
