"""Mission pipeline: scenario configs, the run loop, metrics, and the sweep.

Metric oracles are hand-computed; run-loop tests drive a miniature scenario
(short straight leg past three pilings and a wall) end to end and check the
structural invariants that the full-size acceptance scenarios rely on.
"""

import csv
import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from sonarmap.geometry import PointCloud
from sonarmap.pipeline import (
    SWEEP_DISTANCES,
    SWEEP_ROTATIONS_DEG,
    ScenarioConfig,
    SlamParams,
    StageError,
    SweepRow,
    TrajectorySpec,
    load_scenario,
    map_error,
    run_scenario,
    sweep_keyframes,
    voxel_coverage,
)
from sonarmap.simworld import Box, Cylinder, Scene, save_scene


def _cloud(points, frame="world", intensity=None):
    return PointCloud(np.asarray(points, dtype=float).reshape(-1, 3), frame=frame,
                      intensity=intensity)


# ---------------------------------------------------------------------------
# coverage metric
# ---------------------------------------------------------------------------


class TestVoxelCoverage:
    def test_empty_cloud_covers_nothing(self):
        assert voxel_coverage(PointCloud.empty("world"), 0.1) == 0

    def test_points_sharing_a_cell_count_once(self):
        c = _cloud([[0.01, 0.02, 0.03], [0.04, 0.01, 0.09], [0.09, 0.09, 0.0]])
        assert voxel_coverage(c, 0.1) == 1

    def test_cell_splitting_follows_voxel_size(self):
        c = _cloud([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]])
        assert voxel_coverage(c, 0.1) == 1
        assert voxel_coverage(c, 0.04) == 2

    def test_negative_coordinates_fall_in_their_own_cell(self):
        c = _cloud([[-0.01, 0.0, 0.0], [0.01, 0.0, 0.0]])
        assert voxel_coverage(c, 0.1) == 2

    def test_invariant_to_order_and_duplication(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(-3.0, 3.0, size=(200, 3))
        base = voxel_coverage(_cloud(pts), 0.25)
        shuffled = pts[rng.permutation(len(pts))]
        doubled = np.vstack([pts, pts])
        assert voxel_coverage(_cloud(shuffled), 0.25) == base
        assert voxel_coverage(_cloud(doubled), 0.25) == base

    def test_rejects_non_positive_voxel(self):
        with pytest.raises(ValueError):
            voxel_coverage(_cloud([[0.0, 0.0, 0.0]]), 0.0)


# ---------------------------------------------------------------------------
# accuracy metric
# ---------------------------------------------------------------------------


def _post_scene():
    post = Cylinder(center=(0.0, 0.0, -2.0), radius=0.25, height=4.0,
                    class_tag="piling", instance_id=0)
    return Scene((post,), name="one-post")


class TestMapError:
    def test_points_on_the_surface_have_zero_error(self):
        c = _cloud([[0.25, 0.0, -2.0], [0.0, -0.25, -1.0], [-0.25, 0.0, -3.0]])
        mae, rmse = map_error(c, _post_scene())
        assert mae == pytest.approx(0.0, abs=1e-9)
        assert rmse == pytest.approx(0.0, abs=1e-9)

    def test_hand_computed_mae_and_rmse(self):
        # distances to the post's lateral surface: 0.0 and 0.2
        c = _cloud([[0.25, 0.0, -2.0], [0.45, 0.0, -2.0]])
        mae, rmse = map_error(c, _post_scene())
        assert mae == pytest.approx(0.1, abs=1e-12)
        assert rmse == pytest.approx(math.sqrt(0.02), abs=1e-12)

    def test_interior_points_count_by_unsigned_distance(self):
        c = _cloud([[0.05, 0.0, -2.0]])  # 0.2 m inside the lateral surface
        mae, rmse = map_error(c, _post_scene())
        assert mae == pytest.approx(0.2, abs=1e-12)

    def test_rmse_never_below_mae(self):
        rng = np.random.default_rng(3)
        c = _cloud(rng.uniform(-4.0, 4.0, size=(64, 3)))
        mae, rmse = map_error(c, _post_scene())
        assert rmse >= mae

    def test_empty_map_is_an_error(self):
        with pytest.raises(ValueError):
            map_error(PointCloud.empty("world"), _post_scene())


# ---------------------------------------------------------------------------
# miniature scenario (shared by run/sweep/CLI tests)
# ---------------------------------------------------------------------------


def micro_scene() -> Scene:
    return Scene(
        (
            Cylinder(center=(4.0, 1.2, -2.0), radius=0.15, height=4.0,
                     class_tag="piling", instance_id=0),
            Cylinder(center=(7.0, -1.5, -2.0), radius=0.15, height=4.0,
                     class_tag="piling", instance_id=1),
            Cylinder(center=(9.0, 0.5, -2.0), radius=0.15, height=4.0,
                     class_tag="piling", instance_id=2),
            Box(center=(10.5, 0.0, -2.0), extents=(0.6, 10.0, 4.0),
                class_tag="seawall", instance_id=3),
        ),
        name="micro",
    )


def micro_scenario_dict(scene_file: str) -> dict:
    return {
        "name": "micro",
        "scene": scene_file,
        "trajectory": {
            "waypoints": [[0.0, 0.0], [6.0, 0.0]],
            "speed_mps": 1.0,
            "depth_m": -1.0,
            "rate_hz": 5.0,
            "turn_rate_deg_s": 30.0,
        },
        "seed": 5,
        "drift": {
            "vel_bias_mps": [0.0, 0.0],
            "yaw_rate_bias_deg_s": 0.0,
            "vel_noise_sd_mps": 0.0,
            "yaw_rate_noise_sd_deg_s": 0.0,
        },
        "sonar": {
            "horizontal": {"max_range_m": 12.0, "range_resolution_m": 0.05,
                           "fan_deg": 130.0, "aperture_deg": 20.0,
                           "beam_count": 97, "elevation_samples": 9},
            "vertical": {"max_range_m": 12.0, "range_resolution_m": 0.05,
                         "fan_deg": 20.0, "aperture_deg": 20.0,
                         "beam_count": 21, "elevation_samples": 9},
        },
        "noise": {"speckle": False, "background_mean": 0.0},
        "cfar": {"train_cells": 8, "guard_cells": 2, "p_fa": 1.0e-3},
        # noiseless renders of rotationally symmetric pilings produce
        # identical appearance patches, so pairing ambiguity is genuinely zero
        "fusion": {"patch_size": 5, "confidence_min": 0.0},
        "slam": {"keyframe_distance_m": 2.0, "keyframe_rotation_deg": 30.0},
        "inference": {"bearing_limit_deg": 10.0, "classifier": "oracle"},
        "metrics": {"coverage_voxel_m": 0.1},
        "modes": ["fusion", "inference", "submapping"],
    }


def write_micro_scenario(root: Path) -> Path:
    save_scene(micro_scene(), root / "micro_scene.yaml")
    cfg_path = root / "micro.yaml"
    cfg_path.write_text(yaml.safe_dump(micro_scenario_dict("micro_scene.yaml")))
    return cfg_path


@pytest.fixture(scope="module")
def micro_cfg_path(tmp_path_factory):
    return write_micro_scenario(tmp_path_factory.mktemp("micro"))


@pytest.fixture(scope="module")
def micro_cfg(micro_cfg_path):
    return load_scenario(micro_cfg_path)


@pytest.fixture(scope="module")
def micro_run(micro_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("micro_out")
    return out, run_scenario(micro_cfg, out_dir=out)


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------


class TestScenarioConfig:
    def test_full_file_maps_every_block(self, micro_cfg):
        cfg = micro_cfg
        assert cfg.name == "micro"
        assert [p.class_tag for p in cfg.scene.primitives].count("piling") == 3
        assert cfg.trajectory.waypoints == ((0.0, 0.0), (6.0, 0.0))
        assert cfg.trajectory.depth == -1.0
        assert cfg.trajectory.rate == 5.0
        assert cfg.trajectory.turn_rate == pytest.approx(math.radians(30.0))
        assert cfg.seed == 5
        assert cfg.h_sonar.mount == "horizontal" and cfg.h_sonar.beam_count == 97
        assert cfg.h_sonar.horizontal_fov == pytest.approx(math.radians(130.0))
        assert cfg.v_sonar.mount == "vertical" and cfg.v_sonar.beam_count == 21
        assert cfg.v_sonar.max_range == 12.0
        assert cfg.noise.speckle is False
        assert cfg.cfar.train_cells == 8 and cfg.cfar.p_fa == 1e-3
        assert cfg.fusion.confidence_min == 0.0
        assert cfg.slam.keyframe_distance == 2.0
        assert cfg.slam.keyframe_rotation == pytest.approx(math.radians(30.0))
        assert cfg.inference.bearing_limit == pytest.approx(math.radians(10.0))
        assert cfg.classifier == "oracle"
        assert cfg.coverage_voxel == 0.1
        assert cfg.modes == ("fusion", "inference", "submapping")

    def test_scene_path_resolves_relative_to_the_config_file(self, micro_cfg_path,
                                                             monkeypatch, tmp_path):
        monkeypatch.chdir(tmp_path)  # cwd must not matter
        cfg = load_scenario(micro_cfg_path)
        assert len(cfg.scene.primitives) == 4

    def test_minimal_file_gets_documented_defaults(self, tmp_path):
        save_scene(micro_scene(), tmp_path / "s.yaml")
        (tmp_path / "c.yaml").write_text(yaml.safe_dump({
            "scene": "s.yaml",
            "trajectory": {"waypoints": [[0.0, 0.0], [5.0, 0.0]]},
        }))
        cfg = load_scenario(tmp_path / "c.yaml")
        assert cfg.name == "c"
        assert cfg.seed == 0
        assert cfg.trajectory.speed == 1.0 and cfg.trajectory.rate == 5.0
        assert cfg.drift.vel_bias == (0.0, 0.0)
        assert cfg.h_sonar.beam_count == 193 and cfg.v_sonar.beam_count == 41
        assert cfg.noise.speckle is True
        assert cfg.slam.keyframe_distance == 1.0
        assert cfg.slam.keyframe_rotation == pytest.approx(math.radians(30.0))
        assert cfg.slam.pcm_threshold == pytest.approx(11.34)
        assert cfg.inference.class_whitelist == ("piling", "seawall", "dock")
        assert cfg.classifier == "oracle"
        assert cfg.coverage_voxel == 0.1
        assert cfg.modes == ("fusion", "inference", "submapping")

    def test_angle_and_bin_overrides_convert_units(self, tmp_path):
        save_scene(micro_scene(), tmp_path / "s.yaml")
        (tmp_path / "c.yaml").write_text(yaml.safe_dump({
            "scene": "s.yaml",
            "trajectory": {"waypoints": [[0.0, 0.0], [5.0, 0.0]]},
            "slam": {"keyframe_rotation_deg": 90.0,
                     "ssm_icp": {"max_correspondence_m": 2.5}},
            "inference": {"r_bin_m": 0.2, "theta_bin_deg": 1.6,
                          "class_whitelist": ["piling"]},
        }))
        cfg = load_scenario(tmp_path / "c.yaml")
        assert cfg.slam.keyframe_rotation == pytest.approx(math.radians(90.0))
        assert cfg.slam.ssm_icp.max_correspondence == 2.5
        assert cfg.inference.r_bin == 0.2
        assert cfg.inference.theta_bin == pytest.approx(math.radians(1.6))
        assert cfg.inference.class_whitelist == ("piling",)

    def test_unknown_keys_are_rejected_by_name(self, tmp_path):
        save_scene(micro_scene(), tmp_path / "s.yaml")
        base = {"scene": "s.yaml",
                "trajectory": {"waypoints": [[0.0, 0.0], [5.0, 0.0]]}}
        (tmp_path / "root.yaml").write_text(yaml.safe_dump({**base, "bogus": 1}))
        with pytest.raises(ValueError, match="bogus"):
            load_scenario(tmp_path / "root.yaml")
        nested = {**base, "slam": {"keyfame_distance_m": 2.0}}  # typo
        (tmp_path / "nested.yaml").write_text(yaml.safe_dump(nested))
        with pytest.raises(ValueError, match="keyfame_distance_m"):
            load_scenario(tmp_path / "nested.yaml")

    def test_missing_scene_or_waypoints_is_an_error(self, tmp_path):
        (tmp_path / "a.yaml").write_text(yaml.safe_dump(
            {"trajectory": {"waypoints": [[0.0, 0.0], [5.0, 0.0]]}}))
        with pytest.raises(ValueError, match="scene"):
            load_scenario(tmp_path / "a.yaml")
        save_scene(micro_scene(), tmp_path / "s.yaml")
        (tmp_path / "b.yaml").write_text(yaml.safe_dump({"scene": "s.yaml"}))
        with pytest.raises(ValueError, match="waypoints"):
            load_scenario(tmp_path / "b.yaml")

    def test_bad_mode_and_classifier_are_rejected(self, tmp_path):
        save_scene(micro_scene(), tmp_path / "s.yaml")
        base = {"scene": "s.yaml",
                "trajectory": {"waypoints": [[0.0, 0.0], [5.0, 0.0]]}}
        (tmp_path / "m.yaml").write_text(yaml.safe_dump({**base, "modes": ["bogus"]}))
        with pytest.raises(ValueError, match="mode"):
            load_scenario(tmp_path / "m.yaml")
        (tmp_path / "k.yaml").write_text(yaml.safe_dump(
            {**base, "inference": {"classifier": "cnn"}}))
        with pytest.raises(ValueError, match="classifier"):
            load_scenario(tmp_path / "k.yaml")

    def test_config_object_validates_directly(self):
        with pytest.raises(ValueError):
            ScenarioConfig(name="x", scene=micro_scene(),
                           trajectory=TrajectorySpec(((0.0, 0.0), (1.0, 0.0))),
                           modes=())
        with pytest.raises(ValueError):
            TrajectorySpec(waypoints=((0.0, 0.0),))  # needs two waypoints


# ---------------------------------------------------------------------------
# single-scenario run
# ---------------------------------------------------------------------------


class TestRunScenario:
    def test_keyframes_are_sequential_and_respect_the_gate(self, micro_run):
        _, result = micro_run
        graph = result.graph
        ids = sorted(graph.keyframes)
        assert ids == list(range(len(ids)))
        assert len(ids) >= 3
        kfs = [graph.keyframes[i] for i in ids]
        assert kfs[0].time == pytest.approx(0.0)  # first sample is a keyframe
        for a, b in zip(kfs, kfs[1:]):
            d = math.hypot(b.dr_pose.x - a.dr_pose.x, b.dr_pose.y - a.dr_pose.y)
            r = abs(b.dr_pose.yaw - a.dr_pose.yaw)
            assert d >= 2.0 - 1e-9 or r >= math.radians(30.0) - 1e-9

    def test_zero_drift_estimates_stay_near_truth(self, micro_run):
        _, result = micro_run
        assert set(result.kf_truth) == set(result.graph.keyframes)
        for kf_id, kf in result.graph.keyframes.items():
            truth = result.kf_truth[kf_id].to_pose2()
            err = math.hypot(kf.estimate.x - truth.x, kf.estimate.y - truth.y)
            assert err < 0.15

    def test_every_keyframe_anchors_one_frozen_submap(self, micro_run):
        _, result = micro_run
        assert set(result.submaps) == set(result.graph.keyframes)
        for kf_id, sm in result.submaps.items():
            kf = result.graph.keyframes[kf_id]
            assert sm.frozen
            assert sm.anchor_time == pytest.approx(kf.time)
            rel0, cloud0 = sm.entries[0]
            assert rel0.almost_equal(type(rel0).identity(), atol=1e-12)
            assert np.array_equal(cloud0.points, kf.fused_cloud.points)

    def test_every_frame_lands_in_exactly_one_submap(self, micro_run):
        _, result = micro_run
        total = sum(sm.n_entries for sm in result.submaps.values())
        rejected = sum(sm.rejected for sm in result.submaps.values())
        assert total == result.n_frames
        assert rejected == 0
        assert result.n_frames >= 25

    def test_maps_cover_requested_modes_and_submapping_dominates_fusion(self, micro_run):
        _, result = micro_run
        assert set(result.maps) == {"fusion", "inference", "submapping"}
        for mode, cloud in result.maps.items():
            assert cloud.frame == "world"
            assert len(cloud) > 0
            assert result.coverage[mode] == voxel_coverage(cloud, 0.1)
        assert result.coverage["submapping"] >= result.coverage["fusion"]
        assert len(result.maps["inference"]) >= len(result.maps["fusion"])

    def test_inference_stage_trained_class_models(self, micro_run):
        _, result = micro_run
        assert "piling" in result.models
        assert result.models["piling"].updates >= 1
        assert any(kf.augmented_cloud is not None
                   for kf in result.graph.keyframes.values())

    def test_map_accuracy_is_within_the_mission_bound(self, micro_run):
        _, result = micro_run
        for mode in result.maps:
            mae, rmse = result.errors[mode]
            assert np.isfinite(mae) and np.isfinite(rmse)
            assert rmse >= mae
            assert mae <= 0.35

    def test_runtime_stages_count_their_events(self, micro_run):
        _, result = micro_run
        t = result.runtimes
        n_kf = len(result.graph)
        assert t["fusion_per_pair"].count == result.n_frames
        assert t["inference_per_keyframe"].count == n_kf
        # one accumulate per frame plus one close per submap
        assert t["submap_construction"].count == result.n_frames + len(result.submaps)
        for timing in t.values():
            assert timing.total_s >= 0.0
            assert timing.mean_s >= 0.0

    def test_exports_land_in_the_output_directory(self, micro_run):
        out, result = micro_run
        for name in ("coverage.csv", "error.csv", "runtime.csv", "trajectory.csv",
                     "map_fusion.ply", "map_inference.ply", "map_submapping.ply"):
            assert (out / name).is_file(), name
        with open(out / "coverage.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["mode"] for r in rows] == ["fusion", "inference", "submapping"]
        for r in rows:
            assert int(r["coverage_voxels"]) == result.coverage[r["mode"]]
            assert int(r["keyframes"]) == len(result.graph)
            assert float(r["keyframe_distance_m"]) == 2.0
            assert float(r["keyframe_rotation_deg"]) == pytest.approx(30.0)
        with open(out / "error.csv", newline="") as fh:
            err_rows = {r["mode"]: r for r in csv.DictReader(fh)}
        for mode, (mae, rmse) in result.errors.items():
            assert float(err_rows[mode]["mae_m"]) == pytest.approx(mae)
            assert float(err_rows[mode]["rmse_m"]) == pytest.approx(rmse)
        with open(out / "runtime.csv", newline="") as fh:
            stages = {r["stage"] for r in csv.DictReader(fh)}
        assert {"fusion_per_pair", "inference_per_keyframe",
                "submap_construction"} <= stages
        header = (out / "map_fusion.ply").read_text().splitlines()
        n = len(result.maps["fusion"])
        assert header[2] == f"element vertex {n}"
        with open(out / "trajectory.csv", newline="") as fh:
            traj = list(csv.DictReader(fh))
        assert len(traj) == len(result.graph)
        assert traj[0]["kf_id"] == "0"

    def test_runs_are_bitwise_repeatable(self, micro_cfg, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_scenario(micro_cfg, out_dir=a)
        run_scenario(micro_cfg, out_dir=b, seed=micro_cfg.seed)
        for name in ("coverage.csv", "error.csv", "map_fusion.ply",
                     "map_inference.ply", "map_submapping.ply"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_mode_subset_skips_inference_work(self, micro_cfg):
        result = run_scenario(micro_cfg, modes=("fusion",))
        assert set(result.maps) == {"fusion"}
        assert all(kf.augmented_cloud is None
                   for kf in result.graph.keyframes.values())
        assert "inference_per_keyframe" not in result.runtimes

    def test_failures_carry_their_stage_tag(self, micro_cfg):
        mismatched = dataclasses.replace(micro_cfg.v_sonar, range_resolution=0.1)
        broken = dataclasses.replace(micro_cfg, v_sonar=mismatched)
        with pytest.raises(StageError) as exc_info:
            run_scenario(broken, modes=("fusion",))
        assert exc_info.value.stage == "fusion_per_pair"
        assert "fusion_per_pair" in str(exc_info.value)


# ---------------------------------------------------------------------------
# keyframe-threshold sweep
# ---------------------------------------------------------------------------


class TestSweep:
    def test_default_grid_is_the_published_one(self):
        assert SWEEP_DISTANCES == (1.0, 2.0, 3.0, 4.0, 5.0)
        assert SWEEP_ROTATIONS_DEG == (30.0, 60.0, 90.0)

    def test_reduced_sweep_rows_and_files(self, micro_cfg, tmp_path):
        result = sweep_keyframes(micro_cfg, tmp_path, distances=(1.5, 3.0),
                                 rotations_deg=(45.0,))
        assert result.failures == []
        keys = [(r.mode, r.distance, r.rotation_deg) for r in result.rows]
        assert keys == [
            ("fusion", 1.5, 45.0), ("fusion", 3.0, 45.0),
            ("inference", 1.5, 45.0), ("inference", 3.0, 45.0),
            ("submapping", 1.5, 45.0), ("submapping", 3.0, 45.0),
        ]
        by_key = {k: r for k, r in zip(keys, result.rows)}
        for d in (1.5, 3.0):
            assert (by_key[("submapping", d, 45.0)].coverage
                    >= by_key[("fusion", d, 45.0)].coverage)
        # denser keyframing means more keyframes
        assert (by_key[("fusion", 1.5, 45.0)].keyframes
                > by_key[("fusion", 3.0, 45.0)].keyframes)
        for row in result.rows:
            assert row.rmse >= row.mae >= 0.0

        with open(tmp_path / "coverage.csv", newline="") as fh:
            cov_rows = list(csv.DictReader(fh))
        assert len(cov_rows) == 6
        assert int(cov_rows[0]["coverage_voxels"]) == result.rows[0].coverage
        assert (tmp_path / "error.csv").is_file()
        assert (tmp_path / "runtime.csv").is_file()
        with open(tmp_path / "coverage_grid_fusion.csv", newline="") as fh:
            grid = list(csv.reader(fh))
        assert grid[0] == ["rotation_deg", "1.5", "3.0"]
        assert grid[1][0] == "45.0"
        assert int(grid[1][1]) == by_key[("fusion", 1.5, 45.0)].coverage
        assert int(grid[1][2]) == by_key[("fusion", 3.0, 45.0)].coverage
        assert not (tmp_path / "failures.csv").exists()

    def test_cell_failures_are_recorded_and_do_not_stop_the_sweep(
            self, micro_cfg, tmp_path, monkeypatch):
        import sonarmap.pipeline as pipeline

        real = pipeline.run_scenario

        def flaky(cfg, modes=None, out_dir=None, seed=None):
            if cfg.slam.keyframe_distance == 3.0:
                raise StageError("fusion_per_pair", RuntimeError("injected"))
            return real(cfg, modes=modes, out_dir=out_dir, seed=seed)

        monkeypatch.setattr(pipeline, "run_scenario", flaky)
        result = pipeline.sweep_keyframes(micro_cfg, tmp_path,
                                          distances=(1.5, 3.0),
                                          rotations_deg=(45.0,))
        assert [(r.mode, r.distance) for r in result.rows] == [
            ("fusion", 1.5), ("inference", 1.5), ("submapping", 1.5)]
        assert len(result.failures) == 1
        failure = result.failures[0]
        assert (failure.distance, failure.rotation_deg) == (3.0, 45.0)
        assert failure.stage == "fusion_per_pair"
        assert "injected" in failure.message
        with open(tmp_path / "failures.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1 and rows[0]["stage"] == "fusion_per_pair"

    def test_parallel_sweep_matches_serial(self, micro_cfg, tmp_path):
        serial = sweep_keyframes(micro_cfg, tmp_path / "s", distances=(1.5, 3.0),
                                 rotations_deg=(45.0,))
        parallel = sweep_keyframes(micro_cfg, tmp_path / "p", distances=(1.5, 3.0),
                                   rotations_deg=(45.0,), workers=2)
        assert parallel.rows == serial.rows
        assert (tmp_path / "s" / "coverage.csv").read_bytes() == \
               (tmp_path / "p" / "coverage.csv").read_bytes()


class TestSweepRowShape:
    def test_rows_are_plain_value_objects(self):
        row = SweepRow(mode="fusion", distance=1.0, rotation_deg=30.0,
                       keyframes=4, coverage=100, mae=0.1, rmse=0.2)
        assert dataclasses.is_dataclass(row)
        assert row == SweepRow("fusion", 1.0, 30.0, 4, 100, 0.1, 0.2)
