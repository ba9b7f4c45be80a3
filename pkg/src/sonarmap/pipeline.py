"""Mission pipeline: run a scenario end to end and sweep keyframe thresholds.

A scenario couples a synthetic scene with a scripted survey: the vehicle is
flown along the trajectory, every frame renders an orthogonal sonar pair,
detections are fused into 3D points, and a keyframe pose graph is built with
sequential scan matching and loop closures.  Non-keyframe clouds accumulate
into per-keyframe submaps, and object-level height beliefs are trained at
keyframes.  One pass supports all three map assemblies (fusion-only,
inference-augmented, submapping); maps are scored by voxel coverage and by
distance-to-surface error against the ground-truth scene.

``sweep_keyframes`` repeats the run over a grid of keyframing thresholds and
tabulates coverage and accuracy per cell, recording per-cell failures instead
of aborting the grid.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .detect import (
    CfarParams,
    HeuristicClassifier,
    OracleClassifier,
    classify,
    cluster_instances,
    mask_to_planar_cloud,
    soca_cfar,
)
from .fusion import FusionParams, fuse_pair, fused_points_to_cloud
from .geometry import PointCloud, Pose2, Pose3
from .inference import InferenceParams, infer_frame
from .simworld import (
    DriftParams,
    NoiseParams,
    Scene,
    SonarConfig,
    default_horizontal_config,
    default_vertical_config,
    distance_to_scene,
    load_scene,
    render_sonar_pair,
    simulate_trajectory,
)
from .slam import (
    Factor,
    IcpParams,
    Keyframe,
    PoseGraph,
    export_trajectory,
    icp_2d,
    information_matrix,
    optimize,
    pcm_filter,
    propose_nssm,
    should_create_keyframe,
)
from .submap import (
    ASSEMBLY_MODES,
    Submap,
    accumulate,
    assemble_map,
    close_submap,
    write_ply,
)

SWEEP_DISTANCES = (1.0, 2.0, 3.0, 4.0, 5.0)
SWEEP_ROTATIONS_DEG = (30.0, 60.0, 90.0)

CLASSIFIERS = ("oracle", "heuristic")


def _fmt(value) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# map metrics
# ---------------------------------------------------------------------------


def voxel_coverage(cloud: PointCloud, voxel: float = 0.1) -> int:
    """Number of distinct voxel cells occupied by the cloud's points."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if len(cloud) == 0:
        return 0
    cells = np.floor(cloud.points / voxel).astype(np.int64)
    return int(len(np.unique(cells, axis=0)))


def map_error(cloud: PointCloud, scene: Scene) -> tuple[float, float]:
    """(MAE, RMSE) of unsigned point-to-surface distances against the scene."""
    if len(cloud) == 0:
        raise ValueError("map error needs a nonempty cloud")
    d = np.abs(distance_to_scene(scene, cloud.points))
    return float(np.mean(d)), float(math.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySpec:
    """Scripted survey: waypoint polyline plus cruise/turn parameters."""

    waypoints: tuple
    speed: float = 1.0
    depth: float = 0.0
    rate: float = 5.0
    turn_rate: float = math.radians(30.0)

    def __post_init__(self):
        wps = tuple((float(x), float(y)) for x, y in self.waypoints)
        if len(wps) < 2:
            raise ValueError("trajectory needs at least two waypoints")
        object.__setattr__(self, "waypoints", wps)
        if self.speed <= 0 or self.rate <= 0 or self.turn_rate <= 0:
            raise ValueError("speed, rate, and turn_rate must be positive")


@dataclass(frozen=True)
class SlamParams:
    """Keyframing thresholds, factor noise models, and loop-closure gates."""

    keyframe_distance: float = 1.0
    keyframe_rotation: float = math.radians(30.0)
    prior_sigma_xy: float = 1e-3
    prior_sigma_yaw: float = math.radians(0.1)
    odometry_sigma_xy: float = 0.03
    odometry_sigma_yaw: float = math.radians(0.5)
    ssm_sigma_xy: float = 0.10
    ssm_sigma_yaw: float = math.radians(1.5)
    ssm_icp: IcpParams = IcpParams(fitness_min=0.6)
    ssm_min_points: int = 30
    nssm_exclusion: int = 10
    nssm_search_radius: float = 10.0
    nssm_sigma_xy: float = 0.10
    nssm_sigma_yaw: float = math.radians(1.5)
    nssm_icp: IcpParams = IcpParams(max_correspondence=1.0, fitness_min=0.75)
    pcm_threshold: float = 11.34

    def __post_init__(self):
        if self.keyframe_distance <= 0 or self.keyframe_rotation <= 0:
            raise ValueError("keyframe thresholds must be positive")
        sigmas = (self.prior_sigma_xy, self.prior_sigma_yaw,
                  self.odometry_sigma_xy, self.odometry_sigma_yaw,
                  self.ssm_sigma_xy, self.ssm_sigma_yaw,
                  self.nssm_sigma_xy, self.nssm_sigma_yaw)
        if any(s <= 0 for s in sigmas):
            raise ValueError("factor sigmas must be positive")
        if self.ssm_min_points < 3:
            raise ValueError("ssm_min_points must be at least 3")
        if self.nssm_exclusion < 1 or self.nssm_search_radius <= 0:
            raise ValueError("invalid loop-closure search settings")
        if self.pcm_threshold <= 0:
            raise ValueError("pcm_threshold must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one mission needs: world, survey, sensors, and tuning."""

    name: str
    scene: Scene
    trajectory: TrajectorySpec
    seed: int = 0
    drift: DriftParams = DriftParams()
    h_sonar: SonarConfig = default_horizontal_config()
    v_sonar: SonarConfig = default_vertical_config()
    noise: NoiseParams = NoiseParams()
    cfar: CfarParams = CfarParams()
    fusion: FusionParams = FusionParams()
    slam: SlamParams = SlamParams()
    inference: InferenceParams = InferenceParams()
    classifier: str = "oracle"
    coverage_voxel: float = 0.1
    modes: tuple = ASSEMBLY_MODES

    def __post_init__(self):
        if not self.scene.primitives:
            raise ValueError("scenario scene must contain at least one primitive")
        if self.h_sonar.mount != "horizontal" or self.v_sonar.mount != "vertical":
            raise ValueError("scenario needs one horizontal and one vertical sonar")
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}, "
                             f"got {self.classifier!r}")
        if self.coverage_voxel <= 0:
            raise ValueError("coverage_voxel must be positive")
        object.__setattr__(self, "modes", _validate_modes(self.modes))


def _validate_modes(modes) -> tuple:
    modes = tuple(modes)
    if not modes:
        raise ValueError("at least one assembly mode is required")
    for m in modes:
        if m not in ASSEMBLY_MODES:
            raise ValueError(f"unknown assembly mode {m!r}; choose from {ASSEMBLY_MODES}")
    return modes


def _check_keys(block: dict, allowed, where: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ValueError(f"unknown key(s) {unknown} in {where!r} "
                         f"(allowed: {sorted(allowed)})")


def _block(raw: dict, key: str) -> dict:
    value = raw.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ValueError(f"{key!r} must be a mapping")
    return value


_ROOT_KEYS = ("name", "scene", "trajectory", "seed", "drift", "sonar", "noise",
              "cfar", "fusion", "slam", "inference", "metrics", "modes")
_TRAJ_KEYS = ("waypoints", "speed_mps", "depth_m", "rate_hz", "turn_rate_deg_s")
_DRIFT_KEYS = ("vel_bias_mps", "yaw_rate_bias_deg_s", "vel_noise_sd_mps",
               "yaw_rate_noise_sd_deg_s")
_SONAR_KEYS = ("max_range_m", "range_resolution_m", "fan_deg", "aperture_deg",
               "beam_count", "elevation_samples")
_NOISE_KEYS = ("speckle", "background_mean")
_CFAR_KEYS = ("train_cells", "guard_cells", "p_fa", "min_intensity")
_FUSION_KEYS = ("patch_size", "confidence_min", "range_bin_tolerance")
_ICP_KEYS = ("max_correspondence_m", "max_iterations", "tolerance", "fitness_min")
_SLAM_KEYS = ("keyframe_distance_m", "keyframe_rotation_deg",
              "prior_sigma_xy_m", "prior_sigma_yaw_deg",
              "odometry_sigma_xy_m", "odometry_sigma_yaw_deg",
              "ssm_sigma_xy_m", "ssm_sigma_yaw_deg", "ssm_icp",
              "ssm_min_points", "nssm_exclusion", "nssm_search_radius_m",
              "nssm_sigma_xy_m", "nssm_sigma_yaw_deg", "nssm_icp",
              "pcm_threshold")
_INFERENCE_KEYS = ("bearing_limit_deg", "class_whitelist", "classifier",
                   "confidence_thresh", "r_bin_m", "theta_bin_deg",
                   "z_min_m", "z_max_m", "z_bin_m", "sigma_m",
                   "reference_voxel_m", "icp")
_METRICS_KEYS = ("coverage_voxel_m",)


def _icp_params(block: dict, where: str, default: IcpParams) -> IcpParams:
    _check_keys(block, _ICP_KEYS, where)
    return IcpParams(
        max_correspondence=float(block.get("max_correspondence_m",
                                           default.max_correspondence)),
        max_iterations=int(block.get("max_iterations", default.max_iterations)),
        tolerance=float(block.get("tolerance", default.tolerance)),
        fitness_min=float(block.get("fitness_min", default.fitness_min)),
    )


def _sonar_params(block: dict, where: str, default: SonarConfig,
                  rate: float) -> SonarConfig:
    _check_keys(block, _SONAR_KEYS, where)
    fan = (math.radians(float(block["fan_deg"])) if "fan_deg" in block
           else default.horizontal_fov)
    aperture = (math.radians(float(block["aperture_deg"])) if "aperture_deg" in block
                else default.vertical_aperture)
    return SonarConfig(
        max_range=float(block.get("max_range_m", default.max_range)),
        range_resolution=float(block.get("range_resolution_m",
                                         default.range_resolution)),
        horizontal_fov=fan,
        vertical_aperture=aperture,
        beam_count=int(block.get("beam_count", default.beam_count)),
        elevation_samples=int(block.get("elevation_samples",
                                        default.elevation_samples)),
        mount=default.mount,
        rate=rate,
    )


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario YAML file; the scene path resolves next to the file."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"scenario file {path} must hold a mapping")
    _check_keys(raw, _ROOT_KEYS, "scenario")
    if "scene" not in raw:
        raise ValueError("scenario needs a 'scene' entry naming a scene file")
    scene = load_scene(path.parent / str(raw["scene"]))

    traj = _block(raw, "trajectory")
    _check_keys(traj, _TRAJ_KEYS, "trajectory")
    if "waypoints" not in traj:
        raise ValueError("trajectory needs a 'waypoints' list")
    trajectory = TrajectorySpec(
        waypoints=tuple((float(x), float(y)) for x, y in traj["waypoints"]),
        speed=float(traj.get("speed_mps", 1.0)),
        depth=float(traj.get("depth_m", 0.0)),
        rate=float(traj.get("rate_hz", 5.0)),
        turn_rate=math.radians(float(traj.get("turn_rate_deg_s", 30.0))),
    )

    drift_raw = _block(raw, "drift")
    _check_keys(drift_raw, _DRIFT_KEYS, "drift")
    vb = drift_raw.get("vel_bias_mps", (0.0, 0.0))
    drift = DriftParams(
        vel_bias=(float(vb[0]), float(vb[1])),
        yaw_rate_bias=math.radians(float(drift_raw.get("yaw_rate_bias_deg_s", 0.0))),
        vel_noise_sd=float(drift_raw.get("vel_noise_sd_mps", 0.0)),
        yaw_rate_noise_sd=math.radians(
            float(drift_raw.get("yaw_rate_noise_sd_deg_s", 0.0))),
    )

    sonar = _block(raw, "sonar")
    _check_keys(sonar, ("horizontal", "vertical"), "sonar")
    h_sonar = _sonar_params(_block(sonar, "horizontal"), "sonar.horizontal",
                            default_horizontal_config(), trajectory.rate)
    v_sonar = _sonar_params(_block(sonar, "vertical"), "sonar.vertical",
                            default_vertical_config(), trajectory.rate)

    noise_raw = _block(raw, "noise")
    _check_keys(noise_raw, _NOISE_KEYS, "noise")
    noise = NoiseParams(
        speckle=bool(noise_raw.get("speckle", True)),
        background_mean=float(noise_raw.get("background_mean", 0.02)),
    )

    cfar_raw = _block(raw, "cfar")
    _check_keys(cfar_raw, _CFAR_KEYS, "cfar")
    cfar = CfarParams(
        train_cells=int(cfar_raw.get("train_cells", 16)),
        guard_cells=int(cfar_raw.get("guard_cells", 2)),
        p_fa=float(cfar_raw.get("p_fa", 1e-4)),
        min_intensity=float(cfar_raw.get("min_intensity", 0.0)),
    )

    fusion_raw = _block(raw, "fusion")
    _check_keys(fusion_raw, _FUSION_KEYS, "fusion")
    fusion = FusionParams(
        patch_size=int(fusion_raw.get("patch_size", 5)),
        confidence_min=float(fusion_raw.get("confidence_min", 0.01)),
        range_bin_tolerance=int(fusion_raw.get("range_bin_tolerance", 0)),
    )

    slam_raw = _block(raw, "slam")
    _check_keys(slam_raw, _SLAM_KEYS, "slam")
    d = SlamParams()
    slam = SlamParams(
        keyframe_distance=float(slam_raw.get("keyframe_distance_m",
                                             d.keyframe_distance)),
        keyframe_rotation=_deg(slam_raw, "keyframe_rotation_deg",
                               d.keyframe_rotation),
        prior_sigma_xy=float(slam_raw.get("prior_sigma_xy_m", d.prior_sigma_xy)),
        prior_sigma_yaw=_deg(slam_raw, "prior_sigma_yaw_deg", d.prior_sigma_yaw),
        odometry_sigma_xy=float(slam_raw.get("odometry_sigma_xy_m",
                                             d.odometry_sigma_xy)),
        odometry_sigma_yaw=_deg(slam_raw, "odometry_sigma_yaw_deg",
                                d.odometry_sigma_yaw),
        ssm_sigma_xy=float(slam_raw.get("ssm_sigma_xy_m", d.ssm_sigma_xy)),
        ssm_sigma_yaw=_deg(slam_raw, "ssm_sigma_yaw_deg", d.ssm_sigma_yaw),
        ssm_icp=_icp_params(_block(slam_raw, "ssm_icp"), "slam.ssm_icp", d.ssm_icp),
        ssm_min_points=int(slam_raw.get("ssm_min_points", d.ssm_min_points)),
        nssm_exclusion=int(slam_raw.get("nssm_exclusion", d.nssm_exclusion)),
        nssm_search_radius=float(slam_raw.get("nssm_search_radius_m",
                                              d.nssm_search_radius)),
        nssm_sigma_xy=float(slam_raw.get("nssm_sigma_xy_m", d.nssm_sigma_xy)),
        nssm_sigma_yaw=_deg(slam_raw, "nssm_sigma_yaw_deg", d.nssm_sigma_yaw),
        nssm_icp=_icp_params(_block(slam_raw, "nssm_icp"), "slam.nssm_icp",
                             d.nssm_icp),
        pcm_threshold=float(slam_raw.get("pcm_threshold", d.pcm_threshold)),
    )

    inf_raw = _block(raw, "inference")
    _check_keys(inf_raw, _INFERENCE_KEYS, "inference")
    classifier = str(inf_raw.get("classifier", "oracle"))
    di = InferenceParams()
    thresh = inf_raw.get("confidence_thresh", di.confidence_thresh)
    inference = InferenceParams(
        bearing_limit=_deg(inf_raw, "bearing_limit_deg", di.bearing_limit),
        class_whitelist=tuple(inf_raw.get("class_whitelist", di.class_whitelist)),
        confidence_thresh=None if thresh is None else float(thresh),
        r_bin=_opt_float(inf_raw, "r_bin_m", di.r_bin),
        theta_bin=(math.radians(float(inf_raw["theta_bin_deg"]))
                   if inf_raw.get("theta_bin_deg") is not None else di.theta_bin),
        z_min=float(inf_raw.get("z_min_m", di.z_min)),
        z_max=float(inf_raw.get("z_max_m", di.z_max)),
        z_bin=float(inf_raw.get("z_bin_m", di.z_bin)),
        sigma=float(inf_raw.get("sigma_m", di.sigma)),
        reference_voxel=_opt_float(inf_raw, "reference_voxel_m",
                                   di.reference_voxel),
        icp=_icp_params(_block(inf_raw, "icp"), "inference.icp", di.icp),
    )

    metrics_raw = _block(raw, "metrics")
    _check_keys(metrics_raw, _METRICS_KEYS, "metrics")

    return ScenarioConfig(
        name=str(raw.get("name", path.stem)),
        scene=scene,
        trajectory=trajectory,
        seed=int(raw.get("seed", 0)),
        drift=drift,
        h_sonar=h_sonar,
        v_sonar=v_sonar,
        noise=noise,
        cfar=cfar,
        fusion=fusion,
        slam=slam,
        inference=inference,
        classifier=classifier,
        coverage_voxel=float(metrics_raw.get("coverage_voxel_m", 0.1)),
        modes=tuple(raw.get("modes", ASSEMBLY_MODES)),
    )


def _deg(block: dict, key: str, default_rad: float) -> float:
    return (math.radians(float(block[key])) if key in block else default_rad)


def _opt_float(block: dict, key: str, default):
    value = block.get(key, default)
    return None if value is None else float(value)


# ---------------------------------------------------------------------------
# stage bookkeeping
# ---------------------------------------------------------------------------


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


@dataclass
class StageTiming:
    """Accumulated wall-clock time over the events of one pipeline stage."""

    total_s: float = 0.0
    count: int = 0

    def add(self, seconds: float) -> None:
        self.total_s += seconds
        self.count += 1

    @property
    def mean_s(self) -> float:
        return self.total_s / self.count if self.count else 0.0


@contextmanager
def _stage(name: str, timings: dict | None = None):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        if timings is not None:
            timings.setdefault(name, StageTiming()).add(time.perf_counter() - start)


# ---------------------------------------------------------------------------
# single-scenario run
# ---------------------------------------------------------------------------


@dataclass
class ScenarioResult:
    """Everything one mission produced: graph, submaps, maps, and metrics."""

    config: ScenarioConfig
    modes: tuple
    seed: int
    n_frames: int
    graph: PoseGraph
    submaps: dict
    models: dict
    maps: dict
    coverage: dict
    errors: dict
    runtimes: dict
    kf_truth: dict


def run_scenario(cfg: ScenarioConfig, modes=None, out_dir=None,
                 seed=None) -> ScenarioResult:
    """Fly the scenario once and assemble/score maps for the requested modes.

    ``modes``/``seed`` override the configured ones; with ``out_dir`` the
    coverage/error/runtime tables, the keyframe trajectory, and one PLY per
    mode are written there.  Failures surface as :class:`StageError`.
    """
    modes = _validate_modes(cfg.modes if modes is None else modes)
    seed = cfg.seed if seed is None else int(seed)
    run_inference = "inference" in modes
    timings: dict[str, StageTiming] = {}

    with _stage("trajectory"):
        samples = simulate_trajectory(
            [Pose2(x, y, 0.0) for x, y in cfg.trajectory.waypoints],
            cfg.trajectory.depth,
            cfg.trajectory.speed, cfg.drift, seed,
            rate=cfg.trajectory.rate, turn_rate=cfg.trajectory.turn_rate)
        dr_stream = [(s.time, s.dr_pose) for s in samples]

    graph = PoseGraph()
    submaps: dict[int, Submap] = {}
    models: dict = {}
    kf_truth: dict[int, Pose3] = {}
    nssm_queue: list[Factor] = []
    current: Submap | None = None
    last_kf: Keyframe | None = None
    heuristic = HeuristicClassifier()

    for idx, s in enumerate(samples):
        frame_seed = seed * 1_000_003 + idx
        with _stage("render", timings):
            h_img, v_img = render_sonar_pair(cfg.scene, s.true_pose, cfg.h_sonar,
                                             cfg.v_sonar, cfg.noise, frame_seed,
                                             timestamp=s.time)
        with _stage("fusion_per_pair", timings):
            h_mask = soca_cfar(h_img, cfg.cfar)
            v_mask = soca_cfar(v_img, cfg.cfar)
            fused = fuse_pair(h_img, v_img, h_mask, v_mask, cfg.fusion)
            fused_cloud = fused_points_to_cloud(fused)

        dr2 = s.dr_pose.to_pose2()
        is_keyframe = last_kf is None or should_create_keyframe(
            dr2, last_kf.dr_pose, cfg.slam.keyframe_distance,
            cfg.slam.keyframe_rotation)

        if is_keyframe:
            with _stage("slam_per_keyframe", timings):
                kf = _add_keyframe(graph, cfg, s, dr2, h_img, h_mask,
                                   fused_cloud, last_kf)
                kf_truth[kf.id] = s.true_pose
                nssm_queue.extend(propose_nssm(
                    graph, kf, exclusion=cfg.slam.nssm_exclusion,
                    search_radius=cfg.slam.nssm_search_radius,
                    icp_params=cfg.slam.nssm_icp,
                    sigma_xy=cfg.slam.nssm_sigma_xy,
                    sigma_yaw=cfg.slam.nssm_sigma_yaw))
                optimize(graph)
            if run_inference:
                with _stage("inference_per_keyframe", timings):
                    clf = (OracleClassifier(cfg.scene, s.true_pose)
                           if cfg.classifier == "oracle" else heuristic)
                    instances = cluster_instances(h_mask, h_img)
                    for inst in instances:
                        inst.label, inst.confidence = classify(inst, h_img, clf)
                    kf.augmented_cloud = infer_frame(h_img, instances, fused,
                                                     models, cfg.inference)
            if current is not None:
                with _stage("submap_construction", timings):
                    submaps[current.anchor_id] = close_submap(current)
            current = Submap(anchor_id=kf.id, anchor_time=s.time,
                             anchor_dr=s.dr_pose)
            kf.submap = current
            last_kf = kf
        with _stage("submap_construction", timings):
            accumulate(current, fused_cloud, s.time, dr_stream)

    if current is not None:
        with _stage("submap_construction", timings):
            submaps[current.anchor_id] = close_submap(current)

    if nssm_queue:
        with _stage("loop_closure", timings):
            accepted = pcm_filter(nssm_queue, graph, cfg.slam.pcm_threshold)
            for f in accepted:
                graph.add_factor(f)
            if accepted:
                optimize(graph)

    with _stage("assembly", timings):
        maps = {mode: assemble_map(graph.keyframes, submaps, mode)
                for mode in modes}
    with _stage("metrics"):
        coverage = {m: voxel_coverage(c, cfg.coverage_voxel)
                    for m, c in maps.items()}
        errors = {m: map_error(c, cfg.scene) for m, c in maps.items()}

    result = ScenarioResult(
        config=cfg, modes=modes, seed=seed, n_frames=len(samples), graph=graph,
        submaps=submaps, models=models, maps=maps, coverage=coverage,
        errors=errors, runtimes=timings, kf_truth=kf_truth)

    if out_dir is not None:
        with _stage("export"):
            _export_run(result, Path(out_dir))
    return result


def _add_keyframe(graph: PoseGraph, cfg: ScenarioConfig, sample, dr2: Pose2,
                  h_img, h_mask, fused_cloud: PointCloud,
                  last_kf: Keyframe | None) -> Keyframe:
    planar = mask_to_planar_cloud(h_mask, h_img)
    if last_kf is None:
        estimate = dr2
    else:
        estimate = last_kf.estimate.compose(last_kf.dr_pose.between(dr2))
    kf = Keyframe(
        id=len(graph), dr_pose=dr2, estimate=estimate, planar_cloud=planar,
        fused_cloud=fused_cloud, depth=float(sample.dr_pose.translation[2]),
        time=sample.time)
    graph.add_keyframe(kf)
    if last_kf is None:
        graph.add_factor(Factor(
            "prior", kf.id, None, estimate,
            information_matrix(cfg.slam.prior_sigma_xy, cfg.slam.prior_sigma_yaw)))
        return kf
    rel_dr = last_kf.dr_pose.between(dr2)
    graph.add_factor(Factor(
        "odometry", last_kf.id, kf.id, rel_dr,
        information_matrix(cfg.slam.odometry_sigma_xy,
                           cfg.slam.odometry_sigma_yaw)))
    if (len(planar) >= cfg.slam.ssm_min_points
            and len(last_kf.planar_cloud) >= cfg.slam.ssm_min_points):
        icp = icp_2d(kf.planar_cloud, last_kf.planar_cloud, rel_dr,
                     cfg.slam.ssm_icp)
        if icp.status == "ok":
            graph.add_factor(Factor(
                "ssm", last_kf.id, kf.id, icp.transform,
                information_matrix(cfg.slam.ssm_sigma_xy,
                                   cfg.slam.ssm_sigma_yaw)))
    return kf


# ---------------------------------------------------------------------------
# result tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    """Coverage and accuracy of one assembly mode at one keyframing cell."""

    mode: str
    distance: float
    rotation_deg: float
    keyframes: int
    coverage: int
    mae: float
    rmse: float


@dataclass(frozen=True)
class SweepFailure:
    """One keyframing cell that aborted, tagged with its failing stage."""

    distance: float
    rotation_deg: float
    stage: str
    message: str


@dataclass
class SweepResult:
    rows: list
    failures: list


def result_rows(result: ScenarioResult, distance=None,
                rotation_deg=None) -> list[SweepRow]:
    """One row per assembled mode; the keyframing cell defaults to the config's."""
    cfg = result.config
    d = cfg.slam.keyframe_distance if distance is None else float(distance)
    r = (math.degrees(cfg.slam.keyframe_rotation) if rotation_deg is None
         else float(rotation_deg))
    return [SweepRow(mode=mode, distance=d, rotation_deg=r,
                     keyframes=len(result.graph),
                     coverage=result.coverage[mode],
                     mae=result.errors[mode][0], rmse=result.errors[mode][1])
            for mode in sorted(result.maps)]


def runtime_rows(result: ScenarioResult, distance=None,
                 rotation_deg=None) -> list[tuple]:
    cfg = result.config
    d = cfg.slam.keyframe_distance if distance is None else float(distance)
    r = (math.degrees(cfg.slam.keyframe_rotation) if rotation_deg is None
         else float(rotation_deg))
    return [(d, r, stage, t.count, t.total_s, t.mean_s)
            for stage, t in result.runtimes.items()]


def write_coverage_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "keyframe_distance_m", "keyframe_rotation_deg",
                    "keyframes", "coverage_voxels"])
        for r in rows:
            w.writerow([r.mode, _fmt(r.distance), _fmt(r.rotation_deg),
                        r.keyframes, r.coverage])


def write_error_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "keyframe_distance_m", "keyframe_rotation_deg",
                    "mae_m", "rmse_m"])
        for r in rows:
            w.writerow([r.mode, _fmt(r.distance), _fmt(r.rotation_deg),
                        _fmt(r.mae), _fmt(r.rmse)])


def write_runtime_csv(entries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["keyframe_distance_m", "keyframe_rotation_deg", "stage",
                    "count", "total_s", "mean_s"])
        for d, r, stage, count, total, mean in entries:
            w.writerow([_fmt(d), _fmt(r), stage, count, _fmt(total), _fmt(mean)])


def write_coverage_grids(rows, distances, rotations_deg, out_dir: Path) -> None:
    """Per-mode grid tables: one row per rotation, one column per distance."""
    by_cell = {(r.mode, r.distance, r.rotation_deg): r.coverage for r in rows}
    for mode in sorted({r.mode for r in rows}):
        with open(out_dir / f"coverage_grid_{mode}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rotation_deg"] + [_fmt(d) for d in distances])
            for rot in rotations_deg:
                row = [_fmt(rot)]
                for d in distances:
                    cov = by_cell.get((mode, float(d), float(rot)))
                    row.append("" if cov is None else cov)
                w.writerow(row)


def write_failures_csv(failures, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["keyframe_distance_m", "keyframe_rotation_deg", "stage",
                    "message"])
        for f in failures:
            w.writerow([_fmt(f.distance), _fmt(f.rotation_deg), f.stage,
                        f.message])


def _export_run(result: ScenarioResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = result_rows(result)
    write_coverage_csv(rows, out_dir / "coverage.csv")
    write_error_csv(rows, out_dir / "error.csv")
    write_runtime_csv(runtime_rows(result), out_dir / "runtime.csv")
    export_trajectory(result.graph, out_dir / "trajectory.csv")
    for mode, cloud in result.maps.items():
        write_ply(cloud, out_dir / f"map_{mode}.ply")


# ---------------------------------------------------------------------------
# keyframe-threshold sweep
# ---------------------------------------------------------------------------


def _cell_config(cfg: ScenarioConfig, distance: float,
                 rotation_deg: float) -> ScenarioConfig:
    slam = dataclasses.replace(cfg.slam, keyframe_distance=float(distance),
                               keyframe_rotation=math.radians(rotation_deg))
    return dataclasses.replace(cfg, slam=slam)


def _run_cell(args):
    cfg, distance, rotation_deg = args
    try:
        result = run_scenario(_cell_config(cfg, distance, rotation_deg))
    except StageError as exc:
        return ("fail", SweepFailure(distance=distance, rotation_deg=rotation_deg,
                                     stage=exc.stage, message=str(exc)))
    return ("ok", result_rows(result, distance, rotation_deg),
            runtime_rows(result, distance, rotation_deg))


def sweep_keyframes(cfg: ScenarioConfig, out_dir=None,
                    distances=SWEEP_DISTANCES,
                    rotations_deg=SWEEP_ROTATIONS_DEG,
                    workers: int = 1) -> SweepResult:
    """Run the scenario once per keyframing cell and tabulate the results.

    A failing cell is recorded (with its stage tag) and the sweep continues.
    With ``workers > 1`` the cells run in separate processes.
    """
    distances = tuple(float(d) for d in distances)
    rotations_deg = tuple(float(r) for r in rotations_deg)
    if not distances or not rotations_deg:
        raise ValueError("sweep needs at least one distance and one rotation")
    tasks = [(cfg, d, r) for d in distances for r in rotations_deg]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, tasks))
    else:
        outcomes = [_run_cell(task) for task in tasks]

    rows: list[SweepRow] = []
    failures: list[SweepFailure] = []
    runtime_entries: list[tuple] = []
    for outcome in outcomes:
        if outcome[0] == "fail":
            failures.append(outcome[1])
        else:
            rows.extend(outcome[1])
            runtime_entries.extend(outcome[2])
    rows.sort(key=lambda r: (r.mode, r.distance, r.rotation_deg))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_coverage_csv(rows, out_dir / "coverage.csv")
        write_error_csv(rows, out_dir / "error.csv")
        write_runtime_csv(runtime_entries, out_dir / "runtime.csv")
        write_coverage_grids(rows, distances, rotations_deg, out_dir)
        if failures:
            write_failures_csv(failures, out_dir / "failures.csv")
    return SweepResult(rows=rows, failures=failures)
