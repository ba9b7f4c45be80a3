"""sonarmap: dense 3D mapping with orthogonal imaging sonars.

A library plus a small CLI for building dense 3D maps from a pair of
orthogonally mounted imaging sonars: pixel-level fusion across the image
pair, per-class Bayesian height inference for pixels outside the fused
overlap, and dead-reckoning submaps between keyframes — all on top of a
keyframe pose-graph SLAM back-end, driven by a built-in deterministic
sonar simulator with ground truth.
"""

__version__ = "0.1.0"

from .geometry import (
    PointCloud,
    PolarPoint,
    Pose2,
    Pose3,
    cartesian_to_polar,
    interpolate_pose,
    merge_clouds,
    polar_to_cartesian,
    transform_cloud,
    voxel_downsample,
    wrap_angle,
)
from .simworld import (
    Box,
    Cylinder,
    DriftParams,
    NoiseParams,
    Scene,
    SonarConfig,
    SonarImage,
    default_horizontal_config,
    default_vertical_config,
    distance_to_scene,
    load_scene,
    read_pgm,
    render_sonar_pair,
    save_scene,
    simulate_trajectory,
    write_pgm,
)
from .detect import (
    CfarParams,
    DetectionMask,
    HeuristicClassifier,
    ObjectInstance,
    OracleClassifier,
    classify,
    cluster_instances,
    dbscan,
    mask_to_planar_cloud,
    soca_cfar,
)
from .fusion import (
    FusedPoint,
    FusionParams,
    fuse_pair,
    fused_points_to_cloud,
    normalize_image,
    solve_assignment,
)
from .slam import (
    Factor,
    IcpParams,
    IcpResult,
    Keyframe,
    PoseGraph,
    export_trajectory,
    icp_2d,
    information_matrix,
    lift_to_6dof,
    optimize,
    pcm_filter,
    propose_nssm,
    should_create_keyframe,
)
from .inference import (
    ClassGeometryModel,
    InferenceParams,
    bayes_update,
    dump_model,
    infer_frame,
    init_reference,
    map_predict,
    register_to_reference,
)
from .submap import (
    ASSEMBLY_MODES,
    Submap,
    accumulate,
    assemble_map,
    close_submap,
    write_ply,
    write_xyz_csv,
)
from .pipeline import (
    ScenarioConfig,
    ScenarioResult,
    SlamParams,
    StageError,
    SweepResult,
    TrajectorySpec,
    load_scenario,
    map_error,
    run_scenario,
    sweep_keyframes,
    voxel_coverage,
)

__all__ = [
    # geometry
    "PointCloud", "PolarPoint", "Pose2", "Pose3", "cartesian_to_polar",
    "interpolate_pose", "merge_clouds", "polar_to_cartesian",
    "transform_cloud", "voxel_downsample", "wrap_angle",
    # simulated world and sensors
    "Box", "Cylinder", "DriftParams", "NoiseParams", "Scene", "SonarConfig",
    "SonarImage", "default_horizontal_config", "default_vertical_config",
    "distance_to_scene", "load_scene", "read_pgm", "render_sonar_pair",
    "save_scene", "simulate_trajectory", "write_pgm",
    # detection and classification
    "CfarParams", "DetectionMask", "HeuristicClassifier", "ObjectInstance",
    "OracleClassifier", "classify", "cluster_instances", "dbscan",
    "mask_to_planar_cloud", "soca_cfar",
    # orthogonal-pair fusion
    "FusedPoint", "FusionParams", "fuse_pair", "fused_points_to_cloud",
    "normalize_image", "solve_assignment",
    # pose-graph SLAM
    "Factor", "IcpParams", "IcpResult", "Keyframe", "PoseGraph",
    "export_trajectory", "icp_2d", "information_matrix", "lift_to_6dof",
    "optimize", "pcm_filter", "propose_nssm", "should_create_keyframe",
    # object-specific height inference
    "ClassGeometryModel", "InferenceParams", "bayes_update", "dump_model",
    "infer_frame", "init_reference", "map_predict", "register_to_reference",
    # submapping and map assembly
    "ASSEMBLY_MODES", "Submap", "accumulate", "assemble_map", "close_submap",
    "write_ply", "write_xyz_csv",
    # scenario pipeline
    "ScenarioConfig", "ScenarioResult", "SlamParams", "StageError",
    "SweepResult", "TrajectorySpec", "load_scenario", "map_error",
    "run_scenario", "sweep_keyframes", "voxel_coverage",
]
