"""Keyframe-local cloud accumulation and global map assembly.

Dense mapping at the full sonar rate would bloat the pose graph; instead,
every frame's fused cloud between two keyframes is logged against the most
recent keyframe, together with the dead-reckoning transform from that
keyframe to the capture instant.  Entries store body-frame points plus the
relative transform — never pre-transformed points — so the global map can be
re-assembled exactly whenever loop closures move the keyframe estimates.
Assembly modes share one traversal: ``fusion`` places each keyframe's own
fused cloud, ``inference`` its height-augmented cloud, and ``submapping``
every logged entry between keyframes.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .geometry import PointCloud, Pose3, interpolate_pose, merge_clouds, transform_cloud
from .slam import Keyframe, lift_to_6dof

__all__ = [
    "Submap",
    "accumulate",
    "assemble_map",
    "close_submap",
    "write_ply",
    "write_xyz_csv",
]

ASSEMBLY_MODES = ("fusion", "inference", "submapping")


@dataclass
class Submap:
    """Clouds captured at and after one keyframe, in that keyframe's frame.

    ``entries`` holds ``(relative_transform, cloud)`` pairs: the transform is
    the dead-reckoning pose of the capture instant expressed in the anchor
    keyframe's dead-reckoning frame, and the cloud stays in the body frame at
    capture.  Entry timestamps are strictly increasing; by convention the
    anchor keyframe's own fused cloud is entry 0 with the identity transform
    (accumulated at the anchor instant).
    """

    anchor_id: int
    anchor_time: float
    anchor_dr: Pose3
    entries: list[tuple[Pose3, PointCloud]] = field(default_factory=list)
    timestamps: list[float] = field(default_factory=list)
    rejected: int = 0
    frozen: bool = False

    def __post_init__(self):
        if self.anchor_id < 0:
            raise ValueError("anchor keyframe id must be non-negative")
        if not math.isfinite(self.anchor_time):
            raise ValueError("anchor time must be finite")

    @property
    def n_entries(self) -> int:
        return len(self.entries)


def _dr_pose_at(dr_stream, t: float) -> Pose3 | None:
    """Pose at time t from a time-sorted (time, Pose3) stream; None off-span.

    Samples are trusted verbatim; between samples the pose is interpolated
    linearly in translation and geodesically in rotation.
    """
    times = [float(s[0]) for s in dr_stream]
    if not times:
        raise ValueError("dead-reckoning stream is empty")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("dead-reckoning timestamps must be strictly increasing")
    if t < times[0] or t > times[-1]:
        return None
    idx = bisect_left(times, t)
    if idx < len(times) and times[idx] == t:
        return dr_stream[idx][1]
    lo, hi = idx - 1, idx
    frac = (t - times[lo]) / (times[hi] - times[lo])
    return interpolate_pose(dr_stream[lo][1], dr_stream[hi][1], frac)


def accumulate(sm: Submap, cloud: PointCloud, capture_time: float, dr_stream) -> bool:
    """Log one frame's cloud against the submap's anchor keyframe.

    The entry's transform is (anchor DR pose)^-1 ∘ (DR pose at capture_time),
    with the capture pose interpolated between the bracketing dead-reckoning
    samples.  Returns True when appended; a capture time outside the stream's
    span is rejected and counted in ``sm.rejected`` instead of raising.
    """
    if sm.frozen:
        raise ValueError(f"submap anchored at keyframe {sm.anchor_id} is frozen")
    if cloud.frame != "body":
        raise ValueError("accumulated clouds must be in the body frame at capture")
    if not math.isfinite(capture_time):
        raise ValueError("capture time must be finite")
    if capture_time < sm.anchor_time:
        raise ValueError(
            f"capture at t={capture_time} precedes the anchor at t={sm.anchor_time}"
        )
    if sm.timestamps and capture_time <= sm.timestamps[-1]:
        raise ValueError("entry timestamps must be strictly increasing")
    pose = _dr_pose_at(dr_stream, capture_time)
    if pose is None:
        sm.rejected += 1
        return False
    sm.entries.append((sm.anchor_dr.between(pose), cloud))
    sm.timestamps.append(float(capture_time))
    return True


def close_submap(sm: Submap) -> Submap:
    """Freeze a submap once the next keyframe exists; further accumulation
    errors.  The recorded entry count is ``sm.n_entries``."""
    sm.frozen = True
    return sm


def _world_pose(kf: Keyframe) -> Pose3:
    if kf.estimate is None:
        raise ValueError(f"keyframe {kf.id} has no pose estimate")
    return lift_to_6dof(kf)


def assemble_map(keyframes, submaps, mode: str) -> PointCloud:
    """Build the global map from keyframe estimates and frozen submaps.

    A pure function of its inputs: identical estimates and submaps yield a
    bit-identical cloud, and clouds are concatenated in deterministic
    (keyframe id, entry index) order.  Re-invoking after pose-graph
    optimization therefore reflects the updated poses with no data loss.
    """
    if mode not in ASSEMBLY_MODES:
        raise ValueError(f"unknown assembly mode {mode!r}; expected one of {ASSEMBLY_MODES}")
    clouds: list[PointCloud] = []
    if mode in ("fusion", "inference"):
        for kid in sorted(keyframes):
            kf = keyframes[kid]
            cloud = kf.fused_cloud
            if mode == "inference" and kf.augmented_cloud is not None:
                cloud = kf.augmented_cloud
            clouds.append(transform_cloud(_world_pose(kf), cloud, frame="world"))
    else:
        for anchor in sorted(submaps):
            sm = submaps[anchor]
            if sm.anchor_id != anchor:
                raise ValueError(
                    f"submap keyed {anchor} is anchored at keyframe {sm.anchor_id}"
                )
            kf = keyframes.get(anchor)
            if kf is None:
                raise ValueError(f"submap anchor keyframe {anchor} has no estimate")
            base = _world_pose(kf)
            for rel, cloud in sm.entries:
                clouds.append(transform_cloud(base.compose(rel), cloud, frame="world"))
    return merge_clouds(clouds, frame="world")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_ply(cloud: PointCloud, path) -> None:
    """ASCII PLY with one float intensity per vertex (0.0 when absent)."""
    inten = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property float intensity",
        "end_header",
    ]
    for p, w in zip(cloud.points, inten):
        lines.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} {_fmt(w)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_xyz_csv(cloud: PointCloud, path) -> None:
    """CSV with header x,y,z,intensity (intensity 0.0 when absent)."""
    inten = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "intensity"])
        for p, w in zip(cloud.points, inten):
            writer.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(w)])
