"""Geometry primitives: polar/Cartesian conversion, planar and spatial poses,
point clouds, rigid-transform algebra, and pose interpolation.

Conventions: x forward, y port, z up; angles in radians, wrapped to [-pi, pi);
bearing rotates about +z, elevation is the angle above the x-y plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


def wrap_angle(a):
    """Wrap an angle (scalar or array) into the half-open interval [-pi, pi)."""
    return (np.asarray(a) + math.pi) % (2.0 * math.pi) - math.pi if isinstance(
        a, np.ndarray
    ) else (a + math.pi) % (2.0 * math.pi) - math.pi


# ============================================================================
# points
# ============================================================================


@dataclass(frozen=True)
class PolarPoint:
    """A sonar measurement: range (m), bearing and elevation (rad), intensity."""

    range: float
    bearing: float
    elevation: float
    intensity: float = 0.0

    def __post_init__(self):
        if not (self.range >= 0.0 and math.isfinite(self.range)):
            raise ValueError(f"range must be finite and >= 0, got {self.range}")
        object.__setattr__(self, "bearing", float(wrap_angle(self.bearing)))
        object.__setattr__(self, "elevation", float(wrap_angle(self.elevation)))


def polar_to_cartesian(p: PolarPoint) -> np.ndarray:
    """(R, theta, phi) -> R * (cos phi cos theta, cos phi sin theta, sin phi)."""
    return spherical_to_cartesian(p.range, p.bearing, p.elevation)


def spherical_to_cartesian(ranges, bearings, elevations) -> np.ndarray:
    """Vectorized polar-to-Cartesian; returns shape (..., 3)."""
    r = np.asarray(ranges, dtype=float)
    th = np.asarray(bearings, dtype=float)
    ph = np.asarray(elevations, dtype=float)
    cp = np.cos(ph)
    return np.stack([r * cp * np.cos(th), r * cp * np.sin(th), r * np.sin(ph)], axis=-1)


def cartesian_to_polar(v) -> PolarPoint:
    """Inverse of polar_to_cartesian; elevation lands in [-pi/2, pi/2]."""
    x, y, z = np.asarray(v, dtype=float)
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        return PolarPoint(0.0, 0.0, 0.0)
    return PolarPoint(r, math.atan2(y, x), math.asin(max(-1.0, min(1.0, z / r))))


# ============================================================================
# planar pose
# ============================================================================


@dataclass(frozen=True)
class Pose2:
    """SE(2) pose: x, y (m) and yaw (rad, wrapped to [-pi, pi))."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.yaw)):
            raise ValueError("Pose2 fields must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))

    @staticmethod
    def identity() -> "Pose2":
        return Pose2(0.0, 0.0, 0.0)

    def compose(self, other: "Pose2") -> "Pose2":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.yaw)

    def between(self, other: "Pose2") -> "Pose2":
        """Relative pose of `other` expressed in this pose's frame."""
        return self.inverse().compose(other)

    def transform(self, points_xy: np.ndarray) -> np.ndarray:
        """Map (N, 2) body-frame points into this pose's parent frame."""
        pts = np.asarray(points_xy, dtype=float).reshape(-1, 2)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        R = np.array([[c, -s], [s, c]])
        return pts @ R.T + np.array([self.x, self.y])

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


# ============================================================================
# spatial pose
# ============================================================================


@dataclass(frozen=True)
class Pose3:
    """SE(3) pose: 3x3 rotation (orthonormal, det +1) plus translation (m)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if not math.isclose(float(np.linalg.det(R)), 1.0, abs_tol=1e-9):
            raise ValueError("rotation determinant is not +1 within 1e-9")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose3":
        return Pose3(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(M: np.ndarray) -> "Pose3":
        M = np.asarray(M, dtype=float)
        return Pose3(M[:3, :3], M[:3, 3])

    @staticmethod
    def from_planar(p: Pose2, depth: float = 0.0, roll: float = 0.0, pitch: float = 0.0) -> "Pose3":
        """Embed a planar pose with directly-observed depth, roll, and pitch.

        Rotation is Rz(yaw) @ Ry(pitch) @ Rx(roll); translation z is `depth`.
        """
        R = Rotation.from_euler("ZYX", [p.yaw, pitch, roll]).as_matrix()
        return Pose3(R, np.array([p.x, p.y, float(depth)]))

    def to_pose2(self) -> Pose2:
        """Project onto the plane: keep x, y and the heading about +z."""
        return Pose2(
            float(self.translation[0]),
            float(self.translation[1]),
            math.atan2(self.rotation[1, 0], self.rotation[0, 0]),
        )

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def compose(self, other: "Pose3") -> "Pose3":
        return Pose3(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose3":
        return Pose3(self.rotation.T, -(self.rotation.T @ self.translation))

    def between(self, other: "Pose3") -> "Pose3":
        return self.inverse().compose(other)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) or (3,) points by this transform."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def almost_equal(self, other: "Pose3", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )


def interpolate_pose(a: Pose3, b: Pose3, t: float) -> Pose3:
    """Interpolate rigid poses: linear in translation, geodesic in rotation.

    The relative rotation's axis-angle vector is scaled by t in [0, 1].
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation fraction must be in [0, 1], got {t}")
    rel = Rotation.from_matrix(a.rotation.T @ b.rotation).as_rotvec()
    R = a.rotation @ Rotation.from_rotvec(rel * t).as_matrix()
    trans = (1.0 - t) * a.translation + t * b.translation
    return Pose3(R, trans)


# ============================================================================
# point clouds
# ============================================================================


@dataclass
class PointCloud:
    """A set of 3D points in a named frame, with optional intensities/labels."""

    points: np.ndarray
    frame: str
    intensity: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        if not self.frame:
            raise ValueError("frame identifier must be nonempty")
        self.points = pts
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=float).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError("intensity length does not match point count")
            self.intensity = inten
        if self.labels is not None:
            lab = np.asarray(self.labels).reshape(-1)
            if lab.shape[0] != pts.shape[0]:
                raise ValueError("labels length does not match point count")
            self.labels = lab

    @staticmethod
    def empty(frame: str) -> "PointCloud":
        return PointCloud(np.zeros((0, 3)), frame=frame)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def select(self, idx) -> "PointCloud":
        return PointCloud(
            self.points[idx],
            frame=self.frame,
            intensity=None if self.intensity is None else self.intensity[idx],
            labels=None if self.labels is None else self.labels[idx],
        )


def transform_cloud(T: Pose3, c: PointCloud, frame: str | None = None) -> PointCloud:
    """Map every point of `c` by T; optionally rename the output frame."""
    return PointCloud(
        T.apply(c.points),
        frame=c.frame if frame is None else frame,
        intensity=c.intensity,
        labels=c.labels,
    )


def merge_clouds(clouds, frame: str | None = None) -> PointCloud:
    """Concatenate clouds after checking they share one frame."""
    clouds = list(clouds)
    if not clouds:
        if frame is None:
            raise ValueError("cannot merge zero clouds without an explicit frame")
        return PointCloud.empty(frame)
    frames = {c.frame for c in clouds}
    if len(frames) != 1:
        raise ValueError(f"clouds are in mismatched frames: {sorted(frames)}")
    if frame is not None and clouds[0].frame != frame:
        raise ValueError(f"clouds are in frame {clouds[0].frame!r}, expected {frame!r}")
    pts = np.vstack([c.points for c in clouds])
    inten = None
    if all(c.intensity is not None for c in clouds):
        inten = np.concatenate([c.intensity for c in clouds])
    labels = None
    if all(c.labels is not None for c in clouds):
        labels = np.concatenate([c.labels for c in clouds])
    return PointCloud(pts, frame=clouds[0].frame, intensity=inten, labels=labels)


def voxel_downsample(c: PointCloud, voxel: float) -> PointCloud:
    """Keep the first point (ascending index) in each floor(coord/voxel) cell."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if len(c) == 0:
        return c
    cells = np.floor(c.points / voxel).astype(np.int64)
    _, first = np.unique(cells, axis=0, return_index=True)
    return c.select(np.sort(first))
