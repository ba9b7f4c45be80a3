"""Deterministic synthetic world: primitive scenes, orthogonal sonar rendering
by ray casting, and ground-truth plus drifting dead-reckoning trajectories.

The two sonars share one body frame. A "horizontal" sonar fans its beams
across bearing and integrates an unmeasured vertical aperture; a "vertical"
sonar is the same device rotated 90 degrees, so its beam axis sweeps
elevation and it integrates across a bearing aperture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .geometry import Pose2, Pose3, PointCloud, spherical_to_cartesian, wrap_angle

_EPS = 1e-9


# ============================================================================
# sensor configuration
# ============================================================================


@dataclass(frozen=True)
class SonarConfig:
    """Imaging sonar geometry: a fan of beams integrating an orthogonal aperture."""

    max_range: float = 30.0
    range_resolution: float = 0.05
    horizontal_fov: float = math.radians(130.0)   # angular sweep of the beam fan
    vertical_aperture: float = math.radians(20.0)  # integrated orthogonal aperture
    beam_count: int = 193
    elevation_samples: int = 15  # rays cast across the aperture per beam
    mount: str = "horizontal"
    rate: float = 5.0

    def __post_init__(self):
        if self.max_range <= 0 or self.range_resolution <= 0:
            raise ValueError("max_range and range_resolution must be positive")
        for name in ("horizontal_fov", "vertical_aperture"):
            v = getattr(self, name)
            if not 0.0 < v <= math.pi:
                raise ValueError(f"{name} must be in (0, pi], got {v}")
        if self.beam_count < 2:
            raise ValueError("beam_count must be >= 2")
        if self.elevation_samples < 1:
            raise ValueError("elevation_samples must be >= 1")
        if self.mount not in ("horizontal", "vertical"):
            raise ValueError(f"mount must be 'horizontal' or 'vertical', got {self.mount!r}")
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    @property
    def range_bins(self) -> int:
        return math.ceil(self.max_range / self.range_resolution)

    @property
    def beam_angles(self) -> np.ndarray:
        """Beam-center angles across the fan, ascending."""
        half = self.horizontal_fov / 2.0
        return np.linspace(-half, half, self.beam_count)

    @property
    def aperture_angles(self) -> np.ndarray:
        """Ray angles across the integrated aperture, ascending."""
        half = self.vertical_aperture / 2.0
        return np.linspace(-half, half, self.elevation_samples)

    @property
    def bin_ranges(self) -> np.ndarray:
        """Representative range of each bin (bin k measures range k*resolution)."""
        return np.arange(self.range_bins) * self.range_resolution


def default_horizontal_config() -> SonarConfig:
    return SonarConfig(mount="horizontal")


def default_vertical_config() -> SonarConfig:
    return SonarConfig(
        horizontal_fov=math.radians(20.0),
        vertical_aperture=math.radians(20.0),
        beam_count=41,
        elevation_samples=21,
        mount="vertical",
    )


# ============================================================================
# scene primitives
# ============================================================================


@dataclass(frozen=True)
class Cylinder:
    """Finite capped cylinder; axis defaults to vertical."""

    center: tuple
    radius: float
    height: float
    class_tag: str
    instance_id: int
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("cylinder radius and height must be positive")
        a = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(a)
        if n < _EPS:
            raise ValueError("cylinder axis must be nonzero")
        object.__setattr__(self, "axis", tuple(float(v) for v in a / n))
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        v = pts - np.asarray(self.center)
        a = np.asarray(self.axis)
        z = v @ a
        rho = np.linalg.norm(v - z[:, None] * a, axis=1)
        dr = rho - self.radius
        dz = np.abs(z) - self.height / 2.0
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        inside = -np.maximum(dr, dz)
        return np.where((dr <= 0) & (dz <= 0), inside, outside)

    def ray_intersect(self, origin: np.ndarray, dirs: np.ndarray):
        """First-hit distances and outward normals; t=inf on miss."""
        n = dirs.shape[0]
        a = np.asarray(self.axis)
        oc = origin - np.asarray(self.center)
        d_par = dirs @ a
        oc_par = float(oc @ a)
        d_perp = dirs - d_par[:, None] * a
        oc_perp = oc - oc_par * a

        best_t = np.full(n, np.inf)
        best_n = np.zeros((n, 3))

        # lateral surface: quadratic in t on the perpendicular components
        A = np.einsum("ij,ij->i", d_perp, d_perp)
        B = 2.0 * (d_perp @ oc_perp)
        C = float(oc_perp @ oc_perp) - self.radius**2
        disc = B * B - 4.0 * A * C
        ok = (disc >= 0) & (A > _EPS)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            for sign in (-1.0, 1.0):
                t = (-B + sign * sq) / (2.0 * A)
                axial = oc_par + t * d_par
                hit = ok & (t > _EPS) & (np.abs(axial) <= self.height / 2.0) & (t < best_t)
                if np.any(hit):
                    p_perp = oc_perp + t[hit, None] * d_perp[hit]
                    best_n[hit] = p_perp / np.linalg.norm(p_perp, axis=1, keepdims=True)
                    best_t[hit] = t[hit]

        # end caps
        with np.errstate(divide="ignore", invalid="ignore"):
            for sign in (1.0, -1.0):
                t = (sign * self.height / 2.0 - oc_par) / d_par
                radial = oc_perp + t[:, None] * d_perp
                hit = (
                    (np.abs(d_par) > _EPS)
                    & (t > _EPS)
                    & (np.einsum("ij,ij->i", radial, radial) <= self.radius**2)
                    & (t < best_t)
                )
                if np.any(hit):
                    best_t[hit] = t[hit]
                    best_n[hit] = sign * a
        return best_t, best_n


@dataclass(frozen=True)
class Box:
    """Axis-aligned box rotated by yaw about +z; extents are full side lengths."""

    center: tuple
    extents: tuple
    class_tag: str
    instance_id: int
    yaw: float = 0.0

    def __post_init__(self):
        if any(e <= 0 for e in self.extents):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "extents", tuple(float(v) for v in self.extents))

    def _to_local(self):
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return R, np.asarray(self.center)

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        R, c = self._to_local()
        q = np.abs((pts - c) @ R)  # rotate world->local with R^T = (@ R)
        d = q - np.asarray(self.extents) / 2.0
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        inside = -d.max(axis=1)
        return np.where(np.all(d <= 0, axis=1), inside, outside)

    def ray_intersect(self, origin: np.ndarray, dirs: np.ndarray):
        R, c = self._to_local()
        o = (origin - c) @ R
        d = dirs @ R
        half = np.asarray(self.extents) / 2.0

        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (-half - o) * inv
            t2 = (half - o) * inv
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        # degenerate axes: parallel rays miss unless origin inside the slab
        parallel = np.abs(d) < _EPS
        inside_slab = np.abs(o) <= half
        near = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), far)

        tmin = near.max(axis=1)
        tmax = far.min(axis=1)
        hit = (tmax >= np.maximum(tmin, _EPS)) & (tmin > _EPS)
        t = np.where(hit, tmin, np.inf)

        # normal: the axis whose slab is entered last, pointing against the ray
        axis = near.argmax(axis=1)
        local_n = np.zeros((dirs.shape[0], 3))
        rows = np.arange(dirs.shape[0])
        local_n[rows, axis] = -np.sign(d[rows, axis])
        normals = local_n @ R.T
        return t, normals


@dataclass(frozen=True)
class Scene:
    """A set of primitives with class tags and unique instance ids."""

    primitives: tuple
    name: str = "scene"

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        ids = [p.instance_id for p in self.primitives]
        if len(ids) != len(set(ids)):
            raise ValueError("instance ids must be unique")

    def class_of(self, instance_id: int) -> str:
        for p in self.primitives:
            if p.instance_id == instance_id:
                return p.class_tag
        raise KeyError(instance_id)


def cast_rays(scene: Scene, origin: np.ndarray, dirs: np.ndarray):
    """Closest intersection per ray over all primitives.

    Returns (t, normals, primitive_index); t=inf and index=-1 where nothing is hit.
    """
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_n = np.zeros((n, 3))
    best_i = np.full(n, -1)
    for i, prim in enumerate(scene.primitives):
        t, nrm = prim.ray_intersect(origin, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_n[closer] = nrm[closer]
        best_i[closer] = i
    return best_t, best_n, best_i


# ============================================================================
# sonar image + rendering
# ============================================================================


@dataclass
class SonarImage:
    """Polar intensity grid: rows = range bins, columns = beams."""

    intensities: np.ndarray
    config: SonarConfig
    timestamp: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.intensities, dtype=float)
        expected = (self.config.range_bins, self.config.beam_count)
        if grid.shape != expected:
            raise ValueError(f"image shape {grid.shape} != config shape {expected}")
        if not np.all(np.isfinite(grid)) or grid.min() < 0:
            raise ValueError("intensities must be finite and >= 0")
        self.intensities = grid

    @property
    def beam_angles(self) -> np.ndarray:
        return self.config.beam_angles

    @property
    def bin_ranges(self) -> np.ndarray:
        return self.config.bin_ranges


@dataclass(frozen=True)
class NoiseParams:
    """Rendering noise: multiplicative exponential speckle on returns, plus an
    additive exponential background floor with the given mean."""

    speckle: bool = True
    background_mean: float = 0.02

    def __post_init__(self):
        if self.background_mean < 0:
            raise ValueError("background_mean must be >= 0")


def _render_image(scene, pose, cfg, noise, rng, timestamp) -> SonarImage:
    beams = cfg.beam_angles
    samples = cfg.aperture_angles
    if cfg.mount == "horizontal":
        th = np.repeat(beams, samples.size)
        ph = np.tile(samples, beams.size)
    else:  # beam axis sweeps elevation, aperture integrates bearing
        ph = np.repeat(beams, samples.size)
        th = np.tile(samples, beams.size)
    beam_idx = np.repeat(np.arange(cfg.beam_count), samples.size)

    dirs_body = spherical_to_cartesian(np.ones_like(th), th, ph)
    dirs = dirs_body @ pose.rotation.T
    img = np.zeros((cfg.range_bins, cfg.beam_count))

    if scene.primitives:
        t, normals, _ = cast_rays(scene, pose.translation, dirs)
        hit = np.isfinite(t) & (t <= cfg.max_range)
        if np.any(hit):
            w = np.abs(np.einsum("ij,ij->i", dirs[hit], normals[hit]))
            w = np.clip(w, 0.0, 1.0)
            bins = np.clip(
                np.rint(t[hit] / cfg.range_resolution).astype(int), 0, cfg.range_bins - 1
            )
            np.maximum.at(img, (bins, beam_idx[hit]), w)

    if noise.speckle:
        img *= rng.exponential(1.0, size=img.shape)
    if noise.background_mean > 0:
        img += rng.exponential(noise.background_mean, size=img.shape)
    return SonarImage(img, cfg, timestamp)


def render_sonar_pair(
    scene: Scene,
    pose: Pose3,
    h_cfg: SonarConfig,
    v_cfg: SonarConfig,
    noise: NoiseParams,
    seed: int,
    timestamp: float = 0.0,
    overlap_min: float = math.radians(20.0),
) -> tuple[SonarImage, SonarImage]:
    """Render the concurrent orthogonal image pair from one body pose.

    The pair must share a bearing-by-elevation overlap of at least
    `overlap_min` in each direction; configs that cannot overlap are rejected.
    """
    if h_cfg.mount != "horizontal" or v_cfg.mount != "vertical":
        raise ValueError("expected (horizontal, vertical) mounts in this order")
    bearing_overlap = min(h_cfg.horizontal_fov, v_cfg.vertical_aperture)
    elevation_overlap = min(h_cfg.vertical_aperture, v_cfg.horizontal_fov)
    if bearing_overlap < overlap_min - _EPS or elevation_overlap < overlap_min - _EPS:
        raise ValueError(
            f"sonar fields of view overlap only "
            f"{math.degrees(bearing_overlap):.1f} x {math.degrees(elevation_overlap):.1f} deg; "
            f"need {math.degrees(overlap_min):.1f} in both directions"
        )
    ss_h, ss_v = np.random.SeedSequence(seed).spawn(2)
    img_h = _render_image(scene, pose, h_cfg, noise, np.random.default_rng(ss_h), timestamp)
    img_v = _render_image(scene, pose, v_cfg, noise, np.random.default_rng(ss_v), timestamp)
    return img_h, img_v


# ============================================================================
# trajectories
# ============================================================================


@dataclass(frozen=True)
class DriftParams:
    """Dead-reckoning corruption: biases plus white noise on body velocity/yaw rate."""

    vel_bias: tuple = (0.0, 0.0)  # (forward, lateral) m/s
    yaw_rate_bias: float = 0.0
    vel_noise_sd: float = 0.0
    yaw_rate_noise_sd: float = 0.0


@dataclass(frozen=True)
class TrajectorySample:
    time: float
    true_pose: Pose3
    dr_pose: Pose3


def _plan_phases(waypoints, speed, turn_rate):
    """Piecewise plan: cruise segments at `speed`, turns in place at `turn_rate`."""
    pts = [np.array([w.x, w.y]) for w in waypoints]
    phases = []  # (duration, pose_fn(tau))
    heading = None
    for a, b in zip(pts, pts[1:]):
        seg = b - a
        length = float(np.linalg.norm(seg))
        if length < _EPS:
            continue
        seg_heading = math.atan2(seg[1], seg[0])
        if heading is not None:
            dtheta = float(wrap_angle(seg_heading - heading))
            if abs(dtheta) > 1e-9:
                dur = abs(dtheta) / turn_rate
                phases.append(
                    (dur, lambda tau, p=a, h0=heading, dth=dtheta, d=dur: Pose2(
                        p[0], p[1], h0 + dth * tau / d))
                )
        phases.append(
            (length / speed, lambda tau, p=a, s=seg, h=seg_heading, L=length, v=speed: Pose2(
                p[0] + s[0] * (v * tau / L), p[1] + s[1] * (v * tau / L), h))
        )
        heading = seg_heading
    if not phases:
        raise ValueError("waypoints describe no motion")
    return phases


def simulate_trajectory(
    waypoints,
    depth: float,
    speed: float,
    dr_noise: DriftParams,
    seed: int,
    rate: float = 5.0,
    turn_rate: float = math.radians(30.0),
):
    """Sample ground-truth and drifting dead-reckoning poses along a polyline.

    Waypoint yaw fields are ignored; heading follows each segment, with
    turn-in-place phases between segments. Samples arrive at `rate` Hz.
    With all-zero DriftParams the dead-reckoning poses equal ground truth.
    """
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    if speed <= 0:
        raise ValueError("speed must be positive")
    phases = _plan_phases(waypoints, speed, turn_rate)
    total = sum(d for d, _ in phases)
    dt = 1.0 / rate
    n_samples = int(math.floor(total / dt)) + 1

    true_p2 = []
    for k in range(n_samples):
        t = k * dt
        remaining = t
        for dur, fn in phases:
            if remaining <= dur + _EPS:
                true_p2.append(fn(min(remaining, dur)))
                break
            remaining -= dur
        else:
            dur, fn = phases[-1]
            true_p2.append(fn(dur))

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    bias = np.array([dr_noise.vel_bias[0], dr_noise.vel_bias[1], dr_noise.yaw_rate_bias])
    sds = np.array([dr_noise.vel_noise_sd, dr_noise.vel_noise_sd, dr_noise.yaw_rate_noise_sd])

    samples = []
    dr = true_p2[0]
    for k, p in enumerate(true_p2):
        if k > 0:
            delta = true_p2[k - 1].between(p)
            err = (bias + rng.normal(0.0, 1.0, size=3) * sds) * dt
            dr = dr.compose(Pose2(delta.x + err[0], delta.y + err[1], delta.yaw + err[2]))
        samples.append(
            TrajectorySample(
                time=k * dt,
                true_pose=Pose3.from_planar(p, depth=depth),
                dr_pose=Pose3.from_planar(dr, depth=depth),
            )
        )
    return samples


# ============================================================================
# ground-truth queries
# ============================================================================


def distance_to_scene(scene: Scene, p):
    """Exact minimum distance from point(s) to the union of primitive surfaces."""
    if not scene.primitives:
        raise ValueError("distance_to_scene requires a nonempty scene")
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    dists = np.min([prim.surface_distance(pts) for prim in scene.primitives], axis=0)
    return float(dists[0]) if single else dists


def oracle_label(scene: Scene, cluster_points: PointCloud, gate: float = 2.0):
    """Class tag and instance id of the primitive nearest the cluster centroid.

    Returns ("unknown", -1) beyond `gate` meters; equidistant ties go to the
    lowest instance id.
    """
    if len(cluster_points) == 0:
        raise ValueError("cluster must be nonempty")
    centroid = cluster_points.points.mean(axis=0)[None, :]
    dists = np.array([prim.surface_distance(centroid)[0] for prim in scene.primitives])
    ids = np.array([prim.instance_id for prim in scene.primitives])
    order = np.lexsort((ids, dists))
    best = order[0]
    if dists[best] > gate:
        return "unknown", -1
    return scene.primitives[best].class_tag, int(ids[best])


# ============================================================================
# file formats
# ============================================================================


def save_scene(scene: Scene, path) -> None:
    """Write a scene as YAML (angles in degrees at this boundary)."""
    prims = []
    for p in scene.primitives:
        entry = {"class": p.class_tag, "id": p.instance_id, "center": list(p.center)}
        if isinstance(p, Cylinder):
            entry.update(kind="cylinder", radius=p.radius, height=p.height,
                         axis=list(p.axis))
        elif isinstance(p, Box):
            entry.update(kind="box", extents=list(p.extents), yaw_deg=math.degrees(p.yaw))
        else:
            raise TypeError(f"unknown primitive type {type(p)}")
        prims.append(entry)
    with open(path, "w") as f:
        yaml.safe_dump({"name": scene.name, "primitives": prims}, f, sort_keys=False)


def load_scene(path) -> Scene:
    with open(path) as f:
        doc = yaml.safe_load(f)
    prims = []
    for entry in doc.get("primitives", []):
        kind = entry["kind"]
        common = dict(
            center=tuple(entry["center"]),
            class_tag=entry["class"],
            instance_id=int(entry["id"]),
        )
        if kind == "cylinder":
            prims.append(
                Cylinder(radius=float(entry["radius"]), height=float(entry["height"]),
                         axis=tuple(entry.get("axis", (0.0, 0.0, 1.0))), **common)
            )
        elif kind == "box":
            prims.append(
                Box(extents=tuple(entry["extents"]),
                    yaw=math.radians(float(entry.get("yaw_deg", 0.0))), **common)
            )
        else:
            raise ValueError(f"unknown primitive kind {kind!r}")
    return Scene(tuple(prims), name=doc.get("name", "scene"))


def write_pgm(img: SonarImage, path) -> None:
    """Dump an image as 16-bit binary PGM; row = range bin, column = beam."""
    grid = img.intensities
    peak = grid.max()
    scaled = np.zeros_like(grid) if peak <= 0 else grid / peak
    raw = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{grid.shape[1]} {grid.shape[0]}\n65535\n".encode())
        f.write(raw.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a 16-bit binary PGM written by write_pgm; returns uint16 (rows, cols)."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise ValueError("not a binary PGM file")
        width, height = map(int, f.readline().split())
        maxval = int(f.readline())
        if maxval != 65535:
            raise ValueError("expected 16-bit PGM")
        data = np.frombuffer(f.read(width * height * 2), dtype=">u2")
    return data.reshape(height, width).astype(np.uint16)
