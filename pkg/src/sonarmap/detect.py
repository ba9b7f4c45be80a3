"""Per-image detection and instancing: SOCA-CFAR segmentation, DBSCAN
clustering into object instances, and pluggable semantic classification."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud
from .simworld import Scene, SonarImage, oracle_label


# ============================================================================
# SOCA-CFAR
# ============================================================================


@dataclass(frozen=True)
class CfarParams:
    """Constant-false-alarm-rate detector settings (cells per training window)."""

    train_cells: int = 16
    guard_cells: int = 2
    p_fa: float = 1e-4
    min_intensity: float = 0.0

    def __post_init__(self):
        if self.train_cells < 1:
            raise ValueError("train_cells must be >= 1")
        if self.guard_cells < 0:
            raise ValueError("guard_cells must be >= 0")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("p_fa must be in (0, 1)")
        if self.min_intensity < 0:
            raise ValueError("min_intensity must be >= 0")


def cfar_alpha(n, p_fa):
    """Detection constant alpha = N * (P_fa^(-1/N) - 1) for window size N."""
    n = np.asarray(n, dtype=float)
    out = n * (p_fa ** (-1.0 / np.maximum(n, 1.0)) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class DetectionMask:
    """Boolean detection grid plus the list of detected (range_bin, beam) cells."""

    grid: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=bool)
        cells = np.asarray(self.cells, dtype=int).reshape(-1, 2)
        rebuilt = np.zeros_like(grid)
        if cells.size:
            rebuilt[cells[:, 0], cells[:, 1]] = True
        if not np.array_equal(rebuilt, grid) or cells.shape[0] != int(grid.sum()):
            raise ValueError("cell list and grid disagree")
        self.grid = grid
        self.cells = cells

    @staticmethod
    def from_grid(grid: np.ndarray) -> "DetectionMask":
        grid = np.asarray(grid, dtype=bool)
        return DetectionMask(grid=grid, cells=np.argwhere(grid))


def _window_means(grid: np.ndarray, train: int, guard: int, axis: int):
    """Leading/trailing 1-D training-window means and counts along one axis.

    Windows are truncated at the borders; empty windows get mean = +inf so
    they never win the minimum.
    """
    x = grid if axis == 0 else grid.T
    n = x.shape[0]
    csum = np.zeros((n + 1, x.shape[1]))
    np.cumsum(x, axis=0, out=csum[1:])
    idx = np.arange(n)
    spans = {
        "lead": (np.clip(idx - guard - train, 0, n), np.clip(idx - guard, 0, n)),
        "trail": (np.clip(idx + guard + 1, 0, n), np.clip(idx + guard + 1 + train, 0, n)),
    }
    out = []
    for a, b in spans.values():
        counts = (b - a)[:, None]
        sums = csum[b] - csum[a]
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.inf)
        cnt = np.broadcast_to(counts, x.shape)
        if axis == 1:
            means, cnt = means.T, cnt.T
        out.append((means, cnt))
    return out


def soca_cfar(img: SonarImage, p: CfarParams) -> DetectionMask:
    """Smallest-of-cell-averages CFAR over four directional training windows.

    A cell is flagged when its intensity exceeds beta = mu_min * alpha(N),
    where mu_min is the smallest of the four window means (leading/trailing
    along range, left/right along bearing) and N is that window's cell count
    (truncated windows keep their actual count), plus the min_intensity floor.
    """
    grid = img.intensities
    windows = _window_means(grid, p.train_cells, p.guard_cells, 0)
    windows += _window_means(grid, p.train_cells, p.guard_cells, 1)
    means = np.stack([m for m, _ in windows])
    counts = np.stack([c for _, c in windows]).astype(float)
    pick = np.argmin(means, axis=0)
    rows, cols = np.indices(grid.shape)
    mu = means[pick, rows, cols]
    n_train = counts[pick, rows, cols]
    with np.errstate(invalid="ignore"):
        beta = mu * cfar_alpha(n_train, p.p_fa)
    detected = np.isfinite(beta) & (grid > beta) & (grid > p.min_intensity)
    return DetectionMask.from_grid(detected)


# ============================================================================
# detected cells -> planar cloud
# ============================================================================


def cells_to_planar_xy(cells: np.ndarray, img: SonarImage) -> np.ndarray:
    """Map (range_bin, beam) cells to planar Cartesian (x, y) at elevation 0."""
    cells = np.asarray(cells, dtype=int).reshape(-1, 2)
    r = cells[:, 0] * img.config.range_resolution
    th = img.beam_angles[cells[:, 1]]
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def mask_to_planar_cloud(mask: DetectionMask, img: SonarImage) -> PointCloud:
    """Detected cells as 3D points with the unknown elevation set to zero."""
    if mask.grid.shape != img.intensities.shape:
        raise ValueError("mask and image shapes differ")
    xy = cells_to_planar_xy(mask.cells, img)
    pts = np.column_stack([xy, np.zeros(len(xy))])
    inten = img.intensities[mask.cells[:, 0], mask.cells[:, 1]] if len(xy) else None
    return PointCloud(pts, frame="body", intensity=inten)


# ============================================================================
# DBSCAN
# ============================================================================


def dbscan(points, eps: float, min_pts: int):
    """Density clustering with deterministic labels.

    Neighbourhood counts include the point itself. Points are scanned in
    ascending index order, and border points join the first cluster that
    reaches them, which makes the full labelling deterministic.
    Returns (clusters, noise): index arrays per cluster plus the noise indices.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return [], np.zeros(0, dtype=int)
    neighbors = cKDTree(pts).query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(n, -1)
    n_clusters = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = n_clusters
        queue = deque([i])
        while queue:
            j = queue.popleft()
            if not core[j]:
                continue
            for k in sorted(neighbors[j]):
                if labels[k] == -1:
                    labels[k] = n_clusters
                    if core[k]:
                        queue.append(k)
        n_clusters += 1
    clusters = [np.flatnonzero(labels == c) for c in range(n_clusters)]
    return clusters, np.flatnonzero(labels == -1)


# ============================================================================
# object instances + classification
# ============================================================================


@dataclass
class ObjectInstance:
    """A clustered set of detected cells with an optional semantic label."""

    cells: np.ndarray
    label: str = "unknown"
    confidence: float = 0.0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=int).reshape(-1, 2)
        if len(np.unique(cells, axis=0)) != cells.shape[0]:
            raise ValueError("instance cells must be unique")
        self.cells = cells


def cluster_instances(
    mask: DetectionMask,
    img: SonarImage,
    eps: float = 0.6,
    min_pts: int = 3,
    min_cluster_size: int = 5,
) -> list[ObjectInstance]:
    """Group detected cells into object instances via planar DBSCAN."""
    if mask.cells.shape[0] == 0:
        return []
    xy = cells_to_planar_xy(mask.cells, img)
    clusters, _ = dbscan(xy, eps=eps, min_pts=min_pts)
    return [
        ObjectInstance(cells=mask.cells[idx])
        for idx in clusters
        if idx.size >= min_cluster_size
    ]


@dataclass(frozen=True)
class ClusterGeometry:
    """Planar shape summary of an instance handed to classifiers."""

    points_xy: np.ndarray
    centroid: np.ndarray
    major_extent: float
    minor_extent: float

    @property
    def aspect(self) -> float:
        return self.major_extent / max(self.minor_extent, 0.05)


def _instance_geometry(instance: ObjectInstance, img: SonarImage) -> ClusterGeometry:
    xy = cells_to_planar_xy(instance.cells, img)
    centroid = xy.mean(axis=0)
    centered = xy - centroid
    if len(xy) >= 2:
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        proj = centered @ vt.T
        extents = np.sort(proj.max(axis=0) - proj.min(axis=0))[::-1]
        major, minor = float(extents[0]), float(extents[-1])
    else:
        major = minor = 0.0
    return ClusterGeometry(points_xy=xy, centroid=centroid,
                           major_extent=major, minor_extent=minor)


def _instance_patch(instance: ObjectInstance, img: SonarImage, margin: int = 2) -> np.ndarray:
    r0, b0 = instance.cells.min(axis=0)
    r1, b1 = instance.cells.max(axis=0)
    grid = img.intensities
    return grid[max(r0 - margin, 0): r1 + margin + 1, max(b0 - margin, 0): b1 + margin + 1]


class OracleClassifier:
    """Simulation stand-in for a learned classifier: looks the cluster up in the
    ground-truth scene via the body-to-world pose of the capture."""

    def __init__(self, scene: Scene, body_to_world, gate: float = 2.0):
        self.scene = scene
        self.body_to_world = body_to_world
        self.gate = gate

    def __call__(self, patch: np.ndarray, geometry: ClusterGeometry):
        pts = np.column_stack([geometry.points_xy, np.zeros(len(geometry.points_xy))])
        world = PointCloud(self.body_to_world.apply(pts), frame="map")
        label, _ = oracle_label(self.scene, world, gate=self.gate)
        return label, (0.0 if label == "unknown" else 1.0)


class HeuristicClassifier:
    """Geometric fallback classifier with documented extent thresholds:

    major extent < 1.2 m               -> piling
    1.2 m <= major < 5.0 m, aspect >= 2 -> dock
    major >= 5.0 m, aspect >= 2         -> seawall
    anything else                       -> unknown
    """

    def __init__(self, piling_max: float = 1.2, dock_max: float = 5.0,
                 min_aspect: float = 2.0):
        self.piling_max = piling_max
        self.dock_max = dock_max
        self.min_aspect = min_aspect

    def __call__(self, patch: np.ndarray, geometry: ClusterGeometry):
        major = geometry.major_extent
        if major <= 0.0:
            return "unknown", 0.0
        if major < self.piling_max:
            return "piling", 1.0
        if geometry.aspect >= self.min_aspect:
            return ("dock", 1.0) if major < self.dock_max else ("seawall", 1.0)
        return "unknown", 0.0


def classify(instance: ObjectInstance, img: SonarImage, classifier,
             confidence_min: float = 0.5):
    """Label an instance via the pluggable classifier.

    The classifier receives the cropped intensity patch and the cluster's
    planar geometry; predictions below `confidence_min` become "unknown".
    """
    patch = _instance_patch(instance, img)
    geometry = _instance_geometry(instance, img)
    label, conf = classifier(patch, geometry)
    if conf < confidence_min:
        return "unknown", conf
    return label, conf
