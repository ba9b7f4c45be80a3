"""Fusion of an orthogonal sonar image pair into 3-D points.

A horizontally mounted imaging sonar resolves (range, bearing) but integrates
away elevation; a vertically mounted one resolves (range, elevation) but
integrates away bearing.  Where their viewing frustums overlap, a surface
patch seen by both sonars lands in the same range bin of each image, so a
detection in one image can be completed into a full (range, bearing,
elevation) observation by pairing it with a detection at the same range in
the other image.

Pairing is decided per range bin by local appearance: the neighbourhood of a
detection in the vertical image, rotated a quarter turn, should resemble the
neighbourhood of its counterpart in the horizontal image.  Ambiguous bins are
resolved with a minimum-cost assignment, and each match carries a confidence
score built from how clearly its best pairing beat the runner-up.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detect import DetectionMask
from .geometry import PointCloud, spherical_to_cartesian
from .simworld import SonarImage


@dataclass(frozen=True)
class FusionParams:
    """Tuning knobs for pairing detections across the two images.

    patch_size: side length (odd, >= 3) of the square appearance patch.
    confidence_min: matches with confidence strictly below this are dropped;
        it is also the confidence assigned to unambiguous single-candidate
        pairs, so those always pass the cut.
    range_bin_tolerance: detections up to this many range bins apart may
        still be paired (0 = exact same bin).
    """

    patch_size: int = 5
    confidence_min: float = 0.01
    range_bin_tolerance: int = 0

    def __post_init__(self):
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError("patch_size must be odd and at least 3")
        if self.range_bin_tolerance < 0:
            raise ValueError("range_bin_tolerance must be non-negative")
        if not np.isfinite(self.confidence_min) or self.confidence_min < 0:
            raise ValueError("confidence_min must be finite and non-negative")


@dataclass(frozen=True)
class FusedPoint:
    """One matched detection pair, expressed in sonar spherical coordinates.

    ``singleton`` marks points whose bin offered no alternative pairing, so
    their confidence is the pass-through value rather than a measured margin.
    ``h_cell``/``v_cell`` record the source (range_bin, beam) cells so later
    stages can associate fused points with detected objects.
    """

    range: float
    bearing: float
    elevation: float
    confidence: float
    singleton: bool = False
    h_cell: tuple[int, int] | None = None
    v_cell: tuple[int, int] | None = None

    def __post_init__(self):
        if not np.isfinite(self.range) or self.range < 0:
            raise ValueError("range must be finite and non-negative")
        if not (np.isfinite(self.bearing) and np.isfinite(self.elevation)):
            raise ValueError("bearing and elevation must be finite")
        if not np.isfinite(self.confidence) or self.confidence < 0:
            raise ValueError("confidence must be finite and non-negative")


def normalize_image(image: SonarImage) -> SonarImage:
    """Affinely map intensities to [0, 1] per image; a constant image maps
    to all zeros."""
    grid = image.intensities
    lo = float(grid.min())
    span = float(grid.max()) - lo
    if span <= 0.0:
        out = np.zeros_like(grid)
    else:
        out = (grid - lo) / span
    return SonarImage(out, image.config, image.timestamp)


def _patch(grid: np.ndarray, cell, size: int) -> np.ndarray:
    """Square window centred on ``cell``; out-of-bounds cells read as zero."""
    half = size // 2
    r, c = int(cell[0]), int(cell[1])
    out = np.zeros((size, size), dtype=float)
    r0, c0 = r - half, c - half
    sr0, sr1 = max(r0, 0), min(r + half + 1, grid.shape[0])
    sc0, sc1 = max(c0, 0), min(c + half + 1, grid.shape[1])
    if sr0 < sr1 and sc0 < sc1:
        out[sr0 - r0 : sr1 - r0, sc0 - c0 : sc1 - c0] = grid[sr0:sr1, sc0:sc1]
    return out


def patch_cost(
    h_intensities: np.ndarray,
    h_cell,
    v_intensities: np.ndarray,
    v_cell,
    patch_size: int = 5,
) -> float:
    """Appearance mismatch between a horizontal-image cell and a vertical-image
    cell: Frobenius norm of (horizontal patch - quarter-turn of vertical
    patch).  Intensities should already be normalized to a shared scale."""
    if patch_size < 3 or patch_size % 2 == 0:
        raise ValueError("patch_size must be odd and at least 3")
    hp = _patch(np.asarray(h_intensities, dtype=float), h_cell, patch_size)
    vp = _patch(np.asarray(v_intensities, dtype=float), v_cell, patch_size)
    return float(np.linalg.norm(hp - np.rot90(vp)))


def solve_assignment(cost: np.ndarray, dummy_cost: float | None = None) -> list[tuple[int, int]]:
    """Minimum-total-cost pairing of rows with columns.

    Rectangular matrices are padded to square with a constant dummy cost (the
    95th percentile of the real costs unless given).  Every square completion
    assigns exactly |rows - cols| dummies, so the padding shifts all totals by
    the same constant and the surviving real pairs are the rectangular
    optimum.  Returns (row, col) pairs sorted by row; size is min(rows, cols).
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n, m = cost.shape
    if n == 0 or m == 0:
        return []
    if n != m:
        if dummy_cost is None:
            dummy_cost = float(np.percentile(cost, 95))
        side = max(n, m)
        padded = np.full((side, side), dummy_cost)
        padded[:n, :m] = cost
    else:
        padded = cost
    rows, cols = linear_sum_assignment(padded)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if i < n and j < m]
    pairs.sort()
    return pairs


def _admitted_cells(mask: DetectionMask, beam_angles: np.ndarray, limit: float):
    """Detected (bin, beam) cells whose beam lies inside the shared frustum."""
    keep = np.abs(beam_angles[mask.cells[:, 1]]) <= limit + 1e-12
    return [(int(r), int(b)) for r, b in mask.cells[keep]]


def fuse_pair(
    h_image: SonarImage,
    v_image: SonarImage,
    h_mask: DetectionMask,
    v_mask: DetectionMask,
    params: FusionParams = FusionParams(),
) -> list[FusedPoint]:
    """Match detections across an orthogonal image pair into fused points.

    Only cells inside the shared frustum participate: horizontal-image beams
    within the vertical sonar's aperture, and vertical-image beams within the
    horizontal sonar's aperture.  Range bins are visited in ascending order;
    each bin's candidates (within ``range_bin_tolerance``) are paired by
    minimum appearance cost, matched cells are consumed, and a match is kept
    when its confidence

        (runner-up cost - best cost) / (sum of that row's costs)

    reaches ``confidence_min``.  A bin with exactly one candidate on each side
    has no runner-up; it is passed through with ``confidence_min`` and flagged
    as a singleton.  The fused range is the average of the two cells' ranges;
    bearing comes from the horizontal beam, elevation from the vertical beam.
    """
    h_cfg, v_cfg = h_image.config, v_image.config
    if h_cfg.mount != "horizontal" or v_cfg.mount != "vertical":
        raise ValueError("fuse_pair expects (horizontal, vertical) images")
    if abs(h_cfg.range_resolution - v_cfg.range_resolution) > 1e-12:
        raise ValueError("images must share one range resolution")
    if h_mask.grid.shape != h_image.intensities.shape:
        raise ValueError("horizontal mask does not match its image")
    if v_mask.grid.shape != v_image.intensities.shape:
        raise ValueError("vertical mask does not match its image")

    res = h_cfg.range_resolution
    bearing_limit = min(h_cfg.horizontal_fov, v_cfg.vertical_aperture) / 2
    elevation_limit = min(h_cfg.vertical_aperture, v_cfg.horizontal_fov) / 2

    hn = normalize_image(h_image).intensities
    vn = normalize_image(v_image).intensities

    h_by_bin: dict[int, list[int]] = defaultdict(list)
    v_by_bin: dict[int, list[int]] = defaultdict(list)
    for r, b in _admitted_cells(h_mask, h_cfg.beam_angles, bearing_limit):
        h_by_bin[r].append(b)
    for r, b in _admitted_cells(v_mask, v_cfg.beam_angles, elevation_limit):
        v_by_bin[r].append(b)

    tol = params.range_bin_tolerance
    consumed_h: set[tuple[int, int]] = set()
    consumed_v: set[tuple[int, int]] = set()
    fused: list[FusedPoint] = []

    def gather(by_bin, consumed, center):
        cells = []
        for r in range(center - tol, center + tol + 1):
            for b in by_bin.get(r, ()):
                if (r, b) not in consumed:
                    cells.append((r, b))
        return cells

    for r in sorted(set(h_by_bin) | set(v_by_bin)):
        cand_h = gather(h_by_bin, consumed_h, r)
        cand_v = gather(v_by_bin, consumed_v, r)
        if not cand_h or not cand_v:
            continue

        cost = np.array(
            [
                [patch_cost(hn, hc, vn, vc, params.patch_size) for vc in cand_v]
                for hc in cand_h
            ]
        )
        matches = solve_assignment(cost)
        for i, j in matches:
            consumed_h.add(cand_h[i])
            consumed_v.add(cand_v[j])
            row = cost[i, :]
            if row.size < 2:
                confidence = params.confidence_min
                singleton = True
            else:
                ordered = np.sort(row)
                denom = float(row.sum())
                confidence = (float(ordered[1]) - float(ordered[0])) / denom if denom > 0 else 0.0
                singleton = False
            if confidence < params.confidence_min:
                continue
            bin_h, beam_h = cand_h[i]
            bin_v, beam_v = cand_v[j]
            fused.append(
                FusedPoint(
                    range=(bin_h + bin_v) / 2 * res,
                    bearing=float(h_cfg.beam_angles[beam_h]),
                    elevation=float(v_cfg.beam_angles[beam_v]),
                    confidence=float(confidence),
                    singleton=singleton,
                    h_cell=(bin_h, beam_h),
                    v_cell=(bin_v, beam_v),
                )
            )
    return fused


def fused_points_to_cloud(points: list[FusedPoint], frame: str = "body") -> PointCloud:
    """Convert fused spherical points to a Cartesian cloud; intensity stores
    each point's confidence."""
    if not points:
        return PointCloud.empty(frame)
    ranges = np.array([p.range for p in points])
    bearings = np.array([p.bearing for p in points])
    elevations = np.array([p.elevation for p in points])
    xyz = spherical_to_cartesian(ranges, bearings, elevations)
    conf = np.array([p.confidence for p in points])
    return PointCloud(points=xyz, frame=frame, intensity=conf)
