"""Per-class height belief models and MAP height prediction.

The horizontal sonar detects far more of a scene than the cross-sonar overlap
can triangulate.  When a detected object belongs to a known, repeating class
(pilings, seawalls, docks), the heights measured on one instance can stand in
for the heights of another: each class keeps a small planar *reference cloud*
anchored at the first sighting's (min range, median bearing), every later
sighting is registered onto it with planar ICP, and a grid over
(range, bearing) relative to that anchor accumulates a discrete posterior over
height bins.  Measured 3D points sharpen the posterior multiplicatively with a
Gaussian likelihood; detection pixels that only the horizontal sonar saw are
then assigned the grid's MAP heights — one argmax over the bins at or below
the sonar plane and one above it, so an object straddling the plane can emit
both a top and a bottom surface point — and back-projected into the body
frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

from .detect import ObjectInstance, cells_to_planar_xy
from .fusion import FusedPoint, fused_points_to_cloud
from .geometry import (
    PointCloud,
    Pose2,
    merge_clouds,
    spherical_to_cartesian,
    voxel_downsample,
    wrap_angle,
)
from .simworld import SonarImage
from .slam import IcpParams, icp_2d

__all__ = [
    "ClassGeometryModel",
    "InferenceParams",
    "bayes_update",
    "dump_model",
    "infer_frame",
    "init_reference",
    "map_predict",
    "register_to_reference",
]


class ClassGeometryModel:
    """Height beliefs for one object class, in the class's reference frame.

    The reference frame is the body frame of the first sighting; its polar
    anchor ``origin = (min range, median bearing)`` turns registered planar
    coordinates into grid coordinates ``(r - r0, wrap(theta - theta0))``.
    Grid cells are lazy: any cell never touched by a measurement reads back
    as a uniform distribution over the height bins.
    """

    def __init__(
        self,
        label: str,
        r_bin: float = 0.1,
        theta_bin: float = 0.014,
        z_min: float = -6.0,
        z_max: float = 6.0,
        z_bin: float = 0.1,
        sigma: float = 0.15,
        r_bounds: tuple[float, float] = (-2.0, 20.0),
        theta_bound: float = 1.2,
        reference_voxel: float = 0.05,
    ):
        if not label:
            raise ValueError("class label must be nonempty")
        if r_bin <= 0 or theta_bin <= 0 or z_bin <= 0:
            raise ValueError("grid bin sizes must be positive")
        if not z_min < z_max:
            raise ValueError("z_min must be below z_max")
        if sigma <= 0:
            raise ValueError("likelihood sigma must be positive")
        if not r_bounds[0] < r_bounds[1] or theta_bound <= 0:
            raise ValueError("grid bounds must be nonempty")
        if reference_voxel <= 0:
            raise ValueError("reference_voxel must be positive")
        self.label = label
        self.r_bin = float(r_bin)
        self.theta_bin = float(theta_bin)
        self.z_min = float(z_min)
        self.z_max = float(z_max)
        self.z_bin = float(z_bin)
        self.sigma = float(sigma)
        self.r_bounds = (float(r_bounds[0]), float(r_bounds[1]))
        self.theta_bound = float(theta_bound)
        self.reference_voxel = float(reference_voxel)
        num = int(round((self.z_max - self.z_min) / self.z_bin))
        if num < 2:
            raise ValueError("height range must span at least two bins")
        self.num_z_bins = num
        self.z_centers = self.z_min + (np.arange(num) + 0.5) * self.z_bin
        self.origin: tuple[float, float] | None = None
        self.reference_cloud: PointCloud | None = None
        self.cells: dict[tuple[int, int], np.ndarray] = {}
        self.cell_update_counts: dict[tuple[int, int], int] = {}
        self.updates = 0
        self.skipped_out_of_grid = 0

    def cell_index(self, r_ref: float, theta_ref: float) -> tuple[int, int] | None:
        """Grid cell for anchor-relative polar coordinates, None off-grid."""
        if not self.r_bounds[0] <= r_ref < self.r_bounds[1]:
            return None
        if not -self.theta_bound <= theta_ref < self.theta_bound:
            return None
        return (
            int(math.floor(r_ref / self.r_bin)),
            int(math.floor(theta_ref / self.theta_bin)),
        )

    def posterior(self, cell: tuple[int, int]) -> np.ndarray:
        """Copy of the cell's height distribution; uniform if never updated."""
        vec = self.cells.get(tuple(cell))
        if vec is None:
            return np.full(self.num_z_bins, 1.0 / self.num_z_bins)
        return vec.copy()

    def extend_reference(self, registered: PointCloud) -> None:
        """Fold registered planar points into the reference cloud.

        The union is voxel-downsampled at ``reference_voxel`` (existing
        points win their cells), so revisiting the same object cannot grow
        the cloud without bound and registration cost stays bounded.
        """
        if self.reference_cloud is None:
            raise ValueError("reference is not initialized")
        if len(registered) == 0:
            return
        pts = registered.points.copy()
        pts[:, 2] = 0.0
        merged = merge_clouds(
            [self.reference_cloud, PointCloud(points=pts, frame="reference")]
        )
        self.reference_cloud = voxel_downsample(merged, self.reference_voxel)


def _planar_anchor(cloud: PointCloud) -> tuple[float, float]:
    """(min range, median bearing) of a planar cloud — the polar anchor."""
    xy = cloud.points[:, :2]
    ranges = np.hypot(xy[:, 0], xy[:, 1])
    bearings = np.arctan2(xy[:, 1], xy[:, 0])
    return float(ranges.min()), float(np.median(bearings))


def init_reference(model: ClassGeometryModel, first_sighting: PointCloud) -> None:
    """Adopt the first sighting's frame, anchored at its polar anchor."""
    if model.origin is not None:
        raise ValueError(f"class {model.label!r} already has a reference")
    if len(first_sighting) == 0:
        raise ValueError("first sighting is empty")
    model.origin = _planar_anchor(first_sighting)
    pts = first_sighting.points.copy()
    pts[:, 2] = 0.0
    model.reference_cloud = PointCloud(points=pts, frame="reference")


def register_to_reference(
    model: ClassGeometryModel,
    object_points: PointCloud,
    icp_params: IcpParams = IcpParams(fitness_min=0.3),
) -> tuple[Pose2, PointCloud] | None:
    """Planar-ICP a sighting onto the class reference cloud.

    The initial guess rotates the sighting's polar anchor bearing onto the
    reference anchor bearing and translates anchor onto anchor, which is
    exact for rotationally repeated instances of the same shape.  Returns
    the registering pose and the registered planar cloud, or None when ICP
    fails (the caller skips the object for this frame).
    """
    if model.origin is None:
        raise ValueError(f"class {model.label!r} has no reference yet")
    if len(object_points) == 0:
        return None
    r0, th0 = model.origin
    r1, th1 = _planar_anchor(object_points)
    dyaw = wrap_angle(th0 - th1)
    anchor_ref = np.array([r0 * math.cos(th0), r0 * math.sin(th0)])
    c, s = math.cos(dyaw), math.sin(dyaw)
    anchor_obj = np.array([r1 * math.cos(th1), r1 * math.sin(th1)])
    rotated = np.array(
        [c * anchor_obj[0] - s * anchor_obj[1], s * anchor_obj[0] + c * anchor_obj[1]]
    )
    t = anchor_ref - rotated
    initial = Pose2(float(t[0]), float(t[1]), dyaw)
    result = icp_2d(object_points, model.reference_cloud, initial, icp_params)
    if result.status != "ok":
        return None
    xy = result.transform.transform(object_points.points[:, :2])
    registered = PointCloud(
        points=np.column_stack([xy, np.zeros(len(xy))]), frame="reference"
    )
    return result.transform, registered


def _point_cell(
    model: ClassGeometryModel, x: float, y: float
) -> tuple[int, int] | None:
    r0, th0 = model.origin
    r_ref = math.hypot(x, y) - r0
    th_ref = wrap_angle(math.atan2(y, x) - th0)
    return model.cell_index(r_ref, th_ref)


def bayes_update(model: ClassGeometryModel, registered_points: PointCloud) -> None:
    """Sharpen cell posteriors with measured heights.

    Each point carries reference-frame planar coordinates and a measured
    height z; its cell's posterior is multiplied by a Gaussian likelihood
    centered on z and renormalized.  Points whose cell falls outside the
    grid, or whose z falls outside the modeled height range, are counted in
    ``skipped_out_of_grid`` and ignored.
    """
    if model.origin is None:
        raise ValueError(f"class {model.label!r} has no reference yet")
    for x, y, z in registered_points.points:
        cell = _point_cell(model, x, y)
        if cell is None or not model.z_min <= z <= model.z_max:
            model.skipped_out_of_grid += 1
            continue
        prior = model.cells.get(cell)
        if prior is None:
            prior = np.full(model.num_z_bins, 1.0 / model.num_z_bins)
        posterior = prior * np.exp(-0.5 * ((model.z_centers - z) / model.sigma) ** 2)
        total = posterior.sum()
        if not np.isfinite(total) or total <= 0.0:
            model.skipped_out_of_grid += 1
            continue
        model.cells[cell] = posterior / total
        model.cell_update_counts[cell] = model.cell_update_counts.get(cell, 0) + 1
        model.updates += 1


def map_predict(
    model: ClassGeometryModel,
    planar_points: PointCloud,
    registration: Pose2,
    confidence_thresh: float | None = None,
) -> PointCloud:
    """Predict 3D points for registered 2D pixels from the grid's MAP heights.

    Per input point, the cell posterior is maximized separately over the
    height bins at or below zero and above zero; each maximum whose
    probability reaches ``confidence_thresh`` (default ``3 / num_z_bins``)
    emits one point.  Emitted points are mapped back through the inverse of
    ``registration`` into the sighting's own body frame and lifted to 3D
    along the slant arc, preserving the pixel's range.  Cells never updated,
    and heights exceeding the pixel's slant range, emit nothing.
    """
    if model.updates < 1:
        raise ValueError("model has no height updates yet")
    if confidence_thresh is None:
        confidence_thresh = 3.0 / model.num_z_bins
    inverse = registration.inverse()
    negative = model.z_centers <= 0.0
    points: list[np.ndarray] = []
    confidences: list[float] = []
    for row in planar_points.points:
        x, y = float(row[0]), float(row[1])
        cell = _point_cell(model, x, y)
        if cell is None or model.cell_update_counts.get(cell, 0) < 1:
            continue
        posterior = model.cells[cell]
        body_xy = inverse.transform(np.array([[x, y]]))[0]
        rng = float(math.hypot(body_xy[0], body_xy[1]))
        if rng <= 0.0:
            continue
        theta = float(math.atan2(body_xy[1], body_xy[0]))
        for side in (negative, ~negative):
            idx = np.nonzero(side)[0]
            if idx.size == 0:
                continue
            best = int(idx[np.argmax(posterior[idx])])
            prob = float(posterior[best])
            if prob < confidence_thresh:
                continue
            z = float(model.z_centers[best])
            if abs(z) > rng:
                continue
            elevation = math.asin(z / rng)
            points.append(spherical_to_cartesian(rng, theta, elevation))
            confidences.append(prob)
    if not points:
        return PointCloud.empty("body")
    return PointCloud(
        points=np.vstack(points), frame="body", intensity=np.array(confidences)
    )


def dump_model(model: ClassGeometryModel) -> str:
    """YAML snapshot of a class model (grid beliefs and bookkeeping)."""
    cells = {
        f"{r},{t}": [float(p) for p in vec]
        for (r, t), vec in sorted(model.cells.items())
    }
    data = {
        "label": model.label,
        "origin": None if model.origin is None else [float(v) for v in model.origin],
        "r_bin": model.r_bin,
        "theta_bin": model.theta_bin,
        "z_min": model.z_min,
        "z_max": model.z_max,
        "z_bin": model.z_bin,
        "sigma": model.sigma,
        "updates": model.updates,
        "skipped_out_of_grid": model.skipped_out_of_grid,
        "cells": cells,
    }
    return yaml.safe_dump(data, sort_keys=False)


@dataclass(frozen=True)
class InferenceParams:
    """Knobs for frame-level inference.

    ``bearing_limit`` splits each instance's pixels into in-overlap (feed
    Bayes updates via their fused points) and out-of-overlap (receive MAP
    predictions); it should match the fusion overlap half-angle.  Grid bins
    left as None are derived from the image: range bins twice the range
    resolution, bearing bins twice the beam spacing, reference voxel one
    range resolution.
    """

    bearing_limit: float = math.radians(10.0)
    class_whitelist: tuple[str, ...] = ("piling", "seawall", "dock")
    confidence_thresh: float | None = None
    r_bin: float | None = None
    theta_bin: float | None = None
    z_min: float = -6.0
    z_max: float = 6.0
    z_bin: float = 0.1
    sigma: float = 0.15
    reference_voxel: float | None = None
    icp: IcpParams = IcpParams(fitness_min=0.3)

    def __post_init__(self):
        if self.bearing_limit <= 0:
            raise ValueError("bearing_limit must be positive")
        for name in ("r_bin", "theta_bin", "reference_voxel"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive when given")


def _model_for(
    label: str, img: SonarImage, params: InferenceParams
) -> ClassGeometryModel:
    cfg = img.config
    beams = img.beam_angles
    spacing = float(beams[1] - beams[0]) if len(beams) > 1 else params.bearing_limit
    return ClassGeometryModel(
        label,
        r_bin=params.r_bin if params.r_bin is not None else 2.0 * cfg.range_resolution,
        theta_bin=params.theta_bin if params.theta_bin is not None else 2.0 * spacing,
        z_min=params.z_min,
        z_max=params.z_max,
        z_bin=params.z_bin,
        sigma=params.sigma,
        reference_voxel=(
            params.reference_voxel
            if params.reference_voxel is not None
            else cfg.range_resolution
        ),
    )


def _instance_planar(inst: ObjectInstance, img: SonarImage) -> PointCloud:
    xy = cells_to_planar_xy(inst.cells, img)
    return PointCloud(points=np.column_stack([xy, np.zeros(len(xy))]), frame="body")


def infer_frame(
    h_img: SonarImage,
    instances: list[ObjectInstance],
    fused_points: list[FusedPoint],
    models: dict[str, ClassGeometryModel],
    params: InferenceParams = InferenceParams(),
) -> PointCloud:
    """Augment a frame's fused cloud with predicted heights.

    For each whitelisted labeled instance: register its detected footprint to
    the class reference (creating the reference on first sighting), feed its
    fused points' measured heights to the class grid, then predict heights
    for its pixels outside the cross-sonar overlap.  Updates happen before
    predictions within the frame, and predictions never feed back into the
    grid.  ``models`` is mutated in place so beliefs persist across frames.
    Returns the fused cloud followed by predicted points, in body frame.
    """
    fused_list = list(fused_points)
    clouds = [fused_points_to_cloud(fused_list)]
    beams = h_img.beam_angles
    for inst in instances:
        if inst.label not in params.class_whitelist:
            continue
        planar = _instance_planar(inst, h_img)
        if len(planar) == 0:
            continue
        model = models.get(inst.label)
        if model is None:
            model = _model_for(inst.label, h_img, params)
            init_reference(model, planar)
            models[inst.label] = model
        result = register_to_reference(model, planar, params.icp)
        if result is None:
            continue
        registration, registered = result
        cellset = {(int(r), int(b)) for r, b in inst.cells}
        inst_fused = [pt for pt in fused_list if pt.h_cell in cellset]
        if inst_fused:
            pix_xy = cells_to_planar_xy(
                np.array([pt.h_cell for pt in inst_fused]), h_img
            )
            reg_xy = registration.transform(pix_xy)
            heights = np.array(
                [pt.range * math.sin(pt.elevation) for pt in inst_fused]
            )
            bayes_update(
                model,
                PointCloud(
                    points=np.column_stack([reg_xy, heights]), frame="reference"
                ),
            )
            model.extend_reference(registered)
        outside = np.abs(beams[inst.cells[:, 1]]) > params.bearing_limit
        out_cells = inst.cells[outside]
        if len(out_cells) and model.updates >= 1:
            q_xy = registration.transform(cells_to_planar_xy(out_cells, h_img))
            query = PointCloud(
                points=np.column_stack([q_xy, np.zeros(len(q_xy))]),
                frame="reference",
            )
            predicted = map_predict(
                model, query, registration, params.confidence_thresh
            )
            if len(predicted):
                clouds.append(predicted)
    return merge_clouds(clouds, frame="body")
