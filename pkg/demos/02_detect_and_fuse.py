"""Detect with SOCA-CFAR and fuse the orthogonal pair into 3D points.

A single imaging sonar collapses elevation: every pixel is a (range, bearing)
cell with unknown out-of-plane angle.  With two orthogonal sonars, a return
at the same range in both images can be intersected — the horizontal image
supplies bearing, the vertical image supplies elevation — producing a true
3D point, but only inside the wedge where both fields of view overlap.

This demo renders one pair, runs the detector on both images, fuses them,
and checks the fused points against the analytic scene surface.

Run:  python3 demos/02_detect_and_fuse.py
"""

import numpy as np

from sonarmap import (
    CfarParams,
    Cylinder,
    FusionParams,
    NoiseParams,
    Pose2,
    Pose3,
    Scene,
    default_horizontal_config,
    default_vertical_config,
    distance_to_scene,
    fuse_pair,
    fused_points_to_cloud,
    render_sonar_pair,
    soca_cfar,
)

scene = Scene(
    (Cylinder(center=(6.0, 0.0, -2.0), radius=0.25, height=4.0,
              class_tag="piling", instance_id=0),),
    name="single_piling",
)
pose = Pose3.from_planar(Pose2(0.0, 0.0, 0.0), depth=-1.0)

h_cfg, v_cfg = default_horizontal_config(), default_vertical_config()
h_img, v_img = render_sonar_pair(scene, pose, h_cfg, v_cfg, NoiseParams(),
                                 seed=7)

# SOCA-CFAR adapts its threshold to local clutter: each cell is compared
# against the smallest of four one-sided training-window means, which keeps
# the false-alarm rate pinned near p_fa even when the background level varies.
# A strict p_fa here keeps speckle phantoms from pairing up during fusion.
cfar = CfarParams(train_cells=16, guard_cells=2, p_fa=1e-5)
h_mask, v_mask = soca_cfar(h_img, cfar), soca_cfar(v_img, cfar)
print(f"detections: horizontal {h_mask.cells.shape[0]} cells, "
      f"vertical {v_mask.cells.shape[0]} cells")

# Fusion pairs detections range-bin by range-bin.  Within a bin, candidate
# (horizontal, vertical) pairings are scored by appearance-patch similarity
# and assigned one-to-one; a rotationally symmetric piling makes every patch
# look alike, so the ambiguity-confidence cull is disabled here.
points = fuse_pair(h_img, v_img, h_mask, v_mask,
                   FusionParams(confidence_min=0.0))
cloud = fused_points_to_cloud(points)
print(f"fused {len(cloud)} 3D points inside the overlap wedge")

d = np.abs(distance_to_scene(scene, cloud.points))
print(f"distance to true surface: median {np.median(d):.3f} m, "
      f"p95 {np.percentile(d, 95):.3f} m, max {d.max():.3f} m")
print("Most points land on the piling; the tail comes from same-range-bin "
      "mis-pairings — two returns at one range can swap bearing/elevation "
      "partners, which is exactly the ambiguity the pairing confidence "
      "scores (disabled for this symmetric target, diluted by volume in "
      "full scenario runs).")
bearings = np.degrees(np.arctan2(cloud.points[:, 1], cloud.points[:, 0]))
print(f"fused bearing span: {bearings.min():+.1f}° .. {bearings.max():+.1f}° "
      "(capped by the ±10° overlap wedge — the motivation for inference and "
      "submapping in the next demos)")
