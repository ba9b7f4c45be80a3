"""Shared test helpers: synthetic image builders with consistent configs."""

import math

import numpy as np

from sonarmap.simworld import SonarConfig, SonarImage


def image_from(grid, mount="horizontal", fov_deg=130.0, aperture_deg=20.0, res=0.05):
    """Wrap a raw intensity grid in a SonarImage with a matching config."""
    grid = np.asarray(grid, dtype=float)
    cfg = SonarConfig(
        max_range=grid.shape[0] * res,
        range_resolution=res,
        horizontal_fov=math.radians(fov_deg),
        vertical_aperture=math.radians(aperture_deg),
        beam_count=grid.shape[1],
        elevation_samples=5,
        mount=mount,
    )
    return SonarImage(grid, cfg)


def image_pair_from(h_grid, v_grid, h_fov_deg=20.0, v_fov_deg=20.0, res=0.05):
    """A (horizontal, vertical) image pair whose fields of view fully overlap."""
    h = image_from(h_grid, mount="horizontal", fov_deg=h_fov_deg, res=res)
    v = image_from(v_grid, mount="vertical", fov_deg=v_fov_deg, res=res)
    return h, v
