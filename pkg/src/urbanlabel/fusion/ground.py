"""Ground and below-ground noise labelling against the elevation surface."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..core import LabelCode, LabeledCloud, apply_labels
from ..raster import ElevationRaster


def _surface(cloud, raster, surface):
    if surface is not None:
        return surface
    return raster.query(cloud.x, cloud.y)


def label_ground(cloud: LabeledCloud, ground_raster: ElevationRaster, margin: float = 0.25,
                 surface: Optional[np.ndarray] = None) -> int:
    """Label Unlabelled points within ``margin`` of the surface (inclusive) as Ground.

    ``surface`` may carry precomputed per-point surface heights (NaN = nodata).
    """
    if not margin > 0:
        raise ValueError("ground margin must be positive")
    g = _surface(cloud, ground_raster, surface)
    with np.errstate(invalid="ignore"):
        hit = np.abs(cloud.z - g) <= margin
    return apply_labels(cloud, hit, LabelCode.GROUND)


def label_noise_below(cloud: LabeledCloud, ground_raster: ElevationRaster, margin: float = 0.25,
                      surface: Optional[np.ndarray] = None) -> int:
    """Label Unlabelled points more than ``margin`` below the surface as Noise."""
    if not margin > 0:
        raise ValueError("noise margin must be positive")
    g = _surface(cloud, ground_raster, surface)
    with np.errstate(invalid="ignore"):
        hit = cloud.z < g - margin
    return apply_labels(cloud, hit, LabelCode.NOISE)
