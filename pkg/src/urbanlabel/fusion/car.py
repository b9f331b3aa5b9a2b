"""Car detection: cluster shape, height and road-location tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import LabelCode, LabeledCloud
from ..growing import ClusterIndex
from ..raster import ElevationRaster
from ..vector import Polygon2D, min_bounding_rect, points_in_polygon


@dataclass(frozen=True)
class CarDims:
    """Accepted (min, max) ranges in meters."""

    length_range: tuple[float, float] = (2.5, 5.8)
    width_range: tuple[float, float] = (1.5, 2.1)
    height_range: tuple[float, float] = (1.2, 2.1)

    def __post_init__(self):
        for name in ("length_range", "width_range", "height_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < min <= max, got ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))


@dataclass
class CarCheck:
    """Outcome of the shape/location tests for one cluster (kept for diagnostics)."""

    cluster: int
    length: float
    width: float
    angle: float
    height: float
    clearance: float
    centroid: tuple[float, float]
    on_road: bool
    accepted: bool


def _rect_centroid(xy: np.ndarray, angle: float) -> tuple[float, float]:
    c, s = math.cos(angle), math.sin(angle)
    u = xy[:, 0] * c + xy[:, 1] * s
    v = -xy[:, 0] * s + xy[:, 1] * c
    um = 0.5 * (u.min() + u.max())
    vm = 0.5 * (v.min() + v.max())
    return (um * c - vm * s, um * s + vm * c)


def check_cluster(cloud: LabeledCloud, members: np.ndarray, roads: Sequence[Polygon2D],
                  ground_raster: ElevationRaster, dims: CarDims, max_base_clearance: float,
                  cluster_id: int = -1) -> Optional[CarCheck]:
    """Run the car tests on one cluster; ``None`` when cheap bounds already rule it out."""
    x, y, z = cloud.x[members], cloud.y[members], cloud.z[members]
    diag_max = math.hypot(dims.length_range[1], dims.width_range[1])
    # An enclosing rectangle is at least as long as each bounding-box side.
    if max(x.max() - x.min(), y.max() - y.min()) > diag_max:
        return None
    xy = np.column_stack((x, y))
    length, width, angle = min_bounding_rect(xy)
    cx, cy = _rect_centroid(xy, angle)
    ground = float(ground_raster.ground_at(np.array([cx]), np.array([cy]))[0])
    height = float(z.max()) - ground
    clearance = float(z.min()) - ground
    on_road = any(bool(points_in_polygon(p, np.array([cx]), np.array([cy]))[0]) for p in roads)
    ok = (dims.length_range[0] <= length <= dims.length_range[1]
          and dims.width_range[0] <= width <= dims.width_range[1]
          and dims.height_range[0] <= height <= dims.height_range[1]
          and clearance <= max_base_clearance
          and on_road)
    return CarCheck(cluster_id, length, width, angle, height, clearance, (cx, cy), on_road, ok)


def label_cars(cloud: LabeledCloud, clusters: ClusterIndex, roads: Sequence[Polygon2D],
               ground_raster: ElevationRaster, dims: CarDims = CarDims(),
               max_base_clearance: float = 0.5, report: Optional[list] = None) -> int:
    """Label every point of each cluster that passes the car tests.

    Height and base clearance are measured from the ground surface under
    the rectangle centroid.  ``roads`` holds road and parking polygons.
    """
    if clusters.ids.shape != (len(cloud),):
        raise ValueError("cluster index does not match the cloud")
    total = 0
    for cid, members in enumerate(clusters.members()):
        chk = check_cluster(cloud, members, roads, ground_raster, dims, max_base_clearance, cid)
        if chk is None:
            continue
        if report is not None:
            report.append(chk)
        if chk.accepted:
            free = members[cloud.label[members] == LabelCode.UNLABELLED]
            cloud.label[free] = np.uint8(LabelCode.CAR)
            total += int(free.size)
    return total
