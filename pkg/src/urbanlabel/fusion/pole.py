"""Targeted search for trees, lamp posts and traffic signs at mapped locations.

Each mapped object gets a square search window.  A 2D grid of z
statistics over the window locates vertical structures that start near
the ground; the nearest one within ``max_offset`` of the mapped point is
measured (axis and trunk radius) and, if its radius fits the object
kind, the points inside a vertical cylinder become seed labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..core import POLE_CODES, LabelCode, LabeledCloud
from ..raster import ElevationRaster
from ..vector import PointObject

DEFAULT_RADIUS_MAX = {"tree": 0.5, "lamp_post": 0.2, "traffic_sign": 0.2}


class EstimationFailed(ValueError):
    pass


@dataclass(frozen=True)
class PoleCandidate:
    kind: str
    axis: tuple[float, float]
    z_base: float
    z_top: float
    radius: float = 0.0
    source: Optional[PointObject] = None

    def __post_init__(self):
        if not self.z_top > self.z_base:
            raise ValueError("pole candidate needs z_top > z_base")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")


@dataclass
class GridStats:
    """Per-cell z statistics over a regular 2D grid (NaN for empty cells)."""

    origin: tuple[float, float]
    cell_size: float
    count: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray
    z_mean: np.ndarray
    x_mean: np.ndarray
    y_mean: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.count.shape


def extract_search_area(cloud: LabeledCloud, obj: PointObject, half_extent: float = 1.5) -> np.ndarray:
    """Indices of Unlabelled points within the square window around ``obj``."""
    if not half_extent > 0:
        raise ValueError("half_extent must be positive")
    sel = ((np.abs(cloud.x - obj.x) <= half_extent) & (np.abs(cloud.y - obj.y) <= half_extent)
           & (cloud.label == LabelCode.UNLABELLED))
    return np.flatnonzero(sel)


def compute_grid_stats(points, cell_size: float, origin=None, shape=None) -> GridStats:
    """Bin ``(N, 3)`` points into half-open cells ``[lo, lo + cell)``.

    Without ``origin`` the grid starts at the points' minimum x/y.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if origin is None:
        origin = (float(pts[:, 0].min()), float(pts[:, 1].min())) if len(pts) else (0.0, 0.0)
    col = np.floor((pts[:, 0] - origin[0]) / cell_size).astype(np.int64)
    row = np.floor((pts[:, 1] - origin[1]) / cell_size).astype(np.int64)
    if shape is None:
        shape = (int(row.max()) + 1 if len(pts) else 1, int(col.max()) + 1 if len(pts) else 1)
    nr, nc = shape
    ok = (row >= 0) & (row < nr) & (col >= 0) & (col < nc)
    flat = row[ok] * nc + col[ok]
    p = pts[ok]
    size = nr * nc
    count = np.bincount(flat, minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        zsum = np.bincount(flat, weights=p[:, 2], minlength=size)
        xsum = np.bincount(flat, weights=p[:, 0], minlength=size)
        ysum = np.bincount(flat, weights=p[:, 1], minlength=size)
        zmin = np.full(size, np.inf)
        zmax = np.full(size, -np.inf)
        np.minimum.at(zmin, flat, p[:, 2])
        np.maximum.at(zmax, flat, p[:, 2])
        empty = count == 0
        zmean = np.where(empty, np.nan, zsum / count)
        xmean = np.where(empty, np.nan, xsum / count)
        ymean = np.where(empty, np.nan, ysum / count)
    zmin[empty] = np.nan
    zmax[empty] = np.nan
    r = lambda a: a.reshape(nr, nc)
    return GridStats((float(origin[0]), float(origin[1])), float(cell_size), r(count),
                     r(zmin), r(zmax), r(zmean), r(xmean), r(ymean))


def detect_pole(stats: GridStats, ground_z: float, min_height: float, max_offset: float,
                expected: PointObject, base_tolerance: float = 0.5) -> Optional[PoleCandidate]:
    """Find the vertical structure nearest to the mapped location.

    Qualifying 2x2 cell blocks span at least ``min_height`` in z and reach
    down to within ``base_tolerance`` of the ground.  Distance is measured
    from the block's point centroid; ties go to the first block in
    row-major order.
    """
    nr, nc = stats.shape
    if stats.count.sum() == 0:
        return None
    pad_r, pad_c = max(0, 2 - nr), max(0, 2 - nc)

    def pad(a, fill):
        return np.pad(a, ((0, pad_r), (0, pad_c)), constant_values=fill) if (pad_r or pad_c) else a

    cnt = pad(stats.count, 0)
    zmin, zmax = pad(stats.z_min, np.nan), pad(stats.z_max, np.nan)
    xs = pad(np.nan_to_num(stats.x_mean) * stats.count, 0.0)
    ys = pad(np.nan_to_num(stats.y_mean) * stats.count, 0.0)

    def block(a, op):
        return op(np.stack((a[:-1, :-1], a[:-1, 1:], a[1:, :-1], a[1:, 1:])), axis=0)

    with np.errstate(invalid="ignore", divide="ignore"):
        bcnt = block(cnt, np.sum)
        blo = block(np.where(np.isnan(zmin), np.inf, zmin), np.min)
        bhi = block(np.where(np.isnan(zmax), -np.inf, zmax), np.max)
        bx = block(xs, np.sum) / bcnt
        by = block(ys, np.sum) / bcnt
        ok = (bcnt > 0) & (bhi - blo >= min_height) & (blo <= ground_z + base_tolerance)
    if not ok.any():
        return None
    dist = np.where(ok, np.hypot(bx - expected.x, by - expected.y), np.inf)
    k = int(np.argmin(dist))  # row-major: deterministic tie-break
    if dist.flat[k] > max_offset:
        return None
    return PoleCandidate(expected.kind, (float(bx.flat[k]), float(by.flat[k])),
                         float(blo.flat[k]), float(bhi.flat[k]), 0.0, expected)


def _circle_center(xy: np.ndarray, fallback) -> tuple[float, float]:
    """Algebraic (Kasa) circle fit; falls back to the mean when ill-conditioned."""
    mean = xy.mean(axis=0)
    d = xy - mean
    a = np.column_stack((2 * d, np.ones(len(d))))
    b = (d ** 2).sum(axis=1)
    sol, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if rank < 3 or sv[-1] < 1e-9 * max(sv[0], 1e-12):
        return (float(mean[0]), float(mean[1]))
    return (float(mean[0] + sol[0]), float(mean[1] + sol[1]))


@dataclass
class RadiusEstimate:
    radius: float
    axis: tuple[float, float]
    n_points: int
    drift: float


def _fit_axis(pts: np.ndarray, start, reach: float, min_points: int, iterations: int):
    """Iterated circle fit of a vertical trunk among ``pts``.

    The first fit uses every point within ``reach`` of ``start``; later
    fits keep points within 1.5 times the median fitted distance (plus
    5 cm), which sheds nearby clutter such as parked bicycles.
    """
    center = (float(start[0]), float(start[1]))
    window = reach
    sel = pts[:0]
    for _ in range(max(iterations, 1)):
        d = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
        sel = pts[d <= window]
        if len(sel) < min_points:
            raise EstimationFailed(f"{len(sel)} trunk-band points, need {min_points}")
        new = _circle_center(sel[:, :2], center)
        if math.hypot(new[0] - center[0], new[1] - center[1]) > reach:
            new = tuple(sel[:, :2].mean(axis=0))
        center = (float(new[0]), float(new[1]))
        med = float(np.median(np.hypot(sel[:, 0] - center[0], sel[:, 1] - center[1])))
        window = min(reach, 1.5 * med + 0.05)
    d = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    sel = pts[d <= window]
    if len(sel) < min_points:
        raise EstimationFailed(f"{len(sel)} trunk-band points, need {min_points}")
    return center, sel


def estimate_radius(points, candidate: PoleCandidate, reach: float = 0.6, band=(0.5, 2.0),
                    percentile: float = 95.0, min_points: int = 10,
                    max_drift: Optional[float] = None, iterations: int = 3) -> RadiusEstimate:
    """Trunk radius from points in a height band above the candidate base.

    The axis is re-fitted (circle fit) to band points within ``reach`` of
    it; the radius is the given percentile of horizontal distances to the
    fitted axis.  With ``max_drift`` set, the lower and upper halves of
    the band are fitted separately and a larger horizontal offset between
    them (a leaning trunk) fails the estimate.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lo, hi = candidate.z_base + band[0], min(candidate.z_base + band[1], candidate.z_top)
    if hi <= lo:
        lo, hi = candidate.z_base, candidate.z_top
    in_band = pts[(pts[:, 2] >= lo) & (pts[:, 2] <= hi)]
    center, sel = _fit_axis(in_band, candidate.axis, reach, min_points, iterations)
    drift = 0.0
    if max_drift is not None:
        mid = 0.5 * (lo + hi)
        low, up = in_band[in_band[:, 2] < mid], in_band[in_band[:, 2] >= mid]
        half_min = max(min_points // 2, 3)
        try:
            c0, _ = _fit_axis(low, center, reach, half_min, iterations)
            c1, _ = _fit_axis(up, center, reach, half_min, iterations)
        except EstimationFailed:
            c0 = c1 = center
        drift = math.hypot(c1[0] - c0[0], c1[1] - c0[1])
        if drift > max_drift:
            raise EstimationFailed(f"trunk axis drifts {drift:.2f} m across the band")
    dist = np.hypot(sel[:, 0] - center[0], sel[:, 1] - center[1])
    return RadiusEstimate(float(np.percentile(dist, percentile)), center, int(len(sel)), drift)


def seed_label_cylinder(cloud: LabeledCloud, candidate: PoleCandidate, radius_factor: float = 1.1,
                        within: Optional[np.ndarray] = None) -> int:
    """Label Unlabelled points inside the candidate's vertical cylinder with its kind.

    ``within`` optionally restricts the scan to a superset of point indices.
    """
    if not candidate.radius > 0:
        raise ValueError("candidate radius must be positive")
    r = candidate.radius * radius_factor
    ax, ay = candidate.axis
    idx = np.arange(len(cloud)) if within is None else np.asarray(within, dtype=np.int64)
    x, y, z = cloud.x[idx], cloud.y[idx], cloud.z[idx]
    near = idx[(np.abs(x - ax) <= r) & (np.abs(y - ay) <= r)
               & (z >= candidate.z_base) & (z <= candidate.z_top)
               & (cloud.label[idx] == LabelCode.UNLABELLED)]
    if near.size == 0:
        return 0
    inside = near[np.hypot(cloud.x[near] - ax, cloud.y[near] - ay) <= r]
    cloud.label[inside] = np.uint8(POLE_CODES[candidate.kind])
    return int(inside.size)


@dataclass
class PoleOutcome:
    """Per-object diagnostics from :func:`label_poles`."""

    source: PointObject
    status: str
    candidate: Optional[PoleCandidate] = None
    offset: float = float("nan")
    seeded: int = 0


def label_poles(cloud: LabeledCloud, objects: Sequence[PointObject], ground_raster: ElevationRaster,
                half_extent: float = 1.5, cell_size: float = 0.15, min_height: float = 2.0,
                max_offset: float = 1.5, radius_max: Optional[dict] = None,
                base_tolerance: float = 0.5, radius_factor: float = 1.1,
                max_axis_drift: Optional[float] = 0.1, reach_margin: float = 0.15,
                outcomes: Optional[list] = None) -> int:
    """Search, measure and seed every mapped pole-like object in map order."""
    radius_max = dict(DEFAULT_RADIUS_MAX if radius_max is None else radius_max)
    x0, y0, x1, y1 = cloud.bounds
    free = np.flatnonzero(cloud.label == LabelCode.UNLABELLED)
    fx, fy = cloud.x[free], cloud.y[free]
    total = 0
    for obj in objects:
        if not (x0 - half_extent <= obj.x < x1 + half_extent and y0 - half_extent <= obj.y < y1 + half_extent):
            continue
        rec = PoleOutcome(obj, "no_points")
        # same selection as extract_search_area, over the pre-filtered free points
        near = free[(np.abs(fx - obj.x) <= half_extent + 0.6) & (np.abs(fy - obj.y) <= half_extent + 0.6)]
        near = near[cloud.label[near] == LabelCode.UNLABELLED]
        idx = near[(np.abs(cloud.x[near] - obj.x) <= half_extent) & (np.abs(cloud.y[near] - obj.y) <= half_extent)]
        if idx.size:
            pts = np.column_stack((cloud.x[idx], cloud.y[idx], cloud.z[idx]))
            nc = int(math.ceil(2 * half_extent / cell_size))
            stats = compute_grid_stats(pts, cell_size, (obj.x - half_extent, obj.y - half_extent), (nc, nc))
            gz = float(ground_raster.ground_at(np.array([obj.x]), np.array([obj.y]))[0])
            cand = detect_pole(stats, gz, min_height, max_offset, obj, base_tolerance)
            rec.status = "not_found"
            if cand is not None:
                rmax = radius_max[obj.kind]
                try:
                    est = estimate_radius(pts, cand, reach=rmax + reach_margin, max_drift=max_axis_drift)
                except EstimationFailed as exc:
                    rec.status = f"estimation_failed: {exc}"
                    cand = None
                else:
                    cand = replace(cand, axis=est.axis, radius=est.radius)
                    rec.candidate = cand
                    rec.offset = math.hypot(est.axis[0] - obj.x, est.axis[1] - obj.y)
                    if not 0 < est.radius < rmax:
                        rec.status = f"radius_out_of_range: {est.radius:.3f}"
                    else:
                        # the cylinder can reach past the window by up to one radius
                        if cand.radius * radius_factor <= 0.6:
                            rec.seeded = seed_label_cylinder(cloud, cand, radius_factor, within=near)
                        else:
                            rec.seeded = seed_label_cylinder(cloud, cand, radius_factor)
                        rec.status = "seeded"
                        total += rec.seeded
        if outcomes is not None:
            outcomes.append(rec)
    return total
