"""Building labelling from inflated footprints with a roof-height cutoff."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import LabelCode, LabeledCloud
from ..raster import ElevationRaster
from ..vector import GridIndex, Polygon2D, inflate_polygon, points_in_polygon

ROOF_LOOKUPS = ("max4", "bilinear")
MISSING_ROOF_MODES = ("footprint", "ignore_cutoff")


def footprint_roof_height(poly: Polygon2D, roof_raster: ElevationRaster) -> float:
    """Highest roof cell whose center lies in the footprint; NaN if none has data."""
    xmin, ymin, xmax, ymax = poly.bbox
    cx, cy = roof_raster.cell_centers()
    ci = np.flatnonzero((cx >= xmin) & (cx <= xmax))
    ri = np.flatnonzero((cy >= ymin) & (cy <= ymax))
    if ci.size == 0 or ri.size == 0:
        return float("nan")
    sub = roof_raster.values[np.ix_(ri, ci)]
    gx, gy = np.meshgrid(cx[ci], cy[ri])
    inside = points_in_polygon(poly, gx.ravel(), gy.ravel()).reshape(sub.shape)
    vals = sub[inside & ~np.isnan(sub)]
    return float(vals.max()) if vals.size else float("nan")


def label_buildings(cloud: LabeledCloud, footprints: Sequence[Polygon2D], roof_raster: ElevationRaster,
                    inflate_d: float = 0.5, roof_margin: float = 0.25, roof_lookup: str = "max4",
                    missing_roof: str = "footprint") -> int:
    """Label Unlabelled points inside inflated footprints and below the roof.

    ``missing_roof="footprint"`` uses the footprint's own roof height where
    the grid has no cell data at a point, and skips footprints that have
    no roof data at all (elevation outdated).  ``"ignore_cutoff"`` drops the
    cutoff wherever the grid is nodata.
    """
    if inflate_d < 0 or roof_margin < 0:
        raise ValueError("inflate_d and roof_margin must be >= 0")
    if roof_lookup not in ROOF_LOOKUPS:
        raise ValueError(f"roof_lookup must be one of {ROOF_LOOKUPS}")
    if missing_roof not in MISSING_ROOF_MODES:
        raise ValueError(f"missing_roof must be one of {MISSING_ROOF_MODES}")

    x0, y0, x1, y1 = cloud.bounds
    index = GridIndex(10.0)
    for i, p in enumerate(footprints):
        index.insert(i, p.bbox)
    ids = index.query((x0 - inflate_d, y0 - inflate_d, x1 + inflate_d, y1 + inflate_d))
    if not ids:
        return 0

    free = np.flatnonzero(cloud.label == LabelCode.UNLABELLED)
    order = free[np.argsort(cloud.x[free], kind="stable")]
    xs = cloud.x[order]
    hits = []
    for i in ids:
        poly = footprints[i]
        fallback = float("nan")
        if missing_roof == "footprint":
            fallback = footprint_roof_height(poly, roof_raster)
            if np.isnan(fallback):
                continue
        big = inflate_polygon(poly, inflate_d)
        bx0, by0, bx1, by1 = big.bbox
        lo = np.searchsorted(xs, bx0, side="left")
        hi = np.searchsorted(xs, bx1, side="right")
        cand = order[lo:hi]
        cand = cand[(cloud.y[cand] >= by0) & (cloud.y[cand] <= by1)]
        if cand.size == 0:
            continue
        cand = cand[points_in_polygon(big, cloud.x[cand], cloud.y[cand])]
        if cand.size == 0:
            continue
        px, py = cloud.x[cand], cloud.y[cand]
        roof = roof_raster.query_max4(px, py) if roof_lookup == "max4" else roof_raster.query(px, py)
        if missing_roof == "footprint":
            roof = np.where(np.isnan(roof), fallback, roof)
            keep = cloud.z[cand] <= roof + roof_margin
        else:
            with np.errstate(invalid="ignore"):
                keep = np.isnan(roof) | (cloud.z[cand] <= roof + roof_margin)
        hits.append(cand[keep])
    if not hits:
        return 0
    sel = np.unique(np.concatenate(hits))
    sel = sel[cloud.label[sel] == LabelCode.UNLABELLED]
    cloud.label[sel] = np.uint8(LabelCode.BUILDING)
    return int(sel.size)
