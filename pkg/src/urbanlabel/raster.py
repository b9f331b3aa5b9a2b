"""Elevation grids: point queries and gap filling.

Rows are stored south to north (row 0 is the lowest y), unlike the Esri
ASCII file layout which lists the northern row first.  Nodata cells are
NaN in ``values`` and True in ``mask``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import linalg as splinalg

_CHUNK = 1 << 18


@dataclass(frozen=True)
class ElevationRaster:
    origin: tuple[float, float]
    cell_size: float
    values: np.ndarray
    nodata_value: float = -9999.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("raster needs at least one row and one column")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        values[~np.isfinite(values)] = np.nan
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, y0, x0 + self.ncols * self.cell_size, y0 + self.nrows * self.cell_size)

    def covers(self, bounds, tol: float = 1e-6) -> bool:
        x0, y0, x1, y1 = self.extent
        bx0, by0, bx1, by1 = bounds
        return bx0 >= x0 - tol and by0 >= y0 - tol and bx1 <= x1 + tol and by1 <= y1 + tol

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """1-D arrays of cell-center x (per column) and y (per row)."""
        cs = self.cell_size
        return (self.origin[0] + (np.arange(self.ncols) + 0.5) * cs,
                self.origin[1] + (np.arange(self.nrows) + 0.5) * cs)

    def cell_index(self, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row/col of the cell containing each point, plus an inside-extent flag."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        col = np.floor((x - self.origin[0]) / self.cell_size).astype(np.int64)
        row = np.floor((y - self.origin[1]) / self.cell_size).astype(np.int64)
        inside = (col >= 0) & (col < self.ncols) & (row >= 0) & (row < self.nrows)
        return row, col, inside

    def _corners(self, x, y):
        # Surrounding cell centers; clamping extends the edge half-cells flat.
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        x0, y0, x1, y1 = self.extent
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        fc = np.clip((x - self.origin[0]) / self.cell_size - 0.5, 0.0, self.ncols - 1)
        fr = np.clip((y - self.origin[1]) / self.cell_size - 0.5, 0.0, self.nrows - 1)
        c0 = np.minimum(np.floor(fc).astype(np.int64), max(self.ncols - 2, 0))
        r0 = np.minimum(np.floor(fr).astype(np.int64), max(self.nrows - 2, 0))
        c1 = np.minimum(c0 + 1, self.ncols - 1)
        r1 = np.minimum(r0 + 1, self.nrows - 1)
        return inside, fc - c0, fr - r0, r0, r1, c0, c1

    def query(self, x, y) -> np.ndarray:
        """Bilinear height at each (x, y); NaN outside the extent or next to nodata."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim == 1 and x.size > _CHUNK:
            # bounded temporaries keep large tiles in cache
            out = np.empty(x.shape)
            for k in range(0, x.size, _CHUNK):
                out[k:k + _CHUNK] = self._query(x[k:k + _CHUNK], y[k:k + _CHUNK])
            return out
        return self._query(x, y)

    def _query(self, x, y) -> np.ndarray:
        inside, tx, ty, r0, r1, c0, c1 = self._corners(x, y)
        v = self.values
        z = np.zeros(np.shape(tx))
        for w, val in (((1 - tx) * (1 - ty), v[r0, c0]), (tx * (1 - ty), v[r0, c1]),
                       ((1 - tx) * ty, v[r1, c0]), (tx * ty, v[r1, c1])):
            # a nodata corner with positive weight makes the result nodata
            z += np.where(w > 0, w * val, 0.0)
        return np.where(inside, z, np.nan)

    def query_max4(self, x, y) -> np.ndarray:
        """Maximum over the four surrounding cells that hold data; NaN if none."""
        inside, _, _, r0, r1, c0, c1 = self._corners(x, y)
        v = self.values
        with np.errstate(invalid="ignore"):
            stacked = np.stack((v[r0, c0], v[r0, c1], v[r1, c0], v[r1, c1]))
            allnan = np.all(np.isnan(stacked), axis=0)
            z = np.nanmax(np.where(allnan, -np.inf, stacked), axis=0)
        return np.where(inside & ~allnan, z, np.nan)

    @cached_property
    def nearest_filled(self) -> "ElevationRaster":
        """Copy where every nodata cell takes the value of its nearest data cell.

        Used for height-above-ground normalisation, never for labelling
        decisions that need a measured surface.
        """
        mask = self.mask
        if not mask.any() or mask.all():
            return self
        idx = ndimage.distance_transform_edt(mask, return_distances=False, return_indices=True)
        filled = self.values[idx[0], idx[1]]
        return ElevationRaster(self.origin, self.cell_size, filled, self.nodata_value)

    def ground_at(self, x, y) -> np.ndarray:
        """Height of the nearest-filled surface; points off the grid use the closest edge."""
        src = self.nearest_filled
        x0, y0, x1, y1 = src.extent
        eps = 1e-9
        return src.query(np.clip(x, x0, x1 - eps), np.clip(y, y0, y1 - eps))


def query_z(raster: ElevationRaster, x: float, y: float) -> float:
    """Scalar bilinear lookup; returns NaN for nodata."""
    return float(raster.query(np.array([x]), np.array([y]))[0])


def _solve_region(values, unknown):
    """Discrete Laplace equation on the ``unknown`` cells of a small crop, solved directly.

    ``values`` holds data on the fixed cells; NaN cells that are not
    unknown (and the crop edge) act as no-flux edges.  Each unknown cell
    equals the mean of its valid 4-neighbors.
    """
    nr, nc = values.shape
    valid = ~np.isnan(values) | unknown
    idx = np.full(values.shape, -1, dtype=np.int64)
    cells = np.flatnonzero(unknown.ravel())
    idx.ravel()[cells] = np.arange(cells.size)
    ui, uj = np.divmod(cells, nc)
    rows, cols, data = [], [], []
    deg = np.zeros(cells.size)
    rhs = np.zeros(cells.size)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a, b = ui + di, uj + dj
        inside = (a >= 0) & (a < nr) & (b >= 0) & (b < nc)
        k = np.flatnonzero(inside)
        a, b = a[inside], b[inside]
        ok = valid[a, b]
        k, a, b = k[ok], a[ok], b[ok]
        deg[k] += 1.0
        nb = idx[a, b]
        free = nb >= 0
        rows.append(k[free])
        cols.append(nb[free])
        data.append(np.full(int(free.sum()), -1.0))
        np.add.at(rhs, k[~free], values[a[~free], b[~free]])
    rows.append(np.arange(cells.size))
    cols.append(np.arange(cells.size))
    data.append(deg)
    m = sparse.csc_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(cells.size, cells.size))
    return splinalg.spsolve(m, rhs)


def fill_gaps(raster: ElevationRaster, max_gap_cells: int) -> ElevationRaster:
    """Fill small nodata regions with the discrete harmonic interpolant.

    A region (8-connected nodata cells) is filled when none of its cells is
    further than ``max_gap_cells`` from data in the Chebyshev metric.  Data
    cells act as the fixed boundary and are never modified.  The result
    is clipped to the range of the region's 4-adjacent boundary data,
    which the exact solution already satisfies up to rounding.
    """
    if max_gap_cells < 0:
        raise ValueError("max_gap_cells must be >= 0")
    mask = raster.mask
    if not mask.any() or mask.all() or max_gap_cells == 0:
        return raster
    dist = ndimage.distance_transform_cdt(mask, metric="chessboard")
    labels, nreg = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    region_max = ndimage.maximum(dist, labels, index=np.arange(1, nreg + 1))
    fillable = np.flatnonzero(region_max <= max_gap_cells) + 1
    if fillable.size == 0:
        return raster

    values = raster.values.copy()
    slices = ndimage.find_objects(labels)
    four = ndimage.generate_binary_structure(2, 1)
    for reg in fillable:
        sl = slices[reg - 1]
        r0 = max(sl[0].start - 1, 0)
        r1 = min(sl[0].stop + 1, raster.nrows)
        c0 = max(sl[1].start - 1, 0)
        c1 = min(sl[1].stop + 1, raster.ncols)
        lab = labels[r0:r1, c0:c1]
        unknown = lab == reg
        crop = raster.values[r0:r1, c0:c1].copy()
        crop[lab > 0] = np.nan
        boundary = ndimage.binary_dilation(unknown, structure=four) & ~unknown & ~np.isnan(crop)
        lo, hi = float(crop[boundary].min()), float(crop[boundary].max())
        solved = np.clip(_solve_region(crop, unknown), lo, hi)
        values[r0:r1, c0:c1][unknown] = solved
    return ElevationRaster(raster.origin, raster.cell_size, values, raster.nodata_value)
