"""Voxel connected components and cluster-based region growing.

A voxel grid of edge ``v`` stands in for an octree level: for a tile of
size ``S`` the level ``L`` corresponds to ``v = S / 2**L``.  The grid is
anchored at the CRS origin, so a point's voxel depends only on its own
coordinates (partitions do not change when other points are added,
removed or reordered).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

from .core import LabelCode, LabeledCloud
from .raster import ElevationRaster

UNCLUSTERED = -1

# Half of the 26-neighbourhood; the other half is covered by symmetry.
_HALF_OFFSETS = [(di, dj, dk) for di in (-1, 0, 1) for dj in (-1, 0, 1) for dk in (-1, 0, 1)
                 if (di, dj, dk) > (0, 0, 0)]


@dataclass
class ClusterIndex:
    """Per-point cluster id; ``-1`` marks points outside the mask or in tiny clusters."""

    ids: np.ndarray
    voxel_size: float

    @property
    def n_clusters(self) -> int:
        return int(self.ids.max()) + 1 if self.ids.size and self.ids.max() >= 0 else 0

    def sizes(self) -> np.ndarray:
        valid = self.ids >= 0
        return np.bincount(self.ids[valid], minlength=self.n_clusters)

    def members(self) -> list[np.ndarray]:
        """Point indices of each cluster, in cluster-id order."""
        valid = np.flatnonzero(self.ids >= 0)
        if valid.size == 0:
            return []
        order = valid[np.argsort(self.ids[valid], kind="stable")]
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)


def voxel_coords(x, y, z, voxel_size: float) -> np.ndarray:
    """Integer voxel coordinates ``floor(p / v)`` as an ``(N, 3)`` array."""
    return np.column_stack([np.floor(np.asarray(c, dtype=np.float64) / voxel_size) for c in (x, y, z)]).astype(np.int64)


def voxel_components(ijk: np.ndarray) -> np.ndarray:
    """Component label per row of ``ijk`` under 26-connectivity of occupied voxels."""
    n = len(ijk)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    ijk = ijk - ijk.min(axis=0) + 1
    dims = ijk.max(axis=0) + 2
    if float(dims[0]) * float(dims[1]) * float(dims[2]) < 2 ** 62:
        stride = np.array([dims[1] * dims[2], dims[2], 1], dtype=np.int64)
        keys = ijk @ stride
        ukeys, inv = np.unique(keys, return_inverse=True)
        src, dst = [], []
        nv = len(ukeys)
        base = np.arange(nv)
        for off in _HALF_OFFSETS:
            nk = ukeys + int(np.dot(off, stride))
            pos = np.searchsorted(ukeys, nk)
            pos_c = np.minimum(pos, nv - 1)
            found = (pos < nv) & (ukeys[pos_c] == nk)
            src.append(base[found])
            dst.append(pos_c[found])
    else:  # extent too large for packed keys; fall back to row-wise unique
        uvox, inv = np.unique(ijk, axis=0, return_inverse=True)
        nv = len(uvox)
        lookup = {tuple(v): i for i, v in enumerate(uvox)}
        src, dst = [], []
        for i, v in enumerate(uvox):
            for off in _HALF_OFFSETS:
                j = lookup.get((v[0] + off[0], v[1] + off[1], v[2] + off[2]))
                if j is not None:
                    src.append(np.array([i]))
                    dst.append(np.array([j]))
    inv = inv.ravel()
    src = np.concatenate(src) if src else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst) if dst else np.zeros(0, dtype=np.int64)
    graph = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(nv, nv)).tocsr()
    _, vlab = _csgraph_components(graph, directed=False)
    return vlab[inv].astype(np.int64)


def connected_components(cloud: LabeledCloud, mask, voxel_size: float, min_points: int = 1) -> ClusterIndex:
    """Cluster the masked points by 26-connected voxel occupancy.

    Cluster ids are renumbered by the smallest point index they contain,
    so the output depends only on the point set, not on internal order.
    """
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(cloud),):
        raise ValueError("mask length must equal the number of points")
    ids = np.full(len(cloud), UNCLUSTERED, dtype=np.int64)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return ClusterIndex(ids, float(voxel_size))
    comp = voxel_components(voxel_coords(cloud.x[idx], cloud.y[idx], cloud.z[idx], voxel_size))
    ncomp = int(comp.max()) + 1
    sizes = np.bincount(comp, minlength=ncomp)
    _, first = np.unique(comp, return_index=True)  # first occurrence = smallest point index
    keep = sizes >= max(int(min_points), 1)
    order = np.argsort(first, kind="stable")
    order = order[keep[order]]
    remap = np.full(ncomp, UNCLUSTERED, dtype=np.int64)
    remap[order] = np.arange(order.size)
    ids[idx] = remap[comp]
    return ClusterIndex(ids, float(voxel_size))


def grow_label(cloud: LabeledCloud, clusters: ClusterIndex, target: LabelCode, threshold: float) -> int:
    """Promote whole clusters whose ``target`` fraction strictly exceeds ``threshold``.

    Only Unlabelled members change; points holding other labels keep them.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    ids = clusters.ids
    if ids.shape != (len(cloud),):
        raise ValueError("cluster index does not match the cloud")
    k = clusters.n_clusters
    if k == 0:
        return 0
    valid = ids >= 0
    size = np.bincount(ids[valid], minlength=k)
    hit = np.bincount(ids[valid & (cloud.label == target)], minlength=k)
    promote = hit > threshold * size
    if not promote.any():
        return 0
    sel = valid & (cloud.label == LabelCode.UNLABELLED)
    sel[sel] = promote[ids[sel]]
    cloud.label[sel] = np.uint8(target)
    return int(np.count_nonzero(sel))


@dataclass(frozen=True)
class GrowBand:
    """Height slice (relative to local ground) with its own clustering settings."""

    z_min: float
    z_max: float
    voxel_size: float
    threshold: float

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValueError(f"band needs z_min < z_max, got [{self.z_min}, {self.z_max})")
        if not self.voxel_size > 0:
            raise ValueError("band voxel_size must be positive")
        if not 0 < self.threshold <= 1:
            raise ValueError("band threshold must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "GrowBand":
        unknown = set(d) - {"z_min_m", "z_max_m", "voxel_m", "threshold"}
        if unknown:
            raise ValueError(f"unknown band keys: {sorted(unknown)}")
        z_max = d.get("z_max_m")
        return cls(float(d["z_min_m"]), math.inf if z_max is None else float(z_max),
                   float(d["voxel_m"]), float(d["threshold"]))

    def to_dict(self) -> dict:
        return {"z_min_m": self.z_min, "z_max_m": None if math.isinf(self.z_max) else self.z_max,
                "voxel_m": self.voxel_size, "threshold": self.threshold}


def validate_bands(bands: Sequence[GrowBand]) -> list[GrowBand]:
    ordered = sorted(bands, key=lambda b: b.z_min)
    for a, b in zip(ordered, ordered[1:]):
        if b.z_min < a.z_max:
            raise ValueError(f"grow bands overlap: [{a.z_min}, {a.z_max}) and [{b.z_min}, {b.z_max})")
    return ordered


def grow_banded(cloud: LabeledCloud, ground_raster: ElevationRaster, target: LabelCode,
                bands: Sequence[GrowBand], height: Optional[np.ndarray] = None) -> int:
    """Region growing per height band, lowest band first.

    ``height`` may carry precomputed height above the local ground; it is
    otherwise derived from the nearest-filled ground surface.
    """
    bands = validate_bands(bands)
    if height is None:
        height = cloud.z - ground_raster.ground_at(cloud.x, cloud.y)
    total = 0
    for band in bands:
        eligible = (cloud.label == LabelCode.UNLABELLED) | (cloud.label == target)
        eligible &= (height >= band.z_min) & (height < band.z_max)
        if not eligible.any():
            continue
        clusters = connected_components(cloud, eligible, band.voxel_size, 1)
        total += grow_label(cloud, clusters, target, band.threshold)
    return total
