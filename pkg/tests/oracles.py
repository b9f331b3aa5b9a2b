"""Independent brute-force oracles used to check the package's kernels."""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def mbr_rotation_scan(points, step=1e-3):
    """Minimum enclosing-rectangle area over angles sampled every ``step`` rad in [0, pi/2)."""
    p = np.asarray(points, dtype=float)
    best = math.inf
    for a in np.arange(0.0, math.pi / 2, step):
        c, s = math.cos(a), math.sin(a)
        u = p[:, 0] * c + p[:, 1] * s
        v = -p[:, 0] * s + p[:, 1] * c
        best = min(best, (u.max() - u.min()) * (v.max() - v.min()))
    return best


def _rect_areas(p, angles):
    c, s = np.cos(angles)[:, None], np.sin(angles)[:, None]
    u = p[:, 0] * c + p[:, 1] * s
    v = -p[:, 0] * s + p[:, 1] * c
    return (u.max(1) - u.min(1)) * (v.max(1) - v.min(1))


def mbr_rotation_scan_refined(points, step=1e-3, fine=1e-7, candidates=8):
    """Rotation scan at ``step``, then a ``fine`` rescan around its ``candidates`` best local minima.

    A coarse scan alone carries a first-order error of about ``step / 2``
    relative, because the optimum sits at a kink of the area function.
    """
    p = np.asarray(points, dtype=float)
    coarse = np.arange(0.0, math.pi / 2, step)
    a = np.concatenate([_rect_areas(p, coarse[k:k + 2000]) for k in range(0, len(coarse), 2000)])
    prev, nxt = np.roll(a, 1), np.roll(a, -1)
    minima = np.flatnonzero((a <= prev) & (a <= nxt))
    best = minima[np.argsort(a[minima])[:candidates]]
    out = float(a.min())
    offsets = np.arange(-step, step + fine, fine)
    for k in best:
        angs = coarse[k] + offsets
        for j in range(0, len(angs), 2000):
            out = min(out, float(_rect_areas(p, angs[j:j + 2000]).min()))
    return out


def mbr_pair_directions(points):
    """Exact minimum area: some side of the optimal rectangle is parallel to a point-pair direction."""
    p = np.asarray(points, dtype=float)
    best = math.inf
    n = len(p)
    for i in range(n):
        d = p[i + 1:] - p[i]
        ang = np.arctan2(d[:, 1], d[:, 0])
        for a in ang:
            c, s = math.cos(a), math.sin(a)
            u = p[:, 0] * c + p[:, 1] * s
            v = -p[:, 0] * s + p[:, 1] * c
            best = min(best, (u.max() - u.min()) * (v.max() - v.min()))
    return best


def union_find_partition(points, voxel):
    """O(N^2) union-find over pairs whose voxels touch (26-connectivity)."""
    p = np.asarray(points, dtype=float)
    ijk = np.floor(p / voxel).astype(np.int64)
    parent = list(range(len(p)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(len(p)):
        # all pairs (i, j > i), one row at a time
        touching = np.flatnonzero(np.all(np.abs(ijk[i + 1:] - ijk[i]) <= 1, axis=1)) + i + 1
        for j in touching:
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    return canonical_partition([find(i) for i in range(len(p))])


def canonical_partition(ids):
    """Relabel ids by first occurrence so equal partitions compare equal; -1 stays -1."""
    out, seen = [], {}
    for v in ids:
        if v == -1:
            out.append(-1)
            continue
        if v not in seen:
            seen[v] = len(seen)
        out.append(seen[v])
    return out


def winding_number(ring, x, y):
    """Winding number of a closed ring around (x, y); ring given without repeated closing vertex."""
    r = np.asarray(ring, dtype=float)
    wn = 0
    for k in range(len(r)):
        (x0, y0), (x1, y1) = r[k], r[(k + 1) % len(r)]
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y:
            if y1 > y and cross > 0:
                wn += 1
        elif y1 <= y and cross < 0:
            wn -= 1
    return wn


def monte_carlo_area(contains, bbox, n=2_000_000, seed=0):
    """Area estimate by uniform sampling of ``bbox``; ``contains(x, y)`` is vectorized."""
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = bbox
    x = rng.uniform(x0, x1, n)
    y = rng.uniform(y0, y1, n)
    frac = np.count_nonzero(contains(x, y)) / n
    return frac * (x1 - x0) * (y1 - y0)


def stratified_area(contains, bbox, n_side=2000, seed=0):
    """Monte-Carlo area with one uniform sample per cell of an ``n_side`` x ``n_side`` grid.

    Stratification confines the sampling variance to cells crossed by the
    boundary, so 4M samples resolve area to a few parts in 1e5.
    """
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = bbox
    hx, hy = (x1 - x0) / n_side, (y1 - y0) / n_side
    hits = 0
    for row in range(0, n_side, 250):
        rows = np.arange(row, min(row + 250, n_side))
        gi, gj = np.meshgrid(rows, np.arange(n_side), indexing="ij")
        x = x0 + (gj + rng.random(gj.shape)) * hx
        y = y0 + (gi + rng.random(gi.shape)) * hy
        hits += int(np.count_nonzero(contains(x.ravel(), y.ravel())))
    return hits * hx * hy


def buffer_membership(ring, d):
    """Exact membership test for the round-joined offset region of a simple polygon."""
    r = np.asarray(ring, dtype=float)

    def contains(x, y):
        inside = np.zeros(x.shape, dtype=bool)
        # even-odd crossing test
        n = len(r)
        for k in range(n):
            (x0, y0), (x1, y1) = r[k], r[(k + 1) % n]
            cond = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= cond & (x < xi)
        dmin = np.full(x.shape, np.inf)
        for k in range(n):
            a, b = r[k], r[(k + 1) % n]
            ab = b - a
            t = np.clip(((x - a[0]) * ab[0] + (y - a[1]) * ab[1]) / (ab @ ab), 0, 1)
            dmin = np.minimum(dmin, np.hypot(x - a[0] - t * ab[0], y - a[1] - t * ab[1]))
        return inside | (dmin <= d)

    return contains


def laplace_direct(values, unknown):
    """Solve the 4-neighbor discrete Laplace equation on ``unknown`` cells with a sparse direct solver.

    Neighbors outside the grid are omitted (Neumann boundary).
    """
    nr, nc = values.shape
    idx = -np.ones((nr, nc), dtype=np.int64)
    cells = np.argwhere(unknown)
    idx[unknown] = np.arange(len(cells))
    rows, cols, data = [], [], []
    rhs = np.zeros(len(cells))
    for k, (i, j) in enumerate(cells):
        deg = 0
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if not (0 <= a < nr and 0 <= b < nc):
                continue
            deg += 1
            if unknown[a, b]:
                rows.append(k)
                cols.append(idx[a, b])
                data.append(-1.0)
            else:
                rhs[k] += values[a, b]
        rows.append(k)
        cols.append(k)
        data.append(float(deg))
    m = sp.csr_matrix((data, (rows, cols)), shape=(len(cells), len(cells)))
    out = values.copy()
    out[unknown] = spla.spsolve(m, rhs)
    return out
