"""2D geometry over the topographical map.

Polygons are stored with a counter-clockwise exterior and clockwise
holes.  Point-in-polygon uses the even-odd rule with boundary points
counted as inside.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

POLE_KINDS = ("tree", "lamp_post", "traffic_sign")
SURFACE_KINDS = ("road", "parking")

_EPS = 1e-9


class GeometryError(ValueError):
    pass


def signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _clean_ring(coords) -> np.ndarray:
    ring = np.asarray(coords, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise GeometryError("ring must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(ring)):
        raise GeometryError("ring has non-finite coordinates")
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    # drop consecutive duplicates
    keep = np.ones(len(ring), dtype=bool)
    keep[1:] = np.any(ring[1:] != ring[:-1], axis=1)
    ring = ring[keep]
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    if len(np.unique(ring, axis=0)) < 3:
        raise GeometryError("ring needs at least 3 distinct vertices")
    return ring


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) <= _EPS else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - _EPS <= c[0] <= max(a[0], b[0]) + _EPS
                and min(a[1], b[1]) - _EPS <= c[1] <= max(a[1], b[1]) + _EPS)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def ring_is_simple(ring: np.ndarray) -> bool:
    """O(n^2) check that no two non-adjacent edges touch."""
    n = len(ring)
    if abs(signed_area(ring)) <= _EPS:
        return False
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a, b, ring[j], ring[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True)
class Polygon2D:
    exterior: np.ndarray
    holes: tuple = ()

    def __post_init__(self):
        ext = _clean_ring(self.exterior)
        if not ring_is_simple(ext):
            raise GeometryError("exterior ring is not simple")
        if signed_area(ext) < 0:
            ext = ext[::-1].copy()
        holes = []
        for h in self.holes:
            h = _clean_ring(h)
            if not ring_is_simple(h):
                raise GeometryError("hole ring is not simple")
            if signed_area(h) > 0:
                h = h[::-1].copy()
            holes.append(h)
        ext.setflags(write=False)
        for h in holes:
            h.setflags(write=False)
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", tuple(holes))

    @property
    def rings(self) -> tuple:
        return (self.exterior,) + self.holes

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        e = self.exterior
        return (float(e[:, 0].min()), float(e[:, 1].min()), float(e[:, 0].max()), float(e[:, 1].max()))

    @property
    def area(self) -> float:
        return signed_area(self.exterior) + sum(signed_area(h) for h in self.holes)

    def contains(self, x, y) -> np.ndarray:
        return points_in_polygon(self, x, y)

    def to_coords(self) -> list:
        """GeoJSON-style closed rings."""
        out = []
        for r in self.rings:
            pts = [[float(a), float(b)] for a, b in r]
            out.append(pts + [pts[0]])
        return out

    @classmethod
    def rectangle(cls, xmin, ymin, xmax, ymax) -> "Polygon2D":
        return cls(np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=float))


@dataclass(frozen=True)
class PointObject:
    kind: str
    x: float
    y: float

    def __post_init__(self):
        if self.kind not in POLE_KINDS:
            raise GeometryError(f"point object kind must be one of {POLE_KINDS}, got {self.kind!r}")


def point_in_polygon(poly: Polygon2D, x: float, y: float) -> bool:
    """Even-odd ray casting; points on any ring count as inside."""
    inside = False
    for ring in poly.rings:
        n = len(ring)
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if (abs(cross) <= _EPS * max(1.0, abs(x2 - x1) + abs(y2 - y1))
                    and min(x1, x2) - _EPS <= x <= max(x1, x2) + _EPS
                    and min(y1, y2) - _EPS <= y <= max(y1, y2) + _EPS):
                return True
            if (y1 > y) != (y2 > y):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x < xint:
                    inside = not inside
    return inside


def points_in_polygon(poly: Polygon2D, x, y) -> np.ndarray:
    """Vectorised :func:`point_in_polygon` for coordinate arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = np.zeros(x.shape, dtype=bool)
    on_edge = np.zeros(x.shape, dtype=bool)
    xmin, ymin, xmax, ymax = poly.bbox
    cand = np.flatnonzero((x >= xmin - _EPS) & (x <= xmax + _EPS) & (y >= ymin - _EPS) & (y <= ymax + _EPS))
    if cand.size == 0:
        return inside
    # Sorted by y, each edge only touches the points inside its own y band.
    cand = cand[np.argsort(y[cand], kind="stable")]
    px, py = x[cand], y[cand]
    acc = np.zeros(cand.size, dtype=bool)
    edge = np.zeros(cand.size, dtype=bool)
    for ring in poly.rings:
        nxt = np.roll(ring, -1, axis=0)
        for (x1, y1), (x2, y2) in zip(ring, nxt):
            lo = np.searchsorted(py, min(y1, y2) - _EPS, side="left")
            hi = np.searchsorted(py, max(y1, y2) + _EPS, side="right")
            if lo == hi:
                continue
            bx, by = px[lo:hi], py[lo:hi]
            straddle = (y1 > by) != (y2 > by)
            if straddle.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    xint = x1 + (by - y1) * (x2 - x1) / (y2 - y1)
                acc[lo:hi] ^= straddle & (bx < xint)
            cross = (x2 - x1) * (by - y1) - (y2 - y1) * (bx - x1)
            tol = _EPS * max(1.0, abs(x2 - x1) + abs(y2 - y1))
            edge[lo:hi] |= ((np.abs(cross) <= tol)
                            & (bx >= min(x1, x2) - _EPS) & (bx <= max(x1, x2) + _EPS))
    inside[cand] = acc | edge
    return inside


def inflate_polygon(poly: Polygon2D, d: float, max_arc_step_deg: float = 5.0) -> Polygon2D:
    """Minkowski sum of the polygon with a disc of radius ``d``.

    Round joins are approximated by chords spanning at most
    ``max_arc_step_deg`` degrees, with vertices on the true arc.
    """
    if d < 0:
        raise ValueError("inflation distance must be >= 0 (shrinking is not supported)")
    if d == 0:
        return poly
    import shapely.geometry as sg

    quad_segs = max(1, math.ceil(90.0 / max_arc_step_deg))
    shp = sg.Polygon(poly.exterior, [h for h in poly.holes])
    out = shp.buffer(d, quad_segs=quad_segs, join_style="round")
    if out.geom_type != "Polygon":
        # buffering a valid polygon outward cannot split it
        out = max(out.geoms, key=lambda g: g.area)
    return Polygon2D(np.asarray(out.exterior.coords), tuple(np.asarray(r.coords) for r in out.interiors))


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices (Andrew's monotone chain).

    An octagon pre-filter discards interior points first so large clusters
    stay cheap.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) > 64:
        s, t = pts[:, 0] + pts[:, 1], pts[:, 0] - pts[:, 1]
        ext = np.array([pts[:, 0].argmin(), pts[:, 0].argmax(), pts[:, 1].argmin(), pts[:, 1].argmax(),
                        s.argmin(), s.argmax(), t.argmin(), t.argmax()])
        octo = pts[ext]
        octo = octo[np.unique(octo, axis=0, return_index=True)[1]]
        if len(octo) >= 3:
            octo = octo[np.argsort(np.arctan2(octo[:, 1] - octo[:, 1].mean(), octo[:, 0] - octo[:, 0].mean()))]
            strictly_in = np.ones(len(pts), dtype=bool)
            m = len(octo)
            for i in range(m):
                a, b = octo[i], octo[(i + 1) % m]
                cr = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
                strictly_in &= cr > 0
            pts = pts[~strictly_in]
    pts = np.unique(pts, axis=0)  # lexicographic sort
    if len(pts) <= 2:
        return pts

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    seq = [tuple(p) for p in pts]
    lower = half(seq)
    upper = half(reversed(seq))
    hull = np.array(lower[:-1] + upper[:-1], dtype=np.float64)
    return hull


def min_bounding_rect(points) -> tuple[float, float, float]:
    """Minimum-area enclosing rectangle as ``(length, width, angle)``.

    Rotating calipers over the convex hull: for every hull edge the
    support points in the edge direction and its normal advance
    monotonically.  ``length >= width``; ``angle`` is the direction of the
    long side in ``[0, pi)``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("min_bounding_rect needs at least one point")
    hull = convex_hull(pts)
    h = len(hull)
    if h == 1:
        return 0.0, 0.0, 0.0
    if h == 2:
        dx, dy = hull[1] - hull[0]
        return float(math.hypot(dx, dy)), 0.0, float(math.atan2(dy, dx) % math.pi)

    edges = np.roll(hull, -1, axis=0) - hull
    lens = np.hypot(edges[:, 0], edges[:, 1])
    units = edges / lens[:, None]

    def proj(k, u):
        return hull[k % h, 0] * u[0] + hull[k % h, 1] * u[1]

    best = None
    # caliper indices: far along edge, far along normal, far against edge
    j = k = m = None
    for i in range(h):
        u = units[i]
        nrm = (-u[1], u[0])  # inward normal for a ccw hull
        if j is None:
            j = max(range(h), key=lambda q: proj(q, u))
            k = max(range(h), key=lambda q: proj(q, nrm))
            m = min(range(h), key=lambda q: proj(q, u))
        else:
            while proj(j + 1, u) > proj(j, u) + _EPS:
                j += 1
            while proj(k + 1, nrm) > proj(k, nrm) + _EPS:
                k += 1
            while proj(m + 1, u) < proj(m, u) - _EPS:
                m += 1
        length = proj(j, u) - proj(m, u)
        width = proj(k, nrm) - proj(i, nrm)
        area = length * width
        if best is None or area < best[0] - 1e-12 * max(1.0, best[0]):
            best = (area, length, width, math.atan2(u[1], u[0]))
    _, a, b, ang = best
    if b > a:
        a, b = b, a
        ang += math.pi / 2
    ang %= math.pi
    if math.isclose(ang, math.pi, abs_tol=1e-12):
        ang = 0.0
    return float(a), float(b), float(ang)


class GridIndex:
    """Uniform-grid bucket index over geometry bounding boxes."""

    def __init__(self, cell_size: float = 10.0):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self._buckets: dict[tuple[int, int], list] = defaultdict(list)
        self._boxes: dict = {}

    def __len__(self) -> int:
        return len(self._boxes)

    def _cells(self, box):
        cs = self.cell_size
        i0, j0 = math.floor(box[0] / cs), math.floor(box[1] / cs)
        i1, j1 = math.floor(box[2] / cs), math.floor(box[3] / cs)
        return i0, j0, i1, j1

    def insert(self, gid, box) -> None:
        self._boxes[gid] = tuple(float(v) for v in box)
        i0, j0, i1, j1 = self._cells(box)
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                self._buckets[(i, j)].append(gid)

    def query(self, box) -> list:
        xmin, ymin, xmax, ymax = box
        if xmin > xmax or ymin > ymax:
            raise ValueError("query box must satisfy xmin <= xmax and ymin <= ymax")
        if not self._boxes:
            return []
        i0, j0, i1, j1 = self._cells(box)
        # Clamp huge query boxes to the populated cell range.
        keys = self._buckets.keys()
        ki = [k[0] for k in keys]
        kj = [k[1] for k in keys]
        i0, i1 = max(i0, min(ki)), min(i1, max(ki))
        j0, j1 = max(j0, min(kj)), min(j1, max(kj))
        seen = []
        found = set()
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                for gid in self._buckets.get((i, j), ()):
                    if gid in found:
                        continue
                    b = self._boxes[gid]
                    if b[0] <= xmax and b[2] >= xmin and b[1] <= ymax and b[3] >= ymin:
                        found.add(gid)
                        seen.append(gid)
        return sorted(seen)


@dataclass
class TopoMap:
    """Footprints, road/parking surfaces and mapped pole objects.

    Geometry ids are ``("footprint", i)``, ``("road", i)`` and
    ``("point", i)`` indices into the respective lists.
    """

    footprints: list = field(default_factory=list)
    roads: list = field(default_factory=list)  # (Polygon2D, "road" | "parking")
    point_objects: list = field(default_factory=list)
    index_cell: float = 10.0

    def __post_init__(self):
        for _, tag in self.roads:
            if tag not in SURFACE_KINDS:
                raise GeometryError(f"road surface tag must be one of {SURFACE_KINDS}, got {tag!r}")
        self.index = GridIndex(self.index_cell)
        for i, p in enumerate(self.footprints):
            self.index.insert(("footprint", i), p.bbox)
        for i, (p, _) in enumerate(self.roads):
            self.index.insert(("road", i), p.bbox)
        for i, o in enumerate(self.point_objects):
            self.index.insert(("point", i), (o.x, o.y, o.x, o.y))

    def geometry(self, gid):
        layer, i = gid
        if layer == "footprint":
            return self.footprints[i]
        if layer == "road":
            return self.roads[i]
        return self.point_objects[i]


def query_index(topo: TopoMap, box) -> list:
    """Candidate geometry ids whose bounding box meets ``box``."""
    return topo.index.query(box)
