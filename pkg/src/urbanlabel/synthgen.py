"""Deterministic synthetic street scenes with exact ground-truth labels.

A :class:`SceneSpec` describes ground, buildings, cars, pole-like objects
and clutter in tile-local meters.  :func:`build_scene` samples every
surface at the requested density and rasterises the matching ground and
roof grids (0.1 m) and topographical map; :func:`generate` writes them to
disk in the io formats.

Randomness is drawn from one counter-based Philox stream per object,
keyed on ``(seed, object id)``, so adding an object leaves the points of
every other object unchanged.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import io
from .core import LabelCode, LabeledCloud
from .raster import ElevationRaster
from .vector import PointObject, Polygon2D, TopoMap, inflate_polygon, points_in_polygon


class SpecError(ValueError):
    pass


# object-id blocks for the per-object random streams
_ID_GROUND, _ID_NOISE, _ID_MAP = 0, 1, 2
_ID_BUILDING, _ID_CAR, _ID_POLE, _ID_CLUTTER = 1000, 2000, 3000, 4000


def _rng(seed: int, object_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(object_id)])))


# --------------------------------------------------------------------------
# scene description

@dataclass
class GroundSpec:
    kind: str = "plane"  # plane | terrace
    z0: float = 1.0
    step_dz: float = 1.0  # terrace: height of the upper level above z0
    step_axis: str = "y"
    step_at: float = 25.0  # terrace: local coordinate where the upper level starts
    slope_x: float = 0.0
    slope_y: float = 0.0

    def validate(self):
        if self.kind not in ("plane", "terrace"):
            raise SpecError("ground.kind must be plane or terrace")
        if self.step_axis not in ("x", "y"):
            raise SpecError("ground.step_axis must be x or y")

    def height(self, x, y):
        """Ground height at tile-local coordinates."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        z = self.z0 + self.slope_x * x + self.slope_y * y
        if self.kind == "terrace":
            c = x if self.step_axis == "x" else y
            z = z + np.where(c >= self.step_at, self.step_dz, 0.0)
        return z


@dataclass
class BalconySpec:
    side: str  # south | north | west | east
    offset: float  # along the wall from its start corner
    width: float
    depth: float
    z_lo: float  # above the building base
    z_hi: float


@dataclass
class BuildingSpec:
    footprint: tuple  # (xmin, ymin, xmax, ymax) local
    height: float  # roof above the base (ground at the footprint center)
    balconies: list = field(default_factory=list)
    stale: bool = False  # missing from the elevation grids


@dataclass
class CarSpec:
    center: tuple
    dims: tuple = (4.4, 1.8, 1.5)  # length, width, height (roof above ground)
    yaw: float = 0.0
    on_road: bool = True
    clearance: float = 0.3


@dataclass
class PoleSpec:
    kind: str  # tree | lamp_post | traffic_sign
    location: tuple
    height: float
    radius: float
    lean_deg: float = 0.0
    lean_dir: float = 0.0  # radians
    crown_radius: float = 2.0  # tree
    arm_length: float = 1.0  # lamp_post
    arm_dir: float = 0.0
    plate: tuple = (0.6, 0.6)  # traffic_sign: width, height
    plate_dir: float = 0.0
    map_offset: tuple = (0.0, 0.0)  # extra displacement of the mapped coordinate


@dataclass
class ClutterSpec:
    kind: str  # bicycle | container | box
    center: tuple
    dims: tuple
    yaw: float = 0.0
    base: float = 0.0  # bottom above ground


@dataclass
class RoadSpec:
    polygon: list  # local (x, y) ring
    kind: str = "road"


@dataclass
class SceneSpec:
    seed: int = 0
    tile: tuple = (2386, 9702)
    tile_size: float = 50.0
    ground: GroundSpec = field(default_factory=GroundSpec)
    roads: list = field(default_factory=list)
    buildings: list = field(default_factory=list)
    cars: list = field(default_factory=list)
    poles: list = field(default_factory=list)
    clutter: list = field(default_factory=list)
    density: float = 1500.0
    noise_sigma: float = 0.02
    noise_points: int = 0  # below-ground reflections
    pole_offset: float = 0.0  # map displacement applied to every pole
    car_gaps: bool = True  # nodata under cars in the ground grid
    raster_cell: float = 0.1
    with_rgb: bool = False

    @property
    def origin(self) -> tuple[float, float]:
        return (self.tile[0] * self.tile_size, self.tile[1] * self.tile_size)

    def validate(self):
        self.ground.validate()
        if not self.density > 0:
            raise SpecError("density must be positive")
        if self.noise_sigma < 0:
            raise SpecError("noise_sigma must be >= 0")
        rects = [b.footprint for b in self.buildings]
        for i, a in enumerate(rects):
            if not (a[0] < a[2] and a[1] < a[3]):
                raise SpecError(f"building {i}: footprint must have xmin < xmax and ymin < ymax")
            for j in range(i):
                b = rects[j]
                if a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]:
                    raise SpecError(f"building footprints {j} and {i} overlap")
        for p in self.poles:
            if p.kind not in ("tree", "lamp_post", "traffic_sign"):
                raise SpecError(f"unknown pole kind {p.kind!r}")
            if not (p.radius > 0 and p.height > 0):
                raise SpecError("pole radius and height must be positive")
        for c in self.clutter:
            if c.kind not in ("bicycle", "container", "box"):
                raise SpecError(f"unknown clutter kind {c.kind!r}")
        for r in self.roads:
            if r.kind not in ("road", "parking"):
                raise SpecError(f"unknown road kind {r.kind!r}")
        polys = [Polygon2D(np.asarray(r.polygon, dtype=float)) for r in self.roads]
        for i, c in enumerate(self.cars):
            inside = any(points_in_polygon(p, np.array([c.center[0]]), np.array([c.center[1]]))[0] for p in polys)
            if inside != bool(c.on_road):
                raise SpecError(f"car {i}: on_road={c.on_road} but its center is "
                                f"{'inside' if inside else 'outside'} the road/parking polygons")

    # ---- (de)serialisation --------------------------------------------------

    def to_dict(self) -> dict:
        return _to_plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        data = dict(data or {})
        nested = {"ground": GroundSpec, "roads": RoadSpec, "buildings": BuildingSpec, "cars": CarSpec,
                  "poles": PoleSpec, "clutter": ClutterSpec}
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise SpecError(f"unknown scene key(s): {sorted(unknown)}")
        for k, v in data.items():
            if k == "ground":
                kwargs[k] = _build(GroundSpec, v, "ground")
            elif k in nested:
                items = []
                for i, item in enumerate(v or []):
                    obj = _build(nested[k], item, f"{k}[{i}]")
                    if k == "buildings":
                        obj.balconies = [_build(BalconySpec, b, f"{k}[{i}].balconies") for b in obj.balconies]
                    items.append(obj)
                kwargs[k] = items
            else:
                kwargs[k] = tuple(v) if isinstance(v, list) else v
        spec = cls(**kwargs)
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "SceneSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def _build(typ, data, where):
    if isinstance(data, typ):
        return data
    if not isinstance(data, dict):
        raise SpecError(f"{where} must be a mapping")
    names = {f.name for f in dataclasses.fields(typ)}
    unknown = set(data) - names
    if unknown:
        raise SpecError(f"unknown key(s) in {where}: {sorted(unknown)}")
    vals = {k: (tuple(v) if isinstance(v, list) and k not in ("polygon", "balconies") else v)
            for k, v in data.items()}
    try:
        return typ(**vals)
    except TypeError as exc:
        raise SpecError(f"{where}: {exc}") from None


def _to_plain(v):
    if isinstance(v, (list, tuple)):
        return [_to_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _to_plain(x) for k, x in v.items()}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# --------------------------------------------------------------------------
# surface samplers; each returns local (N, 3) points

def _jitter(rng, pts, sigma):
    if sigma > 0:
        pts = pts + rng.normal(0.0, sigma, size=pts.shape)
    return pts


def _count(area, density):
    return max(int(round(area * density)), 0)


def _rect_face(rng, n, origin, u, v):
    """n points uniform on the parallelogram origin + s*u + t*v."""
    s = rng.random(n)[:, None]
    t = rng.random(n)[:, None]
    return np.asarray(origin) + s * np.asarray(u) + t * np.asarray(v)


def _box_surface(rng, center_xy, dims, yaw, z_lo, z_hi, density, faces=("top", "sides"), bottom=False):
    """Points on an oriented box's top, four sides and optionally bottom."""
    length, width = dims[0], dims[1]
    h = z_hi - z_lo
    c, s = math.cos(yaw), math.sin(yaw)
    ex = np.array([c, s, 0.0]) * length
    ey = np.array([-s, c, 0.0]) * width
    ez = np.array([0.0, 0.0, h])
    corner = np.array([center_xy[0], center_xy[1], z_lo]) - 0.5 * ex - 0.5 * ey
    parts = []
    if "top" in faces:
        parts.append(_rect_face(rng, _count(length * width, density), corner + ez, ex, ey))
    if bottom:
        parts.append(_rect_face(rng, _count(length * width, density), corner, ex, ey))
    if "sides" in faces:
        parts.append(_rect_face(rng, _count(length * h, density), corner, ex, ez))
        parts.append(_rect_face(rng, _count(length * h, density), corner + ey, ex, ez))
        parts.append(_rect_face(rng, _count(width * h, density), corner, ey, ez))
        parts.append(_rect_face(rng, _count(width * h, density), corner + ex, ey, ez))
    return np.vstack(parts) if parts else np.zeros((0, 3))


def _cylinder(rng, base_xy, z0, z1, radius, density, lean_deg=0.0, lean_dir=0.0):
    """Vertical (optionally leaning) cylinder surface between z0 and z1."""
    n = _count(2 * math.pi * radius * (z1 - z0), density)
    z = z0 + rng.random(n) * (z1 - z0)
    a = rng.random(n) * 2 * math.pi
    drift = math.tan(math.radians(lean_deg)) * (z - z0)
    x = base_xy[0] + radius * np.cos(a) + drift * math.cos(lean_dir)
    y = base_xy[1] + radius * np.sin(a) + drift * math.sin(lean_dir)
    return np.column_stack((x, y, z))


def _horizontal_cylinder(rng, start, direction, length, radius, density):
    n = _count(2 * math.pi * radius * length, density)
    t = rng.random(n) * length
    a = rng.random(n) * 2 * math.pi
    d = np.array([math.cos(direction), math.sin(direction)])
    nrm = np.array([-d[1], d[0]])
    x = start[0] + t * d[0] + radius * np.cos(a) * nrm[0]
    y = start[1] + t * d[1] + radius * np.cos(a) * nrm[1]
    z = start[2] + radius * np.sin(a)
    return np.column_stack((x, y, z))


def _sphere_shell(rng, center, radius, density, inner=0.75):
    """Crown: points spread through a shell between inner*radius and radius."""
    n = _count(4 * math.pi * radius ** 2, density)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    r = radius * (inner + (1 - inner) * np.sqrt(rng.random(n)))
    return np.asarray(center) + v * r[:, None]


# --------------------------------------------------------------------------
# scene assembly

@dataclass
class Scene:
    spec: SceneSpec
    truth: LabeledCloud
    ground: ElevationRaster
    roof: ElevationRaster
    topo: TopoMap
    object_ids: np.ndarray  # generating object per point (-1 ground, -2 noise)

    def unlabelled(self) -> LabeledCloud:
        c = self.truth.copy()
        c.label[:] = 0
        return c


def _building_polygon(b: BuildingSpec) -> Polygon2D:
    return Polygon2D.rectangle(*b.footprint)


def building_roof_z(spec: SceneSpec, b: BuildingSpec) -> float:
    x0, y0, x1, y1 = b.footprint
    return float(spec.ground.height(0.5 * (x0 + x1), 0.5 * (y0 + y1))) + b.height


def _walls(rng, spec, b, density):
    x0, y0, x1, y1 = b.footprint
    top = building_roof_z(spec, b)
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    parts = []
    for (ax, ay), (bx, by) in zip(corners, corners[1:] + corners[:1]):
        length = math.hypot(bx - ax, by - ay)
        base_mid = float(spec.ground.height(0.5 * (ax + bx), 0.5 * (ay + by)))
        n = _count(length * max(top - base_mid, 0.0), density)
        t = rng.random(n)
        x = ax + t * (bx - ax)
        y = ay + t * (by - ay)
        base = spec.ground.height(x, y)
        z = base + rng.random(n) * (top - base)
        parts.append(np.column_stack((x, y, z)))
    return np.vstack(parts)


def _balcony(rng, spec, b, bal, density):
    x0, y0, x1, y1 = b.footprint
    base = float(spec.ground.height(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
    side = bal.side
    if side in ("south", "north"):
        yy = y0 if side == "south" else y1
        out = -1.0 if side == "south" else 1.0
        cx = x0 + bal.offset + 0.5 * bal.width
        cy = yy + out * 0.5 * bal.depth
        dims = (bal.width, bal.depth)
    elif side in ("west", "east"):
        xx = x0 if side == "west" else x1
        out = -1.0 if side == "west" else 1.0
        cx = xx + out * 0.5 * bal.depth
        cy = y0 + bal.offset + 0.5 * bal.width
        dims = (bal.depth, bal.width)
    else:
        raise SpecError(f"balcony side must be south/north/west/east, got {side!r}")
    pts = _box_surface(rng, (cx, cy), dims, 0.0, base + bal.z_lo, base + bal.z_hi, density, bottom=True)
    # drop the face glued to the wall
    if side in ("south", "north"):
        keep = np.abs(pts[:, 1] - yy) > 1e-9
    else:
        keep = np.abs(pts[:, 0] - xx) > 1e-9
    return pts[keep]


def _car(rng, spec, c, density):
    g = float(spec.ground.height(*c.center))
    return _box_surface(rng, c.center, c.dims[:2], c.yaw, g + c.clearance, g + c.dims[2], density)


def _pole(rng, spec, p, density):
    g = float(spec.ground.height(*p.location))
    bx, by = p.location
    parts = []
    if p.kind == "tree":
        crown_c = p.height - p.crown_radius  # crown center above ground
        parts.append(_cylinder(rng, (bx, by), g, g + crown_c, p.radius, density, p.lean_deg, p.lean_dir))
        drift = math.tan(math.radians(p.lean_deg)) * crown_c
        cx, cy = bx + drift * math.cos(p.lean_dir), by + drift * math.sin(p.lean_dir)
        parts.append(_sphere_shell(rng, (cx, cy, g + crown_c), p.crown_radius, density))
    elif p.kind == "lamp_post":
        top = g + p.height
        parts.append(_cylinder(rng, (bx, by), g, top, p.radius, density, p.lean_deg, p.lean_dir))
        arm_r = 0.04
        parts.append(_horizontal_cylinder(rng, (bx, by, top - arm_r), p.arm_dir, p.arm_length, arm_r, density))
        hx = bx + p.arm_length * math.cos(p.arm_dir)
        hy = by + p.arm_length * math.sin(p.arm_dir)
        parts.append(_box_surface(rng, (hx, hy), (0.6, 0.25), p.arm_dir, top - 2 * arm_r - 0.15,
                                  top - 2 * arm_r, density, bottom=True))
    else:  # traffic_sign
        top = g + p.height
        parts.append(_cylinder(rng, (bx, by), g, top, p.radius, density, p.lean_deg, p.lean_dir))
        w, h = p.plate
        d = np.array([math.cos(p.plate_dir), math.sin(p.plate_dir)])  # plate normal
        along = np.array([-d[1], d[0]])
        center = np.array([bx, by]) + d * (p.radius + 0.02)
        corner = np.array([center[0] - 0.5 * w * along[0], center[1] - 0.5 * w * along[1], top - h])
        n = _count(w * h, density)
        # both faces of a thin plate
        for side in (0.0, 0.01):
            parts.append(_rect_face(rng, n, corner + np.r_[d * side, 0.0], np.r_[along * w, 0.0], [0, 0, h]))
    return np.vstack(parts)


def _clutter(rng, spec, c, density):
    g = float(spec.ground.height(*c.center))
    return _box_surface(rng, c.center, c.dims[:2], c.yaw, g + c.base, g + c.base + c.dims[2], density)


_POLE_LABEL = {"tree": LabelCode.TREE, "lamp_post": LabelCode.LAMP_POST, "traffic_sign": LabelCode.TRAFFIC_SIGN}


def _colour(rng, label, n):
    base = {
        LabelCode.GROUND: (120, 100, 80), LabelCode.BUILDING: (170, 160, 150), LabelCode.CAR: (60, 60, 70),
        LabelCode.TREE: (60, 120, 50), LabelCode.LAMP_POST: (90, 90, 90), LabelCode.TRAFFIC_SIGN: (200, 40, 40),
        LabelCode.NOISE: (128, 128, 128), LabelCode.UNLABELLED: (100, 100, 120),
    }[label]
    return np.clip(np.asarray(base) + rng.integers(-20, 21, size=(n, 3)), 0, 255).astype(np.uint8)


def map_location(spec: SceneSpec, index: int) -> tuple[float, float]:
    """Mapped (topographical) coordinate of pole ``index``, local frame."""
    p = spec.poles[index]
    x = p.location[0] + p.map_offset[0]
    y = p.location[1] + p.map_offset[1]
    if spec.pole_offset:
        a = _rng(spec.seed, _ID_MAP + 10 * (index + 1)).random() * 2 * math.pi
        x += spec.pole_offset * math.cos(a)
        y += spec.pole_offset * math.sin(a)
    return x, y


def build_scene(spec: SceneSpec) -> Scene:
    spec.validate()
    ox, oy = spec.origin
    S = spec.tile_size
    rho = spec.density
    sigma = spec.noise_sigma
    footprints = [_building_polygon(b) for b in spec.buildings]

    chunks = []  # (points local, label, object id)

    # ground, minus building interiors
    rng = _rng(spec.seed, _ID_GROUND)
    n = _count(S * S, rho)
    xy = rng.random((n, 2)) * S
    keep = np.ones(n, dtype=bool)
    for fp in footprints:
        keep &= ~points_in_polygon(fp, xy[:, 0], xy[:, 1])
    xy = xy[keep]
    gz = spec.ground.height(xy[:, 0], xy[:, 1])
    pts = np.column_stack((xy, gz))
    pts[:, 2] += rng.normal(0.0, sigma, len(pts)) if sigma > 0 else 0.0
    chunks.append((pts, LabelCode.GROUND, -1))

    for i, b in enumerate(spec.buildings):
        rng = _rng(spec.seed, _ID_BUILDING + i)
        parts = [_walls(rng, spec, b, rho)] + [_balcony(rng, spec, b, bal, rho) for bal in b.balconies]
        chunks.append((_jitter(rng, np.vstack(parts), sigma), LabelCode.BUILDING, _ID_BUILDING + i))
    for i, c in enumerate(spec.cars):
        rng = _rng(spec.seed, _ID_CAR + i)
        chunks.append((_jitter(rng, _car(rng, spec, c, rho), sigma), LabelCode.CAR, _ID_CAR + i))
    for i, p in enumerate(spec.poles):
        rng = _rng(spec.seed, _ID_POLE + i)
        chunks.append((_jitter(rng, _pole(rng, spec, p, rho), sigma), _POLE_LABEL[p.kind], _ID_POLE + i))
    for i, c in enumerate(spec.clutter):
        rng = _rng(spec.seed, _ID_CLUTTER + i)
        chunks.append((_jitter(rng, _clutter(rng, spec, c, rho), sigma), LabelCode.UNLABELLED, _ID_CLUTTER + i))
    if spec.noise_points:
        rng = _rng(spec.seed, _ID_NOISE)
        xy = rng.random((spec.noise_points, 2)) * S
        keep = np.ones(len(xy), dtype=bool)
        for fp in footprints:
            # the ground grid is nodata under a footprint and its bilinear query is undefined
            # within a cell of the edge, so no surface exists to be below there
            near = inflate_polygon(fp, 1.5 * spec.raster_cell)
            keep &= ~points_in_polygon(near, xy[:, 0], xy[:, 1])
        xy = xy[keep]
        z = spec.ground.height(xy[:, 0], xy[:, 1]) - rng.uniform(0.5, 3.0, len(xy))
        chunks.append((np.column_stack((xy, z)), LabelCode.NOISE, -2))

    pts = np.vstack([c[0] for c in chunks])
    label = np.concatenate([np.full(len(c[0]), int(c[1]), dtype=np.uint8) for c in chunks])
    oid = np.concatenate([np.full(len(c[0]), c[2], dtype=np.int64) for c in chunks])
    inside = (pts[:, 0] >= 0) & (pts[:, 0] < S) & (pts[:, 1] >= 0) & (pts[:, 1] < S)
    # round to the millimetre grid the CSV format stores
    pts = np.round(pts[inside] + np.array([ox, oy, 0.0]), 3)
    # rounding can land exactly on the far tile edge
    pts[:, 0] = np.minimum(pts[:, 0], ox + S - 0.001)
    pts[:, 1] = np.minimum(pts[:, 1], oy + S - 0.001)
    label, oid = label[inside], oid[inside]
    rgb = None
    if spec.with_rgb:
        rng = _rng(spec.seed, _ID_MAP + 1)
        rgb = np.zeros((len(pts), 3), dtype=np.uint8)
        for code in np.unique(label):
            m = label == code
            rgb[m] = _colour(rng, LabelCode(int(code)), int(m.sum()))
    truth = LabeledCloud(pts[:, 0], pts[:, 1], pts[:, 2], label, rgb, None, (ox, oy), S)

    ground, roof = _rasters(spec, footprints)
    topo = _topo(spec, footprints)
    return Scene(spec, truth, ground, roof, topo, oid)


def _rasters(spec, footprints):
    ox, oy = spec.origin
    cs = spec.raster_cell
    n = int(round(spec.tile_size / cs))
    cx = (np.arange(n) + 0.5) * cs
    gx, gy = np.meshgrid(cx, cx)  # row i -> y index i (south to north)
    ground = spec.ground.height(gx, gy).astype(np.float64)
    roof = np.full_like(ground, np.nan)
    for b, fp in zip(spec.buildings, footprints):
        inside = points_in_polygon(fp, gx.ravel(), gy.ravel()).reshape(gx.shape)
        if b.stale:
            continue
        ground[inside] = np.nan
        roof[inside] = building_roof_z(spec, b)
    if spec.car_gaps:
        for c in spec.cars + [k for k in spec.clutter if k.kind == "container"]:
            car = Polygon2D(_oriented_rect(c.center, c.dims[0], c.dims[1], c.yaw))
            inside = points_in_polygon(car, gx.ravel(), gy.ravel()).reshape(gx.shape)
            ground[inside] = np.nan
    return (ElevationRaster((ox, oy), cs, np.round(ground, 3)),
            ElevationRaster((ox, oy), cs, np.round(roof, 3)))


def _oriented_rect(center, length, width, yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    hx = np.array([c, s]) * length / 2
    hy = np.array([-s, c]) * width / 2
    ctr = np.asarray(center, dtype=float)
    return np.array([ctr - hx - hy, ctr + hx - hy, ctr + hx + hy, ctr - hx + hy])


def _topo(spec, footprints):
    ox, oy = spec.origin
    shift = np.array([ox, oy])
    fps = [Polygon2D(fp.exterior + shift) for fp in footprints]
    roads = [(Polygon2D(np.asarray(r.polygon, dtype=float) + shift), r.kind) for r in spec.roads]
    points = []
    for i, p in enumerate(spec.poles):
        mx, my = map_location(spec, i)
        points.append(PointObject(p.kind, ox + mx, oy + my))
    return TopoMap(fps, roads, points)


def generate(spec: SceneSpec, out_dir) -> dict:
    """Write truth/unlabelled clouds, ground/roof grids and the topo map; return their paths."""
    scene = build_scene(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = io.tile_name(*spec.tile)
    paths = {
        "truth": out / f"truth_{name}.csv",
        "cloud": out / f"cloud_{name}.csv",
        "ground": out / f"ground_{name}.asc",
        "roof": out / f"roof_{name}.asc",
        "topo": out / f"topo_{name}.geojson",
    }
    io.write_cloud_csv(scene.truth, paths["truth"])
    _write_unlabelled(scene.truth, paths["cloud"])
    io.write_raster_asc(scene.ground, paths["ground"])
    io.write_raster_asc(scene.roof, paths["roof"])
    io.write_topo_geojson(scene.topo, paths["topo"])
    with open(out / f"scene_{name}.yaml", "w", encoding="utf-8") as fh:
        fh.write(spec.dump())
    return {k: str(v) for k, v in paths.items()}


def _write_unlabelled(cloud, path):
    import polars as pl

    data = {"x": cloud.x, "y": cloud.y, "z": cloud.z}
    if cloud.rgb is not None:
        for i, c in enumerate(("red", "green", "blue")):
            data[c] = cloud.rgb[:, i].astype(np.int64)
    with open(path, "wb") as fh:
        pl.DataFrame(data).write_csv(fh, float_precision=3, line_terminator="\n")


# --------------------------------------------------------------------------
# ready-made scenes

def _sidewalk_poles(rng, kinds, y, xs_taken, x_lo=4.0, x_hi=46.0, min_gap=7.0):
    out = []
    for kind in kinds:
        for _ in range(200):
            x = float(rng.uniform(x_lo, x_hi))
            if all(abs(x - t) >= min_gap for t in xs_taken):
                xs_taken.append(x)
                out.append((kind, x, y))
                break
    return out


def demo_spec(seed: int = 7, density: float = 1500.0) -> SceneSpec:
    """Street with 2 buildings, 3 cars, 2 trees, 1 lamp post and 1 traffic sign."""
    road = RoadSpec([(0, 20), (50, 20), (50, 27), (0, 27)], "road")
    parking = RoadSpec([(5, 27), (30, 27), (30, 29.5), (5, 29.5)], "parking")
    return SceneSpec(
        seed=seed, density=density, noise_points=2000,
        roads=[road, parking],
        buildings=[
            BuildingSpec((3, 37, 21, 48), 12.0, [BalconySpec("south", 4.0, 3.0, 1.2, 4.0, 5.0)]),
            BuildingSpec((26, 3, 44, 13), 9.0),
        ],
        cars=[CarSpec((12, 22, ), (4.4, 1.8, 1.5), 0.05), CarSpec((36, 25.2), (4.6, 1.85, 1.55), -0.03),
              CarSpec((20, 28.25), (4.2, 1.75, 1.45), 0.0)],
        poles=[
            PoleSpec("tree", (8, 17), 9.0, 0.25, crown_radius=2.2),
            PoleSpec("tree", (40, 32), 8.5, 0.2, crown_radius=2.0),
            PoleSpec("lamp_post", (24, 17.5), 5.5, 0.08, arm_length=1.0, arm_dir=math.pi / 2),
            PoleSpec("traffic_sign", (30, 31.5), 3.15, 0.04, plate=(0.6, 0.6), plate_dir=-math.pi / 2),
        ],
        clutter=[ClutterSpec("bicycle", (24.0, 16.55), (1.7, 0.5, 1.0), 0.0, 0.05)],
    )


def suite_spec(index: int, density: float = 500.0) -> SceneSpec:
    """One of the fixed acceptance scenes: a street with varied buildings, cars, poles and clutter."""
    seed = 1000 + index
    rng = np.random.default_rng(seed)
    S = 50.0
    y_r0 = float(rng.uniform(19.0, 22.0))
    y_r1 = y_r0 + 7.0
    terrace = index % 3 == 1
    sidewalk_n = y_r1 + 2.5
    ground = GroundSpec("terrace", 1.0 + 0.2 * index, float(rng.uniform(0.6, 1.5)), "y", sidewalk_n) if terrace \
        else GroundSpec("plane", 1.0 + 0.2 * index, slope_x=float(rng.uniform(-0.01, 0.01)))
    roads = [RoadSpec([(0, y_r0), (S, y_r0), (S, y_r1), (0, y_r1)], "road")]
    px0 = float(rng.uniform(3.0, 12.0))
    roads.append(RoadSpec([(px0, y_r1), (px0 + 24.0, y_r1), (px0 + 24.0, sidewalk_n), (px0, sidewalk_n)], "parking"))

    # buildings: north row starts 6 m behind the parking strip, south row ends 6 m before the road
    buildings = []
    north_y0, south_y1 = sidewalk_n + 6.0, y_r0 - 6.0
    for row in ("north", "south"):
        x = float(rng.uniform(1.0, 4.0))
        while x < 40.0 and len(buildings) < 4:
            w = float(rng.uniform(8.0, 16.0))
            if x + w > 49.0:
                break
            depth = float(rng.uniform(7.0, 10.0))
            ymin, ymax = (north_y0, min(north_y0 + depth, 49.0)) if row == "north" else (max(south_y1 - depth, 1.0), south_y1)
            if ymax - ymin < 6.0:
                break
            h = float(rng.uniform(6.0, 16.0))
            balconies = []
            if rng.random() < 0.6:
                bw = float(rng.uniform(2.0, min(4.0, w - 2.0)))
                side = "south" if row == "north" else "north"
                balconies.append(BalconySpec(side, float(rng.uniform(0.5, w - bw - 0.5)), bw,
                                             float(rng.uniform(1.0, 1.4)), 3.6, 4.6))
            buildings.append(BuildingSpec((x, ymin, x + w, ymax), h, balconies))
            x += w + float(rng.uniform(3.0, 6.0))

    # cars on both lanes and in the parking strip
    cars = []
    lane_ys = [y_r0 + 1.75, y_r0 + 5.25]
    slots = []
    for ly in lane_ys:
        for cx in (8.0, 20.0, 32.0, 44.0):
            slots.append((cx + float(rng.uniform(-2, 2)), ly, float(rng.uniform(-0.08, 0.08))))
    for k in range(3):
        slots.append((px0 + 3.5 + 6.0 * k + float(rng.uniform(-0.3, 0.3)), y_r1 + 1.25, 0.0))
    order = rng.permutation(len(slots))
    n_cars = int(rng.integers(3, 6))
    placed = []
    container = None
    for k in order:
        sx, sy, yaw = slots[k]
        if any(abs(sx - px) < 6.0 and abs(sy - py) < 2.5 for px, py in placed):
            continue
        if len(cars) >= n_cars:
            if container is None and sy > y_r1 and index % 2 == 0:
                container = ClutterSpec("container", (sx, sy), (6.0, 2.4, 2.6), 0.0)
                placed.append((sx, sy))
            continue
        length = float(rng.uniform(3.8, 4.9))
        cars.append(CarSpec((sx, sy), (length, float(rng.uniform(1.7, 1.95)), float(rng.uniform(1.4, 1.8))), yaw))
        placed.append((sx, sy))

    # pole-like objects on both sidewalks
    poles, clutter = [], []
    taken_n, taken_s = [], []
    kinds_n = ["tree", "lamp_post", "traffic_sign"]
    kinds_s = ["tree", "lamp_post"] + (["traffic_sign"] if index % 2 else ["tree"])
    rng.shuffle(kinds_n)
    rng.shuffle(kinds_s)
    y_pole_n, y_pole_s = sidewalk_n + 2.0, y_r0 - 2.0
    for kind, x, y in (_sidewalk_poles(rng, kinds_n, y_pole_n, taken_n)
                       + _sidewalk_poles(rng, kinds_s, y_pole_s, taken_s)):
        toward_road = -math.pi / 2 if y > y_r0 else math.pi / 2
        if kind == "tree":
            # crown clear of facades: 6 m sidewalk, crown radius <= 2.2
            rc = float(rng.uniform(1.6, 2.2))
            poles.append(PoleSpec("tree", (x, y), float(rng.uniform(7.5, 10.0)), float(rng.uniform(0.15, 0.3)),
                                  crown_radius=rc))
        elif kind == "lamp_post":
            poles.append(PoleSpec("lamp_post", (x, y), float(rng.uniform(5.0, 6.0)), float(rng.uniform(0.06, 0.1)),
                                  arm_length=1.0, arm_dir=toward_road))
        else:
            poles.append(PoleSpec("traffic_sign", (x, y), 3.15, 0.04, plate=(0.6, 0.6), plate_dir=toward_road))
        if kind != "tree" and rng.random() < 0.5:
            # bicycle parked next to the pole, 0.35 m from its surface
            r = poles[-1].radius
            clutter.append(ClutterSpec("bicycle", (x + r + 0.35 + 0.85, y), (1.7, 0.5, 1.0), 0.0, 0.05))
    return SceneSpec(seed=seed, tile=(2386 + index, 9702), ground=ground, roads=roads, buildings=buildings,
                     cars=cars, poles=poles, clutter=clutter + ([container] if container else []),
                     density=density, noise_points=int(0.002 * S * S * density))


def perf_spec(n_points: int, seed: int = 11) -> SceneSpec:
    """Street scene scaled by density to roughly ``n_points`` points."""
    probe = demo_spec(seed, density=1.0)
    per_unit = _expected_points(probe)
    return demo_spec(seed, density=n_points / per_unit)


def _expected_points(spec: SceneSpec) -> float:
    """Sampled surface area in m² (point count at unit density), before tile clipping."""
    S = spec.tile_size
    area = S * S - sum((b.footprint[2] - b.footprint[0]) * (b.footprint[3] - b.footprint[1]) for b in spec.buildings)
    for b in spec.buildings:
        x0, y0, x1, y1 = b.footprint
        area += 2 * ((x1 - x0) + (y1 - y0)) * b.height
        for bal in b.balconies:
            h = bal.z_hi - bal.z_lo
            area += 2 * bal.width * bal.depth + (bal.width + 2 * bal.depth) * h
    for c in spec.cars:
        l, w, h = c.dims
        area += l * w + 2 * (l + w) * (h - c.clearance)
    for p in spec.poles:
        if p.kind == "tree":
            area += 2 * math.pi * p.radius * (p.height - p.crown_radius) + 4 * math.pi * p.crown_radius ** 2
        else:
            area += 2 * math.pi * p.radius * p.height + 1.5
    for c in spec.clutter:
        l, w, h = c.dims
        area += l * w + 2 * (l + w) * h
    return area
