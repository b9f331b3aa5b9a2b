"""Readers and writers for tiles, elevation grids and the topographical map.

All readers are strict: a row, header line or feature they cannot
interpret aborts the load with a :class:`ParseError` naming its location.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from pathlib import Path
from typing import Optional

import numpy as np
import polars as pl

from .core import DEFAULT_TILE_SIZE, LabeledCloud, is_valid_code
from .raster import ElevationRaster
from .vector import (POLE_KINDS, SURFACE_KINDS, GeometryError, PointObject,
                     Polygon2D, TopoMap)


class ParseError(ValueError):
    pass


TILE_RE = re.compile(r"(?:^|_)(-?\d+)_(-?\d+)$")

CLOUD_COLUMNS = ("x", "y", "z", "red", "green", "blue", "intensity", "label")


def parse_tile_name(path) -> Optional[tuple[int, int]]:
    """Tile index ``(tx, ty)`` from a ``..._<tx>_<ty>.<ext>`` filename, if present."""
    m = TILE_RE.search(Path(path).stem)
    if not m:
        return None
    return int(m.group(1)), int(m.group(2))


def tile_origin(tx: int, ty: int, tile_size: float = DEFAULT_TILE_SIZE) -> tuple[float, float]:
    return (tx * tile_size, ty * tile_size)


def tile_name(tx: int, ty: int) -> str:
    return f"{tx}_{ty}"


# --------------------------------------------------------------------------
# point clouds

def _locate_bad_cell(path, columns):
    """Slow pass that names the first offending data row (1-based, header excluded)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        pos = {c: header.index(c) for c in columns}
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                return rownum, f"expected {len(header)} fields, found {len(row)}"
            for c, i in pos.items():
                cell = row[i].strip()
                try:
                    v = float(cell)
                except ValueError:
                    return rownum, f"non-numeric value {cell!r} in column {c!r}"
                if not math.isfinite(v):
                    return rownum, f"non-finite value {cell!r} in column {c!r}"
                if c in ("label", "red", "green", "blue") and v != int(v):
                    return rownum, f"non-integer value {cell!r} in column {c!r}"
    return None, "unreadable file"


def read_cloud_csv(path, tile: Optional[tuple[int, int]] = None,
                   tile_size: float = DEFAULT_TILE_SIZE) -> LabeledCloud:
    """Load a tile from CSV.

    The tile index comes from ``tile`` or the filename (``cloud_<tx>_<ty>.csv``).
    Without either, the origin snaps the data's lower-left corner to the
    tile grid.  Points must lie inside the tile.
    """
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.strip():
        raise ParseError(f"{path}: missing header row")
    header = [h.strip() for h in first.rstrip("\r\n").split(",")]
    missing = [c for c in ("x", "y", "z") if c not in header]
    if missing:
        raise ParseError(f"{path}: missing mandatory column(s) {','.join(missing)}")
    unknown = [c for c in header if c not in CLOUD_COLUMNS]
    if unknown:
        raise ParseError(f"{path}: unknown column(s) {','.join(unknown)}")
    if len(set(header)) != len(header):
        raise ParseError(f"{path}: duplicate column names")
    has_rgb = [c in header for c in ("red", "green", "blue")]
    if any(has_rgb) and not all(has_rgb):
        raise ParseError(f"{path}: red, green and blue must appear together")

    try:
        df = pl.read_csv(path, schema_overrides={c: pl.Float64 for c in header},
                         infer_schema_length=0, raise_if_empty=False)
        if df.width != len(header):
            raise ValueError("column count mismatch")
        if df.height and any(df[c].null_count() for c in header):
            raise ValueError("empty cell")
    except Exception as exc:  # polars raises several types; re-locate precisely
        row, why = _locate_bad_cell(path, header)
        where = f"row {row}" if row is not None else "data"
        raise ParseError(f"{path}: {where}: {why}") from exc

    cols = {c: df[c].to_numpy() if df.height else np.zeros(0) for c in header}
    for c in header:
        bad = ~np.isfinite(cols[c])
        if bad.any():
            raise ParseError(f"{path}: row {int(np.argmax(bad)) + 1}: non-finite value in column {c!r}")
    label = None
    if "label" in cols:
        lab = cols["label"]
        bad = (lab != np.round(lab)) | ~is_valid_code(np.round(lab).astype(np.int64))
        if bad.any():
            i = int(np.argmax(bad))
            raise ParseError(f"{path}: row {i + 1}: invalid label code {lab[i]:g}")
        label = lab.astype(np.uint8)
    rgb = None
    if all(has_rgb):
        rgb = np.column_stack([cols["red"], cols["green"], cols["blue"]])
        bad = ((rgb < 0) | (rgb > 255) | (rgb != np.round(rgb))).any(axis=1)
        if bad.any():
            raise ParseError(f"{path}: row {int(np.argmax(bad)) + 1}: colour must be an integer in [0, 255]")
    intensity = cols.get("intensity")

    x, y = cols["x"], cols["y"]
    if tile is None:
        tile = parse_tile_name(path)
    if tile is not None:
        origin = tile_origin(*tile, tile_size)
    elif len(x):
        origin = (math.floor(x.min() / tile_size) * tile_size, math.floor(y.min() / tile_size) * tile_size)
    else:
        origin = (0.0, 0.0)
    cloud = LabeledCloud(x, y, cols["z"], label, rgb, intensity, origin, tile_size)
    outside = ~cloud.in_tile()
    if outside.any():
        i = int(np.argmax(outside))
        raise ParseError(f"{path}: row {i + 1}: point ({x[i]:.3f}, {y[i]:.3f}) outside tile "
                         f"{cloud.bounds}")
    return cloud


def write_cloud_csv(cloud: LabeledCloud, path) -> None:
    """Write ``x,y,z[,red,green,blue][,intensity],label`` with millimetre precision."""
    data = {"x": cloud.x, "y": cloud.y, "z": cloud.z}
    if cloud.rgb is not None:
        data["red"] = cloud.rgb[:, 0].astype(np.int64)
        data["green"] = cloud.rgb[:, 1].astype(np.int64)
        data["blue"] = cloud.rgb[:, 2].astype(np.int64)
    if cloud.intensity is not None:
        data["intensity"] = cloud.intensity
    data["label"] = cloud.label.astype(np.int64)
    df = pl.DataFrame(data)
    with open(path, "wb") as fh:
        df.write_csv(fh, float_precision=3, line_terminator="\n")


# --------------------------------------------------------------------------
# elevation grids

_ASC_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_raster_asc(path) -> ElevationRaster:
    """Read an Esri ASCII grid; cells equal to NODATA_value become nodata."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    head = {}
    i = 0
    while i < len(lines) and len(head) < 6:
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key in ("xllcenter", "yllcenter"):
            raise ParseError(f"{path}: line {i + 1}: cell-center origins are not supported")
        if key not in _ASC_KEYS or len(parts) != 2:
            raise ParseError(f"{path}: line {i + 1}: malformed header line {lines[i]!r}")
        if key in head:
            raise ParseError(f"{path}: line {i + 1}: duplicate header key {parts[0]}")
        try:
            head[key] = float(parts[1])
        except ValueError:
            raise ParseError(f"{path}: line {i + 1}: non-numeric header value {parts[1]!r}") from None
        i += 1
    if len(head) < 6:
        raise ParseError(f"{path}: header must define {', '.join(_ASC_KEYS)}")
    ncols, nrows = head["ncols"], head["nrows"]
    if ncols != int(ncols) or nrows != int(nrows) or ncols < 1 or nrows < 1:
        raise ParseError(f"{path}: ncols/nrows must be positive integers")
    ncols, nrows = int(ncols), int(nrows)
    if not head["cellsize"] > 0:
        raise ParseError(f"{path}: cellsize must be positive")
    body = [ln for ln in lines[i:]]
    rows = []
    for k, ln in enumerate(body):
        parts = ln.split()
        if not parts:
            continue
        if len(parts) != ncols:
            raise ParseError(f"{path}: line {i + k + 1}: expected {ncols} values, found {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"{path}: line {i + k + 1}: non-numeric grid value") from None
    if len(rows) != nrows:
        raise ParseError(f"{path}: expected {nrows} grid rows, found {len(rows)}")
    values = np.array(rows[::-1], dtype=np.float64)  # file lists the northern row first
    nodata = head["nodata_value"]
    values[values == nodata] = np.nan
    return ElevationRaster((head["xllcorner"], head["yllcorner"]), head["cellsize"], values, nodata)


def write_raster_asc(raster: ElevationRaster, path, fmt: str = "%.3f") -> None:
    nodata = raster.nodata_value
    out = np.where(raster.mask, nodata, raster.values)[::-1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"ncols {raster.ncols}\n")
        fh.write(f"nrows {raster.nrows}\n")
        fh.write(f"xllcorner {raster.origin[0]:.6f}\n")
        fh.write(f"yllcorner {raster.origin[1]:.6f}\n")
        fh.write(f"cellsize {raster.cell_size:.6f}\n")
        fh.write(f"NODATA_value {nodata:g}\n")
        np.savetxt(fh, out, fmt=fmt, delimiter=" ")


# --------------------------------------------------------------------------
# topographical map

def _polygons(geom, where):
    gtype = geom.get("type")
    coords = geom.get("coordinates")
    if gtype == "Polygon":
        parts = [coords]
    elif gtype == "MultiPolygon":
        parts = coords
    else:
        raise ParseError(f"{where}: expected Polygon or MultiPolygon, got {gtype}")
    out = []
    for rings in parts:
        if not rings:
            raise ParseError(f"{where}: empty polygon")
        try:
            out.append(Polygon2D(np.asarray(rings[0], dtype=float)[:, :2],
                                 tuple(np.asarray(h, dtype=float)[:, :2] for h in rings[1:])))
        except (GeometryError, IndexError, ValueError, TypeError) as exc:
            raise ParseError(f"{where}: invalid polygon: {exc}") from None
    return out


def read_topo_geojson(path) -> TopoMap:
    """Load footprints, road/parking surfaces and pole coordinates."""
    path = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError(f"{path}: expected a GeoJSON FeatureCollection")
    footprints, roads, points = [], [], []
    for i, feat in enumerate(doc.get("features", [])):
        where = f"{path}: feature {i}"
        if not isinstance(feat, dict) or feat.get("type") != "Feature":
            raise ParseError(f"{where}: not a Feature")
        kind = (feat.get("properties") or {}).get("kind")
        geom = feat.get("geometry") or {}
        if kind == "building":
            footprints.extend(_polygons(geom, where))
        elif kind in SURFACE_KINDS:
            roads.extend((p, kind) for p in _polygons(geom, where))
        elif kind in POLE_KINDS:
            if geom.get("type") != "Point":
                raise ParseError(f"{where}: kind {kind} requires Point geometry, got {geom.get('type')}")
            c = geom.get("coordinates")
            try:
                x, y = float(c[0]), float(c[1])
            except (TypeError, ValueError, IndexError):
                raise ParseError(f"{where}: invalid Point coordinates") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError(f"{where}: invalid Point coordinates")
            points.append(PointObject(kind, x, y))
        else:
            raise ParseError(f"{where}: unknown kind {kind!r}")
    return TopoMap(footprints, roads, points)


def write_topo_geojson(topo: TopoMap, path) -> None:
    feats = []
    for p in topo.footprints:
        feats.append({"type": "Feature", "properties": {"kind": "building"},
                      "geometry": {"type": "Polygon", "coordinates": p.to_coords()}})
    for p, tag in topo.roads:
        feats.append({"type": "Feature", "properties": {"kind": tag},
                      "geometry": {"type": "Polygon", "coordinates": p.to_coords()}})
    for o in topo.point_objects:
        feats.append({"type": "Feature", "properties": {"kind": o.kind},
                      "geometry": {"type": "Point", "coordinates": [float(o.x), float(o.y)]}})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, indent=1)
        fh.write("\n")
