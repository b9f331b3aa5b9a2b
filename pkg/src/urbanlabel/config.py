"""Run configuration: every threshold of the pipeline in one structured file.

Files are YAML (JSON is accepted as a subset).  Unknown keys are
rejected and ranges are validated on load.  ``PipelineConfig().to_dict()``
is the full default configuration printed by ``print-config``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .growing import GrowBand, validate_bands

MODULES = ("fill_gaps", "ground", "noise", "building", "car", "pole", "grow_building", "grow_pole")


class ConfigError(ValueError):
    pass


def _range(value, name):
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a [min, max] pair") from None
    if not 0 < lo <= hi:
        raise ConfigError(f"{name} must satisfy 0 < min <= max, got [{lo}, {hi}]")
    return (lo, hi)


def _positive(value, name, allow_zero=False):
    v = float(value)
    if not (v >= 0 if allow_zero else v > 0):
        raise ConfigError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {v}")
    return v


def _fraction(value, name):
    v = float(value)
    if not 0 < v <= 1:
        raise ConfigError(f"{name} must lie in (0, 1], got {v}")
    return v


@dataclass
class RasterConfig:
    max_gap_cells: int = 25
    fill_roof: bool = True

    def validate(self):
        if int(self.max_gap_cells) != self.max_gap_cells or self.max_gap_cells < 0:
            raise ConfigError("raster.max_gap_cells must be an integer >= 0")
        self.max_gap_cells = int(self.max_gap_cells)


@dataclass
class GroundConfig:
    margin_m: float = 0.25
    noise_margin_m: float = 0.25

    def validate(self):
        self.margin_m = _positive(self.margin_m, "ground.margin_m")
        self.noise_margin_m = _positive(self.noise_margin_m, "ground.noise_margin_m")


@dataclass
class BuildingConfig:
    inflate_m: float = 0.5
    roof_margin_m: float = 0.25
    roof_lookup: str = "max4"
    missing_roof: str = "footprint"

    def validate(self):
        self.inflate_m = _positive(self.inflate_m, "building.inflate_m", allow_zero=True)
        self.roof_margin_m = _positive(self.roof_margin_m, "building.roof_margin_m", allow_zero=True)
        if self.roof_lookup not in ("max4", "bilinear"):
            raise ConfigError("building.roof_lookup must be max4 or bilinear")
        if self.missing_roof not in ("footprint", "ignore_cutoff"):
            raise ConfigError("building.missing_roof must be footprint or ignore_cutoff")


@dataclass
class CarConfig:
    length_m: tuple = (2.5, 5.8)
    width_m: tuple = (1.5, 2.1)
    height_m: tuple = (1.2, 2.1)
    base_clearance_m: float = 0.5
    cc_voxel_m: float = 0.3
    min_cluster_points: int = 100

    def validate(self):
        self.length_m = _range(self.length_m, "car.length_m")
        self.width_m = _range(self.width_m, "car.width_m")
        self.height_m = _range(self.height_m, "car.height_m")
        self.base_clearance_m = _positive(self.base_clearance_m, "car.base_clearance_m", allow_zero=True)
        self.cc_voxel_m = _positive(self.cc_voxel_m, "car.cc_voxel_m")
        if int(self.min_cluster_points) != self.min_cluster_points or self.min_cluster_points < 1:
            raise ConfigError("car.min_cluster_points must be an integer >= 1")
        self.min_cluster_points = int(self.min_cluster_points)


@dataclass
class PoleConfig:
    half_extent_m: float = 1.5
    cell_m: float = 0.15
    min_height_m: float = 2.0
    max_offset_m: float = 1.5
    base_tolerance_m: float = 0.5
    radius_factor: float = 1.1
    max_axis_drift_m: Optional[float] = 0.1
    radius_max_m: dict = field(default_factory=lambda: {"lamp_post": 0.2, "traffic_sign": 0.2, "tree": 0.5})

    def validate(self):
        for name in ("half_extent_m", "cell_m", "min_height_m", "max_offset_m", "radius_factor"):
            setattr(self, name, _positive(getattr(self, name), f"pole.{name}"))
        self.base_tolerance_m = _positive(self.base_tolerance_m, "pole.base_tolerance_m", allow_zero=True)
        if self.max_axis_drift_m is not None:
            self.max_axis_drift_m = _positive(self.max_axis_drift_m, "pole.max_axis_drift_m")
        if not isinstance(self.radius_max_m, dict) or set(self.radius_max_m) != {"lamp_post", "traffic_sign", "tree"}:
            raise ConfigError("pole.radius_max_m needs exactly lamp_post, traffic_sign and tree")
        self.radius_max_m = {k: _positive(v, f"pole.radius_max_m.{k}") for k, v in self.radius_max_m.items()}


def _bands(items, name):
    if not isinstance(items, (list, tuple)) or not items:
        raise ConfigError(f"{name} must be a non-empty list of bands")
    try:
        bands = [b if isinstance(b, GrowBand) else GrowBand.from_dict(b) for b in items]
        return validate_bands(bands)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _default_building_bands():
    return [GrowBand(0.0, 3.0, 0.1, 0.8), GrowBand(3.0, math.inf, 0.3, 0.5)]


def _default_pole_bands():
    return [GrowBand(0.0, 2.5, 0.1, 0.8), GrowBand(2.5, math.inf, 0.25, 0.4)]


def _default_kind_bands():
    # A trunk seed is a few percent of a crown cluster; a sign plate outweighs its post.
    return {
        "tree": [GrowBand(0.0, 2.5, 0.1, 0.8), GrowBand(2.5, math.inf, 0.25, 0.02)],
        "traffic_sign": [GrowBand(0.0, 2.5, 0.1, 0.8), GrowBand(2.5, math.inf, 0.25, 0.1)],
    }


@dataclass
class GrowConfig:
    building_bands: list = field(default_factory=_default_building_bands)
    pole_bands: list = field(default_factory=_default_pole_bands)
    # per-kind replacements for pole_bands
    kind_bands: dict = field(default_factory=_default_kind_bands)

    def validate(self):
        self.building_bands = _bands(self.building_bands, "grow.building.bands")
        self.pole_bands = _bands(self.pole_bands, "grow.pole.bands")
        out = {}
        for k, v in (self.kind_bands or {}).items():
            if k not in ("tree", "lamp_post", "traffic_sign"):
                raise ConfigError(f"grow.pole.by_kind: unknown kind {k!r}")
            if v is not None:
                out[k] = _bands(v, f"grow.pole.by_kind.{k}.bands")
        self.kind_bands = out

    def bands_for(self, kind: str) -> list:
        return self.kind_bands.get(kind, self.pole_bands)


@dataclass
class PipelineConfig:
    modules: list = field(default_factory=lambda: list(MODULES))
    raster: RasterConfig = field(default_factory=RasterConfig)
    ground: GroundConfig = field(default_factory=GroundConfig)
    building: BuildingConfig = field(default_factory=BuildingConfig)
    car: CarConfig = field(default_factory=CarConfig)
    pole: PoleConfig = field(default_factory=PoleConfig)
    grow: GrowConfig = field(default_factory=GrowConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        mods = list(self.modules)
        bad = [m for m in mods if m not in MODULES]
        if bad:
            raise ConfigError(f"unknown module(s): {bad}; known: {list(MODULES)}")
        if len(set(mods)) != len(mods):
            raise ConfigError("modules may be listed only once")
        self.modules = mods
        for part in (self.raster, self.ground, self.building, self.car, self.pole, self.grow):
            part.validate()

    def enabled(self, module: str) -> bool:
        return module in self.modules

    # ---- (de)serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        def plain(dc):
            return {f.name: _plain(getattr(dc, f.name)) for f in dataclasses.fields(dc)}

        grow = self.grow
        return {
            "modules": list(self.modules),
            "raster": plain(self.raster),
            "ground": plain(self.ground),
            "building": plain(self.building),
            "car": plain(self.car),
            "pole": plain(self.pole),
            "grow": {
                "building": {"bands": [b.to_dict() for b in grow.building_bands]},
                "pole": {
                    "bands": [b.to_dict() for b in grow.pole_bands],
                    "by_kind": {k: {"bands": [b.to_dict() for b in v]} for k, v in sorted(grow.kind_bands.items())},
                },
            },
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "PipelineConfig":
        data = dict(data or {})
        allowed = {"modules", "raster", "ground", "building", "car", "pole", "grow"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        if "modules" in data:
            if not isinstance(data["modules"], list):
                raise ConfigError("modules must be a list")
            kwargs["modules"] = data["modules"]
        for name, typ in (("raster", RasterConfig), ("ground", GroundConfig), ("building", BuildingConfig),
                          ("car", CarConfig), ("pole", PoleConfig)):
            if name in data:
                kwargs[name] = _section(typ, data[name], name)
        if "grow" in data:
            kwargs["grow"] = _grow_section(data["grow"])
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)


def _plain(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in sorted(v.items())}
    return v


def _section(typ, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be a mapping")
    names = {f.name for f in dataclasses.fields(typ)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {sorted(unknown)}")
    base = typ()
    for k, v in data.items():
        if isinstance(getattr(base, k), dict) and isinstance(v, dict):
            extra = set(v) - set(getattr(base, k))
            if extra:
                raise ConfigError(f"unknown key(s) in {name}.{k}: {sorted(extra)}")
            v = {**getattr(base, k), **v}
        setattr(base, k, v)
    return base


def _grow_section(data):
    if not isinstance(data, dict):
        raise ConfigError("grow must be a mapping")
    unknown = set(data) - {"building", "pole"}
    if unknown:
        raise ConfigError(f"unknown key(s) in grow: {sorted(unknown)}")
    g = GrowConfig()
    b = data.get("building")
    if b is not None:
        if not isinstance(b, dict) or set(b) - {"bands"}:
            raise ConfigError("grow.building accepts only 'bands'")
        if "bands" in b:
            g.building_bands = b["bands"]
    p = data.get("pole")
    if p is not None:
        if not isinstance(p, dict) or set(p) - {"bands", "by_kind"}:
            raise ConfigError("grow.pole accepts only 'bands' and 'by_kind'")
        if "bands" in p:
            g.pole_bands = p["bands"]
        if "by_kind" in p:
            bk = p["by_kind"] or {}
            if not isinstance(bk, dict):
                raise ConfigError("grow.pole.by_kind must be a mapping")
            kinds = {}
            for k, v in bk.items():
                if v is None:
                    kinds[k] = None
                    continue
                if not isinstance(v, dict) or set(v) - {"bands"}:
                    raise ConfigError(f"grow.pole.by_kind.{k} accepts only 'bands'")
                kinds[k] = v.get("bands")
            g.kind_bands = kinds
    return g
