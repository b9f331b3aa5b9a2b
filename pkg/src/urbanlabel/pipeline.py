"""Tile orchestration, class statistics and evaluation."""

from __future__ import annotations

import logging
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .config import PipelineConfig
from .core import CODE_NAMES, POLE_CODES, LabelCode, LabeledCloud
from .fusion import CarDims, label_buildings, label_cars, label_ground, label_noise_below, label_poles
from .growing import connected_components, grow_banded
from .raster import ElevationRaster, fill_gaps
from .vector import TopoMap

log = logging.getLogger(__name__)

REPORT_CLASSES = (LabelCode.GROUND, LabelCode.BUILDING, LabelCode.CAR, LabelCode.TREE,
                  LabelCode.LAMP_POST, LabelCode.TRAFFIC_SIGN)
DEFAULT_IGNORE = frozenset({LabelCode.UNLABELLED, LabelCode.NOISE})


class PipelineError(ValueError):
    pass


class InvalidPairError(ValueError):
    pass


@dataclass
class ClassReport:
    """Per-class counts and, when scored against truth, precision/recall/IoU."""

    total: int
    counts: dict
    metrics: dict = field(default_factory=dict)  # code -> {"precision", "recall", "iou", "tp", "fp", "fn"}
    mean_iou: Optional[float] = None
    timings: dict = field(default_factory=dict)
    module_counts: dict = field(default_factory=dict)

    @property
    def percentages(self) -> dict:
        if self.total == 0:
            return {c: 0.0 for c in self.counts}
        return {c: 100.0 * n / self.total for c, n in self.counts.items()}

    def table(self) -> str:
        """Aligned text table."""
        pct = self.percentages
        lines = []
        if self.metrics:
            lines.append(f"{'class':<14}{'points':>12}{'percent':>10}{'precision':>11}{'recall':>9}{'iou':>9}")
        else:
            lines.append(f"{'class':<14}{'points':>12}{'percent':>10}")
        for code in LabelCode:
            row = f"{CODE_NAMES[code]:<14}{self.counts.get(code, 0):>12d}{pct.get(code, 0.0):>9.2f}%"
            m = self.metrics.get(code)
            if m is not None:
                row += f"{m['precision']:>11.4f}{m['recall']:>9.4f}{m['iou']:>9.4f}"
            lines.append(row)
        lines.append(f"{'total':<14}{self.total:>12d}")
        if self.mean_iou is not None:
            lines.append(f"{'mean_iou':<14}{self.mean_iou:>12.4f}")
        return "\n".join(lines)

    def triples(self) -> str:
        """One ``class metric value`` triple per line."""
        pct = self.percentages
        out = [f"all points {self.total}"]
        for code in LabelCode:
            name = CODE_NAMES[code]
            out.append(f"{name} points {self.counts.get(code, 0)}")
            out.append(f"{name} percent {pct.get(code, 0.0):.4f}")
            m = self.metrics.get(code)
            if m is not None:
                for key in ("precision", "recall", "iou"):
                    out.append(f"{name} {key} {m[key]:.6f}")
        if self.mean_iou is not None:
            out.append(f"all mean_iou {self.mean_iou:.6f}")
        return "\n".join(out)


def stats(cloud: LabeledCloud) -> ClassReport:
    return ClassReport(len(cloud), cloud.class_counts())


def evaluate(pred: LabeledCloud, truth: LabeledCloud, ignore: Iterable = DEFAULT_IGNORE) -> ClassReport:
    """Score predicted labels against truth; truth-``ignore`` points are excluded.

    Mean IoU is taken over reported classes that occur in the scored truth.
    """
    if len(pred) != len(truth):
        raise InvalidPairError(f"point counts differ: {len(pred)} vs {len(truth)}")
    k = min(100, len(pred))
    for a, b in ((pred.x, truth.x), (pred.y, truth.y), (pred.z, truth.z)):
        if k and np.max(np.abs(a[:k] - b[:k])) > 1e-3 + 1e-9:
            raise InvalidPairError("coordinates of the first points differ by more than 1 mm")
    ignore = {LabelCode(c) for c in ignore}
    keep = ~np.isin(truth.label, [int(c) for c in ignore])
    t = truth.label[keep].astype(np.int64)
    p = pred.label[keep].astype(np.int64)
    report = stats(pred)
    ious = []
    for code in LabelCode:
        if code in ignore:
            continue
        c = int(code)
        tp = int(np.count_nonzero((t == c) & (p == c)))
        fp = int(np.count_nonzero((t != c) & (p == c)))
        fn = int(np.count_nonzero((t == c) & (p != c)))
        if tp + fn == 0 and fp == 0:
            continue
        denom = tp + fp + fn
        m = {
            "tp": tp, "fp": fp, "fn": fn,
            "precision": tp / (tp + fp) if tp + fp else 0.0,
            "recall": tp / (tp + fn) if tp + fn else 0.0,
            "iou": tp / denom if denom else 0.0,
        }
        report.metrics[code] = m
        if tp + fn > 0:
            ious.append(m["iou"])
    report.mean_iou = float(np.mean(ious)) if ious else 0.0
    return report


def run_tile(cloud: LabeledCloud, ground_raster: ElevationRaster, roof_raster: ElevationRaster,
             topo: TopoMap, config: Optional[PipelineConfig] = None,
             diagnostics: Optional[dict] = None) -> tuple[LabeledCloud, ClassReport]:
    """Label one tile in place, module by module, and return it with its report.

    Module order is fixed by ``config.modules``; labels never overwrite
    earlier ones, so earlier modules take precedence.
    """
    config = config or PipelineConfig()
    for name, r in (("ground", ground_raster), ("roof", roof_raster)):
        if not r.covers(cloud.bounds):
            raise PipelineError(f"{name} raster extent {r.extent} does not cover tile {cloud.bounds}")

    timings, counts = {}, {}
    cache: dict = {}

    def surface():
        if "surface" not in cache:
            cache["surface"] = ground_raster.query(cloud.x, cloud.y)
        return cache["surface"]

    def height():
        if "height" not in cache:
            cache["height"] = cloud.z - ground_raster.ground_at(cloud.x, cloud.y)
        return cache["height"]

    def step(name, fn):
        t0 = time.perf_counter()
        counts[name] = fn()
        timings[name] = time.perf_counter() - t0
        log.debug("%s: %s points in %.3fs", name, counts[name], timings[name])

    cfg = config
    for module in cfg.modules:
        if module == "fill_gaps":
            def _fill():
                nonlocal ground_raster, roof_raster
                ground_raster = fill_gaps(ground_raster, cfg.raster.max_gap_cells)
                if cfg.raster.fill_roof:
                    roof_raster = fill_gaps(roof_raster, cfg.raster.max_gap_cells)
                cache.clear()
                return 0
            step(module, _fill)
        elif module == "ground":
            step(module, lambda: label_ground(cloud, ground_raster, cfg.ground.margin_m, surface()))
        elif module == "noise":
            step(module, lambda: label_noise_below(cloud, ground_raster, cfg.ground.noise_margin_m, surface()))
        elif module == "building":
            step(module, lambda: label_buildings(cloud, topo.footprints, roof_raster, cfg.building.inflate_m,
                                                 cfg.building.roof_margin_m, cfg.building.roof_lookup,
                                                 cfg.building.missing_roof))
        elif module == "car":
            def _cars():
                cars = []
                clusters = connected_components(cloud, cloud.unlabelled(), cfg.car.cc_voxel_m,
                                                cfg.car.min_cluster_points)
                dims = CarDims(cfg.car.length_m, cfg.car.width_m, cfg.car.height_m)
                n = label_cars(cloud, clusters, [p for p, _ in topo.roads], ground_raster, dims,
                               cfg.car.base_clearance_m, report=cars)
                if diagnostics is not None:
                    diagnostics["cars"] = cars
                return n
            step(module, _cars)
        elif module == "pole":
            def _poles():
                outcomes = []
                p = cfg.pole
                n = label_poles(cloud, topo.point_objects, ground_raster, p.half_extent_m, p.cell_m,
                                p.min_height_m, p.max_offset_m, p.radius_max_m, p.base_tolerance_m,
                                p.radius_factor, p.max_axis_drift_m, outcomes=outcomes)
                if diagnostics is not None:
                    diagnostics["poles"] = outcomes
                return n
            step(module, _poles)
        elif module == "grow_building":
            step(module, lambda: grow_banded(cloud, ground_raster, LabelCode.BUILDING,
                                             cfg.grow.building_bands, height()))
        elif module == "grow_pole":
            def _grow_poles():
                n = 0
                for kind, code in POLE_CODES.items():
                    if np.any(cloud.label == code):
                        n += grow_banded(cloud, ground_raster, code, cfg.grow.bands_for(kind), height())
                return n
            step(module, _grow_poles)

    report = stats(cloud)
    report.timings = timings
    report.module_counts = counts
    return cloud, report


def _run_job(job):
    from . import io

    cloud_path, ground_path, roof_path, topo_path, out_path, config = job
    cloud = io.read_cloud_csv(cloud_path)
    cloud, report = run_tile(cloud, io.read_raster_asc(ground_path), io.read_raster_asc(roof_path),
                             io.read_topo_geojson(topo_path), config)
    io.write_cloud_csv(cloud, out_path)
    return out_path, report.counts


def run_tiles(jobs, config: Optional[PipelineConfig] = None, workers: int = 1) -> list:
    """Label several tiles from files; tiles are independent so they may run in parallel.

    ``jobs`` are ``(cloud, ground, roof, topo, out)`` path tuples.  Results
    come back in job order regardless of ``workers``.
    """
    config = config or PipelineConfig()
    full = [tuple(j) + (config,) for j in jobs]
    if workers <= 1:
        return [_run_job(j) for j in full]
    # Forked children inherit the polars thread pool in a locked state, so use spawn.
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(_run_job, full))
