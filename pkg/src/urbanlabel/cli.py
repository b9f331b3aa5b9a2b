"""Command-line interface: ``label``, ``eval``, ``stats``, ``synth`` and ``print-config``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .config import ConfigError, PipelineConfig
from .core import parse_label_set
from .pipeline import DEFAULT_IGNORE, evaluate, run_tile, stats


def _config(path):
    return PipelineConfig.load(path) if path else PipelineConfig()


def _emit(report, fmt):
    if fmt in ("table", "both"):
        print(report.table())
    if fmt == "both":
        print()
    if fmt in ("triples", "both"):
        print(report.triples())


def cmd_label(args):
    cfg = _config(args.config)
    cloud = io.read_cloud_csv(args.cloud)
    cloud, report = run_tile(cloud, io.read_raster_asc(args.ground), io.read_raster_asc(args.roof),
                             io.read_topo_geojson(args.topo), cfg)
    io.write_cloud_csv(cloud, args.out)
    _emit(report, args.format)


def cmd_eval(args):
    ignore = parse_label_set(args.ignore) if args.ignore is not None else DEFAULT_IGNORE
    report = evaluate(io.read_cloud_csv(args.pred), io.read_cloud_csv(args.truth), ignore)
    _emit(report, args.format)


def cmd_stats(args):
    _emit(stats(io.read_cloud_csv(args.cloud)), args.format)


def cmd_synth(args):
    from .synthgen import SceneSpec, generate

    paths = generate(SceneSpec.load(args.spec), args.out_dir)
    for key, path in paths.items():
        print(f"{key} {path}")


def cmd_print_config(args):
    print(_config(args.config).dump(), end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="urbanlabel", description="Label urban point-cloud tiles from map and elevation data.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-module timings")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt(sp):
        sp.add_argument("--format", choices=("table", "triples", "both"), default="both")

    sp = sub.add_parser("label", help="label one tile")
    for name in ("cloud", "ground", "roof", "topo", "out"):
        sp.add_argument(f"--{name}", required=True)
    sp.add_argument("--config")
    fmt(sp)
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("eval", help="score predicted labels against truth")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--ignore", help="comma-separated class names excluded from scoring (default unlabelled,noise)")
    fmt(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("stats", help="per-class counts of a cloud")
    sp.add_argument("--cloud", required=True)
    fmt(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("synth", help="generate a synthetic scene from a spec file")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("print-config", help="print the effective configuration")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_print_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error command={args.command} type={type(exc).__name__} message={msg!r}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
