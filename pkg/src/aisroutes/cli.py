"""Command-line interface: one subcommand per pipeline stage.

Exit codes: 0 ok, 2 config error, 3 missing input, 4 data-consistency
error. Fatal errors print a single machine-parsable line on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import pipeline, refconvert, report, scenarios, synth
from .config import PipelineConfig, load_config
from .errors import ConfigError, ConsistencyError, MissingInputError
from .ingest import ColumnMap


def _parse_column_map(raw: str) -> ColumnMap:
    column_map = ColumnMap()
    for pair in raw.split(","):
        field_name, _, col = pair.partition("=")
        field_name = field_name.strip()
        if not col or not hasattr(column_map, field_name):
            raise ConfigError(f"bad --columns entry {pair!r}")
        setattr(column_map, field_name, col.strip())
    return column_map


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key=value config file")
    group = parser.add_argument_group("config overrides")
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        group.add_argument(flag, dest=f"cfg_{f.name}", metavar="V", default=None)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for f in fields(PipelineConfig):
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aisroutes",
        description="Mine standard maritime routes from raw AIS position reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic fleet with ground truth")
    p_synth.add_argument("--preset", choices=sorted(scenarios.PRESETS), default=None)
    p_synth.add_argument("--scenario", type=Path, default=None, help="scenario JSON file")
    p_synth.add_argument("--seed", type=int, default=None)
    _add_config_flags(p_synth)

    p_ingest = sub.add_parser("ingest", help="parse AIS CSV into per-MMSI tracks")
    p_ingest.add_argument("--input", type=Path, default=None, help="CSV file or directory")
    p_ingest.add_argument(
        "--columns",
        default=None,
        metavar="FIELD=COL,...",
        help="remap input columns, e.g. mmsi=MMSI,ts=BaseDateTime,lat=LAT,lon=LON",
    )
    _add_config_flags(p_ingest)

    p_ports = sub.add_parser("ports", help="detect and consolidate ports")
    p_ports.add_argument("--reference", type=Path, default=None, help="name,lat,lon CSV")
    _add_config_flags(p_ports)

    for name, text in (
        ("segments", "cut tracks into port-to-port segments"),
        ("aggregate", "group segments by port pair and vessel class"),
        ("export", "collect final artifacts into the export directory"),
    ):
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)

    p_fit = sub.add_parser("fit-params", help="fit the parameter regression from labels")
    p_fit.add_argument("--labels", type=Path, default=None, help="group_key,eps_m,min_samples,r_m CSV")
    _add_config_flags(p_fit)

    p_routes = sub.add_parser("routes", help="extract standard routes per group")
    p_routes.add_argument("--model", type=Path, default=None, help="fitted parameter model JSON")
    _add_config_flags(p_routes)

    p_report = sub.add_parser("report", help="render run statistics, tables, and figures")
    p_report.add_argument("--out", type=Path, default=None, help="stats output directory")
    p_report.add_argument("--json", action="store_true", help="print stats JSON instead of the table")
    _add_config_flags(p_report)

    p_conv = sub.add_parser("convert-ref", help="convert OSM/WPI extracts to name,lat,lon CSV")
    p_conv.add_argument("--format", choices=("osm", "wpi", "csv"), required=True)
    p_conv.add_argument("--in", dest="input", type=Path, required=True)
    p_conv.add_argument("--out", type=Path, required=True)
    p_conv.add_argument("--name-col", default="name")
    p_conv.add_argument("--lat-col", default="lat")
    p_conv.add_argument("--lon-col", default="lon")
    return parser


def _scenario_from_args(args: argparse.Namespace) -> synth.ScenarioSpec:
    if args.scenario is not None:
        if not args.scenario.exists():
            raise MissingInputError(f"scenario file not found: {args.scenario}")
        spec = synth.scenario_from_json(args.scenario.read_text())
        if args.seed is not None:
            spec.seed = args.seed
        return spec
    preset = args.preset or "straight"
    return scenarios.make_preset(preset, seed=args.seed)


def _run(args: argparse.Namespace) -> int:
    if args.command == "convert-ref":
        if not args.input.exists():
            raise MissingInputError(f"input file not found: {args.input}")
        if args.format == "osm":
            rows = refconvert.convert_osm(args.input)
        elif args.format == "wpi":
            rows = refconvert.convert_wpi(args.input)
        else:
            rows = refconvert.convert_csv(args.input, args.name_col, args.lat_col, args.lon_col)
        count = refconvert.write_reference(rows, args.out)
        print(f"wrote {count} reference ports to {args.out}")
        return 0

    cfg = _build_config(args)

    if args.command == "report":
        out_dir = args.out or cfg.path("export")
        table = report.report(cfg.path("manifest.json"), out_dir)
        if args.json:
            print((out_dir / "stats.json").read_text(), end="")
        else:
            print(table, end="")
        return 0

    kwargs = {}
    if args.command == "synth":
        kwargs["spec"] = _scenario_from_args(args)
    elif args.command == "ingest":
        kwargs["input_path"] = args.input
        if args.columns:
            kwargs["column_map"] = _parse_column_map(args.columns)
    elif args.command == "ports":
        kwargs["reference_path"] = args.reference
    elif args.command == "fit-params":
        kwargs["labels_path"] = args.labels
    elif args.command == "routes":
        kwargs["model_path"] = args.model

    fragment = pipeline.run_stage(args.command, cfg, **kwargs)
    print(json.dumps({args.command: fragment}, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"aisroutes: error code=2 kind=config detail={exc}", file=sys.stderr)
        return 2
    except MissingInputError as exc:
        print(f"aisroutes: error code=3 kind=missing-input detail={exc}", file=sys.stderr)
        return 3
    except ConsistencyError as exc:
        print(f"aisroutes: error code=4 kind=consistency detail={exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
