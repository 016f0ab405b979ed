"""Command-line entry point: validate, run, suite, report, cache."""
from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import storage
from .experiments.config import EXPERIMENTS, ConfigError, ExperimentConfig, load_raw
from .experiments.report import format_report
from .params import PRESETS, ModelParams, ParameterError

MODEL_FIELDS = [f.name for f in fields(ModelParams)]


def _parse_option(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"options look like key=value, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(p: argparse.ArgumentParser, experiment: bool = True) -> None:
    p.add_argument("--config", type=Path, action="append", help="TOML or JSON config (suite accepts several)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="base parameter set")
    p.add_argument("--seed", type=_seed, help="root seed (default 0)")
    if experiment:
        p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment name when no config is given")
    p.add_argument("--n-paths", type=int, dest="n_paths")
    p.add_argument("--dt", type=float)
    p.add_argument("--scheme", choices=["euler_full_truncation", "exact_v_euler_rest"])
    p.add_argument("--option", type=_parse_option, action="append", default=[], metavar="KEY=VALUE",
                   help="experiment option, value parsed as JSON when possible")
    g = p.add_argument_group("model overrides")
    for name in MODEL_FIELDS:
        g.add_argument(f"--{name}", type=float, dest=f"model_{name}", metavar="X")


def _runtime(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("cir3-out"), help="output directory")
    p.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    p.add_argument("--save-ensembles", action="store_true", help="write ensembles to $CIR3_CACHE_DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cir3", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a configuration and print the resolved parameters")
    _common(p)

    p = sub.add_parser("run", help="run one experiment")
    _common(p)
    _runtime(p)

    p = sub.add_parser("suite", help="run several experiments (default: all)")
    _common(p, experiment=False)
    _runtime(p)
    p.add_argument("--experiments", help="comma-separated names; empty string runs nothing")

    p = sub.add_parser("report", help="pretty-print a stored report")
    p.add_argument("path", type=Path, help="report.json or a directory containing one")
    p.add_argument("--json", action="store_true", help="print the raw JSON")

    p = sub.add_parser("cache", help="inspect binary ensemble caches")
    p.add_argument("paths", type=Path, nargs="*", help="cache files (default: everything in $CIR3_CACHE_DIR)")
    return parser


def _apply(data: dict, args, name: str | None = None) -> ExperimentConfig:
    data = copy.deepcopy(data)
    exp = data.setdefault("experiment", {})
    if name is not None:
        exp["name"] = name
    if args.preset:
        exp["preset"] = args.preset
    if args.seed is not None:
        exp["seed"] = args.seed
    if args.n_paths is not None:
        exp["n_paths"] = args.n_paths
    if args.option:
        opts = exp.setdefault("options", {})
        opts.update(dict(args.option))
    sch = data.setdefault("scheme", {})
    if args.scheme:
        sch["name"] = args.scheme
    if args.dt is not None:
        sch["dt"] = args.dt
    model = data.setdefault("model", {})
    for f in MODEL_FIELDS:
        value = getattr(args, f"model_{f}")
        if value is not None:
            model[f] = value
    return ExperimentConfig.from_dict(data)


def _configs(args, names: list[str] | None = None) -> list[ExperimentConfig]:
    if args.config:
        return [_apply(load_raw(path), args) for path in args.config]
    if names is None:
        name = getattr(args, "experiment", None)
        if name is None:
            raise ConfigError("give --config or --experiment", "experiment.name")
        names = [name]
    return [_apply({}, args, n) for n in names]


def _summary(report) -> str:
    return format_report(report.to_dict())


def cmd_validate(args) -> int:
    for cfg in _configs(args):
        print(json.dumps(cfg.to_dict(), sort_keys=True, indent=2))
        m = cfg.model
        print(f"rho_bar = {m.rho_bar:.6g}; Feller condition {'holds' if m.feller else 'FAILS (advisory)'}")
    return 0


def cmd_run(args) -> int:
    from .experiments.runner import ExperimentError, run

    (cfg,) = _configs(args)[:1]
    try:
        report = run(cfg, threads=args.threads, save_ensembles=args.save_ensembles)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = report.write(args.out)
    print(_summary(report))
    print(f"report written to {out}")
    return 0 if report.passed else 1


def cmd_suite(args) -> int:
    from .experiments.runner import ExperimentError, run_suite

    names = None
    if not args.config:
        names = list(EXPERIMENTS) if args.experiments is None else [n for n in args.experiments.split(",") if n]
        unknown = [n for n in names if n not in EXPERIMENTS]
        if unknown:
            raise ConfigError(f"unknown experiment(s) {unknown}", "experiment.name")
    configs = _configs(args, names)
    try:
        result = run_suite(configs, threads=args.threads, save_ensembles=args.save_ensembles)
    except ExperimentError as exc:
        partial = getattr(exc, "partial_suite", None)
        if partial is not None:
            partial.write(args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result.write(args.out)
    for r in result.reports:
        print(_summary(r))
    status = "PASS" if result.passed else "FAIL"
    print(f"suite: {status} ({len(result.reports)} experiments)")
    for name in result.failed_claims:
        print(f"failed claim: {name}")
    return result.exit_code


def cmd_report(args) -> int:
    path = args.path / "report.json" if args.path.is_dir() else args.path
    data = json.loads(path.read_text())
    print(json.dumps(data, sort_keys=True, indent=2) if args.json else format_report(data))
    return 0


def cmd_cache(args) -> int:
    paths = args.paths or sorted(storage.cache_dir().glob("*.cir3"))
    if not paths:
        print(f"no caches in {storage.cache_dir()}")
    for path in paths:
        try:
            head = storage.read_header(path)
        except (OSError, storage.CacheFormatError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return 2
        meta_path = path.with_suffix(path.suffix + ".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        print(f"{path}: version {head['version']}, {head['factors']} factor(s), {head['rows']} rows, "
              f"scheme {meta.get('scheme', '?')}, seed {meta.get('root_seed', '?')}")
    return 0


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "suite": cmd_suite, "report": cmd_report, "cache": cmd_cache}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
