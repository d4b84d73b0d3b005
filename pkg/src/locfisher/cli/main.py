"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(conditioning, quadrature, degenerate fit), 4 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from ..errors import ConfigurationError, ConvergenceFailure, LocFisherError, NumericalFailure
from ..oracle import oracle_check
from .config import RunConfig, load_config, parse_config
from .runner import build_compare_output, build_run_output, run_sweep, write_output

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CONVERGENCE = 4
ORACLE_TOL = 1e-6


def preset_names() -> list[str]:
    root = resources.files("locfisher.cli") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    """Preset file: ``{"description": str, "runs": {run_name: config}}``."""
    if name not in preset_names():
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    text = (resources.files("locfisher.cli") / "presets" / f"{name}.json").read_text()
    return json.loads(text)


def _override(cfg: RunConfig, args) -> RunConfig:
    fmt = args.format or cfg.output_format
    return replace(cfg, output_format=fmt, output_path=args.out or cfg.output_path)


def _run(cfg: RunConfig, workers: int) -> None:
    if len(cfg.computations) != 1:
        raise ConfigurationError("'run' takes a single computation; use 'compare' for two")
    results = run_sweep(cfg, cfg.computation, workers)
    out = build_run_output(cfg, results, cfg.output_format)
    write_output(out, cfg.output_path, cfg.output_format, sys.stdout)


def _compare(cfg: RunConfig, workers: int) -> None:
    if len(cfg.computations) != 2:
        raise ConfigurationError("'compare' needs computation to list exactly two names")
    first = run_sweep(cfg, cfg.computations[0], workers)
    second = run_sweep(cfg, cfg.computations[1], workers)
    out = build_compare_output(cfg, first, second, cfg.output_format)
    write_output(out, cfg.output_path, cfg.output_format, sys.stdout)


def cmd_run(args) -> int:
    _run(_override(load_config(args.config), args), args.workers)
    return EXIT_OK


def cmd_compare(args) -> int:
    _compare(_override(load_config(args.config), args), args.workers)
    return EXIT_OK


def cmd_preset(args) -> int:
    if args.list:
        for name in preset_names():
            print(f"{name}: {load_preset(name)['description']}")
        return EXIT_OK
    if args.name is None:
        raise ConfigurationError("give a preset name or --list")
    preset = load_preset(args.name)
    outdir = Path(args.out or args.name)
    fmt = args.format or "csv"
    for run_name, obj in preset["runs"].items():
        cfg = parse_config(obj)
        cfg = replace(cfg, output_format=fmt, output_path=str(outdir / f"{run_name}.{fmt}"))
        if len(cfg.computations) == 2:
            _compare(cfg, args.workers)
        else:
            _run(cfg, args.workers)
        print(f"wrote {cfg.output_path}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    samples = oracle_check(args.sources, args.samples, args.seed)
    worst = max(s.deviation for s in samples)
    report = {
        "sources": args.sources,
        "seed": args.seed,
        "samples": [{"alphas": list(s.config.alphas), "weights": list(s.config.weights),
                     "deviation": s.deviation, "dim": s.dim} for s in samples],
        "max_relative_deviation": worst,
        "tolerance": ORACLE_TOL,
        "passed": worst < ORACLE_TOL,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"max relative deviation {worst:.3e} over {len(samples)} configurations", file=sys.stderr)
    return EXIT_OK if worst < ORACLE_TOL else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locfisher",
        description="Fisher information of incoherent point sources below the diffraction limit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path (directory for presets)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int, default=1, help="parallel sweep workers")

    p = sub.add_parser("run", help="evaluate one computation over a sweep")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="evaluate two computations on the same sweep")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("preset", help="reproduce a bundled figure configuration")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list the presets")
    common(p, config=False)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("oracle-check", help="closed form vs truncated-basis QFIM on random configurations")
    p.add_argument("--sources", type=int, default=3)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NumericalFailure, LocFisherError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
