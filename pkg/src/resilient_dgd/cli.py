"""Command-line entry point: ``resdgd {generate,analyze,bounds,run,suite}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig
from .costs import PRESETS, CostFamily, certify_constants, generate_family
from .exceptions import ConfigError, ResilientDGDError
from .harness import (
    EXIT_CONFIG,
    EXIT_OK,
    execute,
    output_dir,
    run_manifest,
    suite_exit_code,
    write_outputs,
)
from .problem import ProblemInstance
from .redundancy import compute_epsilon, epsilon_grid

logger = logging.getLogger("resilient_dgd")

OVERRIDABLE = {
    "f": int,
    "r": int,
    "mode": str,
    "tau": int,
    "problem": str,
    "filter": str,
    "iterations": int,
    "replications": int,
    "seed": int,
    "sigma": float,
    "workers": int,
    "name": str,
}


def _load_family(spec: str) -> CostFamily:
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}")
        return PRESETS[name]()
    try:
        return CostFamily.load(spec)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load family {spec!r}: {exc}") from exc


def _emit(doc, stream=None) -> None:
    (stream or sys.stdout).write(json.dumps(doc, indent=2) + "\n")


def cmd_generate(args) -> int:
    if args.preset:
        family = PRESETS[args.preset]()
    else:
        family = generate_family(args.seed, args.n, args.d, args.spread, args.eig_low, args.eig_high)
    text = family.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    floor = args.subset_floor or family.n
    cert = certify_constants(family, floor)
    _emit({"n": family.n, "dimension": family.dimension, "certificate": cert.to_dict()},
          sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_analyze(args) -> int:
    family = _load_family(args.family)
    if args.grid:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["f", "r", "epsilon", "pairs_examined"])
        for rep in epsilon_grid(family):
            writer.writerow([rep.f, rep.r, repr(rep.epsilon), rep.pairs_examined])
        if args.csv:
            Path(args.csv).write_text(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        return EXIT_OK
    report = compute_epsilon(family, args.f, args.r)
    _emit(report.to_dict())
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    doc = cfg.to_dict()
    for key in OVERRIDABLE:
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    return RunConfig.from_dict(doc)


def cmd_bounds(args) -> int:
    cfg = _config_from_args(args)
    problem = ProblemInstance.from_config(cfg, Path(args.config).parent)
    b = problem.bounds
    _emit({
        "config_hash": cfg.config_hash(),
        "bounds": b.to_dict() if b is not None else None,
        "target": problem.target.tolist(),
        "Gamma": problem.Gamma,
    })
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    outcome = execute(cfg, Path(args.config).parent)
    out = output_dir(args.out, cfg)
    write_outputs(outcome, out, trace_json=args.trace_json, vectors=args.vectors)
    if args.json:
        _emit({"provenance": outcome.provenance(), **outcome.summary})
    else:
        for c in outcome.checks:
            print(f"{c.status.upper():<5} {c.name}: {c.message}")
        print(f"outputs written to {out}")
    return outcome.exit_code


def cmd_suite(args) -> int:
    results = run_manifest(args.manifest, args.out, args.jobs)
    for r in results:
        print(r.line())
    doc = {"results": [{"name": r.name, "status": r.status, "message": r.message} for r in results]}
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    if args.json:
        _emit(doc)
    return suite_exit_code(results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resdgd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random quadratic cost family")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--eig-low", type=float, default=1.0)
    p.add_argument("--eig-high", type=float, default=2.0)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--subset-floor", type=int, default=None)
    p.add_argument("--out", help="family file (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="compute the redundancy parameter epsilon")
    p.add_argument("family", help="family JSON path or preset:NAME")
    p.add_argument("--f", type=int, default=0)
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--grid", action="store_true", help="CSV of epsilon over all feasible (f, r)")
    p.add_argument("--csv", help="write the grid here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    for name, func, helptext in (
        ("bounds", cmd_bounds, "print the closed-form constants for a config"),
        ("run", cmd_run, "run one experiment and check its bound"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="run config JSON")
        for key, typ in OVERRIDABLE.items():
            p.add_argument(f"--{key}", type=typ, default=None)
        if name == "run":
            p.add_argument("--out", help="output directory (default: $RESDGD_OUTPUT_DIR/<name>)")
            p.add_argument("--trace-json", action="store_true")
            p.add_argument("--vectors", action="store_true", help="include full vectors in trace.json")
            p.add_argument("--json", action="store_true", help="print the summary as JSON")
        p.set_defaults(func=func)

    p = sub.add_parser("suite", help="run every experiment in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="root directory for per-experiment outputs")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report", help="write the machine-readable report here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResilientDGDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
