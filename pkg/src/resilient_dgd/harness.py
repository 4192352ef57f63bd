"""Experiment execution with bound-membership checks, file output and suites."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import check_rho_range
from .config import RunConfig, load_manifest
from .engine import MonteCarloResult, Trace, _simulate, run_monte_carlo
from .exceptions import ConfigError, ResilientDGDError
from .problem import ProblemInstance

logger = logging.getLogger(__name__)

OUTPUT_ENV = "RESDGD_OUTPUT_DIR"
MC_STANDARD_ERRORS = 3.0
PHI_MARGIN = 0.01

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


@dataclass
class Check:
    name: str
    status: str  # "pass" | "fail" | "skip"
    message: str = ""
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "message": self.message, **self.detail}


@dataclass
class Outcome:
    config: RunConfig
    problem: ProblemInstance
    trace: Trace
    checks: list[Check]
    summary: dict
    monte_carlo: MonteCarloResult | None = None

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in self.checks)

    @property
    def exit_code(self) -> int:
        return EXIT_CHECK_FAILED if self.failed else EXIT_OK

    def provenance(self) -> dict:
        return {"seed": self.config.seed, "config_hash": self.config.config_hash()}

    def header_lines(self) -> list[str]:
        return [f"seed={self.config.seed}", f"config_hash={self.config.config_hash()}"]


def tail_window(iterations: int, fraction: float = 0.1, minimum: int = 100) -> int:
    """Number of trailing iterates inspected by asymptotic bound checks."""
    return min(iterations, max(minimum, math.ceil(fraction * iterations)))


def _deterministic_checks(problem: ProblemInstance, trace: Trace, summary: dict) -> list[Check]:
    cfg = problem.config
    checks = []
    T = trace.iterations
    window = tail_window(T, cfg.tail_fraction, cfg.tail_min)
    dist = trace.distances()
    tail_max = float(dist[-window:].max())
    summary.update(tail_window=window, tail_max_distance=tail_max)
    b = problem.bounds
    if b is None:
        checks.append(Check("tail_bound", "skip", "no applicable guarantee for this configuration"))
    elif not b.feasible:
        checks.append(Check("tail_bound", "skip", "infeasible", {"alpha": b.alpha}))
    else:
        ok = tail_max <= b.radius
        summary.update(bound_value=b.radius, bound_variant=b.variant, satisfied=ok)
        checks.append(
            Check("tail_bound", "pass" if ok else "fail",
                  f"tail max {tail_max:.6g} vs bound {b.radius:.6g}",
                  {"tail_max_distance": tail_max, "bound_value": b.radius})
        )
        if b.variant == "thm3_cge" and not math.isnan(b.alpha):
            phis = trace.phis()
            outside = dist[:-1] >= b.radius + PHI_MARGIN
            violations = int(np.count_nonzero(outside & (phis <= 0)))
            summary["phi_diagnostic"] = {
                "iterations_outside": int(np.count_nonzero(outside)),
                "nonpositive_phi": violations,
            }
    norm_bound = problem.aggregate_norm_bound()
    if norm_bound is not None and T > 0:
        worst = float(trace.aggregate_norms().max())
        ok = worst <= norm_bound
        checks.append(
            Check("aggregate_norm", "pass" if ok else "fail",
                  f"max aggregate norm {worst:.6g} vs bound {norm_bound:.6g}",
                  {"max_aggregate_norm": worst, "bound_value": norm_bound})
        )
    return checks


def _stochastic_checks(problem: ProblemInstance, summary: dict) -> tuple[list[Check], MonteCarloResult | None]:
    b = problem.bounds
    summary.update(bound_variant=b.variant)
    if not b.feasible:
        return [Check("mean_square_bound", "skip", "infeasible", {"alpha": b.alpha})], None
    checks = [Check("rho_range", "pass" if check_rho_range(b) else "fail", f"rho={b.rho:.6g}")]
    mc = run_monte_carlo(problem)
    excess = mc.mean_sq - (mc.bound + MC_STANDARD_ERRORS * mc.se)
    bad = mc.violations(MC_STANDARD_ERRORS)
    ok = bad.size == 0
    summary.update(
        satisfied=ok,
        monte_carlo={
            "replications": mc.replications,
            "max_excess": float(excess[1:].max()) if excess.size > 1 else None,
            "violations": int(bad.size),
            "mean_sq": mc.mean_sq.tolist(),
            "se": mc.se.tolist(),
            "bound": mc.bound.tolist(),
        },
    )
    checks.append(
        Check("mean_square_bound", "pass" if ok else "fail",
              f"{bad.size} iterations above bound + {MC_STANDARD_ERRORS:g} SE")
    )
    return checks, mc


def execute(config: RunConfig, base_dir: Path | None = None) -> Outcome:
    """Run one experiment and evaluate every check that applies to it."""
    problem = ProblemInstance.from_config(config, base_dir)
    trace = _simulate(problem, 0)
    summary: dict = {
        "name": config.name,
        "mode": config.mode,
        "iterations": config.iterations,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "target": problem.target.tolist(),
        "satisfied": None,
    }
    checks: list[Check] = []
    mc = None
    if config.iterations > 0:
        if config.mode == "stochastic":
            checks, mc = _stochastic_checks(problem, summary)
        else:
            checks = _deterministic_checks(problem, trace, summary)
    b = problem.bounds if config.iterations > 0 else None
    summary["bounds"] = b.to_dict() if b is not None else None
    summary["checks"] = [c.to_dict() for c in checks]
    return Outcome(config, problem, trace, checks, summary, mc)


def output_dir(explicit: str | os.PathLike | None, config: RunConfig) -> Path:
    if explicit is not None:
        return Path(explicit)
    root = Path(os.environ.get(OUTPUT_ENV, "runs"))
    return root / (config.name or config.config_hash())


def write_outputs(outcome: Outcome, out: Path, trace_json: bool = False, vectors: bool = False) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "trace.csv"
    p.write_text(outcome.trace.to_csv(outcome.header_lines()))
    written.append(p)
    if trace_json:
        p = out / "trace.json"
        p.write_text(outcome.trace.to_json(vectors, outcome.provenance()))
        written.append(p)
    if outcome.monte_carlo is not None:
        p = out / "mc_curve.csv"
        p.write_text(outcome.monte_carlo.to_csv(outcome.header_lines()))
        written.append(p)
    p = out / "summary.json"
    doc = {"provenance": outcome.provenance(), **outcome.summary}
    p.write_text(json.dumps(doc, indent=2) + "\n")
    written.append(p)
    return written


# -- suites -----------------------------------------------------------------


@dataclass
class SuiteEntry:
    name: str
    status: str  # PASS | FAIL | SKIP | ERROR
    message: str
    summary: dict | None = None

    def line(self) -> str:
        return f"{self.status:<5} {self.name}: {self.message}"


def _run_entry(name: str, doc: dict, out_root: str | None) -> SuiteEntry:
    try:
        cfg = RunConfig.from_dict({**doc, "name": doc.get("name") or name})
        outcome = execute(cfg)
    except (ConfigError, ResilientDGDError) as exc:
        return SuiteEntry(name, "ERROR", str(exc))
    if out_root is not None:
        write_outputs(outcome, Path(out_root) / name)
    statuses = [c.status for c in outcome.checks]
    if "fail" in statuses:
        failed = [c for c in outcome.checks if c.status == "fail"]
        return SuiteEntry(name, "FAIL", "; ".join(f"{c.name}: {c.message}" for c in failed), outcome.summary)
    if statuses and all(s == "skip" for s in statuses):
        reason = outcome.checks[0].message
        return SuiteEntry(name, "SKIP", f"skipped: {reason}", outcome.summary)
    passed = [f"{c.name}: {c.message}" for c in outcome.checks if c.status == "pass"]
    return SuiteEntry(name, "PASS", "; ".join(passed) or "no checks", outcome.summary)


def run_suite(entries: list[tuple[str, dict]], out_root: str | None = None, jobs: int = 1) -> list[SuiteEntry]:
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            futures = [pool.submit(_run_entry, name, doc, out_root) for name, doc in entries]
            return [fut.result() for fut in futures]
    return [_run_entry(name, doc, out_root) for name, doc in entries]


def suite_exit_code(results: list[SuiteEntry]) -> int:
    if any(r.status == "ERROR" for r in results):
        return EXIT_CONFIG
    if any(r.status == "FAIL" for r in results):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def run_manifest(path, out_root: str | None = None, jobs: int = 1) -> list[SuiteEntry]:
    return run_suite(load_manifest(path), out_root, jobs)
