"""Run configuration: a single JSON document describing one experiment."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .costs import PRESETS, CostFamily, generate_family
from .exceptions import ConfigError
from .faults import parse_role
from .filters import FILTER_NAMES
from .simnet import DelayModel

MODES = ("sync", "async", "stale", "stochastic")
PROBLEMS = ("BS", "CS", "DS")


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``family`` is one of ``{"preset": name}``, ``{"path": file}``,
    ``{"generate": {...generate_family kwargs...}}`` or ``{"inline": doc}``.
    ``schedule`` is ``{"kind": "harmonic", "eta0": value-or-null}`` or
    ``{"kind": "constant", "eta": value}`` / ``{"kind": "constant",
    "eta_fraction": value}``, the latter scaling the stochastic step bound.
    """

    family: dict = field(default_factory=lambda: {"preset": "line3"})
    f: int = 0
    r: int = 0
    mode: str = "sync"
    tau: int = 0
    problem: str | None = None
    filter: str = "sum"
    roles: list[str] | None = None
    delay: dict = field(default_factory=lambda: {"kind": "constant", "value": 0})
    schedule: dict = field(default_factory=lambda: {"kind": "harmonic", "eta0": None})
    iterations: int = 1000
    replications: int = 1
    box: dict = field(default_factory=lambda: {"half_width": 10.0})
    x0: list[float] | None = None
    sigma: float = 0.0
    batch_size: int = 1
    noise_model: str = "gaussian"
    seed: int = 0
    delta: float | None = None
    dstar: float | None = None
    tail_fraction: float = 0.1
    tail_min: int = 100
    workers: int = 1
    name: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def config_hash(self) -> str:
        """Short digest of everything that determines the results.

        ``workers`` and ``name`` are left out: they change how and where a
        run executes, not what it computes.
        """
        doc = {k: v for k, v in self.to_dict().items() if k not in ("workers", "name")}
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.filter not in FILTER_NAMES:
            raise ConfigError(f"filter must be one of {FILTER_NAMES}, got {self.filter!r}")
        for name in ("f", "r", "tau", "iterations", "tail_min"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.replications < 1 or self.workers < 1 or self.batch_size < 1:
            raise ConfigError("replications, workers and batch_size must be positive")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError("tail_fraction must lie in (0, 1]")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.mode == "stochastic":
            if self.problem not in PROBLEMS:
                raise ConfigError(f"stochastic mode needs problem in {PROBLEMS}")
            if self.problem == "BS" and self.r != 0:
                raise ConfigError("problem BS has no stragglers (r must be 0)")
            if self.problem == "CS" and (self.f != 0 or self.filter != "sum"):
                raise ConfigError("problem CS has no faulty agents and uses the sum aggregator")
            if self.schedule.get("kind") != "constant":
                raise ConfigError("stochastic runs use a constant step")
        if self.mode == "stale" and self.filter != "sum":
            raise ConfigError("stale mode supports only the sum aggregator")
        kind = self.schedule.get("kind")
        if kind not in ("harmonic", "constant"):
            raise ConfigError("schedule kind must be 'harmonic' or 'constant'")
        if kind == "constant" and ("eta" in self.schedule) == ("eta_fraction" in self.schedule):
            raise ConfigError("a constant schedule needs exactly one of 'eta' or 'eta_fraction'")
        try:
            DelayModel.from_dict(self.delay)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad delay model: {exc}") from exc
        if self.roles is not None:
            try:
                strategies = [parse_role(r) for r in self.roles]
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            faulty = sum(s is not None for s in strategies)
            if faulty > self.f:
                raise ConfigError(f"{faulty} faulty roles exceed the fault budget f={self.f}")
            if self.mode == "stale" and faulty:
                raise ConfigError("stale mode is honest-only")
        if set(self.family) - {"preset", "path", "generate", "inline"} or len(self.family) != 1:
            raise ConfigError("family must have exactly one of preset/path/generate/inline")
        if "preset" in self.family and self.family["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {self.family['preset']!r}")

    # -- resolution --------------------------------------------------------

    def load_family(self, base_dir: Path | None = None) -> CostFamily:
        src = self.family
        try:
            if "preset" in src:
                return PRESETS[src["preset"]]()
            if "inline" in src:
                return CostFamily.from_dict(src["inline"])
            if "generate" in src:
                return generate_family(**src["generate"])
            path = Path(src["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return CostFamily.load(path)
        except (OSError, TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"could not load cost family: {exc}") from exc

    def resolved_roles(self, n: int) -> list[str]:
        roles = list(self.roles) if self.roles is not None else ["honest"] * n
        if len(roles) != n:
            raise ConfigError(f"roles list has {len(roles)} entries for {n} agents")
        return roles


def load_manifest(path) -> list[tuple[str, dict[str, Any]]]:
    """Read a suite manifest: ``{"experiments": [{"name": ..., "config": {...}}]}``.

    An entry may give ``"config_path"`` instead of an inline ``"config"``;
    relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    out = []
    for k, entry in enumerate(doc.get("experiments", [])):
        name = entry.get("name") or f"experiment-{k}"
        if "config" in entry:
            out.append((name, entry["config"]))
        elif "config_path" in entry:
            cfg_path = Path(entry["config_path"])
            if not cfg_path.is_absolute():
                cfg_path = path.parent / cfg_path
            try:
                out.append((name, json.loads(cfg_path.read_text())))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"experiment {name!r}: cannot read {cfg_path}: {exc}") from exc
        else:
            raise ConfigError(f"experiment {name!r} has neither 'config' nor 'config_path'")
    return out
