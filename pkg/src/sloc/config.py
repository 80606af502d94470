"""Experiment configuration: INI-style schema, validation and manifests.

A config names one experiment kind plus density, schedule and run-count
settings.  Parsing reports every violation at once, each tagged with its
section.key.  The manifest records the config hash, package version and
per-run seeds so that reruns are byte-reproducible.
"""

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field

EXPERIMENT_KINDS = (
    "simulate",
    "gaussian-check",
    "constants",
    "isoperimetry",
    "couple",
    "report",
)

DENSITY_NAMES = ("gaussian", "cube", "exponential", "ball")

STRATEGY_NAMES = ("auto", "closed-form", "quadrature", "cloud")


class ConfigError(ValueError):
    """Carries the full list of violations, each as (field, message)."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{f}: {m}" for f, m in self.violations)
        super().__init__(f"invalid config: {lines}")


@dataclass
class ExperimentConfig:
    kind: str
    density: str = "gaussian"
    n: int = 2
    dt: float = 1e-3
    t_max: float = 2.0
    stride: int = 10
    runs: int = 64
    particles: int = 10_000
    strategy: str = "auto"
    seed: int = None
    out: str = "results"
    fail_fast: bool = False
    tolerances: dict = field(default_factory=dict)
    raw_text: str = ""

    def config_hash(self):
        key = json.dumps(
            {
                k: v
                for k, v in self.__dict__.items()
                if k not in ("raw_text", "out", "fail_fast")
            },
            sort_keys=True,
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


_SCHEMA = {
    ("experiment", "kind"): ("str", EXPERIMENT_KINDS),
    ("experiment", "seed"): ("int", None),
    ("experiment", "out"): ("str", None),
    ("density", "name"): ("str", DENSITY_NAMES),
    ("density", "n"): ("int", None),
    ("schedule", "dt"): ("float", None),
    ("schedule", "t_max"): ("float", None),
    ("schedule", "stride"): ("int", None),
    ("runs", "count"): ("int", None),
    ("runs", "particles"): ("int", None),
    ("runs", "strategy"): ("str", STRATEGY_NAMES),
}

_FIELD_OF = {
    ("experiment", "kind"): "kind",
    ("experiment", "seed"): "seed",
    ("experiment", "out"): "out",
    ("density", "name"): "density",
    ("density", "n"): "n",
    ("schedule", "dt"): "dt",
    ("schedule", "t_max"): "t_max",
    ("schedule", "stride"): "stride",
    ("runs", "count"): "runs",
    ("runs", "particles"): "particles",
    ("runs", "strategy"): "strategy",
}


def parse_config(text):
    """Parse and validate; raises ConfigError listing every violation."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([("<syntax>", str(exc))])
    violations = []
    values = {}
    for section in parser.sections():
        if section == "tolerances":
            continue
        for key, raw in parser[section].items():
            spec = _SCHEMA.get((section, key))
            if spec is None:
                violations.append((f"{section}.{key}", "unknown key"))
                continue
            typ, allowed = spec
            try:
                val = {"int": int, "float": float, "str": str}[typ](raw)
            except ValueError:
                violations.append((f"{section}.{key}", f"expected {typ}, got {raw!r}"))
                continue
            if allowed is not None and val not in allowed:
                violations.append(
                    (f"{section}.{key}", f"must be one of {', '.join(allowed)}")
                )
                continue
            values[_FIELD_OF[(section, key)]] = val
    tolerances = {}
    if parser.has_section("tolerances"):
        for key, raw in parser["tolerances"].items():
            try:
                tolerances[key] = float(raw)
            except ValueError:
                violations.append((f"tolerances.{key}", f"expected float, got {raw!r}"))
    if "kind" not in values and not violations:
        violations.append(("experiment.kind", "missing required key"))
    cfg = ExperimentConfig(
        kind=values.get("kind", "simulate"),
        tolerances=tolerances,
        raw_text=text,
        **{k: v for k, v in values.items() if k != "kind"},
    )
    violations.extend(validate_config(cfg))
    if violations:
        raise ConfigError(violations)
    return cfg


def validate_config(cfg):
    violations = []
    if cfg.dt <= 0:
        violations.append(("schedule.dt", "must be positive"))
    elif cfg.t_max < cfg.dt:
        violations.append(("schedule.t_max", "must be at least dt"))
    if cfg.stride < 1:
        violations.append(("schedule.stride", "must be >= 1"))
    if cfg.n < 1:
        violations.append(("density.n", "must be >= 1"))
    if cfg.runs < 1:
        violations.append(("runs.count", "must be >= 1"))
    if cfg.strategy == "cloud" and cfg.particles < 100:
        violations.append(("runs.particles", "cloud strategy needs >= 100 particles"))
    if cfg.kind != "report" and cfg.seed is None:
        violations.append(("experiment.seed", "required for stochastic experiments"))
    return violations


@dataclass
class RunManifest:
    config_hash: str
    version: str
    seeds: list
    started: float
    finished: float = 0.0
    files: list = field(default_factory=list)
    checks_failed: int = 0

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(
                {
                    "config_hash": self.config_hash,
                    "version": self.version,
                    "seeds": list(self.seeds),
                    "started": self.started,
                    "finished": self.finished,
                    "files": sorted(self.files),
                    "checks_failed": self.checks_failed,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")


def run_seeds(base_seed, count):
    """Deterministic per-run seeds derived from the base seed."""
    return [int(base_seed) * 1_000_003 + i for i in range(count)]


def new_manifest(cfg, version, count=None):
    return RunManifest(
        config_hash=cfg.config_hash(),
        version=version,
        seeds=run_seeds(cfg.seed, count if count is not None else cfg.runs)
        if cfg.seed is not None
        else [],
        started=time.time(),
    )
