"""Run configuration: file loading, environment overrides, semantic hashing.

Precedence: CLI flags > MODALSHIFT_* environment variables > config file.
The config hash covers every input that can influence results (parameters
plus content digests of referenced files), so equal hashes imply equal
outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict

from .data import data_path
from .population import ConfigError


@dataclass
class RunConfig:
    seed: int = 0
    n_households: int = 1000
    city: str = ""
    survey: str | None = None
    tariffs: str | None = None
    expert: str | None = None
    scenario: str | None = None
    out_dir: str = "out"
    workers: int = 1
    ga_population_size: int = 50
    ga_generations: int = 100
    ga_mutation_rate: float = 0.2
    ga_crossover_rate: float = 0.9
    monthly_weights: list[float] | None = None
    equilibrium: list[float] | None = None
    carry_over_capacity: bool = False
    dump_alternatives: bool = False
    population: dict = field(default_factory=dict)

    def resolved_survey(self) -> str:
        return self.survey or str(data_path("survey_default.json"))

    def resolved_tariffs(self) -> str:
        return self.tariffs or str(data_path("tariffs_default.json"))

    def resolved_expert(self) -> str:
        return self.expert or str(data_path("expert_scores_default.json"))

    def validate(self) -> None:
        if self.n_households <= 0:
            raise ConfigError("n_households must be > 0")
        if not self.city:
            raise ConfigError("config: missing field 'city'")
        for label, path in (
            ("city", self.city),
            ("survey", self.resolved_survey()),
            ("tariffs", self.resolved_tariffs()),
            ("expert", self.resolved_expert()),
        ):
            if not os.path.exists(path):
                raise ConfigError(f"config: {label} file not found: {path}")
        if self.scenario and not os.path.exists(self.scenario):
            raise ConfigError(f"config: scenario file not found: {self.scenario}")


_CONFIG_KEYS = {
    "seed": int,
    "n_households": int,
    "city": str,
    "survey": str,
    "tariffs": str,
    "expert": str,
    "scenario": str,
    "out_dir": str,
    "workers": int,
    "ga_population_size": int,
    "ga_generations": int,
    "ga_mutation_rate": float,
    "ga_crossover_rate": float,
    "monthly_weights": list,
    "equilibrium": list,
    "carry_over_capacity": bool,
    "dump_alternatives": bool,
    "population": dict,
}


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if doc.get("schema_version") != 1:
        raise ConfigError(f"config: unsupported schema_version {doc.get('schema_version')!r}")
    cfg = RunConfig()
    base = os.path.dirname(os.path.abspath(path))
    for key, value in doc.items():
        if key == "schema_version":
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"config: unknown field '{key}'")
        setattr(cfg, key, value)
    # resolve relative paths against the config file location
    for key in ("city", "survey", "tariffs", "expert", "scenario"):
        value = getattr(cfg, key)
        if value and not os.path.isabs(value):
            setattr(cfg, key, os.path.join(base, value))
    return cfg


def apply_env_overrides(cfg: RunConfig, env=None) -> RunConfig:
    env = os.environ if env is None else env
    if "MODALSHIFT_SEED" in env:
        cfg.seed = int(env["MODALSHIFT_SEED"])
    if "MODALSHIFT_WORKERS" in env:
        cfg.workers = int(env["MODALSHIFT_WORKERS"])
    if "MODALSHIFT_OUT" in env:
        cfg.out_dir = env["MODALSHIFT_OUT"]
    return cfg


def _digest_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(cfg: RunConfig) -> str:
    """Digest of all result-affecting inputs (excludes out_dir and workers)."""
    payload = asdict(cfg)
    payload.pop("out_dir")
    payload.pop("workers")
    for key in ("city", "survey", "tariffs", "expert", "scenario"):
        path = {
            "city": cfg.city,
            "survey": cfg.resolved_survey(),
            "tariffs": cfg.resolved_tariffs(),
            "expert": cfg.resolved_expert(),
            "scenario": cfg.scenario,
        }[key]
        payload[key] = _digest_file(path) if path and os.path.exists(path) else None
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
