"""Experiment configuration: JSON file values overlaid by command-line flags."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import apso, pso
from ..cost import MBIT_PER_MBYTE, PaperLiteral, Penalty, Weights
from ..env import EnvConfig
from ..errors import ConfigError

METHODS = ("pso", "apso", "apsosac")
SEED_ENV = "MEC_SWARM_SEED"
THREADS_ENV = "MEC_SWARM_THREADS"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 42
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1") or "1"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    # Extra environment seeds (evaluate); empty means [env.seed].
    env_seeds: tuple[int, ...] = ()
    methods: tuple[str, ...] = ("pso", "apso", "apsosac")
    weights: Weights = field(default_factory=Weights)
    mode: str = "penalty"
    penalty: float = 1e3
    mbit_per_mbyte: float = MBIT_PER_MBYTE
    runs: int = 10
    master_seed: int = 42
    resample_env: bool = False
    pso: pso.PsoParams = field(default_factory=pso.PsoParams)
    apso_els: bool = False
    checkpoint: str | None = None
    out_dir: str = "results"

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if "apsosac" in self.methods and not self.checkpoint:
            raise ConfigError("method apsosac requires a checkpoint path")
        if self.mode not in ("penalty", "paper_literal"):
            raise ConfigError(f"mode must be 'penalty' or 'paper_literal', got {self.mode!r}")

    @property
    def feasibility(self):
        return Penalty(self.penalty) if self.mode == "penalty" else PaperLiteral()

    @property
    def apso_params(self) -> apso.ApsoParams:
        return apso.ApsoParams(base=self.pso, els_enabled=self.apso_els)

    def env_seed_list(self) -> list[int]:
        return list(self.env_seeds) if self.env_seeds else [self.env.seed]

    def to_dict(self) -> dict:
        return {
            "env": self.env.to_dict(),
            "env_seeds": list(self.env_seeds),
            "methods": list(self.methods),
            "weights": {"m": self.weights.m, "n": self.weights.n},
            "mode": self.mode,
            "penalty": self.penalty,
            "mbit_per_mbyte": self.mbit_per_mbyte,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "resample_env": self.resample_env,
            "pso": dataclasses.asdict(self.pso),
            "apso_els": self.apso_els,
            "checkpoint": self.checkpoint,
        }


def swarm_seed(master_seed: int, run: int) -> int:
    return int(np.random.SeedSequence([master_seed, 0xB3, run]).generate_state(1, dtype=np.uint64)[0])


def resampled_env_seed(master_seed: int, run: int) -> int:
    return int(np.random.SeedSequence([master_seed, 0xE5, run]).generate_state(1, dtype=np.uint64)[0])


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}
