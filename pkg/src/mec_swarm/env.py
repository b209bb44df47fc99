"""Seeded generation of simulated IIoT offloading environments.

All randomness comes from a single PCG64 stream seeded by ``EnvConfig.seed``.
Draw order is fixed: for each device in index order the attributes
``data_size, completion_req, ram_req, network_speed``; then for each server
``speed, cost_rate, ram``. Changing this order changes every environment.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import ConfigError, ParseError, ValidationError

FORMAT_VERSION = 1
RNG_ALGORITHM = "PCG64"

DEVICE_FIELDS = ("data_size", "completion_req", "ram_req", "network_speed")
SERVER_FIELDS = ("speed", "cost_rate", "ram")

# Units: MB, MI, GB, Mbps / MI/s, $/s, GB
DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "data_size": (50.0, 150.0),
    "completion_req": (20.0, 40.0),
    "ram_req": (1.0, 2.0),
    "network_speed": (60.0, 900.0),
    "speed": (10.0, 200.0),
    "cost_rate": (0.02, 0.06),
    "ram": (2.0, 8.0),
}


@dataclass(frozen=True)
class Device:
    data_size: float
    completion_req: float
    ram_req: float
    network_speed: float


@dataclass(frozen=True)
class Server:
    speed: float
    cost_rate: float
    ram: float


def _default_ranges() -> dict[str, tuple[float, float]]:
    return dict(DEFAULT_RANGES)


@dataclass(frozen=True)
class EnvConfig:
    n_devices: int = 250
    n_servers: int = 20
    seed: int = 42
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=_default_ranges)

    def validate(self) -> None:
        if self.n_devices < 0:
            raise ConfigError(f"n_devices must be >= 0, got {self.n_devices}")
        if self.n_servers < 0:
            raise ConfigError(f"n_servers must be >= 0, got {self.n_servers}")
        if self.n_devices > 0 and self.n_servers < 1:
            raise ConfigError("at least one server is required when devices exist")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in DEVICE_FIELDS + SERVER_FIELDS:
            if name not in self.ranges:
                raise ConfigError(f"missing range for {name!r}")
            lo, hi = self.ranges[name]
            if not lo <= hi:
                raise ConfigError(f"range for {name!r} has lower > upper: [{lo}, {hi}]")
            if lo <= 0:
                raise ConfigError(f"range for {name!r} must be strictly positive: [{lo}, {hi}]")

    def to_dict(self) -> dict:
        return {
            "n_devices": self.n_devices,
            "n_servers": self.n_servers,
            "seed": self.seed,
            "ranges": {k: [float(v[0]), float(v[1])] for k, v in self.ranges.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EnvConfig":
        ranges = _default_ranges()
        for k, v in dict(data.get("ranges", {})).items():
            ranges[k] = (float(v[0]), float(v[1]))
        return cls(
            n_devices=int(data.get("n_devices", 250)),
            n_servers=int(data.get("n_servers", 20)),
            seed=int(data.get("seed", 42)),
            ranges=ranges,
        )


@dataclass(frozen=True)
class Environment:
    devices: tuple[Device, ...]
    servers: tuple[Server, ...]
    config: EnvConfig

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    # Column views used by the vectorized cost kernel.
    @cached_property
    def device_arrays(self) -> dict[str, np.ndarray]:
        return {
            name: np.array([getattr(d, name) for d in self.devices], dtype=np.float64)
            for name in DEVICE_FIELDS
        }

    @cached_property
    def server_arrays(self) -> dict[str, np.ndarray]:
        return {
            name: np.array([getattr(s, name) for s in self.servers], dtype=np.float64)
            for name in SERVER_FIELDS
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.devices == other.devices
            and self.servers == other.servers
            and self.config.to_dict() == other.config.to_dict()
        )

    def __hash__(self) -> int:
        return hash((self.devices, self.servers))


def _scale(u: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    lo, hi = bounds
    return lo + (hi - lo) * u


def generate_environment(config: EnvConfig) -> Environment:
    """Draw every device and server attribute uniformly from its range."""
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    r = config.ranges
    # Row-major (n, k) draws give exactly the documented per-entity order.
    du = rng.random((config.n_devices, len(DEVICE_FIELDS)))
    su = rng.random((config.n_servers, len(SERVER_FIELDS)))
    dcols = [_scale(du[:, k], r[name]) for k, name in enumerate(DEVICE_FIELDS)]
    scols = [_scale(su[:, k], r[name]) for k, name in enumerate(SERVER_FIELDS)]
    devices = tuple(
        Device(*(float(c[j]) for c in dcols)) for j in range(config.n_devices)
    )
    servers = tuple(
        Server(*(float(c[j]) for c in scols)) for j in range(config.n_servers)
    )
    return Environment(devices=devices, servers=servers, config=config)


def environment_to_dict(env: Environment) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "rng": RNG_ALGORITHM,
        "config": env.config.to_dict(),
        "devices": [{k: getattr(d, k) for k in DEVICE_FIELDS} for d in env.devices],
        "servers": [{k: getattr(s, k) for k in SERVER_FIELDS} for s in env.servers],
    }


def _read_entity(raw: object, fields: tuple[str, ...], where: str) -> list[float]:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected an object")
    values = []
    for name in fields:
        if name not in raw:
            raise ParseError(f"{where}: missing field {name!r}")
        v = raw[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{where}.{name}: expected a number, got {v!r}")
        v = float(v)
        if not np.isfinite(v) or v <= 0:
            raise ValidationError(f"{where}.{name} must be finite and positive, got {v!r}")
        values.append(v)
    return values


def environment_from_dict(data: object) -> Environment:
    if not isinstance(data, dict):
        raise ParseError("environment file must contain a JSON object")
    for key in ("format_version", "config", "devices", "servers"):
        if key not in data:
            raise ParseError(f"missing top-level field {key!r}")
    if data["format_version"] != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {data['format_version']!r}")
    if data.get("rng", RNG_ALGORITHM) != RNG_ALGORITHM:
        raise ParseError(f"unsupported rng {data['rng']!r}")
    try:
        config = EnvConfig.from_dict(data["config"])
    except (TypeError, ValueError, KeyError, IndexError, AttributeError) as exc:
        raise ParseError(f"config: {exc}") from exc
    devices = tuple(
        Device(*_read_entity(d, DEVICE_FIELDS, f"devices[{i}]"))
        for i, d in enumerate(data["devices"])
    )
    servers = tuple(
        Server(*_read_entity(s, SERVER_FIELDS, f"servers[{i}]"))
        for i, s in enumerate(data["servers"])
    )
    if len(devices) != config.n_devices or len(servers) != config.n_servers:
        raise ValidationError(
            f"entity counts ({len(devices)} devices, {len(servers)} servers) "
            f"do not match config ({config.n_devices}, {config.n_servers})"
        )
    return Environment(devices=devices, servers=servers, config=config)


def save_environment(env: Environment, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(environment_to_dict(env), fh, indent=1)
        fh.write("\n")


def load_environment(path: str | os.PathLike) -> Environment:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{os.fspath(path)}: {exc}") from exc
    return environment_from_dict(data)
