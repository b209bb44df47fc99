"""Weighted computational-cost plus latency objective for an assignment.

For device ``j`` on server ``s``::

    T_j = data_size_j * MBIT_PER_MBYTE / network_speed_j + completion_req_j / speed_s
    C_j = cost_rate_s * T_j   if ram_req_j <= ram_s   else 0
    total = sum_j (m * C_j + n * T_j)  [+ penalty * n_infeasible]

Sums are accumulated left to right in device order on every code path, so the
scalar and batched evaluators agree bit for bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .env import Device, Environment, Server
from .errors import CapExceededError, ConfigError, ContractError

MBIT_PER_MBYTE = 8.0
DEFAULT_PENALTY = 1e3
DEFAULT_ORACLE_CAP = 10**6


@dataclass(frozen=True)
class Weights:
    m: float = 10.0
    n: float = 1e-2

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or (self.m == 0 and self.n == 0):
            raise ConfigError(f"weights must be >= 0 and not both zero, got m={self.m}, n={self.n}")


@dataclass(frozen=True)
class PaperLiteral:
    """Infeasible devices contribute zero computational cost and nothing else."""


@dataclass(frozen=True)
class Penalty:
    penalty_per_violation: float = DEFAULT_PENALTY

    def __post_init__(self):
        if not self.penalty_per_violation > 0:
            raise ConfigError("penalty_per_violation must be > 0")


FeasibilityMode = Union[PaperLiteral, Penalty]


@dataclass(frozen=True)
class Assignment:
    server_of: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.server_of)

    def validate(self, env: Environment) -> None:
        if len(self.server_of) != env.n_devices:
            raise ContractError(
                f"assignment has {len(self.server_of)} entries for {env.n_devices} devices"
            )
        for j, s in enumerate(self.server_of):
            if not 0 <= s < env.n_servers:
                raise ContractError(f"device {j} assigned to server {s}, outside [0, {env.n_servers})")


@dataclass
class CostBreakdown:
    total: float
    per_device_time: list[float] = field(default_factory=list)
    per_device_cost: list[float] = field(default_factory=list)
    infeasible_count: int = 0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_device_time": list(self.per_device_time),
            "per_device_cost": list(self.per_device_cost),
            "infeasible_count": self.infeasible_count,
        }


def device_time(device: Device, server: Server, *, mbit_per_mbyte: float = MBIT_PER_MBYTE) -> float:
    """Transfer time plus processing time, in seconds."""
    if not device.network_speed > 0 or not server.speed > 0:
        raise ContractError("network_speed and server speed must be positive")
    return device.data_size * mbit_per_mbyte / device.network_speed + device.completion_req / server.speed


def device_comp_cost(
    device: Device,
    server: Server,
    mode: FeasibilityMode = Penalty(),
    *,
    mbit_per_mbyte: float = MBIT_PER_MBYTE,
) -> float:
    # Penalty is applied in total_cost; both modes yield 0 here when infeasible.
    t = device_time(device, server, mbit_per_mbyte=mbit_per_mbyte)
    if device.ram_req <= server.ram:
        return server.cost_rate * t
    return 0.0


def _penalty_of(mode: FeasibilityMode) -> float:
    return mode.penalty_per_violation if isinstance(mode, Penalty) else 0.0


def total_cost(
    env: Environment,
    a: Assignment,
    w: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    *,
    mbit_per_mbyte: float = MBIT_PER_MBYTE,
) -> CostBreakdown:
    a.validate(env)
    times, costs = [], []
    total = 0.0
    infeasible = 0
    for device, s in zip(env.devices, a.server_of):
        server = env.servers[s]
        t = device_time(device, server, mbit_per_mbyte=mbit_per_mbyte)
        c = device_comp_cost(device, server, mode, mbit_per_mbyte=mbit_per_mbyte)
        if device.ram_req > server.ram:
            infeasible += 1
        total += w.m * c + w.n * t
        times.append(t)
        costs.append(c)
    if infeasible:
        total = total + _penalty_of(mode) * infeasible
    return CostBreakdown(total=total, per_device_time=times, per_device_cost=costs, infeasible_count=infeasible)


class Objective:
    """Batched total cost over rows of server indices.

    ``objective(A)`` with ``A`` of shape ``(k, n_devices)`` returns ``k`` totals,
    each equal bit for bit to ``total_cost(...).total`` of that row.
    """

    def __init__(
        self,
        env: Environment,
        weights: Weights = Weights(),
        mode: FeasibilityMode = Penalty(),
        *,
        mbit_per_mbyte: float = MBIT_PER_MBYTE,
    ):
        self.env = env
        self.weights = weights
        self.mode = mode
        self.mbit_per_mbyte = mbit_per_mbyte
        d, s = env.device_arrays, env.server_arrays
        self._transfer = d["data_size"] * mbit_per_mbyte / d["network_speed"] if env.n_devices else np.zeros(0)
        self._work = d["completion_req"]
        self._ram_req = d["ram_req"]
        self._speed = s["speed"]
        self._rate = s["cost_rate"]
        self._ram = s["ram"]
        self._penalty = _penalty_of(mode)

    @property
    def n_devices(self) -> int:
        return self.env.n_devices

    @property
    def n_servers(self) -> int:
        return self.env.n_servers

    def __call__(self, assignments: np.ndarray) -> np.ndarray:
        A = np.asarray(assignments, dtype=np.intp)
        if A.ndim == 1:
            A = A[None, :]
        if A.shape[1] == 0:
            return np.zeros(A.shape[0])
        T = self._transfer + self._work / self._speed[A]
        feasible = self._ram_req <= self._ram[A]
        C = np.where(feasible, self._rate[A] * T, 0.0)
        terms = self.weights.m * C + self.weights.n * T
        # add.accumulate is strictly sequential, matching the scalar loop.
        totals = np.add.accumulate(terms, axis=1)[:, -1]
        if self._penalty:
            bad = A.shape[1] - np.count_nonzero(feasible, axis=1)
            totals = np.where(bad > 0, totals + self._penalty * bad, totals)
        return totals


def brute_force_optimum(
    env: Environment,
    w: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    *,
    cap: int = DEFAULT_ORACLE_CAP,
    mbit_per_mbyte: float = MBIT_PER_MBYTE,
    chunk: int = 65536,
) -> tuple[Assignment, float]:
    """Exhaustive minimum over all ``n_servers ** n_devices`` assignments.

    Enumeration runs in lexicographic order and keeps the first minimum, so ties
    resolve to the lexicographically smallest assignment.
    """
    n_dev, n_srv = env.n_devices, env.n_servers
    if n_dev == 0:
        return Assignment(()), 0.0
    size = n_srv**n_dev
    if size > cap:
        raise CapExceededError(
            f"{n_srv}^{n_dev} = {size} assignments exceeds the enumeration cap {cap}"
        )
    objective = Objective(env, w, mode, mbit_per_mbyte=mbit_per_mbyte)
    best_cost = math.inf
    best_row = None
    it = itertools.product(range(n_srv), repeat=n_dev)
    while True:
        rows = list(itertools.islice(it, chunk))
        if not rows:
            break
        block = np.array(rows, dtype=np.intp)
        costs = objective(block)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost = float(costs[k])
            best_row = rows[k]
    return Assignment(tuple(int(s) for s in best_row)), best_cost


def assignment_from_sequence(values: Sequence[int]) -> Assignment:
    return Assignment(tuple(int(v) for v in values))
