"""Global-best particle swarm optimisation over device-to-server assignments.

Each particle holds one continuous coordinate per device in ``[0, n_servers - EPS]``;
rounding (half up) and clamping decodes it to a server index.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import Assignment, FeasibilityMode, Objective, Penalty, Weights
from .env import Environment
from .errors import ConfigError, ContractError

EPS = 1e-6


@dataclass(frozen=True)
class PsoParams:
    w: float = 0.729
    c1: float = 1.49445
    c2: float = 1.49445
    n_particles: int = 30
    max_iters: int = 50
    u_low: float = 0.0
    u_high: float = 1.0
    # None means 0.2 * n_servers
    v_max: float | None = None
    # One U(a, b) draw per particle and term instead of per dimension.
    scalar_draws: bool = False

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigError("n_particles must be >= 2")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.u_low > self.u_high:
            raise ConfigError("u_low must be <= u_high")
        if self.v_max is not None and not self.v_max > 0:
            raise ConfigError("v_max must be > 0")
        if min(self.w, self.c1, self.c2) < 0:
            raise ConfigError("w, c1, c2 must be >= 0")

    def velocity_cap(self, n_servers: int) -> float:
        return self.v_max if self.v_max is not None else 0.2 * n_servers

    def with_coefficients(self, w: float, c1: float, c2: float) -> "PsoParams":
        return dataclasses.replace(self, w=w, c1=c1, c2=c2)


@dataclass(frozen=True)
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_cost: float


@dataclass
class SwarmState:
    """Struct-of-arrays swarm: row ``i`` of each matrix is particle ``i``."""

    positions: np.ndarray
    velocities: np.ndarray
    costs: np.ndarray
    pbest_positions: np.ndarray
    pbest_costs: np.ndarray
    gbest_position: np.ndarray
    gbest_cost: float
    n_servers: int
    iteration: int = 0

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def gbest_index(self) -> int:
        return int(np.argmin(self.pbest_costs))

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(self.positions[i], self.velocities[i], self.pbest_positions[i], float(self.pbest_costs[i]))
            for i in range(self.n_particles)
        ]

    def copy(self) -> "SwarmState":
        return SwarmState(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            costs=self.costs.copy(),
            pbest_positions=self.pbest_positions.copy(),
            pbest_costs=self.pbest_costs.copy(),
            gbest_position=self.gbest_position.copy(),
            gbest_cost=self.gbest_cost,
            n_servers=self.n_servers,
            iteration=self.iteration,
        )


@dataclass
class RunResult:
    best_cost: float
    best_assignment: Assignment
    curve: list[float]
    wall_time: float
    coefficient_trace: list[tuple[float, float, float]] = field(default_factory=list)
    # Seconds spent in swarm statistics (distances); 0 for baseline PSO.
    stats_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "best_cost": self.best_cost,
            "best_assignment": list(self.best_assignment.server_of),
            "curve": list(self.curve),
            "coefficient_trace": [list(c) for c in self.coefficient_trace],
        }


def decode(position: np.ndarray, n_servers: int) -> np.ndarray:
    """Round half up, then clamp into ``[0, n_servers - 1]``. Works row-wise on 2-D input."""
    idx = np.floor(np.asarray(position, dtype=np.float64) + 0.5)
    return np.clip(idx, 0, n_servers - 1).astype(np.intp)


def swarm_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def init_swarm(env: Environment, params: PsoParams, seed_or_rng, objective: Callable | None = None) -> SwarmState:
    if env.n_devices == 0 or env.n_servers == 0:
        raise ContractError("cannot initialise a swarm on an empty environment")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else swarm_rng(seed_or_rng)
    objective = objective if objective is not None else Objective(env)
    P, D, S = params.n_particles, env.n_devices, env.n_servers
    vmax = params.velocity_cap(S)
    positions = rng.uniform(0.0, S - EPS, size=(P, D))
    velocities = rng.uniform(-vmax, vmax, size=(P, D))
    costs = objective(decode(positions, S))
    g = int(np.argmin(costs))
    return SwarmState(
        positions=positions,
        velocities=velocities,
        costs=costs,
        pbest_positions=positions.copy(),
        pbest_costs=costs.copy(),
        gbest_position=positions[g].copy(),
        gbest_cost=float(costs[g]),
        n_servers=S,
    )


def velocity_update(x, v, pbest, gbest, w, c1, c2, r1, r2):
    """The inertia + cognitive + social velocity rule, without clamping."""
    return w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)


def step(
    swarm: SwarmState,
    params: PsoParams,
    objective: Callable,
    rng: np.random.Generator,
    coefficients: tuple[float, float, float] | None = None,
) -> SwarmState:
    """Advance the swarm one iteration in place and return it.

    ``coefficients`` overrides ``(w, c1, c2)`` from ``params`` for this step.
    """
    w, c1, c2 = coefficients if coefficients is not None else (params.w, params.c1, params.c2)
    P, D = swarm.positions.shape
    S = swarm.n_servers
    shape = (P, 1) if params.scalar_draws else (P, D)
    r1 = rng.uniform(params.u_low, params.u_high, size=shape)
    r2 = rng.uniform(params.u_low, params.u_high, size=shape)
    vmax = params.velocity_cap(S)

    v = velocity_update(
        swarm.positions, swarm.velocities, swarm.pbest_positions, swarm.gbest_position,
        w, c1, c2, r1, r2,
    )
    np.clip(v, -vmax, vmax, out=v)
    x = swarm.positions + v
    np.clip(x, 0.0, S - EPS, out=x)
    swarm.velocities = v
    swarm.positions = x

    costs = objective(decode(x, S))
    swarm.costs = costs
    improved = costs < swarm.pbest_costs
    swarm.pbest_positions[improved] = x[improved]
    swarm.pbest_costs[improved] = costs[improved]
    g = int(np.argmin(swarm.pbest_costs))
    if swarm.pbest_costs[g] < swarm.gbest_cost:
        swarm.gbest_cost = float(swarm.pbest_costs[g])
        swarm.gbest_position = swarm.pbest_positions[g].copy()
    swarm.iteration += 1
    return swarm


def finish(swarm: SwarmState, curve, wall_time, trace, stats_time=0.0) -> RunResult:
    best = decode(swarm.gbest_position, swarm.n_servers)
    return RunResult(
        best_cost=swarm.gbest_cost,
        best_assignment=Assignment(tuple(int(s) for s in best)),
        curve=list(curve),
        wall_time=wall_time,
        coefficient_trace=list(trace),
        stats_time=stats_time,
    )


def run(
    env: Environment,
    params: PsoParams = PsoParams(),
    weights: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    seed: int = 0,
    *,
    objective: Objective | None = None,
) -> RunResult:
    objective = objective if objective is not None else Objective(env, weights, mode)
    t0 = time.perf_counter()
    rng = swarm_rng(seed)
    swarm = init_swarm(env, params, rng, objective)
    curve = [swarm.gbest_cost]
    trace = []
    for _ in range(params.max_iters):
        step(swarm, params, objective, rng)
        curve.append(swarm.gbest_cost)
        trace.append((params.w, params.c1, params.c2))
    return finish(swarm, curve, time.perf_counter() - t0, trace)
