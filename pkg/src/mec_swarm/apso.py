"""Adaptive PSO driven by evolutionary state estimation.

Every iteration the swarm's spread is summarised by the evolutionary factor
``f``: the mean distance of the global-best particle to the rest of the swarm,
normalised between the smallest and largest per-particle mean distances.
``f`` selects one of four states, which nudge the acceleration coefficients,
and sets the inertia weight through a sigmoid.
"""

from __future__ import annotations

import enum
import functools
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import pso
from .cost import FeasibilityMode, Objective, Penalty, Weights
from .env import Environment
from .errors import ConfigError, ContractError


class EvolutionaryState(enum.Enum):
    CONVERGENCE = "convergence"
    EXPLOITATION = "exploitation"
    EXPLORATION = "exploration"
    JUMPING_OUT = "jumping_out"


@dataclass(frozen=True)
class ApsoParams:
    base: pso.PsoParams = field(default_factory=pso.PsoParams)
    # Starting (c1, c2); None keeps base.c1/base.c2.
    c_init: tuple[float, float] | None = (2.0, 2.0)
    c_min: float = 1.5
    c_max: float = 2.5
    c_sum_max: float = 4.0
    delta_range: tuple[float, float] = (0.05, 0.1)
    adapt_w: bool = True
    els_enabled: bool = False
    els_sigma_range: tuple[float, float] = (0.1, 1.0)

    def __post_init__(self):
        if not 0 < self.c_min < self.c_max:
            raise ConfigError("need 0 < c_min < c_max")
        if self.c_sum_max < 2 * self.c_min:
            raise ConfigError("c_sum_max must be >= 2 * c_min")
        lo, hi = self.delta_range
        # (0, 0) is allowed: it switches coefficient adaptation off.
        if not (0 <= lo <= hi < 1):
            raise ConfigError("delta_range must satisfy 0 <= lo <= hi < 1")
        slo, shi = self.els_sigma_range
        if not 0 <= slo <= shi:
            raise ConfigError("els_sigma_range must satisfy 0 <= lo <= hi")

    def initial_coefficients(self) -> tuple[float, float]:
        if self.c_init is None:
            return self.base.c1, self.base.c2
        return self.c_init


def distance_matrix(positions: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between particle positions."""
    return squareform(pdist(positions))


def mean_distances(dist: np.ndarray) -> np.ndarray:
    n = dist.shape[0]
    return dist.sum(axis=1) / (n - 1)


@functools.lru_cache(maxsize=8)
def _pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, 1)


def particle_mean_distances(positions: np.ndarray) -> np.ndarray:
    """Mean distance from each particle to the others, without the square matrix."""
    n = positions.shape[0]
    cond = pdist(positions)
    i, j = _pair_index(n)
    return (np.bincount(i, cond, n) + np.bincount(j, cond, n)) / (n - 1)


def evolutionary_factor(swarm: pso.SwarmState, dist: np.ndarray | None = None) -> float:
    if swarm.n_particles < 2:
        raise ContractError("evolutionary factor needs at least two particles")
    if dist is None:
        dist = distance_matrix(swarm.positions)
    return factor_from_distances(dist, swarm.gbest_index)


def factor_from_distances(dist: np.ndarray, best_index: int) -> float:
    return factor_from_means(mean_distances(dist), best_index)


def factor_from_means(d, best_index: int) -> float:
    d = d.tolist() if isinstance(d, np.ndarray) else d
    d_min, d_max = min(d), max(d)
    if d_max == d_min:
        return 0.0
    f = (d[best_index] - d_min) / (d_max - d_min)
    return float(min(1.0, max(0.0, f)))


def classify_state(f: float, prev: EvolutionaryState | None = None) -> EvolutionaryState:
    # prev is reserved for a hysteresis variant.
    if f < 0.25:
        return EvolutionaryState.CONVERGENCE
    if f < 0.5:
        return EvolutionaryState.EXPLOITATION
    if f < 0.75:
        return EvolutionaryState.EXPLORATION
    return EvolutionaryState.JUMPING_OUT


_RULES = {
    EvolutionaryState.EXPLORATION: (1.0, -1.0),
    EvolutionaryState.EXPLOITATION: (0.5, -0.5),
    EvolutionaryState.CONVERGENCE: (0.5, 0.5),
    EvolutionaryState.JUMPING_OUT: (-1.0, 1.0),
}


def adjust(state: EvolutionaryState, c1: float, c2: float, d1: float, d2: float, params: ApsoParams):
    """Apply the state rule with given step sizes, clamp, and cap the sum."""
    s1, s2 = _RULES[state]
    c1 = c1 + s1 * d1
    c2 = c2 + s2 * d2
    c1 = min(params.c_max, max(params.c_min, c1))
    c2 = min(params.c_max, max(params.c_min, c2))
    total = c1 + c2
    if total > params.c_sum_max:
        scale = params.c_sum_max / total
        c1, c2 = c1 * scale, c2 * scale
    return c1, c2


def adapt_coefficients(state, c1, c2, rng: np.random.Generator, params: ApsoParams):
    d1, d2 = rng.uniform(*params.delta_range, size=2)
    return adjust(state, c1, c2, float(d1), float(d2), params)


def adapt_inertia(f: float) -> float:
    return 1.0 / (1.0 + 1.5 * np.exp(-2.6 * f))


def els_sigma(iteration: int, max_iters: int, sigma_range: tuple[float, float]) -> float:
    lo, hi = sigma_range
    if max_iters <= 0:
        return hi
    frac = min(1.0, iteration / max_iters)
    return hi - (hi - lo) * frac


def elitist_learning(
    swarm: pso.SwarmState,
    rng: np.random.Generator,
    params: ApsoParams,
    objective,
    max_iters: int | None = None,
) -> pso.SwarmState:
    """Perturb one coordinate of gbest and let it replace the worst particle if better."""
    max_iters = params.base.max_iters if max_iters is None else max_iters
    S = swarm.n_servers
    sigma = els_sigma(swarm.iteration, max_iters, params.els_sigma_range)
    candidate = swarm.gbest_position.copy()
    d = int(rng.integers(candidate.shape[0]))
    candidate[d] = min(S - pso.EPS, max(0.0, candidate[d] + sigma * rng.standard_normal()))
    cost = float(objective(pso.decode(candidate, S))[0])
    worst = int(np.argmax(swarm.costs))
    if cost < swarm.pbest_costs[worst]:
        swarm.positions[worst] = candidate
        swarm.costs[worst] = cost
        swarm.pbest_positions[worst] = candidate
        swarm.pbest_costs[worst] = cost
        if cost < swarm.gbest_cost:
            swarm.gbest_cost = cost
            swarm.gbest_position = candidate.copy()
    return swarm


def adapt_rng(seed: int) -> np.random.Generator:
    # Separate from the swarm stream so disabling adaptation leaves swarm draws untouched.
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xA950])))


def run_apso(
    env: Environment,
    params: ApsoParams = ApsoParams(),
    weights: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    seed: int = 0,
    *,
    objective: Objective | None = None,
) -> pso.RunResult:
    objective = objective if objective is not None else Objective(env, weights, mode)
    base = params.base
    t0 = time.perf_counter()
    rng = pso.swarm_rng(seed)
    arng = adapt_rng(seed)
    swarm = pso.init_swarm(env, base, rng, objective)
    curve = [swarm.gbest_cost]
    trace = []
    c1, c2 = params.initial_coefficients()
    state = None
    stats_time = 0.0
    for _ in range(base.max_iters):
        ts = time.perf_counter()
        f = evolutionary_factor(swarm)
        stats_time += time.perf_counter() - ts
        state = classify_state(f, state)
        w = adapt_inertia(f) if params.adapt_w else base.w
        c1, c2 = adapt_coefficients(state, c1, c2, arng, params)
        pso.step(swarm, base.with_coefficients(w, c1, c2), objective, rng)
        if params.els_enabled:
            elitist_learning(swarm, arng, params, objective)
        curve.append(swarm.gbest_cost)
        trace.append((float(w), float(c1), float(c2)))
    return pso.finish(swarm, curve, time.perf_counter() - t0, trace, stats_time)
