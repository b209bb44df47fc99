"""APSO-SAC: a SAC agent choosing PSO acceleration coefficients each iteration.

One episode is one optimisation run of ``max_iters`` steps. The agent sees six
normalised swarm statistics, emits an action in ``[-1, 1]^2`` that maps affinely
onto ``(c1, c2)``, and is rewarded with the relative gbest improvement, so an
episode's return telescopes to ``(init_best - final_best) / init_best``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import apso, pso
from .cost import FeasibilityMode, Objective, Penalty, Weights
from .env import EnvConfig, Environment, generate_environment
from .errors import ConfigError, ContractError
from .sac import Batch, ReplayBuffer, SacAgent, SacParams, Transition, load_checkpoint_with_extra

log = logging.getLogger(__name__)

OBS_DIM = 6


@dataclass(frozen=True)
class ActionMapping:
    c_min: float = 0.5
    c_max: float = 2.5

    def __post_init__(self):
        if not self.c_min < self.c_max:
            raise ConfigError("c_min must be < c_max")

    def to_coeff(self, a):
        a = np.clip(np.asarray(a, dtype=np.float64), -1.0, 1.0)
        return self.c_min + (a + 1.0) * 0.5 * (self.c_max - self.c_min)

    def to_action(self, c):
        c = np.asarray(c, dtype=np.float64)
        return 2.0 * (c - self.c_min) / (self.c_max - self.c_min) - 1.0


@dataclass(frozen=True)
class ControllerParams:
    pso: pso.PsoParams = field(default_factory=pso.PsoParams)
    mapping: ActionMapping = field(default_factory=ActionMapping)
    # Starting coefficients shown in the first observation.
    c_init: tuple[float, float] = (1.49445, 1.49445)
    # 3-action variant: the agent also picks w, mapped onto w_range.
    control_inertia: bool = False
    w_range: tuple[float, float] = (0.4, 0.9)
    # Fix w instead of adapt_inertia(f); used for reduction checks.
    pin_inertia: float | None = None

    @property
    def act_dim(self) -> int:
        return 3 if self.control_inertia else 2


class Policy(Protocol):
    def select_action(self, state, deterministic: bool = False, rng=None) -> np.ndarray: ...


@dataclass
class EpisodeRecord:
    env_seed: int
    swarm_seed: int
    observations: list[list[float]]
    actions: list[list[float]]
    rewards: list[float]
    init_best: float
    final_best: float
    result: pso.RunResult
    baseline_cost: float | None = None

    @property
    def episode_return(self) -> float:
        return math.fsum(self.rewards)

    def telescoping_gap(self) -> float:
        return abs(sum(self.rewards) - (self.init_best - self.final_best) / self.init_best)


def make_observation(
    swarm: pso.SwarmState,
    prev_best: float,
    init_best: float,
    params: ControllerParams,
    c1: float,
    c2: float,
    mean_dist: np.ndarray | None = None,
) -> np.ndarray:
    if not init_best > 0:
        raise ContractError(f"init_best must be positive, got {init_best}")
    if mean_dist is None:
        mean_dist = apso.particle_mean_distances(swarm.positions)
    d = mean_dist.tolist()
    f = apso.factor_from_means(d, int(swarm.pbest_costs.argmin()))
    improvement = min(1.0, max(0.0, (prev_best - swarm.gbest_cost) / init_best))
    n_dev = swarm.positions.shape[1]
    diversity = min(1.0, max(0.0, math.fsum(d) / len(d) / (swarm.n_servers * math.sqrt(n_dev))))
    progress = swarm.iteration / params.pso.max_iters if params.pso.max_iters else 1.0
    m = params.mapping
    span = m.c_max - m.c_min
    a1 = 2.0 * (c1 - m.c_min) / span - 1.0
    a2 = 2.0 * (c2 - m.c_min) / span - 1.0
    return np.array([f, improvement, diversity, min(1.0, progress), a1, a2], dtype=np.float64)


def compute_reward(prev_best: float, new_best: float, init_best: float) -> float:
    if not init_best > 0:
        raise ContractError(f"init_best must be positive, got {init_best}")
    return (prev_best - new_best) / init_best


def _coefficients(action: np.ndarray, f: float, params: ControllerParams) -> tuple[float, float, float]:
    m = params.mapping
    half = 0.5 * (m.c_max - m.c_min)
    c1 = m.c_min + (min(1.0, max(-1.0, float(action[0]))) + 1.0) * half
    c2 = m.c_min + (min(1.0, max(-1.0, float(action[1]))) + 1.0) * half
    if params.control_inertia:
        lo, hi = params.w_range
        w = lo + (min(1.0, max(-1.0, float(action[2]))) + 1.0) * 0.5 * (hi - lo)
    elif params.pin_inertia is not None:
        w = params.pin_inertia
    else:
        w = float(apso.adapt_inertia(f))
    return w, c1, c2


def run_episode(
    agent: Policy,
    env: Environment,
    params: ControllerParams = ControllerParams(),
    seed: int = 0,
    training: bool = False,
    *,
    weights: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    objective: Objective | None = None,
    buffer: ReplayBuffer | None = None,
    action_fn=None,
    on_step=None,
    env_seed: int | None = None,
) -> EpisodeRecord:
    """One optimisation run under the agent's control.

    ``action_fn(obs)`` overrides the agent's action choice (used for warm-up
    exploration). Transitions go to ``buffer`` when ``training`` is set, and
    ``on_step()`` runs after each environment step.
    """
    objective = objective if objective is not None else Objective(env, weights, mode)
    base = params.pso
    t0 = time.perf_counter()
    rng = pso.swarm_rng(seed)
    swarm = pso.init_swarm(env, base, rng, objective)
    init_best = swarm.gbest_cost
    prev_best = init_best
    c1, c2 = params.c_init
    curve = [init_best]
    trace, observations, actions, rewards = [], [], [], []
    stats_time = 0.0

    ts = time.perf_counter()
    obs = make_observation(swarm, prev_best, init_best, params, c1, c2)
    stats_time += time.perf_counter() - ts
    for t in range(base.max_iters):
        if action_fn is not None:
            action = np.asarray(action_fn(obs), dtype=np.float64)
        else:
            action = np.asarray(agent.select_action(obs, deterministic=not training), dtype=np.float64)
        w, c1, c2 = _coefficients(action, float(obs[0]), params)
        before = swarm.gbest_cost
        pso.step(swarm, base, objective, rng, coefficients=(w, c1, c2))
        reward = compute_reward(before, swarm.gbest_cost, init_best)

        ts = time.perf_counter()
        next_obs = make_observation(swarm, before, init_best, params, c1, c2)
        stats_time += time.perf_counter() - ts

        done = t == base.max_iters - 1
        if training and buffer is not None:
            buffer.store(Transition(obs, action, reward, next_obs, done))
        if on_step is not None:
            on_step()
        observations.append(obs.tolist())
        actions.append(action.tolist())
        rewards.append(reward)
        curve.append(swarm.gbest_cost)
        trace.append((w, c1, c2))
        obs = next_obs
    result = pso.finish(swarm, curve, time.perf_counter() - t0, trace, stats_time)
    return EpisodeRecord(
        env_seed=env.config.seed if env_seed is None else env_seed,
        swarm_seed=seed,
        observations=observations,
        actions=actions,
        rewards=rewards,
        init_best=init_best,
        final_best=swarm.gbest_cost,
        result=result,
    )


def run_apsosac(
    agent: Policy,
    env: Environment,
    params: ControllerParams = ControllerParams(),
    weights: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    seed: int = 0,
    *,
    objective: Objective | None = None,
) -> pso.RunResult:
    """Inference run with the deterministic policy, shaped like ``pso.run``."""
    return run_episode(agent, env, params, seed, training=False, weights=weights, mode=mode, objective=objective).result


# -- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    master_seed: int = 0
    total_steps: int = 100_000
    env: EnvConfig = field(default_factory=EnvConfig)
    controller: ControllerParams = field(default_factory=ControllerParams)
    sac: SacParams = field(default_factory=SacParams)
    weights: Weights = field(default_factory=Weights)
    mode: FeasibilityMode = field(default_factory=Penalty)
    eval_every: int = 50
    eval_seeds: tuple[int, ...] = (0, 1, 2)
    checkpoint_every: int = 200
    checkpoint_path: str | None = None
    log_path: str | None = None

    def __post_init__(self):
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if self.controller.pso.max_iters < 1:
            raise ConfigError("training needs max_iters >= 1")

    @property
    def n_episodes(self) -> int:
        it = self.controller.pso.max_iters
        return -(-self.total_steps // it)


_TRAIN_TAG = 0x7A1
_EVAL_TAG = 0xE7A


def episode_seeds(master_seed: int, episode: int) -> tuple[int, int]:
    """(env seed, swarm seed) for a training episode."""
    ss = np.random.SeedSequence([master_seed, _TRAIN_TAG, episode])
    env_seed, swarm_seed = ss.generate_state(2, dtype=np.uint64)
    return int(env_seed), int(swarm_seed)


def eval_seeds(master_seed: int, index: int) -> tuple[int, int]:
    ss = np.random.SeedSequence([master_seed, _EVAL_TAG, index])
    env_seed, swarm_seed = ss.generate_state(2, dtype=np.uint64)
    return int(env_seed), int(swarm_seed)


@dataclass
class TrainResult:
    agent: SacAgent
    log: list[dict]
    episodes: int
    env_steps: int


def _jsonable(v):
    if isinstance(v, float):
        return v
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def train(cfg: TrainConfig, resume: bool = False) -> TrainResult:
    """Train an agent over freshly generated environments, one episode per environment.

    Deterministic in ``cfg.master_seed``. With ``resume`` the checkpoint (and its
    replay sidecar) at ``cfg.checkpoint_path`` is loaded and training continues
    from the stored episode.
    """
    sp = cfg.sac
    act_dim = cfg.controller.act_dim
    agent = SacAgent(OBS_DIM, act_dim, sp, seed=cfg.master_seed)
    buffer = ReplayBuffer(sp.replay_capacity, OBS_DIM, act_dim)
    explore_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.master_seed, 0xE4])))
    start_episode = 0
    env_steps = 0
    records: list[dict] = []

    if resume:
        if not cfg.checkpoint_path or not os.path.exists(cfg.checkpoint_path):
            raise ConfigError("resume requested but no checkpoint exists")
        agent, extra = load_checkpoint_with_extra(cfg.checkpoint_path)
        if agent.params.hidden != sp.hidden or agent.act_dim != act_dim:
            raise ConfigError("checkpoint network shape does not match the training config")
        # Budget and schedule settings may change between sessions; the stored ones are superseded.
        agent.params = sp
        start_episode = int(extra["episode"])
        env_steps = int(extra["env_steps"])
        explore_rng.bit_generator.state = extra["explore_rng"]
        buffer = ReplayBuffer.load(_replay_path(cfg.checkpoint_path), sp.replay_capacity)
        if cfg.log_path and os.path.exists(cfg.log_path):
            with open(cfg.log_path, encoding="utf-8") as fh:
                records = [json.loads(line) for line in fh if line.strip()]
            # Drop entries written after the checkpoint was taken.
            records = [r for r in records if r["episode"] < start_episode]

    for path in (cfg.log_path, cfg.checkpoint_path):
        if path and os.path.dirname(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
    log_fh = None
    if cfg.log_path:
        log_fh = open(cfg.log_path, "w", encoding="utf-8")
        for rec in records:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def emit(rec: dict) -> None:
        records.append(rec)
        if log_fh:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def save(episode: int) -> None:
        if not cfg.checkpoint_path:
            return
        agent.save_checkpoint(cfg.checkpoint_path, extra={
            "episode": episode,
            "env_steps": env_steps,
            "explore_rng": explore_rng.bit_generator.state,
            "controller": controller_params_to_dict(cfg.controller),
        })
        buffer.save(_replay_path(cfg.checkpoint_path))

    uniform = lambda obs: explore_rng.uniform(-1.0, 1.0, size=act_dim)
    try:
        for episode in range(start_episode, cfg.n_episodes):
            env_seed, swarm_seed = episode_seeds(cfg.master_seed, episode)
            env = generate_environment(dataclasses.replace(cfg.env, seed=env_seed))
            warm = env_steps < sp.warmup_steps
            losses = {}

            def on_step():
                nonlocal env_steps, losses
                env_steps += 1
                if env_steps >= sp.warmup_steps and len(buffer) >= sp.batch_size and env_steps % sp.update_every == 0:
                    losses = agent.update(buffer.sample(sp.batch_size, agent.rng))

            rec = run_episode(
                agent, env, cfg.controller, swarm_seed, training=True,
                weights=cfg.weights, mode=cfg.mode, buffer=buffer,
                action_fn=uniform if warm else None, on_step=on_step,
            )
            entry = {
                "type": "train",
                "episode": episode,
                "steps": env_steps,
                "return": rec.episode_return,
                "init_best": rec.init_best,
                "final_best": rec.final_best,
                "alpha": agent.alpha,
                "losses": {k: _jsonable(v) for k, v in losses.items()},
            }
            emit(entry)
            if cfg.eval_every and (episode + 1) % cfg.eval_every == 0:
                emit({"type": "eval", "episode": episode, "steps": env_steps, **evaluate_returns(agent, cfg)})
            if cfg.checkpoint_every and (episode + 1) % cfg.checkpoint_every == 0:
                save(episode + 1)
        save(cfg.n_episodes)
    finally:
        if log_fh:
            log_fh.close()
    return TrainResult(agent=agent, log=records, episodes=cfg.n_episodes, env_steps=env_steps)


def evaluate_returns(agent: Policy, cfg: TrainConfig) -> dict:
    """Deterministic-policy returns on held-out environments."""
    returns, init, final = [], [], []
    for i in cfg.eval_seeds:
        env_seed, swarm_seed = eval_seeds(cfg.master_seed, i)
        env = generate_environment(dataclasses.replace(cfg.env, seed=env_seed))
        rec = run_episode(agent, env, cfg.controller, swarm_seed, training=False, weights=cfg.weights, mode=cfg.mode)
        returns.append(rec.episode_return)
        init.append(rec.init_best)
        final.append(rec.final_best)
    return {
        "eval_return_mean": float(np.mean(returns)),
        "eval_returns": returns,
        "eval_init_best": init,
        "eval_final_best": final,
    }


def _replay_path(checkpoint_path) -> str:
    return f"{os.fspath(checkpoint_path)}.replay.npz"


def controller_params_to_dict(p: ControllerParams) -> dict:
    return {
        "pso": dataclasses.asdict(p.pso),
        "mapping": dataclasses.asdict(p.mapping),
        "c_init": list(p.c_init),
        "control_inertia": p.control_inertia,
        "w_range": list(p.w_range),
        "pin_inertia": p.pin_inertia,
    }


def controller_params_from_dict(d: dict) -> ControllerParams:
    return ControllerParams(
        pso=pso.PsoParams(**d.get("pso", {})),
        mapping=ActionMapping(**d.get("mapping", {})),
        c_init=tuple(d.get("c_init", (1.49445, 1.49445))),
        control_inertia=bool(d.get("control_inertia", False)),
        w_range=tuple(d.get("w_range", (0.4, 0.9))),
        pin_inertia=d.get("pin_inertia"),
    )


def load_controller(path) -> tuple[SacAgent, ControllerParams | None]:
    agent, extra = load_checkpoint_with_extra(path)
    cp = controller_params_from_dict(extra["controller"]) if "controller" in extra else None
    return agent, cp


# -- evaluation --------------------------------------------------------------


def evaluate(
    agent: Policy,
    env_configs: list[EnvConfig],
    runs_per_seed: int = 10,
    *,
    params: ControllerParams = ControllerParams(),
    apso_params: apso.ApsoParams | None = None,
    weights: Weights = Weights(),
    mode: FeasibilityMode = Penalty(),
    swarm_seed_base: int = 0,
) -> dict:
    """Paired PSO / APSO / APSO-SAC comparison on identical environments and swarm seeds."""
    apso_params = apso_params if apso_params is not None else apso.ApsoParams(base=params.pso)
    per_seed = []
    costs = {"pso": [], "apso": [], "apsosac": []}
    times = {"pso": [], "apso": [], "apsosac": []}
    episodes = []
    for cfg in env_configs:
        env = generate_environment(cfg)
        objective = Objective(env, weights, mode)
        for r in range(runs_per_seed):
            seed = swarm_seed_base + r
            res = {
                "pso": pso.run(env, params.pso, weights, mode, seed, objective=objective),
                "apso": apso.run_apso(env, apso_params, weights, mode, seed, objective=objective),
            }
            rec = run_episode(agent, env, params, seed, training=False, objective=objective)
            rec.baseline_cost = res["pso"].best_cost
            res["apsosac"] = rec.result
            episodes.append(rec)
            for k, v in res.items():
                costs[k].append(v.best_cost)
                times[k].append(v.wall_time)
            per_seed.append({"env_seed": cfg.seed, "swarm_seed": seed, **{k: v.best_cost for k, v in res.items()}})
    summary = {}
    base = float(np.mean(costs["pso"]))
    for k in costs:
        m = float(np.mean(costs[k]))
        summary[k] = {
            "mean": m,
            "std": float(np.std(costs[k], ddof=1)) if len(costs[k]) > 1 else 0.0,
            "mean_wall_time": float(np.mean(times[k])),
            "improvement_vs_pso_pct": (base - m) / base * 100.0,
        }
    return {"summary": summary, "runs": per_seed, "episodes": episodes}
