"""Paired multi-method runs and their aggregation into a comparison report."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import apso, controller, pso
from ..cost import Objective
from ..env import generate_environment
from ..errors import ContractError
from .config import ExperimentConfig, resampled_env_seed, swarm_seed, thread_count
from .stats import MIN_PAIRS, paired_stats


@dataclass
class RunRecord:
    method: str
    run: int
    env_seed: int
    swarm_seed: int
    best_cost: float
    curve: list[float]
    wall_time: float
    stats_time: float
    coefficient_trace: list

    def to_row(self) -> dict:
        return {
            "method": self.method,
            "run": self.run,
            "env_seed": self.env_seed,
            "swarm_seed": self.swarm_seed,
            "best_cost": self.best_cost,
        }


@dataclass
class ComparisonReport:
    config: dict
    methods: list[str]
    records: list[RunRecord]
    summary: dict[str, dict] = field(default_factory=dict)
    paired: dict[str, dict] = field(default_factory=dict)
    curves: dict[str, list[tuple[int, float, float, float]]] = field(default_factory=dict)
    timing: dict[str, dict] = field(default_factory=dict)
    episodes: list = field(default_factory=list)

    def costs(self, method: str) -> list[float]:
        return [r.best_cost for r in self.records if r.method == method]


def _run_one(cfg: ExperimentConfig, tasks, agent, ctrl_params, index: int) -> list[tuple[RunRecord, object]]:
    env_seed, run, seed = tasks[index]
    env = generate_environment(dataclasses.replace(cfg.env, seed=env_seed))
    objective = Objective(env, cfg.weights, cfg.feasibility, mbit_per_mbyte=cfg.mbit_per_mbyte)
    out = []
    for method in cfg.methods:
        episode = None
        if method == "pso":
            res = pso.run(env, cfg.pso, cfg.weights, cfg.feasibility, seed, objective=objective)
        elif method == "apso":
            res = apso.run_apso(env, cfg.apso_params, cfg.weights, cfg.feasibility, seed, objective=objective)
        else:
            episode = controller.run_episode(agent, env, ctrl_params, seed, training=False, objective=objective)
            res = episode.result
        rec = RunRecord(
            method=method, run=run, env_seed=env_seed, swarm_seed=seed,
            best_cost=res.best_cost, curve=res.curve, wall_time=res.wall_time,
            stats_time=res.stats_time, coefficient_trace=res.coefficient_trace,
        )
        out.append((rec, episode))
    return out


def _tasks(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    tasks = []
    for env_seed in cfg.env_seed_list():
        for r in range(cfg.runs):
            es = resampled_env_seed(env_seed, r) if cfg.resample_env else env_seed
            tasks.append((es, r, swarm_seed(cfg.master_seed, r)))
    return tasks


def load_agent(cfg: ExperimentConfig):
    agent, stored = controller.load_controller(cfg.checkpoint)
    stored = stored if stored is not None else controller.ControllerParams()
    if agent.act_dim != stored.act_dim:
        raise ContractError(f"checkpoint action size {agent.act_dim} does not match controller ({stored.act_dim})")
    return agent, dataclasses.replace(stored, pso=cfg.pso)


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ComparisonReport:
    agent = ctrl_params = None
    if "apsosac" in cfg.methods:
        agent, ctrl_params = load_agent(cfg)
    tasks = _tasks(cfg)
    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            chunks = list(ex.map(lambda i: _run_one(cfg, tasks, agent, ctrl_params, i), range(len(tasks))))
    else:
        chunks = [_run_one(cfg, tasks, agent, ctrl_params, i) for i in range(len(tasks))]
    records, episodes = [], []
    for chunk in chunks:
        for rec, ep in chunk:
            records.append(rec)
            if ep is not None:
                episodes.append(ep)
    return build_report(cfg, records, episodes)


def build_report(cfg: ExperimentConfig, records: list[RunRecord], episodes=()) -> ComparisonReport:
    methods = list(cfg.methods)
    report = ComparisonReport(config=cfg.to_dict(), methods=methods, records=records, episodes=list(episodes))
    means = {m: float(np.mean(report.costs(m))) for m in methods}
    base = means["pso"] if "pso" in means else None
    for m in methods:
        c = np.asarray(report.costs(m))
        report.summary[m] = {
            "runs": int(len(c)),
            "mean_best_cost": means[m],
            "std_best_cost": float(np.std(c, ddof=1)) if len(c) > 1 else 0.0,
            "improvement_vs_pso_pct": (base - means[m]) / base * 100.0 if base is not None else None,
        }
    for i, a in enumerate(methods):
        for b in methods[i + 1:]:
            ca, cb = report.costs(a), report.costs(b)
            key = f"{b}_vs_{a}"
            if len(ca) >= MIN_PAIRS:
                # positive differences mean b found the lower cost
                report.paired[key] = {
                    "improvement_pct": (means[a] - means[b]) / means[a] * 100.0,
                    **paired_stats(ca, cb).to_dict(),
                }
            else:
                report.paired[key] = None
    for m in methods:
        curves = np.array([r.curve for r in records if r.method == m])
        report.curves[m] = [
            (t, float(curves[:, t].mean()), float(curves[:, t].min()), float(curves[:, t].max()))
            for t in range(curves.shape[1])
        ]
    for m in methods:
        recs = [r for r in records if r.method == m]
        wall = float(np.mean([r.wall_time for r in recs]))
        st = float(np.mean([r.stats_time for r in recs]))
        report.timing[m] = {"mean_wall_time": wall, "mean_stats_time": st, "mean_wall_time_without_stats": wall - st}
    if "pso" in report.timing:
        base_t = report.timing["pso"]["mean_wall_time"]
        for m in methods:
            t = report.timing[m]
            t["wall_time_ratio_vs_pso"] = t["mean_wall_time"] / base_t
            t["wall_time_ratio_vs_pso_without_stats"] = t["mean_wall_time_without_stats"] / base_t
    return report
