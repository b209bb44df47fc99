import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mec_swarm import apso, controller, pso
from mec_swarm.controller import ActionMapping, ControllerParams, TrainConfig
from mec_swarm.cost import Objective
from mec_swarm.env import EnvConfig, generate_environment
from mec_swarm.errors import ContractError
from mec_swarm.sac import ReplayBuffer, SacAgent, SacParams

SMALL_SAC = SacParams(hidden=(16, 16), batch_size=32, replay_capacity=5000, warmup_steps=100)


@pytest.fixture(scope="module")
def env():
    return generate_environment(EnvConfig(n_devices=40, n_servers=8, seed=17))


@pytest.fixture(scope="module")
def agent():
    return SacAgent(controller.OBS_DIM, 2, SMALL_SAC, seed=3)


class Pinned:
    def __init__(self, action):
        self.action = np.asarray(action, dtype=float)

    def select_action(self, state, deterministic=False, rng=None):
        return self.action


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_mapping_inverse(a):
    m = ActionMapping()
    c = m.to_coeff(a)
    assert np.all((c >= 0.5) & (c <= 2.5))
    assert np.allclose(m.to_action(c), a, atol=1e-12)


def test_mapping_endpoints():
    m = ActionMapping()
    assert list(m.to_coeff([-1.0, 1.0])) == [0.5, 2.5]
    assert m.to_coeff([0.0])[0] == 1.5


def test_reward_examples():
    assert controller.compute_reward(80.0, 80.0, 100.0) == 0.0
    steps = [100.0, 90.0, 75.5, 75.5, 58.5]
    total = sum(controller.compute_reward(a, b, 100.0) for a, b in zip(steps, steps[1:]))
    assert total == pytest.approx(0.415, abs=1e-12)
    with pytest.raises(ContractError):
        controller.compute_reward(1.0, 1.0, 0.0)


def test_first_observation(env):
    s = pso.init_swarm(env, pso.PsoParams(), 0)
    obs = controller.make_observation(s, s.gbest_cost, s.gbest_cost, ControllerParams(), 1.49445, 1.49445)
    assert obs.shape == (6,) and obs[1] == 0.0 and obs[3] == 0.0
    with pytest.raises(ContractError):
        controller.make_observation(s, 1.0, 0.0, ControllerParams(), 1.5, 1.5)


def test_converged_swarm_observation(env):
    s = pso.init_swarm(env, pso.PsoParams(), 0)
    s.positions[:] = s.positions[0]
    obs = controller.make_observation(s, s.gbest_cost, s.gbest_cost, ControllerParams(), 1.5, 1.5)
    assert obs[0] == 0.0 and obs[2] == 0.0


def test_observation_matches_apso_factor(env):
    s = pso.init_swarm(env, pso.PsoParams(), 4)
    obs = controller.make_observation(s, s.gbest_cost, s.gbest_cost, ControllerParams(), 1.5, 1.5)
    assert obs[0] == pytest.approx(apso.evolutionary_factor(s), abs=1e-12)


def test_observation_ranges_over_episodes(env, agent):
    rng = np.random.default_rng(0)
    for seed in range(5):
        rec = controller.run_episode(agent, env, seed=seed, training=True, action_fn=lambda o: rng.uniform(-1, 1, 2))
        for o in rec.observations:
            assert all(math.isfinite(x) for x in o)
            assert 0 <= o[0] <= 1 and 0 <= o[2] <= 1 and 0 <= o[3] <= 1 and 0 <= o[1] <= 1
            assert -1 - 1e-12 <= o[4] <= 1 + 1e-12 and -1 - 1e-12 <= o[5] <= 1 + 1e-12


def test_pinned_controller_reduces_to_pso(env):
    base = pso.PsoParams(c1=1.5, c2=1.5)
    params = ControllerParams(pso=base, pin_inertia=base.w)
    for seed in range(3):
        rec = controller.run_episode(Pinned([0.0, 0.0]), env, params, seed)
        ref = pso.run(env, base, seed=seed)
        assert rec.result.curve == ref.curve
        assert rec.result.best_assignment == ref.best_assignment
        assert rec.result.coefficient_trace == ref.coefficient_trace


def test_trace_matches_mapped_actions(env):
    rec = controller.run_episode(Pinned([0.5, -0.25]), env, seed=1)
    for (w, c1, c2), o in zip(rec.result.coefficient_trace, rec.observations):
        assert (c1, c2) == (2.0, 1.25)
        assert w == apso.adapt_inertia(o[0])
        assert 0.4 <= w <= 0.9


def test_three_action_variant(env):
    params = ControllerParams(control_inertia=True)
    rec = controller.run_episode(Pinned([0.0, 0.0, 1.0]), env, params, seed=0)
    assert all(w == 0.9 for w, _, _ in rec.result.coefficient_trace)
    assert params.act_dim == 3


def test_training_episode_stores_transitions(env, agent):
    buf = ReplayBuffer(1000, controller.OBS_DIM, 2)
    rec = controller.run_episode(agent, env, seed=2, training=True, buffer=buf)
    assert len(buf) == 50 == len(rec.rewards)
    assert buf.dones[:50].sum() == 1.0 and buf.dones[49] == 1.0


def test_telescoping_identity(env, agent):
    for seed in range(5):
        rec = controller.run_episode(agent, env, seed=seed, training=seed % 2 == 0)
        assert rec.telescoping_gap() <= 1e-10
        assert all(r >= 0 for r in rec.rewards)


def test_deterministic_episodes(env, agent):
    a = controller.run_episode(agent, env, seed=5)
    b = controller.run_episode(agent, env, seed=5)
    assert a.rewards == b.rewards and a.actions == b.actions and a.result.curve == b.result.curve


def test_run_apsosac_shape(env, agent):
    res = controller.run_apsosac(agent, env, seed=0)
    assert len(res.curve) == 51 and res.best_cost == res.curve[-1]


def tiny_train_config(tmp_path, steps=1000, **kw):
    return TrainConfig(
        master_seed=7,
        total_steps=steps,
        env=EnvConfig(n_devices=12, n_servers=4),
        controller=ControllerParams(pso=pso.PsoParams(n_particles=8, max_iters=10)),
        sac=SacParams(hidden=(8, 8), batch_size=16, replay_capacity=2000, warmup_steps=50),
        eval_every=20,
        eval_seeds=(0,),
        checkpoint_every=30,
        checkpoint_path=str(tmp_path / "ck.json"),
        log_path=str(tmp_path / "log.jsonl"),
        **kw,
    )


def test_train_accounting_and_log(tmp_path):
    cfg = tiny_train_config(tmp_path, steps=605)
    res = controller.train(cfg)
    assert res.env_steps == res.episodes * 10 and abs(res.env_steps - 605) < 10
    lines = [json.loads(x) for x in open(cfg.log_path)]
    assert lines == res.log
    assert sum(r["type"] == "eval" for r in lines) == 3
    assert res.agent.train_steps == res.env_steps - 50 + 1


def test_train_deterministic(tmp_path):
    a = controller.train(tiny_train_config(tmp_path / "a"))
    b = controller.train(tiny_train_config(tmp_path / "b"))
    assert (tmp_path / "a/ck.json").read_bytes() == (tmp_path / "b/ck.json").read_bytes()
    assert a.log == b.log


@pytest.fixture
def tmp_dirs(tmp_path):
    for d in ("a", "b", "c"):
        (tmp_path / d).mkdir()
    return tmp_path


def test_train_resume_matches_uninterrupted(tmp_dirs):
    full = tiny_train_config(tmp_dirs / "a", steps=1000)
    controller.train(full)
    # Run 600 steps (checkpoint at episode 60), then resume to 1000.
    part = tiny_train_config(tmp_dirs / "b", steps=600)
    controller.train(part)
    controller.train(dataclasses.replace(part, total_steps=1000), resume=True)
    assert (tmp_dirs / "a/ck.json").read_bytes() == (tmp_dirs / "b/ck.json").read_bytes()
    assert (tmp_dirs / "a/log.jsonl").read_bytes() == (tmp_dirs / "b/log.jsonl").read_bytes()


def test_load_controller_round_trip(tmp_path):
    cfg = tiny_train_config(tmp_path, steps=100)
    controller.train(cfg)
    agent, params = controller.load_controller(cfg.checkpoint_path)
    assert params == cfg.controller


def test_evaluate_paired_summary(env, agent):
    out = controller.evaluate(agent, [env.config], runs_per_seed=2)
    assert set(out["summary"]) == {"pso", "apso", "apsosac"}
    assert out["summary"]["pso"]["improvement_vs_pso_pct"] == 0.0
    for row, ep in zip(out["runs"], out["episodes"]):
        assert ep.swarm_seed == row["swarm_seed"] and ep.baseline_cost == row["pso"]


@pytest.mark.slow
def test_eval_return_trend_at_20k_steps(tmp_path):
    cfg = TrainConfig(
        master_seed=1,
        total_steps=20_000,
        env=EnvConfig(n_devices=40, n_servers=8),
        sac=SacParams(hidden=(32, 32), batch_size=64, replay_capacity=20_000, warmup_steps=1000),
        eval_every=20,
        eval_seeds=tuple(range(10)),
        checkpoint_every=0,
    )
    res = controller.train(cfg)
    evals = [r["eval_return_mean"] for r in res.log if r["type"] == "eval"]
    k = max(1, len(evals) // 5)
    first, last = np.mean(evals[:k]), np.mean(evals[-k:])
    print(f"eval return first quintile {first:.4f} last quintile {last:.4f}")
    assert last >= first
