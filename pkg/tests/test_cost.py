import numpy as np
import pytest
from hypothesis import given, strategies as st

from mec_swarm.cost import (
    Assignment,
    Objective,
    PaperLiteral,
    Penalty,
    Weights,
    brute_force_optimum,
    device_comp_cost,
    device_time,
    total_cost,
)
from mec_swarm.env import Device, EnvConfig, Environment, Server, generate_environment
from mec_swarm.errors import CapExceededError, ConfigError, ContractError
from oracles import as_tuples, reference_optimum, reference_total

DEV = Device(data_size=100.0, completion_req=30.0, ram_req=2.0, network_speed=100.0)
SRV = Server(speed=15.0, cost_rate=0.03, ram=4.0)


def make_env(devices, servers):
    return Environment(tuple(devices), tuple(servers), EnvConfig(len(devices), len(servers), 0))


def test_device_time_hand_value():
    assert device_time(DEV, SRV) == pytest.approx(10.0, abs=1e-12)


def test_device_time_zero_work_is_transfer_only():
    d = Device(100.0, 0.0, 1.0, 100.0)
    assert device_time(d, SRV) == 100.0 * 8 / 100.0


def test_device_time_literal_units():
    assert device_time(DEV, SRV, mbit_per_mbyte=1.0) == pytest.approx(1.0 + 2.0)


def test_device_time_decreases_toward_transfer_time():
    times = [device_time(DEV, Server(speed=s, cost_rate=0.03, ram=4.0)) for s in (1, 10, 1e3, 1e6, 1e9)]
    assert all(a > b for a, b in zip(times, times[1:]))
    assert all(t > 8.0 for t in times)
    assert times[-1] == pytest.approx(8.0, abs=1e-6)


def test_device_time_rejects_nonpositive_speed():
    with pytest.raises(ContractError):
        device_time(DEV, Server(speed=0.0, cost_rate=0.03, ram=4.0))


def test_comp_cost_hand_value():
    assert device_comp_cost(DEV, SRV) == pytest.approx(0.30, abs=1e-12)


@pytest.mark.parametrize("mode", [PaperLiteral(), Penalty()])
def test_comp_cost_infeasible_is_zero(mode):
    assert device_comp_cost(DEV, Server(15.0, 0.03, 1.5), mode) == 0.0


def test_comp_cost_zero_rate():
    assert device_comp_cost(DEV, Server(15.0, 0.0, 4.0)) == 0.0
    assert device_comp_cost(DEV, Server(15.0, 0.0, 1.0)) == 0.0


def test_total_cost_single_device():
    env = make_env([DEV], [SRV])
    b = total_cost(env, Assignment((0,)), Weights(10, 0.01))
    assert b.total == pytest.approx(3.1, abs=1e-12)
    assert b.infeasible_count == 0
    assert b.per_device_time == [pytest.approx(10.0)]


def test_total_cost_empty_env():
    env = make_env([], [SRV])
    b = total_cost(env, Assignment(()))
    assert b.total == 0.0 and b.per_device_time == [] and b.per_device_cost == []


def test_three_device_fixture_matches_spreadsheet():
    devices = [Device(50.0, 20.0, 1.0, 60.0), Device(150.0, 40.0, 2.0, 900.0), Device(80.0, 25.0, 1.5, 300.0)]
    servers = [Server(10.0, 0.02, 2.0), Server(200.0, 0.06, 8.0)]
    env = make_env(devices, servers)
    # Row by row: T = data*8/net + work/speed ; C = rate*T ; term = 10C + 0.01T
    t0 = 50 * 8 / 60 + 20 / 10
    t1 = 150 * 8 / 900 + 40 / 200
    t2 = 80 * 8 / 300 + 25 / 10
    expected = (10 * 0.02 * t0 + 0.01 * t0) + (10 * 0.06 * t1 + 0.01 * t1) + (10 * 0.02 * t2 + 0.01 * t2)
    got = total_cost(env, Assignment((0, 1, 0)), Weights(10, 0.01)).total
    assert got == pytest.approx(expected, rel=1e-14)


def test_assignment_contract_errors():
    env = make_env([DEV, DEV], [SRV])
    with pytest.raises(ContractError):
        total_cost(env, Assignment((0,)))
    with pytest.raises(ContractError):
        total_cost(env, Assignment((0, 1)))


def test_weights_validation():
    with pytest.raises(ConfigError):
        Weights(0, 0)
    with pytest.raises(ConfigError):
        Weights(-1, 1)
    with pytest.raises(ConfigError):
        Penalty(0)


def test_penalty_mode_adds_per_violation():
    small = Server(15.0, 0.03, 1.5)
    env = make_env([DEV, DEV], [small, SRV])
    lit = total_cost(env, Assignment((0, 0)), mode=PaperLiteral())
    pen = total_cost(env, Assignment((0, 0)), mode=Penalty(1e3))
    assert lit.infeasible_count == pen.infeasible_count == 2
    assert pen.total == lit.total + 2e3


def test_paper_literal_rewards_infeasibility():
    # Same speed, one server too small: literal mode prefers the infeasible one.
    small = Server(15.0, 0.03, 1.5)
    env = make_env([DEV], [small, SRV])
    a_bad = total_cost(env, Assignment((0,)), mode=PaperLiteral()).total
    a_ok = total_cost(env, Assignment((1,)), mode=PaperLiteral()).total
    assert a_bad < a_ok


def test_linearity_in_weights():
    env = generate_environment(EnvConfig(n_devices=12, n_servers=3, seed=4))
    a = Assignment(tuple(j % 3 for j in range(12)))
    b = total_cost(env, a, Weights(1.0, 1.0))
    csum, tsum = sum(b.per_device_cost), sum(b.per_device_time)
    b2 = total_cost(env, a, Weights(20.0, 0.01))
    assert b2.total == pytest.approx(20.0 * csum + 0.01 * tsum, rel=1e-12)


def test_objective_matches_total_cost_bitwise():
    env = generate_environment(EnvConfig(n_devices=40, n_servers=5, seed=8))
    rng = np.random.default_rng(0)
    A = rng.integers(0, 5, size=(25, 40))
    for mode in (Penalty(), PaperLiteral()):
        obj = Objective(env, Weights(), mode)
        got = obj(A)
        for row, g in zip(A, got):
            assert g == total_cost(env, Assignment(tuple(int(x) for x in row)), Weights(), mode).total


def test_objective_matches_with_infeasible_devices():
    ranges = {**EnvConfig().ranges, "ram": (0.5, 2.5)}
    env = generate_environment(EnvConfig(n_devices=30, n_servers=4, seed=2, ranges=ranges))
    A = np.random.default_rng(1).integers(0, 4, size=(10, 30))
    for mode in (Penalty(7.0), PaperLiteral()):
        got = Objective(env, Weights(), mode)(A)
        ref = [total_cost(env, Assignment(tuple(int(x) for x in r)), Weights(), mode).total for r in A]
        assert list(got) == ref


@given(
    seed=st.integers(0, 2**32),
    bump=st.floats(0.0, 0.05),
    server=st.integers(0, 2),
)
def test_monotone_in_cost_rate(seed, bump, server):
    env = generate_environment(EnvConfig(n_devices=6, n_servers=3, seed=seed))
    a = Assignment(tuple(j % 3 for j in range(6)))
    servers = list(env.servers)
    s = servers[server]
    servers[server] = Server(s.speed, s.cost_rate + bump, s.ram)
    env2 = Environment(env.devices, tuple(servers), env.config)
    assert total_cost(env2, a).total >= total_cost(env, a).total


@given(seed=st.integers(0, 2**32), penalty=st.floats(1.0, 1e4))
def test_penalty_dominates_feasible_terms(seed, penalty):
    ranges = {**EnvConfig().ranges, "ram": (0.5, 2.5)}
    env = generate_environment(EnvConfig(n_devices=6, n_servers=3, seed=seed, ranges=ranges))
    a = Assignment(tuple(j % 3 for j in range(6)))
    lit = total_cost(env, a, mode=PaperLiteral())
    pen = total_cost(env, a, mode=Penalty(penalty))
    assert pen.total >= lit.total
    assert pen.total == pytest.approx(lit.total + penalty * lit.infeasible_count, rel=1e-12)


def test_bruteforce_single_device():
    env = generate_environment(EnvConfig(n_devices=1, n_servers=6, seed=3))
    a, c = brute_force_optimum(env)
    costs = [total_cost(env, Assignment((k,))).total for k in range(6)]
    assert c == min(costs) and a.server_of == (costs.index(min(costs)),)


def test_bruteforce_matches_reference_enumeration():
    for seed in range(5):
        env = generate_environment(EnvConfig(n_devices=4, n_servers=3, seed=seed))
        devices, servers = as_tuples(env)
        ref_a, ref_c = reference_optimum(devices, servers, 10.0, 0.01, penalty=1e3)
        a, c = brute_force_optimum(env)
        assert c == ref_c and a.server_of == tuple(ref_a)


def test_bruteforce_ties_pick_lexicographic_smallest():
    s = Server(50.0, 0.04, 4.0)
    env = make_env([DEV, DEV, DEV], [s, s, s])
    a, _ = brute_force_optimum(env)
    assert a.server_of == (0, 0, 0)


def test_bruteforce_cap_refusal():
    env = generate_environment(EnvConfig(n_devices=13, n_servers=3, seed=0))
    with pytest.raises(CapExceededError):
        brute_force_optimum(env)
    # 2^12 = 4096 is well under the cap
    env = generate_environment(EnvConfig(n_devices=12, n_servers=2, seed=0))
    brute_force_optimum(env)


@given(seed=st.integers(0, 2**32))
def test_every_assignment_bounded_by_oracle(seed):
    env = generate_environment(EnvConfig(n_devices=3, n_servers=3, seed=seed))
    _, best = brute_force_optimum(env)
    devices, servers = as_tuples(env)
    for a in np.ndindex(3, 3, 3):
        assert total_cost(env, Assignment(a)).total >= best
        assert reference_total(devices, servers, a, 10.0, 0.01, penalty=1e3) >= best


def test_breakdown_serializes():
    env = make_env([DEV], [SRV])
    d = total_cost(env, Assignment((0,))).to_dict()
    assert set(d) == {"total", "per_device_time", "per_device_cost", "infeasible_count"}
