import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mec_swarm.env import (
    DEFAULT_RANGES,
    DEVICE_FIELDS,
    SERVER_FIELDS,
    EnvConfig,
    environment_to_dict,
    generate_environment,
    load_environment,
    save_environment,
)
from mec_swarm.errors import ConfigError, ParseError, ValidationError


def test_full_scale_attributes_within_ranges():
    env = generate_environment(EnvConfig(n_devices=250, n_servers=20, seed=42))
    assert env.n_devices == 250 and env.n_servers == 20
    for name in DEVICE_FIELDS:
        lo, hi = DEFAULT_RANGES[name]
        vals = env.device_arrays[name]
        assert vals.min() >= lo and vals.max() <= hi
    for name in SERVER_FIELDS:
        lo, hi = DEFAULT_RANGES[name]
        vals = env.server_arrays[name]
        assert vals.min() >= lo and vals.max() <= hi


def test_empty_fleet():
    env = generate_environment(EnvConfig(n_devices=0, n_servers=5, seed=1))
    assert env.devices == () and len(env.servers) == 5


def test_same_seed_is_byte_identical():
    a = generate_environment(EnvConfig(n_devices=30, n_servers=4, seed=7))
    b = generate_environment(EnvConfig(n_devices=30, n_servers=4, seed=7))
    assert json.dumps(environment_to_dict(a)) == json.dumps(environment_to_dict(b))


def test_different_seeds_differ():
    a = generate_environment(EnvConfig(n_devices=5, n_servers=2, seed=1))
    b = generate_environment(EnvConfig(n_devices=5, n_servers=2, seed=2))
    assert a != b


def test_draw_order_is_device_major():
    # First device's four attributes come from the first four uniforms of the stream.
    cfg = EnvConfig(n_devices=2, n_servers=1, seed=11)
    env = generate_environment(cfg)
    u = np.random.Generator(np.random.PCG64(11)).random(4 * 2 + 3)
    lo, hi = DEFAULT_RANGES["network_speed"]
    assert env.devices[0].network_speed == lo + (hi - lo) * u[3]
    lo, hi = DEFAULT_RANGES["data_size"]
    assert env.devices[1].data_size == lo + (hi - lo) * u[4]
    lo, hi = DEFAULT_RANGES["ram"]
    assert env.servers[0].ram == lo + (hi - lo) * u[10]


@pytest.mark.parametrize("bad", [
    dict(n_devices=3, n_servers=0),
    dict(n_devices=-1, n_servers=2),
    dict(ranges={**DEFAULT_RANGES, "speed": (200.0, 10.0)}),
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        generate_environment(EnvConfig(**bad))


@given(seed=st.integers(0, 2**64 - 1), n_dev=st.integers(0, 20), n_srv=st.integers(1, 6))
def test_ranges_hold_for_any_seed(seed, n_dev, n_srv):
    env = generate_environment(EnvConfig(n_devices=n_dev, n_servers=n_srv, seed=seed))
    for d in env.devices:
        for name in DEVICE_FIELDS:
            lo, hi = DEFAULT_RANGES[name]
            assert lo <= getattr(d, name) <= hi
    for s in env.servers:
        for name in SERVER_FIELDS:
            lo, hi = DEFAULT_RANGES[name]
            assert lo <= getattr(s, name) <= hi


@pytest.mark.parametrize("name", ["data_size", "network_speed", "cost_rate"])
def test_uniform_mean_near_midpoint(name):
    env = generate_environment(EnvConfig(n_devices=10_000, n_servers=10_000, seed=5))
    vals = env.device_arrays[name] if name in DEVICE_FIELDS else env.server_arrays[name]
    lo, hi = DEFAULT_RANGES[name]
    mid = (lo + hi) / 2
    assert abs(vals.mean() - mid) <= 0.02 * mid


def test_save_load_round_trip(tmp_path):
    env = generate_environment(EnvConfig(n_devices=25, n_servers=4, seed=9))
    p = tmp_path / "env.json"
    save_environment(env, p)
    loaded = load_environment(p)
    assert loaded == env
    assert loaded.devices == env.devices and loaded.servers == env.servers
    data = json.loads(p.read_text())
    assert data["rng"] == "PCG64" and data["format_version"] == 1


def test_truncated_file_is_parse_error(tmp_path):
    env = generate_environment(EnvConfig(n_devices=5, n_servers=2, seed=9))
    p = tmp_path / "env.json"
    save_environment(env, p)
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    with pytest.raises(ParseError):
        load_environment(p)


def test_negative_server_speed_is_validation_error(tmp_path):
    env = generate_environment(EnvConfig(n_devices=5, n_servers=2, seed=9))
    data = environment_to_dict(env)
    data["servers"][1]["speed"] = -3.0
    p = tmp_path / "env.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match=r"servers\[1\]\.speed"):
        load_environment(p)


def test_missing_field_named(tmp_path):
    env = generate_environment(EnvConfig(n_devices=2, n_servers=1, seed=9))
    data = environment_to_dict(env)
    del data["devices"][0]["ram_req"]
    p = tmp_path / "env.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ParseError, match="ram_req"):
        load_environment(p)
