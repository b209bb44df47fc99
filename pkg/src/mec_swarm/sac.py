"""Soft actor-critic with a tanh-squashed Gaussian actor and twin Q critics.

The networks are plain :class:`~mec_swarm.nn.Mlp` instances and every gradient
is derived by hand. The actor emits ``2k`` values: the pre-squash mean and the
log standard deviation for each of ``k`` action dimensions.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nn
from .errors import ConfigError, ContractError, NonFiniteError, ParseError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
TANH_EPS = 1e-6
# Largest double below 1: tanh rounds to exactly +-1 once |u| exceeds about 19.
ACTION_BOUND = float(np.nextafter(1.0, 0.0))
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class SacParams:
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    replay_capacity: int = 1_000_000
    tau: float = 5e-3
    gamma: float = 0.99
    batch_size: int = 256
    alpha: float = 0.2
    auto_alpha: bool = False
    total_train_steps: int = 1_000_000
    warmup_steps: int = 1_000
    update_every: int = 1
    hidden: tuple[int, ...] = (256, 256)
    actor_final_scale: float = 1e-3

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ConfigError("tau must be in (0, 1]")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must be in (0, 1)")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.batch_size > self.replay_capacity:
            raise ConfigError("batch_size must not exceed replay_capacity")
        if self.update_every < 1:
            raise ConfigError("update_every must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SacParams":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(int(h) for h in d["hidden"])
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)

    @classmethod
    def from_transitions(cls, items: Sequence[Transition]) -> "Batch":
        return cls(
            states=np.array([t.state for t in items], dtype=np.float64),
            actions=np.array([t.action for t in items], dtype=np.float64),
            rewards=np.array([t.reward for t in items], dtype=np.float64),
            next_states=np.array([t.next_state for t in items], dtype=np.float64),
            dones=np.array([float(t.done) for t in items], dtype=np.float64),
        )


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions stored column-wise."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def store(self, t: Transition) -> None:
        i = self.cursor
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = float(t.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ContractError("cannot sample from an empty replay buffer")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.indices(batch_size, rng)
        return Batch(
            states=self.states[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_states=self.next_states[idx],
            dones=self.dones[idx],
        )

    def oldest(self) -> Transition:
        i = (self.cursor - self.size) % self.capacity
        return Transition(self.states[i].copy(), self.actions[i].copy(), float(self.rewards[i]),
                          self.next_states[i].copy(), bool(self.dones[i]))

    def save(self, path) -> None:
        n = self.size
        # Stored oldest-first so reloading into any capacity keeps FIFO order.
        order = (np.arange(n) + (self.cursor - n)) % self.capacity
        np.savez(
            path,
            capacity=self.capacity,
            states=self.states[order],
            actions=self.actions[order],
            rewards=self.rewards[order],
            next_states=self.next_states[order],
            dones=self.dones[order],
        )

    @classmethod
    def load(cls, path, capacity: int | None = None) -> "ReplayBuffer":
        with np.load(path) as data:
            cap = int(data["capacity"]) if capacity is None else capacity
            states = data["states"]
            buf = cls(cap, states.shape[1], data["actions"].shape[1])
            n = len(states)
            if n > cap:
                raise ContractError(f"replay file holds {n} transitions, capacity is {cap}")
            buf.states[:n] = states
            buf.actions[:n] = data["actions"]
            buf.rewards[:n] = data["rewards"]
            buf.next_states[:n] = data["next_states"]
            buf.dones[:n] = data["dones"]
            buf.size = n
            buf.cursor = n % cap
        return buf


def squash_log_prob(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log-density of ``tanh(u)`` where ``u ~ N(mean, exp(log_std)^2)``, summed over the last axis."""
    std = np.exp(log_std)
    z = (u - mean) / std
    gauss = -0.5 * z * z - log_std - HALF_LOG_2PI
    correction = np.log(1.0 - np.tanh(u) ** 2 + TANH_EPS)
    return np.sum(gauss - correction, axis=-1)


def _agent_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5AC])))


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int, params: SacParams = SacParams(), seed: int = 0):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.params = params
        self.seed = seed
        init_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x1417])))
        hidden = list(params.hidden)
        self.actor = nn.Mlp([obs_dim, *hidden, 2 * act_dim], init_rng, final_scale=params.actor_final_scale)
        self.critic1 = nn.Mlp([obs_dim + act_dim, *hidden, 1], init_rng)
        self.critic2 = nn.Mlp([obs_dim + act_dim, *hidden, 1], init_rng)
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self.log_alpha = math.log(params.alpha) if params.alpha > 0 else -math.inf
        self.actor_opt = nn.AdamState.zeros_like(self.actor.params, params.actor_lr)
        self.critic1_opt = nn.AdamState.zeros_like(self.critic1.params, params.critic_lr)
        self.critic2_opt = nn.AdamState.zeros_like(self.critic2.params, params.critic_lr)
        self.alpha_opt = nn.AdamState.zeros_like([np.zeros(1)], params.actor_lr)
        self.target_entropy = -float(act_dim)
        self.train_steps = 0
        self.rng = _agent_rng(seed)

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    # -- policy ---------------------------------------------------------
    def policy(self, states, cache: bool = False):
        out, inputs = nn.forward_cached(self.actor, states)
        k = self.act_dim
        mean = out[..., :k]
        raw = out[..., k:]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        if cache:
            return mean, log_std, raw, inputs
        return mean, log_std

    def select_action(self, state, deterministic: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        if state.shape[-1] != self.obs_dim:
            raise ContractError(f"state has size {state.shape[-1]}, agent expects {self.obs_dim}")
        if deterministic:
            u = nn.forward(self.actor, state)[..., : self.act_dim]
        else:
            mean, log_std = self.policy(state)
            rng = rng if rng is not None else self.rng
            u = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
        return np.minimum(np.maximum(np.tanh(u), -ACTION_BOUND), ACTION_BOUND)

    def log_prob(self, state, action_pre_tanh) -> float | np.ndarray:
        mean, log_std = self.policy(np.asarray(state, dtype=np.float64))
        return squash_log_prob(np.asarray(action_pre_tanh, dtype=np.float64), mean, log_std)

    # -- critics --------------------------------------------------------
    def _q(self, net: nn.Mlp, states, actions) -> np.ndarray:
        return nn.forward(net, np.concatenate([states, actions], axis=-1))[..., 0]

    def critic_targets(self, batch: Batch, next_noise: np.ndarray) -> np.ndarray:
        mean, log_std = self.policy(batch.next_states)
        u = mean + np.exp(log_std) * next_noise
        a = np.tanh(u)
        logp = squash_log_prob(u, mean, log_std)
        q_next = np.minimum(self._q(self.target1, batch.next_states, a), self._q(self.target2, batch.next_states, a))
        return batch.rewards + self.params.gamma * (1.0 - batch.dones) * (q_next - self.alpha * logp)

    def critic_loss_and_grads(self, net: nn.Mlp, batch: Batch, targets: np.ndarray):
        x = np.concatenate([batch.states, batch.actions], axis=-1)
        out, cache = nn.forward_cached(net, x)
        loss, g = nn.mse_loss(out[:, 0], targets)
        grads = nn.backward(net, x, g[:, None], cache)
        return loss, grads.as_list()

    # -- actor ----------------------------------------------------------
    def actor_loss_and_grads(self, states: np.ndarray, noise: np.ndarray):
        """Loss ``mean(alpha * logp - min(Q1, Q2))`` on reparameterised samples, with gradients."""
        B = states.shape[0]
        alpha = self.alpha
        mean, log_std, raw, cache = self.policy(states, cache=True)
        std = np.exp(log_std)
        u = mean + std * noise
        a = np.tanh(u)
        logp = squash_log_prob(u, mean, log_std)

        x = np.concatenate([states, a], axis=-1)
        q1, c1 = nn.forward_cached(self.critic1, x)
        q2, c2 = nn.forward_cached(self.critic2, x)
        q1, q2 = q1[:, 0], q2[:, 0]
        use1 = q1 <= q2
        q_min = np.where(use1, q1, q2)
        loss = float(np.mean(alpha * logp - q_min))

        # dQmin/da through whichever critic is smaller for each row
        sel1 = use1.astype(np.float64)[:, None]
        ga1 = nn.backward(self.critic1, x, sel1, c1).input[:, self.obs_dim:]
        ga2 = nn.backward(self.critic2, x, 1.0 - sel1, c2).input[:, self.obs_dim:]
        dq_da = ga1 + ga2

        sech2 = 1.0 - a * a
        dlogp_du = 2.0 * a * sech2 / (sech2 + TANH_EPS)
        du = (alpha * dlogp_du - dq_da * sech2) / B
        d_mean = du
        d_log_std = du * std * noise - alpha / B
        d_raw = d_log_std * ((raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX))
        upstream = np.concatenate([d_mean, d_raw], axis=-1)
        grads = nn.backward(self.actor, states, upstream, cache)
        return loss, grads.as_list(), logp

    # -- update ---------------------------------------------------------
    def soft_update(self) -> None:
        tau = self.params.tau
        for online, target in ((self.critic1, self.target1), (self.critic2, self.target2)):
            target.set_params([tau * p + (1.0 - tau) * q for p, q in zip(online.params, target.params)])

    def update(self, batch: Batch) -> dict:
        if len(batch) == 0:
            raise ContractError("empty batch")
        k = self.act_dim
        next_noise = self.rng.standard_normal((len(batch), k))
        noise = self.rng.standard_normal((len(batch), k))

        y = self.critic_targets(batch, next_noise)
        l1, g1 = self.critic_loss_and_grads(self.critic1, batch, y)
        l2, g2 = self.critic_loss_and_grads(self.critic2, batch, y)
        if not (math.isfinite(l1) and math.isfinite(l2)):
            raise NonFiniteError(f"non-finite critic loss (critic1={l1}, critic2={l2}) at train step {self.train_steps}")
        p, self.critic1_opt = nn.adam_step(self.critic1.params, g1, self.critic1_opt)
        self.critic1.set_params(p)
        p, self.critic2_opt = nn.adam_step(self.critic2.params, g2, self.critic2_opt)
        self.critic2.set_params(p)

        la, ga, logp = self.actor_loss_and_grads(batch.states, noise)
        if not math.isfinite(la):
            raise NonFiniteError(f"non-finite actor loss at train step {self.train_steps}")
        p, self.actor_opt = nn.adam_step(self.actor.params, ga, self.actor_opt)
        self.actor.set_params(p)

        losses = {"critic1": l1, "critic2": l2, "actor": la}
        if self.params.auto_alpha:
            # loss = -log_alpha * mean(logp + target_entropy)
            gap = float(np.mean(logp + self.target_entropy))
            (new,), self.alpha_opt = nn.adam_step([np.array([self.log_alpha])], [np.array([-gap])], self.alpha_opt)
            self.log_alpha = float(new[0])
            losses["alpha"] = -self.log_alpha * gap
        self.soft_update()
        self.train_steps += 1
        return losses

    # -- persistence ----------------------------------------------------
    def networks(self) -> dict[str, nn.Mlp]:
        return {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "target1": self.target1,
            "target2": self.target2,
        }

    def optimizers(self) -> dict[str, nn.AdamState]:
        return {
            "actor": self.actor_opt,
            "critic1": self.critic1_opt,
            "critic2": self.critic2_opt,
            "alpha": self.alpha_opt,
        }

    def to_dict(self, extra: dict | None = None) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "seed": self.seed,
            "params": self.params.to_dict(),
            "networks": {
                name: {"layer_sizes": net.layer_sizes, "params": nn.flatten(net.params).tolist()}
                for name, net in self.networks().items()
            },
            "log_alpha": self.log_alpha,
            "optimizers": {
                name: {
                    "step_count": st.step_count,
                    "learning_rate": st.learning_rate,
                    "m": nn.flatten(st.m).tolist(),
                    "v": nn.flatten(st.v).tolist(),
                }
                for name, st in self.optimizers().items()
            },
            "train_steps": self.train_steps,
            "rng_state": self.rng.bit_generator.state,
            "extra": extra or {},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SacAgent":
        if not isinstance(data, dict) or "format_version" not in data:
            raise ParseError("checkpoint is missing format_version")
        if data["format_version"] != CHECKPOINT_VERSION:
            raise ParseError(f"checkpoint version {data['format_version']!r} is not supported (expected {CHECKPOINT_VERSION})")
        try:
            agent = cls(int(data["obs_dim"]), int(data["act_dim"]), SacParams.from_dict(data["params"]), int(data["seed"]))
            for name, net in agent.networks().items():
                entry = data["networks"][name]
                if list(entry["layer_sizes"]) != net.layer_sizes:
                    raise ContractError(
                        f"network {name!r}: layer sizes {entry['layer_sizes']} do not match expected {net.layer_sizes}"
                    )
                flat = np.asarray(entry["params"], dtype=np.float64)
                try:
                    net.set_params(nn.unflatten(flat, net.params))
                except ContractError as exc:
                    raise ContractError(f"network {name!r}: {exc}") from exc
            agent.log_alpha = float(data["log_alpha"])
            for name, st in agent.optimizers().items():
                entry = data["optimizers"][name]
                st.step_count = int(entry["step_count"])
                st.learning_rate = float(entry["learning_rate"])
                st.m = nn.unflatten(np.asarray(entry["m"], dtype=np.float64), st.m)
                st.v = nn.unflatten(np.asarray(entry["v"], dtype=np.float64), st.v)
            agent.train_steps = int(data["train_steps"])
            agent.rng.bit_generator.state = data["rng_state"]
        except KeyError as exc:
            raise ParseError(f"checkpoint is missing field {exc}") from exc
        return agent

    def save_checkpoint(self, path, extra: dict | None = None) -> None:
        tmp = f"{os.fspath(path)}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(extra), fh)
        os.replace(tmp, path)

    @classmethod
    def load_checkpoint(cls, path) -> "SacAgent":
        agent, _ = load_checkpoint_with_extra(path)
        return agent


def load_checkpoint_with_extra(path) -> tuple[SacAgent, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{os.fspath(path)}: {exc}") from exc
    return SacAgent.from_dict(data), dict(data.get("extra", {}))
