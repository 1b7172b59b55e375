"""From-scratch DQN: FIFO replay, target network, epsilon-greedy control.

The action set is the four primitives, optionally augmented with one more
index that hands the step to a classical planner; transitions taken that
way are stored under the planner's action index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .config import TrainConfig
from .sim import PRIMITIVE_ACTIONS

N_PRIMITIVE_ACTIONS = len(PRIMITIVE_ACTIONS)
N_AUGMENTED_ACTIONS = N_PRIMITIVE_ACTIONS + 1
OBS_DIM = 500
HIDDEN = (128, 128, 128)


def mlp_sizes(n_actions: int, obs_dim: int = OBS_DIM) -> tuple[int, ...]:
    return (obs_dim, *HIDDEN, n_actions)


def epsilon_at(step_in_episode: int, cfg: TrainConfig) -> float:
    """Linear decay from eps_start to eps_end over eps_decay_steps,
    restarted every episode."""
    frac = min(step_in_episode / cfg.eps_decay_steps, 1.0)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


class ReplayBuffer:
    """Preallocated FIFO ring. Observations are stored as float16; the
    sampler casts back to float32 for the network."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float16)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float16)
        self.action = np.zeros(capacity, dtype=np.int16)
        self.reward = np.zeros(capacity, dtype=np.float32)
        self.done = np.zeros(capacity, dtype=bool)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, obs, action: int, reward: float, next_obs, done: bool) -> None:
        i = self.pos
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.action[i] = action
        self.reward[i] = reward
        self.done[i] = done
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        """Uniform with replacement."""
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.obs[idx].astype(np.float32),
                self.action[idx].astype(np.int64),
                self.reward[idx].astype(np.float32),
                self.next_obs[idx].astype(np.float32),
                self.done[idx])


def select_action(sizes, params, obs, eps: float, rng: np.random.Generator,
                  n_actions: int) -> int:
    """Epsilon-greedy; eps <= 0 is purely greedy and consumes no random
    draws, so greedy evaluation does not depend on any rng stream."""
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(0, n_actions))
    q = nets.forward(sizes, params, np.asarray(obs))
    return int(np.argmax(q))


@dataclass
class DqnAgent:
    sizes: tuple[int, ...]
    params: np.ndarray
    target_params: np.ndarray
    cfg: TrainConfig
    replay: ReplayBuffer
    opt_state: nets.AdamState | None
    grad_steps: int = 0

    @classmethod
    def fresh(cls, n_actions: int, cfg: TrainConfig,
              rng: np.random.Generator, obs_dim: int = OBS_DIM) -> "DqnAgent":
        sizes = mlp_sizes(n_actions, obs_dim)
        params = nets.init_params(sizes, rng, dtype=np.float32)
        opt = nets.AdamState.zeros(params.size, dtype=np.float32) \
            if cfg.optimizer == "adam" else None
        return cls(sizes=sizes, params=params, target_params=params.copy(),
                   cfg=cfg, replay=ReplayBuffer(cfg.replay_capacity, obs_dim),
                   opt_state=opt)

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def q_values(self, obs) -> np.ndarray:
        return nets.forward(self.sizes, self.params, np.asarray(obs))

    def act(self, obs, eps: float, rng: np.random.Generator) -> int:
        return select_action(self.sizes, self.params, obs, eps, rng,
                             self.n_actions)

    def ready(self) -> bool:
        return len(self.replay) >= max(self.cfg.learn_start,
                                       self.cfg.batch_size)

    def learn(self, rng: np.random.Generator) -> float | None:
        """One gradient step on a replayed batch; returns the batch loss,
        or None while the buffer is still warming up. The target net syncs
        every target_sync_interval gradient steps."""
        if not self.ready():
            return None
        cfg = self.cfg
        obs, action, reward, next_obs, done = self.replay.sample(
            rng, cfg.batch_size)
        q_next = nets.forward(self.sizes, self.target_params, next_obs)
        targets = reward + cfg.gamma * q_next.max(axis=1) * ~done
        out, cache = nets.forward_cache(self.sizes, self.params, obs)
        rows = np.arange(cfg.batch_size)
        picked = out[rows, action]
        diff = picked - targets
        loss = float(0.5 * np.mean(diff ** 2))
        dout = np.zeros_like(out)
        dout[rows, action] = diff / cfg.batch_size
        grad = nets.backward(self.sizes, self.params, cache, dout)
        grad = nets.clip_grad_norm(grad, cfg.grad_clip)
        if self.opt_state is not None:
            nets.adam_step(self.params, grad, self.opt_state, cfg.lr,
                           cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        else:
            nets.sgd_step(self.params, grad, cfg.lr)
        self.grad_steps += 1
        if self.grad_steps % cfg.target_sync_interval == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target_params = self.params.copy()
