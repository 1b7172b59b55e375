"""Training and evaluation loops, checkpoints, metrics and log ingestion.

Seeding: a root SeedSequence is split into four independent streams (net
init, exploration, replay sampling, per-episode sim seeds), so runs are
reproducible end to end from a single integer.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import PlannerParams, SimConfig, TrainConfig
from .dqn import (N_AUGMENTED_ACTIONS, N_PRIMITIVE_ACTIONS, DqnAgent,
                  epsilon_at)
from .nets import AdamState
from .planners import PLANNERS, PidState
from .sim import EGO, OPTION, observe_flat, reset, step

OUTCOMES = ("success", "collision", "breach", "timeout")


@dataclass
class EpisodeStats:
    episode: int
    steps: int
    reward: float
    outcome: str
    avg_speed: float  # m/s, mean ego speed over the episode


@dataclass
class AggregateStats:
    episodes: int
    success_rate: float
    collision_rate: float
    breach_rate: float
    timeout_rate: float
    avg_speed_kmh: float


def outcome_of(events) -> str:
    if events.collided:
        return "collision"
    if events.reached_rightmost:
        return "success"
    if events.safety_breach:
        return "breach"
    if events.timed_out:
        return "timeout"
    raise ValueError("episode is not over")


def aggregate(stats: list[EpisodeStats]) -> AggregateStats:
    n = len(stats)
    if n == 0:
        raise ValueError("no episodes")
    count = {k: 0 for k in OUTCOMES}
    for s in stats:
        count[s.outcome] += 1
    return AggregateStats(
        episodes=n,
        success_rate=count["success"] / n,
        collision_rate=count["collision"] / n,
        breach_rate=count["breach"] / n,
        timeout_rate=count["timeout"] / n,
        # plain left-to-right sum so any consumer of the event stream can
        # reproduce this number bit-exactly without numpy's reduction order
        avg_speed_kmh=sum(s.avg_speed for s in stats) / n * 3.6,
    )


def rolling_collision_rate(outcomes: list[str], window: int = 50) -> list[float]:
    """Collision fraction over consecutive non-overlapping chunks; a
    trailing partial chunk is dropped."""
    rates = []
    for lo in range(0, len(outcomes) - window + 1, window):
        chunk = outcomes[lo:lo + window]
        rates.append(sum(o == "collision" for o in chunk) / window)
    return rates


def _streams(seed: int):
    init_ss, action_ss, replay_ss, episode_ss = \
        np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(init_ss), np.random.default_rng(action_ss),
            np.random.default_rng(replay_ss),
            np.random.default_rng(episode_ss))


def _episode_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31))


def _resolve(action: int, state, planner_fn, planner_params, pid):
    """Map an agent action to a primitive; OPTION asks the planner."""
    if action == OPTION:
        return planner_fn(state, planner_params, pid)
    return action, pid


def run_episode(agent: DqnAgent, sim_cfg: SimConfig,
                planner_params: PlannerParams, planner_fn, sim_seed: int,
                eps_fn=None, action_rng=None, on_step=None) -> EpisodeStats:
    """One rollout. eps_fn(step_idx) -> epsilon (None means greedy).
    on_step(obs, action, events, state) observes every transition."""
    state = reset(sim_cfg, seed=sim_seed)
    pid = PidState()
    obs = observe_flat(state)
    total = 0.0
    speed_sum = 0.0
    t = 0
    while True:
        eps = 0.0 if eps_fn is None else eps_fn(t)
        action = agent.act(obs, eps, action_rng)
        primitive, pid = _resolve(action, state, planner_fn, planner_params,
                                  pid)
        ev = step(state, primitive)
        total += ev.reward
        speed_sum += float(state.speed[EGO])
        t += 1
        if on_step is not None:
            on_step(obs, action, ev, state)
        obs = observe_flat(state)
        if ev.done:
            return EpisodeStats(episode=0, steps=t, reward=total,
                                outcome=outcome_of(ev),
                                avg_speed=speed_sum / t)


def train(sim_cfg: SimConfig, train_cfg: TrainConfig,
          planner_params: PlannerParams, *, augmented: bool = True,
          option: str = "p1", episodes: int | None = None, seed: int = 0,
          checkpoint_dir: str | Path | None = None,
          checkpoint_every: int = 500,
          metrics_path: str | Path | None = None,
          progress=None) -> tuple[DqnAgent, list[EpisodeStats]]:
    """Standard DQN training. With augmented=True the action set gains the
    planner option; transitions taken through it are stored under the
    option's index."""
    sim_cfg.validate()
    train_cfg.validate()
    n_actions = N_AUGMENTED_ACTIONS if augmented else N_PRIMITIVE_ACTIONS
    planner_fn = PLANNERS[option]
    init_rng, action_rng, replay_rng, episode_rng = _streams(seed)
    agent = DqnAgent.fresh(n_actions, train_cfg, init_rng)
    episodes = train_cfg.train_episodes if episodes is None else episodes
    all_stats: list[EpisodeStats] = []
    env_steps = 0
    for ep in range(episodes):
        state = reset(sim_cfg, seed=_episode_seed(episode_rng))
        pid = PidState()
        obs = observe_flat(state)
        total = 0.0
        speed_sum = 0.0
        losses = []
        t = 0
        while True:
            eps_t = env_steps if train_cfg.eps_across_episodes else t
            action = agent.act(obs, epsilon_at(eps_t, train_cfg), action_rng)
            primitive, pid = _resolve(action, state, planner_fn,
                                      planner_params, pid)
            ev = step(state, primitive)
            next_obs = observe_flat(state)
            agent.replay.push(obs, action, ev.reward, next_obs, ev.done)
            env_steps += 1
            if env_steps % train_cfg.train_every == 0:
                loss = agent.learn(replay_rng)
                if loss is not None:
                    losses.append(loss)
            obs = next_obs
            total += ev.reward
            speed_sum += float(state.speed[EGO])
            t += 1
            if ev.done:
                break
        stats = EpisodeStats(episode=ep, steps=t, reward=total,
                             outcome=outcome_of(ev), avg_speed=speed_sum / t)
        all_stats.append(stats)
        if metrics_path is not None:
            rec = asdict(stats)
            rec["type"] = "train_episode"
            rec["loss_mean"] = float(np.mean(losses)) if losses else None
            rec["grad_steps"] = agent.grad_steps
            append_jsonl(metrics_path, rec)
        if progress is not None:
            progress(ep, stats)
        if checkpoint_dir is not None and checkpoint_every > 0 \
                and (ep + 1) % checkpoint_every == 0:
            save_checkpoint(Path(checkpoint_dir) / f"ep{ep + 1:06d}.npz",
                            agent, sim_cfg, planner_params, option, ep + 1)
    if checkpoint_dir is not None:
        save_checkpoint(Path(checkpoint_dir) / "final.npz", agent, sim_cfg,
                        planner_params, option, episodes)
    return agent, all_stats


def evaluate_agent(agent: DqnAgent, sim_cfg: SimConfig,
                   planner_params: PlannerParams,
                   option: str | None = "p1",
                   episodes: int = 1000, seed: int = 0,
                   eps: float = 0.0) -> list[EpisodeStats]:
    """Greedy by default; eps > 0 adds exploration fed from its own
    stream. option may be None for a primitive-only agent, which never
    emits the option action."""
    planner_fn = PLANNERS["p1"] if option is None else PLANNERS[option]
    _, action_rng, _, episode_rng = _streams(seed)
    out = []
    for ep in range(episodes):
        st = run_episode(agent, sim_cfg, planner_params, planner_fn,
                         _episode_seed(episode_rng),
                         eps_fn=(lambda t: eps) if eps > 0 else None,
                         action_rng=action_rng)
        st.episode = ep
        out.append(st)
    return out


class _PlannerPolicy:
    """Duck-typed stand-in for DqnAgent.act that always runs the planner."""

    def act(self, obs, eps, rng):
        return OPTION


def evaluate_planner(name: str, sim_cfg: SimConfig,
                     planner_params: PlannerParams, episodes: int = 1000,
                     seed: int = 0) -> list[EpisodeStats]:
    planner_fn = PLANNERS[name]
    _, _, _, episode_rng = _streams(seed)
    policy = _PlannerPolicy()
    out = []
    for ep in range(episodes):
        st = run_episode(policy, sim_cfg, planner_params, planner_fn,
                         _episode_seed(episode_rng))
        st.episode = ep
        out.append(st)
    return out


# --- checkpoints ----------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, agent: DqnAgent, sim_cfg: SimConfig,
                    planner_params: PlannerParams, option: str,
                    episode: int) -> None:
    """Everything needed to act greedily and to keep training except the
    replay buffer, which is deliberately not persisted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": np.int64(CHECKPOINT_VERSION),
        "sizes": np.asarray(agent.sizes, dtype=np.int64),
        "params": agent.params,
        "target_params": agent.target_params,
        "grad_steps": np.int64(agent.grad_steps),
        "episode": np.int64(episode),
        "train_cfg": json.dumps(asdict(agent.cfg)),
        "sim_cfg": json.dumps(asdict(sim_cfg)),
        "planner_params": json.dumps(asdict(planner_params)),
        "option": option,
    }
    if agent.opt_state is not None:
        payload["adam_m"] = agent.opt_state.m
        payload["adam_v"] = agent.opt_state.v
        payload["adam_t"] = np.int64(agent.opt_state.t)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    tmp.replace(path)


def load_checkpoint(path: str | Path):
    """Returns (agent, sim_cfg, planner_params, option, episode). The
    agent comes back with an empty replay buffer."""
    with np.load(Path(path), allow_pickle=False) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = tuple(int(s) for s in z["sizes"])
        train_cfg = TrainConfig(**json.loads(str(z["train_cfg"][()])))
        sim_cfg = SimConfig(**json.loads(str(z["sim_cfg"][()])))
        planner_params = PlannerParams(**json.loads(str(z["planner_params"][()])))
        option = str(z["option"][()])
        agent = DqnAgent.fresh(sizes[-1], train_cfg, np.random.default_rng(0),
                               obs_dim=sizes[0])
        agent.params = z["params"].copy()
        agent.target_params = z["target_params"].copy()
        agent.grad_steps = int(z["grad_steps"])
        if "adam_m" in z.files:
            agent.opt_state = AdamState(m=z["adam_m"].copy(),
                                        v=z["adam_v"].copy(),
                                        t=int(z["adam_t"]))
        else:
            agent.opt_state = None
        episode = int(z["episode"])
    return agent, sim_cfg, planner_params, option, episode


# --- logs -----------------------------------------------------------------

def append_jsonl(path: str | Path, record: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(record) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def ingest_session_log(path: str | Path) -> tuple[dict, list[EpisodeStats]]:
    """Rebuild per-episode stats from a bridge session event log. Returns
    (header, stats). Stats are recomputed from step records, not taken
    from the log's own episode summaries."""
    records = read_jsonl(path)
    if not records or records[0].get("type") != "header":
        raise ValueError("session log must start with a header record")
    header = records[0]
    stats: list[EpisodeStats] = []
    cur: list[dict] = []
    for rec in records[1:]:
        if rec.get("type") == "step":
            cur.append(rec)
        elif rec.get("type") == "episode":
            if not cur:
                raise ValueError("episode record without step records")
            ep = len(stats)
            steps = len(cur)
            reward = sum(r["reward"] for r in cur)
            speed = sum(r["speed"] for r in cur) / steps
            stats.append(EpisodeStats(episode=ep, steps=steps,
                                      reward=reward,
                                      outcome=rec["outcome"],
                                      avg_speed=speed))
            cur = []
    return header, stats


def best_trial(trials: list[list[EpisodeStats]]) -> int:
    """Pick the best session: highest success rate, then lowest collision
    rate, then highest average speed."""
    if not trials:
        raise ValueError("no trials")
    def key(i):
        agg = aggregate(trials[i])
        return (-agg.success_rate, agg.collision_rate, -agg.avg_speed_kmh)
    return min(range(len(trials)), key=key)
