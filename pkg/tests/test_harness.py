from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from lanechange.config import PlannerParams, SimConfig, TrainConfig
from lanechange.harness import (AggregateStats, EpisodeStats, aggregate,
                                append_jsonl, best_trial, evaluate_agent,
                                evaluate_planner, ingest_session_log,
                                load_checkpoint, outcome_of, read_jsonl,
                                rolling_collision_rate, run_episode,
                                save_checkpoint, train)
from lanechange.sim import StepEvents

SIM = replace(SimConfig(), max_steps=300)
PAR = PlannerParams()


def quick_train_cfg(**kw):
    base = dict(learn_start=64, batch_size=16, target_sync_interval=20)
    base.update(kw)
    return TrainConfig(**base)


def ev(**kw):
    base = dict(reward=0.0, done=True, collided=False,
                reached_rightmost=False, safety_breach=False,
                timed_out=False)
    base.update(kw)
    return StepEvents(**base)


def stat(outcome, speed=10.0):
    return EpisodeStats(episode=0, steps=10, reward=0.0, outcome=outcome,
                        avg_speed=speed)


def test_outcome_of_each_flag():
    assert outcome_of(ev(collided=True)) == "collision"
    assert outcome_of(ev(reached_rightmost=True)) == "success"
    assert outcome_of(ev(safety_breach=True)) == "breach"
    assert outcome_of(ev(timed_out=True)) == "timeout"
    with pytest.raises(ValueError):
        outcome_of(ev())


def test_aggregate_rates_and_speed():
    stats = [stat("success", 10.0), stat("success", 20.0),
             stat("collision", 5.0), stat("timeout", 5.0)]
    agg = aggregate(stats)
    assert agg == AggregateStats(episodes=4, success_rate=0.5,
                                 collision_rate=0.25, breach_rate=0.0,
                                 timeout_rate=0.25,
                                 avg_speed_kmh=pytest.approx(36.0))
    with pytest.raises(ValueError):
        aggregate([])


def test_rolling_collision_rate_chunks():
    outcomes = ["collision"] * 3 + ["success"] * 7 \
        + ["collision"] * 5 + ["breach"] * 5 \
        + ["success"] * 4  # trailing partial chunk is dropped
    assert rolling_collision_rate(outcomes, window=10) == [0.3, 0.5]
    assert rolling_collision_rate(["success"] * 9, window=10) == []


def test_train_smoke_collects_stats_and_learns(tmp_path):
    agent, stats = train(SIM, quick_train_cfg(), PAR, augmented=True,
                         option="p1", episodes=4, seed=7,
                         metrics_path=tmp_path / "metrics.jsonl")
    assert len(stats) == 4
    assert all(s.outcome in ("success", "collision", "breach", "timeout")
               for s in stats)
    assert agent.grad_steps > 0
    recs = read_jsonl(tmp_path / "metrics.jsonl")
    assert len(recs) == 4
    assert recs[0]["type"] == "train_episode"
    assert recs[-1]["grad_steps"] == agent.grad_steps


def test_train_is_deterministic_per_seed():
    a1, s1 = train(SIM, quick_train_cfg(), PAR, episodes=3, seed=11)
    a2, s2 = train(SIM, quick_train_cfg(), PAR, episodes=3, seed=11)
    a3, _ = train(SIM, quick_train_cfg(), PAR, episodes=3, seed=12)
    assert np.array_equal(a1.params, a2.params)
    assert np.array_equal(a1.target_params, a2.target_params)
    assert s1 == s2
    assert not np.array_equal(a1.params, a3.params)


def test_primitive_training_has_four_actions():
    agent, _ = train(SIM, quick_train_cfg(), PAR, augmented=False,
                     episodes=1, seed=0)
    assert agent.n_actions == 4


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    agent, _ = train(SIM, quick_train_cfg(), PAR, episodes=3, seed=5)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, agent, SIM, PAR, "p1", episode=3)
    loaded, sim_cfg, params, option, episode = load_checkpoint(path)
    assert np.array_equal(loaded.params, agent.params)
    assert loaded.params.dtype == agent.params.dtype
    assert np.array_equal(loaded.target_params, agent.target_params)
    assert loaded.grad_steps == agent.grad_steps
    assert np.array_equal(loaded.opt_state.m, agent.opt_state.m)
    assert np.array_equal(loaded.opt_state.v, agent.opt_state.v)
    assert loaded.opt_state.t == agent.opt_state.t
    assert sim_cfg == SIM and params == PAR
    assert option == "p1" and episode == 3
    # greedy decisions agree on random probe observations
    rng = np.random.default_rng(0)
    for _ in range(100):
        obs = rng.uniform(-1.0, 1.0, size=500).astype(np.float32)
        assert loaded.act(obs, 0.0, None) == agent.act(obs, 0.0, None)
    assert not (tmp_path / "ck.tmp").exists()


def test_checkpoint_rejects_unknown_version(tmp_path):
    agent, _ = train(SIM, quick_train_cfg(), PAR, episodes=1, seed=5)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, agent, SIM, PAR, "p1", episode=1)
    import numpy as _np
    with _np.load(path, allow_pickle=False) as z:
        payload = {k: z[k] for k in z.files}
    payload["version"] = _np.int64(99)
    with open(path, "wb") as fh:
        _np.savez(fh, **payload)
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_train_writes_periodic_checkpoints(tmp_path):
    train(SIM, quick_train_cfg(), PAR, episodes=4, seed=2,
          checkpoint_dir=tmp_path, checkpoint_every=2)
    names = sorted(p.name for p in tmp_path.glob("*.npz"))
    assert names == ["ep000002.npz", "ep000004.npz", "final.npz"]


def test_evaluate_planner_smoke():
    stats = evaluate_planner("p1", SIM, PAR, episodes=3, seed=1)
    assert [s.episode for s in stats] == [0, 1, 2]
    again = evaluate_planner("p1", SIM, PAR, episodes=3, seed=1)
    assert stats == again


def test_evaluate_agent_greedy_deterministic():
    agent, _ = train(SIM, quick_train_cfg(), PAR, episodes=2, seed=3)
    a = evaluate_agent(agent, SIM, PAR, episodes=3, seed=9)
    b = evaluate_agent(agent, SIM, PAR, episodes=3, seed=9)
    assert a == b


def test_run_episode_callback_sees_every_step():
    agent, _ = train(SIM, quick_train_cfg(), PAR, episodes=1, seed=4)
    seen = []
    st = run_episode(agent, SIM, PAR, None, sim_seed=123,
                     on_step=lambda obs, a, ev, state: seen.append(a))
    assert len(seen) == st.steps
    assert st.outcome in ("success", "collision", "breach", "timeout")


def test_best_trial_tiebreaks():
    hi = [stat("success"), stat("success"), stat("collision")]
    lo = [stat("success"), stat("collision"), stat("collision")]
    assert best_trial([lo, hi, lo]) == 1
    # equal success: fewer collisions wins
    t1 = [stat("success"), stat("collision"), stat("collision")]
    t2 = [stat("success"), stat("collision"), stat("breach")]
    assert best_trial([t1, t2]) == 1
    # equal success and collisions: faster wins
    t3 = [stat("success", 10.0), stat("breach", 10.0)]
    t4 = [stat("success", 12.0), stat("breach", 12.0)]
    assert best_trial([t3, t4]) == 1
    with pytest.raises(ValueError):
        best_trial([])


def test_ingest_session_log_recomputes_stats(tmp_path):
    path = tmp_path / "session.jsonl"
    append_jsonl(path, {"type": "header", "v": 1, "mode": "human", "seed": 4})
    for r, sp in ((0.0, 12.0), (-0.001, 13.0), (10.0, 14.0)):
        append_jsonl(path, {"type": "step", "reward": r, "speed": sp})
    append_jsonl(path, {"type": "episode", "outcome": "success"})
    for r, sp in ((-10.0, 8.0),):
        append_jsonl(path, {"type": "step", "reward": r, "speed": sp})
    append_jsonl(path, {"type": "episode", "outcome": "collision"})
    header, stats = ingest_session_log(path)
    assert header["mode"] == "human"
    assert stats == [
        EpisodeStats(episode=0, steps=3, reward=pytest.approx(9.999),
                     outcome="success", avg_speed=pytest.approx(13.0)),
        EpisodeStats(episode=1, steps=1, reward=-10.0, outcome="collision",
                     avg_speed=8.0),
    ]


def test_ingest_rejects_headerless_log(tmp_path):
    path = tmp_path / "bad.jsonl"
    append_jsonl(path, {"type": "step", "reward": 0.0, "speed": 1.0})
    with pytest.raises(ValueError, match="header"):
        ingest_session_log(path)
