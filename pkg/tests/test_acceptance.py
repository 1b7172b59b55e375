"""End-to-end acceptance gate. One test per headline claim, each printing
a single pass/fail line under pytest -v. Thresholds are pinned constants;
the heavyweight training comparison caches its results on disk keyed by a
config fingerprint so reruns stay cheap while edits force a retrain.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import pytest

from lanechange import nets
from lanechange.config import PlannerParams, SimConfig, TrainConfig
from lanechange.dqn import OBS_DIM, DqnAgent, select_action
from lanechange.harness import (aggregate, evaluate_agent, evaluate_planner,
                                load_checkpoint, rolling_collision_rate,
                                save_checkpoint, train)
from lanechange.sim import (ACCELERATE, DECELERATE, detect_collision,
                            detect_safety_breach, observe, observe_flat,
                            reset)
from oracles import (breach_oracle, collision_oracle, fd_gradient,
                     grid_oracle, random_scene)

# --- pinned tolerances and scales ----------------------------------------

GRADCHECK_NETS = 10
GRADCHECK_SIZES = (20, 8, 8, 8, 5)
GRADCHECK_H = 1e-5
GRADCHECK_REL_TOL = 1e-4
GRADCHECK_TIME_LIMIT_S = 60.0

ORACLE_SCENES = 1000
ORACLE_TIME_LIMIT_S = 60.0

P3_CLEAN_EPISODES = 1000
P3_TIME_LIMIT_S = 600.0

TOY_EPISODES = 500
TOY_SUCCESS_MIN = 0.95
TOY_TIME_LIMIT_S = 900.0

CURVE_SEEDS = (0, 1, 2)
CURVE_EPISODES = 3000
CURVE_EVAL_EPISODES = 1000
CURVE_EVAL_SEED_BASE = 10_000
PLANNER_RATIO_MAX = 0.5
CURVE_TIME_LIMIT_S = 7200.0
ROLLING_WINDOW = 50

PROBE_STATES = 100

REFERENCE_ACCEL_Q = [0.851, 0.841, 0.829, 0.844]
REFERENCE_DECEL_Q = [1.030, 1.042, 1.043, 1.036]


# --- criterion 1: analytic gradients vs central finite differences --------

def test_gradients_match_finite_differences_on_small_nets():
    start = time.monotonic()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(GRADCHECK_NETS):
        params = nets.init_params(GRADCHECK_SIZES, rng)
        xs = rng.normal(size=(4, GRADCHECK_SIZES[0]))
        acts = rng.integers(0, GRADCHECK_SIZES[-1], size=4)
        targets = rng.normal(size=4)
        rows = np.arange(4)

        out, cache = nets.forward_cache(GRADCHECK_SIZES, params, xs)
        diff = out[rows, acts] - targets
        dout = np.zeros_like(out)
        dout[rows, acts] = diff / 4.0
        analytic = nets.backward(GRADCHECK_SIZES, params, cache, dout)

        def loss_fn(p):
            o = nets.forward(GRADCHECK_SIZES, p, xs)
            return float(0.5 * np.mean((o[rows, acts] - targets) ** 2))

        fd = fd_gradient(loss_fn, params, np.arange(params.size),
                         h=GRADCHECK_H)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-8)
        worst = max(worst, float((np.abs(analytic - fd) / denom).max()))
    elapsed = time.monotonic() - start
    assert worst < GRADCHECK_REL_TOL, f"max rel err {worst:.2e}"
    assert elapsed < GRADCHECK_TIME_LIMIT_S, f"took {elapsed:.1f}s"


# --- criterion 2: grid and event detection vs brute-force oracles ---------

def test_observation_and_events_match_oracles_on_1000_scenes():
    start = time.monotonic()
    rng = np.random.default_rng(11)
    for i in range(ORACLE_SCENES):
        cfg = SimConfig(n_lanes=int(rng.integers(3, 6)))
        s = random_scene(rng, cfg)
        assert np.array_equal(observe(s), grid_oracle(s)), f"scene {i}"
        assert detect_collision(s) == collision_oracle(s), f"scene {i}"
        assert detect_safety_breach(s) == breach_oracle(s), f"scene {i}"
    elapsed = time.monotonic() - start
    assert elapsed < ORACLE_TIME_LIMIT_S, f"took {elapsed:.1f}s"


# --- criterion 3: the risk planner never collides without adversaries -----

def test_p3_zero_collisions_without_adversaries():
    start = time.monotonic()
    cfg = replace(SimConfig(), adversary_lane_change_prob=0.0)
    stats = evaluate_planner("p3", cfg, PlannerParams(),
                             episodes=P3_CLEAN_EPISODES, seed=123)
    agg = aggregate(stats)
    elapsed = time.monotonic() - start
    assert agg.collision_rate == 0.0, \
        f"collision rate {agg.collision_rate:.4f}"
    assert elapsed < P3_TIME_LIMIT_S, f"took {elapsed:.1f}s"


# --- criterion 4: primitive DQN converges on an empty road ----------------

def test_primitive_agent_converges_on_empty_road():
    start = time.monotonic()
    cfg = replace(SimConfig(), n_vehicles=1, n_adversarial=0)
    agent, stats = train(cfg, TrainConfig(), PlannerParams(),
                         augmented=False, episodes=TOY_EPISODES, seed=5)
    tail = stats[-100:]
    rate = sum(s.outcome == "success" for s in tail) / len(tail)
    elapsed = time.monotonic() - start
    assert rate >= TOY_SUCCESS_MIN, f"success rate {rate:.2f}"
    assert elapsed < TOY_TIME_LIMIT_S, f"took {elapsed:.1f}s"


# --- criteria 5 and 6: learning-curve and collision-ranking claims --------

def _curve_fingerprint() -> dict:
    return {
        "sim": asdict(SimConfig()),
        "train": asdict(_curve_train_cfg()),
        "planner": asdict(PlannerParams()),
        "seeds": list(CURVE_SEEDS),
        "episodes": CURVE_EPISODES,
        "eval_episodes": CURVE_EVAL_EPISODES,
        "eval_seed_base": CURVE_EVAL_SEED_BASE,
    }


def _curve_train_cfg() -> TrainConfig:
    """Training protocol for the head-to-head curve comparison.

    Starts from the shipped TrainConfig defaults; the four overrides
    adapt them to 3000-episode runs with ~180-step episodes (selected
    on separate pilot seeds, pre-registered before the gate seeds ran):
    - cross-episode epsilon anneal over the first ~20% of experience,
      since per-episode annealing never leaves the 0.095 plateau when
      episodes end after a few hundred steps;
    - one gradient step per 4 env steps (the usual DQN cadence), which
      also stretches the 100-gradient-step target sync to 400 env steps;
    - gamma 0.995 so the sparse +-10 terminals stay visible across the
      200-500 step horizons these episodes actually have.
    """
    return replace(TrainConfig(),
                   eps_across_episodes=True,
                   eps_decay_steps=100_000,
                   train_every=4,
                   gamma=0.995)


def _curve_compute() -> dict:
    sim_cfg = SimConfig()
    params = PlannerParams()
    train_cfg = _curve_train_cfg()
    out = {"fingerprint": _curve_fingerprint(), "runs": []}
    for seed in CURVE_SEEDS:
        eval_seed = CURVE_EVAL_SEED_BASE + seed
        run = {"seed": seed}
        for label, augmented in (("ours_p1", True), ("primitive", False)):
            agent, stats = train(sim_cfg, train_cfg, params,
                                 augmented=augmented, option="p1",
                                 episodes=CURVE_EPISODES, seed=seed)
            outcomes = [s.outcome for s in stats]
            ev = aggregate(evaluate_agent(
                agent, sim_cfg, params, option="p1",
                episodes=CURVE_EVAL_EPISODES, seed=eval_seed))
            run[label] = {
                "rolling": rolling_collision_rate(outcomes, ROLLING_WINDOW),
                "eval_collision": ev.collision_rate,
                "eval_success": ev.success_rate,
            }
        base = aggregate(evaluate_planner(
            "p1", sim_cfg, params, episodes=CURVE_EVAL_EPISODES,
            seed=eval_seed))
        run["p1_baseline"] = {"eval_collision": base.collision_rate,
                              "eval_success": base.success_rate}
        out["runs"].append(run)
    return out


@pytest.fixture(scope="module")
def curve_results():
    cache = Path(__file__).parent / "_curve_cache.json"
    fingerprint = _curve_fingerprint()
    if cache.exists():
        data = json.loads(cache.read_text())
        if data.get("fingerprint") == fingerprint:
            return data
    start = time.monotonic()
    data = _curve_compute()
    data["train_seconds"] = time.monotonic() - start
    cache.write_text(json.dumps(data))
    assert data["train_seconds"] < CURVE_TIME_LIMIT_S, \
        f"training took {data['train_seconds'] / 60:.0f} min"
    return data


def _final_third_mean(rolling: list[float]) -> float:
    k = len(rolling) - len(rolling) // 3
    return float(np.mean(rolling[k:]))


def test_augmented_agent_beats_primitive_curve_and_halves_p1(curve_results):
    ours_tail = np.mean([_final_third_mean(r["ours_p1"]["rolling"])
                         for r in curve_results["runs"]])
    prim_tail = np.mean([_final_third_mean(r["primitive"]["rolling"])
                         for r in curve_results["runs"]])
    ours_eval = np.mean([r["ours_p1"]["eval_collision"]
                         for r in curve_results["runs"]])
    p1_eval = np.mean([r["p1_baseline"]["eval_collision"]
                       for r in curve_results["runs"]])
    assert ours_tail < prim_tail, \
        f"rolling tail: ours {ours_tail:.3f} vs primitive {prim_tail:.3f}"
    assert ours_eval <= PLANNER_RATIO_MAX * p1_eval, \
        f"eval: ours {ours_eval:.3f} vs 0.5 x p1 {0.5 * p1_eval:.3f}"


def test_collision_rate_ordering_ours_primitive_planner(curve_results):
    ours = np.mean([r["ours_p1"]["eval_collision"]
                    for r in curve_results["runs"]])
    prim = np.mean([r["primitive"]["eval_collision"]
                    for r in curve_results["runs"]])
    p1 = np.mean([r["p1_baseline"]["eval_collision"]
                  for r in curve_results["runs"]])
    assert ours < prim < p1, \
        f"ordering broken: ours {ours:.3f}, primitive {prim:.3f}, p1 {p1:.3f}"


# --- criterion 7: determinism and checkpoint round-trips ------------------

def test_identical_seeds_reproduce_identical_metrics(tmp_path):
    cfg = replace(SimConfig(), max_steps=300)
    tcfg = replace(TrainConfig(), learn_start=64, batch_size=16)
    runs = []
    for _ in range(2):
        _, stats = train(cfg, tcfg, PlannerParams(), augmented=True,
                         episodes=25, seed=77)
        runs.append([(s.steps, s.reward, s.outcome, s.avg_speed)
                     for s in stats])
    assert runs[0] == runs[1]


def test_checkpoint_roundtrip_preserves_greedy_policy(tmp_path):
    cfg = replace(SimConfig(), max_steps=300)
    tcfg = replace(TrainConfig(), learn_start=64, batch_size=16)
    agent, _ = train(cfg, tcfg, PlannerParams(), augmented=True,
                     episodes=25, seed=78)
    path = tmp_path / "agent.npz"
    save_checkpoint(path, agent, cfg, PlannerParams(), "p1", 25)
    loaded, *_ = load_checkpoint(path)
    probes = []
    for seed in range(PROBE_STATES):
        probes.append(observe_flat(reset(cfg, seed=seed)))
    for obs in probes:
        a = agent.act(obs, 0.0, None)
        b = loaded.act(obs, 0.0, None)
        assert a == b
        assert np.array_equal(agent.q_values(obs), loaded.q_values(obs))


# --- criterion 8: reference Q-vector argmax semantics ---------------------

def _greedy_from_q(q: list[float]) -> int:
    """Build a bias-only linear net whose output equals q exactly, then
    run the agent's own greedy selection path over it."""
    k = len(q)
    sizes = (1, k)
    params = np.concatenate([np.zeros(k), np.asarray(q, dtype=np.float64)])
    return select_action(sizes, params, np.zeros(1), 0.0, None, k)


def test_reference_q_vectors_pick_expected_actions():
    assert _greedy_from_q(REFERENCE_ACCEL_Q) == ACCELERATE
    assert _greedy_from_q(REFERENCE_DECEL_Q) == DECELERATE
