#!/usr/bin/env python3
"""Learning-curve comparison: primitive-only DQN vs planner-option DQN.

Trains both variants over several seeds on the adversarial traffic config,
then evaluates each greedy policy. Writes one metrics JSONL per run plus a
combined summary JSON with rolling collision-rate curves.

Usage: python3 scripts/run_curves.py --out results/curves [--episodes 3000]
       [--seeds 0 1 2] [--eval-episodes 1000]
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from lanechange.config import PlannerParams, SimConfig, TrainConfig
from lanechange.harness import (aggregate, evaluate_agent, evaluate_planner,
                                rolling_collision_rate, save_checkpoint,
                                train)

VARIANTS = (("primitive", False), ("ours-p1", True))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--episodes", type=int, default=3000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--eval-episodes", type=int, default=1000)
    ap.add_argument("--eval-seed", type=int, default=10_000)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    sim_cfg = SimConfig()
    train_cfg = TrainConfig()
    params = PlannerParams()
    summary: dict = {"episodes": args.episodes, "seeds": args.seeds,
                     "runs": {}}

    for label, augmented in VARIANTS:
        summary["runs"][label] = []
        for seed in args.seeds:
            tag = f"{label}-seed{seed}"
            t0 = time.time()
            agent, stats = train(
                sim_cfg, train_cfg, params, augmented=augmented,
                option="p1", episodes=args.episodes, seed=seed,
                metrics_path=args.out / f"{tag}.jsonl")
            outcomes = [s.outcome for s in stats]
            ev = aggregate(evaluate_agent(
                agent, sim_cfg, params, episodes=args.eval_episodes,
                seed=args.eval_seed + seed))
            save_checkpoint(args.out / f"{tag}.npz", agent, sim_cfg, params,
                            "p1", args.episodes)
            run = {
                "seed": seed,
                "rolling_collision_rate": rolling_collision_rate(outcomes),
                "train_minutes": (time.time() - t0) / 60.0,
                "eval": asdict(ev),
            }
            summary["runs"][label].append(run)
            print(f"{tag}: eval collision {ev.collision_rate:.3f} "
                  f"success {ev.success_rate:.3f} "
                  f"({run['train_minutes']:.1f} min)", flush=True)

    p1 = aggregate(evaluate_planner("p1", sim_cfg, params,
                                    episodes=args.eval_episodes,
                                    seed=args.eval_seed + args.seeds[0]))
    summary["p1_baseline"] = asdict(p1)
    print(f"p1 baseline: collision {p1.collision_rate:.3f}")
    (args.out / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
