#!/usr/bin/env python3
"""Outcome table: classical planners and any trained checkpoints side by
side on the adversarial traffic config.

Usage: python3 scripts/run_outcomes.py [--episodes 1000] [--seed 123]
       [--checkpoint results/curves/ours-p1-seed0.npz ...]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from lanechange.config import PlannerParams, SimConfig
from lanechange.harness import (aggregate, evaluate_agent, evaluate_planner,
                                load_checkpoint)


def row(label, agg):
    print(f"{label:<16} {agg.success_rate:8.3f} {agg.collision_rate:10.3f} "
          f"{agg.breach_rate:8.3f} {agg.timeout_rate:8.3f} "
          f"{agg.avg_speed_kmh:10.1f}")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--episodes", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=123)
    ap.add_argument("--checkpoint", type=Path, nargs="*", default=[])
    args = ap.parse_args()

    sim_cfg = SimConfig()
    params = PlannerParams()
    print(f"{'policy':<16} {'success':>8} {'collision':>10} {'breach':>8} "
          f"{'timeout':>8} {'km/h':>10}")
    for name in ("p1", "p2", "p3"):
        stats = evaluate_planner(name, sim_cfg, params,
                                 episodes=args.episodes, seed=args.seed)
        row(name, aggregate(stats))
    for path in args.checkpoint:
        agent, ck_sim, ck_params, option, _ = load_checkpoint(path)
        stats = evaluate_agent(agent, ck_sim, ck_params, option=option,
                               episodes=args.episodes, seed=args.seed)
        row(path.stem, aggregate(stats))
    return 0


if __name__ == "__main__":
    sys.exit(main())
