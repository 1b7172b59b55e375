"""Diagnostic: ceiling check with a ground-truth scripted policy.

Measures how low a completer's collision rate can go when it manages
lateral adjacency explicitly: never dwell beside traffic, switch only
into double-checked gaps, brake mid-drift when anyone closes in."""
from __future__ import annotations

from collections import Counter

import numpy as np

from lanechange.config import SimConfig
from lanechange.sim import (ACCELERATE, DECELERATE, EGO, NO_ACTION,
                            SWITCH_RIGHT, reset, step)


def lateral_band(state, i, pad):
    w = state.width[i] / 2.0 + pad
    return state.lateral[i] - w, state.lateral[i] + w


def corridor_threats(state, lo, hi, y_window):
    """Vehicle indices whose lateral strip intersects [lo, hi] and whose
    center sits within +-y_window meters; includes mid-drift sweep."""
    out = []
    for i in range(1, state.n):
        a, b = lateral_band(state, i, 0.0)
        if state.lc_active[i]:
            # sweep toward the target lane center
            tgt = (state.lc_target[i] + 0.5) * state.config.lane_width
            a = min(a, tgt - state.width[i] / 2.0)
            b = max(b, tgt + state.width[i] / 2.0)
        if b > lo and a < hi and abs(state.y[i]) < y_window:
            out.append(i)
    return out


def min_abs_gap(state, idxs):
    if not idxs:
        return np.inf
    return min(abs(state.y[i]) for i in idxs)


def project_gap(state, idxs, dv):
    """Worst |gap| one second out if ego's speed changes by dv."""
    if not idxs:
        return np.inf
    worst = np.inf
    for i in idxs:
        rel = state.speed[i] - (state.speed[EGO] + dv)
        worst = min(worst, abs(state.y[i] + rel * 1.0))
    return worst


def gapkeeper(state, cfg, safe=6.0, lookahead=10.0, check_far=True):
    lw = cfg.lane_width
    ego_lo, ego_hi = lateral_band(state, EGO, 0.0)
    if state.lc_active[EGO]:
        tgt = (state.lc_target[EGO] + 0.5) * lw
        ego_lo = min(ego_lo, tgt - state.width[EGO] / 2.0)
        ego_hi = max(ego_hi, tgt + state.width[EGO] / 2.0)
    near = corridor_threats(state, ego_lo - lw, ego_hi + lw, 14.0)
    if min_abs_gap(state, near) < safe:
        best, best_gap = NO_ACTION, project_gap(state, near, 0.0)
        for act, dv in ((ACCELERATE, 3.0), (DECELERATE, -4.0)):
            g = project_gap(state, near, dv)
            if g > best_gap:
                best, best_gap = act, g
        return best
    if state.lc_active[EGO]:
        return NO_ACTION
    lane = int(state.lane[EGO])
    if lane + 1 < cfg.n_lanes:
        tgt_lo = (lane + 1) * lw
        tgt_hi = tgt_lo + lw
        blockers = corridor_threats(state, tgt_lo, tgt_hi, lookahead)
        far = []
        if check_far and lane + 2 < cfg.n_lanes:
            far = corridor_threats(state, tgt_hi, tgt_hi + lw, lookahead)
        if not blockers and not far:
            return SWITCH_RIGHT
    # hold near the prevailing speed so neighbors drift past slowly
    if state.speed[EGO] < 0.55 * cfg.speed_limit_mps:
        return ACCELERATE
    if state.speed[EGO] > 0.70 * cfg.speed_limit_mps:
        return DECELERATE
    return NO_ACTION


def score(policy, episodes, seed, **kw):
    cfg = SimConfig()
    rng = np.random.default_rng(seed)
    outcomes = Counter()
    lens = []
    for _ in range(episodes):
        state = reset(cfg, int(rng.integers(0, 2**31)))
        while True:
            ev = step(state, policy(state, cfg, **kw))
            if ev.done:
                for name in ("collided", "reached_rightmost",
                             "safety_breach", "timed_out"):
                    if getattr(ev, name):
                        outcomes[name] += 1
                lens.append(state.step_count)
                break
    n = episodes
    print(f"  succ {outcomes['reached_rightmost']/n:.3f} "
          f"coll {outcomes['collided']/n:.3f} "
          f"breach {outcomes['safety_breach']/n:.3f} "
          f"timeout {outcomes['timed_out']/n:.3f} len {np.mean(lens):.0f}",
          flush=True)


if __name__ == "__main__":
    for label, kw in [
        ("gapkeeper safe6 look10 far", {}),
        ("gapkeeper safe6 look10 nofar", dict(check_far=False)),
        ("gapkeeper safe4 look8 far", dict(safe=4.0, lookahead=8.0)),
        ("gapkeeper safe8 look12 far", dict(safe=8.0, lookahead=12.0)),
    ]:
        for seed in (123, 777):
            print(f"{label} seed {seed}", flush=True)
            score(gapkeeper, 400, seed, **kw)
