"""Classical lane-change planners.

p1: gap-threshold switcher with a PID speed controller.
p2: p1 plus a relative-speed admission test on the target lane.
p3: shortest path over a time-expanded lane graph with a Gaussian risk
    field, plus risk-based speed selection when it stays in lane.

All three emit one primitive action per call and re-plan every step.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .config import PlannerParams, SimConfig
from .sim import (ACCELERATE, DECELERATE, EGO, NO_ACTION, SWITCH_RIGHT,
                  SimState, lane_center)

N_RISK_LAYERS = 8  # graph layers beyond "now"; horizon / risk_grid_dt
_TIE_EPS = 1e-9


@dataclass
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


@dataclass
class PlannerView:
    """Per-lane traffic summary around the ego. Gaps are edge-to-edge
    longitudinal clearances clamped at 0; lanes with no vehicle on a side
    carry gap = range_half, front_speed = speed_limit and back_speed = 0.
    A vehicle belongs to every lane its lateral footprint strictly
    overlaps; a vehicle level with the ego (y = 0) counts as front."""
    ego_lane: int
    ego_speed: float
    ego_changing: bool
    front_gap: np.ndarray
    back_gap: np.ndarray
    front_speed: np.ndarray
    back_speed: np.ndarray


def lane_overlap_matrix(state: SimState) -> np.ndarray:
    """(n_vehicles, n_lanes) bool: strict lateral overlap with each lane."""
    c = state.config
    w = state.width
    lat0 = state.lateral - w / 2.0
    lat1 = state.lateral + w / 2.0
    lanes = np.arange(c.n_lanes, dtype=np.float64)
    lane_lo = lanes * c.lane_width
    lane_hi = lane_lo + c.lane_width
    return (lat0[:, None] < lane_hi[None, :]) & (lane_lo[None, :] < lat1[:, None])


def build_view(state: SimState) -> PlannerView:
    c = state.config
    overlap = lane_overlap_matrix(state)
    ln = state.length
    half_sum = (ln + ln[EGO]) / 2.0
    front = state.y >= 0.0
    front_edge = state.y - half_sum
    back_edge = -state.y - half_sum
    front_gap = np.full(c.n_lanes, c.range_half)
    back_gap = np.full(c.n_lanes, c.range_half)
    front_speed = np.full(c.n_lanes, c.speed_limit_mps)
    back_speed = np.zeros(c.n_lanes)
    for lane in range(c.n_lanes):
        members = overlap[:, lane].copy()
        members[EGO] = False
        fr = np.flatnonzero(members & front)
        if fr.size:
            i = fr[np.argmin(state.y[fr])]
            front_gap[lane] = max(front_edge[i], 0.0)
            front_speed[lane] = state.speed[i]
        bk = np.flatnonzero(members & ~front)
        if bk.size:
            i = bk[np.argmax(state.y[bk])]
            back_gap[lane] = max(back_edge[i], 0.0)
            back_speed[lane] = state.speed[i]
    return PlannerView(ego_lane=int(state.lane[EGO]),
                       ego_speed=float(state.speed[EGO]),
                       ego_changing=bool(state.lc_active[EGO]),
                       front_gap=front_gap, back_gap=back_gap,
                       front_speed=front_speed, back_speed=back_speed)


def pid_speed_action(view: PlannerView, params: PlannerParams,
                     config: SimConfig, pid: PidState) -> tuple[int, PidState]:
    """Track the current lane's front vehicle speed, or the speed limit on
    a clear lane. The acceleration command is quantized through a deadband."""
    if view.front_gap[view.ego_lane] < config.range_half:
        target = view.front_speed[view.ego_lane]
    else:
        target = config.speed_limit_mps
    error = target - view.ego_speed
    integral = pid.integral + error * config.dt
    if pid.prev_error is None:
        derivative = 0.0
    else:
        derivative = (error - pid.prev_error) / config.dt
    cmd = params.pid_kp * error + params.pid_ki * integral \
        + params.pid_kd * derivative
    nxt = PidState(integral=integral, prev_error=error)
    if cmd > params.accel_deadband:
        return ACCELERATE, nxt
    if cmd < -params.accel_deadband:
        return DECELERATE, nxt
    return NO_ACTION, nxt


def _p1_gaps_allow_switch(view: PlannerView, params: PlannerParams) -> bool:
    cur = view.ego_lane
    rightmost = cur == view.front_gap.size - 1
    if view.ego_changing or rightmost:
        return False
    return (view.front_gap[cur] >= params.gap_front_min
            and view.front_gap[cur + 1] >= params.gap_right_front_min
            and view.back_gap[cur + 1] >= params.gap_right_back_min)


def p1_action(state: SimState, params: PlannerParams,
              pid: PidState) -> tuple[int, PidState]:
    view = build_view(state)
    if _p1_gaps_allow_switch(view, params):
        return SWITCH_RIGHT, pid
    return pid_speed_action(view, params, state.config, pid)


def _p2_admits(view: PlannerView, params: PlannerParams,
               config: SimConfig) -> bool:
    """Project the target-lane gaps over the admission horizon with the
    current relative speeds; both must keep at least safety_gap."""
    right = view.ego_lane + 1
    closing_back = max(view.back_speed[right] - view.ego_speed, 0.0)
    back_pred = view.back_gap[right] - closing_back * params.horizon
    closing_front = min(view.front_speed[right] - view.ego_speed, 0.0)
    front_pred = view.front_gap[right] + closing_front * params.horizon
    return back_pred >= config.safety_gap and front_pred >= config.safety_gap


def p2_action(state: SimState, params: PlannerParams,
              pid: PidState) -> tuple[int, PidState]:
    view = build_view(state)
    if _p1_gaps_allow_switch(view, params) and \
            _p2_admits(view, params, state.config):
        return SWITCH_RIGHT, pid
    return pid_speed_action(view, params, state.config, pid)


# --- p3 -------------------------------------------------------------------

def _risk_table(state: SimState, params: PlannerParams,
                overlap: np.ndarray, ego_speed: float) -> np.ndarray:
    """(n_lanes, N_RISK_LAYERS + 1) predicted risk. A vehicle contributes
    w * exp(-d^2 / sigma^2) to every lane it overlaps, where d is its
    predicted ego-frame distance at that layer under constant speeds and
    w = 1 + max(0, closing_speed) / speed_limit."""
    c = state.config
    table = np.zeros((c.n_lanes, N_RISK_LAYERS + 1))
    others = np.arange(1, state.n)
    if others.size == 0:
        return table
    y = state.y[others]
    v = state.speed[others]
    sign = np.where(y >= 0.0, 1.0, -1.0)
    closing = sign * (ego_speed - v)
    w = 1.0 + np.maximum(closing, 0.0) / c.speed_limit_mps
    t = np.arange(N_RISK_LAYERS + 1) * params.risk_grid_dt
    y_pred = y[:, None] + (v[:, None] - ego_speed) * t[None, :]
    contrib = w[:, None] * np.exp(-(y_pred ** 2) / params.risk_sigma ** 2)
    for lane in range(c.n_lanes):
        members = overlap[others, lane]
        if members.any():
            table[lane] = contrib[members].sum(axis=0)
    return table


def _plan_lane(state: SimState, params: PlannerParams,
               risk: np.ndarray) -> int:
    """Dijkstra over the (lane, layer) graph; edges stay or move one lane
    right. Edge cost is the destination risk plus lane_change_cost for a
    switch, minus lane_gain_bonus for the rightward gain, shifted by
    +lane_gain_bonus so costs stay nonnegative (every full path has the
    same edge count, so the shift cannot change the argmin). Cost ties are
    broken toward paths that sit in higher lanes earlier.

    Returns the lane at layer 1 of the best path."""
    c = state.config
    start = int(state.lane[EGO])
    lam = params.lane_change_cost
    mu = params.lane_gain_bonus
    best: dict[tuple[int, int], tuple[float, int]] = {(start, 0): (0.0, -start)}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(0.0, -start, start, 0)]
    while heap:
        dist, neg, lane, layer = heapq.heappop(heap)
        cur = best.get((lane, layer))
        if cur is None or (dist, neg) > cur:
            continue
        if layer == N_RISK_LAYERS:
            continue
        for nxt in (lane, lane + 1):
            if nxt >= c.n_lanes:
                continue
            switch = nxt != lane
            cost = risk[nxt, layer + 1] + mu \
                + (lam - mu if switch else 0.0)
            cand = (dist + cost, neg - nxt)
            node = (nxt, layer + 1)
            old = best.get(node)
            if old is None or cand[0] < old[0] - _TIE_EPS or \
                    (abs(cand[0] - old[0]) <= _TIE_EPS and cand[1] < old[1]):
                best[node] = cand
                parent[node] = (lane, layer)
                heapq.heappush(heap, (cand[0], cand[1], nxt, layer + 1))
    goal = min((lane for lane in range(c.n_lanes)
                if (lane, N_RISK_LAYERS) in best),
               key=lambda lane: best[(lane, N_RISK_LAYERS)])
    node = (goal, N_RISK_LAYERS)
    while node[1] > 1:
        node = parent[node]
    return node[0]


def _select_speed(state: SimState, params: PlannerParams,
                  overlap: np.ndarray) -> float:
    """Score candidate ego speeds by summed own-lane risk over the horizon
    minus a small fast-is-better preference; return the best candidate."""
    c = state.config
    cand = np.linspace(0.0, c.speed_limit_mps, params.speed_candidates)
    score = -params.speed_preference * cand / c.speed_limit_mps
    lane = int(state.lane[EGO])
    members = np.flatnonzero(overlap[:, lane])
    members = members[members != EGO]
    if members.size:
        y = state.y[members]
        v = state.speed[members]
        sign = np.where(y >= 0.0, 1.0, -1.0)
        t = np.arange(1, N_RISK_LAYERS + 1) * params.risk_grid_dt
        # axes: vehicle, layer, candidate
        closing = sign[:, None] * (cand[None, :] - v[:, None])
        w = 1.0 + np.maximum(closing, 0.0) / c.speed_limit_mps
        y_pred = y[:, None, None] + (v[:, None, None] - cand[None, None, :]) \
            * t[None, :, None]
        risk = w[:, None, :] * np.exp(-(y_pred ** 2) / params.risk_sigma ** 2)
        score = score + risk.sum(axis=(0, 1))
    return float(cand[int(np.argmin(score))])


def _switch_drift_safe(state: SimState, params: PlannerParams) -> bool:
    """Project every vehicle through the whole drift window at constant
    speeds (mirroring the simulator's lateral interpolation) and veto the
    switch if any of them would strictly overlap the ego laterally with
    less than switch_clearance_margin of longitudinal edge gap left. The
    risk field alone cannot do this: its per-layer contribution is bounded
    near 1, so a guaranteed side impact can still lose to path bonuses."""
    c = state.config
    if state.n <= 1:
        return True
    n_steps = math.ceil(c.lane_change_duration / c.dt - 1e-9)
    k = np.arange(n_steps + 1)
    p = np.minimum(k * (c.dt / c.lane_change_duration), 1.0)
    lat_ego = state.lateral[EGO] + p * c.lane_width
    lat_oth = np.broadcast_to(state.lateral[1:, None],
                              (state.n - 1, k.size)).copy()
    for i in np.flatnonzero(state.lc_active[1:]) + 1:
        tgt = lane_center(c, int(state.lc_target[i]))
        pk = np.minimum(state.lc_progress[i]
                        + k * (c.dt / c.lane_change_duration), 1.0)
        lat_oth[i - 1] = state.lc_start[i] + pk * (tgt - state.lc_start[i])
    dx = np.abs(lat_ego[None, :] - lat_oth)
    lat_overlap = dx < (state.width[1:, None] + state.width[EGO]) / 2.0
    dy = np.abs(state.y[1:, None]
                + (state.speed[1:, None] - state.speed[EGO]) * (k * c.dt))
    edge = dy - (state.length[1:, None] + state.length[EGO]) / 2.0
    return not bool(np.any(lat_overlap
                           & (edge < params.switch_clearance_margin)))


def p3_action(state: SimState, params: PlannerParams,
              pid: PidState) -> tuple[int, PidState]:
    c = state.config
    overlap = lane_overlap_matrix(state)
    ego_speed = float(state.speed[EGO])
    if not state.lc_active[EGO] and int(state.lane[EGO]) < c.n_lanes - 1:
        risk = _risk_table(state, params, overlap, ego_speed)
        if _plan_lane(state, params, risk) != int(state.lane[EGO]) \
                and _switch_drift_safe(state, params):
            return SWITCH_RIGHT, pid
    target = _select_speed(state, params, overlap)
    # hysteresis: accelerating needs a clearly faster target than braking
    if target >= ego_speed + params.speed_accel_margin:
        return ACCELERATE, pid
    if target <= ego_speed - params.speed_decel_margin:
        return DECELERATE, pid
    return NO_ACTION, pid


PLANNERS = {"p1": p1_action, "p2": p2_action, "p3": p3_action}
