"""Deterministic multi-lane traffic simulator in the ego frame.

The ego vehicle is pinned at longitudinal position 0; every other vehicle
moves at (v_other - v_ego) * dt per step and wraps at +-range_half by
respawning at the opposite boundary. Lateral positions are measured from
the left road edge. Lane i spans [i * lane_width, (i+1) * lane_width).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig

ACCELERATE = 0
NO_ACTION = 1
DECELERATE = 2
SWITCH_RIGHT = 3
OPTION = 4

PRIMITIVE_ACTIONS = (ACCELERATE, NO_ACTION, DECELERATE, SWITCH_RIGHT)
ACTION_NAMES = ("accelerate", "no_action", "decelerate", "switch_right", "option")

EGO = 0

GRID_COLUMNS = 5
GRID_ROWS = 100
GRID_COLUMN_SPAN = 2    # columns cover ego lane -2 .. +2
GRID_ROW_METERS = 1.0   # row r covers [r - 50, r - 49)

_ROW_LO = np.arange(GRID_ROWS, dtype=np.float64) - GRID_ROWS / 2.0
_ROW_HI = _ROW_LO + GRID_ROW_METERS

_PLACEMENT_TRIES = 200
_RESPAWN_TRIES = 20


class PlacementError(RuntimeError):
    """Raised when the initial scene cannot be placed without conflicts."""


@dataclass
class LaneChange:
    target_lane: int
    progress: float        # 0..1, advances dt / lane_change_duration per step
    start_lateral: float


@dataclass
class VehicleState:
    lane: int
    lateral: float
    y: float
    speed: float           # m/s
    kind: str              # "car" | "motorcycle"
    adversarial: bool
    lane_change: LaneChange | None


@dataclass
class StepEvents:
    reward: float
    done: bool
    collided: bool
    reached_rightmost: bool
    safety_breach: bool
    timed_out: bool


def lane_center(config: SimConfig, lane: int) -> float:
    return (lane + 0.5) * config.lane_width


class SimState:
    """World state held as parallel arrays; index 0 is the ego vehicle."""

    def __init__(self, config: SimConfig, n: int, rng: np.random.Generator):
        self.config = config
        self.lane = np.zeros(n, dtype=np.int64)
        self.lateral = np.zeros(n, dtype=np.float64)
        self.y = np.zeros(n, dtype=np.float64)
        self.speed = np.zeros(n, dtype=np.float64)
        self.is_moto = np.zeros(n, dtype=bool)
        self.adversarial = np.zeros(n, dtype=bool)
        self.lc_active = np.zeros(n, dtype=bool)
        self.lc_target = np.zeros(n, dtype=np.int64)
        self.lc_progress = np.zeros(n, dtype=np.float64)
        self.lc_start = np.zeros(n, dtype=np.float64)
        self.step_count = 0
        self.rng = rng
        self._refresh_sizes()

    def _refresh_sizes(self) -> None:
        # kinds never change after construction (respawns keep them), so
        # footprint sizes are cached once
        c = self.config
        self.width = np.where(self.is_moto, c.motorcycle_width, c.car_width)
        self.length = np.where(self.is_moto, c.motorcycle_length,
                               c.car_length)

    @property
    def n(self) -> int:
        return len(self.lane)

    def vehicle(self, i: int) -> VehicleState:
        lc = None
        if self.lc_active[i]:
            lc = LaneChange(int(self.lc_target[i]), float(self.lc_progress[i]),
                            float(self.lc_start[i]))
        return VehicleState(
            lane=int(self.lane[i]),
            lateral=float(self.lateral[i]),
            y=float(self.y[i]),
            speed=float(self.speed[i]),
            kind="motorcycle" if self.is_moto[i] else "car",
            adversarial=bool(self.adversarial[i]),
            lane_change=lc,
        )

    @property
    def vehicles(self) -> list[VehicleState]:
        return [self.vehicle(i) for i in range(self.n)]

    @classmethod
    def from_vehicles(cls, config: SimConfig, vehicles: list[VehicleState],
                      step_count: int = 0, seed: int = 0) -> "SimState":
        """Build a state from explicit vehicle records (index 0 = ego)."""
        if not vehicles:
            raise ValueError("need at least the ego vehicle")
        if vehicles[0].y != 0.0:
            raise ValueError("ego longitudinal position must be 0 (ego frame)")
        state = cls(config, len(vehicles), np.random.default_rng(seed))
        for i, v in enumerate(vehicles):
            state.lane[i] = v.lane
            state.lateral[i] = v.lateral
            state.y[i] = v.y
            state.speed[i] = v.speed
            state.is_moto[i] = v.kind == "motorcycle"
            state.adversarial[i] = v.adversarial
            if v.lane_change is not None:
                state.lc_active[i] = True
                state.lc_target[i] = v.lane_change.target_lane
                state.lc_progress[i] = v.lane_change.progress
                state.lc_start[i] = v.lane_change.start_lateral
        state.step_count = step_count
        state._refresh_sizes()
        return state


def _conflicts(state: SimState, i: int, lat: float, y: float,
               width: float, length: float) -> bool:
    """Candidate placement for vehicle i vs everyone else: lateral overlap
    with less than safety_gap of longitudinal edge clearance is rejected."""
    others = np.arange(state.n) != i
    ow = state.width[others]
    ol = state.length[others]
    olat = state.lateral[others]
    oy = state.y[others]
    lat_overlap = (np.abs(lat - olat) < (width + ow) / 2.0)
    edge_gap = np.abs(y - oy) - (length + ol) / 2.0
    return bool(np.any(lat_overlap & (edge_gap < state.config.safety_gap)))


def reset(config: SimConfig, seed: int | None = None) -> SimState:
    """Fresh episode. Ego starts in the leftmost lane at ego_init_speed;
    vehicles 1..n_adversarial are the adversaries. Draw order per vehicle:
    kind, then (lane, y, speed) per placement attempt."""
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    state = SimState(config, config.n_vehicles, rng)
    state.lane[EGO] = 0
    state.lateral[EGO] = lane_center(config, 0)
    state.speed[EGO] = config.ego_init_speed_mps
    for i in range(1, config.n_vehicles):
        state.is_moto[i] = rng.random() < config.motorcycle_fraction
        state.adversarial[i] = i <= config.n_adversarial
        w = config.motorcycle_width if state.is_moto[i] else config.car_width
        ln = config.motorcycle_length if state.is_moto[i] else config.car_length
        for attempt in range(_PLACEMENT_TRIES):
            lane = int(rng.integers(0, config.n_lanes))
            y = float(rng.uniform(-config.range_half, config.range_half))
            speed = float(rng.uniform(config.speed_min_mps, config.speed_max_mps))
            lat = lane_center(config, lane)
            # only rows < i are placed yet, so check against that prefix
            if not _conflicts_prefix(state, i, lat, y, w, ln):
                break
        else:
            raise PlacementError(f"could not place vehicle {i}")
        state.lane[i] = lane
        state.lateral[i] = lat
        state.y[i] = y
        state.speed[i] = speed
    state._refresh_sizes()
    return state


def _conflicts_prefix(state: SimState, i: int, lat: float, y: float,
                      width: float, length: float) -> bool:
    # sizes computed locally: the cached arrays are refreshed only after
    # every kind has been drawn
    c = state.config
    ow = np.where(state.is_moto[:i], c.motorcycle_width, c.car_width)
    ol = np.where(state.is_moto[:i], c.motorcycle_length, c.car_length)
    lat_overlap = (np.abs(lat - state.lateral[:i]) < (width + ow) / 2.0)
    edge_gap = np.abs(y - state.y[:i]) - (length + ol) / 2.0
    return bool(np.any(lat_overlap & (edge_gap < c.safety_gap)))


def apply_ego_action(state: SimState, action: int) -> None:
    """Mutate ego speed / start a lane change. SWITCH_RIGHT is a silent
    no-op while a change is in flight or from the rightmost lane; there is
    no safety screen on the ego's own switches."""
    c = state.config
    if action == ACCELERATE:
        state.speed[EGO] = min(state.speed[EGO] + c.accel * c.dt, c.speed_limit_mps)
    elif action == DECELERATE:
        state.speed[EGO] = max(state.speed[EGO] - c.decel * c.dt, 0.0)
    elif action == SWITCH_RIGHT:
        if not state.lc_active[EGO] and state.lane[EGO] < c.n_lanes - 1:
            state.lc_active[EGO] = True
            state.lc_target[EGO] = state.lane[EGO] + 1
            state.lc_progress[EGO] = 0.0
            state.lc_start[EGO] = state.lateral[EGO]
    elif action != NO_ACTION:
        raise ValueError(f"not a primitive action: {action}")


def _adversary_triggers(state: SimState) -> None:
    """Bernoulli draws for every adversary not already mid-change, in
    vehicle index order; a triggered vehicle picks uniformly among its
    existing adjacent lanes."""
    c = state.config
    eligible = np.flatnonzero(state.adversarial & ~state.lc_active)
    if eligible.size == 0:
        return
    u = state.rng.random(eligible.size)
    triggered = eligible[u < c.adversary_lane_change_prob]
    for i in triggered:
        lane = int(state.lane[i])
        candidates = [t for t in (lane - 1, lane + 1) if 0 <= t < c.n_lanes]
        if not candidates:
            continue
        target = candidates[0] if len(candidates) == 1 else \
            candidates[int(state.rng.integers(0, 2))]
        state.lc_active[i] = True
        state.lc_target[i] = target
        state.lc_progress[i] = 0.0
        state.lc_start[i] = state.lateral[i]


def _advance_lane_changes(state: SimState) -> None:
    c = state.config
    active = np.flatnonzero(state.lc_active)
    if active.size == 0:
        return
    state.lc_progress[active] += c.dt / c.lane_change_duration
    for i in active:
        target_lat = lane_center(c, int(state.lc_target[i]))
        if state.lc_progress[i] >= 1.0:
            state.lane[i] = state.lc_target[i]
            state.lateral[i] = target_lat
            state.lc_active[i] = False
        else:
            p = state.lc_progress[i]
            state.lateral[i] = state.lc_start[i] + p * (target_lat - state.lc_start[i])


def _advance_longitudinal(state: SimState) -> None:
    # ego stays pinned at 0; relative motion uses the post-action ego speed
    c = state.config
    state.y[1:] += (state.speed[1:] - state.speed[EGO]) * c.dt


def _respawn(state: SimState) -> None:
    c = state.config
    escaped = np.flatnonzero(np.abs(state.y) > c.range_half)
    for i in escaped:
        new_y = -c.range_half if state.y[i] > 0 else c.range_half
        w = float(state.width[i])
        ln = float(state.length[i])
        lane = int(state.rng.integers(0, c.n_lanes))
        speed = float(state.rng.uniform(c.speed_min_mps, c.speed_max_mps))
        for attempt in range(_RESPAWN_TRIES):
            if not _conflicts(state, i, lane_center(c, lane), new_y, w, ln):
                break
            lane = int(state.rng.integers(0, c.n_lanes))
            speed = float(state.rng.uniform(c.speed_min_mps, c.speed_max_mps))
        # a still-conflicting draw after the retry budget is placed as-is;
        # overlap between non-ego vehicles carries no event
        state.lane[i] = lane
        state.lateral[i] = lane_center(c, lane)
        state.y[i] = new_y
        state.speed[i] = speed
        state.lc_active[i] = False


def _ego_proximity(state: SimState) -> tuple[bool, bool]:
    """(collided, breach) in one pass. Overlap is strict on both axes;
    touching edges neither collide nor breach from the collision side, and
    an edge gap of exactly safety_gap is already clear."""
    c = state.config
    w = state.width
    ln = state.length
    dx = np.abs(state.lateral[1:] - state.lateral[EGO])
    dy = np.abs(state.y[1:] - state.y[EGO])
    lat = dx < (w[1:] + w[EGO]) / 2.0
    edge_gap = dy - (ln[1:] + ln[EGO]) / 2.0
    collided = bool(np.any(lat & (edge_gap < 0.0)))
    breach = bool(np.any(lat & (edge_gap >= 0.0) & (edge_gap < c.safety_gap)))
    return collided, breach


def detect_collision(state: SimState) -> bool:
    """Strict-inequality rectangle overlap between the ego and anyone else.
    Touching edges do not collide."""
    return _ego_proximity(state)[0]


def detect_safety_breach(state: SimState) -> bool:
    """Laterally overlapping vehicle with under safety_gap of longitudinal
    edge clearance, excluding outright collisions with that vehicle."""
    return _ego_proximity(state)[1]


def _evaluate_events(state: SimState) -> StepEvents:
    c = state.config
    collided, any_breach = _ego_proximity(state)
    reached = (not collided
               and state.lane[EGO] == c.n_lanes - 1
               and not state.lc_active[EGO])
    breach = not collided and not reached and any_breach
    timed_out = (not collided and not reached and not breach
                 and state.step_count >= c.max_steps)
    if collided:
        reward = -10.0
    elif reached:
        reward = 10.0
    elif breach:
        reward = -1.0
    elif timed_out:
        reward = -10.0
    else:
        reward = -0.001
    done = collided or reached or breach or timed_out
    return StepEvents(reward=reward, done=done, collided=collided,
                      reached_rightmost=reached, safety_breach=breach,
                      timed_out=timed_out)


def step(state: SimState, action: int) -> StepEvents:
    """Advance one tick: ego action, adversary triggers, lane-change and
    longitudinal motion, boundary respawns, then event evaluation. Exactly
    one event flag is set on terminal steps; the reward follows the flag."""
    if action not in PRIMITIVE_ACTIONS:
        raise ValueError(f"not a primitive action: {action}")
    state.step_count += 1
    apply_ego_action(state, action)
    _adversary_triggers(state)
    _advance_lane_changes(state)
    _advance_longitudinal(state)
    _respawn(state)
    return _evaluate_events(state)


def observe(state: SimState) -> np.ndarray:
    """Occupancy grid, shape (5, 100) float32. grid[c, r] covers the lane
    ego_lane - 2 + c over longitudinal meters [r - 50, r - 49). Cells hold
    speed / speed_limit of the overlapping vehicle (max wins when several
    overlap, the ego included), 0.0 when free, -1.0 when the column lies
    off the road. Overlap uses the same strict inequalities as collision."""
    c = state.config
    grid = np.zeros((GRID_COLUMNS, GRID_ROWS), dtype=np.float32)
    ego_lane = int(state.lane[EGO])
    w = state.width
    ln = state.length
    vals = (state.speed / c.speed_limit_mps).astype(np.float32)
    # strict overlap with row r = [r - 50, r - 49): searchsorted against the
    # exact boundary values, no float arithmetic on the edges
    r0 = np.searchsorted(_ROW_HI, state.y - ln / 2.0, side="right")
    r1 = np.searchsorted(_ROW_LO, state.y + ln / 2.0, side="left") - 1
    lat0 = state.lateral - w / 2.0
    lat1 = state.lateral + w / 2.0
    visible = r0 <= r1
    for col in range(GRID_COLUMNS):
        lane_idx = ego_lane - GRID_COLUMN_SPAN + col
        if lane_idx < 0 or lane_idx >= c.n_lanes:
            grid[col, :] = -1.0
            continue
        lane_lo = lane_idx * c.lane_width
        members = np.flatnonzero(
            visible & (lat0 < lane_lo + c.lane_width) & (lane_lo < lat1))
        for i in members:
            seg = grid[col, r0[i]:r1[i] + 1]
            np.maximum(seg, vals[i], out=seg)
    return grid


def observe_flat(state: SimState) -> np.ndarray:
    """Grid flattened C-order to shape (500,): column 0 rows 0..99 first."""
    return observe(state).reshape(-1)
