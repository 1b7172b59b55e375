"""Dataclass configs for the simulator, planners and training, plus the
JSON config-file loader used by the CLI."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

KMH_TO_MPS = 1.0 / 3.6


class ConfigError(ValueError):
    """Raised when a config violates its invariants."""


@dataclass
class SimConfig:
    """Traffic world parameters. Speeds are stored in km/h as configured;
    use the *_mps properties inside the simulation."""

    n_lanes: int = 4
    corridors_per_lane: int = 3
    corridor_width: float = 0.7
    range_half: float = 100.0
    n_vehicles: int = 19
    n_adversarial: int = 7
    adversary_lane_change_prob: float = 0.01
    dt: float = 0.016
    speed_min_kmh: float = 20.0
    speed_max_kmh: float = 80.0
    speed_limit_kmh: float = 80.0
    accel: float = 3.0
    decel: float = 4.0
    lane_change_duration: float = 1.0
    safety_gap: float = 2.0
    max_steps: int = 8000
    car_width: float = 2.0
    car_length: float = 4.0
    motorcycle_width: float = 0.6
    motorcycle_length: float = 1.5
    motorcycle_fraction: float = 0.2
    ego_init_speed_kmh: float = 50.0
    seed: int = 0

    @property
    def lane_width(self) -> float:
        return self.corridors_per_lane * self.corridor_width

    @property
    def road_width(self) -> float:
        return self.n_lanes * self.lane_width

    @property
    def speed_min_mps(self) -> float:
        return self.speed_min_kmh * KMH_TO_MPS

    @property
    def speed_max_mps(self) -> float:
        return self.speed_max_kmh * KMH_TO_MPS

    @property
    def speed_limit_mps(self) -> float:
        return self.speed_limit_kmh * KMH_TO_MPS

    @property
    def ego_init_speed_mps(self) -> float:
        return self.ego_init_speed_kmh * KMH_TO_MPS

    def validate(self) -> None:
        if self.n_lanes < 1:
            raise ConfigError("n_lanes must be >= 1")
        if self.n_vehicles < 1:
            raise ConfigError("n_vehicles must be >= 1")
        if self.n_adversarial > self.n_vehicles - 1:
            raise ConfigError("n_adversarial must be <= n_vehicles - 1")
        if self.n_adversarial < 0:
            raise ConfigError("n_adversarial must be >= 0")
        for name in ("adversary_lane_change_prob", "motorcycle_fraction"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.dt <= 0.0:
            raise ConfigError("dt must be > 0")
        if not (self.speed_min_kmh <= self.speed_max_kmh <= self.speed_limit_kmh):
            raise ConfigError("need speed_min <= speed_max <= speed_limit")
        if self.car_width > self.lane_width:
            raise ConfigError("car must fit inside one lane (3 corridors)")
        if self.motorcycle_width > self.corridor_width:
            raise ConfigError("motorcycle must fit inside one corridor")
        if self.lane_change_duration <= 0.0:
            raise ConfigError("lane_change_duration must be > 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.safety_gap < 0.0:
            raise ConfigError("safety_gap must be >= 0")


@dataclass
class PlannerParams:
    """Thresholds shared by the classical planners P1/P2/P3."""

    gap_front_min: float = 6.0
    gap_right_front_min: float = 6.0
    gap_right_back_min: float = 6.0
    pid_kp: float = 0.5
    pid_ki: float = 0.0
    pid_kd: float = 0.1
    accel_deadband: float = 0.5
    horizon: float = 2.0
    risk_grid_dt: float = 0.25
    risk_sigma: float = 5.0
    lane_change_cost: float = 0.2
    lane_gain_bonus: float = 0.5
    speed_preference: float = 0.01
    speed_candidates: int = 23
    speed_accel_margin: float = 1.0
    speed_decel_margin: float = 0.5
    switch_clearance_margin: float = 0.5

    def validate(self) -> None:
        for name in ("gap_front_min", "gap_right_front_min", "gap_right_back_min",
                     "horizon", "risk_grid_dt", "risk_sigma"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be > 0")
        if self.accel_deadband <= 0.0:
            raise ConfigError("accel_deadband must be > 0")
        if self.switch_clearance_margin < 0.0:
            raise ConfigError("switch_clearance_margin must be >= 0")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    gamma: float = 0.99
    target_sync_interval: int = 100
    batch_size: int = 32
    eps_start: float = 0.1
    eps_end: float = 0.02
    eps_decay_steps: int = 2000
    eps_across_episodes: bool = False
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    train_episodes: int = 10000
    learn_start: int = 1000
    replay_capacity: int = 1_000_000
    train_every: int = 1
    grad_clip: float = 10.0

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must be in [0, 1)")
        if self.eps_end > self.eps_start:
            raise ConfigError("eps_end must be <= eps_start")
        if not 0.0 <= self.eps_start <= 1.0:
            raise ConfigError("eps_start must be in [0, 1]")
        for name in ("target_sync_interval", "batch_size", "eps_decay_steps",
                     "learn_start", "replay_capacity", "train_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.lr <= 0.0:
            raise ConfigError("lr must be > 0")


def _from_dict(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**data)


def load_config_file(path: str | Path) -> tuple[SimConfig, TrainConfig, PlannerParams]:
    """Read a JSON config with optional "sim", "train" and "planner" sections;
    missing fields keep their defaults."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    unknown = set(raw) - {"sim", "train", "planner"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sim = _from_dict(SimConfig, raw.get("sim", {}))
    train = _from_dict(TrainConfig, raw.get("train", {}))
    planner = _from_dict(PlannerParams, raw.get("planner", {}))
    sim.validate()
    train.validate()
    planner.validate()
    return sim, train, planner


def dump_config_file(path: str | Path, sim: SimConfig | None = None,
                     train: TrainConfig | None = None,
                     planner: PlannerParams | None = None) -> None:
    payload = {"sim": asdict(sim or SimConfig()),
               "train": asdict(train or TrainConfig()),
               "planner": asdict(planner or PlannerParams())}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
