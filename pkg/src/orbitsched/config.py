"""Run configuration for simulations and benchmarks."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .orbit import PRESETS
from .scenarios import ACCELERATORS, SCENARIOS

VARIANTS = ("baseline", "earthsight-st", "earthsight-mt")


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class PowerConfig:
    solar_w: float = 7.0  # while sunlit
    adacs_w: float = 1.5
    camera_w: float = 0.8  # imaging continuously
    receiver_w: float = 0.4  # while any station is in view
    transmitter_w: float = 4.0  # while transmitting
    battery_wh: float = 20.0
    initial_fraction: float = 0.70
    target_fraction: float = 0.70
    compute_reserve: float = 0.15  # compute pauses below this state of charge
    transmit_reserve: float = 0.05


@dataclass
class TimingConfig:
    select_time: float = 0.02
    load_time: float = 0.05
    comm_overhead: float = 0.01
    prefetch_hit_prob: float = 0.9


@dataclass
class RunConfig:
    scenario: str = "urban"
    variant: str = "earthsight-mt"
    accelerator: str = "tpu"
    constellation: str = "desk"
    hours: float = 6.0
    seed: int = 0
    scenario_seed: int = 0
    dt: float = 1.0

    # workload and links
    capture_rate: float = 0.75  # images / s / satellite
    image_size: int = 50_000  # bytes
    bandwidth: float = 200_000.0  # bytes / s per station link
    min_elevation: float = 10.0

    # ablation toggles (only meaningful for earthsight variants)
    filter_ordering: bool = True
    ground_scheduler: bool = True
    dynamic_threshold: bool = True
    static_alpha: float = 0.5  # used when the dynamic threshold is off

    alpha0: float = 0.9
    beta: float = 0.01
    lambda1: float = 0.05
    lambda2: float = 0.10
    alpha_update_period: float = 60.0  # s; 0 updates after every prioritized image
    lookahead_hours: float = 6.0
    stats_updates: bool = True
    accuracy: float | None = None  # sets tpr=acc, fpr=1-acc on every filter

    power: PowerConfig = field(default_factory=PowerConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)

    def validate(self) -> "RunConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"unknown scenario {self.scenario!r}; choose from {list(SCENARIOS)}")
        if self.variant not in VARIANTS:
            raise ConfigError("variant", f"unknown variant {self.variant!r}; choose from {list(VARIANTS)}")
        if self.accelerator not in ACCELERATORS:
            raise ConfigError("accelerator", f"unknown accelerator {self.accelerator!r}")
        if self.constellation not in PRESETS:
            raise ConfigError("constellation", f"unknown preset {self.constellation!r}")
        if not self.hours > 0:
            raise ConfigError("hours", "must be positive")
        if not self.dt > 0:
            raise ConfigError("dt", "must be positive")
        if self.capture_rate < 0:
            raise ConfigError("capture_rate", "must be non-negative")
        if self.image_size <= 0:
            raise ConfigError("image_size", "must be positive")
        if self.bandwidth < 0:
            raise ConfigError("bandwidth", "must be non-negative")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError("beta", "must be in [0, 1)")
        for name in ("alpha0", "static_alpha"):
            v = getattr(self, name)
            if not self.beta < v <= 1.0:
                raise ConfigError(name, f"must be in (beta, 1], got {v}")
        if self.accuracy is not None and not 0.5 < self.accuracy <= 1.0:
            raise ConfigError("accuracy", "must be in (0.5, 1]")
        if self.variant == "baseline" and not (self.filter_ordering and self.ground_scheduler and self.dynamic_threshold):
            raise ConfigError("variant", "ablation toggles only apply to earthsight variants")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        power = _nested(PowerConfig, "power", d.pop("power", None))
        timing = _nested(TimingConfig, "timing", d.pop("timing", None))
        cfg = cls(power=power, timing=timing, **d)
        _check_types(cfg, "")
        return cfg

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _nested(cls, prefix: str, d):
    if d is None:
        return cls()
    if isinstance(d, cls):
        return d
    if not isinstance(d, dict):
        raise ConfigError(prefix, "expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{prefix}.{sorted(unknown)[0]}", "unknown configuration field")
    obj = cls(**d)
    _check_types(obj, prefix + ".")
    return obj


def _check_types(obj, prefix: str) -> None:
    """Reject values whose type does not match the field default."""
    for f in dataclasses.fields(obj):
        if f.name in ("power", "timing"):
            continue
        v = getattr(obj, f.name)
        default = f.default
        if default is dataclasses.MISSING:
            continue
        name = prefix + f.name
        if f.name == "accuracy":
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ConfigError(name, f"expected a number or null, got {v!r}")
        elif isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(name, f"expected true/false, got {v!r}")
        elif isinstance(default, (int, float)):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(name, f"expected a number, got {v!r}")
            if isinstance(default, int) and not isinstance(default, bool) and f.name in ("seed", "scenario_seed", "image_size") and int(v) != v:
                raise ConfigError(name, f"expected an integer, got {v!r}")
        elif isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(name, f"expected a string, got {v!r}")
