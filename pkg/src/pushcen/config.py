"""Experiment configuration: defaults, JSON round-trip, config hash.

One nested dataclass tree holds every knob. ``resolve()`` applies the
method- and ablation-implied overrides (e.g. the uniform-averaging
baseline forces compression off and the proximal weight to zero) and
returns the config the engine actually runs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .data import ConfigError, DataSpec
from .trainer import TrainerConfig

METHODS = ("pushcen", "async-dfedavg", "independent")


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "random-gossip"  # random-gossip | fixed-directed | ring
    fanout: int = 10
    chords: int = 2  # extra edges for fixed-directed (ring + chords)

    def __post_init__(self):
        if self.kind not in ("random-gossip", "fixed-directed", "ring"):
            raise ConfigError(f"unknown topology kind {self.kind!r}")
        if self.fanout < 0:
            raise ConfigError("fanout must be >= 0")


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "poisson"  # poisson | round-robin
    events: int = 10000  # total-event budget; sets the pseudo-time horizon
    base_rate: float = 1.0  # activations per client per unit pseudo-time
    rate_spread: tuple[float, float] = (0.5, 2.0)  # log-uniform per-client factor
    delay_mean_fraction: float = 0.1  # delivery delay mean, in activation intervals
    eval_intervals: int = 60
    delayed_fraction: float = 0.10
    staleness_cap: int | None = None  # enforce max staleness when set

    def __post_init__(self):
        if self.kind not in ("poisson", "round-robin"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.events < 1 or self.eval_intervals < 1:
            raise ConfigError("events and eval_intervals must be positive")
        if not 0 <= self.delayed_fraction < 1:
            raise ConfigError("delayed fraction must lie in [0, 1)")


@dataclass
class ExperimentConfig:
    method: str = "pushcen"
    seed: int = 0
    model: str = "mlp"  # logistic | mlp | quadratic
    hidden: int = 64
    data: DataSpec = field(default_factory=DataSpec)
    topology: TopologySpec = field(default_factory=TopologySpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    buffer_limit: int = 16
    buffer_dedup: bool = True
    compress: bool = True
    train: bool = True
    raw_value_bits: int = 32  # transmit precision when compression is off
    no_reg: bool = False  # ablation: drop the centroid regularizer
    no_buffer: bool = False  # ablation: dedup off, unbounded FIFO
    record_consensus: bool = False  # per-activation ledger trace (diagnostics)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")

    def resolve(self) -> "ExperimentConfig":
        """Apply method/ablation overrides; the result is what actually runs."""
        cfg = copy_config(self)
        if cfg.no_reg:
            cfg.trainer.lam = 0.0
        if cfg.no_buffer:
            cfg.buffer_dedup = False
            cfg.buffer_limit = 0
        if cfg.method == "async-dfedavg":
            cfg.compress = False
            cfg.trainer.lam = 0.0
            cfg.buffer_dedup = False
            cfg.buffer_limit = 0
        elif cfg.method == "independent":
            cfg.compress = False
            cfg.trainer.lam = 0.0
            cfg.topology = dataclasses.replace(cfg.topology, fanout=0)
        if not cfg.compress and cfg.trainer.lam > 0:
            raise ConfigError("centroid regularization requires compression on")
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "data" in d:
            d["data"] = DataSpec(**d["data"])
        if "topology" in d:
            d["topology"] = TopologySpec(**d["topology"])
        if "schedule" in d:
            sched = dict(d["schedule"])
            if isinstance(sched.get("rate_spread"), list):
                sched["rate_spread"] = tuple(sched["rate_spread"])
            d["schedule"] = ScheduleSpec(**sched)
        if "trainer" in d:
            d["trainer"] = TrainerConfig(**d["trainer"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def copy_config(cfg: ExperimentConfig) -> ExperimentConfig:
    return ExperimentConfig.from_dict(cfg.to_dict())
