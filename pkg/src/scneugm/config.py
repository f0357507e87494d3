"""Configuration records and JSON loading.

Every record is a frozen dataclass whose field names double as the JSON keys.
Unknown keys and wrongly typed values raise :class:`ConfigError` carrying the
dotted path of the offending field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_type_hints

DEFAULT_MCS_SE_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0)


class ConfigError(ValueError):
    """Malformed configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class RadioConfig:
    area_side: float = 100.0  # m
    num_aps: int = 100
    num_stas: int = 100
    slot_len: float = 500.0  # us
    bandwidth: float = 2.0e7  # Hz
    carrier: float = 5800.0  # MHz
    tx_power: float = 0.0  # dBm
    noise_floor: float = -96.0  # dBm, noise power over the whole band
    sensitivity_floor: float = -95.0  # dBm
    packet_bits: int = 800
    eps_max: float = 1e-5
    reliability_target: float = 0.99
    backoff_slot: float = 9.0  # us
    cw: int = 16
    max_retries: int = 4
    # per-attempt channel occupancy on top of the data symbols, us
    preamble: float = 16.0
    ack_airtime: float = 30.0  # SIFS + short ACK
    difs: float = 18.0
    mcs_se_grid: tuple[float, ...] = DEFAULT_MCS_SE_GRID

    def __post_init__(self):
        object.__setattr__(self, "mcs_se_grid", tuple(float(v) for v in self.mcs_se_grid))
        for name in ("area_side", "slot_len", "bandwidth", "carrier", "tx_power",
                     "noise_floor", "sensitivity_floor", "backoff_slot", "preamble",
                     "ack_airtime", "difs"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"radio.{name}", "must be finite")
        if self.slot_len <= 0:
            raise ConfigError("radio.slot_len", "must be positive")
        if self.num_stas < 1:
            raise ConfigError("radio.num_stas", "must be >= 1")
        side = math.isqrt(self.num_aps)
        if self.num_aps < 1 or side * side != self.num_aps:
            raise ConfigError("radio.num_aps", "must be a positive perfect square")
        grid = self.mcs_se_grid
        if not grid or grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("radio.mcs_se_grid", "must be positive and strictly increasing")
        if self.cw < 1:
            raise ConfigError("radio.cw", "must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("radio.max_retries", "must be >= 0")
        if not 0 < self.reliability_target <= 1:
            raise ConfigError("radio.reliability_target", "must lie in (0, 1]")

    @property
    def exchange_overhead(self) -> float:
        """Airtime (us) of one attempt beyond its data symbols."""
        return self.preamble + self.ack_airtime + self.difs

    @property
    def s_max(self) -> float:
        """Largest detectable path loss in dB."""
        return self.tx_power - self.sensitivity_floor

    def with_stas(self, num_stas: int) -> "RadioConfig":
        return dataclasses.replace(self, num_stas=num_stas)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    lr: float = 1e-3
    num_stas: int = 100
    # deep-hash only
    corr_weight: float = 0.2
    # pair-predictors only: negatives kept per positive (None keeps every pair)
    neg_ratio: float | None = 1.0
    divergence_factor: float = 10.0


@dataclass(frozen=True)
class EsConfig:
    lr: float = 0.1
    init_var: float = 0.1
    batch_increment: int = 50
    hit_threshold: float = 0.9
    hit_smoothing: float = 0.9
    baseline_decay: float = 0.99
    k_start: int = 20
    k_total: int = 100
    query_bits: int = 4
    max_steps: int = 3000
    periods: int = 200
    # "adaptive" grows by batch_increment on hits, "linear" by one every step,
    # "fixed" never grows (and never terminates early)
    schedule: str = "adaptive"
    # policy-gradient baseline only
    pg_lr: float = 1e-2


@dataclass(frozen=True)
class OnlineConfig:
    rounds: int = 10
    history: int = 20
    query_bits: int = 7
    tables: int = 20
    mobility: bool = False
    max_speed: float = 5.0  # m/s
    periods_per_round: int = 200
    # "bucketed" (hash + bucket), "all" (every ordered pair)
    pairs: str = "bucketed"
    # virtual time charged per round: "measured" wall clock, "fixed" dt, or
    # "pairs" = ms_base + ms_per_pair * processed pairs
    time_model: str = "pairs"
    fixed_dt_ms: float = 100.0
    ms_base: float = 20.0
    ms_per_pair: float = 0.003


@dataclass(frozen=True)
class StageConfigs:
    embed: TrainConfig = field(default_factory=lambda: TrainConfig(lr=0.1))
    predictors: TrainConfig = field(default_factory=lambda: TrainConfig(lr=1.0, neg_ratio=None))
    dhf: TrainConfig = field(default_factory=lambda: TrainConfig(steps=10000, lr=1.0))
    es: EsConfig = field(default_factory=EsConfig)
    pg: EsConfig = field(default_factory=lambda: EsConfig(schedule="fixed", max_steps=600))


@dataclass(frozen=True)
class ExperimentConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    train: StageConfigs = field(default_factory=StageConfigs)
    online: OnlineConfig = field(default_factory=OnlineConfig)
    output_dir: str | None = None
    seed: int = 0
    eval_topologies: int = 5
    mobile_speeds: tuple[float, ...] = (0.0, 1.0, 3.0, 5.0)
    dhf_grid_bits: tuple[int, ...] = tuple(range(1, 16))
    dhf_grid_tables: tuple[int, ...] = (1, 5, 10, 20, 30)
    dhf_grid_seeds: int = 20
    # round-time profile of bucketed vs all-pairs rounds on one larger network
    timing_stas: int = 500
    timing_rounds: int = 3

    def digest(self, *sections: str) -> str:
        """Short content hash over the named top-level sections (all if none)."""
        data = to_dict(self)
        data.pop("output_dir", None)
        if sections:
            data = {k: data[k] for k in sections}
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def to_dict(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [to_dict(v) for v in obj]
    return obj


def _coerce(tp: Any, value: Any, path: str) -> Any:
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected an object, got {type(value).__name__}")
        return from_dict(tp, value, path)
    origin, args = typing.get_origin(tp), typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(inner, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")
        return tuple(_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str and not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    return value


def from_dict(cls: type, data: dict, path: str = "") -> Any:
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(sub, "unknown field")
        kwargs[key] = _coerce(hints[key], value, sub)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(path or cls.__name__, str(exc)) from exc


def load_radio_config(path: str | Path) -> RadioConfig:
    with open(path) as fh:
        return from_dict(RadioConfig, json.load(fh), "radio")


def load_experiment_config(path: str | Path | None, overrides: list[str] = ()) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(str(path), f"not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(str(path), "top level must be a JSON object")
    for item in overrides:
        apply_override(data, item)
    return from_dict(ExperimentConfig, data)


def apply_override(data: dict, item: str) -> None:
    """Apply one ``dotted.key=value`` override; value parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot descend into a scalar")
    node[parts[-1]] = value
