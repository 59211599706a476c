"""Deterministic synthetic cutting-department shift data.

Every row draws from its own splitmix64 stream keyed on ``(seed, row_index)``,
so rows are independent of how many rows are requested and can be produced in
any order. The noiseless OEE surface is exposed as :func:`latent_oee` for
oracle tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from datetime import date, timedelta
from typing import NamedTuple, Sequence

from .errors import ConfigError, DomainError
from .oee import FEATURE_NAMES, Dataset, ShiftRecord

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 finaliser."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def stream_seed(seed: int, index: int) -> int:
    return mix64((seed & _MASK64) ^ mix64((index + 1) * _GOLDEN & _MASK64))


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return mix64(self.state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def randint(self, lo: int, hi: int) -> int:
        """Integer in the closed range [lo, hi]."""
        span = hi - lo + 1
        # rejection sampling keeps the draw exactly uniform
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            r = self.next_u64()
            if r < limit:
                return lo + r % span

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        return mean + sd * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class GenConfig:
    seed: int = 42
    n_rows: int = 1917
    n_machines: int = 22
    shift_min: float = 480.0
    noise_sd: float = 3.0
    outlier_fraction: float = 0.02
    orders: tuple[int, int] = (1, 12)
    setup_per_order: tuple[float, float] = (4.0, 22.0)
    maintenance_prob: float = 0.3
    maintenance: tuple[float, float] = (10.0, 90.0)
    wire_length: tuple[float, float] = (150.0, 3500.0)
    terminals_per_order: tuple[int, int] = (0, 2)
    seals_per_order: tuple[int, int] = (0, 2)
    target: tuple[float, float] = (300.0, 6000.0)
    micro_stop_per_terminal: float = 0.6
    base_performance: float = 0.95
    start_date: str = "2019-01-01"

    def __post_init__(self) -> None:
        if self.n_rows < 0:
            raise ConfigError("n_rows must be >= 0")
        if self.n_machines < 1:
            raise ConfigError("n_machines must be >= 1")
        if self.shift_min <= 0:
            raise ConfigError("shift_min must be positive")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if not 0.0 <= self.outlier_fraction <= 0.2:
            raise ConfigError("outlier_fraction must lie in [0, 0.2]")
        if not 0.0 <= self.maintenance_prob <= 1.0:
            raise ConfigError("maintenance_prob must lie in [0, 1]")
        if not 0.0 < self.base_performance <= 1.0:
            raise ConfigError("base_performance must lie in (0, 1]")
        for name in ("orders", "setup_per_order", "maintenance", "wire_length",
                     "terminals_per_order", "seals_per_order", "target"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ConfigError(f"{name} range ({lo}, {hi}) is invalid")
        if self.orders[0] < 1:
            raise ConfigError("at least one order per shift is required")
        if self.wire_length[0] <= 0 or self.target[0] <= 0:
            raise ConfigError("wire length and target ranges must be positive")
        worst = (self.orders[1] * self.setup_per_order[1] + self.maintenance[1]
                 + self.micro_stop_per_terminal * self.orders[1] * self.terminals_per_order[1])
        if worst > self.shift_min:
            raise ConfigError(f"worst-case downtime {worst} min exceeds the shift length")

    def to_text(self) -> str:
        """Serialise as ``key = value`` lines."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> GenConfig:
        defaults = cls()
        kwargs = {}
        for key, text in mapping.items():
            if not hasattr(defaults, key):
                raise ConfigError(f"unknown generator key '{key}'")
            default = getattr(defaults, key)
            try:
                if isinstance(default, tuple):
                    parts = [p.strip() for p in str(text).split(",")]
                    if len(parts) != len(default):
                        raise ValueError("wrong arity")
                    kwargs[key] = tuple(type(d)(float(p)) for d, p in zip(default, parts))
                elif isinstance(default, int):
                    kwargs[key] = int(text)
                elif isinstance(default, float):
                    kwargs[key] = float(text)
                else:
                    kwargs[key] = str(text)
            except ValueError:
                raise ConfigError(f"bad value for generator key '{key}': {text!r}") from None
        return cls(**kwargs)


# Logistic penalty shapes: (feature, max loss fraction, centre, scale).
# Centres and scales are expressed as fractions of the configured range.
_PENALTIES = (
    ("mean_wire_length", 0.30, 0.55, 0.12),
    ("terminals_per_order", 0.25, 0.50, 0.15),
    ("seals_per_order", 0.15, 0.60, 0.15),
    ("target", 0.30, 0.65, 0.10),
)


def _sigmoid(t: float) -> float:
    return 1.0 / (1.0 + math.exp(-t))


def _penalty(value: float, lo: float, hi: float, depth: float, centre: float, scale: float) -> float:
    """Smooth loss fraction that is exactly 0 at ``lo`` and rises towards ``depth``."""
    if hi <= lo:
        return 0.0
    u = (value - lo) / (hi - lo)
    s0 = _sigmoid(-centre / scale)
    s = _sigmoid((u - centre) / scale)
    return depth * (s - s0) / (1.0 - s0)


def _feature_ranges(cfg: GenConfig) -> dict[str, tuple[float, float]]:
    return {
        "mean_wire_length": cfg.wire_length,
        "terminals_per_order": cfg.terminals_per_order,
        "seals_per_order": cfg.seals_per_order,
        "target": cfg.target,
    }


def latent_availability(features: Sequence[float], config: GenConfig = GenConfig()) -> float:
    setups, breakdown, _, _, num_terminals, _, _ = features
    lost = setups + breakdown + config.micro_stop_per_terminal * num_terminals
    return max(0.0, (config.shift_min - lost) / config.shift_min)


def latent_performance(features: Sequence[float], config: GenConfig = GenConfig()) -> float:
    _, _, num_orders, wire_length, num_terminals, num_seals, target = features
    per_order = num_orders if num_orders > 0 else 1.0
    values = {
        "mean_wire_length": wire_length,
        "terminals_per_order": num_terminals / per_order if num_orders > 0 else 0.0,
        "seals_per_order": num_seals / per_order if num_orders > 0 else 0.0,
        "target": target,
    }
    ranges = _feature_ranges(config)
    p = config.base_performance
    for name, depth, centre, scale in _PENALTIES:
        lo, hi = ranges[name]
        p *= 1.0 - _penalty(values[name], lo, hi, depth, centre, scale)
    return p


def latent_oee(features: Sequence[float], config: GenConfig = GenConfig()) -> float:
    """Noise-free OEE (percent) the generator associates with a feature vector."""
    if len(features) != len(FEATURE_NAMES):
        raise DomainError(f"expected {len(FEATURE_NAMES)} features, got {len(features)}")
    setups, breakdown, num_orders, wire_length, num_terminals, num_seals, target = features
    if setups < 0 or breakdown < 0 or setups + breakdown > config.shift_min + 1e-9:
        raise DomainError("setup/breakdown minutes outside the shift")
    if num_orders < 0 or num_terminals < 0 or num_seals < 0:
        raise DomainError("counts must be non-negative")
    lo, hi = config.wire_length
    if not lo <= wire_length <= hi:
        raise DomainError(f"mean wire length {wire_length} outside [{lo}, {hi}]")
    lo, hi = config.target
    if not lo <= target <= hi:
        raise DomainError(f"target {target} outside [{lo}, {hi}]")
    if num_orders > 0:
        if num_terminals > num_orders * config.terminals_per_order[1]:
            raise DomainError("more terminals than the configured per-order maximum")
        if num_seals > num_orders * config.seals_per_order[1]:
            raise DomainError("more seals than the configured per-order maximum")
    return 100.0 * latent_availability(features, config) * latent_performance(features, config)


class RowDraw(NamedTuple):
    features: tuple[float, ...]
    clean_oee: float
    oee: float
    is_outlier: bool


def sample_row(config: GenConfig, index: int) -> RowDraw:
    """Draw row ``index``; ``clean_oee`` is the value before outlier injection."""
    rng = SplitMix64(stream_seed(config.seed, index))
    n_orders = rng.randint(*config.orders)
    setups = 0.0
    lengths = 0.0
    terminals = 0
    seals = 0
    target = 0.0
    for _ in range(n_orders):
        setups += rng.uniform(*config.setup_per_order)
        lengths += rng.uniform(*config.wire_length)
        terminals += rng.randint(*config.terminals_per_order)
        seals += rng.randint(*config.seals_per_order)
    target = rng.uniform(*config.target)
    breakdown = rng.uniform(*config.maintenance) if rng.uniform() < config.maintenance_prob else 0.0

    features = (
        round(setups, 1),
        round(breakdown, 1),
        float(n_orders),
        float(round(lengths / n_orders)),
        float(terminals),
        float(seals),
        float(round(target)),
    )
    latent = latent_oee(features, config)
    noise = rng.normal(0.0, config.noise_sd) if config.noise_sd > 0 else 0.0
    clean = round(min(100.0, max(0.0, latent + noise)), 2)
    outlier = rng.uniform() < config.outlier_fraction
    value = round(rng.uniform(0.0, 100.0), 2) if outlier else clean
    return RowDraw(features, clean, value, outlier)


def generate_records(config: GenConfig) -> list[ShiftRecord]:
    start = date.fromisoformat(config.start_date)
    records = []
    for i in range(config.n_rows):
        draw = sample_row(config, i)
        machine = i % config.n_machines
        slot = i // config.n_machines
        f = draw.features
        records.append(ShiftRecord(
            machine_id=f"M{machine + 1:02d}",
            date=(start + timedelta(days=slot // 3)).isoformat(),
            shift_id=slot % 3 + 1,
            setups_min=f[0],
            breakdown_min=f[1],
            num_orders=int(f[2]),
            mean_wire_length_mm=f[3],
            num_terminals=int(f[4]),
            num_seals=int(f[5]),
            target_rate=f[6],
            oee_percent=draw.oee,
        ))
    return records


def generate(config: GenConfig) -> Dataset:
    records = generate_records(config)
    return Dataset.from_records(records, provenance=f"synth seed={config.seed} rows={config.n_rows}")
