"""OEE arithmetic, shift-level domain types and CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DomainError, SchemaError

DEFAULT_SHIFT_MIN = 480.0

FEATURE_NAMES: tuple[str, ...] = (
    "setups",
    "breakdown",
    "num_orders",
    "mean_wire_length",
    "num_terminals",
    "num_seals",
    "target",
)
TARGET_NAME = "oee"
# identifier columns tolerated in input files and dropped on ingest
ID_COLUMNS = ("machine_id", "date", "shift_id")


@dataclass(frozen=True)
class OeeComponents:
    availability: float
    performance: float
    quality: float

    def __post_init__(self) -> None:
        for name in ("availability", "performance", "quality"):
            _check_ratio(name, getattr(self, name))


@dataclass(frozen=True)
class ShiftRecord:
    """One machine-shift observation.

    ``target`` is the planned output quantity for the shift; ``oee_percent``
    is the label the learners predict.
    """

    machine_id: str
    date: str
    shift_id: int
    setups_min: float
    breakdown_min: float
    num_orders: int
    mean_wire_length_mm: float
    num_terminals: int
    num_seals: int
    target_rate: float
    oee_percent: float

    def __post_init__(self) -> None:
        self.validate()

    def validate(self, shift_min: float = DEFAULT_SHIFT_MIN) -> None:
        if not 0.0 <= self.oee_percent <= 100.0:
            raise DomainError(f"oee_percent {self.oee_percent} outside [0, 100]")
        if self.setups_min < 0 or self.breakdown_min < 0:
            raise DomainError("setup and breakdown minutes must be non-negative")
        if self.setups_min + self.breakdown_min > shift_min + 1e-9:
            raise DomainError(
                f"setups + breakdown = {self.setups_min + self.breakdown_min} "
                f"exceeds shift length {shift_min}"
            )
        for name in ("num_orders", "num_terminals", "num_seals", "shift_id"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DomainError(f"{name} must be a non-negative integer, got {value}")
        if self.mean_wire_length_mm <= 0:
            raise DomainError("mean_wire_length_mm must be positive")
        if self.target_rate <= 0:
            raise DomainError("target_rate must be positive")

    def features(self) -> list[float]:
        return [
            float(self.setups_min),
            float(self.breakdown_min),
            float(self.num_orders),
            float(self.mean_wire_length_mm),
            float(self.num_terminals),
            float(self.num_seals),
            float(self.target_rate),
        ]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-named numeric table: ``rows`` is (n, p), ``target`` is (n,)."""

    feature_names: tuple[str, ...]
    rows: np.ndarray
    target: np.ndarray
    provenance: str = ""

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(self.feature_names))
        target = np.asarray(self.target, dtype=float).reshape(-1)
        if rows.ndim != 2 or rows.shape[1] != len(self.feature_names):
            raise SchemaError(
                f"row width {rows.shape[-1] if rows.ndim else 0} does not match "
                f"{len(self.feature_names)} feature names"
            )
        if target.shape[0] != rows.shape[0]:
            raise SchemaError(f"{target.shape[0]} targets for {rows.shape[0]} rows")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "target", target)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def subset(self, indices: Sequence[int] | np.ndarray, provenance: str | None = None) -> Dataset:
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            self.feature_names,
            self.rows[idx],
            self.target[idx],
            self.provenance if provenance is None else provenance,
        )

    def allclose(self, other: Dataset, tol: float = 1e-6) -> bool:
        return (
            self.feature_names == other.feature_names
            and self.rows.shape == other.rows.shape
            and bool(np.all(np.abs(self.rows - other.rows) <= tol))
            and bool(np.all(np.abs(self.target - other.target) <= tol))
        )

    @classmethod
    def from_records(cls, records: Iterable[ShiftRecord], provenance: str = "") -> Dataset:
        records = list(records)
        rows = np.array([r.features() for r in records], dtype=float).reshape(
            len(records), len(FEATURE_NAMES)
        )
        target = np.array([r.oee_percent for r in records], dtype=float)
        return cls(FEATURE_NAMES, rows, target, provenance)


def _check_ratio(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name} = {value} outside [0, 1]")


def availability(planned_min: float, unplanned_downtime_min: float) -> float:
    """Share of planned production time not lost to downtime."""
    if not planned_min > 0:
        raise DomainError(f"planned time must be positive, got {planned_min}")
    if unplanned_downtime_min < 0 or unplanned_downtime_min > planned_min:
        raise DomainError(
            f"downtime {unplanned_downtime_min} outside [0, {planned_min}]"
        )
    return (planned_min - unplanned_downtime_min) / planned_min


def performance(actual_qty: float, planned_qty: float) -> float:
    """Actual over planned quantity; over-production is clamped to 1."""
    if not planned_qty > 0:
        raise DomainError(f"planned quantity must be positive, got {planned_qty}")
    if actual_qty < 0:
        raise DomainError(f"actual quantity must be non-negative, got {actual_qty}")
    return min(1.0, actual_qty / planned_qty)


def quality(actual_qty: float, rejected_qty: float) -> float:
    if not actual_qty > 0:
        raise DomainError(f"actual quantity must be positive, got {actual_qty}")
    if rejected_qty < 0 or rejected_qty > actual_qty:
        raise DomainError(f"rejected quantity {rejected_qty} outside [0, {actual_qty}]")
    return (actual_qty - rejected_qty) / actual_qty


def oee(c: OeeComponents) -> float:
    """OEE in percent: availability x performance x quality x 100."""
    _check_ratio("availability", c.availability)
    _check_ratio("performance", c.performance)
    _check_ratio("quality", c.quality)
    return 100.0 * c.availability * c.performance * c.quality


def format_float(value: float) -> str:
    if math.isnan(value) or math.isinf(value):
        raise DataError(f"cannot serialise non-finite value {value}")
    text = f"{value:.6g}"
    return "0" if text == "-0" else text


def read_csv(path: str | Path, require_target: bool = True) -> Dataset:
    """Load a shift-level CSV into a :class:`Dataset`.

    Identifier columns (``machine_id``, ``date``, ``shift_id``) are dropped.
    Malformed cells are reported with their 1-based line and column name.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None

    with handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row missing") from None

        wanted = list(FEATURE_NAMES) + ([TARGET_NAME] if require_target else [])
        for name in wanted:
            if name not in header:
                raise SchemaError(f"{path}: missing column '{name}'")
        for name in header:
            if name not in FEATURE_NAMES and name != TARGET_NAME and name not in ID_COLUMNS:
                raise SchemaError(f"{path}: unknown column '{name}'")
        positions = [header.index(name) for name in FEATURE_NAMES]
        target_pos = header.index(TARGET_NAME) if TARGET_NAME in header else None

        rows: list[list[float]] = []
        target: list[float] = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} cells, found {len(cells)}"
                )
            row = []
            for pos in positions:
                row.append(_parse_cell(path, lineno, header[pos], cells[pos]))
            rows.append(row)
            if target_pos is not None:
                target.append(_parse_cell(path, lineno, TARGET_NAME, cells[target_pos]))
            else:
                target.append(math.nan)

    return Dataset(FEATURE_NAMES, np.array(rows, dtype=float), np.array(target), str(path))


def _parse_cell(path: Path, lineno: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column '{column}': non-numeric cell {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}:{lineno}: column '{column}': non-finite cell {text!r}")
    return value


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write header plus one line per row, floats at 6 significant digits."""
    path = Path(path)
    header = list(dataset.feature_names) + [TARGET_NAME]
    lines = [",".join(header)]
    for row, y in zip(dataset.rows, dataset.target):
        lines.append(",".join(format_float(v) for v in row) + "," + format_float(y))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None
