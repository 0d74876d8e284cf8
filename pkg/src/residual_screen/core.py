"""Shared domain types for the residual screening pipeline.

Everything here is immutable after construction and safe to hand to
concurrent workers. Calendar arithmetic uses plain ``datetime.date``
(naive UTC days, no timezone shifting): the source files carry
local-naive timestamps and the daily grouping takes them at face value.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from fractions import Fraction


class PipelineError(Exception):
    """Base class for failures raised by this package."""


class DataError(PipelineError):
    """Input data violates a documented file or record contract."""


class ConfigError(PipelineError):
    """Run configuration is unusable (missing paths, bad thresholds, bad period)."""


class MeterKind(Enum):
    """The four utility meter streams present in the source data.

    The integer value doubles as the meter code used in the actuals and
    row-id-map CSV files.
    """

    ELECTRICITY = 0
    CHILLED_WATER = 1
    STEAM = 2
    HOT_WATER = 3

    @property
    def code(self) -> int:
        return self.value

    @property
    def label(self) -> str:
        """Lowercase name used in artifact CSVs and output file names."""
        return _KIND_LABELS[self]

    @classmethod
    def from_code(cls, code) -> "MeterKind":
        try:
            return cls(int(code))
        except (ValueError, TypeError):
            raise DataError(f"unknown meter code {code!r}") from None

    @classmethod
    def parse(cls, text: str) -> "MeterKind":
        """Parse a meter column value: either a code (0-3) or a label."""
        key = str(text).strip().lower()
        if key in _LABEL_TO_KIND:
            return _LABEL_TO_KIND[key]
        if key.isdigit():
            return cls.from_code(key)
        raise DataError(f"unknown meter kind {text!r}")


_KIND_LABELS = {
    MeterKind.ELECTRICITY: "electricity",
    MeterKind.CHILLED_WATER: "chilledwater",
    MeterKind.STEAM: "steam",
    MeterKind.HOT_WATER: "hotwater",
}
_LABEL_TO_KIND = {label: kind for kind, label in _KIND_LABELS.items()}


@dataclass(frozen=True)
class BuildingRef:
    """Identity and metadata of one building.

    ``building_id`` is unique within a dataset; ``site_id`` groups
    buildings into campuses; ``primary_use`` is a free-text category
    string kept verbatim from the metadata file.
    """

    building_id: int
    site_id: int
    primary_use: str


def day_span(start: date, end: date) -> list[date]:
    """Inclusive sequence of consecutive days from ``start`` to ``end``.

    Raises ValueError if ``start`` is after ``end``.
    """
    if start > end:
        raise ValueError(f"invalid day range: {start} > {end}")
    n = (end - start).days + 1
    return [start + timedelta(days=i) for i in range(n)]


def _as_fraction(value) -> Fraction:
    # Strings like "1/3" or "0.1" convert exactly; floats convert to their
    # exact binary value, which is documented but usually not what callers
    # want at a threshold boundary.
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (str, int, float)):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot interpret {value!r} as a fraction") from None
    raise ConfigError(f"cannot interpret {value!r} as a fraction")


@dataclass(frozen=True)
class AnalysisConfig:
    """Thresholds and window parameters for the error taxonomy.

    The defaults are the published values: scaled-error bands split at
    0.1 and 0.3, site reach at one third of buildings, a 30-day
    modulation window requiring a 0.1 short-term proportion, and run
    length cutoffs of 1 / 2-3 / 4+ days for short, medium, and long
    errors. The two fraction thresholds are stored as exact rationals so
    boundary cases like 2-of-6 buildings behave identically everywhere.
    """

    good_fit_max: float = 0.1
    out_of_range_min: float = 0.3
    reach_fraction: Fraction = Fraction(1, 3)
    window_days: int = 30
    short_term_fraction: Fraction = Fraction(1, 10)
    long_run_min_days: int = 4
    medium_run_max_days: int = 3

    def __post_init__(self):
        object.__setattr__(self, "reach_fraction", _as_fraction(self.reach_fraction))
        object.__setattr__(
            self, "short_term_fraction", _as_fraction(self.short_term_fraction)
        )
        if not 0 < self.good_fit_max < self.out_of_range_min:
            raise ConfigError(
                "thresholds must satisfy 0 < good_fit_max < out_of_range_min, "
                f"got {self.good_fit_max} and {self.out_of_range_min}"
            )
        if not 0 < self.reach_fraction <= 1:
            raise ConfigError(f"reach_fraction must be in (0, 1], got {self.reach_fraction}")
        if self.window_days < 1:
            raise ConfigError(f"window_days must be >= 1, got {self.window_days}")
        if not 0 < self.short_term_fraction <= 1:
            raise ConfigError(
                f"short_term_fraction must be in (0, 1], got {self.short_term_fraction}"
            )
        if self.long_run_min_days != self.medium_run_max_days + 1:
            raise ConfigError(
                "long_run_min_days must equal medium_run_max_days + 1, got "
                f"{self.long_run_min_days} and {self.medium_run_max_days}"
            )

    def to_dict(self) -> dict:
        """JSON-safe echo of the config (fractions as "num/den" strings)."""
        return {
            "good_fit_max": self.good_fit_max,
            "out_of_range_min": self.out_of_range_min,
            "reach_fraction": str(self.reach_fraction),
            "window_days": self.window_days,
            "short_term_fraction": str(self.short_term_fraction),
            "long_run_min_days": self.long_run_min_days,
            "medium_run_max_days": self.medium_run_max_days,
        }


class MagnitudeBand(Enum):
    """Scaled-error band of one building-day."""

    GOOD_FIT = "good_fit"
    IN_RANGE = "in_range"
    OUT_OF_RANGE = "out_of_range"


class MRLabel(Enum):
    """Magnitude-and-reach label: error band crossed with site reach.

    A and C mark in-range and out-of-range errors confined to a single
    or small set of buildings; B and D mark the same bands when the
    error co-occurs on at least the configured fraction of a site's
    buildings the same day.
    """

    GOOD_FIT = "GF"
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class TBLabel(Enum):
    """Temporal-behavior label derived from error run lengths.

    T1 long-term, T2 medium-term, T3 single-day, T4 modulating. NONE is
    reserved for good-fit days, which carry no temporal label.
    """

    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"
    NONE = ""


@dataclass(frozen=True)
class ErrorLabel:
    """Joint classification of one (building, meter kind, day)."""

    building: BuildingRef
    kind: MeterKind
    day: date
    band: MagnitudeBand
    mr: MRLabel
    tb: TBLabel
    run_length_days: int  # 0 for good-fit days

    @property
    def category_code(self) -> str:
        return category_code(self.mr, self.tb)


def category_code(mr: MRLabel, tb: TBLabel) -> str:
    """Short cell code: "GF" or the MR letter plus the TB digit, e.g. "A1"."""
    if mr is MRLabel.GOOD_FIT:
        return "GF"
    if tb is TBLabel.NONE:
        raise ValueError(f"error label {mr.value} requires a temporal label")
    return mr.value + tb.value[1]


#: The 17 category codes a scored building-day can take, in report order.
CATEGORY_CODES = ["GF"] + [m + t for m in "ABCD" for t in "1234"]

#: Cell code for days with no scored record (used by heat maps only).
NO_DATA_CODE = "ND"


@dataclass(frozen=True)
class DailyErrorRecord:
    """Pooled daily error for one (building, meter kind, day).

    ``rmsle`` is the raw pooled value; ``rmsle_scaled`` is its per-kind
    min-max scaled value in [0, 1], or None before scaling has been
    applied. ``pair_count`` is the number of (prediction, actual) pairs
    that entered the day's computation.
    """

    building: BuildingRef
    kind: MeterKind
    day: date
    rmsle: float
    rmsle_scaled: float | None
    pair_count: int

    def __post_init__(self):
        if self.rmsle < 0:
            raise ValueError(f"rmsle must be non-negative, got {self.rmsle}")
        if self.pair_count < 1:
            raise ValueError(f"pair_count must be >= 1, got {self.pair_count}")
        if self.rmsle_scaled is not None and not 0.0 <= self.rmsle_scaled <= 1.0:
            raise ValueError(f"rmsle_scaled must be in [0, 1], got {self.rmsle_scaled}")
