"""Daily error scoring: pooled RMSLE, per-kind min-max scaling, quartiles.

The daily score for one (building, meter kind, day) pools every retained
(prediction, actual) pair from all submissions and all hours of the day
into a single root mean square logarithmic error:

    rmsle = sqrt(mean((ln(p + 1) - ln(a + 1))^2))

An alternative pooling mode averages one RMSLE per submission per day
instead; it exists for sensitivity analysis and is off by default.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .core import BuildingRef, DailyErrorRecord, DataError, MeterKind

POOLING_MODES = ("pooled", "per_submission_mean")


@dataclass(frozen=True)
class ScalerParams:
    """Min-max scaling parameters fitted per meter kind.

    When ``min_value == max_value`` the scaler is degenerate and maps
    every value to 0. That only arises on toy data and is reported with
    a warning at fit time.
    """

    kind: MeterKind
    min_value: float
    max_value: float

    @property
    def degenerate(self) -> bool:
        return self.min_value == self.max_value


@dataclass(frozen=True)
class QuartileSummary:
    """Quartiles, IQR, and the upper Tukey fence on the scaled error scale."""

    kind: MeterKind
    q1: float
    q2: float
    q3: float
    iqr: float
    upper_fence: float


def rmsle(pairs: Sequence[tuple[float, float]]) -> float:
    """Root mean square logarithmic error over (prediction, actual) pairs.

    Uses natural logarithms of value + 1. All inputs must be >= 0; an
    empty pair set has no defined value and raises ValueError.
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rmsle is undefined for an empty pair set")
    arr = arr.reshape(-1, 2)
    if np.isnan(arr).any():
        raise ValueError("rmsle pairs must not contain NaN")
    if (arr < 0).any():
        raise ValueError("rmsle requires non-negative predictions and actuals")
    d = np.log1p(arr[:, 0]) - np.log1p(arr[:, 1])
    return float(np.sqrt(np.mean(d * d)))


def score_group(
    building: BuildingRef,
    kind: MeterKind,
    days: Sequence[date],
    actuals: np.ndarray,
    predictions: np.ndarray,
    mode: str = "pooled",
) -> list[DailyErrorRecord]:
    """Score one (building, kind) series over an hourly grid.

    ``actuals`` has shape (n_days * 24,), ``predictions`` has shape
    (n_submissions, n_days * 24); NaN marks a missing value on either
    side. A pair enters the day's pool only when both the actual and the
    prediction are present. Days with zero pairs yield no record.
    """
    if mode not in POOLING_MODES:
        raise ValueError(f"unknown pooling mode {mode!r}")
    n_days = len(days)
    n_hours = n_days * 24
    if actuals.shape != (n_hours,) or predictions.ndim != 2 or predictions.shape[1] != n_hours:
        raise ValueError("misshapen panel arrays for scoring")

    valid = ~np.isnan(predictions) & ~np.isnan(actuals)[None, :]
    diff = np.where(valid, np.log1p(predictions) - np.log1p(actuals)[None, :], 0.0)
    sq = diff * diff
    bounds = np.arange(n_days) * 24

    records = []
    if mode == "pooled":
        day_sq = np.add.reduceat(sq.sum(axis=0), bounds)
        day_n = np.add.reduceat(valid.sum(axis=0), bounds)
        for i in range(n_days):
            n = int(day_n[i])
            if n == 0:
                continue
            records.append(
                DailyErrorRecord(
                    building=building,
                    kind=kind,
                    day=days[i],
                    rmsle=float(np.sqrt(day_sq[i] / n)),
                    rmsle_scaled=None,
                    pair_count=n,
                )
            )
    else:
        # One RMSLE per submission per day, averaged over submissions
        # that contributed at least one pair that day.
        sub_sq = np.add.reduceat(sq, bounds, axis=1)
        sub_n = np.add.reduceat(valid.astype(np.int64), bounds, axis=1)
        for i in range(n_days):
            counts = sub_n[:, i]
            present = counts > 0
            n = int(counts.sum())
            if n == 0:
                continue
            per_sub = np.sqrt(sub_sq[present, i] / counts[present])
            records.append(
                DailyErrorRecord(
                    building=building,
                    kind=kind,
                    day=days[i],
                    rmsle=float(per_sub.mean()),
                    rmsle_scaled=None,
                    pair_count=n,
                )
            )
    return records


def daily_errors(panel, mode: str = "pooled") -> list[DailyErrorRecord]:
    """Score every group of an aligned panel into daily error records.

    Returns records sorted by (meter kind, building, day). The result is
    a pure function of the panel contents; group order does not matter.
    """
    if not panel.groups:
        raise DataError("cannot score an empty panel")
    records: list[DailyErrorRecord] = []
    for group in panel.groups:
        records.extend(
            score_group(group.building, group.kind, panel.days, group.actuals, group.predictions, mode)
        )
    records.sort(key=lambda r: (r.kind.code, r.building.building_id, r.day))
    return records


def fit_scaler(records: Iterable[DailyErrorRecord], kind: MeterKind) -> ScalerParams:
    """Fit min-max parameters over the raw rmsle of all records of one kind."""
    values = [r.rmsle for r in records if r.kind is kind]
    if len(values) < 2:
        raise DataError(
            f"need at least 2 records to fit a scaler for {kind.label}, got {len(values)}"
        )
    lo, hi = min(values), max(values)
    if lo == hi:
        warnings.warn(
            f"degenerate scaler for {kind.label}: all {len(values)} rmsle values equal {lo}; "
            "every scaled value will be 0",
            stacklevel=2,
        )
    return ScalerParams(kind=kind, min_value=lo, max_value=hi)


def apply_scaler(record: DailyErrorRecord, params: ScalerParams) -> DailyErrorRecord:
    """Return a copy of the record with rmsle_scaled set, clipped to [0, 1]."""
    if record.kind is not params.kind:
        raise ValueError(
            f"scaler for {params.kind.label} applied to a {record.kind.label} record"
        )
    if params.degenerate:
        scaled = 0.0
    else:
        scaled = (record.rmsle - params.min_value) / (params.max_value - params.min_value)
        scaled = min(1.0, max(0.0, scaled))
    return replace(record, rmsle_scaled=scaled)


def scale_records(
    records: Sequence[DailyErrorRecord],
) -> tuple[list[DailyErrorRecord], dict[MeterKind, ScalerParams]]:
    """Fit one scaler per meter kind present and apply it to every record."""
    params: dict[MeterKind, ScalerParams] = {}
    for kind in MeterKind:
        if any(r.kind is kind for r in records):
            params[kind] = fit_scaler(records, kind)
    scaled = [apply_scaler(r, params[r.kind]) for r in records]
    return scaled, params


def quartiles(
    records: Sequence[DailyErrorRecord], rule: str = "linear"
) -> QuartileSummary:
    """Quartile summary of the scaled errors of one meter kind.

    ``rule`` is a numpy quantile method name; the default interpolates
    linearly between closest ranks at positions (n - 1) * q.
    """
    kinds = {r.kind for r in records}
    if len(kinds) != 1:
        raise ValueError(f"quartiles expects records of exactly one kind, got {len(kinds)}")
    if len(records) < 4:
        raise DataError(f"need at least 4 records for quartiles, got {len(records)}")
    values = [r.rmsle_scaled for r in records]
    if any(v is None for v in values):
        raise ValueError("quartiles requires scaled records")
    q1, q2, q3 = (float(q) for q in np.quantile(values, [0.25, 0.5, 0.75], method=rule))
    return QuartileSummary(
        kind=kinds.pop(),
        q1=q1,
        q2=q2,
        q3=q3,
        iqr=q3 - q1,
        upper_fence=q3 + 1.5 * (q3 - q1),
    )
