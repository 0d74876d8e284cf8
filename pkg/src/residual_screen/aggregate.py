"""Roll-ups of labeled building-days into share tables.

Every table reports, per label, the frequency share (fraction of scored
building-days carrying the label) and the contribution share (fraction
of the summed scaled error attributable to those days, good-fit days
included in the denominator). Denominators count scored days only; days
without a record carry no error value and stay out of every share.

Tables recompose exactly: per-site tables weighted by their day counts
merge into per-kind tables, and those into the overall table. The
``recompose`` helper performs that merge and is what the consistency
checks exercise.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Callable, Mapping, Sequence

from .core import (
    CATEGORY_CODES,
    DailyErrorRecord,
    DataError,
    ErrorLabel,
    MagnitudeBand,
    MeterKind,
    MRLabel,
)

MR_CODES = ["GF", "A", "B", "C", "D"]
TB_CODES = ["T1", "T2", "T3", "T4"]


@dataclass(frozen=True)
class BreakdownRow:
    label: str
    frequency_share: float
    contribution_share: float
    n_days: int
    n_buildings: int


@dataclass(frozen=True)
class BreakdownTable:
    """Share table for one grouping key, with exact merge ingredients.

    ``rows`` follow the canonical label order and always include every
    label of the axis, absent ones with zero shares. ``day_counts`` and
    ``scaled_sums`` keep the raw tallies so tables can be recomposed
    without rounding; ``building_ids`` keeps the distinct buildings.
    """

    grouping: str
    key: str
    labels: tuple[str, ...]
    day_counts: Mapping[str, int]
    scaled_sums: Mapping[str, float]
    building_ids: frozenset[int]

    @property
    def total_days(self) -> int:
        return sum(self.day_counts.values())

    @property
    def total_scaled(self) -> float:
        return sum(self.scaled_sums.values())

    @property
    def n_buildings(self) -> int:
        return len(self.building_ids)

    def frequency_share(self, label: str) -> float:
        total = self.total_days
        return self.day_counts.get(label, 0) / total if total else 0.0

    def contribution_share(self, label: str) -> float:
        total = self.total_scaled
        return self.scaled_sums.get(label, 0.0) / total if total else 0.0

    @property
    def rows(self) -> list[BreakdownRow]:
        return [
            BreakdownRow(
                label=label,
                frequency_share=self.frequency_share(label),
                contribution_share=self.contribution_share(label),
                n_days=self.day_counts.get(label, 0),
                n_buildings=self.n_buildings,
            )
            for label in self.labels
        ]


def _scaled_lookup(
    records: Sequence[DailyErrorRecord],
) -> dict[tuple[int, MeterKind, date], float]:
    out = {}
    for r in records:
        if r.rmsle_scaled is None:
            raise ValueError("aggregation requires scaled records")
        out[(r.building.building_id, r.kind, r.day)] = r.rmsle_scaled
    return out


def _build_tables(
    labels: Sequence[ErrorLabel],
    records: Sequence[DailyErrorRecord],
    grouping: str,
    key_fn: Callable[[ErrorLabel], str],
    label_fn: Callable[[ErrorLabel], str],
    axis: Sequence[str],
) -> list[BreakdownTable]:
    scaled = _scaled_lookup(records)
    day_counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    scaled_sums: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    buildings: dict[str, set[int]] = defaultdict(set)
    for lab in labels:
        cell = (lab.building.building_id, lab.kind, lab.day)
        if cell not in scaled:
            raise DataError(f"label without a matching record: {cell}")
        key = key_fn(lab)
        code = label_fn(lab)
        day_counts[key][code] += 1
        scaled_sums[key][code] += scaled[cell]
        buildings[key].add(lab.building.building_id)
    return [
        BreakdownTable(
            grouping=grouping,
            key=key,
            labels=tuple(axis),
            day_counts=dict(day_counts[key]),
            scaled_sums=dict(scaled_sums[key]),
            building_ids=frozenset(buildings[key]),
        )
        for key in sorted(day_counts)
    ]


def breakdown_mr_tb(
    labels: Sequence[ErrorLabel], records: Sequence[DailyErrorRecord]
) -> list[BreakdownTable]:
    """Joint category shares per (site, meter kind).

    Every table carries all 17 category rows; categories never seen in a
    group report zero shares. Groups with no scored days are omitted.
    """
    tables = _build_tables(
        labels,
        records,
        grouping="site_meter",
        key_fn=lambda l: f"site{l.building.site_id}_{l.kind.label}",
        label_fn=lambda l: l.category_code,
        axis=CATEGORY_CODES,
    )
    order = {f"site{l.building.site_id}_{l.kind.label}": (l.kind.code, l.building.site_id) for l in labels}
    tables.sort(key=lambda t: order[t.key])
    return tables


def breakdown_meter(
    labels: Sequence[ErrorLabel], records: Sequence[DailyErrorRecord]
) -> list[BreakdownTable]:
    """Magnitude-and-reach shares per meter kind."""
    tables = _build_tables(
        labels,
        records,
        grouping="meter",
        key_fn=lambda l: l.kind.label,
        label_fn=lambda l: l.mr.value,
        axis=MR_CODES,
    )
    kind_order = {kind.label: kind.code for kind in MeterKind}
    tables.sort(key=lambda t: kind_order[t.key])
    return tables


def breakdown_primary_use(
    labels: Sequence[ErrorLabel], records: Sequence[DailyErrorRecord]
) -> list[BreakdownTable]:
    """Magnitude-and-reach shares per building primary-use type."""
    return _build_tables(
        labels,
        records,
        grouping="primary_use",
        key_fn=lambda l: l.building.primary_use,
        label_fn=lambda l: l.mr.value,
        axis=MR_CODES,
    )


def breakdown_overall(
    labels: Sequence[ErrorLabel], records: Sequence[DailyErrorRecord]
) -> list[BreakdownTable]:
    """Fleet-wide shares plus temporal sub-breakdowns of each error band.

    Returns the overall magnitude-and-reach table followed by the
    temporal-behavior shares within in-range days and within
    out-of-range days. The sub-tables are always present; on a fleet
    with no error days their rows are all zero.
    """
    overall = _build_tables(
        labels, records, "overall", lambda l: "all", lambda l: l.mr.value, MR_CODES
    )
    if not overall:
        overall = [
            BreakdownTable("overall", "all", tuple(MR_CODES), {}, {}, frozenset())
        ]
    out = list(overall)
    for band, key in (
        (MagnitudeBand.IN_RANGE, "in_range"),
        (MagnitudeBand.OUT_OF_RANGE, "out_of_range"),
    ):
        subset = [l for l in labels if l.band is band]
        tables = _build_tables(
            subset, records, "overall_tb", lambda l: key, lambda l: l.tb.value, TB_CODES
        )
        if tables:
            out.extend(tables)
        else:
            out.append(BreakdownTable("overall_tb", key, tuple(TB_CODES), {}, {}, frozenset()))
    return out


def recompose(
    tables: Sequence[BreakdownTable],
    grouping: str,
    key_fn: Callable[[BreakdownTable], str],
    label_fn: Callable[[str], str] = lambda label: label,
    axis: Sequence[str] | None = None,
) -> list[BreakdownTable]:
    """Merge tables into a coarser grouping by exact tally addition.

    ``key_fn`` maps each input table to its merged key and ``label_fn``
    maps input labels onto the output axis (for instance "A1" -> "A").
    Frequency and contribution shares of the result are recomputed from
    the summed tallies, so merging per-site tables reproduces per-kind
    tables exactly.
    """
    if axis is None:
        axis = tables[0].labels if tables else ()
    day_counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    scaled_sums: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    buildings: dict[str, set[int]] = defaultdict(set)
    for table in tables:
        key = key_fn(table)
        buildings[key] |= table.building_ids
        for label, count in table.day_counts.items():
            day_counts[key][label_fn(label)] += count
        for label, total in table.scaled_sums.items():
            scaled_sums[key][label_fn(label)] += total
    return [
        BreakdownTable(
            grouping=grouping,
            key=key,
            labels=tuple(axis),
            day_counts=dict(day_counts[key]),
            scaled_sums=dict(scaled_sums[key]),
            building_ids=frozenset(buildings[key]),
        )
        for key in sorted(day_counts)
    ]
