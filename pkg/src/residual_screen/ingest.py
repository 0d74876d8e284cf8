"""File ingestion: actuals, metadata, submissions, row-id maps, exclusions.

Expected layouts:

* actuals CSV, header exactly ``building_id,meter,timestamp,meter_reading``
  with meter codes 0=electricity, 1=chilledwater, 2=steam, 3=hotwater and
  timestamps ``YYYY-MM-DD HH:MM:SS`` on whole hours
* metadata CSV with at least ``site_id,building_id,primary_use`` columns
* submission CSV ``row_id,meter_reading``
* row-id map CSV ``row_id,building_id,meter,timestamp``
* exclusion list, one ``building_id,meter`` pair per line, ``#`` comments

Cleaning is tolerant where the data can be dirty: rows with unparseable
or negative values are dropped and counted, never fatal. Structural
problems (bad header, unknown meter code, duplicate ids) abort with the
offending line number.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import BuildingRef, ConfigError, DataError, MeterKind, day_span

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

ACTUALS_HEADER = ["building_id", "meter", "timestamp", "meter_reading"]
SUBMISSION_HEADER = ["row_id", "meter_reading"]
ROW_ID_MAP_HEADER = ["row_id", "building_id", "meter", "timestamp"]


@dataclass
class LoadStats:
    """Row accounting for one loaded file."""

    rows: int = 0
    dropped_unparseable: int = 0
    dropped_negative: int = 0
    excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "dropped_unparseable": self.dropped_unparseable,
            "dropped_negative": self.dropped_negative,
            "excluded": self.excluded,
        }


@dataclass
class MeterSeries:
    """Hourly actual readings for one (building, meter kind) pair."""

    building: BuildingRef
    kind: MeterKind
    readings: dict[datetime, float]


@dataclass
class SubmissionSet:
    """One contestant's retained predictions, keyed for fast alignment.

    ``predictions`` maps (building_id, kind) to {timestamp: value}.
    Negative predictions are removed at load time and counted in
    ``removed_count``; unparseable rows land in ``dropped_count``.
    """

    submission_id: str
    predictions: dict[tuple[int, MeterKind], dict[datetime, float]]
    row_count: int = 0
    removed_count: int = 0
    dropped_count: int = 0

    @property
    def retained_count(self) -> int:
        return sum(len(v) for v in self.predictions.values())


@dataclass(frozen=True)
class RowIdMap:
    """Bijection from submission row_id to (building_id, kind, timestamp)."""

    entries: Mapping[int, tuple[int, MeterKind, datetime]]

    def resolve(self, row_id: int) -> tuple[int, MeterKind, datetime]:
        try:
            return self.entries[row_id]
        except KeyError:
            raise DataError(f"row_id {row_id} is not in the row-id map") from None


@dataclass(frozen=True)
class ExclusionList:
    """(building, kind) pairs and whole sites to drop from the analysis."""

    pairs: frozenset[tuple[int, MeterKind]] = frozenset()
    site_ids: frozenset[int] = frozenset()

    @classmethod
    def empty(cls) -> "ExclusionList":
        return cls()

    @classmethod
    def from_file(cls, path: str | Path) -> "ExclusionList":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"exclusion list not found: {path}")
        pairs = set()
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'building_id,meter', got {raw!r}")
            try:
                bid = int(parts[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad building_id {parts[0]!r}") from None
            pairs.add((bid, MeterKind.parse(parts[1])))
        return cls(pairs=frozenset(pairs))

    def with_sites(self, site_ids: Iterable[int]) -> "ExclusionList":
        return ExclusionList(pairs=self.pairs, site_ids=frozenset(site_ids) | self.site_ids)

    def expand(self, metadata: Mapping[int, BuildingRef]) -> "ExclusionList":
        """Fold site exclusions into explicit pairs using the metadata."""
        if not self.site_ids:
            return self
        pairs = set(self.pairs)
        for ref in metadata.values():
            if ref.site_id in self.site_ids:
                pairs.update((ref.building_id, kind) for kind in MeterKind)
        return ExclusionList(pairs=frozenset(pairs), site_ids=self.site_ids)

    def excludes(self, building_id: int, kind: MeterKind) -> bool:
        return (building_id, kind) in self.pairs


def _open_csv(path: str | Path, expected_header: list[str], exact: bool = True):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    handle = path.open(newline="")
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        handle.close()
        raise DataError(f"{path}: file is empty, expected header {expected_header}") from None
    header = [h.strip() for h in header]
    if exact:
        if header != expected_header:
            handle.close()
            raise DataError(f"{path}: malformed header {header}, expected {expected_header}")
        positions = list(range(len(expected_header)))
    else:
        try:
            positions = [header.index(col) for col in expected_header]
        except ValueError as exc:
            handle.close()
            raise DataError(f"{path}: header {header} is missing a required column: {exc}") from None
    return handle, reader, positions


def load_metadata(path: str | Path) -> dict[int, BuildingRef]:
    """Load building metadata keyed by building_id.

    Extra columns are ignored; an empty primary_use becomes "Unknown";
    a duplicate building_id is a hard error.
    """
    handle, reader, pos = _open_csv(path, ["site_id", "building_id", "primary_use"], exact=False)
    out: dict[int, BuildingRef] = {}
    with handle:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                site_id = int(row[pos[0]])
                building_id = int(row[pos[1]])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: bad site_id/building_id in {row!r}") from None
            if building_id in out:
                raise DataError(f"{path}:{lineno}: duplicate building_id {building_id}")
            use = row[pos[2]].strip() if len(row) > pos[2] else ""
            out[building_id] = BuildingRef(building_id, site_id, use or "Unknown")
    return out


def load_actuals(
    path: str | Path,
    exclusions: ExclusionList,
    buildings: Mapping[int, BuildingRef],
) -> tuple[list[MeterSeries], LoadStats]:
    """Load hourly actual readings into one series per (building, kind).

    Negative or unparseable readings and off-hour timestamps drop the
    row and increment the stats counters. Unknown meter codes, unknown
    buildings, and duplicate timestamps abort with the line number.
    """
    handle, reader, _ = _open_csv(path, ACTUALS_HEADER)
    stats = LoadStats()
    series: dict[tuple[int, MeterKind], MeterSeries] = {}
    with handle:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            stats.rows += 1
            if len(row) != 4:
                stats.dropped_unparseable += 1
                continue
            try:
                bid = int(row[0])
            except ValueError:
                stats.dropped_unparseable += 1
                continue
            try:
                kind = MeterKind.from_code(row[1])
            except DataError:
                raise DataError(f"{path}:{lineno}: unknown meter code {row[1]!r}") from None
            if exclusions.excludes(bid, kind):
                stats.excluded += 1
                continue
            ref = buildings.get(bid)
            if ref is None:
                raise DataError(f"{path}:{lineno}: building {bid} is missing from the metadata")
            if exclusions.site_ids and ref.site_id in exclusions.site_ids:
                stats.excluded += 1
                continue
            try:
                ts = datetime.strptime(row[2], TIMESTAMP_FORMAT)
            except ValueError:
                stats.dropped_unparseable += 1
                continue
            if ts.minute or ts.second:
                stats.dropped_unparseable += 1
                continue
            try:
                value = float(row[3])
            except ValueError:
                stats.dropped_unparseable += 1
                continue
            if not np.isfinite(value):
                stats.dropped_unparseable += 1
                continue
            if value < 0:
                stats.dropped_negative += 1
                continue
            key = (bid, kind)
            if key not in series:
                series[key] = MeterSeries(ref, kind, {})
            if ts in series[key].readings:
                raise DataError(f"{path}:{lineno}: duplicate timestamp {row[2]} for building {bid}")
            series[key].readings[ts] = value
    ordered = sorted(series.values(), key=lambda s: (s.kind.code, s.building.building_id))
    return ordered, stats


def load_row_id_map(path: str | Path) -> RowIdMap:
    handle, reader, _ = _open_csv(path, ROW_ID_MAP_HEADER)
    entries: dict[int, tuple[int, MeterKind, datetime]] = {}
    seen_targets = set()
    with handle:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                row_id = int(row[0])
                bid = int(row[1])
                kind = MeterKind.from_code(row[2])
                ts = datetime.strptime(row[3], TIMESTAMP_FORMAT)
            except (ValueError, IndexError, DataError):
                raise DataError(f"{path}:{lineno}: bad row-id map entry {row!r}") from None
            if row_id in entries:
                raise DataError(f"{path}:{lineno}: duplicate row_id {row_id}")
            target = (bid, kind, ts)
            if target in seen_targets:
                raise DataError(f"{path}:{lineno}: duplicate target {target} breaks bijectivity")
            seen_targets.add(target)
            entries[row_id] = target
    return RowIdMap(entries=entries)


def load_submission(path: str | Path, row_map: RowIdMap) -> SubmissionSet:
    """Load one prediction submission, removing negative predictions.

    The submission id is the file stem. An unresolvable row_id is a hard
    error; a non-numeric prediction drops the row with a count.
    """
    path = Path(path)
    handle, reader, _ = _open_csv(path, SUBMISSION_HEADER)
    sub = SubmissionSet(submission_id=path.stem, predictions={})
    with handle:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            sub.row_count += 1
            try:
                row_id = int(row[0])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: unresolvable row_id {row[0]!r}") from None
            try:
                bid, kind, ts = row_map.resolve(row_id)
            except DataError:
                raise DataError(f"{path}:{lineno}: unresolvable row_id {row_id}") from None
            try:
                value = float(row[1])
            except (ValueError, IndexError):
                sub.dropped_count += 1
                continue
            if not np.isfinite(value):
                sub.dropped_count += 1
                continue
            if value < 0:
                sub.removed_count += 1
                continue
            sub.predictions.setdefault((bid, kind), {})[ts] = value
    return sub


@dataclass
class PanelGroup:
    """Aligned hourly arrays for one (building, kind) over the period.

    ``actuals`` has shape (n_days * 24,); ``predictions`` has shape
    (n_submissions, n_days * 24). NaN marks a missing value.
    """

    building: BuildingRef
    kind: MeterKind
    actuals: np.ndarray
    predictions: np.ndarray


@dataclass
class AlignedPanel:
    """Per-group hourly grids of actuals and retained predictions."""

    start: date
    end: date
    days: list[date] = field(repr=False)
    submission_ids: tuple[str, ...]
    groups: list[PanelGroup] = field(repr=False)

    @property
    def n_hours(self) -> int:
        return len(self.days) * 24


def align(
    actuals: Sequence[MeterSeries],
    submissions: Sequence[SubmissionSet],
    period: tuple[date, date],
) -> AlignedPanel:
    """Join actuals and predictions on a fixed hourly grid for the period.

    One group per actual series, hours outside the period ignored.
    Submissions are ordered by id so the panel layout is canonical.
    Hours with a missing actual keep their predictions in the arrays but
    contribute no residual pairs when scored.
    """
    if not submissions:
        raise DataError("alignment needs at least one submission")
    start, end = period
    days = day_span(start, end)
    n_hours = len(days) * 24
    ordered_subs = sorted(submissions, key=lambda s: s.submission_id)
    ids = tuple(s.submission_id for s in ordered_subs)
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate submission ids: {ids}")

    def hour_index(ts: datetime) -> int | None:
        off = (ts.date() - start).days
        if off < 0 or off >= len(days):
            return None
        return off * 24 + ts.hour

    groups = []
    for s in sorted(actuals, key=lambda s: (s.kind.code, s.building.building_id)):
        actual_arr = np.full(n_hours, np.nan)
        for ts, value in s.readings.items():
            idx = hour_index(ts)
            if idx is not None:
                actual_arr[idx] = value
        pred_arr = np.full((len(ordered_subs), n_hours), np.nan)
        for row, sub in enumerate(ordered_subs):
            for ts, value in sub.predictions.get((s.building.building_id, s.kind), {}).items():
                idx = hour_index(ts)
                if idx is not None:
                    pred_arr[row, idx] = value
        groups.append(PanelGroup(s.building, s.kind, actual_arr, pred_arr))
    return AlignedPanel(start=start, end=end, days=days, submission_ids=ids, groups=groups)
