"""Error-category labeling of scored building-days.

Each scored day gets two independent labels that are then joined:

* Magnitude and reach (MR): the scaled-error band (good fit up to 0.1,
  in-range up to 0.3, out-of-range above) crossed with whether the same
  band hits at least the configured fraction of the site's buildings on
  the same day. Bands are closed on the left edge: 0.1 is still a good
  fit and 0.3 is still in-range.

* Temporal behavior (TB): derived from the maximal run of consecutive
  same-band error days. Length 1 is short-term (T3), lengths 2 to
  ``medium_run_max_days`` are medium-term (T2), and anything at least
  ``long_run_min_days`` long is long-term (T1). A modulation pass then
  relabels short and medium days as T4 wherever a sliding window of
  ``window_days`` contains two or more error days of the band and the
  single-day share among them reaches ``short_term_fraction``. Long
  runs are never relabeled.

Days with no scored record break runs and are excluded from every
denominator; the reach denominator is the number of site buildings with
any scored record of the kind in the analysis period, so missing data
cannot inflate reach.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import (
    AnalysisConfig,
    BuildingRef,
    DailyErrorRecord,
    DataError,
    ErrorLabel,
    MagnitudeBand,
    MeterKind,
    MRLabel,
    TBLabel,
    day_span,
)

_ERROR_BANDS = (MagnitudeBand.IN_RANGE, MagnitudeBand.OUT_OF_RANGE)


class Reach(Enum):
    SINGLE = "single"
    MULTIPLE = "multiple"


def band_of(record: DailyErrorRecord, cfg: AnalysisConfig) -> MagnitudeBand:
    """Magnitude band of one scored day. Requires rmsle_scaled to be set."""
    s = record.rmsle_scaled
    if s is None:
        raise ValueError("band_of requires a scaled record")
    if s <= cfg.good_fit_max:
        return MagnitudeBand.GOOD_FIT
    if s <= cfg.out_of_range_min:
        return MagnitudeBand.IN_RANGE
    return MagnitudeBand.OUT_OF_RANGE


def reach(
    records: Sequence[DailyErrorRecord], site_population: int, cfg: AnalysisConfig
) -> Reach:
    """Reach of one (site, kind, day, band) group of records.

    MULTIPLE means the band hit at least ``reach_fraction`` of the
    site's buildings that day, compared in exact rational arithmetic,
    and at least two buildings in absolute terms; a band on one lone
    building is always SINGLE regardless of the site size.
    """
    if site_population < 1:
        raise ValueError("site_population must be >= 1")
    count = len({r.building.building_id for r in records})
    return _reach_of(count, site_population, cfg)


def _reach_of(count: int, population: int, cfg: AnalysisConfig) -> Reach:
    if count >= 2 and Fraction(count, population) >= cfg.reach_fraction:
        return Reach.MULTIPLE
    return Reach.SINGLE


def runs(
    bands: Sequence[MagnitudeBand | None],
) -> list[tuple[MagnitudeBand, int, int]]:
    """Maximal runs of consecutive error days sharing a band.

    ``bands`` is the day-by-day band sequence for one (building, kind)
    over the full analysis period, with None for days without a scored
    record. Good-fit and no-data days break runs, as does a change of
    band. Returns (band, start index, length) for error bands only.
    """
    out: list[tuple[MagnitudeBand, int, int]] = []
    start = None
    current = None
    for i, band in enumerate(bands):
        if band is current and band in _ERROR_BANDS:
            continue
        if current in _ERROR_BANDS:
            out.append((current, start, i - start))
        current = band if band in _ERROR_BANDS else None
        start = i
    if current in _ERROR_BANDS:
        out.append((current, start, len(bands) - start))
    return out


def tb_from_run(length: int, cfg: AnalysisConfig) -> TBLabel:
    """Temporal label for one error run of the given length, pre-modulation."""
    if length < 1:
        raise ValueError(f"run length must be >= 1, got {length}")
    if length >= cfg.long_run_min_days:
        return TBLabel.T1
    if length == 1:
        return TBLabel.T3
    return TBLabel.T2


def modulation_pass(
    error_days: Sequence[tuple[date, int, TBLabel]],
    period: tuple[date, date],
    cfg: AnalysisConfig,
) -> list[TBLabel]:
    """Relabel modulating days as T4 for one (building, kind, band) series.

    ``error_days`` holds (day, run length, initial label) sorted by day
    for every error day of one band. A window triggers when it contains
    at least two error days of the band and the proportion whose run
    length is 1 meets ``short_term_fraction`` (exact rational compare).
    Every day of a triggered window with run length at most
    ``medium_run_max_days`` becomes T4; long-run days are exempt.

    Windows slide one day at a time over the analysis period. A period
    shorter than ``window_days`` is scanned as one whole-period window.
    """
    if not error_days:
        return []
    start, end = period
    n_days = (end - start).days + 1
    window = min(cfg.window_days, n_days)

    offsets = [(d - start).days for d, _, _ in error_days]
    if offsets[0] < 0 or offsets[-1] >= n_days:
        raise ValueError("error days fall outside the analysis period")
    short_prefix = [0]
    for _, run_length, _ in error_days:
        short_prefix.append(short_prefix[-1] + (1 if run_length == 1 else 0))

    # Collect the index intervals of triggered windows, then mark once.
    intervals: list[tuple[int, int]] = []
    for w_start in range(n_days - window + 1):
        lo = bisect_left(offsets, w_start)
        hi = bisect_right(offsets, w_start + window - 1)
        e = hi - lo
        if e < 2:
            continue
        s = short_prefix[hi] - short_prefix[lo]
        if Fraction(s, e) >= cfg.short_term_fraction:
            if intervals and lo <= intervals[-1][1]:
                intervals[-1] = (intervals[-1][0], max(intervals[-1][1], hi))
            else:
                intervals.append((lo, hi))

    labels = [tb for _, _, tb in error_days]
    for lo, hi in intervals:
        for i in range(lo, hi):
            if error_days[i][1] <= cfg.medium_run_max_days:
                labels[i] = TBLabel.T4
    return labels


def mr_labels(
    records: Sequence[DailyErrorRecord],
    metadata: Mapping[int, BuildingRef],
    cfg: AnalysisConfig,
) -> dict[tuple[int, MeterKind, date], MRLabel]:
    """Magnitude-and-reach label for every scored day.

    ``metadata`` maps building_id to its reference; a record whose
    building is missing from it is a hard error.
    """
    site_of = _site_lookup(records, metadata)
    population: dict[tuple[int, MeterKind], set[int]] = defaultdict(set)
    band_hits: dict[tuple[int, MeterKind, date, MagnitudeBand], set[int]] = defaultdict(set)
    banded = []
    for r in records:
        bid = r.building.building_id
        site = site_of[bid]
        band = band_of(r, cfg)
        population[(site, r.kind)].add(bid)
        if band in _ERROR_BANDS:
            band_hits[(site, r.kind, r.day, band)].add(bid)
        banded.append((r, site, band))

    out: dict[tuple[int, MeterKind, date], MRLabel] = {}
    for r, site, band in banded:
        bid = r.building.building_id
        if band is MagnitudeBand.GOOD_FIT:
            out[(bid, r.kind, r.day)] = MRLabel.GOOD_FIT
            continue
        count = len(band_hits[(site, r.kind, r.day, band)])
        pop = len(population[(site, r.kind)])
        multiple = _reach_of(count, pop, cfg) is Reach.MULTIPLE
        if band is MagnitudeBand.IN_RANGE:
            out[(bid, r.kind, r.day)] = MRLabel.B if multiple else MRLabel.A
        else:
            out[(bid, r.kind, r.day)] = MRLabel.D if multiple else MRLabel.C
    return out


def classify_all(
    records: Sequence[DailyErrorRecord],
    metadata: Mapping[int, BuildingRef],
    cfg: AnalysisConfig,
    period: tuple[date, date] | None = None,
    threads: int = 1,
) -> list[ErrorLabel]:
    """Full joint labeling of every scored day.

    The temporal pass needs the full analysis period to enumerate
    sliding windows; when ``period`` is omitted it defaults to the
    observed day span of the records. Output is sorted by (kind, site,
    building, day) and does not depend on input order or thread count.
    """
    if not records:
        return []
    site_of = _site_lookup(records, metadata)
    if period is None:
        period = (min(r.day for r in records), max(r.day for r in records))
    if any(not period[0] <= r.day <= period[1] for r in records):
        raise ValueError("records fall outside the given analysis period")

    days = day_span(*period)
    day_index = {d: i for i, d in enumerate(days)}
    mr = mr_labels(records, metadata, cfg)

    groups: dict[tuple[int, MeterKind], list[DailyErrorRecord]] = defaultdict(list)
    for r in records:
        groups[(r.building.building_id, r.kind)].append(r)

    def label_group(item):
        (bid, kind), group_records = item
        bands: list[MagnitudeBand | None] = [None] * len(days)
        for r in group_records:
            bands[day_index[r.day]] = band_of(r, cfg)
        run_list = runs(bands)
        run_len: dict[int, int] = {}
        band_at: dict[int, MagnitudeBand] = {}
        for band, start, length in run_list:
            for i in range(start, start + length):
                run_len[i] = length
                band_at[i] = band

        tb: dict[int, TBLabel] = {}
        for band in _ERROR_BANDS:
            idx = sorted(i for i in band_at if band_at[i] is band)
            series = [(days[i], run_len[i], tb_from_run(run_len[i], cfg)) for i in idx]
            for i, label in zip(idx, modulation_pass(series, period, cfg)):
                tb[i] = label

        labels = []
        building = metadata[bid]
        for r in group_records:
            i = day_index[r.day]
            band = bands[i]
            if band is MagnitudeBand.GOOD_FIT:
                labels.append(
                    ErrorLabel(building, kind, r.day, band, MRLabel.GOOD_FIT, TBLabel.NONE, 0)
                )
            else:
                labels.append(
                    ErrorLabel(building, kind, r.day, band, mr[(bid, kind, r.day)], tb[i], run_len[i])
                )
        return labels

    items = sorted(groups.items(), key=lambda kv: (kv[0][1].code, kv[0][0]))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_group = list(pool.map(label_group, items))
    else:
        per_group = [label_group(item) for item in items]

    out = [label for group in per_group for label in group]
    out.sort(key=lambda l: (l.kind.code, l.building.site_id, l.building.building_id, l.day))
    return out


def _site_lookup(
    records: Iterable[DailyErrorRecord], metadata: Mapping[int, BuildingRef]
) -> dict[int, int]:
    site_of: dict[int, int] = {}
    for r in records:
        bid = r.building.building_id
        if bid not in site_of:
            ref = metadata.get(bid)
            if ref is None:
                raise DataError(f"building {bid} is missing from the metadata")
            site_of[bid] = ref.site_id
    return site_of
