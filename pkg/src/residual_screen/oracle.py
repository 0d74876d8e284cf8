"""Reference classifier and synthetic fleet generator for testing.

``brute_force_classify`` re-derives every label with explicit
day-by-day, window-by-window, and building-by-building scans. It shares
nothing with the production classifier except the core data types, so a
bug in the optimized path cannot hide behind shared code. Keep it
literal; clarity beats speed here.

The generator builds fleets whose band sequence is known by
construction, with scaled values jittered inside safe sub-ranges that
never touch a threshold. Randomized fleets for differential testing use
the fixed representative values 0.05, 0.2, and 0.5 instead, again to
keep boundaries out of play; boundary behavior is tested separately
with exact values.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import date, timedelta
from fractions import Fraction
from typing import Mapping, Sequence

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
)

REPRESENTATIVE_VALUES = {
    MagnitudeBand.GOOD_FIT: 0.05,
    MagnitudeBand.IN_RANGE: 0.2,
    MagnitudeBand.OUT_OF_RANGE: 0.5,
}

_JITTER_RANGES = {
    MagnitudeBand.GOOD_FIT: (0.0, 0.09),
    MagnitudeBand.IN_RANGE: (0.12, 0.28),
    MagnitudeBand.OUT_OF_RANGE: (0.35, 0.95),
}

_USE_CYCLE = (
    "Education",
    "Office",
    "Lodging/residential",
    "Entertainment/public assembly",
    "Public services",
)


@dataclass(frozen=True)
class Anomaly:
    """One injected error pattern.

    ``buildings`` lists the affected building ids, ``band`` the error
    band, ``start`` the first day of the first episode, ``length`` the
    days per episode. ``repeats`` > 1 with a ``spacing`` (days between
    episode starts) produces recurring patterns for modulation tests.
    """

    buildings: tuple[int, ...]
    kind: MeterKind
    band: MagnitudeBand
    start: date
    length: int
    repeats: int = 1
    spacing: int = 0


@dataclass(frozen=True)
class SyntheticScenario:
    """Fleet shape, period, and injected anomalies with a noise seed."""

    site_ids: tuple[int, ...]
    buildings_per_site: int
    kinds: tuple[MeterKind, ...]
    period_start: date
    period_days: int
    anomalies: tuple[Anomaly, ...] = ()
    seed: int = 0

    def building_ids(self, site_id: int) -> list[int]:
        return [site_id * 1000 + i for i in range(1, self.buildings_per_site + 1)]


@dataclass
class GeneratedFleet:
    records: list[DailyErrorRecord]
    expected: list[ErrorLabel]
    metadata: dict[int, BuildingRef]
    period: tuple[date, date]
    config: AnalysisConfig = field(default_factory=AnalysisConfig)


def generate(scenario: SyntheticScenario, cfg: AnalysisConfig | None = None) -> GeneratedFleet:
    """Build the fleet described by a scenario plus its expected labels.

    Two anomalies that assign different error bands to the same
    building-day contradict each other and raise DataError. The expected
    labels come from applying the classification rules to the band grid.
    """
    cfg = cfg or AnalysisConfig()
    if scenario.period_days < 1 or scenario.buildings_per_site < 1:
        raise DataError("scenario needs at least one day and one building per site")
    metadata: dict[int, BuildingRef] = {}
    for site in scenario.site_ids:
        for i, bid in enumerate(scenario.building_ids(site)):
            metadata[bid] = BuildingRef(bid, site, _USE_CYCLE[i % len(_USE_CYCLE)])

    period_start = scenario.period_start
    period_end = period_start + timedelta(days=scenario.period_days - 1)
    bands: dict[tuple[int, MeterKind, int], MagnitudeBand] = {}
    for anomaly in scenario.anomalies:
        if anomaly.kind not in scenario.kinds:
            raise DataError(f"anomaly kind {anomaly.kind.label} not in the scenario kinds")
        for episode in range(anomaly.repeats):
            first = (anomaly.start - period_start).days + episode * anomaly.spacing
            if first < 0 or first + anomaly.length > scenario.period_days:
                raise DataError("anomaly falls outside the scenario period")
            for bid in anomaly.buildings:
                if bid not in metadata:
                    raise DataError(f"anomaly names unknown building {bid}")
                for off in range(first, first + anomaly.length):
                    key = (bid, anomaly.kind, off)
                    prior = bands.get(key)
                    if prior is not None and prior is not anomaly.band:
                        raise DataError(
                            f"contradictory anomalies on building {bid} day offset {off}"
                        )
                    bands[key] = anomaly.band

    rng = random.Random(scenario.seed)
    records: list[DailyErrorRecord] = []
    for site in scenario.site_ids:
        for bid in scenario.building_ids(site):
            for kind in scenario.kinds:
                for off in range(scenario.period_days):
                    band = bands.get((bid, kind, off), MagnitudeBand.GOOD_FIT)
                    lo, hi = _JITTER_RANGES[band]
                    value = rng.uniform(lo, hi)
                    records.append(
                        DailyErrorRecord(
                            building=metadata[bid],
                            kind=kind,
                            day=period_start + timedelta(days=off),
                            rmsle=value,
                            rmsle_scaled=value,
                            pair_count=24,
                        )
                    )
    expected = brute_force_classify(records, metadata, cfg, (period_start, period_end))
    return GeneratedFleet(records, expected, metadata, (period_start, period_end), cfg)


def random_fleet(
    seed: int,
    max_buildings: int = 20,
    max_days: int = 120,
    start: date = date(2017, 1, 1),
) -> tuple[list[DailyErrorRecord], dict[int, BuildingRef], tuple[date, date]]:
    """Randomized fleet for differential testing.

    Scaled values are drawn from the three representative band values
    only, building-days go missing with 10% probability, and buildings
    are spread over one to three sites.
    """
    rng = random.Random(seed)
    n_buildings = rng.randint(2, max_buildings)
    n_days = rng.randint(10, max_days)
    n_sites = rng.randint(1, 3)
    kinds = rng.sample(list(MeterKind), rng.randint(1, 2))
    values = sorted(REPRESENTATIVE_VALUES.values())

    metadata: dict[int, BuildingRef] = {}
    for b in range(n_buildings):
        site = rng.randrange(n_sites)
        bid = 100 + b
        metadata[bid] = BuildingRef(bid, site, _USE_CYCLE[b % len(_USE_CYCLE)])

    records = []
    for bid, ref in metadata.items():
        for kind in kinds:
            for off in range(n_days):
                if rng.random() < 0.1:
                    continue
                value = rng.choice(values)
                records.append(
                    DailyErrorRecord(
                        building=ref,
                        kind=kind,
                        day=start + timedelta(days=off),
                        rmsle=value,
                        rmsle_scaled=value,
                        pair_count=24,
                    )
                )
    return records, metadata, (start, start + timedelta(days=n_days - 1))


def brute_force_classify(
    records: Sequence[DailyErrorRecord],
    metadata: Mapping[int, BuildingRef],
    cfg: AnalysisConfig,
    period: tuple[date, date] | None = None,
) -> list[ErrorLabel]:
    """Label every scored day by direct rule application, no shortcuts."""
    if not records:
        return []
    for r in records:
        if r.building.building_id not in metadata:
            raise DataError(f"building {r.building.building_id} is missing from the metadata")
        if r.rmsle_scaled is None:
            raise ValueError("brute_force_classify requires scaled records")
    if period is None:
        period = (min(r.day for r in records), max(r.day for r in records))
    start, end = period
    n_days = (end - start).days + 1
    window = cfg.window_days if cfg.window_days <= n_days else n_days

    # Band of every scored cell, straight from the thresholds.
    band_of_cell: dict[tuple[int, MeterKind, int], MagnitudeBand] = {}
    for r in records:
        off = (r.day - start).days
        if off < 0 or off >= n_days:
            raise ValueError("records fall outside the given analysis period")
        if r.rmsle_scaled <= cfg.good_fit_max:
            band = MagnitudeBand.GOOD_FIT
        elif r.rmsle_scaled <= cfg.out_of_range_min:
            band = MagnitudeBand.IN_RANGE
        else:
            band = MagnitudeBand.OUT_OF_RANGE
        band_of_cell[(r.building.building_id, r.kind, off)] = band

    pairs = sorted({(r.building.building_id, r.kind) for r in records}, key=lambda p: (p[1].code, p[0]))

    # Run length of every error day: walk outward day by day.
    run_length: dict[tuple[int, MeterKind, int], int] = {}
    for bid, kind in pairs:
        for off in range(n_days):
            band = band_of_cell.get((bid, kind, off))
            if band is None or band is MagnitudeBand.GOOD_FIT:
                continue
            length = 1
            back = off - 1
            while back >= 0 and band_of_cell.get((bid, kind, back)) is band:
                length += 1
                back -= 1
            ahead = off + 1
            while ahead < n_days and band_of_cell.get((bid, kind, ahead)) is band:
                length += 1
                ahead += 1
            run_length[(bid, kind, off)] = length

    # Initial temporal label from the run length alone.
    tb: dict[tuple[int, MeterKind, int], TBLabel] = {}
    for key, length in run_length.items():
        if length >= cfg.long_run_min_days:
            tb[key] = TBLabel.T1
        elif length == 1:
            tb[key] = TBLabel.T3
        else:
            tb[key] = TBLabel.T2

    # Modulation: rescan every window of every band of every series.
    for bid, kind in pairs:
        for band in (MagnitudeBand.IN_RANGE, MagnitudeBand.OUT_OF_RANGE):
            for w_start in range(n_days - window + 1):
                error_days = []
                for off in range(w_start, w_start + window):
                    if band_of_cell.get((bid, kind, off)) is band:
                        error_days.append(off)
                if len(error_days) < 2:
                    continue
                singles = 0
                for off in error_days:
                    if run_length[(bid, kind, off)] == 1:
                        singles += 1
                if Fraction(singles, len(error_days)) >= cfg.short_term_fraction:
                    for off in error_days:
                        if run_length[(bid, kind, off)] <= cfg.medium_run_max_days:
                            tb[(bid, kind, off)] = TBLabel.T4

    # Reach: tally the affected buildings of every (site, kind, day, band)
    # and the population of every (site, kind) across the scored records.
    population: dict[tuple[int, MeterKind], set[int]] = {}
    for r in records:
        key = (metadata[r.building.building_id].site_id, r.kind)
        population.setdefault(key, set()).add(r.building.building_id)
    affected: dict[tuple[int, MeterKind, int, MagnitudeBand], set[int]] = {}
    for (bid, kind, off), band in band_of_cell.items():
        if band is MagnitudeBand.GOOD_FIT:
            continue
        key = (metadata[bid].site_id, kind, off, band)
        affected.setdefault(key, set()).add(bid)

    labels = []
    for r in sorted(records, key=lambda r: (r.kind.code, r.building.site_id, r.building.building_id, r.day)):
        bid = r.building.building_id
        site = metadata[bid].site_id
        kind = r.kind
        off = (r.day - start).days
        band = band_of_cell[(bid, kind, off)]
        if band is MagnitudeBand.GOOD_FIT:
            labels.append(ErrorLabel(metadata[bid], kind, r.day, band, MRLabel.GOOD_FIT, TBLabel.NONE, 0))
            continue
        count = len(affected[(site, kind, off, band)])
        pop = len(population[(site, kind)])
        multiple = count >= 2 and Fraction(count, pop) >= cfg.reach_fraction
        if band is MagnitudeBand.IN_RANGE:
            mr = MRLabel.B if multiple else MRLabel.A
        else:
            mr = MRLabel.D if multiple else MRLabel.C
        labels.append(
            ErrorLabel(metadata[bid], kind, r.day, band, mr, tb[(bid, kind, off)], run_length[(bid, kind, off)])
        )
    return labels
