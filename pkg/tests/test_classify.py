"""Labeling rule tests: bands, reach, runs, modulation, and composition."""

import random
from datetime import date, timedelta

import pytest

from residual_screen.classify import (
    Reach,
    band_of,
    classify_all,
    modulation_pass,
    mr_labels,
    reach,
    runs,
    tb_from_run,
)
from residual_screen.core import (
    AnalysisConfig,
    BuildingRef,
    DailyErrorRecord,
    DataError,
    MagnitudeBand,
    MeterKind,
    MRLabel,
    TBLabel,
)

CFG = AnalysisConfig()
ELEC = MeterKind.ELECTRICITY
G, I, O = MagnitudeBand.GOOD_FIT, MagnitudeBand.IN_RANGE, MagnitudeBand.OUT_OF_RANGE
START = date(2017, 1, 1)


def rec(bid, site, scaled, offset=0, kind=ELEC, use="Office"):
    return DailyErrorRecord(
        BuildingRef(bid, site, use), kind, START + timedelta(days=offset), scaled, scaled, 24
    )


def make_metadata(records):
    return {r.building.building_id: r.building for r in records}


# --- banding ---------------------------------------------------------------


@pytest.mark.parametrize(
    "scaled,expected",
    [
        (0.05, G),
        (0.10, G),  # boundary belongs to the good-fit band
        (0.1000001, I),
        (0.2, I),
        (0.30, I),  # boundary belongs to the in-range band
        (0.3000001, O),
        (1.0, O),
        (0.0, G),
    ],
)
def test_band_boundaries(scaled, expected):
    assert band_of(rec(1, 1, scaled), CFG) is expected


def test_band_requires_scaled_value():
    unscaled = DailyErrorRecord(BuildingRef(1, 1, "Office"), ELEC, START, 0.5, None, 24)
    with pytest.raises(ValueError):
        band_of(unscaled, CFG)


# --- reach ------------------------------------------------------------------


@pytest.mark.parametrize(
    "n_buildings,population,expected",
    [
        (2, 6, Reach.MULTIPLE),  # 2/6 is exactly one third, "at least" passes
        (1, 6, Reach.SINGLE),
        (3, 10, Reach.SINGLE),  # 3/10 falls short of one third
        (4, 9, Reach.MULTIPLE),
        (1, 1, Reach.SINGLE),  # a lone building is never a multi-building error
        (2, 2, Reach.MULTIPLE),
        (1, 3, Reach.SINGLE),
        (333, 1000, Reach.SINGLE),  # just below one third, exactly compared
        (334, 1000, Reach.MULTIPLE),
    ],
)
def test_reach_rational_comparison(n_buildings, population, expected):
    records = [rec(bid, 1, 0.2) for bid in range(n_buildings)]
    assert reach(records, population, CFG) is expected


def test_reach_rejects_empty_population():
    with pytest.raises(ValueError):
        reach([rec(1, 1, 0.2)], 0, CFG)


# --- runs and run labels ----------------------------------------------------


def test_runs_single_in_range_block():
    assert runs([G, I, I, I, I, G]) == [(I, 1, 4)]


def test_runs_band_change_breaks():
    assert runs([I, O, O, I]) == [(I, 0, 1), (O, 1, 2), (I, 3, 1)]


def test_runs_good_fit_breaks():
    assert runs([I, G, I]) == [(I, 0, 1), (I, 2, 1)]


def test_runs_missing_days_break():
    assert runs([I, None, I, I]) == [(I, 0, 1), (I, 2, 2)]


def test_runs_empty_and_all_good():
    assert runs([]) == []
    assert runs([G, G, None]) == []


@pytest.mark.parametrize(
    "length,expected",
    [(1, TBLabel.T3), (2, TBLabel.T2), (3, TBLabel.T2), (4, TBLabel.T1), (365, TBLabel.T1)],
)
def test_tb_from_run_defaults(length, expected):
    assert tb_from_run(length, CFG) is expected


def test_tb_from_run_respects_config():
    cfg = AnalysisConfig(medium_run_max_days=2, long_run_min_days=3)
    assert tb_from_run(3, cfg) is TBLabel.T1
    assert tb_from_run(2, cfg) is TBLabel.T2


# --- modulation --------------------------------------------------------------


def window_scan_oracle(error_days, period, cfg):
    """Independent brute-force window scan for the modulation rule."""
    from fractions import Fraction

    start, end = period
    n = (end - start).days + 1
    w = min(cfg.window_days, n)
    offsets = [(d - start).days for d, _, _ in error_days]
    labels = [tb for _, _, tb in error_days]
    for ws in range(n - w + 1):
        members = [i for i, off in enumerate(offsets) if ws <= off <= ws + w - 1]
        if len(members) < 2:
            continue
        singles = sum(1 for i in members if error_days[i][1] == 1)
        if Fraction(singles, len(members)) >= cfg.short_term_fraction:
            for i in members:
                if error_days[i][1] <= cfg.medium_run_max_days:
                    labels[i] = TBLabel.T4
    return labels


def _mk_error_days(offsets_with_runs):
    out = []
    for off, run in offsets_with_runs:
        out.append((START + timedelta(days=off), run, tb_from_run(run, CFG)))
    return out


def test_modulation_isolated_days_all_become_t4():
    # Ten single days spaced 3 apart fit one 30-day window; every one flips.
    days = _mk_error_days([(3 * i, 1) for i in range(10)])
    period = (START, START + timedelta(days=29))
    labels = modulation_pass(days, period, CFG)
    assert labels == [TBLabel.T4] * 10
    assert labels == window_scan_oracle(days, period, CFG)


def test_modulation_leaves_single_long_run_alone():
    days = _mk_error_days([(10 + i, 5) for i in range(5)])
    period = (START, START + timedelta(days=59))
    labels = modulation_pass(days, period, CFG)
    assert labels == [TBLabel.T1] * 5
    assert TBLabel.T4 not in labels


def test_modulation_medium_run_plus_isolated_day():
    # A 3-day run and one isolated day share a window: 1/4 >= 1/10, so
    # all four short-run days flip to T4.
    days = _mk_error_days([(5, 3), (6, 3), (7, 3), (20, 1)])
    period = (START, START + timedelta(days=39))
    labels = modulation_pass(days, period, CFG)
    assert labels == [TBLabel.T4] * 4
    assert labels == window_scan_oracle(days, period, CFG)


def test_modulation_exact_fraction_boundary():
    # One single day among a 9-day run: 1/10 meets the threshold exactly;
    # only the single day can flip, long-run days are exempt.
    days = _mk_error_days([(i, 9) for i in range(9)] + [(15, 1)])
    period = (START, START + timedelta(days=29))
    labels = modulation_pass(days, period, CFG)
    assert labels == [TBLabel.T1] * 9 + [TBLabel.T4]


def test_modulation_short_period_uses_whole_span():
    days = _mk_error_days([(0, 1), (5, 1)])
    period = (START, START + timedelta(days=9))  # shorter than the window
    assert modulation_pass(days, period, CFG) == [TBLabel.T4, TBLabel.T4]


def test_modulation_never_relabels_long_runs():
    random_cases = random.Random(5)
    for _ in range(50):
        picked = sorted(random_cases.sample(range(60), random_cases.randint(2, 12)))
        days = _mk_error_days([(off, random_cases.choice([1, 2, 3, 4, 9])) for off in picked])
        period = (START, START + timedelta(days=59))
        labels = modulation_pass(days, period, CFG)
        assert labels == window_scan_oracle(days, period, CFG)
        for (_, run, _), label in zip(days, labels):
            if run >= CFG.long_run_min_days:
                assert label is not TBLabel.T4


# --- magnitude and reach labels ----------------------------------------------


def test_mr_lone_building_is_single():
    records = [rec(1, 1, 0.2)]
    labels = mr_labels(records, make_metadata(records), CFG)
    assert labels[(1, ELEC, START)] is MRLabel.A


def test_mr_four_of_nine_out_of_range():
    records = [rec(bid, 1, 0.5) for bid in range(4)]
    records += [rec(bid, 1, 0.01, offset=1) for bid in range(9)]  # fixes population at 9
    labels = mr_labels(records, make_metadata(records), CFG)
    for bid in range(4):
        assert labels[(bid, ELEC, START)] is MRLabel.D


def test_mr_mixed_bands_counted_separately():
    # One of nine out-of-range plus three of nine in-range the same day:
    # the bands reach independently, C for the one and B for the three.
    records = [rec(0, 1, 0.5)]
    records += [rec(bid, 1, 0.2) for bid in (1, 2, 3)]
    records += [rec(bid, 1, 0.01) for bid in (4, 5, 6, 7, 8)]
    labels = mr_labels(records, make_metadata(records), CFG)
    assert labels[(0, ELEC, START)] is MRLabel.C
    for bid in (1, 2, 3):
        assert labels[(bid, ELEC, START)] is MRLabel.B
    for bid in (4, 5, 6, 7, 8):
        assert labels[(bid, ELEC, START)] is MRLabel.GOOD_FIT


def test_mr_missing_metadata_names_building():
    records = [rec(42, 1, 0.2)]
    with pytest.raises(DataError, match="42"):
        mr_labels(records, {}, CFG)


def test_reach_monotone_in_same_band_days():
    # Adding another same-band building-day for an existing building can
    # only move days toward MULTIPLE, never away from it.
    base = [rec(1, 1, 0.2), rec(2, 1, 0.01), rec(3, 1, 0.01), rec(3, 1, 0.2, offset=1)]
    grown = base + [rec(2, 1, 0.2)]
    meta = make_metadata(base)
    before = mr_labels(base, meta, CFG)
    after = mr_labels(grown, meta, CFG)
    for cell, label in before.items():
        if label is MRLabel.B:
            assert after[cell] is MRLabel.B


# --- full composition ---------------------------------------------------------


def test_classify_all_good_fit_fleet():
    records = [rec(1, 1, 0.02, offset=i) for i in range(10)]
    labels = classify_all(records, make_metadata(records), CFG)
    assert all(l.mr is MRLabel.GOOD_FIT and l.tb is TBLabel.NONE for l in labels)
    assert all(l.run_length_days == 0 for l in labels)


def test_classify_all_lone_building_run():
    records = [rec(1, 1, 0.2, offset=i) for i in range(5)]
    records += [rec(1, 1, 0.02, offset=5 + i) for i in range(10)]
    labels = classify_all(records, make_metadata(records), CFG)
    coded = {(l.day, l.category_code) for l in labels}
    for i in range(5):
        assert (START + timedelta(days=i), "A1") in coded
    assert sum(1 for l in labels if l.category_code == "A1") == 5


def test_classify_all_partition_and_consistency():
    records, metadata, period = _random_records(seed=11)
    labels = classify_all(records, metadata, CFG, period)
    assert len(labels) == len(records)
    cells = {(l.building.building_id, l.kind, l.day) for l in labels}
    assert len(cells) == len(labels)
    for l in labels:
        assert (l.tb is TBLabel.NONE) == (l.mr is MRLabel.GOOD_FIT)
        if l.mr in (MRLabel.A, MRLabel.B):
            assert l.band is MagnitudeBand.IN_RANGE
        if l.mr in (MRLabel.C, MRLabel.D):
            assert l.band is MagnitudeBand.OUT_OF_RANGE
        if l.tb is TBLabel.T4:
            assert l.run_length_days < CFG.long_run_min_days


def test_classify_all_run_totality():
    records, metadata, period = _random_records(seed=3)
    labels = classify_all(records, metadata, CFG, period)
    period_len = (period[1] - period[0]).days + 1
    by_series = {}
    for l in labels:
        by_series.setdefault((l.building.building_id, l.kind), []).append(l)
    for series in by_series.values():
        error_days = sum(1 for l in series if l.run_length_days > 0)
        good_days = sum(1 for l in series if l.run_length_days == 0)
        missing = period_len - len(series)
        assert error_days + good_days + missing == period_len


def test_classify_all_input_order_invariant():
    records, metadata, period = _random_records(seed=7)
    shuffled = records[:]
    random.Random(0).shuffle(shuffled)
    assert classify_all(records, metadata, CFG, period) == classify_all(
        shuffled, metadata, CFG, period
    )


def test_classify_all_thread_count_invariant():
    records, metadata, period = _random_records(seed=9)
    assert classify_all(records, metadata, CFG, period) == classify_all(
        records, metadata, CFG, period, threads=4
    )


def test_classify_all_threshold_monotonicity():
    records, metadata, period = _random_records(seed=13, values=(0.05, 0.12, 0.2, 0.5))
    loose = AnalysisConfig(good_fit_max=0.15)
    strict_gf = sum(
        1 for l in classify_all(records, metadata, CFG, period) if l.mr is MRLabel.GOOD_FIT
    )
    loose_gf = sum(
        1 for l in classify_all(records, metadata, loose, period) if l.mr is MRLabel.GOOD_FIT
    )
    assert loose_gf >= strict_gf


def test_classify_all_rejects_out_of_period_records():
    records = [rec(1, 1, 0.2, offset=10)]
    with pytest.raises(ValueError):
        classify_all(records, make_metadata(records), CFG, (START, START + timedelta(days=5)))


def _random_records(seed, values=(0.05, 0.2, 0.5)):
    rng = random.Random(seed)
    n_days = rng.randint(40, 90)
    metadata = {}
    records = []
    for bid in range(1, rng.randint(4, 10)):
        site = rng.choice([1, 2])
        metadata[bid] = BuildingRef(bid, site, "Office")
        for off in range(n_days):
            if rng.random() < 0.15:
                continue
            value = rng.choice(values)
            records.append(
                DailyErrorRecord(
                    metadata[bid], ELEC, START + timedelta(days=off), value, value, 24
                )
            )
    return records, metadata, (START, START + timedelta(days=n_days - 1))
