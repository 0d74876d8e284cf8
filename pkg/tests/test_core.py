"""Core type and calendar tests."""

from datetime import date, timedelta
from fractions import Fraction

import pytest

from residual_screen.core import (
    CATEGORY_CODES,
    AnalysisConfig,
    ConfigError,
    DailyErrorRecord,
    BuildingRef,
    DataError,
    MeterKind,
    MRLabel,
    TBLabel,
    category_code,
    day_span,
)


def test_day_span_identity():
    assert day_span(date(2017, 1, 1), date(2017, 1, 1)) == [date(2017, 1, 1)]


def test_day_span_three_days():
    days = day_span(date(2017, 1, 1), date(2017, 1, 3))
    assert len(days) == 3
    assert days == [date(2017, 1, 1), date(2017, 1, 2), date(2017, 1, 3)]


def test_day_span_across_february_non_leap():
    # 2017 is not a leap year: Feb 27, Feb 28, Mar 1, Mar 2.
    days = day_span(date(2017, 2, 27), date(2017, 3, 2))
    assert len(days) == 4
    assert days[1] == date(2017, 2, 28)
    assert days[2] == date(2017, 3, 1)


def test_day_span_invalid_range():
    with pytest.raises(ValueError):
        day_span(date(2017, 1, 2), date(2017, 1, 1))


def test_day_arithmetic_round_trips():
    d = date(2016, 2, 28)
    for i in range(800):
        current = d + timedelta(days=i)
        assert (current + timedelta(days=1)) - timedelta(days=1) == current


def test_config_defaults_match_published_thresholds():
    cfg = AnalysisConfig()
    assert cfg.good_fit_max == 0.1
    assert cfg.out_of_range_min == 0.3
    assert cfg.reach_fraction == Fraction(1, 3)
    assert cfg.window_days == 30
    assert cfg.short_term_fraction == Fraction(1, 10)
    assert cfg.long_run_min_days == 4
    assert cfg.medium_run_max_days == 3


def test_config_accepts_fraction_strings():
    cfg = AnalysisConfig(reach_fraction="2/5", short_term_fraction="0.25")
    assert cfg.reach_fraction == Fraction(2, 5)
    assert cfg.short_term_fraction == Fraction(1, 4)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"good_fit_max": 0.4},  # not below out_of_range_min
        {"good_fit_max": 0.0},
        {"reach_fraction": "0"},
        {"reach_fraction": "3/2"},
        {"window_days": 0},
        {"short_term_fraction": "0"},
        {"long_run_min_days": 5},  # must be medium_run_max_days + 1
        {"medium_run_max_days": 4},
        {"reach_fraction": "nonsense"},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        AnalysisConfig(**kwargs)


def test_meter_kind_codes_and_labels():
    assert MeterKind.from_code(0) is MeterKind.ELECTRICITY
    assert MeterKind.from_code("3") is MeterKind.HOT_WATER
    assert MeterKind.parse("chilledwater") is MeterKind.CHILLED_WATER
    assert MeterKind.parse("2") is MeterKind.STEAM
    for kind in MeterKind:
        assert MeterKind.parse(kind.label) is kind


@pytest.mark.parametrize("bad", ["4", "gas", "", "water"])
def test_meter_kind_rejects_unknown(bad):
    with pytest.raises(DataError):
        MeterKind.parse(bad)


def test_category_codes_cover_all_17():
    assert len(CATEGORY_CODES) == 17
    assert CATEGORY_CODES[0] == "GF"
    assert "D4" in CATEGORY_CODES
    assert category_code(MRLabel.A, TBLabel.T1) == "A1"
    assert category_code(MRLabel.GOOD_FIT, TBLabel.NONE) == "GF"
    with pytest.raises(ValueError):
        category_code(MRLabel.C, TBLabel.NONE)


def test_daily_error_record_validation():
    ref = BuildingRef(1, 1, "Office")
    with pytest.raises(ValueError):
        DailyErrorRecord(ref, MeterKind.ELECTRICITY, date(2017, 1, 1), -0.1, None, 24)
    with pytest.raises(ValueError):
        DailyErrorRecord(ref, MeterKind.ELECTRICITY, date(2017, 1, 1), 0.1, 1.5, 24)
    with pytest.raises(ValueError):
        DailyErrorRecord(ref, MeterKind.ELECTRICITY, date(2017, 1, 1), 0.1, 0.5, 0)
