"""Shared fixtures: a small deterministic fleet with known injected errors.

The demo fleet covers two sites, all four meter kinds, and a hand-picked
set of divergence injections whose categories are known by construction:
a long out-of-range run with trailing isolated days (C1 + C4 after
modulation), short in-range runs (A2/A3), a coincident two-building
in-range run (B1), a coincident single day (B3), and per-kind anchors so
min-max scaling lands each injection in its intended band. It contains
no multi-building out-of-range errors at all, so D labels never occur.

Predictions are the actuals times exp(r) on injected days and byte-equal
to the actuals elsewhere, giving a daily pooled error of about r and an
exact zero baseline.
"""

from __future__ import annotations

import json
import math
from datetime import date, timedelta
from pathlib import Path

import pytest

from residual_screen.core import MeterKind

ELEC = MeterKind.ELECTRICITY
CHW = MeterKind.CHILLED_WATER
STEAM = MeterKind.STEAM
HW = MeterKind.HOT_WATER

PERIOD_START = date(2017, 1, 1)
PERIOD_END = date(2017, 2, 28)
N_DAYS = (PERIOD_END - PERIOD_START).days + 1  # 59

#: building -> (site, primary use, meter kinds)
FLEET = {
    101: (1, "Education", (ELEC, CHW, STEAM, HW)),
    102: (1, "Office", (ELEC, CHW)),
    103: (1, "Education", (ELEC, CHW)),  # chilled water excluded via the list
    201: (2, "Lodging/residential", (ELEC, HW)),
    202: (2, "Office", (ELEC,)),
}

EXCLUDED_PAIRS = [(103, CHW)]

#: entire day of actuals dropped from the file (tests the no-data path)
MISSING_DAYS = {(202, ELEC, 5)}

#: (building, kind) -> list of (day offsets, log-factor r)
INJECTIONS = {
    (101, ELEC): [(range(10, 20), 1.0), ((30, 33, 36, 39), 0.6)],
    (102, ELEC): [((15, 16), 0.2), ((47,), 0.2)],
    (201, ELEC): [((25,), 0.2)],
    (202, ELEC): [((25,), 0.2)],
    (101, CHW): [(range(20, 25), 0.2), ((40,), 1.0)],
    (102, CHW): [(range(20, 25), 0.2)],
    (101, STEAM): [((5, 6), 0.2), ((50,), 1.0)],
    (101, HW): [((8, 9, 10), 0.2)],
    (201, HW): [((12,), 1.0)],
}

#: spot checks: (building, kind, day offset) -> expected category code
EXPECTED_SPOTS = {
    (101, ELEC, 0): "GF",
    (101, ELEC, 10): "C1",
    (101, ELEC, 19): "C1",
    (101, ELEC, 30): "C4",
    (101, ELEC, 39): "C4",
    (102, ELEC, 15): "A2",
    (102, ELEC, 16): "A2",
    (102, ELEC, 47): "A3",
    (201, ELEC, 25): "B3",
    (202, ELEC, 25): "B3",
    (101, CHW, 20): "B1",
    (102, CHW, 24): "B1",
    (101, CHW, 40): "C3",
    (101, STEAM, 5): "A2",
    (101, STEAM, 50): "C3",
    (101, HW, 9): "A2",
    (201, HW, 12): "C3",
}

SUBMISSION_IDS = ("sub_a", "sub_b", "sub_c")


def injection_r(building_id: int, kind: MeterKind, offset: int) -> float:
    for offsets, r in INJECTIONS.get((building_id, kind), []):
        if offset in offsets:
            return r
    return 0.0


def actual_text(building_id: int, kind: MeterKind, offset: int, hour: int) -> str:
    base = 100.0 + (building_id % 7) + kind.code
    wave = 10.0 * math.sin(2.0 * math.pi * hour / 24.0)
    return f"{base + wave:.3f}"


def _series_cells():
    """Every (building, kind, offset, hour) cell of the fleet, in file order."""
    for bid, (_site, _use, kinds) in sorted(FLEET.items()):
        for kind in kinds:
            for offset in range(N_DAYS):
                for hour in range(24):
                    yield bid, kind, offset, hour


def _timestamp(offset: int, hour: int) -> str:
    day = PERIOD_START + timedelta(days=offset)
    return f"{day.isoformat()} {hour:02d}:00:00"


def build_fleet_inputs(root: Path) -> dict:
    """Write the full input corpus under ``root`` and return its paths."""
    root.mkdir(parents=True, exist_ok=True)
    sub_dir = root / "submissions"
    sub_dir.mkdir(exist_ok=True)

    actual_lines = ["building_id,meter,timestamp,meter_reading"]
    row_map_lines = ["row_id,building_id,meter,timestamp"]
    sub_lines = {sid: ["row_id,meter_reading"] for sid in SUBMISSION_IDS}

    row_id = 0
    for bid, kind, offset, hour in _series_cells():
        ts = _timestamp(offset, hour)
        a_text = actual_text(bid, kind, offset, hour)
        if (bid, kind, offset) in MISSING_DAYS:
            pass  # whole day absent from the actuals file
        elif (bid, kind, offset) == (103, ELEC, 2) and hour == 5:
            actual_lines.append(f"{bid},{kind.code},{ts},-3.2")
        elif (bid, kind, offset) == (103, ELEC, 2) and hour == 6:
            actual_lines.append(f"{bid},{kind.code},{ts},bad")
        else:
            actual_lines.append(f"{bid},{kind.code},{ts},{a_text}")

        row_map_lines.append(f"{row_id},{bid},{kind.code},{ts}")
        r = injection_r(bid, kind, offset)
        pred_text = a_text if r == 0.0 else f"{float(a_text) * math.exp(r):.6f}"
        for sid in SUBMISSION_IDS:
            if sid == "sub_c" and (bid, kind, offset) == (103, ELEC, 1) and hour in (0, 1, 2):
                sub_lines[sid].append(f"{row_id},-1.5")
            elif sid == "sub_c" and (bid, kind, offset) == (103, ELEC, 1) and hour == 3:
                sub_lines[sid].append(f"{row_id},x")
            else:
                sub_lines[sid].append(f"{row_id},{pred_text}")
        row_id += 1

    (root / "actuals.csv").write_text("\n".join(actual_lines) + "\n")
    (root / "row_id_map.csv").write_text("\n".join(row_map_lines) + "\n")
    for sid in SUBMISSION_IDS:
        (sub_dir / f"{sid}.csv").write_text("\n".join(sub_lines[sid]) + "\n")

    meta_lines = ["site_id,building_id,primary_use,year_built"]
    for bid, (site, use, _kinds) in sorted(FLEET.items()):
        meta_lines.append(f"{site},{bid},{use},1970")
    meta_lines.append("3,999,Retail,1999")  # metadata-only building, no readings
    (root / "metadata.csv").write_text("\n".join(meta_lines) + "\n")

    excl_lines = ["# pairs removed from the analysis"]
    excl_lines += [f"{bid},{kind.code}" for bid, kind in EXCLUDED_PAIRS]
    (root / "exclusions.txt").write_text("\n".join(excl_lines) + "\n")

    config = {
        "actuals": "actuals.csv",
        "metadata": "metadata.csv",
        "submissions": "submissions",
        "row_id_map": "row_id_map.csv",
        "exclusions": "exclusions.txt",
        "period_start": PERIOD_START.isoformat(),
        "period_end": PERIOD_END.isoformat(),
        "output_dir": "out",
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")

    return {
        "root": root,
        "config": config_path,
        "actuals": root / "actuals.csv",
        "metadata": root / "metadata.csv",
        "row_id_map": root / "row_id_map.csv",
        "exclusions": root / "exclusions.txt",
        "submissions": [sub_dir / f"{sid}.csv" for sid in SUBMISSION_IDS],
    }


@pytest.fixture(scope="session")
def fleet_inputs(tmp_path_factory) -> dict:
    return build_fleet_inputs(tmp_path_factory.mktemp("fleet"))


@pytest.fixture(scope="session")
def fleet_run(fleet_inputs, tmp_path_factory) -> dict:
    """One full pipeline execution over the demo fleet, shared by tests."""
    from residual_screen.cli import main

    out = tmp_path_factory.mktemp("bundle")
    rc = main(["run", "--config", str(fleet_inputs["config"]), "--output-dir", str(out)])
    assert rc == 0
    return {**fleet_inputs, "out": out}
