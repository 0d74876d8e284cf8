"""Reading and writing of the stage artifacts.

Every artifact is plain CSV prefixed with a one-line schema marker
(``#schema residual-screen/<name> v<n>``) so stages can be resumed or
replaced by external tooling, and a reader can refuse an artifact
written under a different schema version. Floats are serialized with
``repr`` so values round-trip exactly and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .aggregate import BreakdownTable
from .core import (
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
from .ingest import AlignedPanel, PanelGroup, TIMESTAMP_FORMAT
from .report import HeatmapMatrix

SCHEMA_PREFIX = "#schema residual-screen/"

SCHEMAS = {
    "panel-actuals": ("v1", ["building_id", "meter", "timestamp", "actual"]),
    "panel-predictions": (
        "v1",
        ["building_id", "meter", "timestamp", "submission_id", "prediction"],
    ),
    "buildings": ("v1", ["site_id", "building_id", "primary_use"]),
    "daily-errors": (
        "v1",
        ["building_id", "site_id", "meter", "date", "rmsle", "rmsle_scaled", "pair_count"],
    ),
    "labels": (
        "v1",
        ["building_id", "site_id", "meter", "date", "rmsle_scaled", "band", "mr", "tb", "run_length"],
    ),
    "breakdowns": (
        "v1",
        ["grouping", "key", "label", "frequency_share", "contribution_share", "n_days", "n_buildings"],
    ),
    "heatmap-matrix": ("v1", None),  # header is built from the period
}


def _fmt(value: float) -> str:
    return repr(float(value))


def write_rows(path: Path, schema: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    version, _ = SCHEMAS[schema]
    with path.open("w", newline="") as fh:
        fh.write(f"{SCHEMA_PREFIX}{schema} {version}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_rows(path: Path, schema: str) -> tuple[list[str], list[list[str]]]:
    version, _ = SCHEMAS[schema]
    if not path.exists():
        raise DataError(f"stage artifact not found: {path}")
    with path.open(newline="") as fh:
        marker = fh.readline().rstrip("\n")
        expected = f"{SCHEMA_PREFIX}{schema} {version}"
        if marker != expected:
            raise DataError(
                f"{path}: schema mismatch: found {marker!r}, this tool reads {expected!r}"
            )
        reader = csv.reader(fh)
        header = next(reader, [])
        return header, [row for row in reader if row]


def write_panel(panel: AlignedPanel, directory: Path) -> list[Path]:
    """Serialize a panel to the two-file hourly layout (actuals, predictions)."""
    actuals_path = directory / "panel_actuals.csv"
    preds_path = directory / "panel_predictions.csv"
    actual_rows = []
    pred_rows = []
    for group in panel.groups:
        bid, label = group.building.building_id, group.kind.label
        for idx in np.flatnonzero(~np.isnan(group.actuals)):
            ts = _slot_timestamp(panel, int(idx))
            actual_rows.append([bid, label, ts, _fmt(group.actuals[idx])])
        for row, sub_id in enumerate(panel.submission_ids):
            for idx in np.flatnonzero(~np.isnan(group.predictions[row])):
                ts = _slot_timestamp(panel, int(idx))
                pred_rows.append([bid, label, ts, sub_id, _fmt(group.predictions[row, idx])])
    write_rows(actuals_path, "panel-actuals", SCHEMAS["panel-actuals"][1], actual_rows)
    write_rows(preds_path, "panel-predictions", SCHEMAS["panel-predictions"][1], pred_rows)
    return [actuals_path, preds_path]


def _slot_timestamp(panel: AlignedPanel, idx: int) -> str:
    day = panel.days[idx // 24]
    return datetime(day.year, day.month, day.day, idx % 24).strftime(TIMESTAMP_FORMAT)


def read_panel(
    directory: Path,
    metadata: Mapping[int, BuildingRef],
    period: tuple[date, date],
) -> AlignedPanel:
    """Rebuild the aligned panel from the two-file layout."""
    days = day_span(*period)
    n_hours = len(days) * 24
    start = period[0]

    def slot(ts_text: str) -> int:
        ts = datetime.strptime(ts_text, TIMESTAMP_FORMAT)
        off = (ts.date() - start).days
        if off < 0 or off >= len(days):
            raise DataError(f"panel timestamp {ts_text} outside the configured period")
        return off * 24 + ts.hour

    _, actual_rows = read_rows(directory / "panel_actuals.csv", "panel-actuals")
    _, pred_rows = read_rows(directory / "panel_predictions.csv", "panel-predictions")

    actuals: dict[tuple[int, MeterKind], np.ndarray] = {}
    for bid_s, kind_s, ts_s, value_s in actual_rows:
        key = (int(bid_s), MeterKind.parse(kind_s))
        if key not in actuals:
            actuals[key] = np.full(n_hours, np.nan)
        actuals[key][slot(ts_s)] = float(value_s)

    sub_ids = tuple(sorted({row[3] for row in pred_rows}))
    sub_index = {s: i for i, s in enumerate(sub_ids)}
    predictions: dict[tuple[int, MeterKind], np.ndarray] = {}
    for bid_s, kind_s, ts_s, sub_s, value_s in pred_rows:
        key = (int(bid_s), MeterKind.parse(kind_s))
        if key not in actuals:
            raise DataError(f"panel predictions for unknown series {key}")
        if key not in predictions:
            predictions[key] = np.full((len(sub_ids), n_hours), np.nan)
        predictions[key][sub_index[sub_s], slot(ts_s)] = float(value_s)

    groups = []
    for (bid, kind) in sorted(actuals, key=lambda k: (k[1].code, k[0])):
        ref = metadata.get(bid)
        if ref is None:
            raise DataError(f"panel series for building {bid} missing from the metadata")
        preds = predictions.get((bid, kind))
        if preds is None:
            preds = np.full((len(sub_ids), n_hours), np.nan)
        groups.append(PanelGroup(ref, kind, actuals[(bid, kind)], preds))
    return AlignedPanel(start=period[0], end=period[1], days=days, submission_ids=sub_ids, groups=groups)


def write_buildings(metadata: Mapping[int, BuildingRef], path: Path) -> None:
    rows = [
        [ref.site_id, ref.building_id, ref.primary_use]
        for ref in sorted(metadata.values(), key=lambda r: r.building_id)
    ]
    write_rows(path, "buildings", SCHEMAS["buildings"][1], rows)


def read_buildings(path: Path) -> dict[int, BuildingRef]:
    _, rows = read_rows(path, "buildings")
    out = {}
    for site_s, bid_s, use in rows:
        bid = int(bid_s)
        if bid in out:
            raise DataError(f"{path}: duplicate building_id {bid}")
        out[bid] = BuildingRef(bid, int(site_s), use)
    return out


def write_records(records: Sequence[DailyErrorRecord], path: Path) -> None:
    ordered = sorted(records, key=lambda r: (r.kind.code, r.building.building_id, r.day))
    rows = [
        [
            r.building.building_id,
            r.building.site_id,
            r.kind.label,
            r.day.isoformat(),
            _fmt(r.rmsle),
            "" if r.rmsle_scaled is None else _fmt(r.rmsle_scaled),
            r.pair_count,
        ]
        for r in ordered
    ]
    write_rows(path, "daily-errors", SCHEMAS["daily-errors"][1], rows)


def read_records(path: Path, metadata: Mapping[int, BuildingRef]) -> list[DailyErrorRecord]:
    _, rows = read_rows(path, "daily-errors")
    records = []
    for bid_s, site_s, kind_s, day_s, rmsle_s, scaled_s, pairs_s in rows:
        bid = int(bid_s)
        ref = metadata.get(bid)
        if ref is None:
            raise DataError(f"{path}: building {bid} missing from the metadata")
        if ref.site_id != int(site_s):
            raise DataError(f"{path}: site {site_s} disagrees with the metadata for building {bid}")
        records.append(
            DailyErrorRecord(
                building=ref,
                kind=MeterKind.parse(kind_s),
                day=date.fromisoformat(day_s),
                rmsle=float(rmsle_s),
                rmsle_scaled=None if scaled_s == "" else float(scaled_s),
                pair_count=int(pairs_s),
            )
        )
    return records


def write_labels(labels: Sequence[ErrorLabel], records: Sequence[DailyErrorRecord], path: Path) -> None:
    scaled = {
        (r.building.building_id, r.kind, r.day): r.rmsle_scaled for r in records
    }
    ordered = sorted(
        labels, key=lambda l: (l.kind.code, l.building.site_id, l.building.building_id, l.day)
    )
    rows = []
    for lab in ordered:
        cell = (lab.building.building_id, lab.kind, lab.day)
        if cell not in scaled or scaled[cell] is None:
            raise DataError(f"label without a scaled record: {cell}")
        rows.append(
            [
                lab.building.building_id,
                lab.building.site_id,
                lab.kind.label,
                lab.day.isoformat(),
                _fmt(scaled[cell]),
                lab.band.value,
                lab.mr.value,
                lab.tb.value,
                lab.run_length_days,
            ]
        )
    write_rows(path, "labels", SCHEMAS["labels"][1], rows)


def read_labels(path: Path, metadata: Mapping[int, BuildingRef]) -> list[ErrorLabel]:
    _, rows = read_rows(path, "labels")
    labels = []
    for bid_s, site_s, kind_s, day_s, _scaled, band_s, mr_s, tb_s, run_s in rows:
        bid = int(bid_s)
        ref = metadata.get(bid)
        if ref is None:
            raise DataError(f"{path}: building {bid} missing from the metadata")
        labels.append(
            ErrorLabel(
                building=ref,
                kind=MeterKind.parse(kind_s),
                day=date.fromisoformat(day_s),
                band=MagnitudeBand(band_s),
                mr=MRLabel(mr_s),
                tb=TBLabel(tb_s),
                run_length_days=int(run_s),
            )
        )
    return labels


def write_breakdowns(tables: Sequence[BreakdownTable], csv_path: Path, json_path: Path) -> None:
    rows = []
    mirror = []
    for table in tables:
        entry = {
            "grouping": table.grouping,
            "key": table.key,
            "total_days": table.total_days,
            "total_scaled": table.total_scaled,
            "n_buildings": table.n_buildings,
            "rows": [],
        }
        for row in table.rows:
            rows.append(
                [
                    table.grouping,
                    table.key,
                    row.label,
                    _fmt(row.frequency_share),
                    _fmt(row.contribution_share),
                    row.n_days,
                    row.n_buildings,
                ]
            )
            entry["rows"].append(
                {
                    "label": row.label,
                    "frequency_share": row.frequency_share,
                    "contribution_share": row.contribution_share,
                    "n_days": row.n_days,
                }
            )
        mirror.append(entry)
    write_rows(csv_path, "breakdowns", SCHEMAS["breakdowns"][1], rows)
    write_json(json_path, mirror)


def write_matrix(matrix: HeatmapMatrix, path: Path) -> None:
    header = ["building_id"] + [d.isoformat() for d in matrix.days]
    rows = [
        [bid] + list(matrix.cells[i])
        for i, bid in enumerate(matrix.building_ids)
    ]
    write_rows(path, "heatmap-matrix", header, rows)


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_json(path: Path):
    if not path.exists():
        raise DataError(f"artifact not found: {path}")
    return json.loads(path.read_text())


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
