"""Heat-map matrices, vector renders, and the text summary report.

Heat maps show one building per row and one day per column, with the
cell colored by the day's joint error category. Rows are ordered from
the building with the highest mean scaled error down to the lowest,
ties broken by ascending building id.

Renders are SVG only and byte-deterministic: a fixed hash salt, no
embedded creation date, and cells drawn as one compound vector path per
category (merging consecutive same-category days) keep output identical
across reruns and fast even for a full-year fleet matrix.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from datetime import date
from typing import Mapping, Sequence

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import PathPatch, Patch
from matplotlib.path import Path as MplPath

from .aggregate import BreakdownTable, recompose
from .core import (
    CATEGORY_CODES,
    NO_DATA_CODE,
    AnalysisConfig,
    DailyErrorRecord,
    DataError,
    ErrorLabel,
    MeterKind,
    day_span,
)
from .metrics import QuartileSummary, ScalerParams

#: Fixed cell palette: magnitude family sets the hue (blue A, green B,
#: orange C, purple D), temporal depth sets the lightness. Good-fit days
#: are light gray and days without a record are white.
PALETTE: dict[str, str] = {
    "GF": "#f0f0f0",
    "A1": "#a6cee3",
    "A2": "#6baed6",
    "A3": "#3182bd",
    "A4": "#08519c",
    "B1": "#b2df8a",
    "B2": "#74c476",
    "B3": "#31a354",
    "B4": "#006d2c",
    "C1": "#fdbe85",
    "C2": "#fd8d3c",
    "C3": "#e6550d",
    "C4": "#a63603",
    "D1": "#cbc9e2",
    "D2": "#9e9ac8",
    "D3": "#756bb1",
    "D4": "#54278f",
    "ND": "#ffffff",
}

_SVG_HASH_SALT = "residual-screen"

# Text kept as SVG <text> (not glyph paths): smaller, diffable, and the
# legend labels stay searchable. The salt pins generated element ids.
_RC = {"svg.hashsalt": _SVG_HASH_SALT, "svg.fonttype": "none", "font.size": 8.0}


@dataclass(frozen=True)
class HeatmapMatrix:
    """Category-code matrix for one (site, kind): buildings x days."""

    site_id: int
    kind: MeterKind
    building_ids: tuple[int, ...]
    days: tuple[date, ...]
    cells: tuple[tuple[str, ...], ...]  # cells[row][col], row order = building_ids

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.building_ids), len(self.days))


@dataclass(frozen=True)
class HeatmapStyle:
    title: bool = True
    font_size: float = 8.0
    max_row_labels: int = 40
    max_day_ticks: int = 10
    fig_width: float = 11.0


def build_heatmap(
    labels: Sequence[ErrorLabel],
    records: Sequence[DailyErrorRecord],
    site_id: int,
    kind: MeterKind,
    period: tuple[date, date],
) -> HeatmapMatrix:
    """Assemble the category matrix for one site and meter kind.

    Every day of the period appears as a column; cells without a scored
    record carry the no-data code.
    """
    days = tuple(day_span(*period))
    mean_scaled: dict[int, tuple[float, int]] = {}
    for r in records:
        if r.kind is kind and r.building.site_id == site_id:
            if r.rmsle_scaled is None:
                raise ValueError("heat maps require scaled records")
            total, n = mean_scaled.get(r.building.building_id, (0.0, 0))
            mean_scaled[r.building.building_id] = (total + r.rmsle_scaled, n + 1)
    if not mean_scaled:
        raise DataError(f"no scored records for site {site_id} / {kind.label}")
    ordered = sorted(
        mean_scaled, key=lambda bid: (-(mean_scaled[bid][0] / mean_scaled[bid][1]), bid)
    )

    code: dict[tuple[int, date], str] = {}
    for lab in labels:
        if lab.kind is kind and lab.building.site_id == site_id:
            code[(lab.building.building_id, lab.day)] = lab.category_code
    day_index = {d: i for i, d in enumerate(days)}
    for (bid, d), _ in code.items():
        if d not in day_index:
            raise ValueError(f"label day {d} outside the heat-map period")
    cells = tuple(
        tuple(code.get((bid, d), NO_DATA_CODE) for d in days) for bid in ordered
    )
    return HeatmapMatrix(
        site_id=site_id, kind=kind, building_ids=tuple(ordered), days=days, cells=cells
    )


def _category_path(cells: Sequence[Sequence[str]], code: str) -> MplPath | None:
    """Compound path of all cells holding one code, runs merged per row."""
    verts: list[tuple[float, float]] = []
    codes: list[np.uint8] = []
    for row, row_cells in enumerate(cells):
        col = 0
        n = len(row_cells)
        while col < n:
            if row_cells[col] != code:
                col += 1
                continue
            end = col + 1
            while end < n and row_cells[end] == code:
                end += 1
            verts += [(col, row), (end, row), (end, row + 1), (col, row + 1), (col, row)]
            codes += [
                MplPath.MOVETO,
                MplPath.LINETO,
                MplPath.LINETO,
                MplPath.LINETO,
                MplPath.CLOSEPOLY,
            ]
            col = end
    if not verts:
        return None
    return MplPath(verts, codes)


def _legend_handles() -> list[Patch]:
    order = CATEGORY_CODES + [NO_DATA_CODE]
    return [
        Patch(facecolor=PALETTE[c], edgecolor="#888888", linewidth=0.4, label=c)
        for c in order
    ]


def render_heatmap(matrix: HeatmapMatrix, style: HeatmapStyle | None = None) -> bytes:
    """Render one matrix to SVG bytes. Equal inputs give equal bytes."""
    if not matrix.building_ids:
        raise ValueError("cannot render an empty matrix")
    style = style or HeatmapStyle()
    n_rows, n_cols = matrix.shape
    height = max(2.8, 1.8 + 0.09 * n_rows)
    with plt.rc_context({**_RC, "font.size": style.font_size}):
        fig, ax = plt.subplots(figsize=(style.fig_width, height))
        fig.subplots_adjust(left=0.09, right=0.98, top=0.92, bottom=2.0 / height)
        for code in CATEGORY_CODES + [NO_DATA_CODE]:
            path = _category_path(matrix.cells, code)
            if path is not None:
                ax.add_patch(PathPatch(path, facecolor=PALETTE[code], edgecolor="none"))
        ax.set_xlim(0, n_cols)
        ax.set_ylim(n_rows, 0)

        stride = max(1, -(-n_cols // style.max_day_ticks))
        ticks = list(range(0, n_cols, stride))
        ax.set_xticks([t + 0.5 for t in ticks])
        ax.set_xticklabels([matrix.days[t].isoformat() for t in ticks], rotation=45, ha="right")
        if n_rows <= style.max_row_labels:
            ax.set_yticks([r + 0.5 for r in range(n_rows)])
            ax.set_yticklabels([str(b) for b in matrix.building_ids])
        else:
            ax.set_yticks([])
        ax.set_ylabel("building (highest mean error first)")
        if style.title:
            ax.set_title(f"Site {matrix.site_id} / {matrix.kind.label}: daily error categories")
        fig.legend(
            handles=_legend_handles(),
            loc="lower center",
            ncol=9,
            frameon=False,
            fontsize=style.font_size,
            handlelength=1.2,
            columnspacing=1.0,
        )
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def render_legend(style: HeatmapStyle | None = None) -> bytes:
    """Standalone legend document naming every category color."""
    style = style or HeatmapStyle()
    with plt.rc_context({**_RC, "font.size": style.font_size}):
        fig = plt.figure(figsize=(7.0, 1.6))
        fig.legend(
            handles=_legend_handles(),
            loc="center",
            ncol=6,
            frameon=False,
            fontsize=style.font_size,
        )
        fig.suptitle("Error category palette", fontsize=style.font_size + 2)
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def _pct(share: float) -> str:
    return f"{share * 100.0:.1f}%"


def _table_block(title: str, table: BreakdownTable) -> list[str]:
    lines = [title, "  label  frequency  contribution  days"]
    for row in table.rows:
        lines.append(
            f"  {row.label:<5}  {_pct(row.frequency_share):>9}  {_pct(row.contribution_share):>12}  {row.n_days:>4}"
        )
    return lines


def render_summary(
    tables: Sequence[BreakdownTable],
    cfg: AnalysisConfig,
    scalers: Mapping[MeterKind, ScalerParams] | None = None,
    quartile_summaries: Mapping[MeterKind, QuartileSummary] | None = None,
    pooling_mode: str = "pooled",
    quantile_rule: str = "linear",
    tool_version: str = "",
) -> str:
    """Human-readable report over the breakdown tables.

    Shares are rendered at 0.1 percentage-point resolution; every label
    of a table's axis appears even at 0.0%. Includes an echo of the
    config and the fitted scaler parameters.
    """
    by_grouping: dict[str, list[BreakdownTable]] = {}
    for t in tables:
        by_grouping.setdefault(t.grouping, []).append(t)

    lines = ["residual-screen summary" + (f" (v{tool_version})" if tool_version else "")]
    lines.append("")
    lines.append("configuration:")
    for k, v in cfg.to_dict().items():
        lines.append(f"  {k} = {v}")
    lines.append(f"  pooling_mode = {pooling_mode}")
    lines.append(f"  quantile_rule = {quantile_rule}")
    if scalers:
        lines.append("")
        lines.append("scaled-error fit ranges (raw rmsle min..max per kind):")
        for kind in MeterKind:
            if kind in scalers:
                p = scalers[kind]
                lines.append(f"  {kind.label}: {p.min_value:.6g} .. {p.max_value:.6g}")
    if quartile_summaries:
        lines.append("")
        lines.append("scaled-error quartiles (q1 / q2 / q3 / iqr / upper fence):")
        for kind in MeterKind:
            if kind in quartile_summaries:
                q = quartile_summaries[kind]
                lines.append(
                    f"  {kind.label}: {q.q1:.2f} / {q.q2:.2f} / {q.q3:.2f} / "
                    f"{q.iqr:.2f} / {q.upper_fence:.2f}"
                )

    for table in by_grouping.get("overall", []):
        lines.append("")
        lines.extend(_table_block("overall breakdown:", table))
    for table in by_grouping.get("overall_tb", []):
        lines.append("")
        lines.extend(_table_block(f"temporal behavior within {table.key} days:", table))
    for table in by_grouping.get("meter", []):
        lines.append("")
        lines.extend(_table_block(f"meter breakdown: {table.key}", table))
    site_tables = by_grouping.get("site_meter", [])
    if site_tables:
        per_kind = recompose(
            site_tables,
            grouping="meter_categories",
            key_fn=lambda t: t.key.split("_", 1)[1],
            axis=CATEGORY_CODES,
        )
        kind_order = {kind.label: kind.code for kind in MeterKind}
        per_kind.sort(key=lambda t: kind_order[t.key])
        for table in per_kind:
            lines.append("")
            lines.extend(_table_block(f"category breakdown: {table.key}", table))
    for table in by_grouping.get("primary_use", []):
        lines.append("")
        lines.extend(_table_block(f"primary use breakdown: {table.key}", table))
    lines.append("")
    return "\n".join(lines)
