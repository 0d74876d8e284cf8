"""Command-line pipeline: ingest -> score -> classify -> aggregate -> render.

Each stage reads the previous stage's artifacts from the output
directory and writes its own, so a run can be executed in one shot
(``run``) or stage by stage with identical resulting bytes. A JSON
config file names the inputs; thresholds and modes can be overridden
with flags that mirror the config field names.

Exit codes: 0 success, 1 data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import __version__
from .aggregate import (
    breakdown_meter,
    breakdown_mr_tb,
    breakdown_overall,
    breakdown_primary_use,
)
from .artifacts import (
    read_buildings,
    read_json,
    read_labels,
    read_panel,
    read_records,
    sha256_file,
    write_breakdowns,
    write_buildings,
    write_json,
    write_labels,
    write_matrix,
    write_panel,
    write_records,
)
from .classify import classify_all
from .core import AnalysisConfig, ConfigError, MeterKind, PipelineError
from .ingest import ExclusionList, align, load_actuals, load_metadata, load_row_id_map, load_submission
from .metrics import POOLING_MODES, QuartileSummary, ScalerParams, daily_errors, quartiles, scale_records
from .report import build_heatmap, render_heatmap, render_legend, render_summary

THREADS_ENV_VAR = "RESIDUAL_SCREEN_THREADS"

MANIFEST_NAME = "manifest.json"


@dataclass
class RunConfig:
    """Resolved run configuration: input paths, period, output, switches."""

    actuals: Path
    metadata: Path
    submissions: list[Path]
    row_id_map: Path
    period_start: date
    period_end: date
    output_dir: Path
    exclusions: Path | None = None
    exclude_site_ids: list[int] = field(default_factory=list)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    pooling_mode: str = "pooled"
    quantile_rule: str = "linear"
    threads: int = 1

    def validate(self) -> None:
        for name, path in (
            ("actuals", self.actuals),
            ("metadata", self.metadata),
            ("row_id_map", self.row_id_map),
        ):
            if not path.exists():
                raise ConfigError(f"{name} file not found: {path}")
        if self.exclusions is not None and not self.exclusions.exists():
            raise ConfigError(f"exclusions file not found: {self.exclusions}")
        if not self.submissions:
            raise ConfigError("no submission files configured")
        for path in self.submissions:
            if not path.exists():
                raise ConfigError(f"submission file not found: {path}")
        if self.period_start > self.period_end:
            raise ConfigError(f"period start {self.period_start} is after end {self.period_end}")
        if self.pooling_mode not in POOLING_MODES:
            raise ConfigError(f"unknown pooling_mode {self.pooling_mode!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def semantic_echo(self) -> dict:
        """The analysis-relevant config: excludes paths and thread count
        so identical inputs hash identically wherever they live."""
        return {
            "analysis": self.analysis.to_dict(),
            "period_start": self.period_start.isoformat(),
            "period_end": self.period_end.isoformat(),
            "pooling_mode": self.pooling_mode,
            "quantile_rule": self.quantile_rule,
            "exclude_site_ids": sorted(self.exclude_site_ids),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.semantic_echo(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

    @property
    def period(self) -> tuple[date, date]:
        return (self.period_start, self.period_end)


def load_config(path: Path, overrides: argparse.Namespace | None = None) -> RunConfig:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        submissions = raw["submissions"]
        if isinstance(submissions, str):
            sub_dir = resolve(submissions)
            if not sub_dir.is_dir():
                raise ConfigError(f"submissions directory not found: {sub_dir}")
            sub_paths = sorted(sub_dir.glob("*.csv"))
        else:
            sub_paths = [resolve(p) for p in submissions]
        analysis_kwargs = dict(raw.get("analysis", {}))
        cfg = RunConfig(
            actuals=resolve(raw["actuals"]),
            metadata=resolve(raw["metadata"]),
            submissions=sub_paths,
            row_id_map=resolve(raw["row_id_map"]),
            period_start=date.fromisoformat(raw["period_start"]),
            period_end=date.fromisoformat(raw["period_end"]),
            output_dir=resolve(raw["output_dir"]),
            exclusions=resolve(raw["exclusions"]) if raw.get("exclusions") else None,
            exclude_site_ids=list(raw.get("exclude_site_ids", [])),
            analysis=AnalysisConfig(**analysis_kwargs),
            pooling_mode=raw.get("pooling_mode", "pooled"),
            quantile_rule=raw.get("quantile_rule", "linear"),
            threads=int(raw.get("threads", 1)),
        )
    except KeyError as exc:
        raise ConfigError(f"config file {path} is missing required key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config file {path}: {exc}") from None

    if overrides is not None:
        cfg = _apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


_ANALYSIS_FLAGS = (
    "good_fit_max",
    "out_of_range_min",
    "reach_fraction",
    "window_days",
    "short_term_fraction",
    "long_run_min_days",
    "medium_run_max_days",
)


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    analysis_over = {
        name: getattr(args, name)
        for name in _ANALYSIS_FLAGS
        if getattr(args, name, None) is not None
    }
    if analysis_over:
        merged = {**cfg.analysis.to_dict(), **analysis_over}
        cfg.analysis = AnalysisConfig(**merged)
    if getattr(args, "output_dir", None) is not None:
        cfg.output_dir = Path(args.output_dir)
    if getattr(args, "pooling_mode", None) is not None:
        cfg.pooling_mode = args.pooling_mode
    if getattr(args, "quantile_rule", None) is not None:
        cfg.quantile_rule = args.quantile_rule
    threads = getattr(args, "threads", None)
    if threads is None:
        env = os.environ.get(THREADS_ENV_VAR)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from None
    if threads is not None:
        cfg.threads = threads
    return cfg


class _Tracker:
    """Records files written by a run so failures can clean up."""

    def __init__(self, output_dir: Path):
        self.output_dir = output_dir
        self.created: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.output_dir / name
        self.created.append(p)
        return p

    def discard_all(self) -> None:
        for p in self.created:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _update_manifest(out_dir: Path, tracker: _Tracker, **sections) -> None:
    path = out_dir / MANIFEST_NAME
    manifest = read_json(path) if path.exists() else {}
    manifest["tool"] = "residual-screen"
    manifest["version"] = __version__
    manifest.update({k: v for k, v in sections.items() if k != "outputs"})
    if "outputs" in sections:
        outputs = manifest.get("outputs", {})
        outputs.update(sections["outputs"])
        manifest["outputs"] = outputs
    if path not in tracker.created:
        tracker.created.append(path)
    write_json(path, manifest)


def _digest_outputs(paths: list[Path]) -> dict:
    return {p.name: sha256_file(p) for p in paths}


def stage_ingest(cfg: RunConfig, tracker: _Tracker):
    """Load and align the inputs; write the panel, buildings, and report."""
    metadata = load_metadata(cfg.metadata)
    exclusions = ExclusionList.empty()
    if cfg.exclusions is not None:
        exclusions = ExclusionList.from_file(cfg.exclusions)
    if cfg.exclude_site_ids:
        exclusions = exclusions.with_sites(cfg.exclude_site_ids).expand(metadata)

    series, actual_stats = load_actuals(cfg.actuals, exclusions, metadata)
    row_map = load_row_id_map(cfg.row_id_map)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            submissions = list(pool.map(lambda p: load_submission(p, row_map), cfg.submissions))
    else:
        submissions = [load_submission(p, row_map) for p in cfg.submissions]
    panel = align(series, submissions, cfg.period)

    report = {
        "actuals": {**actual_stats.to_dict(), "series": len(series)},
        "metadata": {"buildings": len(metadata)},
        "submissions": {
            s.submission_id: {
                "rows": s.row_count,
                "retained": s.retained_count,
                "removed_negative": s.removed_count,
                "dropped_unparseable": s.dropped_count,
            }
            for s in sorted(submissions, key=lambda s: s.submission_id)
        },
    }

    written = write_panel(panel, tracker.output_dir)
    tracker.created.extend(written)
    buildings_path = tracker.path("buildings.csv")
    write_buildings(metadata, buildings_path)
    report_path = tracker.path("ingest_report.json")
    write_json(report_path, report)

    inputs = {
        "actuals": sha256_file(cfg.actuals),
        "metadata": sha256_file(cfg.metadata),
        "row_id_map": sha256_file(cfg.row_id_map),
        "submissions": {p.stem: sha256_file(p) for p in cfg.submissions},
    }
    if cfg.exclusions is not None:
        inputs["exclusions"] = sha256_file(cfg.exclusions)
    _update_manifest(
        tracker.output_dir,
        tracker,
        config=cfg.semantic_echo(),
        config_hash=cfg.config_hash(),
        inputs=inputs,
        outputs=_digest_outputs(written + [buildings_path, report_path]),
    )
    return metadata, panel


def stage_score(cfg: RunConfig, tracker: _Tracker, metadata=None, panel=None):
    """Pool daily errors, fit and apply the per-kind scalers."""
    if metadata is None:
        metadata = read_buildings(tracker.output_dir / "buildings.csv")
    if panel is None:
        panel = read_panel(tracker.output_dir, metadata, cfg.period)
    records = daily_errors(panel, mode=cfg.pooling_mode)
    scaled, scalers = scale_records(records)
    summaries = {}
    for kind in MeterKind:
        of_kind = [r for r in scaled if r.kind is kind]
        if len(of_kind) >= 4:
            summaries[kind] = quartiles(of_kind, rule=cfg.quantile_rule)

    records_path = tracker.path("daily_errors.csv")
    write_records(scaled, records_path)
    _update_manifest(
        tracker.output_dir,
        tracker,
        scalers={
            k.label: {"min_value": p.min_value, "max_value": p.max_value}
            for k, p in sorted(scalers.items(), key=lambda kv: kv[0].code)
        },
        quartiles={
            k.label: {"q1": q.q1, "q2": q.q2, "q3": q.q3, "iqr": q.iqr, "upper_fence": q.upper_fence}
            for k, q in sorted(summaries.items(), key=lambda kv: kv[0].code)
        },
        outputs=_digest_outputs([records_path]),
    )
    return metadata, scaled


def stage_classify(cfg: RunConfig, tracker: _Tracker, metadata=None, records=None):
    """Assign the joint magnitude/reach and temporal labels."""
    if metadata is None:
        metadata = read_buildings(tracker.output_dir / "buildings.csv")
    if records is None:
        records = read_records(tracker.output_dir / "daily_errors.csv", metadata)
    labels = classify_all(records, metadata, cfg.analysis, cfg.period, threads=cfg.threads)
    labels_path = tracker.path("labels.csv")
    write_labels(labels, records, labels_path)
    _update_manifest(tracker.output_dir, tracker, outputs=_digest_outputs([labels_path]))
    return metadata, records, labels


def stage_aggregate(cfg: RunConfig, tracker: _Tracker, metadata=None, records=None, labels=None):
    """Compute every share table and write the CSV plus JSON mirror."""
    if metadata is None:
        metadata = read_buildings(tracker.output_dir / "buildings.csv")
    if records is None:
        records = read_records(tracker.output_dir / "daily_errors.csv", metadata)
    if labels is None:
        labels = read_labels(tracker.output_dir / "labels.csv", metadata)
    tables = (
        breakdown_mr_tb(labels, records)
        + breakdown_meter(labels, records)
        + breakdown_primary_use(labels, records)
        + breakdown_overall(labels, records)
    )
    csv_path = tracker.path("breakdowns.csv")
    json_path = tracker.path("breakdowns.json")
    write_breakdowns(tables, csv_path, json_path)
    _update_manifest(tracker.output_dir, tracker, outputs=_digest_outputs([csv_path, json_path]))
    return metadata, records, labels, tables


def stage_render(cfg: RunConfig, tracker: _Tracker, metadata=None, records=None, labels=None, tables=None):
    """Write heat-map matrices, SVG renders, the legend, and the summary."""
    if metadata is None:
        metadata = read_buildings(tracker.output_dir / "buildings.csv")
    if records is None:
        records = read_records(tracker.output_dir / "daily_errors.csv", metadata)
    if labels is None:
        labels = read_labels(tracker.output_dir / "labels.csv", metadata)
    if tables is None:
        _, _, _, tables = stage_aggregate(cfg, tracker, metadata, records, labels)

    written = []
    targets = sorted(
        {(r.kind, r.building.site_id) for r in records}, key=lambda t: (t[0].code, t[1])
    )
    for kind, site_id in targets:
        matrix = build_heatmap(labels, records, site_id, kind, cfg.period)
        matrix_path = tracker.path(f"site{site_id}_{kind.label}_matrix.csv")
        write_matrix(matrix, matrix_path)
        svg_path = tracker.path(f"site{site_id}_{kind.label}_heatmap.svg")
        svg_path.write_bytes(render_heatmap(matrix))
        written += [matrix_path, svg_path]

    legend_path = tracker.path("legend.svg")
    legend_path.write_bytes(render_legend())
    written.append(legend_path)

    manifest_path = tracker.output_dir / MANIFEST_NAME
    manifest = read_json(manifest_path) if manifest_path.exists() else {}
    scalers = {
        MeterKind.parse(k): ScalerParams(MeterKind.parse(k), v["min_value"], v["max_value"])
        for k, v in manifest.get("scalers", {}).items()
    }
    summaries = {
        MeterKind.parse(k): QuartileSummary(
            MeterKind.parse(k), v["q1"], v["q2"], v["q3"], v["iqr"], v["upper_fence"]
        )
        for k, v in manifest.get("quartiles", {}).items()
    }
    summary = render_summary(
        tables,
        cfg.analysis,
        scalers=scalers or None,
        quartile_summaries=summaries or None,
        pooling_mode=cfg.pooling_mode,
        quantile_rule=cfg.quantile_rule,
        tool_version=__version__,
    )
    summary_path = tracker.path("summary.txt")
    summary_path.write_text(summary)
    written.append(summary_path)
    _update_manifest(tracker.output_dir, tracker, outputs=_digest_outputs(written))


def run_pipeline(cfg: RunConfig) -> None:
    """Execute all stages; on any failure remove the files written so far."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    tracker = _Tracker(cfg.output_dir)
    try:
        metadata, panel = stage_ingest(cfg, tracker)
        metadata, records = stage_score(cfg, tracker, metadata, panel)
        metadata, records, labels = stage_classify(cfg, tracker, metadata, records)
        metadata, records, labels, tables = stage_aggregate(cfg, tracker, metadata, records, labels)
        stage_render(cfg, tracker, metadata, records, labels, tables)
    except Exception:
        tracker.discard_all()
        raise


_STAGES = {
    "ingest": lambda cfg, tr: stage_ingest(cfg, tr),
    "score": lambda cfg, tr: stage_score(cfg, tr),
    "classify": lambda cfg, tr: stage_classify(cfg, tr),
    "aggregate": lambda cfg, tr: stage_aggregate(cfg, tr),
    "render": lambda cfg, tr: stage_render(cfg, tr),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="residual-screen",
        description="Screen daily prediction residuals of a building fleet into error categories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    common.add_argument("--output-dir", type=Path, help="override the configured output directory")
    common.add_argument("--threads", type=int, help=f"worker cap (or {THREADS_ENV_VAR})")
    common.add_argument("--good-fit-max", dest="good_fit_max", type=float)
    common.add_argument("--out-of-range-min", dest="out_of_range_min", type=float)
    common.add_argument("--reach-fraction", dest="reach_fraction", type=str)
    common.add_argument("--window-days", dest="window_days", type=int)
    common.add_argument("--short-term-fraction", dest="short_term_fraction", type=str)
    common.add_argument("--long-run-min-days", dest="long_run_min_days", type=int)
    common.add_argument("--medium-run-max-days", dest="medium_run_max_days", type=int)
    common.add_argument("--pooling-mode", dest="pooling_mode", choices=POOLING_MODES)
    common.add_argument("--quantile-rule", dest="quantile_rule", type=str)
    sub.add_parser("run", parents=[common], help="execute the full pipeline")
    for name in _STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage only")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        if args.command == "run":
            run_pipeline(cfg)
        else:
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
            tracker = _Tracker(cfg.output_dir)
            try:
                _STAGES[args.command](cfg, tracker)
            except Exception:
                tracker.discard_all()
                raise
    except ConfigError as exc:
        print(f"residual-screen: config error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"residual-screen: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"residual-screen: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
