"""Residual error screening for building energy prediction fleets.

Pools hourly prediction residuals into daily RMSLE scores per building
meter, min-max scales them per meter kind, classifies every building-day
into magnitude/reach and temporal-behavior error categories, and emits
share tables plus heat-map reports.
"""

__version__ = "0.1.0"

from .core import (
    CATEGORY_CODES,
    NO_DATA_CODE,
    AnalysisConfig,
    BuildingRef,
    ConfigError,
    DailyErrorRecord,
    DataError,
    ErrorLabel,
    MagnitudeBand,
    MeterKind,
    MRLabel,
    PipelineError,
    TBLabel,
    category_code,
    day_span,
)
from .metrics import (
    QuartileSummary,
    ScalerParams,
    apply_scaler,
    daily_errors,
    fit_scaler,
    quartiles,
    rmsle,
    scale_records,
    score_group,
)
from .classify import band_of, classify_all, modulation_pass, mr_labels, reach, runs, tb_from_run
from .ingest import (
    AlignedPanel,
    ExclusionList,
    MeterSeries,
    PanelGroup,
    RowIdMap,
    SubmissionSet,
    align,
    load_actuals,
    load_metadata,
    load_row_id_map,
    load_submission,
)
from .aggregate import (
    BreakdownTable,
    breakdown_meter,
    breakdown_mr_tb,
    breakdown_overall,
    breakdown_primary_use,
    recompose,
)
from .report import (
    PALETTE,
    HeatmapMatrix,
    HeatmapStyle,
    build_heatmap,
    render_heatmap,
    render_legend,
    render_summary,
)
from .oracle import Anomaly, SyntheticScenario, brute_force_classify, generate, random_fleet
