"""Normalization, rank correlation, gap tables and their emitters."""

from uda_bench.analysis.correlation import (
    DEFAULT_THRESHOLDS,
    CorrelationCurve,
    CurvePoint,
    correlation_vs_threshold,
    spearman,
    task_correlation,
)
from uda_bench.analysis.emit import TableData, emit, to_csv, to_markdown
from uda_bench.analysis.normalize import NormalizedPoint, flatten, min_max, normalize
from uda_bench.analysis.pipeline import render_report, resolve_threshold, run_analysis
from uda_bench.analysis.tables import (
    AlgorithmGapTable,
    GapTable,
    MacroMicroTable,
    algorithm_gap_table,
    best_selected,
    gap_table,
    macro_micro_table,
)

__all__ = [
    "DEFAULT_THRESHOLDS",
    "AlgorithmGapTable",
    "CorrelationCurve",
    "CurvePoint",
    "GapTable",
    "MacroMicroTable",
    "NormalizedPoint",
    "TableData",
    "algorithm_gap_table",
    "best_selected",
    "correlation_vs_threshold",
    "emit",
    "flatten",
    "gap_table",
    "macro_micro_table",
    "min_max",
    "normalize",
    "render_report",
    "resolve_threshold",
    "run_analysis",
    "spearman",
    "task_correlation",
    "to_csv",
    "to_markdown",
]
