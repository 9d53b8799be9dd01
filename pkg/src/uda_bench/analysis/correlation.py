"""Spearman correlation of validator scores with target accuracy."""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.stats import rankdata

from uda_bench.analysis.normalize import NormalizedPoint
from uda_bench.utils.exceptions import InputError
from uda_bench.utils.ui import display

Axis = Literal["source", "target"]

DEFAULT_THRESHOLDS = tuple(round(0.02 * i, 2) for i in range(56))


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation of average ranks; ``None`` when either side is
    constant."""
    if len(x) != len(y):
        raise InputError(f"spearman needs equal lengths, got {len(x)} and {len(y)}")
    if len(x) < 2:
        raise InputError("spearman needs at least 2 pairs")
    rx = rankdata(x) - (len(x) + 1) / 2.0
    ry = rankdata(y) - (len(y) + 1) / 2.0
    denominator = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denominator == 0.0:
        return None
    return float(np.clip((rx * ry).sum() / denominator, -1.0, 1.0))


def task_correlation(points: Sequence[NormalizedPoint], validator: str) -> float | None:
    """Correlation between normalized score and normalized target accuracy."""
    scored = [p for p in points if validator in p.scores]
    if len(scored) < 2:
        return None
    return spearman([p.scores[validator] for p in scored], [p.target for p in scored])


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    per_task: dict[str, float | None]
    mean: float | None
    std: float | None
    excluded: int


@dataclass(frozen=True)
class CorrelationCurve:
    validator: str
    axis: Axis
    tasks: list[str]
    points: list[CurvePoint]


def correlation_vs_threshold(
    points: Sequence[NormalizedPoint],
    validator: str,
    axis: Axis = "source",
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> CorrelationCurve:
    """Per-task Spearman after keeping points whose normalized accuracy on
    ``axis`` exceeds each threshold, with the mean and sample std across tasks.

    Tasks emptied or made degenerate by the filter are excluded from the
    aggregate and counted.
    """
    tasks = sorted({p.task for p in points})
    curve = []
    for threshold in thresholds:
        per_task: dict[str, float | None] = {}
        for task in tasks:
            kept = [
                p
                for p in points
                if p.task == task and (threshold <= 0.0 or p.axis(axis) > threshold)
            ]
            per_task[task] = task_correlation(kept, validator)
        present = [v for v in per_task.values() if v is not None]
        excluded = len(tasks) - len(present)
        curve.append(
            CurvePoint(
                threshold=float(threshold),
                per_task=per_task,
                mean=float(np.mean(present)) if present else None,
                std=float(np.std(present, ddof=1)) if len(present) > 1 else None,
                excluded=excluded,
            )
        )
    total_excluded = sum(c.excluded for c in curve)
    if total_excluded:
        display.warning(
            f"{validator}/{axis}: {total_excluded} task curve point(s) excluded "
            "(too few or constant points after filtering)"
        )
    return CorrelationCurve(validator=validator, axis=axis, tasks=tasks, points=curve)
