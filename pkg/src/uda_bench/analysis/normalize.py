"""Flattening records into datapoints and per-task normalization."""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from uda_bench.models.records import Datapoint, SourceOnlyTable, TrialRecord
from uda_bench.utils.ui import display
from uda_bench.validators.thresholds import normalized_source_accuracy


def flatten(records: Iterable[TrialRecord]) -> list[Datapoint]:
    """One datapoint per checkpoint, failed trials included."""
    return [Datapoint.of(record, checkpoint) for record in records for checkpoint in record.checkpoints]


def min_max(values: Sequence[float]) -> tuple[list[float], bool]:
    """Scale to [0, 1]; a constant vector maps to zeros and is flagged."""
    array = np.asarray(values, dtype=np.float64)
    low, high = array.min(), array.max()
    if high == low:
        return [0.0] * len(array), True
    return [float(v) for v in (array - low) / (high - low)], False


@dataclass(frozen=True)
class NormalizedPoint:
    """A datapoint with scores min-max normalized per (validator, task),
    target accuracy max-normalized per task and source accuracy relative to
    the source-only model. Invalid scores are absent from ``scores``."""

    point: Datapoint
    scores: dict[str, float]
    target: float
    source: float

    @property
    def task(self) -> str:
        return self.point.task

    def axis(self, name: str) -> float:
        return self.source if name == "source" else self.target


@dataclass
class Normalization:
    points: list[NormalizedPoint]
    dropped: dict[str, int] = field(default_factory=dict)
    degenerate: set[tuple[str, str]] = field(default_factory=set)


def normalize(
    points: Sequence[Datapoint],
    source_only: SourceOnlyTable,
    validators: Sequence[str],
) -> Normalization:
    """Normalize ``points`` task by task.

    Invalid scores are excluded from the min/max and dropped; the per
    validator drop counts are reported.
    """
    by_task: dict[str, list[int]] = {}
    for i, point in enumerate(points):
        by_task.setdefault(point.task, []).append(i)

    scores: list[dict[str, float]] = [{} for _ in points]
    targets = [0.0] * len(points)
    result = Normalization(points=[])
    for task, members in sorted(by_task.items()):
        best_target = max(points[i].tgt_train_acc for i in members)
        for i in members:
            targets[i] = points[i].tgt_train_acc / best_target if best_target > 0 else 0.0
        for validator in validators:
            valid = [i for i in members if points[i].score(validator).valid]
            dropped = len(members) - len(valid)
            if dropped:
                result.dropped[validator] = result.dropped.get(validator, 0) + dropped
            if not valid:
                continue
            raw = [points[i].score(validator).value for i in valid]
            scaled, degenerate = min_max([v for v in raw if v is not None])
            if degenerate:
                result.degenerate.add((validator, task))
            for i, value in zip(valid, scaled):
                scores[i][validator] = value

    for validator, count in sorted(result.dropped.items()):
        display.warning(f"Dropped {count} invalid {validator} score(s) during normalization")
    result.points = [
        NormalizedPoint(
            point=point,
            scores=scores[i],
            target=targets[i],
            source=normalized_source_accuracy(point, source_only),
        )
        for i, point in enumerate(points)
    ]
    return result
