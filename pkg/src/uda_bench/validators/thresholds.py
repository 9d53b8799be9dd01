"""Source-accuracy thresholding of checkpoints."""

from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from uda_bench.models.records import Datapoint, SourceOnlyTable
from uda_bench.utils.exceptions import ConfigurationError, InputError


def normalized_source_accuracy(point: Datapoint, source_only: SourceOnlyTable) -> float:
    """Source-val accuracy relative to the task's source-only model."""
    reference = source_only.src_val_acc(point.task)
    if reference is None:
        raise ConfigurationError(f"no source-only reference for task {point.task!r}")
    if reference <= 0.0:
        raise ConfigurationError(
            f"source-only accuracy of task {point.task!r} is {reference}"
        )
    return point.src_val_acc / reference


def threshold_filter(
    points: Iterable[Datapoint], threshold: float | None, source_only: SourceOnlyTable
) -> list[Datapoint]:
    """Keep checkpoints whose normalized source accuracy exceeds ``threshold``.

    ``None`` or a non-positive threshold keeps everything. The result may be
    empty.
    """
    points = list(points)
    if threshold is None or threshold <= 0.0:
        return points
    return [p for p in points if normalized_source_accuracy(p, source_only) > threshold]


def derive_threshold(
    groups: Mapping[str, Sequence[Datapoint]], source_only: SourceOnlyTable
) -> float:
    """Mean normalized source accuracy of each task's best-target checkpoint."""
    if not groups:
        raise InputError("cannot derive a threshold without any task")
    values = []
    for task, points in sorted(groups.items()):
        if not points:
            raise InputError(f"task {task!r} has no checkpoints")
        best = max(points, key=lambda p: p.tgt_train_acc)
        values.append(normalized_source_accuracy(best, source_only))
    return float(np.mean(values))


def group_by_task(points: Iterable[Datapoint]) -> dict[str, list[Datapoint]]:
    groups: dict[str, list[Datapoint]] = {}
    for point in points:
        groups.setdefault(point.task, []).append(point)
    return groups
