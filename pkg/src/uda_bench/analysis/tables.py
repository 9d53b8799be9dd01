"""Oracle-vs-validator gap tables and the macro/micro accuracy table."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from uda_bench.models.records import Datapoint, SourceOnlyTable
from uda_bench.validators.thresholds import group_by_task, threshold_filter

ORACLE = "oracle"


def best_selected(points: Sequence[Datapoint], validator: str) -> Datapoint | None:
    """The checkpoint with the highest valid ``validator`` score; the oracle
    selects by target-train accuracy itself."""
    if validator == ORACLE:
        return max(points, key=lambda p: p.tgt_train_acc, default=None)
    best: Datapoint | None = None
    for point in points:
        score = point.score(validator)
        if not score.valid:
            continue
        if best is None or score.rank_key() > best.score(validator).rank_key():
            best = point
    return best


def _selected_accuracy(points: Sequence[Datapoint], validator: str) -> float | None:
    best = best_selected(points, validator)
    return None if best is None else best.tgt_train_acc


@dataclass
class GapTable:
    """Best target-train accuracy per (setting, validator, column).

    ``columns`` are task names; ``None`` marks a cell whose pool is empty.
    """

    validators: list[str]
    columns: list[str]
    settings: dict[str, float | None]
    cells: dict[str, dict[str, dict[str, float | None]]] = field(default_factory=dict)

    def oracle(self, setting: str, column: str) -> float | None:
        return self.cells[setting][ORACLE][column]

    def gap(self, setting: str, validator: str, column: str) -> float | None:
        oracle = self.oracle(setting, column)
        selected = self.cells[setting][validator][column]
        if oracle is None or selected is None:
            return None
        return oracle - selected


def gap_table(
    points: Sequence[Datapoint],
    source_only: SourceOnlyTable,
    validators: Sequence[str],
    thresholds: Mapping[str, float | None],
) -> GapTable:
    """For every threshold setting, filter each task's pool and report the
    target-train accuracy of the checkpoint each validator selects."""
    by_task = group_by_task(points)
    tasks = sorted(by_task)
    names = [ORACLE] + [v for v in validators if v != ORACLE]
    table = GapTable(validators=names, columns=tasks, settings=dict(thresholds))
    for setting, threshold in thresholds.items():
        table.cells[setting] = {v: {} for v in names}
        for task in tasks:
            pool = threshold_filter(by_task[task], threshold, source_only)
            for validator in names:
                table.cells[setting][validator][task] = _selected_accuracy(pool, validator)
    return table


@dataclass
class AlgorithmGapTable:
    """Mean and sample std across tasks of the oracle gap, per algorithm."""

    validators: list[str]
    algorithms: list[str]
    settings: dict[str, float | None]
    mean: dict[str, dict[str, dict[str, float | None]]] = field(default_factory=dict)
    std: dict[str, dict[str, dict[str, float | None]]] = field(default_factory=dict)


def algorithm_gap_table(
    points: Sequence[Datapoint],
    source_only: SourceOnlyTable,
    validators: Sequence[str],
    thresholds: Mapping[str, float | None],
) -> AlgorithmGapTable:
    """The gap computed within each algorithm's own checkpoints."""
    algorithms = sorted({p.algorithm for p in points})
    names = [v for v in validators if v != ORACLE]
    table = AlgorithmGapTable(validators=names, algorithms=algorithms, settings=dict(thresholds))
    for setting, threshold in thresholds.items():
        table.mean[setting] = {v: {} for v in names}
        table.std[setting] = {v: {} for v in names}
        for algorithm in algorithms:
            own = gap_table(
                [p for p in points if p.algorithm == algorithm],
                source_only,
                names,
                {setting: threshold},
            )
            for validator in names:
                gaps = [
                    g
                    for task in own.columns
                    if (g := own.gap(setting, validator, task)) is not None
                ]
                table.mean[setting][validator][algorithm] = (
                    float(np.mean(gaps)) if gaps else None
                )
                table.std[setting][validator][algorithm] = (
                    float(np.std(gaps, ddof=1)) if len(gaps) > 1 else None
                )
    return table


ACCURACY_FIELDS = {
    ("train", "macro"): "tgt_train_acc",
    ("train", "micro"): "tgt_train_acc_micro",
    ("val", "macro"): "tgt_val_acc",
    ("val", "micro"): "tgt_val_acc_micro",
}


@dataclass
class MacroMicroTable:
    """Target accuracy per (split, averaging mode), averaged first over the
    methods of a task that beat its source-only model, then over tasks."""

    values: dict[tuple[str, str], float | None]
    methods_per_task: dict[str, list[str]]


def macro_micro_table(
    points: Sequence[Datapoint], source_only: SourceOnlyTable
) -> MacroMicroTable:
    """Each method is represented by its oracle-selected checkpoint."""
    per_task: dict[str, list[Datapoint]] = {}
    methods: dict[str, list[str]] = {}
    for task, pool in sorted(group_by_task(points).items()):
        reference = source_only.references.get(task)
        for algorithm in sorted({p.algorithm for p in pool}):
            best = best_selected([p for p in pool if p.algorithm == algorithm], ORACLE)
            if best is None:
                continue
            if reference is not None and best.tgt_train_acc <= reference.tgt_train_acc:
                continue
            per_task.setdefault(task, []).append(best)
            methods.setdefault(task, []).append(algorithm)

    values: dict[tuple[str, str], float | None] = {}
    for key, attribute in ACCURACY_FIELDS.items():
        task_means = [
            float(np.mean([getattr(p, attribute) for p in winners]))
            for winners in per_task.values()
        ]
        values[key] = float(np.mean(task_means)) if task_means else None
    return MacroMicroTable(values=values, methods_per_task=methods)
