"""Reverse validation: train forward, pseudo-label the target, train back."""

from typing import Protocol

import numpy as np

from uda_bench.datasets.domains import LabeledSet
from uda_bench.datasets.splits import SplitTable, split_per_class
from uda_bench.datasets.tasks import TaskData
from uda_bench.models.config import TrialConfig, ValidatorSettings
from uda_bench.models.records import ReverseValidationResult, TrialRecord, ValidationScore
from uda_bench.networks import ModelBundle, predict
from uda_bench.utils.exceptions import InputError, NumericError
from uda_bench.validators.scores import accuracy


class TrialRunner(Protocol):
    """Anything that can pretrain a source-only model and run a UDA trial."""

    def pretrain(self, data: TaskData, config: TrialConfig) -> ModelBundle: ...

    def run(
        self, data: TaskData, config: TrialConfig, source_only: ModelBundle
    ) -> tuple[TrialRecord, ModelBundle]: ...


def split_pseudo_labels(
    pseudo_labels: np.ndarray, seed: int, ratio: float
) -> tuple[list[int], list[int]]:
    """Per-class train/val cut of pseudo-labeled samples.

    A pseudo-class with a single member cannot be cut and goes to train.

    Raises:
        NumericError: If no pseudo-class has two members, leaving val empty.
    """
    counts = np.bincount(pseudo_labels)
    splittable = np.flatnonzero(counts[pseudo_labels] >= 2)
    singletons = np.flatnonzero(counts[pseudo_labels] < 2)
    if len(splittable) == 0:
        raise NumericError("pseudo-labels leave no class with two samples to split")
    train, val = split_per_class(pseudo_labels[splittable], seed, ratio, "reverse")
    train_idx = [int(i) for i in splittable[train]] + [int(i) for i in singletons]
    return sorted(train_idx), [int(i) for i in splittable[val]]


def reverse_task(data: TaskData, pseudo_labels: np.ndarray) -> TaskData:
    """Swap the domains: the pseudo-labeled target-train split becomes the source.

    ``pseudo_labels`` holds one label per ``target_train`` index, in order.
    Target-val samples are left out entirely; the new source is re-split per
    pseudo-class. The original source keeps its true labels as the new
    target, so the new ``target_val`` split is the original source-val split.

    Raises:
        InputError: If ``pseudo_labels`` does not match ``target_train``.
    """
    target_train = data.target_train()
    if len(pseudo_labels) != len(target_train):
        raise InputError(
            f"{len(pseudo_labels)} pseudo-labels for {len(target_train)} target-train samples"
        )
    pseudo_labels = np.asarray(pseudo_labels, dtype=np.int64)
    source = LabeledSet(target_train.X, pseudo_labels, "target-pseudo", data.num_classes)
    target = LabeledSet(data.source.X, data.source.y, "source", data.num_classes)
    source_train, source_val = split_pseudo_labels(
        pseudo_labels, data.spec.split_seed, data.spec.split_ratio
    )
    splits = SplitTable(
        source_train=source_train,
        source_val=source_val,
        target_train=data.splits.source_train,
        target_val=data.splits.source_val,
    )
    spec = data.spec.model_copy(update={"name": f"{data.spec.name}-reverse"})
    return TaskData(spec=spec, source=source, target=target, splits=splits)


def reverse_config(config: TrialConfig, data: TaskData) -> TrialConfig:
    """The reverse run trains for the full budget and never reads labels of
    its target (the original source) for selection."""
    return config.model_copy(
        update={
            "task": data.spec,
            "early_stopping": False,
            "validators": ValidatorSettings(enabled=["im"], selection="im"),
        }
    )


def reverse_validation(
    data: TaskData,
    config: TrialConfig,
    runner: TrialRunner,
    source_only: ModelBundle | None = None,
) -> ReverseValidationResult:
    """Score ``config`` by the source-val macro accuracy of a reverse model.

    Runs two UDA trainings: the forward trial and the reverse one. The
    forward trial starts from ``source_only`` when given, which must be the
    model the search warm-started its trials from for the forward run to
    reproduce the recorded one; otherwise the runner pretrains one.
    """
    if source_only is None:
        source_only = runner.pretrain(data, config)
    forward_record, forward = runner.run(data, config, source_only)
    if not forward_record.checkpoints:
        raise NumericError(f"forward trial {config.trial_id} produced no checkpoint")
    pseudo_labels = predict(forward, data.target_train().X).preds.argmax(axis=1)

    reversed_data = reverse_task(data, pseudo_labels)
    backward_config = reverse_config(config, reversed_data)
    reverse_source_only = runner.pretrain(reversed_data, backward_config)
    _, reverse_model = runner.run(reversed_data, backward_config, reverse_source_only)

    source_val = reversed_data.target_val()
    value = accuracy(predict(reverse_model, source_val.X).preds, source_val.y, "macro")
    forward_target_val = data.target_val()
    return ReverseValidationResult(
        task=data.spec.name,
        algorithm=config.algorithm.algorithm,
        trial_id=config.trial_id,
        score=ValidationScore.of("reverse", value),
        forward_tgt_val_acc=accuracy(
            predict(forward, forward_target_val.X).preds, forward_target_val.y, "macro"
        ),
        training_runs=2,
    )
