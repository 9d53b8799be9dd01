"""Source-only pretraining and UDA trials."""

import time
from dataclasses import dataclass

import numpy as np

from uda_bench.algorithms.adapters import Adapter, Batch, compose_step, make_adapter
from uda_bench.datasets.tasks import TaskData
from uda_bench.diffcore import RngStream
from uda_bench.harness.schedule import EarlyStopper, onecycle_lr, paired_batches, steps_per_epoch
from uda_bench.models.config import (
    AlgorithmConfig,
    ModelSettings,
    SourceOnlySettings,
    TrialConfig,
)
from uda_bench.models.records import (
    CheckpointEntry,
    SourceOnlyReference,
    TrialRecord,
    TrialStatus,
    ValidationScore,
)
from uda_bench.networks import ModelBundle, build_source_only_bundle, predict
from uda_bench.utils.exceptions import NumericError
from uda_bench.utils.ui import display
from uda_bench.validators.scores import accuracy
from uda_bench.validators.snapshot import build_snapshot, score_snapshot

SOURCE_ONLY = AlgorithmConfig(algorithm="SourceOnly")


@dataclass
class TrialOutcome:
    """A trial's record and the model it hands on (selection-best when early
    stopping is on, otherwise the last one)."""

    record: TrialRecord
    bundle: ModelBundle


def _train_epoch(
    adapter: Adapter,
    config: AlgorithmConfig,
    bundle: ModelBundle,
    data: TaskData,
    epoch: int,
    step: int,
    total_steps: int,
    lr_max: float,
    batch_size: int,
    rng: RngStream,
) -> int:
    src = data.source_train()
    tgt = data.target_train()
    batches = paired_batches(len(src), len(tgt), batch_size, rng.child("batches", str(epoch)))
    for src_idx, tgt_idx in batches:
        batch = Batch(
            x_src=src.X[src_idx], y_src=src.y[src_idx], x_tgt=tgt.X[tgt_idx], tgt_indices=tgt_idx
        )
        lr = onecycle_lr(step, total_steps, lr_max)
        report = compose_step(config, bundle, batch, lr, rng.child("step", str(step)), adapter)
        total = report.values()["total"]
        if not np.isfinite(total):
            raise NumericError(f"loss diverged at step {step} (total {total})")
        step += 1
    return step


def _copy_state(bundle: ModelBundle) -> dict[str, np.ndarray]:
    return {key: value.copy() for key, value in bundle.state_dict().items()}


def train_source_only(
    data: TaskData,
    models: ModelSettings,
    settings: SourceOnlySettings,
    batch_size: int,
    rng: RngStream,
) -> tuple[ModelBundle, SourceOnlyReference]:
    """Train on labeled source data with early stopping on source-val macro
    accuracy; returns the best model and its reference accuracies."""
    bundle = build_source_only_bundle(data.input_dim, data.num_classes, models, rng.child("init"))
    adapter = make_adapter(SOURCE_ONLY, models, rng.child("adapter"))
    source_val = data.source_val()
    n_steps = settings.epochs * steps_per_epoch(
        len(data.splits.source_train), len(data.splits.target_train), batch_size
    )
    stopper = EarlyStopper(settings.patience)
    best_state = _copy_state(bundle)
    step = 0
    for epoch in range(1, settings.epochs + 1):
        step = _train_epoch(
            adapter, SOURCE_ONLY, bundle, data, epoch, step, n_steps, settings.lr, batch_size, rng
        )
        val_acc = accuracy(predict(bundle, source_val.X).preds, source_val.y, "macro")
        if stopper.update(ValidationScore.of("source_val", val_acc)):
            best_state = _copy_state(bundle)
        if stopper.should_stop:
            break
    bundle.load_state(best_state)
    return bundle, source_only_reference(bundle, data)


def _accuracies(bundle: ModelBundle, data: TaskData) -> dict[str, float]:
    out: dict[str, float] = {}
    for key, split in (
        ("src_val_acc", data.source_val()),
        ("tgt_train_acc", data.target_train()),
        ("tgt_val_acc", data.target_val()),
    ):
        preds = predict(bundle, split.X).preds
        out[key] = accuracy(preds, split.y, "macro")
        out[f"{key}_micro"] = accuracy(preds, split.y, "micro")
    return out


def source_only_reference(bundle: ModelBundle, data: TaskData) -> SourceOnlyReference:
    return SourceOnlyReference(task=data.spec.name, **_accuracies(bundle, data))


def evaluate_checkpoint(
    bundle: ModelBundle,
    data: TaskData,
    config: TrialConfig,
    checkpoint_id: int,
    step: int,
    rng: RngStream,
) -> CheckpointEntry:
    snapshot = build_snapshot(bundle, data, config.trial_id, checkpoint_id)
    scores = score_snapshot(
        snapshot, config.validators, rng.child("validators"), data.target_train().y
    )
    return CheckpointEntry(
        checkpoint_id=checkpoint_id, step=step, scores=scores, **_accuracies(bundle, data)
    )


def run_trial(
    config: TrialConfig,
    data: TaskData,
    source_only: ModelBundle,
    record_wallclock: bool = False,
) -> TrialOutcome:
    """Warm-start from ``source_only`` and train one UDA trial.

    Checkpoints are scored every ``val_interval`` epochs and after the last
    epoch. A diverging loss marks the trial failed; the checkpoints taken so
    far are kept.
    """
    started = time.perf_counter()
    rng = RngStream(config.seed, ("trial",))
    adapter = make_adapter(config.algorithm, config.models, rng.child("adapter"))
    bundle = adapter.build_bundle(source_only, config.feature_layer)
    adapter.prepare(bundle, data.target_train().X)

    budget = config.budget
    n_steps = budget.epochs * steps_per_epoch(
        len(data.splits.source_train), len(data.splits.target_train), budget.batch_size
    )
    stopper = EarlyStopper(budget.patience)
    selection = config.validators.selection
    checkpoints: list[CheckpointEntry] = []
    best_state: dict[str, np.ndarray] | None = None
    status: TrialStatus = "completed"
    error: str | None = None
    step = 0
    try:
        for epoch in range(1, budget.epochs + 1):
            step = _train_epoch(
                adapter,
                config.algorithm,
                bundle,
                data,
                epoch,
                step,
                n_steps,
                config.lr_max,
                budget.batch_size,
                rng,
            )
            if epoch % budget.val_interval and epoch != budget.epochs:
                continue
            entry = evaluate_checkpoint(
                bundle, data, config, len(checkpoints), epoch, rng.child("checkpoint", str(epoch))
            )
            checkpoints.append(entry)
            if stopper.update(entry.scores[selection]) or best_state is None:
                best_state = _copy_state(bundle)
            if config.early_stopping and stopper.should_stop:
                status = "early_stopped"
                break
    except NumericError as e:
        status = "failed"
        error = str(e)
        display.warning(
            f"Trial {config.trial_id} ({config.algorithm.algorithm}) failed: {e}"
        )

    if best_state is not None and (config.early_stopping or status == "failed"):
        bundle.load_state(best_state)
    record = TrialRecord(
        trial_id=config.trial_id,
        task=config.task.name,
        algorithm=config.algorithm.algorithm,
        feature_layer=config.feature_layer,
        hparams=config.algorithm.hparams,
        checkpoints=checkpoints,
        status=status,
        wallclock_s=time.perf_counter() - started if record_wallclock else 0.0,
        seed=config.seed,
        config=config,
        error=error,
    )
    return TrialOutcome(record=record, bundle=bundle)


class Trainer:
    """Runs pretraining and trials and counts how many it ran."""

    def __init__(self, record_wallclock: bool = False):
        self.record_wallclock = record_wallclock
        self.uda_runs = 0
        self.source_only_runs = 0

    def pretrain(
        self, data: TaskData, config: TrialConfig, seed: int | None = None
    ) -> ModelBundle:
        self.source_only_runs += 1
        rng = RngStream(config.seed if seed is None else seed, ("source-only", data.spec.name))
        bundle, _ = train_source_only(
            data, config.models, config.source_only, config.budget.batch_size, rng
        )
        return bundle

    def run(
        self, data: TaskData, config: TrialConfig, source_only: ModelBundle
    ) -> tuple[TrialRecord, ModelBundle]:
        self.uda_runs += 1
        outcome = run_trial(config, data, source_only, self.record_wallclock)
        return outcome.record, outcome.bundle
