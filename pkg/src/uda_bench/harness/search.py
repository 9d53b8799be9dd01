"""Random hyperparameter search over UDA trials."""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import anyio
import anyio.to_process
import numpy as np

from uda_bench.algorithms.spaces import search_space_for
from uda_bench.datasets.tasks import TaskData
from uda_bench.diffcore import RngStream
from uda_bench.harness.store import append_record
from uda_bench.harness.trainer import Trainer, run_trial, source_only_reference
from uda_bench.models.config import (
    LR_RANGE,
    AlgorithmConfig,
    BenchConfig,
    Distribution,
    FeatureLayer,
    SearchSpace,
    TrialConfig,
)
from uda_bench.models.records import CheckpointEntry, SourceOnlyReference, TrialRecord
from uda_bench.networks import ModelBundle
from uda_bench.utils.exceptions import ExceptionGroup, SearchError, unwrap_group
from uda_bench.utils.ui import display

LR_DISTRIBUTION = Distribution(kind="log_uniform", low=LR_RANGE[0], high=LR_RANGE[1])


def sample_value(
    distribution: Distribution, rng: RngStream, size: int | None = None
) -> float | np.ndarray:
    """Draw from one search dimension; ``size`` returns an array of draws."""
    shape = None if size is None else (size,)
    if distribution.kind == "uniform":
        draw = rng.uniform(distribution.low, distribution.high, shape)
    elif distribution.kind == "log_uniform":
        draw = np.exp(rng.uniform(math.log(distribution.low), math.log(distribution.high), shape))
        draw = np.clip(draw, distribution.low, distribution.high)
    else:
        grid = np.arange(distribution.low, distribution.high + 0.5, distribution.step)
        draw = grid[rng.integers(0, len(grid), shape)]
    return float(draw) if size is None else np.asarray(draw, dtype=np.float64)


def sample_hyperparams(
    space: SearchSpace, rng: RngStream, frozen: dict[str, float] | None = None
) -> AlgorithmConfig:
    """Draw every hyperparameter independently from its own stream."""
    hparams = {
        name: float(sample_value(distribution, rng.child(name)))
        for name, distribution in space.params.items()
    }
    return AlgorithmConfig(algorithm=space.algorithm, hparams=hparams, frozen=frozen or {})


def plan_trials(
    algorithm: str,
    data: TaskData,
    n_trials: int,
    master_seed: int,
    bench: BenchConfig,
    feature_layer: FeatureLayer = FeatureLayer.FL0,
    frozen: dict[str, float] | None = None,
) -> list[TrialConfig]:
    """Trial configs, a pure function of the master seed and arguments."""
    space = search_space_for(algorithm)
    rng = RngStream(master_seed, ("search", data.spec.name, algorithm, feature_layer.value))
    plans = []
    for trial_id in range(n_trials):
        trial = rng.child("trial", str(trial_id))
        plans.append(
            TrialConfig(
                trial_id=trial_id,
                task=data.spec,
                algorithm=sample_hyperparams(space, trial.child("hparams"), frozen),
                feature_layer=feature_layer,
                lr_max=float(sample_value(LR_DISTRIBUTION, trial.child("lr"))),
                seed=trial.child("seed").draw_seed(),
                budget=bench.budget,
                models=bench.models,
                validators=bench.validators,
                source_only=bench.source_only,
            )
        )
    return plans


@dataclass(frozen=True)
class Selection:
    """The trial and checkpoint a validator ranks highest."""

    validator: str
    trial_id: int
    config: TrialConfig
    checkpoint: CheckpointEntry


@dataclass
class SearchResult:
    records: list[TrialRecord]
    best: dict[str, Selection | None]
    source_only: SourceOnlyReference
    source_only_bundle: ModelBundle = field(repr=False)


def select_best(records: Sequence[TrialRecord], validator: str) -> Selection | None:
    """Highest valid score over every checkpoint of every trial; first wins ties."""
    best: Selection | None = None
    for record in records:
        checkpoint = record.best_checkpoint(validator)
        if checkpoint is None or not checkpoint.scores[validator].valid:
            continue
        if best is None or (
            checkpoint.scores[validator].rank_key()
            > best.checkpoint.scores[validator].rank_key()
        ):
            assert record.config is not None
            best = Selection(validator, record.trial_id, record.config, checkpoint)
    return best


def _run_job(config: TrialConfig, data: TaskData, source_only: ModelBundle, wallclock: bool) -> TrialRecord:
    return run_trial(config, data, source_only, wallclock).record


class _OrderedWriter:
    """Writes records in trial-id order whatever order they finish in."""

    def __init__(self, sink: Callable[[TrialRecord], None]):
        self.sink = sink
        self.pending: dict[int, TrialRecord] = {}
        self.next_id = 0
        self.written: list[TrialRecord] = []

    def __call__(self, record: TrialRecord) -> None:
        self.pending[record.trial_id] = record
        while self.next_id in self.pending:
            ready = self.pending.pop(self.next_id)
            self.sink(ready)
            self.written.append(ready)
            self.next_id += 1


def _run_parallel(
    plans: list[TrialConfig],
    data: TaskData,
    source_only: ModelBundle,
    workers: int,
    wallclock: bool,
    on_record: Callable[[TrialRecord], None],
) -> None:
    async def _main() -> None:
        limiter = anyio.CapacityLimiter(workers)

        async def _one(config: TrialConfig) -> None:
            record = await anyio.to_process.run_sync(
                _run_job, config, data, source_only, wallclock, limiter=limiter
            )
            on_record(record)

        async with anyio.create_task_group() as tg:
            for config in plans:
                tg.start_soon(_one, config)

    try:
        anyio.run(_main)
    except ExceptionGroup as eg:
        raise unwrap_group(eg) from eg


def random_search(
    algorithm: str,
    data: TaskData,
    n_trials: int,
    master_seed: int,
    bench: BenchConfig,
    records_path: Path | None = None,
    feature_layer: FeatureLayer = FeatureLayer.FL0,
    frozen: dict[str, float] | None = None,
    workers: int = 1,
    trainer: Trainer | None = None,
) -> SearchResult:
    """Pretrain the task's source-only model, run ``n_trials`` random trials
    from it and select the best checkpoint per validator.

    Raises:
        SearchError: If every trial failed.
    """
    if n_trials < 1:
        raise SearchError(f"need at least one trial, got {n_trials}")
    trainer = trainer or Trainer(bench.search.record_wallclock)
    plans = plan_trials(algorithm, data, n_trials, master_seed, bench, feature_layer, frozen)
    with display.create_spinner_progress(f"Pretraining source-only model on {data.spec.name}") as spinner:
        spinner.add_task("pretrain", total=None)
        source_only = trainer.pretrain(data, plans[0], seed=master_seed)
    reference = source_only_reference(source_only, data)

    sink: Callable[[TrialRecord], None] = (
        (lambda record: append_record(records_path, record)) if records_path else (lambda _: None)
    )
    with display.create_search_progress() as progress:
        task_id = progress.add_task(f"{algorithm} on {data.spec.name}", total=n_trials)
        writer = _OrderedWriter(sink)

        def on_record(record: TrialRecord) -> None:
            writer(record)
            progress.advance(task_id)

        if workers > 1:
            trainer.uda_runs += len(plans)
            _run_parallel(
                plans, data, source_only, workers, trainer.record_wallclock, on_record
            )
        else:
            for config in plans:
                record, _ = trainer.run(data, config, source_only)
                on_record(record)
    records = writer.written

    if all(r.status == "failed" for r in records):
        raise SearchError(f"all {n_trials} trials of {algorithm} on {data.spec.name} failed")
    failed = sum(r.status == "failed" for r in records)
    if failed:
        display.warning(f"{failed} of {n_trials} trials failed")
    best = {v: select_best(records, v) for v in bench.validators.enabled}
    return SearchResult(
        records=records, best=best, source_only=reference, source_only_bundle=source_only
    )


@dataclass(frozen=True)
class RerunSummary:
    """Target accuracy over the original run and its reruns.

    ``std`` is the sample standard deviation; with a single run it is 0 and
    ``std_defined`` is false.
    """

    values: list[float]
    mean: float
    std: float
    std_defined: bool


def summarize_runs(values: Sequence[float]) -> RerunSummary:
    array = np.asarray(values, dtype=np.float64)
    defined = len(array) > 1
    return RerunSummary(
        values=[float(v) for v in array],
        mean=float(array.mean()),
        std=float(array.std(ddof=1)) if defined else 0.0,
        std_defined=defined,
    )


def rerun_best(
    config: TrialConfig,
    data: TaskData,
    source_only: ModelBundle,
    n_repeats: int = 4,
    trainer: Trainer | None = None,
    same_seed: bool = False,
) -> RerunSummary:
    """Run ``config`` plus ``n_repeats`` freshly seeded copies and summarize
    the target-val accuracy at each run's selection-best checkpoint."""
    trainer = trainer or Trainer()
    rng = RngStream(config.seed, ("rerun",))
    configs = [config] + [
        config if same_seed else config.model_copy(update={"seed": rng.child(str(i)).draw_seed()})
        for i in range(n_repeats)
    ]
    values = []
    selection = config.validators.selection
    for run_config in configs:
        record, _ = trainer.run(data, run_config, source_only)
        checkpoint = record.best_checkpoint(selection)
        values.append(checkpoint.tgt_val_acc if checkpoint is not None else float("nan"))
    return summarize_runs(values)
