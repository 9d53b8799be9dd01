"""Entry point for the uda-bench CLI."""

import os
from collections.abc import Callable
from pathlib import Path
from typing import TypeVar

import typer

from uda_bench.algorithms.spaces import ALGORITHM_IDS, split_combination
from uda_bench.analysis.pipeline import render_report, run_analysis
from uda_bench.datasets.matrix_io import save_csv, save_labels, save_matrix
from uda_bench.datasets.tasks import TaskData, materialize, resolve_task, task_registry
from uda_bench.diffcore import RngStream
from uda_bench.harness.search import random_search, rerun_best, select_best
from uda_bench.harness.store import (
    RECORDS_FILE,
    REVERSE_FILE,
    SOURCE_ONLY_FILE,
    append_record,
    load_records,
    load_source_only,
    save_source_only,
)
from uda_bench.harness.trainer import Trainer
from uda_bench.models.config import BenchConfig, FeatureLayer, TaskSpec, TrialConfig
from uda_bench.models.records import RunManifest, TrialRecord
from uda_bench.networks import ModelBundle, build_source_only_bundle
from uda_bench.networks.checkpoint import load_checkpoint, save_checkpoint
from uda_bench.utils.exceptions import (
    ConfigurationError,
    FormatError,
    InputError,
    NumericError,
    SearchError,
    UdaBenchError,
)
from uda_bench.utils.filesystem import ensure_output_dir, load_config, write_file, write_json
from uda_bench.utils.ui import display
from uda_bench.validators.reverse import reverse_validation

app = typer.Typer(help="Benchmark UDA algorithms and the validators used to tune them.")

SEED_ENV = "UDA_BENCH_SEED"
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

T = TypeVar("T")

ConfigOption = typer.Option(  # noqa: B008
    None, "--config", "-c", help="YAML or JSON benchmark configuration."
)


def resolve_seed(seed: int | None) -> int:
    """The ``--seed`` flag, else ``UDA_BENCH_SEED``, else 0."""
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise typer.BadParameter(f"{SEED_ENV} must be an integer, got {raw!r}") from e


def _guard(action: Callable[[], T]) -> T:
    """Run ``action`` and map failures to exit codes."""
    try:
        return action()
    except (InputError, FormatError, ConfigurationError, FileNotFoundError) as e:
        display.error(str(e))
        raise typer.Exit(EXIT_INPUT) from e
    except (NumericError, SearchError) as e:
        display.error(str(e))
        raise typer.Exit(EXIT_NUMERIC) from e
    except UdaBenchError as e:
        display.error(str(e))
        raise typer.Exit(EXIT_INPUT) from e


def _check_task(name: str, bench: BenchConfig) -> TaskSpec:
    registry = task_registry(bench.tasks)
    if name not in registry:
        raise typer.BadParameter(
            f"unknown task {name!r}; known tasks: {', '.join(sorted(registry))}",
            param_hint="--task",
        )
    return resolve_task(name, bench.tasks)


def _check_algorithm(name: str) -> str:
    try:
        split_combination(name)
    except ConfigurationError as e:
        raise typer.BadParameter(str(e), param_hint="--algorithm") from e
    return name


def _write_manifest(
    out_dir: Path,
    command: str,
    config: Path | None,
    seed: int,
    outputs: list[Path],
    workers: int = 1,
    **arguments: object,
) -> None:
    manifest = RunManifest(
        command=command,
        config_path=str(config) if config else None,
        output_dir=str(out_dir),
        seed=seed,
        workers=workers,
        arguments={k: (str(v) if isinstance(v, Path) else v) for k, v in arguments.items()},
        outputs=sorted(str(p.relative_to(out_dir)) for p in outputs),
    )
    write_json(out_dir / "manifest.json", manifest)


def _frozen_dann(records_path: Path, task: str) -> dict[str, float]:
    """λ_D and λ_grl of the oracle-best DANN trial of ``task``."""
    records = [r for r in load_records(records_path) if r.task == task and r.algorithm == "DANN"]
    best = select_best(records, "oracle")
    if best is None:
        raise ConfigurationError(f"no scored DANN trial of {task!r} in {records_path}")
    values = best.config.algorithm.hparams
    return {"lambda_D": values["lambda_D"], "lambda_grl": values["lambda_grl"]}


@app.command()
def search(
    task: str = typer.Option(..., "--task", "-t", help="Transfer task id."),
    algorithm: str = typer.Option(
        ..., "--algorithm", "-a", help=f"One of: {', '.join(ALGORITHM_IDS)}."
    ),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory."),  # noqa: B008
    trials: int | None = typer.Option(None, "--trials", "-n", min=1, help="Number of trials."),
    seed: int | None = typer.Option(None, "--seed", help=f"Master seed (default ${SEED_ENV} or 0)."),
    feature_layer: FeatureLayer = typer.Option(  # noqa: B008
        FeatureLayer.FL0, "--feature-layer", help="Feature tap fed to the adaptation losses."
    ),
    workers: int | None = typer.Option(None, "--workers", "-w", min=1, help="Worker processes."),
    frozen_from: Path | None = typer.Option(  # noqa: B008
        None, "--frozen-from", help="Records with a DANN search, for X-DANN combinations."
    ),
    rerun: bool = typer.Option(
        False, "--rerun", help="Rerun the selected config with fresh seeds."
    ),
    config: Path | None = ConfigOption,
) -> None:
    """Run a random hyperparameter search and append its trial records."""
    master_seed = resolve_seed(seed)
    bench = _guard(lambda: load_config(config))
    spec = _check_task(task, bench)
    _check_algorithm(algorithm)
    n_trials = trials or bench.search.trials
    n_workers = workers or bench.search.workers

    def _run() -> None:
        _, combined = split_combination(algorithm)
        frozen = None
        if combined:
            if frozen_from is None:
                raise ConfigurationError(f"{algorithm} needs --frozen-from with a DANN search")
            frozen = _frozen_dann(frozen_from, task)
        out_dir = ensure_output_dir(out)
        data = materialize(spec)
        display.info(
            f"Searching {algorithm} on {task}: {n_trials} trial(s), seed {master_seed}"
        )
        result = random_search(
            algorithm,
            data,
            n_trials,
            master_seed,
            bench,
            records_path=out_dir / RECORDS_FILE,
            feature_layer=feature_layer,
            frozen=frozen,
            workers=n_workers,
        )
        outputs = [out_dir / RECORDS_FILE, out_dir / SOURCE_ONLY_FILE]
        save_source_only(out_dir / SOURCE_ONLY_FILE, result.source_only)
        checkpoint_path = source_only_path(out_dir, task)
        save_checkpoint(checkpoint_path, result.source_only_bundle)
        outputs.append(checkpoint_path)

        rows = []
        for validator, selection in result.best.items():
            if selection is None:
                rows.append([validator, None, None, None, None])
                continue
            checkpoint = selection.checkpoint
            rows.append(
                [
                    validator,
                    selection.trial_id,
                    checkpoint.step,
                    checkpoint.scores[validator].value,
                    checkpoint.tgt_val_acc,
                ]
            )
        display.table(
            f"Best checkpoint per validator ({algorithm} on {task})",
            ["validator", "trial", "step", "score", "tgt val acc"],
            rows,
        )

        selected = result.best.get(bench.validators.selection)
        if rerun and selected is not None:
            summary = rerun_best(
                selected.config,
                data,
                result.source_only_bundle,
                bench.search.rerun_repeats,
            )
            rerun_path = out_dir / f"rerun_{task}_{algorithm}.json"
            write_json(
                rerun_path,
                {
                    "values": summary.values,
                    "mean": summary.mean,
                    "std": summary.std,
                    "std_defined": summary.std_defined,
                },
            )
            outputs.append(rerun_path)
            display.info(
                f"Rerun target-val accuracy: {summary.mean:.4f} ± {summary.std:.4f} "
                f"over {len(summary.values)} run(s)"
            )
        _write_manifest(
            out_dir,
            "search",
            config,
            master_seed,
            outputs,
            workers=n_workers,
            task=task,
            algorithm=algorithm,
            trials=n_trials,
            feature_layer=feature_layer.value,
            frozen_from=frozen_from,
            rerun=rerun,
        )
        display.success(f"Wrote {len(result.records)} record(s) to {out_dir / RECORDS_FILE}")

    _guard(_run)


@app.command()
def analyze(
    records: Path = typer.Option(..., "--records", "-r", help="Trial records (JSONL)."),  # noqa: B008
    out: Path = typer.Option(..., "--out", "-o", help="Output directory."),  # noqa: B008
    threshold: str = typer.Option(
        "derive", "--threshold", help="Source threshold: none, derive or a number."
    ),
    source_only: Path | None = typer.Option(  # noqa: B008
        None, "--source-only", help="Source-only table (default: next to the records)."
    ),
    seed: int | None = typer.Option(None, "--seed", help="Recorded in the manifest."),
) -> None:
    """Correlation curves, gap tables and the macro/micro table."""

    def _run() -> None:
        loaded = load_records(records)
        if not loaded:
            raise InputError(f"{records} contains no records")
        table = load_source_only(source_only or records.parent / SOURCE_ONLY_FILE)
        out_dir = ensure_output_dir(out)
        written, used = run_analysis(loaded, table, out_dir, threshold)
        display.panel(
            "\n".join(str(p.relative_to(out_dir)) for p in written),
            title=f"Analysis of {len(loaded)} record(s)",
            subtitle=f"threshold {'none' if used is None else f'{used:.4f}'}",
        )
        _write_manifest(
            out_dir,
            "analyze",
            None,
            resolve_seed(seed),
            written,
            records=records,
            threshold="none" if used is None else used,
        )
        display.success(f"Wrote {len(written)} file(s) to {out_dir}")

    _guard(_run)


def source_only_path(out_dir: Path, task: str) -> Path:
    return out_dir / f"source_only_{task}.udaw"


def _search_warm_start(
    records_dir: Path,
    task: str,
    data: TaskData,
    config: TrialConfig,
    trainer: Trainer,
    master_seed: int,
) -> ModelBundle:
    """The source-only model a search saved, else one pretrained the way the
    search pretrains it."""
    path = source_only_path(records_dir, task)
    if path.exists():
        display.info(f"Warm-starting from {path}")
        skeleton = build_source_only_bundle(
            data.input_dim, data.num_classes, config.models, RngStream(0, ("skeleton",))
        )
        return load_checkpoint(path, skeleton)
    display.warning(f"{path} not found; pretraining with seed {master_seed}")
    return trainer.pretrain(data, config, seed=master_seed)


@app.command("reverse-validate")
def reverse_validate(
    records: Path = typer.Option(..., "--records", "-r", help="Trial records (JSONL)."),  # noqa: B008
    task: str = typer.Option(..., "--task", "-t", help="Transfer task id."),
    algorithm: str = typer.Option(..., "--algorithm", "-a", help="Algorithm id."),
    validator: str = typer.Option(
        "oracle", "--validator", help="Validator that picks the forward config."
    ),
    out: Path | None = typer.Option(  # noqa: B008
        None, "--out", "-o", help="Output directory (default: next to the records)."
    ),
    seed: int | None = typer.Option(
        None, "--seed", help="Master seed of the search, used when no source-only model was saved."
    ),
) -> None:
    """Score the selected config of a search by reverse validation.

    The forward trial warm-starts from the source-only model the search
    saved next to the records, so it reproduces the selected trial.
    """
    _check_algorithm(algorithm)

    def _run() -> None:
        pool: list[TrialRecord] = [
            r for r in load_records(records) if r.task == task and r.algorithm == algorithm
        ]
        if not pool:
            raise InputError(f"no {algorithm} records for task {task!r} in {records}")
        selection = select_best(pool, validator)
        if selection is None:
            raise InputError(f"no valid {validator} score among {len(pool)} record(s)")
        out_dir = ensure_output_dir(out or records.parent)
        data = materialize(selection.config.task)
        trainer = Trainer()
        warm_start = _search_warm_start(
            records.parent, task, data, selection.config, trainer, resolve_seed(seed)
        )
        result = reverse_validation(data, selection.config, trainer, source_only=warm_start)
        display.info(f"{trainer.uda_runs} UDA training run(s)")
        append_record(out_dir / REVERSE_FILE, result)
        _write_manifest(
            out_dir,
            "reverse-validate",
            None,
            resolve_seed(seed),
            [out_dir / REVERSE_FILE],
            records=records,
            task=task,
            algorithm=algorithm,
            validator=validator,
        )
        display.success(
            f"Reverse validation score of trial {result.trial_id}: "
            f"{result.score.value:.4f}"
        )

    _guard(_run)


@app.command("gen-data")
def gen_data(
    task: str = typer.Option(..., "--task", "-t", help="Transfer task id."),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory."),  # noqa: B008
    csv: bool = typer.Option(False, "--csv", help="Also write CSV copies."),
    seed: int | None = typer.Option(None, "--seed", help="Overrides the task's data seed."),
    config: Path | None = ConfigOption,
) -> None:
    """Write a task's domains and splits."""
    bench = _guard(lambda: load_config(config))
    spec = _check_task(task, bench)
    if seed is not None or os.environ.get(SEED_ENV):
        spec = spec.model_copy(update={"data_seed": resolve_seed(seed)})

    def _run() -> None:
        out_dir = ensure_output_dir(out)
        data = materialize(spec)
        outputs = []
        for domain in (data.source, data.target):
            x_path = out_dir / f"{domain.domain}_X.udam"
            y_path = out_dir / f"{domain.domain}_y.udal"
            save_matrix(x_path, domain.X)
            save_labels(y_path, domain.y)
            outputs += [x_path, y_path]
            if csv:
                for suffix, values in (("X", domain.X), ("y", domain.y)):
                    path = out_dir / f"{domain.domain}_{suffix}.csv"
                    save_csv(path, values)
                    outputs.append(path)
        splits_path = out_dir / "splits.json"
        write_json(splits_path, data.splits)
        outputs.append(splits_path)
        _write_manifest(out_dir, "gen-data", config, spec.data_seed, outputs, task=task, csv=csv)
        display.success(f"Wrote {task} ({len(data.source)}+{len(data.target)} samples) to {out_dir}")

    _guard(_run)


@app.command()
def report(
    records: Path = typer.Option(..., "--records", "-r", help="Trial records (JSONL)."),  # noqa: B008
    out: Path | None = typer.Option(  # noqa: B008
        None, "--out", "-o", help="Markdown file (default: report.md next to the records)."
    ),
) -> None:
    """Summarize a records file as markdown."""

    def _run() -> None:
        loaded = load_records(records)
        if not loaded:
            raise InputError(f"{records} contains no records")
        path = out or records.parent / "report.md"
        write_file(path, render_report(loaded, str(records)))
        _write_manifest(
            ensure_output_dir(path.parent), "report", None, resolve_seed(None), [path], records=records
        )
        display.success(f"Wrote {path}")

    _guard(_run)


def main() -> None:
    """Main entry point for the uda-bench CLI."""
    app()


if __name__ == "__main__":
    main()
