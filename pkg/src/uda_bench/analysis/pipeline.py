"""The full analysis run behind ``udabench analyze`` and ``udabench report``."""

import json
from collections.abc import Sequence
from pathlib import Path

from uda_bench.analysis.correlation import correlation_vs_threshold
from uda_bench.analysis.emit import (
    algorithm_gap_data,
    curve_plot_data,
    emit,
    gap_difference_data,
    gap_table_data,
    macro_micro_data,
)
from uda_bench.analysis.normalize import flatten, normalize
from uda_bench.analysis.tables import (
    algorithm_gap_table,
    best_selected,
    gap_table,
    macro_micro_table,
)
from uda_bench.models.records import Datapoint, SourceOnlyTable, TrialRecord
from uda_bench.utils.exceptions import InputError
from uda_bench.utils.filesystem import write_file
from uda_bench.utils.templates import TemplateManager
from uda_bench.validators.thresholds import derive_threshold, group_by_task

VALIDATOR_ORDER = ("oracle", "im", "dev", "snd", "neg_snd")


def validators_in(points: Sequence[Datapoint]) -> list[str]:
    present = {name for p in points for name in p.scores}
    ordered = [v for v in VALIDATOR_ORDER if v in present]
    return ordered + sorted(present - set(ordered))


def resolve_threshold(
    setting: str, points: Sequence[Datapoint], source_only: SourceOnlyTable
) -> float | None:
    """``none``, ``derive`` or a number; non-positive numbers mean no filter."""
    if setting == "none":
        return None
    if setting == "derive":
        return derive_threshold(group_by_task(points), source_only)
    try:
        value = float(setting)
    except ValueError as e:
        raise InputError(f"threshold must be none, derive or a number, got {setting!r}") from e
    return value if value > 0.0 else None


def run_analysis(
    records: Sequence[TrialRecord],
    source_only: SourceOnlyTable,
    out_dir: Path,
    threshold: str = "derive",
    templates: TemplateManager | None = None,
) -> tuple[list[Path], float | None]:
    """Write correlation curves, gap tables and the macro/micro table.

    Returns the written paths and the threshold used.
    """
    points = flatten(records)
    if not points:
        raise InputError("no checkpoints to analyze")
    templates = templates or TemplateManager()
    validators = validators_in(points)
    selected = resolve_threshold(threshold, points, source_only)
    settings = {"none": None, "threshold": selected}
    written: list[Path] = []

    normalized = normalize(points, source_only, validators)
    for validator in validators:
        if validator == "oracle":
            continue
        for axis in ("source", "target"):
            curve = correlation_vs_threshold(normalized.points, validator, axis)
            written.append(
                emit(curve_plot_data(curve), "plot-data", out_dir / f"correlation_{validator}_{axis}.csv")
            )

    gaps = gap_table(points, source_only, validators, settings)
    per_algorithm = algorithm_gap_table(points, source_only, validators, settings)
    for setting in settings:
        for data, stem in (
            (gap_table_data(gaps, setting), f"gap_{setting}"),
            (gap_difference_data(gaps, setting), f"gap_diff_{setting}"),
            (algorithm_gap_data(per_algorithm, setting), f"gap_algorithms_{setting}"),
        ):
            written.append(emit(data, "csv", out_dir / f"{stem}.csv"))
            written.append(emit(data, "markdown", out_dir / f"{stem}.md", templates))

    macro_micro = macro_micro_data(macro_micro_table(points, source_only))
    written.append(emit(macro_micro, "csv", out_dir / "macro_micro.csv"))
    written.append(emit(macro_micro, "markdown", out_dir / "macro_micro.md", templates))

    threshold_path = out_dir / "threshold.json"
    write_file(threshold_path, json.dumps({"threshold": selected}, indent=2) + "\n")
    written.append(threshold_path)
    return written, selected


def render_report(
    records: Sequence[TrialRecord], source: str, templates: TemplateManager | None = None
) -> str:
    """Markdown summary: trial counts and each validator's best checkpoint
    per (task, algorithm)."""
    templates = templates or TemplateManager()
    points = flatten(records)
    validators = validators_in(points)
    groups = []
    keys = sorted({(r.task, r.algorithm) for r in records})
    for task, algorithm in keys:
        trials = [r for r in records if r.task == task and r.algorithm == algorithm]
        pool = [p for p in points if p.task == task and p.algorithm == algorithm]
        best_rows = []
        for validator in validators:
            best = best_selected(pool, validator)
            best_rows.append(
                {
                    "validator": validator,
                    "trial_id": None if best is None else best.trial_id,
                    "step": None if best is None else best.step,
                    "score": None if best is None else best.score(validator).value,
                    "src_val_acc": None if best is None else best.src_val_acc,
                    "tgt_train_acc": None if best is None else best.tgt_train_acc,
                    "tgt_val_acc": None if best is None else best.tgt_val_acc,
                }
            )
        groups.append(
            {
                "task": task,
                "algorithm": algorithm,
                "trials": len(trials),
                "completed": sum(r.status == "completed" for r in trials),
                "early_stopped": sum(r.status == "early_stopped" for r in trials),
                "failed": sum(r.status == "failed" for r in trials),
                "best": best_rows,
            }
        )
    return templates.render(
        "report.md.j2",
        source=source,
        total=len(records),
        failed=sum(r.status == "failed" for r in records),
        groups=groups,
    )
