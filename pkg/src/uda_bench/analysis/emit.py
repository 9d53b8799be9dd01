"""Deterministic CSV, markdown and plot-data output."""

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from uda_bench.analysis.correlation import CorrelationCurve
from uda_bench.analysis.tables import AlgorithmGapTable, GapTable, MacroMicroTable
from uda_bench.utils.filesystem import write_file
from uda_bench.utils.templates import TemplateManager

Format = Literal["csv", "markdown", "plot-data"]
Cell = str | int | float | None


@dataclass(frozen=True)
class TableData:
    title: str
    columns: list[str]
    rows: list[list[Cell]]


def _csv_cell(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def to_csv(table: TableData) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def to_markdown(table: TableData, templates: TemplateManager | None = None) -> str:
    templates = templates or TemplateManager()
    return templates.render(
        "table.md.j2", title=table.title, columns=table.columns, rows=table.rows
    )


def emit(
    table: TableData,
    fmt: Format,
    path: Path,
    templates: TemplateManager | None = None,
) -> Path:
    """Write ``table``; ``plot-data`` is CSV of curve columns."""
    content = to_markdown(table, templates) if fmt == "markdown" else to_csv(table)
    write_file(path, content)
    return path


def gap_table_data(table: GapTable, setting: str) -> TableData:
    """Rows are tasks, one column per validator (oracle first)."""
    threshold = table.settings[setting]
    label = "none" if threshold is None else f"{threshold:.4f}"
    return TableData(
        title=f"Best target-train accuracy (threshold {label})",
        columns=["task"] + table.validators,
        rows=[
            [task] + [table.cells[setting][v][task] for v in table.validators]
            for task in table.columns
        ],
    )


def gap_difference_data(table: GapTable, setting: str) -> TableData:
    validators = [v for v in table.validators if v != "oracle"]
    return TableData(
        title=f"Oracle gap ({setting})",
        columns=["task"] + validators,
        rows=[[task] + [table.gap(setting, v, task) for v in validators] for task in table.columns],
    )


def algorithm_gap_data(table: AlgorithmGapTable, setting: str) -> TableData:
    columns = ["algorithm"]
    for validator in table.validators:
        columns += [f"{validator}_mean", f"{validator}_std"]
    rows: list[list[Cell]] = []
    for algorithm in table.algorithms:
        row: list[Cell] = [algorithm]
        for validator in table.validators:
            row += [
                table.mean[setting][validator][algorithm],
                table.std[setting][validator][algorithm],
            ]
        rows.append(row)
    return TableData(title=f"Oracle gap per algorithm ({setting})", columns=columns, rows=rows)


def macro_micro_data(table: MacroMicroTable) -> TableData:
    return TableData(
        title="Target accuracy of methods beating source-only",
        columns=["split", "micro", "macro"],
        rows=[
            [split, table.values[(split, "micro")], table.values[(split, "macro")]]
            for split in ("train", "val")
        ],
    )


def curve_plot_data(curve: CorrelationCurve) -> TableData:
    """``threshold, <task>..., mean, band_low, band_high``."""
    rows: list[list[Cell]] = []
    for point in curve.points:
        low = high = None
        if point.mean is not None:
            spread = point.std or 0.0
            low, high = point.mean - spread, point.mean + spread
        rows.append(
            [point.threshold]
            + [point.per_task[t] for t in curve.tasks]
            + [point.mean, low, high]
        )
    return TableData(
        title=f"Spearman of {curve.validator} vs {curve.axis} threshold",
        columns=["threshold"] + curve.tasks + ["mean", "band_low", "band_high"],
        rows=rows,
    )


def read_csv_table(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    return rows[0], rows[1:]
