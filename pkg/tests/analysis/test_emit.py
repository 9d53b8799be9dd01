"""Tests for CSV, markdown and plot-data output."""

import tempfile
from pathlib import Path

from uda_bench.analysis import CorrelationCurve, CurvePoint, TableData, emit, to_csv, to_markdown
from uda_bench.analysis.emit import curve_plot_data, read_csv_table

TABLE = TableData(
    title="Gaps",
    columns=["task", "oracle", "im"],
    rows=[["a", 0.5, None], ["b", 1.0, 0.25]],
)


class TestCsv:
    """Test CSV rendering."""

    def test_fixed_precision_and_blank_missing(self) -> None:
        """Floats use six decimals and missing cells are empty."""
        assert to_csv(TABLE) == "task,oracle,im\na,0.500000,\nb,1.000000,0.250000\n"

    def test_read_back(self) -> None:
        """Written tables read back as header and rows."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = emit(TABLE, "csv", Path(tmpdir) / "gaps.csv")
            header, rows = read_csv_table(path)

        assert header == TABLE.columns
        assert rows[0] == ["a", "0.500000", ""]


class TestMarkdown:
    """Test markdown rendering."""

    def test_every_row_has_every_column(self) -> None:
        """Each table line has one cell per column."""
        text = to_markdown(TABLE)
        lines = [line for line in text.splitlines() if line.startswith("|")]

        assert text.startswith("### Gaps")
        assert len(lines) == 2 + len(TABLE.rows)
        assert all(line.count("|") == len(TABLE.columns) + 1 for line in lines)
        assert "| a | 0.5000 | - |" in lines


class TestEmit:
    """Test file output."""

    def test_output_is_byte_identical(self) -> None:
        """Emitting the same table twice gives the same bytes."""
        with tempfile.TemporaryDirectory() as tmpdir:
            first = emit(TABLE, "markdown", Path(tmpdir) / "one.md").read_bytes()
            second = emit(TABLE, "markdown", Path(tmpdir) / "two.md").read_bytes()

        assert first == second

    def test_curve_plot_data(self) -> None:
        """Curves become threshold, per-task, mean and band columns."""
        curve = CorrelationCurve(
            validator="im",
            axis="source",
            tasks=["a", "b"],
            points=[
                CurvePoint(threshold=0.0, per_task={"a": 0.5, "b": 0.3}, mean=0.4, std=0.1, excluded=0),
                CurvePoint(threshold=0.5, per_task={"a": None, "b": None}, mean=None, std=None, excluded=2),
            ],
        )

        data = curve_plot_data(curve)

        assert data.columns == ["threshold", "a", "b", "mean", "band_low", "band_high"]
        assert data.rows[0][3:] == [0.4, 0.30000000000000004, 0.5]
        assert data.rows[1][1:] == [None, None, None, None, None]
