"""Unit tests for template utilities."""

import tempfile
from pathlib import Path

import pytest
from jinja2 import TemplateNotFound

from uda_bench.utils.templates import (
    HybridTemplateLoader,
    TemplateManager,
    format_cell,
)


def _lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if line]


class TestTemplateManager:
    """Test the TemplateManager class."""

    def test_render_simple_template(self) -> None:
        """Test rendering a template from a custom directory."""
        with tempfile.TemporaryDirectory() as tmpdir:
            (Path(tmpdir) / "hello.txt").write_text("Hello {{ name }}!")

            manager = TemplateManager(Path(tmpdir))

            assert manager.render("hello.txt", name="World") == "Hello World!"

    def test_package_table_template(self) -> None:
        """The bundled table template renders a markdown table."""
        manager = TemplateManager()

        text = manager.render(
            "table.md.j2", title=None, columns=["task", "IM"], rows=[["a", 0.5]]
        )

        assert _lines(text) == ["| task | IM |", "| --- | --- |", "| a | 0.5000 |"]

    def test_table_title_and_missing_cells(self) -> None:
        """Titles become headings and None renders as a dash."""
        manager = TemplateManager()

        text = manager.render(
            "table.md.j2", title="Gaps", columns=["task", "DEV"], rows=[["b", None]]
        )

        assert _lines(text)[0] == "### Gaps"
        assert _lines(text)[-1] == "| b | - |"

    def test_filesystem_overrides_package(self) -> None:
        """A template in the custom directory shadows the bundled one."""
        with tempfile.TemporaryDirectory() as tmpdir:
            (Path(tmpdir) / "table.md.j2").write_text("custom {{ columns | length }}")

            manager = TemplateManager(Path(tmpdir))
            text = manager.render("table.md.j2", columns=["a", "b"], rows=[])

            assert text == "custom 2"

    def test_template_not_found(self) -> None:
        """Test handling of a template that exists nowhere."""
        with tempfile.TemporaryDirectory() as tmpdir:
            manager = TemplateManager(Path(tmpdir))

            with pytest.raises(TemplateNotFound):
                manager.render("nonexistent.txt")


class TestHybridTemplateLoader:
    """Test template discovery."""

    def test_lists_package_and_filesystem_templates(self) -> None:
        """Both sources contribute to the template listing."""
        with tempfile.TemporaryDirectory() as tmpdir:
            (Path(tmpdir) / "extra.md.j2").write_text("x")

            names = HybridTemplateLoader(Path(tmpdir)).list_templates()

            assert "extra.md.j2" in names
            assert "table.md.j2" in names
            assert "report.md.j2" in names


class TestFormatCell:
    """Test cell formatting."""

    def test_formats(self) -> None:
        """Floats get fixed digits, None a dash, the rest str()."""
        assert format_cell(0.123456) == "0.1235"
        assert format_cell(0.5, digits=2) == "0.50"
        assert format_cell(None) == "-"
        assert format_cell(12) == "12"
        assert format_cell("IM") == "IM"
