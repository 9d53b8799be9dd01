"""Console output for searches and analyses.

Everything printed for humans goes through the shared ``display`` object,
whose console writes to standard error. Result files are the only
machine-readable output.
"""

from collections.abc import Sequence

from rich.console import Console
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table
from rich.theme import Theme

from uda_bench.utils.templates import format_cell

APP_THEME = Theme(
    {
        "info": "cyan",
        "error": "bold red",
        "success": "bold green",
        "warning": "yellow",
        "validator.oracle": "bold green",
        "validator.im": "blue",
        "validator.dev": "magenta",
        "validator.snd": "bright_cyan",
        "validator.neg_snd": "bright_magenta",
        "title": "bold blue",
        "subtitle": "dim",
    }
)

console = Console(theme=APP_THEME, stderr=True)


class DisplayManager:
    """Themed status lines, tables, panels and progress bars."""

    def __init__(self, console_instance: Console = console):
        self.console = console_instance

    def info(self, message: str) -> None:
        self.console.print(f"[info]ℹ {message}[/info]")

    def error(self, message: str) -> None:
        self.console.print(f"[error]✗ {message}[/error]")

    def success(self, message: str) -> None:
        self.console.print(f"[success]✓ {message}[/success]")

    def warning(self, message: str) -> None:
        self.console.print(f"[warning]⚠ {message}[/warning]")

    def panel(
        self, content: str, title: str | None = None, subtitle: str | None = None
    ) -> None:
        """Show a block of text, e.g. the files an analysis wrote."""
        self.console.print(
            Panel(
                content,
                title=f"[title]{title}[/title]" if title else None,
                subtitle=f"[subtitle]{subtitle}[/subtitle]" if subtitle else None,
                border_style="blue",
            )
        )

    def table(
        self, title: str, columns: Sequence[str], rows: Sequence[Sequence[object]]
    ) -> None:
        """Show rows as a rich table.

        Columns whose header names a validator are styled with that
        validator's theme color.
        """
        table = Table(title=f"[title]{title}[/title]")
        for column in columns:
            style = f"validator.{column.lower()}"
            table.add_column(column, style=style if style in APP_THEME.styles else None)
        for row in rows:
            table.add_row(*(format_cell(cell) for cell in row))
        self.console.print(table)

    def create_search_progress(self) -> Progress:
        """Progress bar counting the finished trials of a search."""
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=self.console,
            transient=False,
        )

    def create_spinner_progress(self, description: str) -> Progress:
        """Transient spinner for a step of unknown length, such as pretraining."""
        return Progress(
            SpinnerColumn(),
            TextColumn(f"[progress.description]{description}"),
            console=self.console,
            transient=True,
        )


display = DisplayManager()
