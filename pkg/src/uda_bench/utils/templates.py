import contextlib
import importlib.resources
from collections.abc import Callable
from pathlib import Path
from typing import Any

from jinja2 import BaseLoader, Environment, FileSystemLoader, TemplateNotFound


class HybridTemplateLoader(BaseLoader):
    """Custom Jinja2 loader that supports both file system and package resources.

    Tries to load templates from the file system first, then falls back to
    package resources.
    """

    def __init__(
        self,
        template_dir: Path | None,
        package_name: str = "uda_bench",
        package_template_dir: str = "templates",
    ):
        self.fs_loader = FileSystemLoader(template_dir) if template_dir else None
        self.package_name = package_name
        self.package_template_dir = package_template_dir

    def get_source(
        self, environment: Environment, template: str
    ) -> tuple[str, str | None, Callable[[], bool] | None]:
        """Get template source, trying file system first, then package resources."""
        if self.fs_loader is not None:
            try:
                return self.fs_loader.get_source(environment, template)
            except TemplateNotFound:
                pass

        package_path = f"{self.package_name}.{self.package_template_dir}"
        try:
            template_file = importlib.resources.files(package_path) / template
            if template_file.is_file():
                source = template_file.read_text(encoding="utf-8")
                return source, f"package://{package_path}/{template}", lambda: True
        except (ImportError, FileNotFoundError, ModuleNotFoundError):
            pass

        raise TemplateNotFound(template)

    def list_templates(self) -> list[str]:
        """List all available templates from both sources."""
        templates: set[str] = set()

        if self.fs_loader is not None:
            with contextlib.suppress(Exception):
                templates.update(self.fs_loader.list_templates())

        package_path = f"{self.package_name}.{self.package_template_dir}"
        with contextlib.suppress(ImportError, ModuleNotFoundError):
            for item in importlib.resources.files(package_path).iterdir():
                if item.is_file() and item.name.endswith(".j2"):
                    templates.add(item.name)

        return sorted(templates)


class TemplateManager:
    """Renders the markdown templates used for tables and reports."""

    def __init__(self, template_dir: Path | None = None):
        self._loader = HybridTemplateLoader(template_dir)
        self._env = Environment(
            loader=self._loader, keep_trailing_newline=True, autoescape=False
        )
        self._env.filters["cell"] = format_cell

    def render(self, template_name: str, **kwargs: Any) -> str:
        """Render a template with the given context."""
        return self._env.get_template(template_name).render(**kwargs)


def format_cell(value: object, digits: int = 4) -> str:
    """Format a table cell; missing values render as a dash."""
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)
