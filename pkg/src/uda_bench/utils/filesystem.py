import json
import os
import tempfile
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ValidationError

from uda_bench.models.config import BenchConfig
from uda_bench.utils.exceptions import ConfigurationError


def write_file(path: Path, content: str) -> None:
    """Safely write content to a file, creating directories if needed."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def read_file(path: Path) -> str | None:
    """Safely read content from a file."""
    return path.read_text(encoding="utf-8") if path.exists() else None


def write_json(path: Path, payload: BaseModel | dict[str, Any]) -> None:
    """Atomically replace ``path`` with the JSON form of ``payload``."""
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8") as handle:
        handle.write(text + "\n")
    os.replace(tmp_name, path)


def ensure_output_dir(path: Path) -> Path:
    """Create ``path`` atomically if it does not exist yet.

    The directory is staged under a temporary name in the same parent and
    renamed into place, so readers never observe a half-created directory.
    """
    if path.is_dir():
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=path.parent, prefix=f".{path.name}."))
    try:
        os.rename(staging, path)
    except OSError:
        # Another process won the race.
        staging.rmdir()
        if not path.is_dir():
            raise
    return path


def load_config(path: Path | None) -> BenchConfig:
    """Load and validate a YAML or JSON benchmark configuration.

    A missing path yields the default configuration.
    """
    if path is None:
        return BenchConfig()
    content = read_file(path)
    if content is None:
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        data = yaml.safe_load(content) or {}
        return BenchConfig.model_validate(data)
    except (yaml.YAMLError, ValidationError) as e:
        raise ConfigurationError(f"Error parsing config file {path}: {e}") from e
