"""Append-only JSONL trial records and the source-only reference table."""

from pathlib import Path

from filelock import FileLock
from pydantic import BaseModel, ValidationError

from uda_bench.models.records import SourceOnlyReference, SourceOnlyTable, TrialRecord
from uda_bench.utils.exceptions import FormatError
from uda_bench.utils.filesystem import read_file, write_json
from uda_bench.utils.ui import display

RECORDS_FILE = "records.jsonl"
SOURCE_ONLY_FILE = "source_only.json"
REVERSE_FILE = "reverse.jsonl"


def _lock(path: Path) -> FileLock:
    return FileLock(str(path.with_name(path.name + ".lock")))


def append_record(path: Path, record: BaseModel) -> None:
    """Append one record as a single JSON line, serialized by a file lock."""
    path.parent.mkdir(parents=True, exist_ok=True)
    line = record.model_dump_json() + "\n"
    with _lock(path), path.open("a", encoding="utf-8") as handle:
        handle.write(line)
        handle.flush()


def load_records(path: Path) -> list[TrialRecord]:
    """Read every record; a truncated final line is dropped with a warning.

    Raises:
        FormatError: If any other line is not a valid record.
    """
    content = read_file(path)
    if content is None:
        raise FormatError(f"records file not found: {path}")
    lines = content.split("\n")
    complete = content.endswith("\n")
    tail = "" if complete else lines[-1]
    records: list[TrialRecord] = []
    for number, line in enumerate(lines[:-1], start=1):
        if not line.strip():
            continue
        try:
            records.append(TrialRecord.model_validate_json(line))
        except ValidationError as e:
            raise FormatError(f"invalid trial record: {e.errors()[0]['msg']}", line=number) from e
    if tail.strip():
        try:
            records.append(TrialRecord.model_validate_json(tail))
        except ValidationError:
            display.warning(
                f"Discarding truncated last line {len(lines)} of {path}"
            )
    return records


def save_source_only(path: Path, reference: SourceOnlyReference) -> SourceOnlyTable:
    """Insert or replace one task's reference in the table at ``path``."""
    with _lock(path):
        table = load_source_only(path)
        table.references[reference.task] = reference
        write_json(path, table)
    return table


def load_source_only(path: Path) -> SourceOnlyTable:
    content = read_file(path)
    if content is None:
        return SourceOnlyTable()
    try:
        return SourceOnlyTable.model_validate_json(content)
    except ValidationError as e:
        raise FormatError(f"invalid source-only table {path}: {e}") from e
