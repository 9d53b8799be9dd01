"""Synthetic domain-shift tasks, per-class splits and matrix files."""

from uda_bench.datasets.domains import LabeledSet, UnlabeledSet
from uda_bench.datasets.generators import gen_blob_shift, gen_two_moons_shift, rotate_about
from uda_bench.datasets.matrix_io import (
    load_labels,
    load_matrix,
    save_csv,
    save_labels,
    save_matrix,
)
from uda_bench.datasets.splits import SplitTable, build_split_table, split_per_class, train_count
from uda_bench.datasets.tasks import (
    BUILTIN_TASKS,
    TaskData,
    materialize,
    resolve_task,
    task_registry,
)

__all__ = [
    "BUILTIN_TASKS",
    "LabeledSet",
    "SplitTable",
    "TaskData",
    "UnlabeledSet",
    "build_split_table",
    "gen_blob_shift",
    "gen_two_moons_shift",
    "load_labels",
    "load_matrix",
    "materialize",
    "resolve_task",
    "rotate_about",
    "save_csv",
    "save_labels",
    "save_matrix",
    "split_per_class",
    "task_registry",
    "train_count",
]
