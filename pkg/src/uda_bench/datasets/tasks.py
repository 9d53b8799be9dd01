"""Built-in transfer tasks and their materialization."""

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from uda_bench.datasets.domains import LabeledSet
from uda_bench.datasets.generators import gen_blob_shift, gen_two_moons_shift
from uda_bench.datasets.splits import SplitTable, build_split_table
from uda_bench.diffcore import RngStream
from uda_bench.models.config import TaskSpec
from uda_bench.utils.exceptions import ConfigurationError

BUILTIN_TASKS: dict[str, TaskSpec] = {
    spec.name: spec
    for spec in (
        TaskSpec(name="moons-rot0", generator="two_moons", rotation_deg=0.0),
        TaskSpec(name="moons-rot30", generator="two_moons", rotation_deg=30.0),
        TaskSpec(name="moons-rot45", generator="two_moons", rotation_deg=45.0),
        TaskSpec(name="moons-rot90", generator="two_moons", rotation_deg=90.0),
        TaskSpec(
            name="blobs-near",
            generator="blobs",
            num_classes=3,
            n_per_class=150,
            mean_shift=2.0,
            scale=1.2,
        ),
        TaskSpec(
            name="blobs-far",
            generator="blobs",
            num_classes=3,
            n_per_class=150,
            mean_shift=12.0,
        ),
    )
}


def task_registry(extra: Iterable[TaskSpec] = ()) -> dict[str, TaskSpec]:
    """Built-in tasks overlaid with ``extra`` (same name replaces)."""
    registry = dict(BUILTIN_TASKS)
    registry.update({spec.name: spec for spec in extra})
    return registry


def resolve_task(name: str, extra: Iterable[TaskSpec] = ()) -> TaskSpec:
    registry = task_registry(extra)
    if name not in registry:
        raise ConfigurationError(
            f"unknown task {name!r}; known tasks: {', '.join(sorted(registry))}"
        )
    return registry[name]


@dataclass(frozen=True)
class TaskData:
    """Generated source/target sets plus their four-way split.

    Target labels are kept here for the oracle and for test reporting only;
    nothing handed to a non-oracle validator carries them.
    """

    spec: TaskSpec
    source: LabeledSet
    target: LabeledSet
    splits: SplitTable

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    @property
    def input_dim(self) -> int:
        return self.source.X.shape[1]

    def source_train(self) -> LabeledSet:
        return self.source.subset(np.array(self.splits.source_train))

    def source_val(self) -> LabeledSet:
        return self.source.subset(np.array(self.splits.source_val))

    def target_train(self) -> LabeledSet:
        return self.target.subset(np.array(self.splits.target_train))

    def target_val(self) -> LabeledSet:
        return self.target.subset(np.array(self.splits.target_val))


def generate_domains(spec: TaskSpec) -> tuple[LabeledSet, LabeledSet]:
    rng = RngStream(spec.data_seed, ("task", spec.name))
    if spec.generator == "two_moons":
        return gen_two_moons_shift(
            spec.n_per_class, spec.noise_sigma, spec.rotation_deg, rng
        )
    return gen_blob_shift(
        spec.num_classes, spec.n_per_class, spec.mean_shift, spec.scale, rng, spec.dim
    )


def materialize(spec: TaskSpec) -> TaskData:
    """Generate and split a task; deterministic in ``spec``."""
    source, target = generate_domains(spec)
    splits = build_split_table(source.y, target.y, spec.split_seed, spec.split_ratio)
    return TaskData(spec=spec, source=source, target=target, splits=splits)
