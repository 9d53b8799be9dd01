"""Tests for the task registry and materialization."""

import numpy as np
import pytest

from uda_bench.datasets import BUILTIN_TASKS, materialize, resolve_task, task_registry
from uda_bench.models.config import TaskSpec
from uda_bench.utils.exceptions import ConfigurationError


class TestRegistry:
    """Test task lookup."""

    def test_builtin_tasks(self) -> None:
        """Rotated moons and shifted blobs are built in."""
        assert {"moons-rot0", "moons-rot45", "blobs-near", "blobs-far"} <= set(BUILTIN_TASKS)
        assert resolve_task("blobs-far").num_classes == 3

    def test_extra_tasks_override(self) -> None:
        """Configured tasks replace built-ins of the same name."""
        custom = TaskSpec(name="moons-rot0", generator="two_moons", n_per_class=20)

        registry = task_registry([custom])

        assert registry["moons-rot0"].n_per_class == 20
        assert BUILTIN_TASKS["moons-rot0"].n_per_class == 200

    def test_unknown_task(self) -> None:
        """Unknown names list the known tasks."""
        with pytest.raises(ConfigurationError, match="moons-rot30"):
            resolve_task("nope")


class TestMaterialize:
    """Test task generation and splitting."""

    def test_split_sizes(self) -> None:
        """Each domain splits 80/20 per class."""
        spec = TaskSpec(name="small", generator="blobs", num_classes=3, n_per_class=20)
        data = materialize(spec)

        assert data.input_dim == 2
        assert len(data.source_train()) == len(data.target_train()) == 48
        assert len(data.source_val()) == len(data.target_val()) == 12

    def test_deterministic(self) -> None:
        """Materializing twice gives identical data and splits."""
        spec = TaskSpec(name="small", generator="two_moons", n_per_class=15, rotation_deg=30.0)
        a, b = materialize(spec), materialize(spec)

        assert np.array_equal(a.target.X, b.target.X)
        assert a.splits == b.splits

    def test_task_name_keys_the_stream(self) -> None:
        """Two tasks with the same seed but different names differ."""
        a = materialize(TaskSpec(name="a", generator="blobs", n_per_class=10))
        b = materialize(TaskSpec(name="b", generator="blobs", n_per_class=10))
        assert not np.array_equal(a.source.X, b.source.X)

    def test_moons_must_be_binary(self) -> None:
        """Two-moons tasks are binary."""
        with pytest.raises(ValueError, match="exactly 2 classes"):
            TaskSpec(name="bad", generator="two_moons", num_classes=3)
