"""Tests for the learning-rate schedule, early stopping and batch pairing."""

import numpy as np
import pytest

from uda_bench.diffcore import RngStream
from uda_bench.harness import EarlyStopper, onecycle_lr, paired_batches
from uda_bench.models.records import ValidationScore
from uda_bench.utils.exceptions import InputError


class TestOneCycle:
    """Test the one-cycle schedule."""

    def test_endpoints(self) -> None:
        """Starts at lr_max / 100, peaks after 5% of steps and ends at 0."""
        assert onecycle_lr(0, 1000, 0.02) == pytest.approx(0.0002, abs=1e-12)
        assert onecycle_lr(50, 1000, 0.02) == pytest.approx(0.02, abs=1e-12)
        assert onecycle_lr(1000, 1000, 0.02) == pytest.approx(0.0, abs=1e-12)

    def test_shape(self) -> None:
        """Rises during warmup and decays monotonically afterwards."""
        lrs = [onecycle_lr(s, 1000, 0.01) for s in range(1001)]

        assert np.all(np.diff(lrs[:51]) > 0.0)
        assert np.all(np.diff(lrs[50:]) <= 0.0)
        assert onecycle_lr(525, 1000, 0.01) == pytest.approx(0.005)

    def test_out_of_range_step(self) -> None:
        """Steps must lie in [0, total_steps]."""
        with pytest.raises(InputError):
            onecycle_lr(11, 10, 0.01)
        with pytest.raises(InputError):
            onecycle_lr(-1, 10, 0.01)


class TestEarlyStopper:
    """Test patience counting."""

    def test_scripted_plateau(self) -> None:
        """Improving for 5 steps then plateauing stops at step 15 with patience 10."""
        stopper = EarlyStopper(patience=10)
        stopped_at = None
        for step in range(1, 31):
            value = min(step, 5) / 10
            stopper.update(ValidationScore.of("oracle", value))
            if stopper.should_stop:
                stopped_at = step
                break

        assert stopped_at == 15
        assert stopper.best == 0.5

    def test_invalid_scores_never_improve(self) -> None:
        """Invalid scores count as validation steps without improvement."""
        stopper = EarlyStopper(patience=2)

        assert stopper.update(ValidationScore.invalid("im")) is False
        assert stopper.update(ValidationScore.of("im", 0.1)) is True
        assert stopper.update(ValidationScore.of("im", 0.1)) is False
        assert stopper.update(ValidationScore.of("im", float("nan"))) is False
        assert stopper.should_stop

    def test_patience_must_be_positive(self) -> None:
        """Zero patience is rejected."""
        with pytest.raises(InputError):
            EarlyStopper(0)


class TestPairedBatches:
    """Test source/target batch pairing."""

    def test_full_batches_from_both_domains(self) -> None:
        """The longer domain sets the epoch length; the shorter one recycles."""
        batches = paired_batches(10, 25, 8, RngStream(0))

        assert len(batches) == 4
        assert all(len(s) == len(t) == 8 for s, t in batches)
        target = np.concatenate([t for _, t in batches])
        assert sorted(target[:25].tolist()) == list(range(25))
        source = np.concatenate([s for s, _ in batches])
        assert sorted(source[:10].tolist()) == list(range(10))
        assert source.max() < 10

    def test_deterministic(self) -> None:
        """Same stream, same batches."""
        a = paired_batches(7, 9, 4, RngStream(2))
        b = paired_batches(7, 9, 4, RngStream(2))
        assert all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(a, b))

    def test_empty_domain(self) -> None:
        """Both domains need samples."""
        with pytest.raises(InputError):
            paired_batches(0, 5, 4, RngStream(0))
