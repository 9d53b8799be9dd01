"""Tests for source-only pretraining and UDA trials."""

from unittest.mock import patch

import numpy as np

from uda_bench.datasets import TaskData, materialize
from uda_bench.diffcore import RngStream
from uda_bench.harness import Trainer, run_trial, train_source_only
from uda_bench.models.config import (
    AlgorithmConfig,
    FeatureLayer,
    ModelSettings,
    SourceOnlySettings,
    TaskSpec,
    TrainingBudget,
    TrialConfig,
    ValidatorSettings,
)
from uda_bench.networks import ModelBundle
from uda_bench.utils.exceptions import NumericError

SPEC = TaskSpec(name="tiny", generator="blobs", num_classes=2, n_per_class=10, mean_shift=1.0)


def _config(**overrides: object) -> TrialConfig:
    fields: dict[str, object] = {
        "trial_id": 5,
        "task": SPEC,
        "algorithm": AlgorithmConfig(
            algorithm="DANN", hparams={"lambda_D": 0.5, "lambda_grl": 1.0, "lambda_L": 1.0}
        ),
        "lr_max": 1e-3,
        "seed": 42,
        "budget": TrainingBudget(epochs=3, patience=2, batch_size=8),
        "models": ModelSettings(trunk_width=6, classifier_hidden=(5, 4), discriminator_hidden=4),
        "validators": ValidatorSettings(enabled=["oracle", "im", "snd"], selection="im"),
        "source_only": SourceOnlySettings(epochs=3, patience=2),
        "early_stopping": False,
    }
    fields.update(overrides)
    return TrialConfig.model_validate(fields)


def _pretrained(config: TrialConfig) -> tuple[TaskData, ModelBundle]:
    data = materialize(SPEC)
    return data, Trainer().pretrain(data, config)


class TestSourceOnly:
    """Test source-only pretraining."""

    def test_reference_accuracies(self) -> None:
        """The reference covers source-val, target-train and target-val."""
        config = _config()
        bundle, reference = train_source_only(
            materialize(SPEC), config.models, config.source_only, 8, RngStream(0)
        )

        assert reference.task == "tiny"
        for value in (reference.src_val_acc, reference.tgt_train_acc, reference.tgt_val_acc_micro):
            assert 0.0 <= value <= 1.0
        assert set(bundle.groups) == {"trunk", "classifier"}

    def test_pretrain_counts_runs(self) -> None:
        """The trainer counts source-only runs."""
        trainer = Trainer()
        trainer.pretrain(materialize(SPEC), _config())
        assert (trainer.source_only_runs, trainer.uda_runs) == (1, 0)


class TestRunTrial:
    """Test one UDA trial."""

    def test_checkpoint_per_epoch(self) -> None:
        """With val_interval 1 every epoch is scored."""
        config = _config()
        data, source_only = _pretrained(config)

        record = run_trial(config, data, source_only).record

        assert record.status == "completed"
        assert [c.step for c in record.checkpoints] == [1, 2, 3]
        assert set(record.checkpoints[0].scores) == {"oracle", "im", "snd"}
        assert record.config == config
        assert record.hparams == config.algorithm.hparams
        assert record.wallclock_s == 0.0

    def test_val_interval_keeps_last_epoch(self) -> None:
        """The last epoch is scored even off the interval."""
        config = _config(budget=TrainingBudget(epochs=3, patience=2, val_interval=2, batch_size=8))
        data, source_only = _pretrained(config)

        record = run_trial(config, data, source_only).record

        assert [c.step for c in record.checkpoints] == [2, 3]

    def test_deterministic_and_warm_start_untouched(self) -> None:
        """Identical configs give identical records; the warm start is never modified."""
        config = _config()
        data, source_only = _pretrained(config)
        before = {k: v.copy() for k, v in source_only.state_dict().items()}

        first = run_trial(config, data, source_only).record
        second = run_trial(config, data, source_only).record

        assert first.model_dump() == second.model_dump()
        assert all(np.array_equal(before[k], v) for k, v in source_only.state_dict().items())

    def test_feature_layer_is_recorded(self) -> None:
        """Trials at FL6 adapt the penultimate layer."""
        config = _config(feature_layer=FeatureLayer.FL6)
        data, source_only = _pretrained(config)

        outcome = run_trial(config, data, source_only)

        assert outcome.record.feature_layer is FeatureLayer.FL6
        assert outcome.bundle.feature_dim == 4

    def test_divergence_marks_the_trial_failed(self) -> None:
        """A numeric failure keeps the record with status failed."""
        config = _config()
        data, source_only = _pretrained(config)

        with patch(
            "uda_bench.harness.trainer.compose_step", side_effect=NumericError("loss is nan")
        ), patch("uda_bench.harness.trainer.display") as mock_display:
            record = run_trial(config, data, source_only).record

        assert record.status == "failed"
        assert record.error == "loss is nan"
        assert record.checkpoints == []
        mock_display.warning.assert_called_once()
