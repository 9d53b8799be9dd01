"""What validators see of a checkpoint, and scoring it."""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from uda_bench.datasets.tasks import TaskData
from uda_bench.diffcore import RngStream
from uda_bench.models.config import ValidatorSettings
from uda_bench.models.records import ValidationScore
from uda_bench.networks import ModelBundle, predict
from uda_bench.utils.exceptions import UdaBenchError
from uda_bench.validators.domain_classifier import train_domain_classifier
from uda_bench.validators.scores import (
    dev_score,
    im_score,
    neg_snd_score,
    oracle_score,
    snd_score,
)


@dataclass(frozen=True)
class CheckpointSnapshot:
    """Model outputs at one checkpoint. Carries no target labels."""

    trial_id: int
    checkpoint_id: int
    tgt_preds: np.ndarray
    tgt_features: np.ndarray
    src_val_preds: np.ndarray
    src_val_losses: np.ndarray
    src_val_labels: np.ndarray
    src_val_features: np.ndarray
    src_train_features: np.ndarray


def per_sample_cross_entropy(preds: np.ndarray, labels: np.ndarray) -> np.ndarray:
    picked = preds[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, 1e-12))


def build_snapshot(
    bundle: ModelBundle, data: TaskData, trial_id: int, checkpoint_id: int
) -> CheckpointSnapshot:
    """Evaluation-mode outputs on target-train, source-val and source-train."""
    target = predict(bundle, data.target_train().X)
    source_val = data.source_val()
    src_val = predict(bundle, source_val.X)
    src_train = predict(bundle, data.source_train().X)
    return CheckpointSnapshot(
        trial_id=trial_id,
        checkpoint_id=checkpoint_id,
        tgt_preds=target.preds,
        tgt_features=target.features,
        src_val_preds=src_val.preds,
        src_val_losses=per_sample_cross_entropy(src_val.preds, source_val.y),
        src_val_labels=source_val.y,
        src_val_features=src_val.features,
        src_train_features=src_train.features,
    )


def _dev(
    snapshot: CheckpointSnapshot, settings: ValidatorSettings, rng: RngStream
) -> ValidationScore:
    classifier = train_domain_classifier(
        snapshot.src_train_features, snapshot.tgt_features, settings, rng
    )
    return dev_score(
        snapshot.src_val_losses,
        classifier(snapshot.src_val_features),
        len(snapshot.src_train_features),
        len(snapshot.tgt_features),
    )


def score_snapshot(
    snapshot: CheckpointSnapshot,
    settings: ValidatorSettings,
    rng: RngStream,
    target_labels: np.ndarray | None = None,
) -> dict[str, ValidationScore]:
    """Score ``snapshot`` with every enabled validator.

    A validator that raises yields an invalid score instead. The DEV domain
    classifier is retrained for every checkpoint.
    """
    scorers: dict[str, Callable[[], ValidationScore]] = {
        "oracle": lambda: oracle_score(snapshot.tgt_preds, target_labels),
        "im": lambda: im_score(snapshot.tgt_preds),
        "snd": lambda: snd_score(snapshot.tgt_features, settings.snd_temperature),
        "neg_snd": lambda: neg_snd_score(snapshot.tgt_features, settings.snd_temperature),
        "dev": lambda: _dev(
            snapshot, settings, rng.child("dev", str(snapshot.checkpoint_id))
        ),
    }
    scores: dict[str, ValidationScore] = {}
    for validator in settings.enabled:
        try:
            scores[validator] = scorers[validator]()
        except UdaBenchError:
            scores[validator] = ValidationScore.invalid(validator)
    return scores
