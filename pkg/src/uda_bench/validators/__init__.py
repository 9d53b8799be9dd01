"""Checkpoint validators, the DEV domain classifier and source thresholding."""

from uda_bench.validators.domain_classifier import DomainClassifier, train_domain_classifier
from uda_bench.validators.reverse import TrialRunner, reverse_task, reverse_validation
from uda_bench.validators.scores import (
    accuracy,
    dev_risk,
    dev_score,
    im_score,
    importance_weights,
    information_maximization,
    neg_snd_score,
    oracle_score,
    snd_score,
    soft_neighborhood_density,
)
from uda_bench.validators.snapshot import CheckpointSnapshot, build_snapshot, score_snapshot
from uda_bench.validators.thresholds import (
    derive_threshold,
    group_by_task,
    normalized_source_accuracy,
    threshold_filter,
)

__all__ = [
    "CheckpointSnapshot",
    "DomainClassifier",
    "TrialRunner",
    "accuracy",
    "build_snapshot",
    "derive_threshold",
    "dev_risk",
    "dev_score",
    "group_by_task",
    "im_score",
    "importance_weights",
    "information_maximization",
    "neg_snd_score",
    "normalized_source_accuracy",
    "oracle_score",
    "reverse_task",
    "reverse_validation",
    "score_snapshot",
    "snd_score",
    "soft_neighborhood_density",
    "threshold_filter",
]
