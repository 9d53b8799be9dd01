"""Checkpoint scores computed from model outputs.

Every validator except the oracle works from unlabeled target outputs and
labeled source-validation losses only.
"""

from typing import Literal

import numpy as np
from scipy.special import entr, softmax

from uda_bench.models.records import ValidationScore
from uda_bench.utils.exceptions import (
    ConfigurationError,
    DegenerateVarianceError,
    InputError,
    NumericError,
)

AccuracyMode = Literal["micro", "macro"]

# Below this the control-variate coefficient is unusable.
MIN_WEIGHT_VARIANCE = 1e-12


def _as_labels(preds: np.ndarray) -> np.ndarray:
    preds = np.asarray(preds)
    return preds.argmax(axis=1) if preds.ndim == 2 else preds.astype(np.int64)


def accuracy(preds: np.ndarray, labels: np.ndarray, mode: AccuracyMode = "macro") -> float:
    """Micro (overall) or macro (mean per-class recall) accuracy.

    ``preds`` is either a probability matrix or a vector of predicted labels.
    Classes absent from ``labels`` do not enter the macro mean.
    """
    predicted = _as_labels(preds)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise InputError("accuracy of an empty set is undefined")
    if predicted.shape != labels.shape:
        raise InputError(f"{predicted.shape[0]} predictions for {labels.shape[0]} labels")
    if labels.min() < 0:
        raise InputError("labels must be non-negative")
    correct = predicted == labels
    if mode == "micro":
        return float(correct.mean())
    recalls = [correct[labels == c].mean() for c in np.unique(labels)]
    return float(np.mean(recalls))


def oracle_score(preds: np.ndarray, labels: np.ndarray | None) -> ValidationScore:
    """Macro accuracy against the true target labels."""
    if labels is None:
        raise ConfigurationError("the oracle validator needs target labels")
    return ValidationScore.of("oracle", accuracy(preds, labels, "macro"))


def information_maximization(preds: np.ndarray) -> float:
    """``H(mean prediction) - mean(H(prediction))`` over the whole set."""
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] < 1:
        raise InputError(f"expected a non-empty prediction matrix, got {preds.shape}")
    diversity = entr(preds.mean(axis=0)).sum()
    confidence = entr(preds).sum(axis=1).mean()
    return float(diversity - confidence)


def im_score(preds: np.ndarray) -> ValidationScore:
    return ValidationScore.of("im", information_maximization(preds))


def soft_neighborhood_density(features: np.ndarray, temperature: float = 0.05) -> float:
    """Mean entropy of the temperature-softmaxed cosine similarities of each
    target feature to every other one."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise InputError(f"SND needs at least 2 feature rows, got {features.shape}")
    if temperature <= 0.0:
        raise InputError(f"SND temperature must be positive, got {temperature}")
    norms = np.linalg.norm(features, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InputError(f"feature row {int(zero[0])} has zero norm")
    unit = features / norms[:, None]
    similarity = unit @ unit.T
    n = similarity.shape[0]
    off_diagonal = similarity[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    probs = softmax(off_diagonal / temperature, axis=1)
    return float(entr(probs).sum(axis=1).mean())


def snd_score(features: np.ndarray, temperature: float = 0.05) -> ValidationScore:
    return ValidationScore.of("snd", soft_neighborhood_density(features, temperature))


def neg_snd_score(features: np.ndarray, temperature: float = 0.05) -> ValidationScore:
    return ValidationScore.of("neg_snd", -soft_neighborhood_density(features, temperature))


def importance_weights(target_probs: np.ndarray, n_src: int, n_tgt: int) -> np.ndarray:
    """Density ratios ``(N_s / N_t) * q / (1 - q)``."""
    q = np.asarray(target_probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = (n_src / n_tgt) * q / (1.0 - q)
    if not np.all(np.isfinite(weights)):
        raise NumericError("non-finite importance weights")
    return weights


def dev_risk(
    losses: np.ndarray, target_probs: np.ndarray, n_src: int, n_tgt: int
) -> float:
    """Importance-weighted source-validation risk with a control variate.

    Uses sample (ddof=1) covariance and variance.

    Raises:
        DegenerateVarianceError: If the weights have (near) zero variance.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.shape[0] < 2:
        raise InputError(f"DEV needs at least 2 validation losses, got {losses.shape}")
    if losses.shape != np.shape(target_probs):
        raise InputError("one domain probability per validation loss is required")
    if not np.all(np.isfinite(losses)):
        raise NumericError("non-finite validation losses")
    weights = importance_weights(target_probs, n_src, n_tgt)
    weighted = weights * losses
    variance = np.var(weights, ddof=1)
    if variance < MIN_WEIGHT_VARIANCE:
        raise DegenerateVarianceError(
            f"importance weight variance {variance:.3e} is below {MIN_WEIGHT_VARIANCE}"
        )
    eta = -np.cov(weighted, weights, ddof=1)[0, 1] / variance
    return float(weighted.mean() + eta * weights.mean() - eta)


def dev_score(
    losses: np.ndarray, target_probs: np.ndarray, n_src: int, n_tgt: int
) -> ValidationScore:
    """Negative DEV risk, so that higher is better."""
    return ValidationScore.of("dev", -dev_risk(losses, target_probs, n_src, n_tgt))
