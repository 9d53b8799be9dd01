"""Synthetic source/target domain pairs."""

import math

import numpy as np

from uda_bench.datasets.domains import LabeledSet
from uda_bench.diffcore import RngStream
from uda_bench.utils.exceptions import ConfigurationError

BLOB_RADIUS = 4.0


def rotate_about(X: np.ndarray, degrees: float, center: np.ndarray) -> np.ndarray:
    """Rotate the first two coordinates of every row about ``center``."""
    theta = math.radians(degrees)
    c, s = math.cos(theta), math.sin(theta)
    rotation = np.array([[c, s], [-s, c]])
    out = X.copy()
    out[:, :2] = (X[:, :2] - center[:2]) @ rotation + center[:2]
    return out


def gen_two_moons_shift(
    n_per_class: int,
    noise_sigma: float,
    rotation_deg: float,
    rng: RngStream,
) -> tuple[LabeledSet, LabeledSet]:
    """Two interleaving half circles; the target is the same points rotated
    by ``rotation_deg`` about their centroid."""
    if n_per_class < 10:
        raise ConfigurationError(f"two-moons needs >= 10 samples per class, got {n_per_class}")
    if not 0.0 <= rotation_deg < 180.0:
        raise ConfigurationError(f"rotation must be in [0, 180), got {rotation_deg}")

    t = np.linspace(0.0, math.pi, n_per_class)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 1.0 - np.sin(t) - 0.5])
    X = np.vstack([outer, inner])
    X = X + rng.child("noise").normal(0.0, noise_sigma, X.shape)
    y = np.repeat(np.arange(2), n_per_class)

    target_X = X.copy() if rotation_deg == 0.0 else rotate_about(X, rotation_deg, X.mean(axis=0))
    return (
        LabeledSet(X, y, "source", 2),
        LabeledSet(target_X, y.copy(), "target", 2),
    )


def gen_blob_shift(
    num_classes: int,
    n_per_class: int,
    mean_shift: float,
    scale: float,
    rng: RngStream,
    dim: int = 2,
) -> tuple[LabeledSet, LabeledSet]:
    """Unit-variance Gaussian clusters with means on a circle of radius 4.

    The target moves every mean by ``mean_shift`` along the first axis and
    multiplies the standard deviation by ``scale``.
    """
    if num_classes < 2:
        raise ConfigurationError(f"blobs need >= 2 classes, got {num_classes}")
    if dim < 2:
        raise ConfigurationError(f"blobs need >= 2 dimensions, got {dim}")

    angles = 2.0 * math.pi * np.arange(num_classes) / num_classes
    means = np.zeros((num_classes, dim))
    means[:, 0] = BLOB_RADIUS * np.cos(angles)
    means[:, 1] = BLOB_RADIUS * np.sin(angles)
    y = np.repeat(np.arange(num_classes), n_per_class)

    source_X = means[y] + rng.child("source").normal(0.0, 1.0, (len(y), dim))
    shifted = means.copy()
    shifted[:, 0] += mean_shift
    target_X = shifted[y] + rng.child("target").normal(0.0, scale, (len(y), dim))
    return (
        LabeledSet(source_X, y, "source", num_classes),
        LabeledSet(target_X, y.copy(), "target", num_classes),
    )
