from dataclasses import dataclass

import numpy as np

from uda_bench.utils.exceptions import InputError


@dataclass(frozen=True)
class LabeledSet:
    """Samples ``X`` (N x d) with integer labels in ``[0, num_classes)``."""

    X: np.ndarray
    y: np.ndarray
    domain: str
    num_classes: int

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.y.ndim != 1 or len(self.y) != self.X.shape[0]:
            raise InputError(
                f"{self.domain}: X {self.X.shape} and y {self.y.shape} do not match"
            )
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise InputError(
                f"{self.domain}: labels outside [0, {self.num_classes})"
            )

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, indices: np.ndarray) -> "LabeledSet":
        return LabeledSet(self.X[indices], self.y[indices], self.domain, self.num_classes)

    def unlabeled(self) -> "UnlabeledSet":
        return UnlabeledSet(self.X, self.domain)


@dataclass(frozen=True)
class UnlabeledSet:
    X: np.ndarray
    domain: str

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise InputError(f"{self.domain}: need at least one sample, got {self.X.shape}")

    def __len__(self) -> int:
        return self.X.shape[0]
