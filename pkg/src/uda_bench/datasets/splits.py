"""Per-class train/val splits."""

import math

import numpy as np
from pydantic import BaseModel

from uda_bench.diffcore import RngStream
from uda_bench.utils.exceptions import ConfigurationError


class SplitTable(BaseModel):
    """Index lists into the source and target sets.

    UDA trains on ``source_train`` and ``target_train``; validators may read
    both source splits and ``target_train``; ``target_val`` is only used to
    report test accuracy.
    """

    source_train: list[int]
    source_val: list[int]
    target_train: list[int]
    target_val: list[int]


def train_count(n: int, ratio: float) -> int:
    """``floor(ratio * n)``, clamped so both sides keep at least one sample."""
    count = math.floor(round(ratio * n, 9))
    return min(max(count, 1), n - 1)


def split_per_class(
    labels: np.ndarray, seed: int, ratio: float = 0.8, stream: str = "split"
) -> tuple[list[int], list[int]]:
    """Shuffle each class by ``seed`` and cut it at :func:`train_count`.

    Returns:
        Sorted train and val index lists.

    Raises:
        ConfigurationError: If a class present in ``labels`` has < 2 samples.
    """
    rng = RngStream(seed, (stream,))
    train: list[int] = []
    val: list[int] = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < 2:
            raise ConfigurationError(
                f"class {int(c)} has {len(members)} sample(s); need >= 2 to split"
            )
        shuffled = members[rng.child(f"class{int(c)}").permutation(len(members))]
        cut = train_count(len(members), ratio)
        train.extend(int(i) for i in shuffled[:cut])
        val.extend(int(i) for i in shuffled[cut:])
    return sorted(train), sorted(val)


def build_split_table(
    source_labels: np.ndarray, target_labels: np.ndarray, seed: int, ratio: float = 0.8
) -> SplitTable:
    source_train, source_val = split_per_class(source_labels, seed, ratio, "source")
    target_train, target_val = split_per_class(target_labels, seed, ratio, "target")
    return SplitTable(
        source_train=source_train,
        source_val=source_val,
        target_train=target_train,
        target_val=target_val,
    )
