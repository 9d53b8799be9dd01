"""Learning-rate schedule, early stopping and batch pairing."""

import math

import numpy as np

from uda_bench.diffcore import RngStream
from uda_bench.models.records import ValidationScore
from uda_bench.utils.exceptions import InputError

WARMUP_FRACTION = 0.05
INITIAL_DIV = 100.0


def onecycle_lr(
    step: int,
    total_steps: int,
    lr_max: float,
    warmup_fraction: float = WARMUP_FRACTION,
) -> float:
    """One-cycle schedule with cosine warmup from ``lr_max / 100`` and cosine
    annealing to 0."""
    if not 0 <= step <= total_steps:
        raise InputError(f"step {step} outside [0, {total_steps}]")
    lr_init = lr_max / INITIAL_DIV
    warmup = warmup_fraction * total_steps
    if total_steps == 0:
        return lr_init
    if step <= warmup:
        if warmup == 0.0:
            return lr_max
        return lr_init + (lr_max - lr_init) * (1.0 - math.cos(math.pi * step / warmup)) / 2.0
    progress = (step - warmup) / (total_steps - warmup)
    return lr_max * (1.0 + math.cos(math.pi * progress)) / 2.0


class EarlyStopper:
    """Counts validation steps since the last strict improvement.

    Invalid scores never count as improvements.
    """

    def __init__(self, patience: int):
        if patience < 1:
            raise InputError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best: float | None = None
        self.bad_steps = 0

    def update(self, score: ValidationScore) -> bool:
        """Record one validation step; return whether it improved."""
        if score.valid and score.value is not None:
            if self.best is None or score.value > self.best:
                self.best = score.value
                self.bad_steps = 0
                return True
        self.bad_steps += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_steps >= self.patience


def steps_per_epoch(n_src: int, n_tgt: int, batch_size: int) -> int:
    return math.ceil(max(n_src, n_tgt) / batch_size)


def _cycled(n: int, count: int, rng: RngStream) -> np.ndarray:
    """``count`` indices from successive fresh permutations of ``range(n)``."""
    parts = []
    total = 0
    cycle = 0
    while total < count:
        parts.append(rng.child(str(cycle)).permutation(n))
        total += n
        cycle += 1
    return np.concatenate(parts)[:count]


def paired_batches(
    n_src: int, n_tgt: int, batch_size: int, rng: RngStream
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Index pairs for one epoch; both streams are reshuffled and the shorter
    one recycles, so every batch is full."""
    if n_src < 1 or n_tgt < 1:
        raise InputError("both domains need at least one training sample")
    count = steps_per_epoch(n_src, n_tgt, batch_size)
    src = _cycled(n_src, count * batch_size, rng.child("source"))
    tgt = _cycled(n_tgt, count * batch_size, rng.child("target"))
    return [
        (src[i * batch_size : (i + 1) * batch_size], tgt[i * batch_size : (i + 1) * batch_size])
        for i in range(count)
    ]
