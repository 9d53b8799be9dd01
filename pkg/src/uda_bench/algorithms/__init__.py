"""Domain adaptation algorithms: loss terms, search spaces and step composition."""

from uda_bench.algorithms.adapters import (
    ADAPTERS,
    Adapter,
    Batch,
    compose_step,
    make_adapter,
    run_phase,
)
from uda_bench.algorithms.losses import LossReport, LossTerm, MemoryBank
from uda_bench.algorithms.spaces import (
    ALGORITHM_IDS,
    BASE_ALGORITHMS,
    COMBINATIONS,
    SINGLE_PHASE,
    search_space_for,
    split_combination,
    validate_config,
)

__all__ = [
    "ADAPTERS",
    "ALGORITHM_IDS",
    "BASE_ALGORITHMS",
    "COMBINATIONS",
    "SINGLE_PHASE",
    "Adapter",
    "Batch",
    "LossReport",
    "LossTerm",
    "MemoryBank",
    "compose_step",
    "make_adapter",
    "run_phase",
    "search_space_for",
    "split_combination",
    "validate_config",
]
