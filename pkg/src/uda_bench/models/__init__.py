"""Configuration and record schemas for uda-bench."""

from .config import (
    LR_RANGE,
    AlgorithmConfig,
    BenchConfig,
    Distribution,
    FeatureLayer,
    ModelSettings,
    SearchSettings,
    SearchSpace,
    SourceOnlySettings,
    TaskSpec,
    TrainingBudget,
    TrialConfig,
    ValidatorId,
    ValidatorSettings,
)
from .records import (
    CheckpointEntry,
    Datapoint,
    ReverseValidationResult,
    RunManifest,
    SourceOnlyReference,
    SourceOnlyTable,
    TrialRecord,
    TrialStatus,
    ValidationScore,
)

__all__ = [
    "LR_RANGE",
    "AlgorithmConfig",
    "BenchConfig",
    "CheckpointEntry",
    "Datapoint",
    "Distribution",
    "FeatureLayer",
    "ModelSettings",
    "ReverseValidationResult",
    "RunManifest",
    "SearchSettings",
    "SearchSpace",
    "SourceOnlyReference",
    "SourceOnlySettings",
    "SourceOnlyTable",
    "TaskSpec",
    "TrainingBudget",
    "TrialConfig",
    "TrialRecord",
    "TrialStatus",
    "ValidationScore",
    "ValidatorId",
    "ValidatorSettings",
]
