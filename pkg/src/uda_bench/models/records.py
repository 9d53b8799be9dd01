import math
from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

from .config import FeatureLayer, TrialConfig

TrialStatus = Literal["completed", "early_stopped", "failed"]


class ValidationScore(BaseModel):
    """A validator's score for one checkpoint; higher is better.

    Non-finite values are stored as ``None`` with ``valid`` false.
    """

    value: float | None = None
    valid: bool = False
    validator: str = Field(default="", exclude=True)
    higher_is_better: bool = Field(default=True, exclude=True)

    @model_validator(mode="after")
    def _flag_non_finite(self) -> "ValidationScore":
        if self.value is not None and not math.isfinite(self.value):
            self.value = None
        if self.value is None:
            self.valid = False
        return self

    @classmethod
    def of(cls, validator: str, value: float) -> "ValidationScore":
        value = float(value)
        return cls(validator=validator, value=value, valid=math.isfinite(value))

    @classmethod
    def invalid(cls, validator: str) -> "ValidationScore":
        return cls(validator=validator, value=None, valid=False)

    def rank_key(self) -> tuple[int, float]:
        """Sort key under which every invalid score ranks below every valid one."""
        if not self.valid or self.value is None:
            return (0, 0.0)
        return (1, self.value if self.higher_is_better else -self.value)


class CheckpointEntry(BaseModel):
    checkpoint_id: int
    step: int
    scores: dict[str, ValidationScore] = Field(default_factory=dict)
    src_val_acc: float
    tgt_train_acc: float
    tgt_val_acc: float
    src_val_acc_micro: float = 0.0
    tgt_train_acc_micro: float = 0.0
    tgt_val_acc_micro: float = 0.0

    @model_validator(mode="after")
    def _name_scores(self) -> "CheckpointEntry":
        for name, score in self.scores.items():
            score.validator = name
        return self


class TrialRecord(BaseModel):
    """One hyperparameter trial and every checkpoint it produced."""

    trial_id: int
    task: str
    algorithm: str
    feature_layer: FeatureLayer
    hparams: dict[str, float] = Field(default_factory=dict)
    checkpoints: list[CheckpointEntry] = Field(default_factory=list[CheckpointEntry])
    status: TrialStatus = "completed"
    wallclock_s: float = 0.0
    seed: int = 0
    config: TrialConfig | None = None
    error: str | None = None

    @model_validator(mode="after")
    def _steps_increase(self) -> "TrialRecord":
        steps = [c.step for c in self.checkpoints]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"checkpoint steps must strictly increase: {steps}")
        return self

    def best_checkpoint(self, validator: str) -> CheckpointEntry | None:
        """The checkpoint ranked highest by ``validator`` (first one on ties)."""
        best: CheckpointEntry | None = None
        for checkpoint in self.checkpoints:
            score = checkpoint.scores.get(validator)
            if score is None:
                continue
            if best is None or score.rank_key() > best.scores[validator].rank_key():
                best = checkpoint
        return best


class Datapoint(BaseModel):
    """One checkpoint of one trial, flattened for analysis."""

    task: str
    algorithm: str
    trial_id: int
    feature_layer: FeatureLayer = FeatureLayer.FL0
    step: int
    scores: dict[str, ValidationScore] = Field(default_factory=dict)
    src_val_acc: float
    tgt_train_acc: float
    tgt_val_acc: float
    src_val_acc_micro: float = 0.0
    tgt_train_acc_micro: float = 0.0
    tgt_val_acc_micro: float = 0.0

    @classmethod
    def of(cls, record: "TrialRecord", checkpoint: CheckpointEntry) -> "Datapoint":
        return cls(
            task=record.task,
            algorithm=record.algorithm,
            trial_id=record.trial_id,
            feature_layer=record.feature_layer,
            step=checkpoint.step,
            scores=checkpoint.scores,
            src_val_acc=checkpoint.src_val_acc,
            tgt_train_acc=checkpoint.tgt_train_acc,
            tgt_val_acc=checkpoint.tgt_val_acc,
            src_val_acc_micro=checkpoint.src_val_acc_micro,
            tgt_train_acc_micro=checkpoint.tgt_train_acc_micro,
            tgt_val_acc_micro=checkpoint.tgt_val_acc_micro,
        )

    def score(self, validator: str) -> ValidationScore:
        return self.scores.get(validator) or ValidationScore.invalid(validator)


class SourceOnlyReference(BaseModel):
    """Accuracies of the source-only model of one task."""

    task: str
    src_val_acc: float
    tgt_train_acc: float
    tgt_val_acc: float
    src_val_acc_micro: float
    tgt_train_acc_micro: float
    tgt_val_acc_micro: float


class SourceOnlyTable(BaseModel):
    references: dict[str, SourceOnlyReference] = Field(default_factory=dict)

    def src_val_acc(self, task: str) -> float | None:
        reference = self.references.get(task)
        return None if reference is None else reference.src_val_acc


class ReverseValidationResult(BaseModel):
    task: str
    algorithm: str
    trial_id: int
    score: ValidationScore
    forward_tgt_val_acc: float
    training_runs: int


class RunManifest(BaseModel):
    """What a command ran with and what it wrote."""

    command: str
    config_path: str | None = None
    output_dir: str
    seed: int
    workers: int = 1
    arguments: dict[str, Any] = Field(default_factory=dict)
    outputs: list[str] = Field(default_factory=list)
