from enum import Enum
from typing import Literal

from pydantic import BaseModel, Field, field_validator, model_validator

LR_RANGE = (1e-5, 0.1)

ValidatorId = Literal["oracle", "im", "dev", "snd", "neg_snd"]


class FeatureLayer(str, Enum):
    """Tap point whose activations feed the adaptation losses."""

    FL0 = "FL0"  # trunk output
    FL6 = "FL6"  # penultimate classifier activation
    FL8 = "FL8"  # softmax output


class ModelSettings(BaseModel):
    """Widths of the trunk, classifier and discriminator stacks."""

    trunk_width: int = Field(default=32, ge=1)
    classifier_hidden: tuple[int, int] = (32, 16)
    discriminator_hidden: int = Field(default=64, ge=1)
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    cdan_projection_dim: int = Field(default=64, ge=1)
    swd_projections: int = Field(default=128, ge=1)

    @field_validator("classifier_hidden")
    @classmethod
    def _positive_hidden(cls, value: tuple[int, int]) -> tuple[int, int]:
        if min(value) < 1:
            raise ValueError("classifier hidden widths must be positive")
        return value


class TrainingBudget(BaseModel):
    epochs: int = Field(default=60, ge=1)
    patience: int = Field(default=10, ge=1)
    val_interval: int = Field(default=1, ge=1)
    batch_size: int = Field(default=64, ge=2)


class SourceOnlySettings(BaseModel):
    """Budget for the source-only model every UDA trial warm-starts from."""

    lr: float = Field(default=1e-3, gt=0.0)
    epochs: int = Field(default=100, ge=1)
    patience: int = Field(default=10, ge=1)


class ValidatorSettings(BaseModel):
    enabled: list[ValidatorId] = Field(
        default_factory=lambda: ["oracle", "im", "dev", "snd", "neg_snd"]
    )
    selection: ValidatorId = "oracle"
    snd_temperature: float = Field(default=0.05, gt=0.0)
    dev_epochs: int = Field(default=200, ge=1)
    dev_lr: float = Field(default=1e-3, gt=0.0)
    dev_hidden: int = Field(default=64, ge=1)

    @model_validator(mode="after")
    def _selection_enabled(self) -> "ValidatorSettings":
        if self.selection not in self.enabled:
            raise ValueError(
                f"selection validator {self.selection!r} is not in {self.enabled}"
            )
        return self


class SearchSettings(BaseModel):
    trials: int = Field(default=100, ge=1)
    rerun_repeats: int = Field(default=4, ge=0)
    workers: int = Field(default=1, ge=1)
    # Off by default so that records.jsonl is byte-reproducible.
    record_wallclock: bool = False


class TaskSpec(BaseModel):
    """A synthetic transfer task: generator, its parameters and split seed."""

    name: str
    generator: Literal["two_moons", "blobs"]
    num_classes: int = Field(default=2, ge=2)
    n_per_class: int = Field(default=200, ge=10)
    noise_sigma: float = Field(default=0.1, ge=0.0)
    rotation_deg: float = Field(default=0.0, ge=0.0, lt=180.0)
    mean_shift: float = 0.0
    scale: float = Field(default=1.0, gt=0.0)
    dim: int = Field(default=2, ge=2)
    split_ratio: float = Field(default=0.8, gt=0.0, lt=1.0)
    data_seed: int = 0
    split_seed: int = 0

    @model_validator(mode="after")
    def _moons_are_binary(self) -> "TaskSpec":
        if self.generator == "two_moons" and self.num_classes != 2:
            raise ValueError("two_moons tasks have exactly 2 classes")
        return self


class AlgorithmConfig(BaseModel):
    """Algorithm id plus its hyperparameter values.

    ``frozen`` holds hyperparameters fixed from an earlier search, e.g. the
    DANN weights of an ``X-DANN`` combination.
    """

    algorithm: str
    hparams: dict[str, float] = Field(default_factory=dict)
    frozen: dict[str, float] = Field(default_factory=dict)

    def value(self, name: str) -> float:
        if name in self.frozen:
            return self.frozen[name]
        return self.hparams[name]

    def all_values(self) -> dict[str, float]:
        return {**self.hparams, **self.frozen}


class TrialConfig(BaseModel):
    """Everything needed to rerun one trial bit-for-bit."""

    trial_id: int = 0
    task: TaskSpec
    algorithm: AlgorithmConfig
    feature_layer: FeatureLayer = FeatureLayer.FL0
    lr_max: float
    seed: int
    budget: TrainingBudget = Field(default_factory=TrainingBudget)
    models: ModelSettings = Field(default_factory=ModelSettings)
    validators: ValidatorSettings = Field(default_factory=ValidatorSettings)
    source_only: SourceOnlySettings = Field(default_factory=SourceOnlySettings)
    early_stopping: bool = True

    @field_validator("lr_max")
    @classmethod
    def _lr_in_range(cls, value: float) -> float:
        low, high = LR_RANGE
        if not low <= value <= high:
            raise ValueError(f"lr_max {value} outside [{low}, {high}]")
        return value


class Distribution(BaseModel):
    """One search dimension: uniform, log-uniform or a stepped integer grid."""

    kind: Literal["uniform", "log_uniform", "int"]
    low: float
    high: float
    step: int = 1

    @model_validator(mode="after")
    def _check_bounds(self) -> "Distribution":
        if self.low > self.high:
            raise ValueError(f"low {self.low} exceeds high {self.high}")
        if self.kind == "log_uniform" and self.low <= 0.0:
            raise ValueError("log-uniform bounds must be positive")
        if self.kind == "int" and self.step < 1:
            raise ValueError("integer step must be >= 1")
        return self

    def contains(self, value: float) -> bool:
        if not self.low <= value <= self.high:
            return False
        if self.kind == "int":
            offset = value - self.low
            return float(value).is_integer() and offset % self.step == 0
        return True


class SearchSpace(BaseModel):
    algorithm: str
    params: dict[str, Distribution] = Field(default_factory=dict)


class BenchConfig(BaseModel):
    version: float = 1.0
    models: ModelSettings = Field(default_factory=ModelSettings)
    budget: TrainingBudget = Field(default_factory=TrainingBudget)
    source_only: SourceOnlySettings = Field(default_factory=SourceOnlySettings)
    validators: ValidatorSettings = Field(default_factory=ValidatorSettings)
    search: SearchSettings = Field(default_factory=SearchSettings)
    tasks: list[TaskSpec] = Field(default_factory=list[TaskSpec])
