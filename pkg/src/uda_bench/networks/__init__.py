"""Trunk, classifier and discriminator stacks with FL0/FL6/FL8 feature taps."""

from uda_bench.networks.builders import (
    MlpSpec,
    build_classifier,
    build_discriminator,
    build_residual,
    build_trunk,
)
from uda_bench.networks.bundle import (
    FL8_INCOMPATIBLE,
    ModelBundle,
    Prediction,
    Selection,
    Taps,
    adapt_bundle,
    base_algorithm,
    build_source_only_bundle,
    discriminator_forward,
    forward_with_taps,
    merge_selections,
    predict,
    residual_forward,
)
from uda_bench.networks.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "FL8_INCOMPATIBLE",
    "MlpSpec",
    "ModelBundle",
    "Prediction",
    "Selection",
    "Taps",
    "adapt_bundle",
    "base_algorithm",
    "build_classifier",
    "build_discriminator",
    "build_residual",
    "build_source_only_bundle",
    "build_trunk",
    "discriminator_forward",
    "forward_with_taps",
    "load_checkpoint",
    "merge_selections",
    "predict",
    "residual_forward",
    "save_checkpoint",
]
