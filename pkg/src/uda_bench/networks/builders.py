"""MLP stacks for the trunk, classifier, discriminator and RTN residual block."""

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from uda_bench.diffcore import Graph, Node, ParamSet, RngStream
from uda_bench.utils.exceptions import ConfigurationError


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input, hidden..., output) of a ReLU MLP.

    ``dropout`` holds one probability per hidden layer.
    """

    widths: tuple[int, ...]
    dropout: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ConfigurationError(f"invalid MLP widths {self.widths}")
        hidden = len(self.widths) - 2
        if self.dropout and len(self.dropout) != hidden:
            raise ConfigurationError(
                f"{len(self.dropout)} dropout rates for {hidden} hidden layers"
            )

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    def num_parameters(self) -> int:
        return sum(a * b + b for a, b in zip(self.widths, self.widths[1:]))


def kaiming_uniform(rng: RngStream, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, (fan_in, fan_out))


def init_mlp(
    spec: MlpSpec, rng: RngStream, zero_last: bool = False
) -> ParamSet:
    """Kaiming-uniform weights and zero biases; layers are ``linear<i>``."""
    params = ParamSet()
    for i, (fan_in, fan_out) in enumerate(zip(spec.widths, spec.widths[1:])):
        last = i == spec.depth - 1
        weight = (
            np.zeros((fan_in, fan_out))
            if zero_last and last
            else kaiming_uniform(rng.child(f"linear{i}"), fan_in, fan_out)
        )
        params.add(f"linear{i}.weight", weight)
        params.add(f"linear{i}.bias", np.zeros((1, fan_out)))
    return params


def linear(graph: Graph, nodes: Mapping[str, Node], name: str, x: Node) -> Node:
    return graph.add(graph.matmul(x, nodes[f"{name}.weight"]), nodes[f"{name}.bias"])


def mlp_forward(
    graph: Graph,
    nodes: Mapping[str, Node],
    spec: MlpSpec,
    x: Node,
    rng: RngStream | None,
    first: int = 0,
) -> list[Node]:
    """Run layers ``first..depth-1`` and return each layer's output.

    Hidden outputs are post-ReLU (and post-dropout); the last output is the
    raw linear output.
    """
    outputs: list[Node] = []
    h = x
    for i in range(first, spec.depth):
        h = linear(graph, nodes, f"linear{i}", h)
        if i < spec.depth - 1:
            h = graph.relu(h)
            if spec.dropout:
                h = graph.dropout(h, spec.dropout[i], rng)
        outputs.append(h)
    return outputs


def trunk_spec(input_dim: int, trunk_width: int) -> MlpSpec:
    return MlpSpec(widths=(input_dim, trunk_width, trunk_width))


def classifier_spec(
    feature_dim: int,
    num_classes: int,
    hidden: tuple[int, int] = (256, 128),
    dropout: float = 0.5,
) -> MlpSpec:
    return MlpSpec(
        widths=(feature_dim, hidden[0], hidden[1], num_classes),
        dropout=(dropout, dropout),
    )


def discriminator_spec(feature_dim: int, hidden: int = 2048) -> MlpSpec:
    return MlpSpec(widths=(feature_dim, hidden, hidden, 1))


def residual_spec(num_classes: int) -> MlpSpec:
    return MlpSpec(widths=(num_classes, num_classes, num_classes))


def build_trunk(input_dim: int, trunk_width: int, rng: RngStream) -> ParamSet:
    """Two-layer ReLU MLP ``input -> width -> width``.

    The final ReLU is applied by the forward pass, not stored as a layer.
    """
    if input_dim < 1 or trunk_width < 1:
        raise ConfigurationError("trunk dimensions must be >= 1")
    return init_mlp(trunk_spec(input_dim, trunk_width), rng)


def build_classifier(
    feature_dim: int,
    num_classes: int,
    rng: RngStream,
    hidden: tuple[int, int] = (256, 128),
    dropout: float = 0.5,
) -> ParamSet:
    """``Linear(h1) ReLU Dropout Linear(h2) ReLU Dropout Linear(C) Softmax``."""
    return init_mlp(classifier_spec(feature_dim, num_classes, hidden, dropout), rng)


def build_discriminator(
    feature_dim: int, rng: RngStream, hidden: int = 2048
) -> ParamSet:
    """Three linear layers ending in one domain logit, whatever the input tap."""
    return init_mlp(discriminator_spec(feature_dim, hidden), rng)


def build_residual(num_classes: int, rng: RngStream) -> ParamSet:
    """RTN residual block; the last layer starts at zero so the block is a no-op."""
    return init_mlp(residual_spec(num_classes), rng, zero_last=True)
