"""Named parameter storage and the Adam optimizer."""

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np

from uda_bench.diffcore.graph import Graph, Node, as_tensor
from uda_bench.utils.exceptions import NumericError, ShapeError

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8
WEIGHT_DECAY = 1e-4


@dataclass
class AdamState:
    """First/second moment estimates and the step count of one parameter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, value: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(value), v=np.zeros_like(value))


@dataclass
class ParamSet:
    """Trainable matrices addressed by name, each with its own Adam state.

    Values live here between steps; every training step attaches them to a
    fresh :class:`Graph` as ``requires_grad`` inputs.
    """

    values: dict[str, np.ndarray] = field(default_factory=dict)
    state: dict[str, AdamState] = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.values:
            raise ShapeError(f"parameter {name!r} already exists")
        tensor = as_tensor(value).copy()
        self.values[name] = tensor
        self.state[name] = AdamState.zeros_like(tensor)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: object) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self.values if n.startswith(prefix)]

    def num_parameters(self, prefix: str = "") -> int:
        return sum(self.values[n].size for n in self.names(prefix))

    def attach(self, graph: Graph) -> dict[str, Node]:
        """Record every parameter as a ``requires_grad`` input of ``graph``."""
        return {
            name: graph.input(value, requires_grad=True, name=name)
            for name, value in self.values.items()
        }

    def copy(self) -> "ParamSet":
        """Deep copy of values and optimizer state."""
        return ParamSet(
            values={n: v.copy() for n, v in self.values.items()},
            state={
                n: AdamState(s.m.copy(), s.v.copy(), s.step)
                for n, s in self.state.items()
            },
        )

    def reset_state(self) -> None:
        """Forget optimizer moments, e.g. when a warm-started model begins a new run."""
        self.state = {n: AdamState.zeros_like(v) for n, v in self.values.items()}


def gradients_by_name(
    nodes: Mapping[str, Node], grads: Mapping[int, np.ndarray]
) -> dict[str, np.ndarray]:
    """Map the id-keyed output of :meth:`Graph.backward` back to parameter names."""
    return {name: grads[node.id] for name, node in nodes.items() if node.id in grads}


def adam_step(
    params: ParamSet,
    grads: Mapping[str, np.ndarray],
    lr: float,
    weight_decay: float = WEIGHT_DECAY,
) -> None:
    """Apply one Adam update in place to the parameters named in ``grads``.

    Weight decay is added to the gradient as ``weight_decay * w``.

    Raises:
        NumericError: If any gradient is non-finite.
    """
    if lr < 0.0:
        raise NumericError(f"learning rate must be non-negative, got {lr}")
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")

    for name, grad in grads.items():
        value = params.values[name]
        state = params.state[name]
        g = grad + weight_decay * value if weight_decay else grad
        state.step += 1
        state.m = BETA1 * state.m + (1.0 - BETA1) * g
        state.v = BETA2 * state.v + (1.0 - BETA2) * g * g
        m_hat = state.m / (1.0 - BETA1**state.step)
        v_hat = state.v / (1.0 - BETA2**state.step)
        params.values[name] = value - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
