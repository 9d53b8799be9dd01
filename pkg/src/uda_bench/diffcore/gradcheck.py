"""Central finite-difference gradient checking."""

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from uda_bench.diffcore.graph import Graph, Node, as_tensor

FD_STEP = 1e-5


@dataclass(frozen=True)
class GradCheckResult:
    analytic: dict[str, np.ndarray]
    numeric: dict[str, np.ndarray]
    rel_errors: dict[str, float]

    @property
    def max_rel_error(self) -> float:
        return max(self.rel_errors.values(), default=0.0)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return diff / max(scale, 1e-8)


def check_gradients(
    build: Callable[[Graph, dict[str, Node]], Node],
    inputs: Mapping[str, np.ndarray],
    h: float = FD_STEP,
) -> GradCheckResult:
    """Compare backward gradients with central differences.

    ``build`` receives a fresh graph and one ``requires_grad`` input node per
    entry of ``inputs`` and returns a scalar loss node. Detached values are
    replayed from the base point while perturbing, so they act as the
    constants backward treats them as.
    """
    graph = Graph()
    nodes = {
        name: graph.input(value, requires_grad=True, name=name)
        for name, value in inputs.items()
    }
    loss = build(graph, nodes)
    grads = graph.backward(loss)
    replay = graph.detached_values()
    base = {name: node.value.copy() for name, node in nodes.items()}

    analytic: dict[str, np.ndarray] = {}
    numeric: dict[str, np.ndarray] = {}
    errors: dict[str, float] = {}
    for name, node in nodes.items():
        estimate = np.zeros_like(base[name])
        for index in np.ndindex(*base[name].shape):
            values = []
            for sign in (1.0, -1.0):
                shifted = base[name].copy()
                shifted[index] += sign * h
                graph.bind(node, shifted)
                values.append(float(graph.evaluate(loss, replay=replay)[0, 0]))
            estimate[index] = (values[0] - values[1]) / (2.0 * h)
        graph.bind(node, base[name])
        analytic[name] = as_tensor(grads[node.id]).copy()
        numeric[name] = estimate
        errors[name] = relative_error(analytic[name], estimate)
    graph.evaluate(loss, replay=replay)
    return GradCheckResult(analytic=analytic, numeric=numeric, rel_errors=errors)
