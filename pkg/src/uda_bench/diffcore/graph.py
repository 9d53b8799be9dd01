"""Eager, define-by-run computation graph over dense float64 matrices.

Every op evaluates as soon as it is recorded, so building a loss is just
calling methods on a :class:`Graph`. :meth:`Graph.evaluate` recomputes every
node in recording order (which is a topological order) from the current
input bindings, and :meth:`Graph.backward` propagates gradients from a
scalar loss to every node that depends on an input created with
``requires_grad=True``.
"""

from collections.abc import Callable, Mapping
from typing import Any

import numpy as np

from uda_bench.diffcore.random import RngStream
from uda_bench.diffcore.rules import OP_RULES, OpKind
from uda_bench.utils.exceptions import InputError, NumericError, ShapeError

LOG_EPS = 1e-12


def as_tensor(value: Any) -> np.ndarray:
    """Coerce ``value`` to a 2-D float64 array (scalars become 1x1, vectors rows)."""
    array = np.array(value, dtype=np.float64)
    if array.ndim == 0:
        return array.reshape(1, 1)
    if array.ndim == 1:
        return array.reshape(1, -1)
    if array.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got an array of shape {array.shape}")
    return array


class Node:
    """One recorded value in a :class:`Graph`."""

    __slots__ = (
        "graph",
        "id",
        "kind",
        "parents",
        "attrs",
        "value",
        "grad",
        "needs_grad",
        "name",
    )

    def __init__(
        self,
        graph: "Graph",
        node_id: int,
        kind: OpKind,
        parents: tuple[int, ...],
        attrs: dict[str, Any],
        value: np.ndarray,
        needs_grad: bool,
        name: str | None = None,
    ):
        self.graph = graph
        self.id = node_id
        self.kind = kind
        self.parents = parents
        self.attrs = attrs
        self.value = value
        self.grad: np.ndarray | None = None
        self.needs_grad = needs_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        rows, cols = self.value.shape
        return rows, cols

    @property
    def T(self) -> "Node":  # noqa: N802
        return self.graph.transpose(self)

    def item(self) -> float:
        """Return the value of a 1x1 node as a float."""
        return float(self.value[0, 0])

    def _lift(self, other: "Node | float") -> "Node":
        return other if isinstance(other, Node) else self.graph.constant(other)

    def __add__(self, other: "Node | float") -> "Node":
        return self.graph.add(self, self._lift(other))

    def __radd__(self, other: float) -> "Node":
        return self.graph.add(self._lift(other), self)

    def __sub__(self, other: "Node | float") -> "Node":
        return self.graph.sub(self, self._lift(other))

    def __rsub__(self, other: float) -> "Node":
        return self.graph.sub(self._lift(other), self)

    def __mul__(self, other: "Node | float") -> "Node":
        if isinstance(other, Node):
            return self.graph.mul(self, other)
        return self.graph.scale(self, float(other))

    def __rmul__(self, other: float) -> "Node":
        return self.graph.scale(self, float(other))

    def __truediv__(self, other: "Node | float") -> "Node":
        if isinstance(other, Node):
            return self.graph.div(self, other)
        return self.graph.scale(self, 1.0 / float(other))

    def __rtruediv__(self, other: float) -> "Node":
        return self.graph.div(self._lift(other), self)

    def __neg__(self) -> "Node":
        return self.graph.neg(self)

    def __matmul__(self, other: "Node") -> "Node":
        return self.graph.matmul(self, other)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Node(#{self.id} {self.kind.value}{label} shape={self.value.shape})"


class Graph:
    """A tape of nodes; owned by a single thread."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []

    # -- recording -----------------------------------------------------------

    def _describe(self, node_id: int, kind: OpKind) -> str:
        return f"node #{node_id} ({kind.value})"

    def _run(
        self,
        node_id: int,
        kind: OpKind,
        inputs: list[np.ndarray],
        attrs: dict[str, Any],
    ) -> np.ndarray:
        rule = OP_RULES[kind]
        problem = rule.check([x.shape for x in inputs], attrs)
        if problem is not None:
            raise ShapeError(f"{self._describe(node_id, kind)}: {problem}")
        with np.errstate(all="ignore"):
            value = rule.forward(inputs, attrs)
        if not np.all(np.isfinite(value)):
            raise NumericError(
                f"{self._describe(node_id, kind)} produced non-finite values"
            )
        return value

    def _record(
        self,
        kind: OpKind,
        parents: tuple[Node, ...],
        attrs: dict[str, Any] | None = None,
    ) -> Node:
        attrs = attrs or {}
        for parent in parents:
            if parent.graph is not self:
                raise ShapeError(f"{parent!r} belongs to a different graph")
        node_id = len(self.nodes)
        value = self._run(node_id, kind, [p.value for p in parents], attrs)
        needs_grad = kind is not OpKind.DETACH and any(p.needs_grad for p in parents)
        node = Node(
            self, node_id, kind, tuple(p.id for p in parents), attrs, value, needs_grad
        )
        self.nodes.append(node)
        return node

    def input(
        self, value: Any, *, requires_grad: bool = False, name: str | None = None
    ) -> Node:
        """Record an input (leaf) node."""
        tensor = as_tensor(value).copy()
        if not np.all(np.isfinite(tensor)):
            raise NumericError(f"input {name or len(self.nodes)} is not finite")
        node = Node(
            self, len(self.nodes), OpKind.INPUT, (), {}, tensor, requires_grad, name
        )
        self.nodes.append(node)
        return node

    def constant(self, value: Any) -> Node:
        return self.input(value)

    def bind(self, node: Node, value: Any) -> None:
        """Replace the value of an input node; call :meth:`evaluate` afterwards."""
        if node.kind is not OpKind.INPUT:
            raise ShapeError(f"{node!r} is not an input node")
        tensor = as_tensor(value)
        if tensor.shape != node.value.shape:
            raise ShapeError(
                f"cannot bind shape {tensor.shape} to {node!r}"
            )
        node.value = tensor.copy()

    # -- ops -------------------------------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.MATMUL, (a, b))

    def add(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.ADD, (a, b))

    def sub(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.SUB, (a, b))

    def mul(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.MUL, (a, b))

    def div(self, a: Node, b: Node) -> Node:
        return self._record(OpKind.DIV, (a, b))

    def scale(self, a: Node, factor: float) -> Node:
        return self._record(OpKind.SCALE, (a,), {"factor": float(factor)})

    def relu(self, a: Node) -> Node:
        return self._record(OpKind.RELU, (a,))

    def exp(self, a: Node) -> Node:
        return self._record(OpKind.EXP, (a,))

    def log(self, a: Node, eps: float = LOG_EPS) -> Node:
        return self._record(OpKind.LOG, (a,), {"eps": eps})

    def neg(self, a: Node) -> Node:
        return self._record(OpKind.NEG, (a,))

    def abs(self, a: Node) -> Node:
        return self._record(OpKind.ABS, (a,))

    def sqrt(self, a: Node) -> Node:
        return self._record(OpKind.SQRT, (a,))

    def sum(self, a: Node, axis: int | None = None) -> Node:
        return self._record(OpKind.SUM, (a,), {"axis": axis})

    def mean(self, a: Node, axis: int | None = None) -> Node:
        return self._record(OpKind.MEAN, (a,), {"axis": axis})

    def softmax(self, a: Node) -> Node:
        return self._record(OpKind.ROW_SOFTMAX, (a,))

    def log_softmax(self, a: Node) -> Node:
        return self._record(OpKind.ROW_LOG_SOFTMAX, (a,))

    def dropout(self, a: Node, p: float, rng: RngStream | None) -> Node:
        """Inverted dropout; ``rng=None`` (evaluation mode) is the identity."""
        mask = None
        if rng is not None and p > 0.0:
            keep = 1.0 - p
            mask = rng.bernoulli(keep, a.value.shape) / keep
        return self._record(OpKind.DROPOUT_MASK, (a,), {"mask": mask, "p": p})

    def concat_rows(self, *parts: Node) -> Node:
        return self._record(OpKind.CONCAT_ROWS, parts)

    def svd_values(self, a: Node) -> Node:
        """Singular values of ``a`` as an (r, 1) column, descending."""
        return self._record(OpKind.SVD_SINGULAR_VALUES, (a,))

    def nuclear_norm(self, a: Node) -> Node:
        return self._record(OpKind.NUCLEAR_NORM, (a,))

    def grad_reverse(self, a: Node, lambda_grl: float) -> Node:
        if lambda_grl <= 0.0:
            raise InputError(f"lambda_grl must be positive, got {lambda_grl}")
        return self._record(OpKind.GRAD_REVERSE, (a,), {"lambda_grl": lambda_grl})

    def l2_row_norm(self, a: Node) -> Node:
        return self._record(OpKind.L2_ROW_NORM, (a,))

    def transpose(self, a: Node) -> Node:
        return self._record(OpKind.TRANSPOSE, (a,))

    def slice_rows(self, a: Node, start: int, stop: int) -> Node:
        return self._record(OpKind.SLICE_ROWS, (a,), {"start": start, "stop": stop})

    def sort_columns(self, a: Node) -> Node:
        return self._record(OpKind.SORT_COLUMNS, (a,))

    def detach(
        self, a: Node, transform: Callable[[np.ndarray], Any] | None = None
    ) -> Node:
        """Stop-gradient, optionally through a numpy ``transform`` of the value."""
        return self._record(OpKind.DETACH, (a,), {"transform": transform})

    # -- evaluation ------------------------------------------------------------

    def evaluate(
        self,
        output: Node | None = None,
        replay: Mapping[int, np.ndarray] | None = None,
    ) -> np.ndarray:
        """Recompute every node from the current input bindings.

        Args:
            output: Node whose value is returned (defaults to the last node).
            replay: Values to use for detach nodes instead of recomputing them.

        Returns:
            The value of ``output``.
        """
        if not self.nodes:
            raise ShapeError("cannot evaluate an empty graph")
        for node in self.nodes:
            if node.kind is OpKind.INPUT:
                continue
            if replay is not None and node.id in replay:
                node.value = replay[node.id]
                continue
            inputs = [self.nodes[p].value for p in node.parents]
            node.value = self._run(node.id, node.kind, inputs, node.attrs)
        return (output or self.nodes[-1]).value

    def detached_values(self) -> dict[int, np.ndarray]:
        """Snapshot of every detach node's current value, for :meth:`evaluate`."""
        return {
            n.id: n.value.copy() for n in self.nodes if n.kind is OpKind.DETACH
        }

    def backward(self, loss: Node) -> dict[int, np.ndarray]:
        """Propagate d(loss)/d(node) to every node on a gradient path.

        Returns:
            Gradients of the ``requires_grad`` input nodes, keyed by node id.
            Inputs the loss does not depend on receive zeros.

        Raises:
            ShapeError: If ``loss`` is not a 1x1 node of this graph.
        """
        if loss.graph is not self:
            raise ShapeError(f"{loss!r} belongs to a different graph")
        if loss.value.shape != (1, 1):
            raise ShapeError(
                f"backward needs a scalar loss, {self._describe(loss.id, loss.kind)} "
                f"has shape {loss.value.shape}"
            )
        for node in self.nodes:
            node.grad = None
        loss.grad = np.ones((1, 1))

        for node in reversed(self.nodes[: loss.id + 1]):
            if node.grad is None or node.kind is OpKind.INPUT or not node.needs_grad:
                continue
            parents = [self.nodes[p] for p in node.parents]
            grads = OP_RULES[node.kind].backward(
                node.grad, [p.value for p in parents], node.value, node.attrs
            )
            for parent, grad in zip(parents, grads):
                if grad is None or not parent.needs_grad:
                    continue
                parent.grad = grad if parent.grad is None else parent.grad + grad

        leaves: dict[int, np.ndarray] = {}
        for node in self.nodes:
            if node.kind is OpKind.INPUT and node.needs_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.value)
                leaves[node.id] = node.grad
        return leaves
