"""Finite-difference checks of every differentiable op."""

from collections.abc import Callable

import numpy as np
import pytest

from uda_bench.diffcore import Graph, Node, RngStream, check_gradients
from uda_bench.diffcore.gradcheck import relative_error

OpBuilder = Callable[[Graph, dict[str, Node]], Node]

TOLERANCE = 1e-4

SHAPES: dict[str, tuple[int, int]] = {
    "a": (5, 3),
    "b": (3, 2),
    "c": (5, 3),
    "row": (1, 3),
    "col": (5, 1),
}

OPS: dict[str, tuple[tuple[str, ...], OpBuilder]] = {
    "matmul": (("a", "b"), lambda g, n: g.matmul(n["a"], n["b"])),
    "add-broadcast": (("a", "row"), lambda g, n: g.add(n["a"], n["row"])),
    "sub-broadcast": (("a", "col"), lambda g, n: g.sub(n["a"], n["col"])),
    "mul": (("a", "c"), lambda g, n: g.mul(n["a"], n["c"])),
    "div": (("a", "row"), lambda g, n: g.div(n["a"], g.exp(n["row"]))),
    "scale": (("a",), lambda g, n: g.scale(n["a"], -2.5)),
    "relu": (("a",), lambda g, n: g.relu(n["a"])),
    "exp": (("a",), lambda g, n: g.exp(n["a"])),
    "log": (("a",), lambda g, n: g.log(g.softmax(n["a"]))),
    "neg": (("a",), lambda g, n: g.neg(n["a"])),
    "abs": (("a",), lambda g, n: g.abs(n["a"])),
    "sqrt": (("a",), lambda g, n: g.sqrt(g.exp(n["a"]))),
    "sum": (("a",), lambda g, n: g.sum(n["a"], axis=0)),
    "sum-rows": (("a",), lambda g, n: g.sum(n["a"], axis=1)),
    "mean": (("a",), lambda g, n: g.mean(n["a"])),
    "mean-cols": (("a",), lambda g, n: g.mean(n["a"], axis=0)),
    "softmax": (("a",), lambda g, n: g.softmax(n["a"])),
    "log-softmax": (("a",), lambda g, n: g.log_softmax(n["a"])),
    "concat": (("a", "c"), lambda g, n: g.concat_rows(n["a"], n["c"])),
    "slice": (("a",), lambda g, n: g.slice_rows(n["a"], 1, 4)),
    "transpose": (("a",), lambda g, n: g.transpose(n["a"])),
    "sort": (("a",), lambda g, n: g.sort_columns(n["a"])),
    "svd": (("a",), lambda g, n: g.svd_values(n["a"])),
    "svd-wide": (("a",), lambda g, n: g.svd_values(g.transpose(n["a"]))),
    "nuclear": (("a",), lambda g, n: g.nuclear_norm(n["a"])),
    "row-norm": (("a",), lambda g, n: g.l2_row_norm(n["a"])),
    "dropout": (
        ("a",),
        lambda g, n: g.dropout(n["a"], 0.4, RngStream(5).child("dropout")),
    ),
}


def _weighted(op: OpBuilder) -> OpBuilder:
    """Reduce an op's output to a scalar with fixed, asymmetric weights."""

    def build(graph: Graph, nodes: dict[str, Node]) -> Node:
        out = op(graph, nodes)
        weights = RngStream(11).child("weights").normal(0.0, 1.0, out.shape)
        return graph.sum(graph.mul(out, graph.constant(weights)))

    return build


class TestOpGradients:
    """Analytic gradients match central differences."""

    @pytest.mark.parametrize("name", sorted(OPS))
    @pytest.mark.parametrize("seed", range(3))
    def test_op_gradient(self, name: str, seed: int) -> None:
        """Every op passes a relative-error check on random inputs."""
        names, op = OPS[name]
        rng = RngStream(seed).child(name)
        inputs = {k: rng.normal(0.0, 1.0, SHAPES[k]) for k in names}

        result = check_gradients(_weighted(op), inputs)

        assert result.max_rel_error < TOLERANCE, result.rel_errors

    def test_check_restores_bindings(self) -> None:
        """Inputs are left at the base point after checking."""
        base = np.array([[0.3, -0.2]])
        seen: list[Node] = []

        def build(graph: Graph, nodes: dict[str, Node]) -> Node:
            seen.append(nodes["x"])
            return graph.sum(graph.mul(nodes["x"], nodes["x"]))

        check_gradients(build, {"x": base})

        assert np.array_equal(seen[0].value, base)

    def test_detects_wrong_gradient(self) -> None:
        """A gradient-reversed path fails the check."""
        result = check_gradients(
            lambda g, n: g.sum(g.grad_reverse(n["x"], 1.0)), {"x": np.ones((2, 2))}
        )

        assert np.allclose(result.analytic["x"], -result.numeric["x"])
        assert result.max_rel_error == pytest.approx(1.0)


class TestRelativeError:
    """Test the error metric."""

    def test_zero_gradients(self) -> None:
        """Two zero gradients agree exactly."""
        assert relative_error(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0

    def test_scale_invariant(self) -> None:
        """The metric is relative to the gradient magnitude."""
        a = np.array([[1.0, 2.0]])
        assert relative_error(a, 1.01 * a) == pytest.approx(
            relative_error(100 * a, 101 * a)
        )
