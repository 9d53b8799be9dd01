"""Tests for the eager computation graph."""

import numpy as np
import pytest

from uda_bench.diffcore import Graph, OpKind, RngStream, as_tensor
from uda_bench.utils.exceptions import InputError, NumericError, ShapeError


class TestAsTensor:
    """Test coercion to 2-D float arrays."""

    def test_scalars_and_vectors(self) -> None:
        """Scalars become 1x1 and vectors become rows."""
        assert as_tensor(3).shape == (1, 1)
        assert as_tensor([1, 2, 3]).shape == (1, 3)
        assert as_tensor([[1], [2]]).dtype == np.float64

    def test_rejects_higher_rank(self) -> None:
        """Three-dimensional arrays are not tensors."""
        with pytest.raises(ShapeError):
            as_tensor(np.zeros((2, 2, 2)))


class TestForward:
    """Test eager evaluation of ops."""

    def test_ops_evaluate_on_record(self) -> None:
        """Values are available as soon as the op is recorded."""
        graph = Graph()
        a = graph.input([[1.0, 2.0], [3.0, 4.0]])
        b = graph.input([[1.0], [1.0]])

        assert np.array_equal((a @ b).value, [[3.0], [7.0]])
        assert np.array_equal((a * 2.0).value, [[2.0, 4.0], [6.0, 8.0]])
        assert np.array_equal((1.0 - a).value, [[0.0, -1.0], [-2.0, -3.0]])
        assert graph.sum(a).item() == 10.0
        assert np.array_equal(graph.mean(a, axis=0).value, [[2.0, 3.0]])
        assert np.array_equal(graph.sum(a, axis=1).value, [[3.0], [7.0]])
        assert np.array_equal(a.T.value, [[1.0, 3.0], [2.0, 4.0]])

    def test_softmax_rows_sum_to_one(self) -> None:
        """Row softmax is a distribution per row and matches log-softmax."""
        graph = Graph()
        logits = graph.input([[1000.0, 0.0, -5.0], [0.1, 0.2, 0.3]])

        probs = graph.softmax(logits)
        log_probs = graph.log_softmax(logits)

        assert np.allclose(probs.value.sum(axis=1), 1.0)
        assert np.allclose(np.exp(log_probs.value), probs.value)

    def test_shape_mismatch_names_the_node(self) -> None:
        """Incompatible operands raise ShapeError naming node id and kind."""
        graph = Graph()
        a = graph.input(np.zeros((2, 3)))
        b = graph.input(np.zeros((2, 3)))

        with pytest.raises(ShapeError, match=r"node #2 \(matmul\)"):
            graph.matmul(a, b)

    def test_non_finite_forward_raises(self) -> None:
        """A NaN produced by an op is reported with the op that made it."""
        graph = Graph()
        x = graph.input([[-1.0]])

        with pytest.raises(NumericError, match=r"node #1 \(log\)"):
            graph.log(x)

    def test_non_finite_input_raises(self) -> None:
        """Inputs must be finite."""
        with pytest.raises(NumericError):
            Graph().input([[np.inf]])

    def test_nodes_of_other_graphs_are_rejected(self) -> None:
        """Ops cannot mix nodes of two graphs."""
        a = Graph().input([[1.0]])
        other = Graph()
        with pytest.raises(ShapeError, match="different graph"):
            other.add(other.input([[1.0]]), a)

    def test_slice_and_concat(self) -> None:
        """Row slices and concatenation."""
        graph = Graph()
        a = graph.input([[1.0], [2.0], [3.0]])

        assert np.array_equal(graph.slice_rows(a, 1, 3).value, [[2.0], [3.0]])
        assert graph.concat_rows(a, a).shape == (6, 1)
        with pytest.raises(ShapeError):
            graph.slice_rows(a, 2, 5)

    def test_sort_columns(self) -> None:
        """Columns are sorted independently."""
        graph = Graph()
        a = graph.input([[3.0, 1.0], [1.0, 2.0], [2.0, 0.0]])

        assert np.array_equal(
            graph.sort_columns(a).value, [[1.0, 0.0], [2.0, 1.0], [3.0, 2.0]]
        )


class TestDropout:
    """Test inverted dropout."""

    def test_evaluation_mode_is_identity(self) -> None:
        """Without a stream dropout passes values through."""
        graph = Graph()
        x = graph.input(np.ones((4, 5)))

        dropped = graph.dropout(x, 0.5, None)

        assert dropped.kind is OpKind.DROPOUT_MASK
        assert np.array_equal(dropped.value, x.value)

    def test_mask_is_rescaled_and_reused_in_backward(self) -> None:
        """Kept entries are scaled by 1/keep and the gradient is the mask."""
        graph = Graph()
        x = graph.input(np.ones((50, 4)), requires_grad=True)

        dropped = graph.dropout(x, 0.5, RngStream(3).child("dropout"))
        grads = graph.backward(graph.sum(dropped))

        assert set(np.unique(dropped.value)) <= {0.0, 2.0}
        assert np.array_equal(grads[x.id], dropped.value)

    def test_same_stream_same_mask(self) -> None:
        """Masks are reproducible from the stream path."""
        g1, g2 = Graph(), Graph()
        m1 = g1.dropout(g1.input(np.ones((8, 8))), 0.3, RngStream(9).child("d"))
        m2 = g2.dropout(g2.input(np.ones((8, 8))), 0.3, RngStream(9).child("d"))
        assert np.array_equal(m1.value, m2.value)


class TestBackward:
    """Test reverse-mode propagation."""

    def test_simple_chain(self) -> None:
        """d/dx sum(x * x) = 2x."""
        graph = Graph()
        x = graph.input([[1.0, -2.0]], requires_grad=True)

        grads = graph.backward(graph.sum(x * x))

        assert np.array_equal(grads[x.id], [[2.0, -4.0]])

    def test_broadcast_gradient_is_reduced(self) -> None:
        """A broadcast row receives the column sums of the gradient."""
        graph = Graph()
        x = graph.input(np.ones((3, 2)))
        bias = graph.input([[0.5, -0.5]], requires_grad=True)

        grads = graph.backward(graph.sum(x + bias))

        assert np.array_equal(grads[bias.id], [[3.0, 3.0]])

    def test_unused_inputs_get_zero_gradients(self) -> None:
        """Inputs the loss does not depend on still appear, with zeros."""
        graph = Graph()
        used = graph.input([[2.0]], requires_grad=True)
        unused = graph.input([[1.0, 1.0]], requires_grad=True)

        grads = graph.backward(used * 3.0)

        assert grads[used.id].item() == 3.0
        assert np.array_equal(grads[unused.id], [[0.0, 0.0]])

    def test_loss_must_be_scalar(self) -> None:
        """Backward from a non-1x1 node is a ShapeError."""
        graph = Graph()
        x = graph.input([[1.0, 2.0]], requires_grad=True)

        with pytest.raises(ShapeError, match="scalar"):
            graph.backward(x * 2.0)

    def test_detach_blocks_gradient(self) -> None:
        """Gradients do not flow through detach."""
        graph = Graph()
        x = graph.input([[3.0]], requires_grad=True)

        loss = x * graph.detach(x)
        grads = graph.backward(loss)

        assert grads[x.id].item() == 3.0

    def test_gradient_reversal(self) -> None:
        """Identity forward, gradient scaled by -lambda backward."""
        graph = Graph()
        x = graph.input([[1.0, 2.0]], requires_grad=True)

        reversed_x = graph.grad_reverse(x, 0.5)
        grads = graph.backward(graph.sum(reversed_x))

        assert np.array_equal(reversed_x.value, x.value)
        assert np.array_equal(grads[x.id], [[-0.5, -0.5]])

    def test_gradient_reversal_requires_positive_lambda(self) -> None:
        """Non-positive lambda is an input error."""
        graph = Graph()
        x = graph.input([[1.0]])
        for bad in (0.0, -1.0):
            with pytest.raises(InputError):
                graph.grad_reverse(x, bad)


class TestEvaluate:
    """Test recomputation from rebound inputs."""

    def test_rebinding_recomputes(self) -> None:
        """Binding a new value and evaluating updates downstream nodes."""
        graph = Graph()
        x = graph.input([[1.0, 2.0]])
        loss = graph.sum(x * x)

        graph.bind(x, [[3.0, 4.0]])

        assert graph.evaluate(loss).item() == 25.0
        assert loss.item() == 25.0

    def test_replay_holds_detached_values(self) -> None:
        """Replayed detach nodes keep their snapshot values."""
        graph = Graph()
        x = graph.input([[2.0]])
        loss = x * graph.detach(x)
        snapshot = graph.detached_values()

        graph.bind(x, [[5.0]])

        assert graph.evaluate(loss, replay=snapshot).item() == 10.0
        assert graph.evaluate(loss).item() == 25.0

    def test_bind_checks_shape_and_kind(self) -> None:
        """Only input nodes can be rebound, with their original shape."""
        graph = Graph()
        x = graph.input([[1.0, 2.0]])
        y = x * 2.0

        with pytest.raises(ShapeError):
            graph.bind(x, [[1.0]])
        with pytest.raises(ShapeError):
            graph.bind(y, [[1.0, 2.0]])

    def test_empty_graph(self) -> None:
        """An empty graph has nothing to evaluate."""
        with pytest.raises(ShapeError):
            Graph().evaluate()
