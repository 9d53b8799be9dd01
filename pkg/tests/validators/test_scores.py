"""Tests for accuracy, IM, SND and DEV scores."""

import math

import numpy as np
import pytest

from uda_bench.diffcore import RngStream
from uda_bench.validators import (
    accuracy,
    dev_risk,
    dev_score,
    im_score,
    importance_weights,
    information_maximization,
    neg_snd_score,
    oracle_score,
    snd_score,
    soft_neighborhood_density,
)
from uda_bench.utils.exceptions import (
    ConfigurationError,
    DegenerateVarianceError,
    InputError,
    NumericError,
)


def _probs(rng: RngStream, n: int, c: int) -> np.ndarray:
    logits = rng.normal(0.0, 2.0, (n, c))
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class TestAccuracy:
    """Test micro and macro accuracy."""

    def test_micro_and_macro_differ_on_imbalance(self) -> None:
        """Macro accuracy averages per-class recall."""
        labels = np.array([0, 0, 0, 1])
        preds = np.array([0, 0, 0, 0])

        assert accuracy(preds, labels, "micro") == 0.75
        assert accuracy(preds, labels, "macro") == 0.5

    def test_probability_matrix_input(self) -> None:
        """Probability rows are reduced by argmax."""
        preds = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
        assert accuracy(preds, np.array([0, 1, 1])) == pytest.approx(0.75)

    def test_absent_classes_are_ignored(self) -> None:
        """Only classes present in the labels are averaged."""
        assert accuracy(np.array([2, 2]), np.array([2, 2])) == 1.0

    def test_errors(self) -> None:
        """Empty or mismatched inputs are rejected."""
        with pytest.raises(InputError):
            accuracy(np.array([], dtype=np.int64), np.array([], dtype=np.int64))
        with pytest.raises(InputError):
            accuracy(np.array([0, 1]), np.array([0]))

    def test_oracle_needs_labels(self) -> None:
        """The oracle cannot run without target labels."""
        assert oracle_score(np.array([1, 0]), np.array([1, 1])).value == 0.5
        with pytest.raises(ConfigurationError):
            oracle_score(np.array([1, 0]), None)


class TestInformationMaximization:
    """Test the IM score."""

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed: int) -> None:
        """Vectorized IM equals an explicit double loop."""
        preds = _probs(RngStream(seed), 9, 4)
        n, c = preds.shape

        mean = [sum(preds[i, j] for i in range(n)) / n for j in range(c)]
        diversity = -sum(m * math.log(m) for m in mean)
        confidence = sum(
            -sum(preds[i, j] * math.log(preds[i, j]) for j in range(c)) for i in range(n)
        ) / n

        assert information_maximization(preds) == pytest.approx(diversity - confidence, abs=1e-10)

    def test_bounds(self) -> None:
        """Confident balanced predictions reach ln C; identical ones give 0."""
        assert im_score(np.eye(3)).value == pytest.approx(math.log(3))
        assert im_score(np.full((4, 3), 1 / 3)).value == pytest.approx(0.0, abs=1e-12)

    def test_empty_input(self) -> None:
        """At least one prediction row is needed."""
        with pytest.raises(InputError):
            information_maximization(np.zeros((0, 3)))


class TestSoftNeighborhoodDensity:
    """Test SND and its negation."""

    @pytest.mark.parametrize("n", [3, 5, 10])
    def test_identical_features(self, n: int) -> None:
        """Identical rows give a uniform distribution over N - 1 neighbours."""
        features = np.tile([[1.0, 2.0, -0.5]], (n, 1))
        assert soft_neighborhood_density(features) == pytest.approx(math.log(n - 1), abs=1e-12)

    def test_two_rows(self) -> None:
        """With two rows each has a single neighbour and zero entropy."""
        assert soft_neighborhood_density(np.array([[1.0, 0.0], [0.3, 0.7]])) == 0.0

    def test_negation_is_exact(self) -> None:
        """neg_snd is the exact negation of snd."""
        features = RngStream(4).normal(0.0, 1.0, (12, 5))
        assert neg_snd_score(features).value == -snd_score(features).value

    def test_range(self) -> None:
        """SND lies in [0, ln(N - 1)]."""
        features = RngStream(8).normal(0.0, 1.0, (20, 3))
        value = soft_neighborhood_density(features, temperature=0.5)
        assert 0.0 <= value <= math.log(19)

    def test_zero_norm_row(self) -> None:
        """Cosine similarity needs non-zero rows."""
        with pytest.raises(InputError, match="feature row 1"):
            soft_neighborhood_density(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))

    def test_invalid_arguments(self) -> None:
        """One row or a non-positive temperature is rejected."""
        with pytest.raises(InputError):
            soft_neighborhood_density(np.ones((1, 2)))
        with pytest.raises(InputError):
            soft_neighborhood_density(np.eye(3), temperature=0.0)


class TestDev:
    """Test the importance-weighted DEV risk."""

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed: int) -> None:
        """The control-variate estimate matches a loop implementation."""
        rng = RngStream(seed)
        losses = rng.child("loss").uniform(0.0, 3.0, (15,))
        probs = rng.child("prob").uniform(0.05, 0.95, (15,))
        n_src, n_tgt = 40, 30

        w = [(n_src / n_tgt) * q / (1 - q) for q in probs]
        wl = [a * b for a, b in zip(w, losses)]
        n = len(w)
        mean_w, mean_wl = sum(w) / n, sum(wl) / n
        var_w = sum((a - mean_w) ** 2 for a in w) / (n - 1)
        cov = sum((a - mean_wl) * (b - mean_w) for a, b in zip(wl, w)) / (n - 1)
        eta = -cov / var_w
        expected = mean_wl + eta * mean_w - eta

        assert dev_risk(losses, probs, n_src, n_tgt) == pytest.approx(expected, abs=1e-10)
        assert dev_score(losses, probs, n_src, n_tgt).value == pytest.approx(-expected, abs=1e-10)

    def test_constant_weights(self) -> None:
        """Equal weights have zero variance."""
        with pytest.raises(DegenerateVarianceError):
            dev_risk(np.array([1.0, 2.0, 3.0]), np.full(3, 0.4), 10, 10)

    def test_importance_weights(self) -> None:
        """Weights are (N_s / N_t) q / (1 - q); q = 1 is non-finite."""
        assert importance_weights(np.array([0.5, 0.75]), 20, 10).tolist() == [2.0, 6.0]
        with pytest.raises(NumericError):
            importance_weights(np.array([1.0]), 1, 1)

    def test_shape_checks(self) -> None:
        """Losses and probabilities must pair up."""
        with pytest.raises(InputError):
            dev_risk(np.array([1.0]), np.array([0.5]), 1, 1)
        with pytest.raises(InputError):
            dev_risk(np.array([1.0, 2.0]), np.array([0.5]), 1, 1)
        with pytest.raises(NumericError):
            dev_risk(np.array([1.0, np.nan]), np.array([0.2, 0.5]), 1, 1)
