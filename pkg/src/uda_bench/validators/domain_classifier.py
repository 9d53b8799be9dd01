"""Source-vs-target classifier behind DEV's importance weights."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from uda_bench.algorithms.losses import domain_bce, domain_labels
from uda_bench.diffcore import Graph, ParamSet, RngStream, adam_step, gradients_by_name
from uda_bench.models.config import ValidatorSettings
from uda_bench.networks.builders import MlpSpec, discriminator_spec, init_mlp, mlp_forward
from uda_bench.utils.exceptions import InputError

BATCH_SIZE = 64


@dataclass(frozen=True)
class DomainClassifier:
    """A trained discriminator; label 1 is the target domain."""

    spec: MlpSpec
    params: ParamSet

    def logits(self, features: np.ndarray) -> np.ndarray:
        graph = Graph()
        nodes = {name: graph.constant(v) for name, v in self.params.values.items()}
        out = mlp_forward(graph, nodes, self.spec, graph.constant(features), None)[-1]
        return out.value[:, 0]

    def target_probability(self, features: np.ndarray) -> np.ndarray:
        return expit(self.logits(features))

    __call__ = target_probability


def train_domain_classifier(
    src_features: np.ndarray,
    tgt_features: np.ndarray,
    settings: ValidatorSettings,
    rng: RngStream,
) -> DomainClassifier:
    """Fit a discriminator with BCE and Adam on shuffled mini-batches."""
    if len(src_features) == 0 or len(tgt_features) == 0:
        raise InputError("the domain classifier needs samples from both domains")
    X = np.vstack([src_features, tgt_features])
    y = domain_labels(len(src_features), len(tgt_features), source=0)
    spec = discriminator_spec(X.shape[1], settings.dev_hidden)
    params = init_mlp(spec, rng.child("init"))

    for epoch in range(settings.dev_epochs):
        order = rng.child("epoch", str(epoch)).permutation(len(X))
        for start in range(0, len(X), BATCH_SIZE):
            idx = order[start : start + BATCH_SIZE]
            graph = Graph()
            nodes = params.attach(graph)
            logits = mlp_forward(graph, nodes, spec, graph.constant(X[idx]), None)[-1]
            grads = graph.backward(domain_bce(graph, logits, y[idx]))
            adam_step(params, gradients_by_name(nodes, grads), settings.dev_lr)
    return DomainClassifier(spec=spec, params=params)
