"""Model bundles and the forward pass with feature taps."""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from uda_bench.diffcore import Graph, Node, ParamSet, RngStream
from uda_bench.models.config import FeatureLayer, ModelSettings
from uda_bench.networks.builders import (
    build_classifier,
    build_discriminator,
    build_residual,
    build_trunk,
    classifier_spec,
    discriminator_spec,
    linear,
    mlp_forward,
    residual_spec,
    trunk_spec,
)
from uda_bench.utils.exceptions import ConfigurationError, FormatError

FL8_INCOMPATIBLE = frozenset({"CDAN", "JMMD", "MCD", "SWD", "AFN", "RTN"})
TWO_CLASSIFIERS = frozenset({"MCD", "SWD"})

# Classifier layers that belong to the feature extractor under FL6.
_CLASSIFIER_BODY = ("linear0", "linear1")
_CLASSIFIER_HEAD = "linear2"

Selection = dict[str, list[str]]
"""Parameter names to update, grouped by bundle group."""


def base_algorithm(algorithm: str) -> str:
    """``"MCC-DANN"`` -> ``"MCC"``."""
    return algorithm.removesuffix("-DANN") if algorithm != "DANN" else algorithm


def check_feature_layer(algorithm: str, feature_layer: FeatureLayer) -> None:
    if feature_layer is FeatureLayer.FL8 and base_algorithm(algorithm) in FL8_INCOMPATIBLE:
        raise ConfigurationError(
            f"{algorithm} cannot adapt softmax-layer (FL8) features"
        )


@dataclass
class Taps:
    """Activations of one forward pass."""

    fl0: Node
    fl6: Node
    logits: Node
    preds: Node
    features: Node
    logits2: Node | None = None
    preds2: Node | None = None


@dataclass
class ModelBundle:
    """Trunk, classifier(s) and optional discriminator/residual parameters.

    Groups are ``trunk``, ``classifier``, ``classifier2`` (MCD/SWD),
    ``discriminator`` and ``residual`` (RTN).
    """

    input_dim: int
    num_classes: int
    settings: ModelSettings
    groups: dict[str, ParamSet] = field(default_factory=dict)
    feature_layer: FeatureLayer = FeatureLayer.FL0
    algorithm: str = "SourceOnly"

    @property
    def trunk(self) -> ParamSet:
        return self.groups["trunk"]

    @property
    def classifiers(self) -> list[ParamSet]:
        return [self.groups[g] for g in ("classifier", "classifier2") if g in self.groups]

    @property
    def discriminator(self) -> ParamSet | None:
        return self.groups.get("discriminator")

    @property
    def feature_dim(self) -> int:
        if self.feature_layer is FeatureLayer.FL0:
            return self.settings.trunk_width
        if self.feature_layer is FeatureLayer.FL6:
            return self.settings.classifier_hidden[1]
        return self.num_classes

    def clone(self) -> "ModelBundle":
        return ModelBundle(
            input_dim=self.input_dim,
            num_classes=self.num_classes,
            settings=self.settings,
            groups={g: p.copy() for g, p in self.groups.items()},
            feature_layer=self.feature_layer,
            algorithm=self.algorithm,
        )

    def attach(self, graph: Graph) -> dict[str, dict[str, Node]]:
        return {group: params.attach(graph) for group, params in self.groups.items()}

    def num_parameters(self) -> int:
        return sum(p.num_parameters() for p in self.groups.values())

    # -- update selections ---------------------------------------------------

    def _all(self, *groups: str) -> Selection:
        return {g: self.groups[g].names() for g in groups if g in self.groups}

    def generator_params(self) -> Selection:
        """Parameters producing the adapted features."""
        if self.feature_layer is FeatureLayer.FL0:
            return self._all("trunk")
        if self.feature_layer is FeatureLayer.FL6:
            selection = self._all("trunk")
            selection["classifier"] = [
                n for n in self.groups["classifier"].names() if n.split(".")[0] in _CLASSIFIER_BODY
            ]
            return selection
        return self._all("trunk", "classifier")

    def head_params(self) -> Selection:
        """Classifier parameters that sit above the feature tap."""
        selection: Selection = {}
        if self.feature_layer is FeatureLayer.FL6:
            selection["classifier"] = self.groups["classifier"].names(_CLASSIFIER_HEAD)
        elif self.feature_layer is FeatureLayer.FL0:
            selection["classifier"] = self.groups["classifier"].names()
        selection.update(self._all("classifier2", "residual"))
        return selection

    def model_params(self) -> Selection:
        """Everything except the discriminator."""
        return merge_selections(self.generator_params(), self.head_params())

    def discriminator_params(self) -> Selection:
        return self._all("discriminator")

    # -- state -------------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            f"{group}/{name}": value
            for group, params in self.groups.items()
            for name, value in params.values.items()
        }

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        """Replace parameter values; names and shapes must match exactly."""
        expected = self.state_dict()
        if set(state) != set(expected):
            missing = sorted(set(expected) - set(state))
            extra = sorted(set(state) - set(expected))
            raise FormatError(
                f"checkpoint parameters differ (missing {missing}, unexpected {extra})"
            )
        for key, value in state.items():
            if value.shape != expected[key].shape:
                raise FormatError(
                    f"parameter {key} has shape {value.shape}, "
                    f"expected {expected[key].shape}"
                )
            group, name = key.split("/", 1)
            self.groups[group].values[name] = np.array(value, dtype=np.float64)


def merge_selections(*selections: Selection) -> Selection:
    merged: Selection = {}
    for selection in selections:
        for group, names in selection.items():
            merged.setdefault(group, [])
            merged[group].extend(n for n in names if n not in merged[group])
    return merged


def build_source_only_bundle(
    input_dim: int, num_classes: int, settings: ModelSettings, rng: RngStream
) -> ModelBundle:
    trunk = build_trunk(input_dim, settings.trunk_width, rng.child("trunk"))
    classifier = build_classifier(
        settings.trunk_width,
        num_classes,
        rng.child("classifier"),
        hidden=settings.classifier_hidden,
        dropout=settings.dropout,
    )
    return ModelBundle(
        input_dim=input_dim,
        num_classes=num_classes,
        settings=settings,
        groups={"trunk": trunk, "classifier": classifier},
    )


def adapt_bundle(
    source_only: ModelBundle,
    algorithm: str,
    feature_layer: FeatureLayer,
    rng: RngStream,
    discriminator_input: int | None = None,
    needs_discriminator: bool = False,
    needs_residual: bool = False,
) -> ModelBundle:
    """Copy a source-only model and add the parts ``algorithm`` trains.

    The copy starts with fresh optimizer state.
    """
    check_feature_layer(algorithm, feature_layer)
    bundle = source_only.clone()
    bundle.algorithm = algorithm
    bundle.feature_layer = feature_layer
    for params in bundle.groups.values():
        params.reset_state()
    settings = bundle.settings

    if base_algorithm(algorithm) in TWO_CLASSIFIERS:
        second = build_classifier(
            settings.trunk_width,
            bundle.num_classes,
            rng.child("classifier2"),
            hidden=settings.classifier_hidden,
            dropout=settings.dropout,
        )
        if feature_layer is FeatureLayer.FL6:
            head = ParamSet()
            for name in second.names(_CLASSIFIER_HEAD):
                head.add(name, second[name])
            second = head
        bundle.groups["classifier2"] = second
    if needs_discriminator:
        bundle.groups["discriminator"] = build_discriminator(
            discriminator_input or bundle.feature_dim,
            rng.child("discriminator"),
            hidden=settings.discriminator_hidden,
        )
    if needs_residual:
        bundle.groups["residual"] = build_residual(bundle.num_classes, rng.child("residual"))
    return bundle


def forward_with_taps(
    bundle: ModelBundle,
    graph: Graph,
    nodes: Mapping[str, Mapping[str, Node]],
    x: Node,
    rng: RngStream | None,
) -> Taps:
    """Forward ``x`` through trunk and classifier(s).

    ``rng=None`` runs in evaluation mode (dropout off).
    """
    check_feature_layer(bundle.algorithm, bundle.feature_layer)
    if x.shape[1] != bundle.input_dim:
        raise ConfigurationError(
            f"batch width {x.shape[1]} does not match trunk input {bundle.input_dim}"
        )
    settings = bundle.settings
    trunk_out = mlp_forward(
        graph, nodes["trunk"], trunk_spec(bundle.input_dim, settings.trunk_width), x, rng
    )
    fl0 = graph.relu(trunk_out[-1])
    spec = classifier_spec(
        settings.trunk_width, bundle.num_classes, settings.classifier_hidden, settings.dropout
    )
    _, fl6, logits = mlp_forward(graph, nodes["classifier"], spec, fl0, rng)
    preds = graph.softmax(logits)

    logits2 = preds2 = None
    if "classifier2" in nodes:
        if bundle.feature_layer is FeatureLayer.FL6:
            logits2 = linear(graph, nodes["classifier2"], _CLASSIFIER_HEAD, fl6)
        else:
            logits2 = mlp_forward(graph, nodes["classifier2"], spec, fl0, rng)[-1]
        preds2 = graph.softmax(logits2)

    features = {FeatureLayer.FL0: fl0, FeatureLayer.FL6: fl6, FeatureLayer.FL8: preds}
    return Taps(
        fl0=fl0,
        fl6=fl6,
        logits=logits,
        preds=preds,
        features=features[bundle.feature_layer],
        logits2=logits2,
        preds2=preds2,
    )


def discriminator_forward(
    bundle: ModelBundle,
    graph: Graph,
    nodes: Mapping[str, Mapping[str, Node]],
    features: Node,
) -> Node:
    """Domain logits of shape (batch, 1)."""
    if "discriminator" not in nodes:
        raise ConfigurationError(f"{bundle.algorithm} bundle has no discriminator")
    spec = discriminator_spec(features.shape[1], bundle.settings.discriminator_hidden)
    return mlp_forward(graph, nodes["discriminator"], spec, features, None)[-1]


def residual_forward(
    bundle: ModelBundle,
    graph: Graph,
    nodes: Mapping[str, Mapping[str, Node]],
    logits: Node,
) -> Node:
    """RTN residual ``r(logits)``."""
    spec = residual_spec(bundle.num_classes)
    return mlp_forward(graph, nodes["residual"], spec, logits, None)[-1]


@dataclass(frozen=True)
class Prediction:
    features: np.ndarray
    preds: np.ndarray
    logits: np.ndarray


def predict(bundle: ModelBundle, X: np.ndarray) -> Prediction:
    """Evaluation-mode forward pass (dropout off, no gradients)."""
    graph = Graph()
    nodes = {
        group: {name: graph.constant(v) for name, v in params.values.items()}
        for group, params in bundle.groups.items()
    }
    taps = forward_with_taps(bundle, graph, nodes, graph.constant(X), None)
    return Prediction(
        features=taps.features.value, preds=taps.preds.value, logits=taps.logits.value
    )
