"""Per-algorithm training steps.

An adapter turns one paired source/target batch into one or more optimizer
updates of a :class:`ModelBundle`. Single-phase algorithms add their terms to
the source cross entropy and update every model parameter at once (X-DANN
combinations also add the DANN domain term); DC, CDAN and ITL alternate a
discriminator phase and a generator phase; MCD and SWD run the three-phase
classifier discrepancy protocol.
"""

from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from uda_bench.algorithms import losses
from uda_bench.algorithms.losses import LossReport, MemoryBank
from uda_bench.algorithms.spaces import split_combination, validate_config
from uda_bench.diffcore import Graph, Node, RngStream, adam_step
from uda_bench.models.config import AlgorithmConfig, FeatureLayer, ModelSettings
from uda_bench.networks import (
    ModelBundle,
    Selection,
    Taps,
    adapt_bundle,
    discriminator_forward,
    forward_with_taps,
    merge_selections,
    predict,
    residual_forward,
)
from uda_bench.networks.bundle import check_feature_layer
from uda_bench.utils.exceptions import ConfigurationError

Nodes = Mapping[str, Mapping[str, Node]]


@dataclass(frozen=True)
class Batch:
    """Paired source and target mini-batches.

    ``tgt_indices`` index the target-train split (the ATDOC memory bank).
    """

    x_src: np.ndarray
    y_src: np.ndarray
    x_tgt: np.ndarray
    tgt_indices: np.ndarray


def run_phase(
    bundle: ModelBundle,
    selection: Selection,
    build: Callable[[Graph, Nodes], LossReport],
    lr: float,
) -> LossReport:
    """Build a loss on a fresh graph and take one Adam step on ``selection``.

    A report whose weights are all zero takes no step.
    """
    graph = Graph()
    nodes = bundle.attach(graph)
    report = build(graph, nodes)
    if report.inactive:
        return report
    grads = graph.backward(report.total(graph))
    for group, names in selection.items():
        adam_step(
            bundle.groups[group],
            {name: grads[nodes[group][name].id] for name in names},
            lr,
        )
    return report


def prefixed(prefix: str, report: LossReport) -> LossReport:
    for term in report.terms:
        term.name = f"{prefix}:{term.name}"
    return report


class Adapter(ABC):
    """Training-step composition for one algorithm id."""

    algorithm: ClassVar[str]
    uses_discriminator: ClassVar[bool] = False
    uses_residual: ClassVar[bool] = False

    def __init__(self, config: AlgorithmConfig, settings: ModelSettings, rng: RngStream):
        validate_config(config)
        self.config = config
        self.settings = settings
        self.rng = rng
        _, self.with_dann = split_combination(config.algorithm)
        self.needs_discriminator = self.uses_discriminator or self.with_dann

    def hp(self, name: str) -> float:
        return self.config.value(name)

    @property
    def lambda_L(self) -> float:
        return self.hp("lambda_L")

    def discriminator_input(self) -> int | None:
        """Discriminator width; ``None`` means the feature width."""
        return None

    def build_bundle(
        self, source_only: ModelBundle, feature_layer: FeatureLayer
    ) -> ModelBundle:
        """Copy the warm-start model and add what this algorithm trains."""
        return adapt_bundle(
            source_only,
            self.config.algorithm,
            feature_layer,
            self.rng.child("init"),
            discriminator_input=self.discriminator_input(),
            needs_discriminator=self.needs_discriminator,
            needs_residual=self.uses_residual,
        )

    def prepare(self, bundle: ModelBundle, target_train: np.ndarray) -> None:
        """Per-trial setup run once before the first step."""

    def _forward(
        self, bundle: ModelBundle, graph: Graph, nodes: Nodes, x: np.ndarray, rng: RngStream
    ) -> Taps:
        return forward_with_taps(bundle, graph, nodes, graph.constant(x), rng)

    def _discriminator(
        self, bundle: ModelBundle, graph: Graph, nodes: Nodes
    ) -> Callable[[Node], Node]:
        return lambda features: discriminator_forward(bundle, graph, nodes, features)

    @abstractmethod
    def step(
        self, bundle: ModelBundle, batch: Batch, lr: float, rng: RngStream
    ) -> LossReport:
        """Run every phase of one batch and return the loss terms."""


# -- single phase --------------------------------------------------------------------


class SinglePhaseAdapter(Adapter):
    """Source CE plus algorithm terms, one update of all parameters."""

    include_src_ce: ClassVar[bool] = True

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        return LossReport()

    def after_step(self, bundle: ModelBundle, batch: Batch, tgt: Taps) -> None:
        """Hook run after the optimizer step."""

    def step(
        self, bundle: ModelBundle, batch: Batch, lr: float, rng: RngStream
    ) -> LossReport:
        taps: dict[str, Taps] = {}

        def build(graph: Graph, nodes: Nodes) -> LossReport:
            src = self._forward(bundle, graph, nodes, batch.x_src, rng.child("src"))
            tgt = self._forward(bundle, graph, nodes, batch.x_tgt, rng.child("tgt"))
            taps["tgt"] = tgt
            report = LossReport()
            if self.include_src_ce:
                report.add(
                    "src_ce", self.lambda_L, losses.cross_entropy(graph, src.preds, batch.y_src)
                )
            report.extend(self.terms(graph, nodes, bundle, src, tgt, batch))
            if self.with_dann:
                report.extend(
                    losses.dann_losses(
                        graph,
                        src.features,
                        tgt.features,
                        self._discriminator(bundle, graph, nodes),
                        self.hp("lambda_D"),
                        self.hp("lambda_grl"),
                    )
                )
            return report

        selection = merge_selections(bundle.model_params(), bundle.discriminator_params())
        report = run_phase(bundle, selection, build, lr)
        self.after_step(bundle, batch, taps["tgt"])
        return report


class SourceOnlyAdapter(SinglePhaseAdapter):
    algorithm = "SourceOnly"

    @property
    def lambda_L(self) -> float:
        return 1.0


class DannAdapter(SinglePhaseAdapter):
    algorithm = "DANN"
    uses_discriminator = True

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        return losses.dann_losses(
            graph,
            src.features,
            tgt.features,
            self._discriminator(bundle, graph, nodes),
            self.hp("lambda_D"),
            self.hp("lambda_grl"),
        )


class MmdAdapter(SinglePhaseAdapter):
    algorithm = "MMD"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.mmd_loss(
            graph, src.features, tgt.features, int(self.hp("gamma_exp")), 1.0
        )
        return LossReport().add("mmd", self.hp("lambda_F"), value)


class JmmdAdapter(SinglePhaseAdapter):
    algorithm = "JMMD"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.jmmd_loss(
            graph,
            [src.features, src.preds],
            [tgt.features, tgt.preds],
            int(self.hp("gamma_exp")),
            1.0,
        )
        return LossReport().add("jmmd", self.hp("lambda_F"), value)


class CoralAdapter(SinglePhaseAdapter):
    algorithm = "CORAL"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.coral_loss(graph, src.features, tgt.features, 1.0)
        return LossReport().add("coral", self.hp("lambda_F"), value)


class MinEntAdapter(SinglePhaseAdapter):
    algorithm = "MinEnt"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.minent_loss(graph, tgt.preds, 1.0)
        return LossReport().add("minent", self.hp("lambda_ent"), value)


class ImAdapter(SinglePhaseAdapter):
    algorithm = "IM"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.im_loss(graph, tgt.preds, 1.0)
        return LossReport().add("im", self.hp("lambda_imax"), value)


class MccAdapter(SinglePhaseAdapter):
    algorithm = "MCC"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.mcc_loss(graph, tgt.logits, self.hp("T_mcc"), 1.0)
        return LossReport().add("mcc", self.hp("lambda_mcc"), value)


class BspAdapter(SinglePhaseAdapter):
    algorithm = "BSP"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.bsp_loss(graph, src.features, tgt.features, 1.0)
        return LossReport().add("bsp", self.hp("lambda_bsp"), value)


class BnmAdapter(SinglePhaseAdapter):
    algorithm = "BNM"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.bnm_loss(graph, tgt.preds, 1.0)
        return LossReport().add("bnm", self.hp("lambda_bnm"), value)


class AfnAdapter(SinglePhaseAdapter):
    algorithm = "AFN"

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        value = losses.afn_loss(graph, src.features, tgt.features, self.hp("S_afn"), 1.0)
        return LossReport().add("afn", self.hp("lambda_afn"), value)


class AtdocAdapter(SinglePhaseAdapter):
    algorithm = "ATDOC"

    def __init__(self, config: AlgorithmConfig, settings: ModelSettings, rng: RngStream):
        super().__init__(config, settings, rng)
        self.bank: MemoryBank | None = None

    def prepare(self, bundle: ModelBundle, target_train: np.ndarray) -> None:
        """Fill the bank with current features and uniform predictions."""
        features = predict(bundle, target_train).features
        self.bank = MemoryBank.with_uniform_preds(features, bundle.num_classes)

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        if self.bank is None:
            raise ConfigurationError("ATDOC needs a memory bank; call prepare() first")
        value = losses.atdoc_pseudo_loss(
            graph,
            tgt.features,
            tgt.preds,
            self.bank,
            int(self.hp("k_atdoc")),
            1.0,
            indices=batch.tgt_indices,
        )
        return LossReport().add("atdoc", self.hp("lambda_atdoc"), value)

    def after_step(self, bundle: ModelBundle, batch: Batch, tgt: Taps) -> None:
        """Refresh the batch rows with evaluation-mode outputs of the updated model."""
        assert self.bank is not None
        current = predict(bundle, batch.x_tgt)
        self.bank.update(batch.tgt_indices, current.features, current.preds)


class RtnAdapter(SinglePhaseAdapter):
    algorithm = "RTN"
    uses_residual = True
    include_src_ce = False

    def terms(
        self,
        graph: Graph,
        nodes: Nodes,
        bundle: ModelBundle,
        src: Taps,
        tgt: Taps,
        batch: Batch,
    ) -> LossReport:
        return losses.rtn_losses(
            graph,
            src.logits,
            lambda logits: residual_forward(bundle, graph, nodes, logits),
            batch.y_src,
            tgt.preds,
            src.features,
            tgt.features,
            self.hp("lambda_F"),
            self.hp("lambda_ent"),
            self.lambda_L,
        )


# -- discriminator / generator --------------------------------------------------------


class TwoPhaseAdapter(Adapter):
    """A discriminator update on detached inputs, then a generator update."""

    uses_discriminator = True

    @abstractmethod
    def discriminator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport: ...

    @abstractmethod
    def generator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport: ...

    def step(
        self, bundle: ModelBundle, batch: Batch, lr: float, rng: RngStream
    ) -> LossReport:
        def phase(
            terms: Callable[[Graph, Nodes, ModelBundle, Taps, Taps], LossReport],
            stream: RngStream,
            with_ce: bool,
        ) -> Callable[[Graph, Nodes], LossReport]:
            def build(graph: Graph, nodes: Nodes) -> LossReport:
                src = self._forward(bundle, graph, nodes, batch.x_src, stream.child("src"))
                tgt = self._forward(bundle, graph, nodes, batch.x_tgt, stream.child("tgt"))
                report = LossReport()
                if with_ce:
                    report.add(
                        "src_ce",
                        self.lambda_L,
                        losses.cross_entropy(graph, src.preds, batch.y_src),
                    )
                return report.extend(terms(graph, nodes, bundle, src, tgt))

            return build

        disc = run_phase(
            bundle,
            bundle.discriminator_params(),
            phase(self.discriminator_terms, rng.child("disc"), False),
            lr,
        )
        gen = run_phase(
            bundle,
            bundle.model_params(),
            phase(self.generator_terms, rng.child("gen"), True),
            lr,
        )
        return prefixed("disc", disc).extend(prefixed("gen", gen))


def _joint(graph: Graph, src: Node, tgt: Node, detach: bool) -> Node:
    joint = graph.concat_rows(src, tgt)
    return graph.detach(joint) if detach else joint


class DcAdapter(TwoPhaseAdapter):
    algorithm = "DC"

    def discriminator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport:
        logits = self._discriminator(bundle, graph, nodes)(
            _joint(graph, src.features, tgt.features, detach=True)
        )
        labels = losses.domain_labels(src.features.shape[0], tgt.features.shape[0])
        return LossReport().add("domain", self.hp("lambda_D"), losses.domain_bce(graph, logits, labels))

    def generator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport:
        logits = self._discriminator(bundle, graph, nodes)(
            _joint(graph, src.features, tgt.features, detach=False)
        )
        value = losses.dc_loss(graph, losses.domain_probs(graph, logits), 1.0)
        return LossReport().add("dc", self.hp("lambda_G"), value)


class CdanAdapter(TwoPhaseAdapter):
    algorithm = "CDAN"

    def __init__(self, config: AlgorithmConfig, settings: ModelSettings, rng: RngStream):
        super().__init__(config, settings, rng)
        self.projections: tuple[np.ndarray, np.ndarray] | None = None

    def discriminator_input(self) -> int | None:
        return self.settings.cdan_projection_dim

    def prepare(self, bundle: ModelBundle, target_train: np.ndarray) -> None:
        self.projections = losses.cdan_projections(
            self.rng.child("cdan"),
            bundle.feature_dim,
            bundle.num_classes,
            self.settings.cdan_projection_dim,
        )

    def _combined(self, graph: Graph, src: Taps, tgt: Taps, detach: bool) -> Node:
        if self.projections is None:
            raise ConfigurationError("CDAN needs its projections; call prepare() first")
        combined = losses.cdan_combine(
            graph,
            graph.concat_rows(src.features, tgt.features),
            graph.concat_rows(src.preds, tgt.preds),
            self.projections,
        )
        return graph.detach(combined) if detach else combined

    def discriminator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport:
        logits = self._discriminator(bundle, graph, nodes)(
            self._combined(graph, src, tgt, detach=True)
        )
        labels = losses.domain_labels(src.features.shape[0], tgt.features.shape[0])
        return LossReport().add("domain", self.hp("lambda_D"), losses.domain_bce(graph, logits, labels))

    def generator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport:
        logits = self._discriminator(bundle, graph, nodes)(
            self._combined(graph, src, tgt, detach=False)
        )
        flipped = losses.domain_labels(src.features.shape[0], tgt.features.shape[0], source=0)
        return LossReport().add("cdan", self.hp("lambda_G"), losses.domain_bce(graph, logits, flipped))


class ItlAdapter(TwoPhaseAdapter):
    """The discriminator maximizes the information of its own two-way
    domain predictions; the generator phase is :func:`losses.itl_losses`."""

    algorithm = "ITL"

    def discriminator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport:
        logits = self._discriminator(bundle, graph, nodes)(
            _joint(graph, src.features, tgt.features, detach=True)
        )
        value = graph.neg(losses.information(graph, losses.domain_probs(graph, logits)))
        return LossReport().add("domain_info", self.hp("lambda_imin"), value)

    def generator_terms(
        self, graph: Graph, nodes: Nodes, bundle: ModelBundle, src: Taps, tgt: Taps
    ) -> LossReport:
        logits = self._discriminator(bundle, graph, nodes)(
            _joint(graph, src.features, tgt.features, detach=False)
        )
        return losses.itl_losses(
            graph,
            tgt.preds,
            losses.domain_probs(graph, logits),
            self.hp("lambda_imax"),
            self.hp("lambda_imin"),
        )


# -- classifier discrepancy -------------------------------------------------------------


class McdAdapter(Adapter):
    """(A) fit both classifiers on source, (B) heads maximize target
    discrepancy, (C) the feature extractor minimizes it ``N_mcd`` times."""

    algorithm = "MCD"

    def __init__(self, config: AlgorithmConfig, settings: ModelSettings, rng: RngStream):
        super().__init__(config, settings, rng)
        self.n_generator_steps = int(self.hp("N_mcd"))
        if self.n_generator_steps < 1:
            raise ConfigurationError(f"N_mcd must be >= 1, got {self.n_generator_steps}")
        self.generator_updates = 0

    def discrepancy(self, graph: Graph, tgt: Taps, rng: RngStream) -> Node:
        assert tgt.preds2 is not None
        return losses.mcd_discrepancy(graph, tgt.preds, tgt.preds2)

    def _source_terms(self, graph: Graph, src: Taps, labels: np.ndarray) -> LossReport:
        if src.preds2 is None:
            raise ConfigurationError(f"{self.config.algorithm} needs two classifiers")
        report = LossReport()
        report.add("src_ce", self.lambda_L, losses.cross_entropy(graph, src.preds, labels))
        report.add("src_ce2", self.lambda_L, losses.cross_entropy(graph, src.preds2, labels))
        return report

    def step(
        self, bundle: ModelBundle, batch: Batch, lr: float, rng: RngStream
    ) -> LossReport:
        lambda_disc = self.hp("lambda_disc")

        def source_phase(graph: Graph, nodes: Nodes) -> LossReport:
            src = self._forward(bundle, graph, nodes, batch.x_src, rng.child("a", "src"))
            return self._source_terms(graph, src, batch.y_src)

        def maximize_phase(graph: Graph, nodes: Nodes) -> LossReport:
            src = self._forward(bundle, graph, nodes, batch.x_src, rng.child("b", "src"))
            tgt = self._forward(bundle, graph, nodes, batch.x_tgt, rng.child("b", "tgt"))
            report = self._source_terms(graph, src, batch.y_src)
            disc = self.discrepancy(graph, tgt, rng.child("b", "proj"))
            return report.add("discrepancy", -lambda_disc, disc)

        report = prefixed("a", run_phase(bundle, bundle.model_params(), source_phase, lr))
        report.extend(
            prefixed("b", run_phase(bundle, bundle.head_params(), maximize_phase, lr))
        )
        for i in range(self.n_generator_steps):
            stream = rng.child("c", str(i))

            def minimize_phase(graph: Graph, nodes: Nodes, stream: RngStream = stream) -> LossReport:
                tgt = self._forward(bundle, graph, nodes, batch.x_tgt, stream.child("tgt"))
                disc = self.discrepancy(graph, tgt, stream.child("proj"))
                return LossReport().add("discrepancy", lambda_disc, disc)

            phase_report = run_phase(bundle, bundle.generator_params(), minimize_phase, lr)
            self.generator_updates += 1
            if i == self.n_generator_steps - 1:
                report.extend(prefixed("c", phase_report))
        return report


class SwdAdapter(McdAdapter):
    algorithm = "SWD"

    def discrepancy(self, graph: Graph, tgt: Taps, rng: RngStream) -> Node:
        assert tgt.preds2 is not None
        projections = losses.random_projections(
            rng, tgt.preds.shape[1], self.settings.swd_projections
        )
        return losses.swd_discrepancy(
            graph, tgt.preds, tgt.preds2, projections, squared=True
        )


ADAPTERS: dict[str, type[Adapter]] = {
    cls.algorithm: cls
    for cls in (
        SourceOnlyAdapter,
        DannAdapter,
        DcAdapter,
        CdanAdapter,
        MmdAdapter,
        JmmdAdapter,
        CoralAdapter,
        McdAdapter,
        SwdAdapter,
        MinEntAdapter,
        ImAdapter,
        ItlAdapter,
        MccAdapter,
        BspAdapter,
        BnmAdapter,
        AfnAdapter,
        AtdocAdapter,
        RtnAdapter,
    )
}


def make_adapter(
    config: AlgorithmConfig, settings: ModelSettings, rng: RngStream
) -> Adapter:
    """Instantiate the adapter for ``config.algorithm`` (X-DANN included)."""
    base, _ = split_combination(config.algorithm)
    return ADAPTERS[base](config, settings, rng)


def compose_step(
    config: AlgorithmConfig,
    bundle: ModelBundle,
    batch: Batch,
    lr: float,
    rng: RngStream,
    adapter: Adapter | None = None,
) -> LossReport:
    """Assemble the algorithm's loss terms for one batch and update ``bundle``."""
    check_feature_layer(config.algorithm, bundle.feature_layer)
    if adapter is None:
        adapter = make_adapter(config, bundle.settings, rng.child("adapter"))
    return adapter.step(bundle, batch, lr, rng)
