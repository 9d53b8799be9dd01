"""Tests for per-algorithm step composition."""

import math

import numpy as np
import pytest

from uda_bench.algorithms import ADAPTERS, Adapter, Batch, compose_step, make_adapter
from uda_bench.algorithms.adapters import AtdocAdapter, McdAdapter
from uda_bench.diffcore import RngStream
from uda_bench.models.config import AlgorithmConfig, FeatureLayer, ModelSettings
from uda_bench.networks import ModelBundle, build_source_only_bundle, predict
from uda_bench.utils.exceptions import ConfigurationError

SETTINGS = ModelSettings(
    trunk_width=8,
    classifier_hidden=(6, 5),
    discriminator_hidden=4,
    cdan_projection_dim=7,
    swd_projections=6,
)

HPARAMS: dict[str, dict[str, float]] = {
    "SourceOnly": {},
    "DANN": {"lambda_D": 0.5, "lambda_grl": 1.0, "lambda_L": 1.0},
    "DC": {"lambda_D": 0.5, "lambda_G": 0.5, "lambda_L": 1.0},
    "CDAN": {"lambda_D": 0.5, "lambda_G": 0.5, "lambda_L": 1.0},
    "MMD": {"lambda_F": 0.5, "lambda_L": 1.0, "gamma_exp": 2},
    "JMMD": {"lambda_F": 0.5, "lambda_L": 1.0, "gamma_exp": 1},
    "CORAL": {"lambda_F": 0.5, "lambda_L": 1.0},
    "MCD": {"N_mcd": 3, "lambda_L": 1.0, "lambda_disc": 0.5},
    "SWD": {"N_mcd": 2, "lambda_L": 1.0, "lambda_disc": 0.5},
    "MinEnt": {"lambda_ent": 0.5, "lambda_L": 1.0},
    "IM": {"lambda_imax": 0.5, "lambda_L": 1.0},
    "ITL": {"lambda_imax": 0.5, "lambda_imin": 0.5, "lambda_L": 1.0},
    "MCC": {"lambda_mcc": 0.5, "T_mcc": 2.0, "lambda_L": 1.0},
    "BSP": {"lambda_bsp": 1e-3, "lambda_L": 1.0},
    "BNM": {"lambda_bnm": 0.5, "lambda_L": 1.0},
    "AFN": {"lambda_afn": 1e-3, "S_afn": 1.0, "lambda_L": 1.0},
    "ATDOC": {"lambda_atdoc": 0.5, "k_atdoc": 5, "lambda_L": 1.0},
    "RTN": {"lambda_F": 0.5, "lambda_L": 1.0, "lambda_ent": 0.5},
}

EXPECTED_TERMS: dict[str, list[str]] = {
    "SourceOnly": ["src_ce"],
    "DANN": ["src_ce", "dann_domain"],
    "DC": ["disc:domain", "gen:src_ce", "gen:dc"],
    "CDAN": ["disc:domain", "gen:src_ce", "gen:cdan"],
    "MMD": ["src_ce", "mmd"],
    "JMMD": ["src_ce", "jmmd"],
    "CORAL": ["src_ce", "coral"],
    "MCD": ["a:src_ce", "a:src_ce2", "b:src_ce", "b:src_ce2", "b:discrepancy", "c:discrepancy"],
    "SWD": ["a:src_ce", "a:src_ce2", "b:src_ce", "b:src_ce2", "b:discrepancy", "c:discrepancy"],
    "MinEnt": ["src_ce", "minent"],
    "IM": ["src_ce", "im"],
    "ITL": ["disc:domain_info", "gen:src_ce", "gen:itl_imax", "gen:itl_imin"],
    "MCC": ["src_ce", "mcc"],
    "BSP": ["src_ce", "bsp"],
    "BNM": ["src_ce", "bnm"],
    "AFN": ["src_ce", "afn"],
    "ATDOC": ["src_ce", "atdoc"],
    "RTN": ["rtn_src_ce", "rtn_entropy", "rtn_mmd"],
}

FROZEN_DANN = {"lambda_D": 0.3, "lambda_grl": 1.0}


def _source_only() -> ModelBundle:
    return build_source_only_bundle(2, 3, SETTINGS, RngStream(0).child("model"))


def _batch(seed: int = 1) -> Batch:
    rng = RngStream(seed).child("batch")
    return Batch(
        x_src=rng.normal(0.0, 1.0, (8, 2)),
        y_src=np.array([0, 1, 2, 0, 1, 2, 0, 1]),
        x_tgt=rng.normal(0.5, 1.0, (8, 2)),
        tgt_indices=np.arange(8),
    )


def _target_train() -> np.ndarray:
    return RngStream(2).child("target").normal(0.5, 1.0, (12, 2))


def _setup(
    algorithm: str,
    hparams: dict[str, float] | None = None,
    frozen: dict[str, float] | None = None,
    feature_layer: FeatureLayer = FeatureLayer.FL0,
) -> tuple[AlgorithmConfig, ModelBundle, Adapter]:
    base = algorithm.removesuffix("-DANN") if algorithm != "DANN" else algorithm
    config = AlgorithmConfig(
        algorithm=algorithm,
        hparams=HPARAMS[base] if hparams is None else hparams,
        frozen=frozen or {},
    )
    adapter = make_adapter(config, SETTINGS, RngStream(3).child("adapter"))
    bundle = adapter.build_bundle(_source_only(), feature_layer)
    adapter.prepare(bundle, _target_train())
    return config, bundle, adapter


class TestComposeStep:
    """One step per algorithm."""

    @pytest.mark.parametrize("algorithm", sorted(ADAPTERS))
    def test_term_names_and_update(self, algorithm: str) -> None:
        """Every algorithm reports its named terms and moves the trunk."""
        config, bundle, adapter = _setup(algorithm)
        before = bundle.trunk["linear0.weight"].copy()

        report = compose_step(
            config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter
        )

        assert report.names() == EXPECTED_TERMS[algorithm]
        assert all(math.isfinite(v) for v in report.values().values())
        assert not np.array_equal(bundle.trunk["linear0.weight"], before)

    def test_combination_adds_dann_term(self) -> None:
        """X-DANN appends the DANN domain term with the frozen weight."""
        config, bundle, adapter = _setup("MCC-DANN", frozen=FROZEN_DANN)

        report = compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)

        assert report.names() == ["src_ce", "mcc", "dann_domain"]
        assert report.terms[-1].weight == 0.3
        assert bundle.discriminator is not None

    def test_steps_are_deterministic(self) -> None:
        """Same seeds give bit-identical parameters."""
        results = []
        for _ in range(2):
            config, bundle, adapter = _setup("DANN")
            compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)
            results.append(bundle.state_dict())

        assert results[0].keys() == results[1].keys()
        for key in results[0]:
            assert np.array_equal(results[0][key], results[1][key])

    def test_adapter_created_when_missing(self) -> None:
        """compose_step builds its own adapter when none is given."""
        config, bundle, _ = _setup("IM")

        report = compose_step(config, bundle, _batch(), 1e-3, RngStream(4))

        assert report.names() == ["src_ce", "im"]


class TestPhases:
    """Test multi-phase protocols."""

    def test_mcd_generator_updates(self) -> None:
        """Phase C runs N_mcd times per batch."""
        config, bundle, adapter = _setup("MCD")
        assert isinstance(adapter, McdAdapter)

        compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)
        compose_step(config, bundle, _batch(2), 1e-3, RngStream(5), adapter=adapter)

        assert adapter.generator_updates == 6

    def test_mcd_bundle_has_two_classifiers(self) -> None:
        """MCD and SWD add a second classifier."""
        _, bundle, _ = _setup("SWD")
        assert len(bundle.classifiers) == 2

    def test_zero_weight_phase_takes_no_step(self) -> None:
        """With lambda_D = 0 the discriminator is left untouched."""
        hparams = {"lambda_D": 0.0, "lambda_G": 0.5, "lambda_L": 1.0}
        config, bundle, adapter = _setup("DC", hparams=hparams)
        assert bundle.discriminator is not None
        before = {k: v.copy() for k, v in bundle.discriminator.values.items()}

        compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)

        for name, value in before.items():
            assert np.array_equal(bundle.discriminator[name], value)
        assert all(s.step == 0 for s in bundle.discriminator.state.values())

    def test_all_zero_single_phase_is_skipped(self) -> None:
        """A single-phase step with only zero weights changes nothing."""
        hparams = {"lambda_ent": 0.0, "lambda_L": 0.0}
        config, bundle, adapter = _setup("MinEnt", hparams=hparams)
        before = bundle.trunk["linear0.weight"].copy()

        report = compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)

        assert report.inactive
        assert np.array_equal(bundle.trunk["linear0.weight"], before)

    def test_cdan_discriminator_reads_the_projection(self) -> None:
        """CDAN's discriminator input is the multilinear map width."""
        _, bundle, _ = _setup("CDAN")
        assert bundle.discriminator is not None
        assert bundle.discriminator["linear0.weight"].shape == (7, 4)

    def test_rtn_residual_starts_as_identity(self) -> None:
        """The residual block's last layer is zero-initialized."""
        _, bundle, _ = _setup("RTN")
        residual = bundle.groups["residual"]
        assert np.array_equal(residual["linear1.weight"], np.zeros((3, 3)))


class TestAtdoc:
    """Test the memory bank lifecycle."""

    def test_step_updates_the_bank(self) -> None:
        """Batch rows of the bank get the step's predictions."""
        config, bundle, adapter = _setup("ATDOC")
        assert isinstance(adapter, AtdocAdapter) and adapter.bank is not None
        assert np.allclose(adapter.bank.preds, 1.0 / 3.0)

        compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)

        assert not np.allclose(adapter.bank.preds[:8], 1.0 / 3.0)
        assert np.allclose(adapter.bank.preds[8:], 1.0 / 3.0)
        assert np.allclose(adapter.bank.preds.sum(axis=1), 1.0)

    def test_bank_holds_evaluation_features(self) -> None:
        """Bank rows match a dropout-free forward pass of the updated model."""
        config, bundle, adapter = _setup("ATDOC")
        assert isinstance(adapter, AtdocAdapter) and adapter.bank is not None
        batch = _batch()

        compose_step(config, bundle, batch, 1e-3, RngStream(4), adapter=adapter)
        expected = predict(bundle, batch.x_tgt)

        assert np.allclose(adapter.bank.features[:8], expected.features)
        assert np.allclose(adapter.bank.preds[:8], expected.preds)

    def test_step_without_prepare_fails(self) -> None:
        """The bank must be filled before the first step."""
        config = AlgorithmConfig(algorithm="ATDOC", hparams=HPARAMS["ATDOC"])
        adapter = make_adapter(config, SETTINGS, RngStream(3))
        bundle = adapter.build_bundle(_source_only(), FeatureLayer.FL0)

        with pytest.raises(ConfigurationError, match="memory bank"):
            compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)


class TestValidation:
    """Invalid configurations are rejected before training."""

    def test_unknown_algorithm(self) -> None:
        """Unknown ids raise ConfigurationError."""
        with pytest.raises(ConfigurationError, match="unknown algorithm"):
            make_adapter(AlgorithmConfig(algorithm="FOO"), SETTINGS, RngStream(0))

    def test_two_phase_combination_is_unknown(self) -> None:
        """Only single-phase algorithms combine with DANN."""
        with pytest.raises(ConfigurationError):
            make_adapter(
                AlgorithmConfig(algorithm="MCD-DANN", hparams=HPARAMS["MCD"]),
                SETTINGS,
                RngStream(0),
            )

    def test_combination_needs_frozen_dann_weights(self) -> None:
        """X-DANN without frozen lambda_D / lambda_grl is a config error."""
        with pytest.raises(ConfigurationError, match="frozen"):
            make_adapter(
                AlgorithmConfig(algorithm="MCC-DANN", hparams=HPARAMS["MCC"]),
                SETTINGS,
                RngStream(0),
            )

    def test_out_of_range_value(self) -> None:
        """Values outside the search interval are rejected."""
        hparams = dict(HPARAMS["MCC"], T_mcc=10.0)
        with pytest.raises(ConfigurationError, match="T_mcc"):
            make_adapter(
                AlgorithmConfig(algorithm="MCC", hparams=hparams), SETTINGS, RngStream(0)
            )

    def test_missing_value(self) -> None:
        """Every searched key must be present."""
        with pytest.raises(ConfigurationError, match="missing"):
            make_adapter(
                AlgorithmConfig(algorithm="MMD", hparams={"lambda_F": 0.5}),
                SETTINGS,
                RngStream(0),
            )

    @pytest.mark.parametrize("algorithm", ["MCD", "CDAN", "JMMD", "AFN", "RTN", "SWD"])
    def test_softmax_layer_incompatibility(self, algorithm: str) -> None:
        """These algorithms cannot adapt FL8 features."""
        with pytest.raises(ConfigurationError, match="FL8"):
            _setup(algorithm, feature_layer=FeatureLayer.FL8)

    @pytest.mark.parametrize("feature_layer", list(FeatureLayer))
    def test_dann_on_every_layer(self, feature_layer: FeatureLayer) -> None:
        """DANN adapts any tap; the discriminator matches its width."""
        config, bundle, adapter = _setup("DANN", feature_layer=feature_layer)
        assert bundle.discriminator is not None
        assert bundle.discriminator["linear0.weight"].shape[0] == bundle.feature_dim

        report = compose_step(config, bundle, _batch(), 1e-3, RngStream(4), adapter=adapter)

        assert report.names() == ["src_ce", "dann_domain"]
