"""Hyperparameter search spaces and config validation."""

from uda_bench.models.config import AlgorithmConfig, Distribution, SearchSpace
from uda_bench.utils.exceptions import ConfigurationError


def _u(low: float = 0.0, high: float = 1.0) -> Distribution:
    return Distribution(kind="uniform", low=low, high=high)


def _log(low: float, high: float) -> Distribution:
    return Distribution(kind="log_uniform", low=low, high=high)


def _int(low: int, high: int, step: int = 1) -> Distribution:
    return Distribution(kind="int", low=low, high=high, step=step)


_SPACES: dict[str, dict[str, Distribution]] = {
    "SourceOnly": {},
    "DANN": {"lambda_D": _u(), "lambda_grl": _log(0.1, 10.0), "lambda_L": _u()},
    "DC": {"lambda_D": _u(), "lambda_G": _u(), "lambda_L": _u()},
    "CDAN": {"lambda_D": _u(), "lambda_G": _u(), "lambda_L": _u()},
    "MMD": {"lambda_F": _u(), "lambda_L": _u(), "gamma_exp": _int(1, 8)},
    "JMMD": {"lambda_F": _u(), "lambda_L": _u(), "gamma_exp": _int(1, 8)},
    "CORAL": {"lambda_F": _u(), "lambda_L": _u()},
    "MCD": {"N_mcd": _int(1, 10), "lambda_L": _u(), "lambda_disc": _u()},
    "SWD": {"N_mcd": _int(1, 10), "lambda_L": _u(), "lambda_disc": _u()},
    "MinEnt": {"lambda_ent": _u(), "lambda_L": _u()},
    "IM": {"lambda_imax": _u(), "lambda_L": _u()},
    "ITL": {"lambda_imax": _u(), "lambda_imin": _u(), "lambda_L": _u()},
    "MCC": {"lambda_mcc": _u(), "T_mcc": _u(0.2, 5.0), "lambda_L": _u()},
    "BSP": {"lambda_bsp": _log(1e-6, 1.0), "lambda_L": _u()},
    "BNM": {"lambda_bnm": _u(), "lambda_L": _u()},
    "AFN": {"lambda_afn": _log(1e-6, 1.0), "S_afn": _u(0.0, 2.0), "lambda_L": _u()},
    "ATDOC": {"lambda_atdoc": _u(), "k_atdoc": _int(5, 25, 5), "lambda_L": _u()},
    "RTN": {"lambda_F": _u(), "lambda_L": _u(), "lambda_ent": _u()},
}

# Algorithms that update everything in one backward pass and so can be
# combined with DANN.
SINGLE_PHASE = frozenset(
    {"AFN", "ATDOC", "BNM", "BSP", "CORAL", "IM", "JMMD", "MCC", "MinEnt", "MMD", "RTN"}
)
DANN_FROZEN_KEYS = ("lambda_D", "lambda_grl")

BASE_ALGORITHMS = tuple(_SPACES)
COMBINATIONS = tuple(f"{name}-DANN" for name in sorted(SINGLE_PHASE))
ALGORITHM_IDS = BASE_ALGORITHMS + COMBINATIONS


def split_combination(algorithm: str) -> tuple[str, bool]:
    """``"MCC-DANN"`` -> ``("MCC", True)``; unknown ids raise."""
    if algorithm in _SPACES:
        return algorithm, False
    if algorithm.endswith("-DANN") and algorithm.removesuffix("-DANN") in SINGLE_PHASE:
        return algorithm.removesuffix("-DANN"), True
    raise ConfigurationError(
        f"unknown algorithm {algorithm!r}; known algorithms: {', '.join(ALGORITHM_IDS)}"
    )


def search_space_for(algorithm: str) -> SearchSpace:
    """The searched hyperparameters; for ``X-DANN`` only X's are searched."""
    base, _ = split_combination(algorithm)
    return SearchSpace(algorithm=algorithm, params=dict(_SPACES[base]))


def validate_config(config: AlgorithmConfig) -> None:
    """Check required keys are present and every value lies in its interval.

    Raises:
        ConfigurationError: On unknown ids, missing keys or out-of-range values.
    """
    base, combined = split_combination(config.algorithm)
    required = dict(_SPACES[base])
    if combined:
        missing_frozen = [k for k in DANN_FROZEN_KEYS if k not in config.frozen]
        if missing_frozen:
            raise ConfigurationError(
                f"{config.algorithm} needs frozen DANN hyperparameters {missing_frozen}"
            )
        for key in DANN_FROZEN_KEYS:
            _check_value(config.algorithm, key, config.frozen[key], _SPACES["DANN"][key])
    missing = [k for k in required if k not in config.hparams]
    if missing:
        raise ConfigurationError(f"{config.algorithm} is missing hyperparameters {missing}")
    for key, distribution in required.items():
        _check_value(config.algorithm, key, config.hparams[key], distribution)


def _check_value(algorithm: str, key: str, value: float, distribution: Distribution) -> None:
    if not distribution.contains(value):
        raise ConfigurationError(
            f"{algorithm}: {key}={value} outside its search space "
            f"{distribution.kind}[{distribution.low}, {distribution.high}]"
        )
