"""Domain adaptation loss terms.

Every function records its computation on the given :class:`Graph` and
returns a 1x1 node, so gradients flow to whatever produced its inputs.
Probabilities are logged as ``log(p + 1e-12)``.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from uda_bench.diffcore import Graph, Node, RngStream
from uda_bench.utils.exceptions import ConfigurationError, InputError

MAX_GAMMA_EXP = 8

# -- reporting ---------------------------------------------------------------


@dataclass
class LossTerm:
    name: str
    weight: float
    value: Node  # unweighted


@dataclass
class LossReport:
    """Named loss terms and the weights they enter the total with."""

    terms: list[LossTerm] = field(default_factory=list)

    def add(self, name: str, weight: float, value: Node) -> "LossReport":
        self.terms.append(LossTerm(name, float(weight), value))
        return self

    def extend(self, other: "LossReport") -> "LossReport":
        self.terms.extend(other.terms)
        return self

    def names(self) -> list[str]:
        return [t.name for t in self.terms]

    @property
    def inactive(self) -> bool:
        """True when every weight is zero."""
        return all(t.weight == 0.0 for t in self.terms)

    def total(self, graph: Graph) -> Node:
        weighted = [graph.scale(t.value, t.weight) for t in self.terms]
        if not weighted:
            return graph.constant(0.0)
        total = weighted[0]
        for node in weighted[1:]:
            total = graph.add(total, node)
        return total

    def values(self) -> dict[str, float]:
        """Weighted value of every term, plus ``total``."""
        out = {t.name: t.weight * t.value.item() for t in self.terms}
        out["total"] = sum(out.values())
        return out


# -- shared pieces ---------------------------------------------------------------


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise InputError(f"labels must lie in [0, {num_classes}), got {labels.tolist()}")
    encoded = np.zeros((len(labels), num_classes))
    encoded[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
    return encoded


def row_entropy(graph: Graph, p: Node) -> Node:
    """Entropy of every row, shape (batch, 1)."""
    return graph.neg(graph.sum(graph.mul(p, graph.log(p)), axis=1))


def mean_entropy(graph: Graph, p: Node) -> Node:
    return graph.mean(row_entropy(graph, p))


def entropy_of_mean(graph: Graph, p: Node) -> Node:
    return row_entropy(graph, graph.mean(p, axis=0))


def information(graph: Graph, p: Node) -> Node:
    """``H(mean prediction) - mean(H(prediction))``."""
    return graph.sub(entropy_of_mean(graph, p), mean_entropy(graph, p))


def cross_entropy(graph: Graph, preds: Node, labels: np.ndarray) -> Node:
    targets = graph.constant(one_hot(labels, preds.shape[1]))
    picked = graph.sum(graph.mul(targets, graph.log(preds)), axis=1)
    return graph.neg(graph.mean(picked))


def domain_pair(graph: Graph, logits: Node) -> Node:
    """(batch, 2) matrix ``[0, z]`` so that softmax gives ``[1 - s(z), s(z)]``."""
    return graph.matmul(logits, graph.constant([[0.0, 1.0]]))


def domain_probs(graph: Graph, logits: Node) -> Node:
    """Two-way domain probabilities; column 1 is the source probability."""
    return graph.softmax(domain_pair(graph, logits))


def domain_bce(graph: Graph, logits: Node, labels: np.ndarray) -> Node:
    """Mean binary cross entropy of domain logits against 0/1 labels."""
    log_probs = graph.log_softmax(domain_pair(graph, logits))
    targets = graph.constant(one_hot(labels, 2))
    return graph.neg(graph.mean(graph.sum(graph.mul(targets, log_probs), axis=1)))


def domain_labels(n_src: int, n_tgt: int, source: int = 1) -> np.ndarray:
    return np.concatenate([np.full(n_src, source), np.full(n_tgt, 1 - source)])


# -- classification ------------------------------------------------------------


def src_ce_loss(graph: Graph, preds: Node, labels: np.ndarray, lambda_L: float) -> Node:
    """``lambda_L * mean(-log p[label])``."""
    return graph.scale(cross_entropy(graph, preds, labels), lambda_L)


# -- adversarial -----------------------------------------------------------------


def dann_losses(
    graph: Graph,
    f_src: Node,
    f_tgt: Node,
    discriminator: Callable[[Node], Node],
    lambda_D: float,
    lambda_grl: float,
) -> LossReport:
    """Domain BCE on gradient-reversed features (source 1, target 0)."""
    reversed_features = graph.grad_reverse(graph.concat_rows(f_src, f_tgt), lambda_grl)
    logits = discriminator(reversed_features)
    labels = domain_labels(f_src.shape[0], f_tgt.shape[0])
    return LossReport().add("dann_domain", lambda_D, domain_bce(graph, logits, labels))


def dc_loss(graph: Graph, domain_preds: Node, lambda_G: float) -> Node:
    """Cross entropy of two-way domain predictions against (0.5, 0.5)."""
    uniform = graph.constant(np.full((1, 2), 0.5))
    per_row = graph.sum(graph.mul(uniform, graph.log(domain_preds)), axis=1)
    return graph.scale(graph.neg(graph.mean(per_row)), lambda_G)


def cdan_projections(
    rng: RngStream, feature_dim: int, num_classes: int, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed Gaussian matrices ``R_f`` and ``R_p`` of the randomized multilinear map."""
    return (
        rng.child("features").normal(0.0, 1.0, (feature_dim, dim)),
        rng.child("preds").normal(0.0, 1.0, (num_classes, dim)),
    )


def cdan_combine(
    graph: Graph,
    features: Node,
    preds: Node,
    projections: tuple[np.ndarray, np.ndarray],
) -> Node:
    """``(f R_f) * (p R_p) / sqrt(d)``."""
    R_f, R_p = projections
    dim = R_f.shape[1]
    combined = graph.mul(
        graph.matmul(features, graph.constant(R_f)),
        graph.matmul(preds, graph.constant(R_p)),
    )
    return graph.scale(combined, 1.0 / np.sqrt(dim))


# -- distribution distances ------------------------------------------------------


def bandwidth_multipliers(gamma_exp: int) -> list[float]:
    """``[2^-g, ..., 1, ..., 2^g]``."""
    return [2.0**i for i in range(-gamma_exp, gamma_exp + 1)]


def median_sq_distance(X: np.ndarray) -> float:
    """Median pairwise squared distance (1.0 when all points coincide)."""
    distances = pdist(X, "sqeuclidean")
    median = float(np.median(distances)) if len(distances) else 0.0
    return median if median > 0.0 else 1.0


def pairwise_sq_dists(graph: Graph, A: Node, B: Node) -> Node:
    a2 = graph.sum(graph.mul(A, A), axis=1)
    b2 = graph.transpose(graph.sum(graph.mul(B, B), axis=1))
    cross = graph.matmul(A, graph.transpose(B))
    return graph.sub(graph.add(a2, b2), graph.scale(cross, 2.0))


def median_bandwidth(graph: Graph, f_src: Node, f_tgt: Node) -> Node:
    """Detached 1x1 base bandwidth from the joint batch."""
    joint = graph.concat_rows(f_src, f_tgt)
    return graph.detach(joint, lambda X: [[median_sq_distance(X)]])


def kernel_matrix(
    graph: Graph, A: Node, B: Node, base: Node, gamma_exp: int
) -> Node:
    """Gaussian kernels ``exp(-d^2 / (m * base))`` averaged over the multipliers."""
    scaled = graph.div(pairwise_sq_dists(graph, A, B), base)
    multipliers = bandwidth_multipliers(gamma_exp)
    kernels = [graph.exp(graph.scale(scaled, -1.0 / m)) for m in multipliers]
    total = kernels[0]
    for k in kernels[1:]:
        total = graph.add(total, k)
    return graph.scale(total, 1.0 / len(multipliers))


def mmd_from_kernels(graph: Graph, k_ss: Node, k_tt: Node, k_st: Node) -> Node:
    """Biased (V-statistic) squared MMD."""
    return graph.sub(
        graph.add(graph.mean(k_ss), graph.mean(k_tt)),
        graph.scale(graph.mean(k_st), 2.0),
    )


def _check_gamma(gamma_exp: int) -> int:
    if int(gamma_exp) != gamma_exp or not 1 <= gamma_exp <= MAX_GAMMA_EXP:
        raise InputError(f"gamma_exp must be an integer in [1, {MAX_GAMMA_EXP}]")
    return int(gamma_exp)


def _check_batches(*nodes: Node, minimum: int = 2) -> None:
    for node in nodes:
        if node.shape[0] < minimum:
            raise InputError(
                f"need at least {minimum} samples per domain, got {node.shape[0]}"
            )


def mmd_loss(
    graph: Graph, f_src: Node, f_tgt: Node, gamma_exp: int, lambda_F: float
) -> Node:
    """Multi-kernel Gaussian MMD^2 around the median-distance bandwidth."""
    gamma_exp = _check_gamma(gamma_exp)
    _check_batches(f_src, f_tgt)
    base = median_bandwidth(graph, f_src, f_tgt)
    value = mmd_from_kernels(
        graph,
        kernel_matrix(graph, f_src, f_src, base, gamma_exp),
        kernel_matrix(graph, f_tgt, f_tgt, base, gamma_exp),
        kernel_matrix(graph, f_src, f_tgt, base, gamma_exp),
    )
    return graph.scale(value, lambda_F)


def joint_kernels(
    graph: Graph,
    layers_src: Sequence[Node],
    layers_tgt: Sequence[Node],
    gamma_exp: int,
) -> tuple[Node, Node, Node]:
    """Products over layers of the per-layer kernel matrices (ss, tt, st)."""
    if len(layers_src) != len(layers_tgt) or not layers_src:
        raise InputError(
            f"layer counts differ between domains: {len(layers_src)} vs {len(layers_tgt)}"
        )
    gamma_exp = _check_gamma(gamma_exp)
    products: list[Node | None] = [None, None, None]
    for a, b in zip(layers_src, layers_tgt):
        _check_batches(a, b)
        base = median_bandwidth(graph, a, b)
        blocks = (
            kernel_matrix(graph, a, a, base, gamma_exp),
            kernel_matrix(graph, b, b, base, gamma_exp),
            kernel_matrix(graph, a, b, base, gamma_exp),
        )
        products = [
            k if p is None else graph.mul(p, k) for p, k in zip(products, blocks)
        ]
    k_ss, k_tt, k_st = products
    assert k_ss is not None and k_tt is not None and k_st is not None
    return k_ss, k_tt, k_st


def jmmd_loss(
    graph: Graph,
    layers_src: Sequence[Node],
    layers_tgt: Sequence[Node],
    gamma_exp: int,
    lambda_F: float,
) -> Node:
    """MMD^2 under the product of per-layer kernels."""
    value = mmd_from_kernels(graph, *joint_kernels(graph, layers_src, layers_tgt, gamma_exp))
    return graph.scale(value, lambda_F)


def covariance(graph: Graph, f: Node) -> Node:
    centered = graph.sub(f, graph.mean(f, axis=0))
    gram = graph.matmul(graph.transpose(centered), centered)
    return graph.scale(gram, 1.0 / (f.shape[0] - 1))


def coral_loss(graph: Graph, f_src: Node, f_tgt: Node, lambda_F: float) -> Node:
    """``||Cov(f_src) - Cov(f_tgt)||_F^2 / (4 d^2)``."""
    _check_batches(f_src, f_tgt)
    diff = graph.sub(covariance(graph, f_src), covariance(graph, f_tgt))
    d = f_src.shape[1]
    return graph.scale(graph.sum(graph.mul(diff, diff)), lambda_F / (4.0 * d * d))


# -- classifier discrepancy -----------------------------------------------------


def mcd_discrepancy(graph: Graph, preds1: Node, preds2: Node) -> Node:
    """Mean over samples of the L1 distance between prediction rows."""
    l1 = graph.sum(graph.abs(graph.sub(preds1, preds2)), axis=1)
    return graph.mean(l1)


def random_projections(rng: RngStream, dim: int, count: int) -> np.ndarray:
    """``count`` random unit vectors as the columns of a (dim, count) matrix."""
    directions = rng.normal(0.0, 1.0, (dim, count))
    return directions / np.linalg.norm(directions, axis=0, keepdims=True)


def swd_discrepancy(
    graph: Graph,
    preds1: Node,
    preds2: Node,
    projections: np.ndarray,
    squared: bool = True,
) -> Node:
    """Sliced Wasserstein-2 discrepancy between equally sized prediction sets.

    Each projection's 1-D distance is taken in its sorted-difference form.
    With ``squared`` (the training objective) the result is the mean over
    projections of the squared distance; otherwise it is the mean of the
    distances, whose gradient is undefined where two projected sets coincide.
    """
    if preds1.shape[0] != preds2.shape[0]:
        raise InputError("sliced Wasserstein needs equally sized sets")
    if projections.shape[1] < 1:
        raise InputError("need at least one projection")
    P = graph.constant(projections)
    sorted1 = graph.sort_columns(graph.matmul(preds1, P))
    sorted2 = graph.sort_columns(graph.matmul(preds2, P))
    diff = graph.sub(sorted1, sorted2)
    per_projection = graph.mean(graph.mul(diff, diff), axis=0)
    if not squared:
        per_projection = graph.sqrt(per_projection)
    return graph.mean(per_projection)


# -- entropy family ------------------------------------------------------------------


def minent_loss(graph: Graph, preds_tgt: Node, lambda_ent: float) -> Node:
    return graph.scale(mean_entropy(graph, preds_tgt), lambda_ent)


def im_loss(graph: Graph, preds_tgt: Node, lambda_imax: float) -> Node:
    """``lambda_imax * (mean entropy - entropy of the mean)``; minimizing it
    maximizes information."""
    return graph.scale(graph.neg(information(graph, preds_tgt)), lambda_imax)


def itl_losses(
    graph: Graph,
    preds_tgt: Node,
    domain_preds: Node,
    lambda_imax: float,
    lambda_imin: float,
) -> LossReport:
    """Maximize information of class predictions, minimize it for domains."""
    report = LossReport()
    report.add("itl_imax", lambda_imax, graph.neg(information(graph, preds_tgt)))
    report.add("itl_imin", lambda_imin, information(graph, domain_preds))
    return report


def mcc_weights(probs: np.ndarray) -> np.ndarray:
    """Certainty weights ``1 + exp(-H)`` rescaled to sum to the batch size."""
    entropy = -(probs * np.log(probs + 1e-12)).sum(axis=1, keepdims=True)
    weights = 1.0 + np.exp(-entropy)
    return len(probs) * weights / weights.sum()


def mcc_loss(graph: Graph, logits: Node, T_mcc: float, lambda_mcc: float) -> Node:
    """Minimum class confusion on temperature-scaled predictions.

    ``C = Y^T diag(w) Y`` with detached certainty weights ``w``; rows of
    ``C`` are normalized and the off-diagonal mass is averaged over classes.
    """
    if not 0.0 < T_mcc:
        raise InputError(f"T_mcc must be positive, got {T_mcc}")
    probs = graph.softmax(graph.scale(logits, 1.0 / T_mcc))
    weights = graph.detach(probs, mcc_weights)
    confusion = graph.matmul(graph.transpose(graph.mul(probs, weights)), probs)
    normalized = graph.div(confusion, graph.sum(confusion, axis=1))
    classes = logits.shape[1]
    diagonal = graph.sum(graph.mul(normalized, graph.constant(np.eye(classes))))
    off_diagonal = graph.sub(graph.sum(normalized), diagonal)
    return graph.scale(off_diagonal, lambda_mcc / classes)


# -- spectral --------------------------------------------------------------------------


def bsp_loss(
    graph: Graph, f_src: Node, f_tgt: Node, lambda_bsp: float, k: int = 1
) -> Node:
    """``lambda_bsp * sum_{i<=k} (s_i(f_src)^2 + s_i(f_tgt)^2)``."""
    total: Node | None = None
    for f in (f_src, f_tgt):
        sigma = graph.svd_values(f)
        top = graph.slice_rows(sigma, 0, min(k, sigma.shape[0]))
        energy = graph.sum(graph.mul(top, top))
        total = energy if total is None else graph.add(total, energy)
    assert total is not None
    return graph.scale(total, lambda_bsp)


def bnm_loss(graph: Graph, preds_tgt: Node, lambda_bnm: float) -> Node:
    """``-lambda_bnm * ||P||_* / batch``."""
    return graph.scale(graph.nuclear_norm(preds_tgt), -lambda_bnm / preds_tgt.shape[0])


# -- feature norm --------------------------------------------------------------------


def afn_loss(
    graph: Graph, f_src: Node, f_tgt: Node, S_afn: float, lambda_afn: float
) -> Node:
    """Stepwise adaptive feature norm: pull each norm ``S_afn`` above its
    current (detached) value."""
    norms = graph.l2_row_norm(graph.concat_rows(f_src, f_tgt))
    goal = graph.add(graph.detach(norms), graph.constant(S_afn))
    residual = graph.sub(norms, goal)
    return graph.scale(graph.mean(graph.mul(residual, residual)), lambda_afn)


# -- pseudo labels -------------------------------------------------------------------


class MemoryBank:
    """Features and soft predictions of every target-train sample."""

    def __init__(self, features: np.ndarray, preds: np.ndarray):
        if features.shape[0] != preds.shape[0]:
            raise InputError("bank features and predictions differ in length")
        self.features = features.copy()
        self.preds = preds.copy()

    def __len__(self) -> int:
        return self.features.shape[0]

    @classmethod
    def with_uniform_preds(cls, features: np.ndarray, num_classes: int) -> "MemoryBank":
        return cls(features, np.full((features.shape[0], num_classes), 1.0 / num_classes))

    def neighbors(
        self, queries: np.ndarray, k: int, exclude: np.ndarray | None = None
    ) -> np.ndarray:
        """Indices (batch, k) of the ``k`` nearest bank entries by cosine distance."""
        bank = self.features / np.maximum(
            np.linalg.norm(self.features, axis=1, keepdims=True), 1e-12
        )
        q = queries / np.maximum(np.linalg.norm(queries, axis=1, keepdims=True), 1e-12)
        distances = 1.0 - q @ bank.T
        if exclude is not None:
            distances[np.arange(len(q)), exclude] = np.inf
        return np.argsort(distances, axis=1, kind="stable")[:, :k]

    def soft_labels(
        self, queries: np.ndarray, k: int, exclude: np.ndarray | None = None
    ) -> np.ndarray:
        return self.preds[self.neighbors(queries, k, exclude)].mean(axis=1)

    def update(self, indices: np.ndarray, features: np.ndarray, preds: np.ndarray) -> None:
        self.features[indices] = features
        self.preds[indices] = preds


def atdoc_pseudo_loss(
    graph: Graph,
    f_tgt: Node,
    preds_tgt: Node,
    bank: MemoryBank,
    k_atdoc: int,
    lambda_atdoc: float,
    indices: np.ndarray | None = None,
) -> Node:
    """Cross entropy against the argmax of the mean prediction of each
    sample's ``k`` nearest bank neighbours (itself excluded).

    The caller updates the bank after the optimizer step.
    """
    if len(bank) < k_atdoc + 1:
        raise ConfigurationError(
            f"memory bank has {len(bank)} entries, need at least {k_atdoc + 1}"
        )
    soft = bank.soft_labels(f_tgt.value, int(k_atdoc), indices)
    pseudo = soft.argmax(axis=1)
    return src_ce_loss(graph, preds_tgt, pseudo, lambda_atdoc)


# -- residual transfer ----------------------------------------------------------------

RTN_GAMMA_EXP = 2


def rtn_losses(
    graph: Graph,
    src_logits: Node,
    residual: Callable[[Node], Node],
    src_labels: np.ndarray,
    preds_tgt: Node,
    f_src: Node,
    f_tgt: Node,
    lambda_F: float,
    lambda_ent: float,
    lambda_L: float,
) -> LossReport:
    """Source CE through ``logits + residual(logits)``, target entropy and MMD."""
    adjusted = graph.add(src_logits, residual(src_logits))
    report = LossReport()
    report.add("rtn_src_ce", lambda_L, cross_entropy(graph, graph.softmax(adjusted), src_labels))
    report.add("rtn_entropy", lambda_ent, mean_entropy(graph, preds_tgt))
    report.add("rtn_mmd", lambda_F, mmd_loss(graph, f_src, f_tgt, RTN_GAMMA_EXP, 1.0))
    return report
