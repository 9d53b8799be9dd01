"""Dense-matrix reverse-mode automatic differentiation."""

from uda_bench.diffcore.gradcheck import GradCheckResult, check_gradients
from uda_bench.diffcore.graph import LOG_EPS, Graph, Node, as_tensor
from uda_bench.diffcore.linalg import jacobi_svd
from uda_bench.diffcore.optim import AdamState, ParamSet, adam_step, gradients_by_name
from uda_bench.diffcore.random import RngStream
from uda_bench.diffcore.rules import OpKind

__all__ = [
    "LOG_EPS",
    "AdamState",
    "GradCheckResult",
    "Graph",
    "Node",
    "OpKind",
    "ParamSet",
    "RngStream",
    "adam_step",
    "as_tensor",
    "check_gradients",
    "gradients_by_name",
    "jacobi_svd",
]
