"""Forward, backward and shape rules for every graph op kind.

Each rule works on plain numpy arrays. ``forward(inputs, attrs)`` returns the
output value (and may stash arrays needed later in ``attrs``);
``backward(grad, inputs, output, attrs)`` returns one gradient per input
(``None`` where no gradient flows); ``check(shapes, attrs)`` returns an error
message for incompatible shapes or ``None``.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from uda_bench.diffcore.linalg import jacobi_svd
from uda_bench.utils.ui import display

Shape = tuple[int, ...]
Grads = tuple[np.ndarray | None, ...]

DEGENERACY_GAP = 1e-9


class OpKind(str, Enum):
    INPUT = "input"
    MATMUL = "matmul"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    SCALE = "scale"
    RELU = "relu"
    EXP = "exp"
    LOG = "log"
    NEG = "neg"
    ABS = "abs"
    SQRT = "sqrt"
    SUM = "sum"
    MEAN = "mean"
    ROW_SOFTMAX = "row-softmax"
    ROW_LOG_SOFTMAX = "row-log-softmax"
    DROPOUT_MASK = "dropout-mask"
    CONCAT_ROWS = "concat-rows"
    SVD_SINGULAR_VALUES = "svd-singular-values"
    NUCLEAR_NORM = "nuclear-norm"
    GRAD_REVERSE = "grad-reverse"
    L2_ROW_NORM = "l2-row-norm"
    TRANSPOSE = "transpose"
    SLICE_ROWS = "slice-rows"
    SORT_COLUMNS = "sort-columns"
    DETACH = "detach"


@dataclass(frozen=True)
class OpRule:
    forward: Callable[[Sequence[np.ndarray], dict[str, Any]], np.ndarray]
    backward: Callable[
        [np.ndarray, Sequence[np.ndarray], np.ndarray, dict[str, Any]], Grads
    ]
    check: Callable[[Sequence[Shape], dict[str, Any]], str | None]


def _unbroadcast(grad: np.ndarray, shape: Shape) -> np.ndarray:
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    a, b = shapes
    for left, right in zip(a, b):
        if left != right and left != 1 and right != 1:
            return f"cannot broadcast {a} with {b}"
    return None


def _check_any(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    return None


def _check_matmul(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    a, b = shapes
    if a[1] != b[0]:
        return f"inner dimensions differ: {a} @ {b}"
    return None


def _check_concat(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    widths = {s[1] for s in shapes}
    if len(widths) != 1:
        return f"column counts differ: {list(shapes)}"
    return None


def _check_slice(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    (shape,) = shapes
    start, stop = attrs["start"], attrs["stop"]
    if not 0 <= start <= stop <= shape[0]:
        return f"row slice [{start}:{stop}] out of range for {shape}"
    return None


def _check_axis(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    if attrs.get("axis") not in (None, 0, 1):
        return f"unsupported axis {attrs.get('axis')}"
    return None


def _check_dropout(shapes: Sequence[Shape], attrs: dict[str, Any]) -> str | None:
    mask = attrs.get("mask")
    if mask is not None and mask.shape != shapes[0]:
        return f"mask shape {mask.shape} differs from input {shapes[0]}"
    return None


# -- elementwise binary ------------------------------------------------------


def _add_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return _unbroadcast(g, x[0].shape), _unbroadcast(g, x[1].shape)


def _sub_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return _unbroadcast(g, x[0].shape), _unbroadcast(-g, x[1].shape)


def _mul_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return _unbroadcast(g * x[1], x[0].shape), _unbroadcast(g * x[0], x[1].shape)


def _div_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    a, b = x
    return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)


# -- reductions ----------------------------------------------------------------


def _reduce_forward(fn: Callable[..., np.ndarray]) -> Callable[[Sequence[np.ndarray], dict[str, Any]], np.ndarray]:
    def forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
        axis = attrs.get("axis")
        if axis is None:
            return np.array([[fn(x[0])]])
        return fn(x[0], axis=axis, keepdims=True)

    return forward


def _sum_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return (np.broadcast_to(g, x[0].shape).copy(),)


def _mean_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    axis = attrs.get("axis")
    count = x[0].size if axis is None else x[0].shape[axis]
    return (np.broadcast_to(g, x[0].shape) / max(count, 1),)


# -- softmax family -----------------------------------------------------------


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softmax_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return (out * (g - (g * out).sum(axis=1, keepdims=True)),)


def _log_softmax_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return (g - np.exp(out) * g.sum(axis=1, keepdims=True),)


# -- spectral -------------------------------------------------------------------


def _svd_forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
    U, s, V = jacobi_svd(x[0])
    attrs["U"], attrs["V"] = U, V
    return s.reshape(-1, 1)


def _svd_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    sigma = out[:, 0]
    weights = g[:, 0]
    _warn_if_degenerate(sigma, weights)
    U, V = attrs["U"], attrs["V"]
    return ((U * weights) @ V.T,)


def _warn_if_degenerate(sigma: np.ndarray, weights: np.ndarray) -> None:
    """Warn when the subgradient is ambiguous: two (near) equal non-zero
    singular values receive different upstream weights."""
    for i in range(len(sigma) - 1):
        if sigma[i + 1] <= 0.0:
            break
        if sigma[i] - sigma[i + 1] < DEGENERACY_GAP and weights[i] != weights[i + 1]:
            display.warning(
                f"Degenerate singular values σ{i + 1}≈σ{i + 2}={sigma[i]:.3e}; "
                "using the u·vᵀ subgradient"
            )
            return


def _nuclear_forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
    U, s, V = jacobi_svd(x[0])
    attrs["U"], attrs["V"] = U, V
    return np.array([[s.sum()]])


def _nuclear_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return (g[0, 0] * (attrs["U"] @ attrs["V"].T),)


# -- misc -----------------------------------------------------------------------


def _row_norm_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    safe = np.where(out > 0.0, out, 1.0)
    return (np.where(out > 0.0, g * x[0] / safe, 0.0),)


def _concat_forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
    return np.vstack(list(x))


def _concat_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    bounds = np.cumsum([0] + [part.shape[0] for part in x])
    return tuple(g[bounds[i] : bounds[i + 1]] for i in range(len(x)))


def _slice_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    full = np.zeros_like(x[0])
    full[attrs["start"] : attrs["stop"]] = g
    return (full,)


def _sort_forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
    order = np.argsort(x[0], axis=0, kind="stable")
    attrs["order"] = order
    return np.take_along_axis(x[0], order, axis=0)


def _sort_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    full = np.zeros_like(x[0])
    np.put_along_axis(full, attrs["order"], g, axis=0)
    return (full,)


def _dropout_forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
    mask = attrs.get("mask")
    return x[0].copy() if mask is None else x[0] * mask


def _dropout_backward(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    mask = attrs.get("mask")
    return (g if mask is None else g * mask,)


def _detach_forward(x: Sequence[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
    transform = attrs.get("transform")
    value = x[0] if transform is None else transform(x[0])
    return np.atleast_2d(np.asarray(value, dtype=np.float64)).copy()


def _no_grad(g: np.ndarray, x: Sequence[np.ndarray], out: np.ndarray, attrs: dict[str, Any]) -> Grads:
    return tuple(None for _ in x)


OP_RULES: dict[OpKind, OpRule] = {
    OpKind.MATMUL: OpRule(
        forward=lambda x, a: x[0] @ x[1],
        backward=lambda g, x, out, a: (g @ x[1].T, x[0].T @ g),
        check=_check_matmul,
    ),
    OpKind.ADD: OpRule(lambda x, a: x[0] + x[1], _add_backward, _check_broadcast),
    OpKind.SUB: OpRule(lambda x, a: x[0] - x[1], _sub_backward, _check_broadcast),
    OpKind.MUL: OpRule(lambda x, a: x[0] * x[1], _mul_backward, _check_broadcast),
    OpKind.DIV: OpRule(lambda x, a: x[0] / x[1], _div_backward, _check_broadcast),
    OpKind.SCALE: OpRule(
        forward=lambda x, a: x[0] * a["factor"],
        backward=lambda g, x, out, a: (g * a["factor"],),
        check=_check_any,
    ),
    OpKind.RELU: OpRule(
        forward=lambda x, a: np.maximum(x[0], 0.0),
        backward=lambda g, x, out, a: (g * (x[0] > 0.0),),
        check=_check_any,
    ),
    OpKind.EXP: OpRule(
        forward=lambda x, a: np.exp(x[0]),
        backward=lambda g, x, out, a: (g * out,),
        check=_check_any,
    ),
    OpKind.LOG: OpRule(
        forward=lambda x, a: np.log(x[0] + a.get("eps", 0.0)),
        backward=lambda g, x, out, a: (g / (x[0] + a.get("eps", 0.0)),),
        check=_check_any,
    ),
    OpKind.NEG: OpRule(
        forward=lambda x, a: -x[0],
        backward=lambda g, x, out, a: (-g,),
        check=_check_any,
    ),
    OpKind.ABS: OpRule(
        forward=lambda x, a: np.abs(x[0]),
        backward=lambda g, x, out, a: (g * np.sign(x[0]),),
        check=_check_any,
    ),
    OpKind.SQRT: OpRule(
        forward=lambda x, a: np.sqrt(x[0]),
        backward=lambda g, x, out, a: (g / (2.0 * out),),
        check=_check_any,
    ),
    OpKind.SUM: OpRule(_reduce_forward(np.sum), _sum_backward, _check_axis),
    OpKind.MEAN: OpRule(_reduce_forward(np.mean), _mean_backward, _check_axis),
    OpKind.ROW_SOFTMAX: OpRule(
        forward=lambda x, a: _softmax(x[0]),
        backward=_softmax_backward,
        check=_check_any,
    ),
    OpKind.ROW_LOG_SOFTMAX: OpRule(
        forward=lambda x, a: _log_softmax(x[0]),
        backward=_log_softmax_backward,
        check=_check_any,
    ),
    OpKind.DROPOUT_MASK: OpRule(_dropout_forward, _dropout_backward, _check_dropout),
    OpKind.CONCAT_ROWS: OpRule(_concat_forward, _concat_backward, _check_concat),
    OpKind.SVD_SINGULAR_VALUES: OpRule(_svd_forward, _svd_backward, _check_any),
    OpKind.NUCLEAR_NORM: OpRule(_nuclear_forward, _nuclear_backward, _check_any),
    OpKind.GRAD_REVERSE: OpRule(
        forward=lambda x, a: x[0].copy(),
        backward=lambda g, x, out, a: (-a["lambda_grl"] * g,),
        check=_check_any,
    ),
    OpKind.L2_ROW_NORM: OpRule(
        forward=lambda x, a: np.sqrt((x[0] * x[0]).sum(axis=1, keepdims=True)),
        backward=_row_norm_backward,
        check=_check_any,
    ),
    OpKind.TRANSPOSE: OpRule(
        forward=lambda x, a: x[0].T.copy(),
        backward=lambda g, x, out, a: (g.T,),
        check=_check_any,
    ),
    OpKind.SLICE_ROWS: OpRule(
        forward=lambda x, a: x[0][a["start"] : a["stop"]].copy(),
        backward=_slice_backward,
        check=_check_slice,
    ),
    OpKind.SORT_COLUMNS: OpRule(_sort_forward, _sort_backward, _check_any),
    OpKind.DETACH: OpRule(_detach_forward, _no_grad, _check_any),
}
