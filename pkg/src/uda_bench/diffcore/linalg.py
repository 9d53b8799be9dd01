"""One-sided Jacobi singular value decomposition."""

import math

import numpy as np

from uda_bench.utils.exceptions import NumericError

MAX_SWEEPS = 100
OFF_DIAGONAL_TOL = 1e-12


def jacobi_svd(
    A: np.ndarray, max_sweeps: int = MAX_SWEEPS, tol: float = OFF_DIAGONAL_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``A = U diag(s) V^T`` by one-sided (Hestenes) Jacobi rotations.

    Column pairs of a working copy are rotated until every pair is
    orthogonal to within ``tol`` (relative to the column norms). ``A^T A``
    is never formed.

    Args:
        A: Matrix of shape (m, n).
        max_sweeps: Sweep cap before giving up.
        tol: Relative off-diagonal tolerance.

    Returns:
        ``(U, s, V)`` with ``U`` (m, r), ``s`` (r,) sorted descending and
        ``V`` (n, r), where ``r = min(m, n)``. Columns of ``U`` belonging to
        zero singular values are zero.

    Raises:
        NumericError: If the rotations do not converge within ``max_sweeps``.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    transposed = m < n
    W = (A.T if transposed else A).copy()
    cols = W.shape[1]
    V = np.eye(cols)

    for _ in range(max_sweeps):
        worst = 0.0
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                alpha = float(W[:, p] @ W[:, p])
                beta = float(W[:, q] @ W[:, q])
                gamma = float(W[:, p] @ W[:, q])
                if alpha == 0.0 or beta == 0.0 or gamma == 0.0:
                    continue
                off = abs(gamma) / math.sqrt(alpha * beta)
                worst = max(worst, off)
                if off <= tol:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                wp = W[:, p].copy()
                W[:, p] = c * wp - s * W[:, q]
                W[:, q] = s * wp + c * W[:, q]
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
        if worst <= tol:
            break
    else:
        raise NumericError(
            f"Jacobi SVD did not converge after {max_sweeps} sweeps "
            f"on a {m}x{n} matrix"
        )

    sigma = np.sqrt(np.einsum("ij,ij->j", W, W))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    W = W[:, order]
    V = V[:, order]
    U = np.zeros_like(W)
    nonzero = sigma > 0.0
    U[:, nonzero] = W[:, nonzero] / sigma[nonzero]

    if transposed:
        U, V = V, U
    return U, sigma, V
