"""Small dense linear-algebra helpers shared by the analysis modules."""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import eigsh

from ._accel import core

JACOBI_LIMIT = 96


def symmetric_eigh(a: np.ndarray, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors of a real symmetric matrix.

    ``method`` is ``"jacobi"`` (the compiled cyclic Jacobi kernel), ``"lapack"``
    (``numpy.linalg.eigh``) or ``"auto"``, which uses Jacobi up to
    ``JACOBI_LIMIT`` rows and LAPACK above.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_LIMIT else "lapack"
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    if method == "jacobi":
        return core.jacobi_eigh(0.5 * (a + a.T))
    if method == "lapack":
        return np.linalg.eigh(a)
    raise ValueError(f"unknown eigen method {method!r}")


def sum_zero_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n, n-1) of {v : sum(v) = 0} (Helmert columns)."""
    if n < 2:
        return np.zeros((n, 0))
    q = np.zeros((n, n - 1))
    for k in range(1, n):
        q[:k, k - 1] = 1.0
        q[k, k - 1] = -k
        q[:, k - 1] /= np.sqrt(k * (k + 1))
    return q


def power_iteration_norm(apply, apply_t, dim: int, iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Operator 2-norm via power iteration on A^T A, given matvec callables."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(iters):
        y = apply_t(apply(x))
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        x = y / nrm
        if abs(nrm - prev) <= tol * max(nrm, 1.0):
            break
        prev = nrm
    return float(np.linalg.norm(apply(x)))


def operator_norm(matrix, dense_limit: int = 500, seed: int = 0) -> float:
    """Spectral norm of a dense or scipy.sparse matrix.

    Dense eigenvalues of M^T M up to ``dense_limit`` rows; above that, Lanczos
    (ARPACK) on the sparse M^T M from a seeded random start.
    """
    if hasattr(matrix, "toarray") and max(matrix.shape) <= dense_limit:
        matrix = matrix.toarray()
    if isinstance(matrix, np.ndarray):
        gram = matrix.T @ matrix
        return float(np.sqrt(max(np.linalg.eigvalsh(0.5 * (gram + gram.T))[-1], 0.0)))
    gram = (matrix.T @ matrix).tocsr()
    if gram.nnz == 0:
        return 0.0
    v0 = np.random.default_rng(seed).standard_normal(gram.shape[0])
    top = eigsh(gram, k=1, which="LA", tol=0, v0=v0, return_eigenvectors=False)
    return float(np.sqrt(max(top[0], 0.0)))
