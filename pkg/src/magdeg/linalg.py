"""Sparse storage and a Jacobi-preconditioned conjugate gradient solver.

Matrices are held as :class:`scipy.sparse.csr_matrix`; the Krylov iteration
itself is written out here so the convergence test and report match what the
transport step needs (penalty rows make plain ``||r|| / ||b||`` meaningless for
the unpenalised rows, so convergence also requires the Jacobi-scaled residual
to meet the tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError

SparseMatrix = sp.csr_matrix


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    scaled_residual: float = 0.0


def as_sparse(A) -> sp.csr_matrix:
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def _scaled_norm(r, dinv):
    return float(np.linalg.norm(r * dinv))


def solve(A, b, tol: float = 1e-9, max_iter: int = 1000, x0=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Returns ``(x, SolveReport)``.  ``final_residual`` is the true relative
    residual ``||b - A x|| / ||b||`` recomputed with an explicit product.
    Non-convergence is reported, not raised.
    """
    A = as_sparse(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidArgumentError(f"matrix must be square, got {A.shape}")
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape != (n,):
        raise InvalidArgumentError(f"rhs has length {b.size}, matrix is {n}x{n}")
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, 0.0)

    diag = A.diagonal()
    if np.any(diag <= 0):
        raise InvalidArgumentError("matrix diagonal must be strictly positive")
    dinv = 1.0 / diag
    sbnorm = _scaled_norm(b, dinv)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    r = b - A @ x
    it = 0
    pq = 1.0

    def done(res):
        return (np.linalg.norm(res) <= tol * bnorm
                and _scaled_norm(res, dinv) <= tol * sbnorm)

    # outer loop restarts from the true residual if the recursive one drifted
    while not done(r) and it < max_iter:
        z = r * dinv
        p = z.copy()
        rz = float(r @ z)
        while it < max_iter:
            q = A @ p
            pq = float(p @ q)
            if pq <= 0.0:
                break
            alpha = rz / pq
            x += alpha * p
            r -= alpha * q
            it += 1
            if done(r):
                break
            z = r * dinv
            rz_new = float(r @ z)
            p *= rz_new / rz
            p += z
            rz = rz_new
        r = b - A @ x
        if pq <= 0.0:
            break

    rel = float(np.linalg.norm(r)) / bnorm
    srel = _scaled_norm(r, dinv) / sbnorm
    converged = rel <= tol and srel <= tol
    return x, SolveReport(it, rel, bool(converged), srel)
