"""Sparse linear algebra behind the Newton solves.

Matrices are scipy CSR in canonical form (sorted indices, summed
duplicates).  The default direct solve is SuperLU with COLAMD ordering,
which is deterministic for a fixed matrix; GMRES with diagonal
preconditioning is available behind a flag for large problems.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularMatrixError

__all__ = ["spmv", "solve", "add_scaled", "canonical_csr"]

SOLVE_RTOL = 1e-10


def canonical_csr(A):
    """CSR with sorted column indices and no duplicate entries."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    """Exact CSR matrix-vector product."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def add_scaled(accumulator, A, c):
    """Entrywise ``accumulator + c * A`` on the union sparsity pattern."""
    if accumulator.shape != A.shape:
        raise ValueError(f"shape mismatch: {accumulator.shape} vs {A.shape}")
    return canonical_csr(accumulator + c * A)


def _check_residual(A, x, b):
    if not np.all(np.isfinite(x)):
        return np.inf
    return float(np.linalg.norm(A @ x - b))


def solve(A, b, method="lu", gmres_maxiter=2000):
    """Solve A x = b with residual ||Ax-b|| <= 1e-10 (1 + ||b||).

    ``method`` is "lu" (sparse LU, deterministic pivoting/ordering) or
    "gmres" (diagonally preconditioned).  A matrix that is singular to
    tolerance raises SingularMatrixError.
    """
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs {b.shape}")
    tol = SOLVE_RTOL * (1.0 + np.linalg.norm(b))

    if method == "lu":
        try:
            lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD")
            x = lu.solve(b)
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SingularMatrixError(str(exc)) from exc
        if _check_residual(A, x, b) > tol:
            x = x + lu.solve(b - A @ x)  # one step of iterative refinement
        res = _check_residual(A, x, b)
        if res > tol:
            raise SingularMatrixError(
                f"direct solve residual {res:.3e} exceeds tolerance {tol:.3e}"
            )
        return x

    if method == "gmres":
        diag = A.diagonal()
        if np.any(diag == 0.0):
            M = None
        else:
            M = spla.LinearOperator(A.shape, lambda v: v / diag)
        x, info = spla.gmres(A, b, rtol=1e-12, atol=tol * 0.1, M=M,
                             maxiter=gmres_maxiter, restart=200)
        if info != 0 or _check_residual(A, x, b) > tol:
            raise SingularMatrixError(f"gmres failed to converge (info={info})")
        return x

    raise ValueError(f"unknown solve method {method!r}")
