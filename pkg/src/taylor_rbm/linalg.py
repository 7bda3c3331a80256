"""Shared dense and tall-skinny linear algebra.

Subspaces are always represented by orthonormal factors, never by dense
projectors; the helpers here keep every projector manipulation in factored
form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-12
POWER_ITERATION_CAP = 10_000


class PowerIterationError(RuntimeError):
    """Power iteration did not converge; ``best_estimate`` holds the last value."""

    def __init__(self, message, best_estimate):
        super().__init__(message)
        self.best_estimate = best_estimate


@dataclass(frozen=True)
class SubspaceFactor:
    """N x M matrix with orthonormal columns representing the projector W W*."""

    columns: np.ndarray

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def project(self, x: np.ndarray) -> np.ndarray:
        """W (W* x), the projection of x onto the subspace."""
        w = self.columns
        return w @ (w.conj().T @ x)

    def complement(self, x: np.ndarray) -> np.ndarray:
        """x - W (W* x), the projection onto the orthogonal complement."""
        return x - self.project(x)

    def orthonormality_defect(self) -> float:
        w = self.columns
        return float(np.abs(w.conj().T @ w - np.eye(self.rank)).max())


def empty_factor(dim: int, dtype=float) -> SubspaceFactor:
    return SubspaceFactor(np.zeros((dim, 0), dtype=dtype))


def orthonormalize_append(basis, newcols: np.ndarray, tol_rank: float = DEFAULT_RANK_TOL) -> SubspaceFactor:
    """Extend an orthonormal basis by new columns with rank detection.

    Each candidate column is swept with modified Gram-Schmidt against the
    current basis plus one reorthogonalization pass.  A candidate is dropped
    when its norm is at most ``tol_rank`` (numerically a zero column) or when
    the surviving residual is at most ``tol_rank`` times the candidate norm
    (numerically inside the current span).  Earlier basis columns are never
    touched, so the output dimension is deterministic given the input order.
    """
    newcols = np.atleast_2d(np.asarray(newcols))
    if newcols.ndim != 2:
        raise ValueError("new columns must form a 2d array")
    if basis is None:
        cols = []
        dim = newcols.shape[0]
        dtype = newcols.dtype
    else:
        cols = [basis.columns[:, j] for j in range(basis.rank)]
        dim = basis.dim
        dtype = np.result_type(basis.columns.dtype, newcols.dtype)
        if newcols.shape[0] != dim:
            raise ValueError(f"column dimension {newcols.shape[0]} does not match basis dimension {dim}")

    for j in range(newcols.shape[1]):
        c = newcols[:, j].astype(dtype, copy=True)
        norm_c = np.linalg.norm(c)
        if norm_c <= tol_rank:
            continue
        for _ in range(2):
            for q in cols:
                c -= q * (q.conj() @ c)
        norm_res = np.linalg.norm(c)
        if norm_res <= tol_rank * norm_c:
            continue
        cols.append(c / norm_res)

    if not cols:
        return empty_factor(dim, dtype=dtype)
    return SubspaceFactor(np.column_stack(cols))


def subspace_distance(first: SubspaceFactor, second: SubspaceFactor) -> float:
    """Spectral-norm distance between two equal-rank orthogonal projectors.

    The sine of the largest principal angle, which equals the norm of the
    projector difference when the ranks agree; unequal ranks are rejected
    because the identity fails there.  Evaluated as the largest singular
    value of the thin residual W2 - W1 (W1* W2): unlike the Gram-matrix form
    sqrt(1 - sigma_min^2), this resolves angles far below 1e-8, which the
    convergence studies need.
    """
    if first.rank != second.rank:
        raise ValueError(f"rank mismatch: {first.rank} vs {second.rank}")
    if first.rank == 0:
        return 0.0
    residual = second.columns - first.project(second.columns)
    top = scipy.linalg.svd(residual, compute_uv=False)[0]
    return float(min(max(top, 0.0), 1.0))


def spectral_norm(matvec, n: int, tol: float = 1e-8, rmatvec=None, rng=None,
                  maxiter: int = POWER_ITERATION_CAP) -> float:
    """Largest singular value of a matrix-free linear action on C^n.

    Power iteration on op* op with a randomized start vector; ``rmatvec``
    defaults to ``matvec`` (self-adjoint action).  Raises
    ``PowerIterationError`` carrying the best estimate when the relative
    increment has not dropped below ``tol`` within ``maxiter`` steps.
    """
    if rmatvec is None:
        rmatvec = matvec
    if rng is None:
        rng = np.random.default_rng(0)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(maxiter):
        u = matvec(v)
        new_estimate = float(np.linalg.norm(u))
        if new_estimate == 0.0:
            return 0.0
        z = rmatvec(u)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return new_estimate
        converged = abs(new_estimate - estimate) <= tol * max(new_estimate, np.finfo(float).tiny)
        estimate = new_estimate
        v = z / nz
        if converged:
            return estimate
    raise PowerIterationError(
        f"power iteration did not reach tolerance {tol:.1e} in {maxiter} steps",
        best_estimate=estimate,
    )


def hermitian_eig(matrix: np.ndarray, check_tol: float = 1e-12):
    """Eigendecomposition of a small dense Hermitian matrix.

    Returns ascending eigenvalues and an orthonormal eigenvector matrix.
    Inputs whose skew part exceeds ``check_tol`` relative to the entry scale
    are rejected; the remaining roundoff skew is symmetrized away.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    skew = float(np.abs(matrix - matrix.conj().T).max(initial=0.0))
    if skew > check_tol * scale:
        raise ValueError(f"matrix is not Hermitian: skew part {skew:.2e} exceeds tolerance")
    sym = 0.5 * (matrix + matrix.conj().T)
    values, vectors = scipy.linalg.eigh(sym)
    return values, vectors
