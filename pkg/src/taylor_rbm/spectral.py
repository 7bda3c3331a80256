"""Full-order spectral computations.

Cluster detection at the expansion point, exact reference projectors at query
points, and the deflated solve that inverts the operator on the orthogonal
complement of an eigenspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .linalg import SubspaceFactor
from .operators import AffineOperator

DEFAULT_CLUSTER_TOL = 1e-10
DEFAULT_SOLVE_TOL = 1e-12
DEFAULT_DENSE_CUTOFF = 4096
CROSSING_FLAG_TOL = 1e-10


class ClusterDetectionError(RuntimeError):
    pass


class AmbiguousClusterError(ClusterDetectionError):
    """An eigenvalue gap fell inside the undecidable band around the tolerance."""


class DeflatedSolveError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class EigenCluster:
    """One isolated eigenvalue with its multiplicity and orthonormal eigenbasis."""

    eigenvalue: float
    multiplicity: int
    basis: SubspaceFactor
    gap_above: float
    is_lowest: bool


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[EigenCluster, ...]

    @property
    def total_rank(self) -> int:
        return sum(c.multiplicity for c in self.clusters)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([c.eigenvalue for c in self.clusters])

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(c.multiplicity for c in self.clusters)


@dataclass(frozen=True)
class ReferenceSolution:
    """Exact invariant subspace of the lowest eigenvalues at one parameter point."""

    factor: SubspaceFactor
    eigenvalues: np.ndarray  # the targeted lowest eigenvalues, ascending
    ritz_sum: float
    gap: float  # distance from the highest targeted to the next eigenvalue
    near_crossing: bool


def _start_vector(dim: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


def smallest_eigenpairs(op: AffineOperator, mu, k: int, dense_cutoff: int = DEFAULT_DENSE_CUTOFF,
                        seed: int = 0):
    """Ascending smallest eigenpairs of A(mu).

    Dense decomposition below the cutoff; otherwise an implicitly restarted
    Lanczos iteration on the sparse assembled matrix with a seeded start
    vector so repeated runs are reproducible.
    """
    if op.dim <= dense_cutoff:
        values, vectors = scipy.linalg.eigh(op.assemble_dense(mu))
        k = min(k, op.dim)
        return values[:k], vectors[:, :k]
    if k >= op.dim - 1:
        raise ClusterDetectionError("requested too many eigenpairs for the iterative path")
    matrix = _assemble_sparse(op, mu)
    values, vectors = spla.eigsh(matrix, k=k, which="SA", v0=_start_vector(op.dim, seed))
    order = np.argsort(values)
    return values[order], vectors[:, order]


def _assemble_sparse(op: AffineOperator, mu):
    weights = op.coefficients(mu)
    matrix = weights[0] * op.terms[0][1]
    for w, (_, mat) in zip(weights[1:], op.terms[1:]):
        matrix = matrix + w * mat
    return matrix.tocsr()


def smallest_eigenvalues(op: AffineOperator, mu, k: int, dense_cutoff: int = DEFAULT_DENSE_CUTOFF,
                         seed: int = 0) -> np.ndarray:
    """Ascending smallest eigenvalues only (cheaper than full pairs)."""
    if op.dim <= dense_cutoff:
        values = scipy.linalg.eigvalsh(op.assemble_dense(mu))
        return values[: min(k, op.dim)]
    matrix = _assemble_sparse(op, mu)
    values = spla.eigsh(matrix, k=k, which="SA", v0=_start_vector(op.dim, seed),
                        return_eigenvectors=False)
    return np.sort(values)


def _group_by_gap(values: np.ndarray, tol: float) -> list[slice]:
    groups = []
    start = 0
    for i in range(1, len(values)):
        if values[i] - values[i - 1] > tol:
            groups.append(slice(start, i))
            start = i
    groups.append(slice(start, len(values)))
    return groups


def lowest_clusters(op: AffineOperator, mu0, n_clusters: int, tol_cluster: float = DEFAULT_CLUSTER_TOL,
                    dense_cutoff: int = DEFAULT_DENSE_CUTOFF, seed: int = 0) -> ClusterSet:
    """Detect the ``n_clusters`` lowest eigenvalue clusters of A(mu0).

    Two computed eigenvalues share a cluster iff their gap is at most
    ``tol_cluster``.  Gaps falling in (tol_cluster, 10 * tol_cluster] around
    the targeted clusters are rejected as ambiguous: the grouping would flip
    under a slightly different tolerance.  The solve is enlarged until the
    cluster after the last targeted one has visibly started, which certifies
    that cluster ``n_clusters`` is complete.
    """
    if n_clusters < 1:
        raise ValueError("cluster count must be >= 1")
    k = min(max(12, 8 * n_clusters), max(2, op.dim - 2))
    while True:
        values, vectors = smallest_eigenpairs(op, mu0, k, dense_cutoff=dense_cutoff, seed=seed)
        groups = _group_by_gap(values, tol_cluster)
        if len(groups) > n_clusters:
            break
        if k >= op.dim - 2:
            raise ClusterDetectionError(
                f"could not separate {n_clusters} clusters from the spectrum"
            )
        k = min(2 * k, op.dim - 2)

    chosen = groups[:n_clusters]
    boundary = groups[n_clusters].start
    for i in range(1, boundary + 1):
        gap = values[i] - values[i - 1]
        if tol_cluster < gap <= 10.0 * tol_cluster:
            raise AmbiguousClusterError(
                f"eigenvalue gap {gap:.3e} is too close to the clustering tolerance "
                f"{tol_cluster:.1e}; rerun with a different tolerance"
            )

    clusters = []
    for idx, grp in enumerate(chosen):
        members = values[grp]
        next_value = values[grp.stop]
        clusters.append(
            EigenCluster(
                eigenvalue=float(members.mean()),
                multiplicity=members.size,
                basis=SubspaceFactor(vectors[:, grp].copy()),
                gap_above=float(next_value - members[-1]),
                is_lowest=(idx == 0),
            )
        )
    return ClusterSet(clusters=tuple(clusters))


def reference_projector(op: AffineOperator, mu, rank: int, dense_cutoff: int = DEFAULT_DENSE_CUTOFF,
                        seed: int = 0) -> ReferenceSolution:
    """Exact factor of the invariant subspace of the ``rank`` smallest eigenvalues.

    Counts multiplicity.  The returned gap is the distance between eigenvalue
    ``rank`` and ``rank + 1``; when it falls below the crossing threshold the
    targeted subspace is no longer uniquely defined and the solution carries a
    warning flag.
    """
    if rank < 1:
        raise ValueError("rank must be >= 1")
    values, vectors = smallest_eigenpairs(op, mu, min(rank + 2, op.dim), dense_cutoff=dense_cutoff,
                                          seed=seed)
    if values.size <= rank:
        raise ClusterDetectionError("not enough eigenvalues below the requested rank")
    target = values[:rank]
    gap = float(values[rank] - values[rank - 1])
    return ReferenceSolution(
        factor=SubspaceFactor(vectors[:, :rank].copy()),
        eigenvalues=target.copy(),
        ritz_sum=float(target.sum()),
        gap=gap,
        near_crossing=gap <= CROSSING_FLAG_TOL,
    )


def reduced_resolvent_apply(op: AffineOperator, mu0, cluster: EigenCluster, v: np.ndarray,
                            alpha: float | None = None, tol_solve: float = DEFAULT_SOLVE_TOL,
                            maxiter: int | None = None) -> np.ndarray:
    """Invert A(mu0) - lambda0 on the orthogonal complement of the eigenspace.

    Solves (A0 - lambda0 I + alpha P0) x = (I - P0) v with a Krylov method;
    the regularization term alpha P0 removes the kernel without moving the
    solution, which stays orthogonal to the eigenspace.  Conjugate gradients
    apply when lambda0 is the smallest eigenvalue (the shifted operator is
    then positive semidefinite); otherwise MINRES handles the indefinite
    system.  By default alpha is the gap to the next distinct eigenvalue,
    floored at one, so the regularized conditioning matches the deflated one.
    """
    v = np.asarray(v)
    basis = cluster.basis
    rhs = basis.complement(v)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs, dtype=np.result_type(rhs.dtype, float))
    if alpha is None:
        alpha = max(cluster.gap_above, 1.0)
    if alpha <= 0.0:
        raise ValueError("regularization weight must be positive")
    lam = cluster.eigenvalue
    dtype = np.result_type(rhs.dtype, float)

    def matvec(y):
        return op.apply(mu0, y) - lam * y + alpha * basis.project(y)

    action = spla.LinearOperator((op.dim, op.dim), matvec=matvec, dtype=dtype)
    solver = spla.cg if cluster.is_lowest else spla.minres
    if maxiter is None:
        maxiter = max(1000, 20 * int(np.sqrt(op.dim)) * 10)
    x, info = solver(action, rhs, rtol=tol_solve, atol=0.0, maxiter=maxiter)
    if info != 0:
        residual = float(np.linalg.norm(matvec(x) - rhs) / rhs_norm)
        raise DeflatedSolveError(
            f"deflated solve stopped with code {info} at relative residual {residual:.3e}",
            residual=residual,
        )
    # roundoff can leak a small eigenspace component; project it away so the
    # orthogonality contract holds at the solver tolerance
    return x - basis.project(x)


def solve_columns(op: AffineOperator, mu0, cluster: EigenCluster, block: np.ndarray,
                  alpha: float | None = None, tol_solve: float = DEFAULT_SOLVE_TOL) -> np.ndarray:
    """Apply the deflated inverse column by column to a block."""
    block = np.atleast_2d(np.asarray(block))
    out = np.zeros(block.shape, dtype=np.result_type(block.dtype, float))
    for j in range(block.shape[1]):
        out[:, j] = reduced_resolvent_apply(op, mu0, cluster, block[:, j], alpha=alpha,
                                            tol_solve=tol_solve)
    return out
