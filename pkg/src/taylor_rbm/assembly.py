"""Offline assembly of the Taylor reduced basis.

The subspace spanned by the parameter derivatives of a spectral projector is
built from thin N x m correction blocks obtained by a grade-by-grade
recursion: each grade needs one deflated solve per eigenbasis column plus
convolutions of previously computed blocks.  Dense N x N matrices never
appear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import SubspaceFactor, orthonormalize_append
from .multiindex import indices_of_grade, splittings
from .operators import AffineOperator
from .spectral import ClusterSet, EigenCluster, solve_columns

BASIS_FORMAT = "taylor-rbm-basis"
BASIS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TaylorBasis:
    """Orthonormal basis of the derivative subspace up to a given order.

    ``dim_history[j]`` is the basis dimension after all grade-j blocks have
    been appended; column ``r`` belongs to grade j iff
    dim_history[j-1] <= r < dim_history[j], so the order-j basis is the
    leading ``dim_history[j]`` columns.
    """

    factor: SubspaceFactor
    order: int
    mu0: np.ndarray
    dim_history: tuple[int, ...]
    multiplicities: tuple[int, ...]

    @property
    def rank(self) -> int:
        return self.factor.rank

    @property
    def total_rank(self) -> int:
        """Rank of the targeted invariant subspace (grade-0 content)."""
        return sum(self.multiplicities)

    def truncated_rank(self, order: int) -> int:
        if not 0 <= order <= self.order:
            raise ValueError(f"order {order} outside assembled range 0..{self.order}")
        return self.dim_history[order]


def convolution_pair(beta, corr_store, eff_store, op: AffineOperator, mu0):
    """Convolution sums feeding the grade-|beta| recursion.

    Returns the pair (operator-side sum, correction-side sum): the first
    convolves operator derivatives with lower-grade correction blocks, the
    second correction blocks with lower-grade effective matrices.  Both runs
    over the interior splittings only (empty for grade <= 1) and are
    accumulated in one pass.
    """
    template = next(iter(corr_store.values()))
    op_sum = np.zeros_like(template)
    corr_sum = np.zeros_like(template)
    for nu1, nu2 in splittings(beta, "interior"):
        term = op.derivative_term(nu1, mu0)
        if not term.is_zero:
            op_sum = op_sum + term.apply(corr_store[nu2])
        corr_sum = corr_sum + corr_store[nu1] @ eff_store[nu2]
    return op_sum, corr_sum


def correction_block(op: AffineOperator, mu0, cluster: EigenCluster, beta, op_sum, corr_sum,
                     tol_solve: float) -> np.ndarray:
    """Grade-|beta| correction block via one deflated solve per column.

    The block solves (A0 - lambda0) K = -(I - P0)(A^(beta) U0 + op_sum -
    corr_sum) and is orthogonal to the eigenbasis by construction.
    """
    u0 = cluster.basis.columns
    rhs = corr_sum - op_sum
    term = op.derivative_term(beta, mu0)
    if not term.is_zero:
        rhs = rhs - term.apply(u0)
    return solve_columns(op, mu0, cluster, rhs, tol_solve=tol_solve)


def effective_block(op: AffineOperator, mu0, cluster: EigenCluster, beta, op_sum) -> np.ndarray:
    """Grade-|beta| coefficient of the effective m x m compression.

    Reuses the operator-side convolution already accumulated for the
    correction block of the same grade.
    """
    u0 = cluster.basis.columns
    out = u0.conj().T @ op_sum
    term = op.derivative_term(beta, mu0)
    if not term.is_zero:
        out = out + u0.conj().T @ term.apply(u0)
    return out


def assemble_cluster(op: AffineOperator, mu0, cluster: EigenCluster, order: int,
                     tol_rank: float, tol_solve: float):
    """Run the recursion for one cluster.

    Returns the per-grade kept column blocks (entries may be empty once the
    recursion stops producing new directions) together with the per-grade
    dimension history of the cluster basis.
    """
    d = op.parameter_dim
    m = cluster.multiplicity
    dtype = np.result_type(cluster.basis.columns.dtype, float)
    zero_index = (0,) * d

    corr_store = {zero_index: np.zeros((op.dim, m), dtype=dtype)}
    eff_store = {zero_index: cluster.eigenvalue * np.eye(m, dtype=dtype)}

    basis = orthonormalize_append(None, cluster.basis.columns, tol_rank=tol_rank)
    blocks = {0: basis.columns}
    history = [basis.rank]

    for j in range(1, order + 1):
        grade_candidates = []
        for beta in indices_of_grade(d, j):
            op_sum, corr_sum = convolution_pair(beta, corr_store, eff_store, op, mu0)
            block = correction_block(op, mu0, cluster, beta, op_sum, corr_sum, tol_solve)
            if not np.all(np.isfinite(block)):
                raise FloatingPointError(
                    f"correction block for multi-index {beta} contains non-finite entries"
                )
            corr_store[beta] = block
            if j < order:
                eff_store[beta] = effective_block(op, mu0, cluster, beta, op_sum)
            grade_candidates.append(block)
        before = basis.rank
        basis = orthonormalize_append(basis, np.hstack(grade_candidates), tol_rank=tol_rank)
        blocks[j] = basis.columns[:, before:]
        history.append(basis.rank)

    return blocks, tuple(history)


def assemble_basis(op: AffineOperator, mu0, clusters: ClusterSet, order: int,
                   tol_rank: float = 1e-12, tol_solve: float = 1e-12) -> TaylorBasis:
    """Assemble the derivative subspace for all targeted clusters.

    Each cluster runs its recursion independently; the per-cluster bases are
    then unioned grade by grade into one jointly orthonormal factor whose
    columns stay sorted by grade, so every truncation order corresponds to a
    leading column block.  The final basis is not re-orthonormalized
    globally, which keeps the per-grade history stable.
    """
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    per_cluster = [
        assemble_cluster(op, mu0, cluster, order, tol_rank, tol_solve)
        for cluster in clusters.clusters
    ]

    if len(per_cluster) == 1:
        blocks, history = per_cluster[0]
        factor = SubspaceFactor(np.hstack([blocks[j] for j in range(order + 1)]))
    else:
        basis = None
        history = []
        for j in range(order + 1):
            for blocks, _ in per_cluster:
                if blocks[j].shape[1]:
                    basis = orthonormalize_append(basis, blocks[j], tol_rank=tol_rank)
            history.append(basis.rank)
        history = tuple(history)
        factor = basis

    return TaylorBasis(
        factor=factor,
        order=order,
        mu0=mu0,
        dim_history=tuple(history),
        multiplicities=clusters.multiplicities,
    )


def univariate_correction_blocks(op: AffineOperator, mu0, cluster: EigenCluster, order: int,
                                 tol_solve: float = 1e-12):
    """Single-parameter form of the recursion, written as plain degree loops.

    For d = 1 the multi-index machinery degenerates to splitting an integer
    in two; this direct implementation performs the same arithmetic in the
    same order and exists to cross-check the general code path.
    """
    if op.parameter_dim != 1:
        raise ValueError("univariate recursion requires parameter dimension 1")
    u0 = cluster.basis.columns
    m = cluster.multiplicity
    dtype = np.result_type(u0.dtype, float)
    corr = {0: np.zeros((op.dim, m), dtype=dtype)}
    eff = {0: cluster.eigenvalue * np.eye(m, dtype=dtype)}
    for n in range(1, order + 1):
        op_sum = np.zeros((op.dim, m), dtype=dtype)
        corr_sum = np.zeros((op.dim, m), dtype=dtype)
        for i in range(1, n):
            term = op.derivative_term((i,), mu0)
            if not term.is_zero:
                op_sum = op_sum + term.apply(corr[n - i])
            corr_sum = corr_sum + corr[i] @ eff[n - i]
        rhs = corr_sum - op_sum
        term = op.derivative_term((n,), mu0)
        if not term.is_zero:
            rhs = rhs - term.apply(u0)
        corr[n] = solve_columns(op, mu0, cluster, rhs, tol_solve=tol_solve)
        if n < order:
            eff[n] = u0.conj().T @ op_sum
            if not term.is_zero:
                eff[n] = eff[n] + u0.conj().T @ term.apply(u0)
    return corr


def save_basis(path, basis: TaylorBasis) -> None:
    """Write a basis to disk: one JSON header line, then the column-major
    complex payload of the factor."""
    header = {
        "format": BASIS_FORMAT,
        "version": BASIS_FORMAT_VERSION,
        "dim": basis.factor.dim,
        "rank": basis.rank,
        "order": basis.order,
        "parameter_dim": int(basis.mu0.size),
        "mu0": [float(x) for x in basis.mu0],
        "dim_history": list(basis.dim_history),
        "multiplicities": list(basis.multiplicities),
    }
    payload = np.asfortranarray(basis.factor.columns.astype(np.complex128))
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes(order="F"))


def load_basis(path) -> TaylorBasis:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        header = json.loads(header_line.decode("utf-8"))
        if header.get("format") != BASIS_FORMAT or header.get("version") != BASIS_FORMAT_VERSION:
            raise ValueError("unrecognized basis container")
        raw = fh.read()
    dim, rank = header["dim"], header["rank"]
    expected = dim * rank * np.dtype(np.complex128).itemsize
    if len(raw) != expected:
        raise ValueError(f"basis payload has {len(raw)} bytes, expected {expected}")
    columns = np.frombuffer(raw, dtype=np.complex128).reshape((dim, rank), order="F")
    return TaylorBasis(
        factor=SubspaceFactor(columns.copy()),
        order=int(header["order"]),
        mu0=np.asarray(header["mu0"], dtype=float),
        dim_history=tuple(header["dim_history"]),
        multiplicities=tuple(header["multiplicities"]),
    )
