"""Online phase: Galerkin compression and error metrics.

The affine structure survives compression, so each parameter-independent
term is compressed once offline; a query then assembles and diagonalizes an
r x r matrix.  All error quantities stay in factored form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import TaylorBasis
from .linalg import SubspaceFactor, spectral_norm
from .operators import AffineOperator
from .spectral import ReferenceSolution

DEGENERACY_TOL = 1e-10


class ReducedModel:
    """Compression of an affine operator family onto a fixed basis.

    Stores the compressed terms V* A_q V and the lifted products A_q V; the
    latter make the subspace residual at a query point cheap without ever
    forming an N x N matrix.
    """

    def __init__(self, op: AffineOperator, basis: TaylorBasis, target_rank: int | None = None):
        if target_rank is None:
            target_rank = basis.total_rank
        if basis.rank < target_rank:
            raise ValueError(
                f"basis rank {basis.rank} is smaller than the target rank {target_rank}"
            )
        self.operator = op
        self.basis = basis
        self.target_rank = int(target_rank)
        v = basis.factor.columns
        self.lifted_terms = [np.asarray(mat @ v) for _, mat in op.terms]
        self.compressed_terms = []
        for lifted in self.lifted_terms:
            block = v.conj().T @ lifted
            self.compressed_terms.append(0.5 * (block + block.conj().T))

    @property
    def rank(self) -> int:
        return self.basis.rank

    def compressed(self, mu) -> np.ndarray:
        """Assemble the dense r x r compression at one parameter point."""
        weights = self.operator.coefficients(mu)
        out = weights[0] * self.compressed_terms[0]
        for w, block in zip(weights[1:], self.compressed_terms[1:]):
            out = out + w * block
        return out

    def truncated(self, order: int) -> "ReducedModel":
        """View of the model restricted to the order-``order`` leading columns.

        Valid because basis columns are sorted by grade: the compressed terms
        of the smaller basis are leading principal blocks of the full ones.
        """
        r = self.basis.truncated_rank(order)
        view = object.__new__(ReducedModel)
        view.operator = self.operator
        view.basis = TaylorBasis(
            factor=SubspaceFactor(self.basis.factor.columns[:, :r]),
            order=order,
            mu0=self.basis.mu0,
            dim_history=self.basis.dim_history[: order + 1],
            multiplicities=self.basis.multiplicities,
        )
        view.target_rank = self.target_rank
        view.lifted_terms = [block[:, :r] for block in self.lifted_terms]
        view.compressed_terms = [block[:r, :r] for block in self.compressed_terms]
        return view


@dataclass(frozen=True)
class RomSolution:
    """Reduced eigensolution at one parameter point, lifted to the full space."""

    mu: np.ndarray
    reduced_factor: np.ndarray  # r x M eigenvector block of the compression
    lifted: SubspaceFactor      # N x M factor of the approximate invariant subspace
    ritz_values: np.ndarray     # all r Ritz values, ascending
    ritz_sum: float             # sum of the lowest M
    degenerate: bool            # Ritz values M and M+1 coincide (minimizer not unique)

    @property
    def rank(self) -> int:
        return self.lifted.rank

    def discarded_ritz_values(self) -> np.ndarray:
        return self.ritz_values[self.rank:]


def project(op: AffineOperator, basis: TaylorBasis, target_rank: int | None = None) -> ReducedModel:
    """Offline compression of every affine term onto the basis."""
    return ReducedModel(op, basis, target_rank=target_rank)


def solve_reduced(model: ReducedModel, mu) -> RomSolution:
    """Solve the reduced eigenproblem and lift the lowest invariant block."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    m = model.target_rank
    values, vectors = scipy.linalg.eigh(model.compressed(mu))
    reduced = vectors[:, :m]
    lifted = SubspaceFactor(model.basis.factor.columns @ reduced)
    degenerate = model.rank > m and (values[m] - values[m - 1]) <= DEGENERACY_TOL
    return RomSolution(
        mu=mu,
        reduced_factor=reduced,
        lifted=lifted,
        ritz_values=values,
        ritz_sum=float(values[:m].sum()),
        degenerate=degenerate,
    )


def projector_error(solution: RomSolution, reference: SubspaceFactor) -> float:
    """Spectral-norm distance between the lifted and the exact projector."""
    from .linalg import subspace_distance

    return subspace_distance(solution.lifted, reference)


def ritz_error(solution: RomSolution, reference_sum: float) -> float:
    """Signed Ritz-value sum error; nonnegative wherever the exact subspace
    is the variational minimizer."""
    return solution.ritz_sum - float(reference_sum)


def projection_error(basis_factor: SubspaceFactor, reference: SubspaceFactor) -> float:
    """Largest singular value of (I - V V*) W, the best-approximation error of
    the reference subspace inside the basis."""
    w = reference.columns
    residual = w - basis_factor.project(w)
    if residual.size == 0:
        return 0.0
    return float(scipy.linalg.svd(residual, compute_uv=False)[0])


def residual(model: ReducedModel, mu, tol: float = 1e-10, rng=None) -> float:
    """Subspace residual ||Pi A(mu) Pi_perp|| of the basis at a query point.

    Power iteration on the r x r self-adjoint composition of the residual map
    with its adjoint, using the cached lifted terms; nothing larger than
    N x r is touched.
    """
    weights = model.operator.coefficients(mu)
    lifted = weights[0] * model.lifted_terms[0]
    for w, block in zip(weights[1:], model.lifted_terms[1:]):
        lifted = lifted + w * block
    compressed = model.compressed(mu)

    def action(y):
        return lifted.conj().T @ (lifted @ y) - compressed @ (compressed @ y)

    value = spectral_norm(action, model.rank, tol=tol, rng=rng)
    return float(np.sqrt(max(value, 0.0)))


def discarded_gap(solution: RomSolution, target_eigenvalues) -> float:
    """Distance between the exact target eigenvalues and the discarded Ritz
    values; infinite when the basis has no discarded directions."""
    discarded = solution.discarded_ritz_values()
    if discarded.size == 0:
        return float("inf")
    target = np.atleast_1d(np.asarray(target_eigenvalues, dtype=float))
    return float(np.abs(target[:, None] - discarded[None, :]).min())


def error_bound(residual_value: float, gap: float, projection_err: float) -> float:
    """A-priori projector error bound sqrt(1 + Res^2 / gap^2) * projection error."""
    if gap <= 0.0:
        raise ValueError("the bound requires a positive gap")
    if np.isinf(gap):
        return float(projection_err)
    return float(np.sqrt(1.0 + (residual_value / gap) ** 2) * projection_err)


def ritz_sum_of_factor(op: AffineOperator, mu, factor: SubspaceFactor) -> float:
    """tr A(mu) W W* for an orthonormal factor, via column inner products."""
    w = factor.columns
    return float(np.real(np.sum(w.conj() * op.apply(mu, w))))
