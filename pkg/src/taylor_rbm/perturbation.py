"""Dense perturbation-series baseline for the parametric eigenprojector.

Builds the Taylor coefficients of the spectral projector as dense Hermitian
matrices through a grade-by-grade recursion, evaluates the truncated series
at query points, and extracts a rank-M orthogonal approximant from it.  The
dense storage restricts this route to moderate dimensions; it serves as a
comparison method and as an independent oracle for the factored assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import SubspaceFactor
from .multiindex import MultiIndex, grade, indices_of_grade, monomial, splittings
from .operators import AffineOperator
from .spectral import EigenCluster

DENSE_CAP = 4096
SEPARATION_TOL = 1e-8


class SeparationError(RuntimeError):
    """The truncated series no longer separates the target spectral cluster."""


@dataclass(frozen=True)
class ProjectorCoefficients:
    """Dense series coefficients of one cluster's projector at mu0."""

    mu0: np.ndarray
    order: int
    eigenvalue: float
    multiplicity: int
    coefficients: dict[MultiIndex, np.ndarray]

    def coefficient(self, beta: MultiIndex) -> np.ndarray:
        return self.coefficients[tuple(beta)]


def dense_reduced_resolvent(a0: np.ndarray, eigenvalue: float, member_tol: float = 1e-8) -> np.ndarray:
    """Pseudo-inverse of A0 - lambda0 deflated by the eigenspace of lambda0."""
    values, vectors = scipy.linalg.eigh(0.5 * (a0 + a0.conj().T))
    shifted = values - eigenvalue
    inverse = np.where(np.abs(shifted) > member_tol, 1.0 / np.where(shifted == 0, 1.0, shifted), 0.0)
    return (vectors * inverse) @ vectors.conj().T


def projector_coefficients(op: AffineOperator, mu0, cluster: EigenCluster, order: int,
                           dense_cap: int = DENSE_CAP) -> ProjectorCoefficients:
    """Series coefficients of the cluster projector up to ``order``.

    Grade by grade, each coefficient is assembled from two convolutions of
    lower-grade data: products of projector coefficients (from idempotency)
    fill the block-diagonal parts, and commutators of operator derivatives
    with projector coefficients feed a deflated solve for the off-diagonal
    block.
    """
    if op.dim > dense_cap:
        raise ValueError(f"dimension {op.dim} exceeds the dense cap {dense_cap}")
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    d = op.parameter_dim
    u0 = cluster.basis.columns
    p0 = u0 @ u0.conj().T
    identity = np.eye(op.dim, dtype=p0.dtype)
    p0_perp = identity - p0
    a0 = op.assemble_dense(mu0)
    s0 = dense_reduced_resolvent(a0, cluster.eigenvalue)

    derivative_cache: dict[MultiIndex, np.ndarray | None] = {}

    def dense_derivative(beta):
        beta = tuple(beta)
        if beta not in derivative_cache:
            term = op.derivative_term(beta, mu0)
            derivative_cache[beta] = None if term.is_zero else term.to_dense(op.dim)
        return derivative_cache[beta]

    coeffs: dict[MultiIndex, np.ndarray] = {(0,) * d: p0}
    for j in range(1, order + 1):
        for beta in indices_of_grade(d, j):
            idem = np.zeros_like(p0)
            for nu1, nu2 in splittings(beta, "interior"):
                idem = idem + coeffs[nu1] @ coeffs[nu2]
            comm = np.zeros_like(p0)
            for nu1, nu2 in splittings(beta, "left_nonzero"):
                a_nu = dense_derivative(nu1)
                if a_nu is None:
                    continue
                comm = comm + (a_nu @ coeffs[nu2] - coeffs[nu2] @ a_nu)
            cross = s0 @ (comm @ p0)
            coeff = -p0 @ idem @ p0 + p0_perp @ idem @ p0_perp - cross - cross.conj().T
            coeffs[beta] = 0.5 * (coeff + coeff.conj().T)
    return ProjectorCoefficients(
        mu0=mu0,
        order=order,
        eigenvalue=cluster.eigenvalue,
        multiplicity=cluster.multiplicity,
        coefficients=coeffs,
    )


def truncated_series(coefficient_sets, mu, order: int | None = None) -> np.ndarray:
    """Evaluate the truncated projector series at ``mu``.

    ``coefficient_sets`` is one ``ProjectorCoefficients`` or a sequence of
    them (one per targeted cluster); multi-cluster targets sum the per-cluster
    series.  ``order`` defaults to the assembled order.
    """
    if isinstance(coefficient_sets, ProjectorCoefficients):
        coefficient_sets = [coefficient_sets]
    first = coefficient_sets[0]
    if order is None:
        order = min(c.order for c in coefficient_sets)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    offset = mu - first.mu0
    total = None
    for coeff_set in coefficient_sets:
        if coeff_set.order < order:
            raise ValueError("coefficients were not assembled up to the requested order")
        for beta, matrix in coeff_set.coefficients.items():
            if grade(beta) > order:
                continue
            weight = monomial(offset, beta)
            contribution = weight * matrix
            total = contribution if total is None else total + contribution
    return total


def projector_approximation(truncated: np.ndarray, rank: int,
                            separation_tol: float = SEPARATION_TOL) -> SubspaceFactor:
    """Orthonormal factor of the dominant rank-M eigenspace of the truncated
    series.

    The truncated series is Hermitian but not a projector; its spectrum
    splits into a group near one and a group near zero as long as the query
    point stays inside the convergence region.  The factor spans the
    invariant subspace of the ``rank`` largest eigenvalues; if the split
    between groups falls below ``separation_tol`` the construction is no
    longer meaningful and an error is raised.
    """
    n = truncated.shape[0]
    if not 1 <= rank < n:
        raise ValueError("rank must lie strictly between 0 and the dimension")
    sym = 0.5 * (truncated + truncated.conj().T)
    values, vectors = scipy.linalg.eigh(sym, subset_by_index=[n - rank - 1, n - 1])
    separation = values[1] - values[0]
    if separation <= separation_tol:
        raise SeparationError(
            f"spectral separation {separation:.3e} of the truncated series is below "
            f"{separation_tol:.1e}; the rank-{rank} approximant is not well defined"
        )
    return SubspaceFactor(vectors[:, 1:].copy())
