"""Affine parametric Hermitian operators and concrete model builders.

An operator family A(mu) = sum_q theta_q(mu) A_q is stored as a list of
(coefficient function, sparse Hermitian term) pairs.  All actions are
matrix-free: A(mu) is never assembled unless a dense matrix is explicitly
requested for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .multiindex import MultiIndex, grade

HERMITICITY_ATOL = 1e-14


@dataclass(frozen=True)
class CoefficientFunction:
    """Real-analytic scalar coefficient with scaled partial derivatives.

    ``evaluate(mu)`` returns theta(mu); ``taylor_coeff(beta, mu0)`` returns
    the Taylor coefficient of theta at mu0 for the multi-index beta, i.e. the
    partial derivative divided by the factorials of the exponents.  The
    grade-0 coefficient must equal ``evaluate(mu0)``.
    """

    evaluate: Callable[[np.ndarray], float]
    taylor_coeff: Callable[[MultiIndex, np.ndarray], float]


def constant_coefficient(value: float) -> CoefficientFunction:
    """theta(mu) = value."""
    return CoefficientFunction(
        evaluate=lambda mu: float(value),
        taylor_coeff=lambda beta, mu0: float(value) if grade(beta) == 0 else 0.0,
    )


def linear_coefficient(weights: Sequence[float], intercept: float = 0.0) -> CoefficientFunction:
    """theta(mu) = intercept + sum_j weights_j mu_j (all higher coefficients vanish)."""
    w = np.asarray(weights, dtype=float)

    def evaluate(mu):
        return float(intercept + w @ np.asarray(mu, dtype=float))

    def taylor_coeff(beta, mu0):
        k = grade(beta)
        if k == 0:
            return evaluate(mu0)
        if k == 1:
            return float(w[beta.index(1)])
        return 0.0

    return CoefficientFunction(evaluate=evaluate, taylor_coeff=taylor_coeff)


class ScaledTermSum:
    """A fixed linear combination sum_q w_q A_q, applied term by term.

    Terms with zero weight are not stored, so a vanishing derivative costs
    nothing and ``is_zero`` is exact for affine-linear coefficients.
    """

    def __init__(self, weights, matrices):
        self.weights = [float(w) for w in weights]
        self.matrices = list(matrices)

    @property
    def is_zero(self) -> bool:
        return not self.weights

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.is_zero:
            return np.zeros_like(np.asarray(x))
        out = self.weights[0] * (self.matrices[0] @ x)
        for w, m in zip(self.weights[1:], self.matrices[1:]):
            out = out + w * (m @ x)
        return out

    def to_dense(self, n: int) -> np.ndarray:
        out = np.zeros((n, n), dtype=complex)
        for w, m in zip(self.weights, self.matrices):
            out += w * m.toarray()
        return out


class AffineOperator:
    """Parametric Hermitian family A(mu) = sum_q theta_q(mu) A_q.

    Parameters
    ----------
    terms : sequence of (CoefficientFunction, sparse matrix) pairs
        The parameter-independent matrices must all be Hermitian and share
        one dimension.
    parameter_dim : int
        Length d of the parameter vector mu.
    """

    def __init__(self, terms, parameter_dim: int):
        if not terms:
            raise ValueError("an affine operator needs at least one term")
        if parameter_dim < 1:
            raise ValueError("parameter dimension must be >= 1")
        self.terms = [(theta, sp.csr_matrix(mat)) for theta, mat in terms]
        self.parameter_dim = int(parameter_dim)
        dims = {mat.shape for _, mat in self.terms}
        if len(dims) != 1 or any(a != b for a, b in dims):
            raise ValueError(f"term dimensions disagree: {sorted(dims)}")
        self.dim = self.terms[0][1].shape[0]
        for q, (_, mat) in enumerate(self.terms):
            skew = mat - mat.getH()
            dev = np.abs(skew.data).max(initial=0.0)
            if dev > HERMITICITY_ATOL:
                raise ValueError(f"term {q} is not Hermitian (max deviation {dev:.2e})")

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def coefficients(self, mu) -> np.ndarray:
        mu = self._check_mu(mu)
        return np.array([theta.evaluate(mu) for theta, _ in self.terms])

    def apply(self, mu, x: np.ndarray) -> np.ndarray:
        """Matrix-free action A(mu) @ x for a vector or a block of columns."""
        x = np.asarray(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"operand has leading dimension {x.shape[0]}, expected {self.dim}")
        weights = self.coefficients(mu)
        out = weights[0] * (self.terms[0][1] @ x)
        for w, (_, mat) in zip(weights[1:], self.terms[1:]):
            out = out + w * (mat @ x)
        return out

    def derivative_term(self, beta: MultiIndex, mu0) -> ScaledTermSum:
        """Scaled partial derivative of A at mu0 as a weighted term list.

        The grade-0 derivative is A(mu0) itself; affine-linear coefficients
        make every derivative of grade >= 2 exactly zero.
        """
        mu0 = self._check_mu(mu0)
        weights, matrices = [], []
        for theta, mat in self.terms:
            w = theta.taylor_coeff(tuple(beta), mu0)
            if w != 0.0:
                weights.append(w)
                matrices.append(mat)
        return ScaledTermSum(weights, matrices)

    def assemble_dense(self, mu) -> np.ndarray:
        """Dense A(mu) for small problems (tests and the dense baseline)."""
        weights = self.coefficients(mu)
        out = weights[0] * self.terms[0][1].toarray()
        for w, (_, mat) in zip(weights[1:], self.terms[1:]):
            out += w * mat.toarray()
        return out

    def _check_mu(self, mu) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.shape != (self.parameter_dim,):
            raise ValueError(f"parameter point has shape {mu.shape}, expected ({self.parameter_dim},)")
        return mu


# Pauli-type spin matrices; the conventional 1/2 factors are carried by the
# model terms below, not by the matrices themselves.
SPIN_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SPIN_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SPIN_Z = np.array([[1.0, 0.0], [0.0, -1.0]])


def _embed_pair(op1, op2, length: int, bond: int) -> sp.csr_matrix:
    """op1 on site ``bond``, op2 on site ``bond + 1`` of a chain (1-based)."""
    left = sp.identity(2 ** (bond - 1), format="csr")
    right = sp.identity(2 ** (length - bond - 1), format="csr")
    pair = sp.kron(sp.csr_matrix(op1), sp.csr_matrix(op2), format="csr")
    return sp.kron(sp.kron(left, pair, format="csr"), right, format="csr")


def _embed_site(op, length: int, site: int) -> sp.csr_matrix:
    left = sp.identity(2 ** (site - 1), format="csr")
    right = sp.identity(2 ** (length - site), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op), format="csr"), right, format="csr")


def build_xxz(length: int) -> AffineOperator:
    """xxz spin chain with open boundaries on ``length`` sites.

    A(mu) = A_1 + mu_1 A_2 - mu_2 A_3 on a space of dimension 2**length,
    where A_1 couples neighboring transverse spins, A_2 neighboring
    longitudinal spins, and A_3 is the total longitudinal field term.
    All three matrices are real-symmetric.
    """
    if length < 2:
        raise ValueError("chain length must be >= 2")
    dim = 2 ** length
    a1 = sp.csr_matrix((dim, dim), dtype=complex)
    a2 = sp.csr_matrix((dim, dim), dtype=complex)
    for bond in range(1, length):
        a1 = a1 + _embed_pair(SPIN_X, SPIN_X, length, bond) + _embed_pair(SPIN_Y, SPIN_Y, length, bond)
        a2 = a2 + _embed_pair(SPIN_Z, SPIN_Z, length, bond)
    a3 = sp.csr_matrix((dim, dim), dtype=complex)
    for site in range(1, length + 1):
        a3 = a3 + _embed_site(SPIN_Z, length, site)
    a1 = sp.csr_matrix(0.25 * a1.real)
    a2 = sp.csr_matrix(0.25 * a2.real)
    a3 = sp.csr_matrix(0.5 * a3.real)
    for m in (a1, a2, a3):
        m.eliminate_zeros()
    return AffineOperator(
        terms=[
            (constant_coefficient(1.0), a1),
            (linear_coefficient([1.0, 0.0]), a2),
            (linear_coefficient([0.0, -1.0]), a3),
        ],
        parameter_dim=2,
    )


def rotation_family() -> AffineOperator:
    """The classical 2x2 family [[mu1, mu2], [mu2, -mu1]].

    Its eigenvalues +-sqrt(mu1^2 + mu2^2) are continuous but the individual
    eigenvectors cannot be chosen continuously through the origin, which makes
    it the standard smoke test for projector-based methods.
    """
    return AffineOperator(
        terms=[
            (linear_coefficient([1.0, 0.0]), sp.csr_matrix(SPIN_Z)),
            (linear_coefficient([0.0, 1.0]), sp.csr_matrix(SPIN_X)),
        ],
        parameter_dim=2,
    )
