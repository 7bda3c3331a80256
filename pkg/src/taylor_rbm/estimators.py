"""Scikit-learn style front ends for the offline/online pipeline.

``fit`` runs the offline phase at a reference parameter point; queries at
nearby points are then cheap.  Hyperparameters live in the constructors so
both classes round-trip through ``get_params`` / ``set_params`` and compose
with standard tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import assembly, perturbation, rom, spectral
from .validation import (check_operator, check_order, check_parameter_point,
                         check_parameter_points, check_positive)


class TaylorReducedBasis(BaseEstimator):
    """Reduced-basis approximation of the lowest invariant subspace.

    ``fit(operator, mu0)`` detects the targeted eigenvalue clusters of
    A(mu0), assembles the derivative subspace up to ``order`` and compresses
    the affine terms onto it.  ``solve(mu)`` then returns the approximate
    invariant subspace and Ritz values at a query point, and ``predict``
    maps parameter points to Ritz-value sums.

    Parameters
    ----------
    order : int
        Highest derivative grade entering the basis.
    n_clusters : int
        Number of lowest eigenvalue clusters to target.
    tol_cluster : float
        Gap threshold identifying eigenvalue clusters.
    tol_rank : float
        Threshold identifying linearly dependent basis candidates.
    tol_solve : float
        Relative residual of the deflated Krylov solves.
    dense_cutoff : int
        Largest dimension handled by dense eigensolvers.
    seed : int
        Seed for iterative-solver start vectors and power iterations.
    """

    def __init__(self, order=3, n_clusters=1, tol_cluster=1e-10, tol_rank=1e-12,
                 tol_solve=1e-12, dense_cutoff=4096, seed=0):
        self.order = order
        self.n_clusters = n_clusters
        self.tol_cluster = tol_cluster
        self.tol_rank = tol_rank
        self.tol_solve = tol_solve
        self.dense_cutoff = dense_cutoff
        self.seed = seed

    def fit(self, operator, mu0):
        op = check_operator(operator)
        mu0 = check_parameter_point(mu0, op.parameter_dim)
        order = check_order(self.order)
        check_positive("tol_cluster", self.tol_cluster)
        check_positive("tol_rank", self.tol_rank)
        check_positive("tol_solve", self.tol_solve)
        self.operator_ = op
        self.mu0_ = mu0
        self.clusters_ = spectral.lowest_clusters(
            op, mu0, int(self.n_clusters), tol_cluster=self.tol_cluster,
            dense_cutoff=int(self.dense_cutoff), seed=int(self.seed),
        )
        self.basis_ = assembly.assemble_basis(
            op, mu0, self.clusters_, order,
            tol_rank=self.tol_rank, tol_solve=self.tol_solve,
        )
        self.model_ = rom.project(op, self.basis_)
        self.dim_history_ = self.basis_.dim_history
        self.target_rank_ = self.basis_.total_rank
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this estimator is not fitted yet; call fit first")

    def _model_at(self, order):
        self._check_fitted()
        if order is None:
            return self.model_
        return self.model_.truncated(check_order(order))

    def solve(self, mu, order=None) -> rom.RomSolution:
        """Reduced eigensolution at one parameter point.

        ``order`` restricts the basis to a lower assembled grade (the basis
        columns are sorted by grade, so this is a leading block).
        """
        model = self._model_at(order)
        mu = check_parameter_point(mu, self.operator_.parameter_dim)
        return rom.solve_reduced(model, mu)

    def predict(self, mu, order=None) -> np.ndarray:
        """Ritz-value sums at one point or a stack of points."""
        model = self._model_at(order)
        points = check_parameter_points(mu, self.operator_.parameter_dim)
        sums = np.array([rom.solve_reduced(model, p).ritz_sum for p in points])
        return sums[0] if np.asarray(mu).ndim == 1 else sums

    def reference(self, mu) -> spectral.ReferenceSolution:
        """Full-order solve at a query point, for error studies."""
        self._check_fitted()
        mu = check_parameter_point(mu, self.operator_.parameter_dim)
        return spectral.reference_projector(
            self.operator_, mu, self.target_rank_,
            dense_cutoff=int(self.dense_cutoff), seed=int(self.seed),
        )

    def subspace_error(self, mu, order=None, reference=None) -> float:
        """Projector distance to the exact invariant subspace at ``mu``."""
        if reference is None:
            reference = self.reference(mu)
        sol = self.solve(mu, order=order)
        return rom.projector_error(sol, reference.factor)


class TruncatedProjectorSeries(BaseEstimator):
    """Dense truncated-series approximation of the parametric projector.

    The baseline method: ``fit`` builds dense series coefficients per
    targeted cluster, ``truncated(mu)`` evaluates the series, and
    ``approximate(mu)`` extracts the dominant rank-M orthonormal factor.
    Restricted to moderate dimensions by dense storage.
    """

    def __init__(self, order=3, n_clusters=1, tol_cluster=1e-10, dense_cap=4096, seed=0):
        self.order = order
        self.n_clusters = n_clusters
        self.tol_cluster = tol_cluster
        self.dense_cap = dense_cap
        self.seed = seed

    def fit(self, operator, mu0):
        op = check_operator(operator)
        mu0 = check_parameter_point(mu0, op.parameter_dim)
        order = check_order(self.order)
        self.operator_ = op
        self.mu0_ = mu0
        self.clusters_ = spectral.lowest_clusters(
            op, mu0, int(self.n_clusters), tol_cluster=self.tol_cluster,
            dense_cutoff=int(self.dense_cap), seed=int(self.seed),
        )
        self.coefficients_ = [
            perturbation.projector_coefficients(op, mu0, cluster, order, dense_cap=int(self.dense_cap))
            for cluster in self.clusters_.clusters
        ]
        self.target_rank_ = self.clusters_.total_rank
        return self

    def _check_fitted(self):
        if not hasattr(self, "coefficients_"):
            raise NotFittedError("this estimator is not fitted yet; call fit first")

    def truncated(self, mu, order=None) -> np.ndarray:
        self._check_fitted()
        mu = check_parameter_point(mu, self.operator_.parameter_dim)
        return perturbation.truncated_series(self.coefficients_, mu, order=order)

    def approximate(self, mu, order=None):
        """Rank-M factor of the truncated series and its Ritz-value sum."""
        factor = perturbation.projector_approximation(self.truncated(mu, order=order),
                                                      self.target_rank_)
        value = rom.ritz_sum_of_factor(self.operator_, np.atleast_1d(np.asarray(mu, dtype=float)),
                                       factor)
        return factor, value

    def predict(self, mu, order=None) -> np.ndarray:
        self._check_fitted()
        points = check_parameter_points(mu, self.operator_.parameter_dim)
        sums = np.array([self.approximate(p, order=order)[1] for p in points])
        return sums[0] if np.asarray(mu).ndim == 1 else sums
