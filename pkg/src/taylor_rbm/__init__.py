"""Taylor reduced basis method for parametric Hermitian eigenvalue problems.

Offline, the package assembles a low-dimensional subspace spanned by the
parameter derivatives of a spectral projector at a reference point; online,
a Galerkin compression onto that subspace approximates invariant subspaces
and eigenvalue sums at nearby parameter values.  A dense perturbation-series
baseline is included for comparison.
"""

from .assembly import TaylorBasis, assemble_basis, load_basis, save_basis
from .estimators import TaylorReducedBasis, TruncatedProjectorSeries
from .linalg import SubspaceFactor, orthonormalize_append, spectral_norm, subspace_distance
from .operators import (AffineOperator, CoefficientFunction, build_xxz, constant_coefficient,
                        linear_coefficient, rotation_family)
from .perturbation import projector_approximation, projector_coefficients, truncated_series
from .rom import ReducedModel, RomSolution, project, solve_reduced
from .spectral import (ClusterSet, EigenCluster, ReferenceSolution, lowest_clusters,
                       reduced_resolvent_apply, reference_projector)

__all__ = [
    "AffineOperator",
    "CoefficientFunction",
    "ClusterSet",
    "EigenCluster",
    "ReducedModel",
    "ReferenceSolution",
    "RomSolution",
    "SubspaceFactor",
    "TaylorBasis",
    "TaylorReducedBasis",
    "TruncatedProjectorSeries",
    "assemble_basis",
    "build_xxz",
    "constant_coefficient",
    "linear_coefficient",
    "load_basis",
    "lowest_clusters",
    "orthonormalize_append",
    "project",
    "projector_approximation",
    "projector_coefficients",
    "reduced_resolvent_apply",
    "reference_projector",
    "rotation_family",
    "save_basis",
    "solve_reduced",
    "spectral_norm",
    "subspace_distance",
    "truncated_series",
]

__version__ = "0.1.0"
