"""Input validation helpers shared by the estimator interfaces."""

from __future__ import annotations

import numpy as np

from .operators import AffineOperator


def check_operator(op) -> AffineOperator:
    if not isinstance(op, AffineOperator):
        raise TypeError(f"expected an AffineOperator, got {type(op).__name__}")
    return op


def check_parameter_point(mu, parameter_dim: int) -> np.ndarray:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.ndim != 1 or mu.shape != (parameter_dim,):
        raise ValueError(f"parameter point has shape {mu.shape}, expected ({parameter_dim},)")
    if not np.all(np.isfinite(mu)):
        raise ValueError("parameter point contains non-finite entries")
    return mu


def check_parameter_points(mu, parameter_dim: int) -> np.ndarray:
    """Coerce one point or a stack of points to shape (n_points, d)."""
    arr = np.asarray(mu, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != parameter_dim:
        raise ValueError(f"parameter points have shape {np.shape(mu)}, expected (*, {parameter_dim})")
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameter points contain non-finite entries")
    return arr


def check_order(order) -> int:
    order = int(order)
    if order < 0:
        raise ValueError("order must be >= 0")
    return order


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
