"""Multi-index bookkeeping for multivariate power-series recursions.

A multi-index is a tuple of nonnegative integer exponents; its grade is the
sum of the entries.  All series recursions in this package walk multi-indices
grade by grade, so enumeration order must be deterministic.
"""

from __future__ import annotations

import itertools
from math import comb, prod

MultiIndex = tuple[int, ...]

ZERO_MODES = ("all", "interior", "left_nonzero")


def grade(beta: MultiIndex) -> int:
    """Total degree |beta| of a multi-index."""
    return sum(beta)


def indices_of_grade(d: int, k: int) -> list[MultiIndex]:
    """All multi-indices of length ``d`` with grade ``k``.

    Ordered lexicographically descending, i.e. (k, 0, ..., 0) first and
    (0, ..., 0, k) last.  The count is binomial(k + d - 1, d - 1).
    """
    if d < 1:
        raise ValueError("parameter dimension must be >= 1")
    if d == 1:
        return [(k,)]
    out = []
    for first in range(k, -1, -1):
        for rest in indices_of_grade(d - 1, k - first):
            out.append((first,) + rest)
    return out


def enumerate_up_to(d: int, n: int) -> list[MultiIndex]:
    """All multi-indices of length ``d`` with grade at most ``n``.

    Graded order: ascending grade, lexicographically descending within a
    grade.  The total count is binomial(n + d, d).
    """
    if n < 0:
        raise ValueError("order must be >= 0")
    out = []
    for k in range(n + 1):
        out.extend(indices_of_grade(d, k))
    return out


def count_up_to(d: int, n: int) -> int:
    """Number of multi-indices with grade at most ``n`` (hockey-stick sum)."""
    return comb(n + d, d)


def splittings(beta: MultiIndex, mode: str = "all") -> list[tuple[MultiIndex, MultiIndex]]:
    """Ordered pairs (nu1, nu2) with nu1 + nu2 = beta.

    ``mode`` selects which endpoint pairs are kept:

    - ``all``: every pair; the count is prod(beta_j + 1),
    - ``interior``: excludes nu1 = 0 and nu2 = 0 (series convolutions whose
      endpoint terms were moved to the other side of a recursion),
    - ``left_nonzero``: excludes only nu1 = 0.

    nu1 runs in ascending lexicographic order, which fixes the floating-point
    summation order of every convolution built on top of this.
    """
    if mode not in ZERO_MODES:
        raise ValueError(f"unknown splitting mode {mode!r}")
    zero = (0,) * len(beta)
    pairs = []
    for nu1 in itertools.product(*(range(b + 1) for b in beta)):
        nu2 = tuple(b - a for a, b in zip(nu1, beta))
        if mode != "all" and nu1 == zero:
            continue
        if mode == "interior" and nu2 == zero:
            continue
        pairs.append((nu1, nu2))
    return pairs


def splitting_count(beta: MultiIndex) -> int:
    """Number of unrestricted splittings, prod(beta_j + 1)."""
    return prod(b + 1 for b in beta)


def monomial(offset, beta: MultiIndex) -> float:
    """Evaluate the monomial offset**beta = prod_j offset_j**beta_j."""
    out = 1.0
    for x, b in zip(offset, beta):
        out *= float(x) ** b
    return out
