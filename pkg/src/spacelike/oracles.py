"""Slow reference implementations used to cross-check the fast paths.

Nothing here is used by the solver or the identity evaluators; these exist
so tests and ``spacelike selftest`` can compare against an independent route.
"""

from __future__ import annotations

from itertools import combinations, permutations
from math import factorial, prod

import numpy as np


def subset_sym_values(lam) -> np.ndarray:
    """``[S_0..S_n]`` by summing products over every k-subset."""
    lam = [float(x) for x in lam]
    n = len(lam)
    return np.array([sum(prod(c) for c in combinations(lam, k)) for k in range(n + 1)])


def principal_minor_sum(A, k: int) -> float:
    """Sum of all k-by-k principal minors of ``A``."""
    A = np.asarray(A, dtype=float)
    if k == 0:
        return 1.0
    return float(sum(np.linalg.det(A[np.ix_(idx, idx)]) for idx in combinations(range(A.shape[0]), k)))


def _parity(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def kronecker_delta(upper, lower) -> int:
    """Generalized Kronecker symbol.

    Equals the sign of the permutation taking ``upper`` to ``lower`` when the
    upper indices are distinct and ``lower`` is a rearrangement of them, and 0
    otherwise.
    """
    upper, lower = tuple(upper), tuple(lower)
    if len(set(upper)) != len(upper) or sorted(upper) != sorted(lower):
        return 0
    pos = {v: i for i, v in enumerate(upper)}
    return _parity([pos[v] for v in lower])


def kronecker_sym(A, k: int) -> float:
    """``S_k(A) = (1/k!) delta^{i_1..i_k}_{j_1..j_k} a_{i_1 j_1} ... a_{i_k j_k}``.

    Only distinct upper multi-indices contribute, and for each of them only
    rearrangements as the lower one, so the sum runs over subsets and
    permutations instead of all ``n**(2k)`` index tuples.
    """
    A = np.asarray(A, dtype=float)
    if k == 0:
        return 1.0
    total = 0.0
    for subset in combinations(range(A.shape[0]), k):
        for upper in permutations(subset):
            for lower in permutations(subset):
                total += kronecker_delta(upper, lower) * prod(A[i, j] for i, j in zip(upper, lower))
    return total / factorial(k)


def finite_difference_gradient(f, A, step: float = 1e-6) -> np.ndarray:
    """Central-difference matrix ``G[p, q] = df / dA[p, q]``."""
    A = np.asarray(A, dtype=float)
    G = np.zeros_like(A)
    for p in range(A.shape[0]):
        for q in range(A.shape[1]):
            E = np.zeros_like(A)
            E[p, q] = step
            G[p, q] = (f(A + E) - f(A - E)) / (2 * step)
    return G
