"""Elementary symmetric polynomials of vectors and matrices.

Conventions
-----------
``S_k`` is the unnormalized k-th elementary symmetric polynomial, with
``S_0 = 1`` and ``S_k = 0`` for ``k < 0`` or ``k > n``.  For a square matrix
``A`` the Newton tensor returned by :func:`newton_tensor` is the matrix ``T``
with ``T[p, q] = dS_k / dA[q, p]``, so that ``dS_k = trace(T @ dA)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

SYMMETRY_RTOL = 1e-12
CONE_TOL = 1e-12


def _as_vector(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("expected a non-empty 1-d vector")
    if not np.all(np.isfinite(lam)):
        raise ValueError("vector entries must be finite")
    return lam


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def is_symmetric(A, rtol: float = SYMMETRY_RTOL) -> bool:
    A = np.asarray(A, dtype=float)
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    return bool(np.max(np.abs(A - A.T)) <= rtol * scale)


def elem_sym_values(lam) -> np.ndarray:
    """Return ``[S_0, ..., S_n]`` of the entries along the last axis.

    Expands ``prod_i (1 + lam_i t)`` one factor at a time.  Batched input
    of shape ``(..., n)`` gives output of shape ``(..., n + 1)``.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1:
        lam = _as_vector(lam)
    n = lam.shape[-1]
    out = np.zeros(lam.shape[:-1] + (n + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i : i + 1]
        # descending update keeps S_{k-1} from the previous factor
        out[..., 1 : i + 2] = out[..., 1 : i + 2] + li * out[..., 0 : i + 1]
    return out


def sym_at(values: np.ndarray, k: int) -> np.ndarray | float:
    """``S_k`` from a value table, with the zero convention outside ``[0, n]``."""
    values = np.asarray(values)
    n = values.shape[-1] - 1
    if k < 0 or k > n:
        return np.zeros(values.shape[:-1]) if values.ndim > 1 else 0.0
    return values[..., k]


def charpoly_sym_values(A) -> np.ndarray:
    """``[S_0, ..., S_n]`` of a general square matrix via the trace recurrence.

    Uses the Faddeev-LeVerrier iteration, whose coefficients are the
    characteristic-polynomial coefficients up to sign.
    """
    A = _as_square(A)
    n = A.shape[0]
    values = np.zeros(n + 1)
    values[0] = 1.0
    M = np.zeros_like(A)
    c_prev = 1.0
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + c_prev * eye
        c_k = -np.trace(A @ M) / k
        values[k] = (-1) ** k * c_k
        c_prev = c_k
    return values


def matrix_sym_values(A) -> np.ndarray:
    """``[S_0, ..., S_n]`` of ``A``: eigenvalues if symmetric, else trace recurrence."""
    A = _as_square(A)
    if is_symmetric(A):
        return elem_sym_values(np.linalg.eigvalsh(0.5 * (A + A.T)))
    return charpoly_sym_values(A)


def elem_sym_matrix(A, k: int) -> float:
    A = _as_square(A)
    n = A.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    return float(matrix_sym_values(A)[k])


def newton_tensor(A, k: int) -> np.ndarray:
    """Derivative tensor of ``S_k`` at ``A`` (see module docstring for indexing).

    Built from ``T_1 = I`` and ``T_j = S_{j-1} I - T_{j-1} A``.
    """
    A = _as_square(A)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    values = matrix_sym_values(A)
    eye = np.eye(n)
    T = eye.copy()
    for j in range(2, k + 1):
        T = values[j - 1] * eye - T @ A
    return T


@dataclass(frozen=True)
class GardingFlags:
    k_max: int
    values: np.ndarray

    def contains(self, k: int) -> bool:
        return self.k_max >= k


def cone_order(values, norm) -> np.ndarray | int:
    """Largest k with ``S_1..S_k`` all positive, batched over leading axes.

    ``S_i`` counts as positive when it exceeds ``1e-12 * (1 + norm**i)``.
    """
    values = np.asarray(values, dtype=float)
    norm = np.asarray(norm, dtype=float)
    n = values.shape[-1] - 1
    k_max = np.zeros(values.shape[:-1], dtype=int)
    alive = np.ones(values.shape[:-1], dtype=bool)
    for i in range(1, n + 1):
        alive &= values[..., i] > CONE_TOL * (1.0 + norm**i)
        k_max += alive
    return int(k_max) if k_max.ndim == 0 else k_max


def garding_membership(lam) -> GardingFlags:
    lam = _as_vector(lam)
    values = elem_sym_values(lam)
    return GardingFlags(k_max=cone_order(values, np.linalg.norm(lam)), values=values)


def _check_pair(n: int, k: int, l: int) -> None:
    if not 0 <= l < k <= n:
        raise ValueError(f"need 0 <= l < k <= n, got l={l}, k={k}, n={n}")


def newton_maclaurin_margin(lam, k: int, l: int, r: int, s: int) -> float:
    """Slack in the Newton-MacLaurin quotient inequality.

    Returns ``((S_r/C(n,r)) / (S_s/C(n,s)))**(1/(r-s))`` minus
    ``((S_k/C(n,k)) / (S_l/C(n,l)))**(1/(k-l))``, which is nonnegative on the
    Garding cone and vanishes when all entries coincide.
    """
    lam = _as_vector(lam)
    n = lam.size
    _check_pair(n, k, l)
    _check_pair(n, r, s)
    if r > k or s > l:
        raise ValueError("need r <= k and s <= l")
    flags = garding_membership(lam)
    if not flags.contains(k):
        raise ValueError(f"vector is not in the Garding cone of order {k}")
    S = flags.values

    def mean_ratio(a, b):
        return (S[a] / comb(n, a)) / (S[b] / comb(n, b))

    return float(mean_ratio(r, s) ** (1.0 / (r - s)) - mean_ratio(k, l) ** (1.0 / (k - l)))


def quotient_scale(values, n: int, k: int, l: int) -> float:
    """Factor ``t`` with ``S_k(tA)/S_l(tA) = C(n,k)/C(n,l)``."""
    ratio = values[k] / values[l]
    if ratio <= 0:
        raise ValueError("quotient S_k/S_l must be positive to normalize")
    return float((comb(n, k) / comb(n, l) / ratio) ** (1.0 / (k - l)))


def normalize_quotient(A, k: int, l: int) -> np.ndarray:
    A = _as_square(A)
    n = A.shape[0]
    _check_pair(n, k, l)
    return quotient_scale(matrix_sym_values(A), n, k, l) * A


def lemma24_margins(A, k: int, l: int) -> tuple[float, float, float, float]:
    """Four quotient-ratio margins, each nonnegative after normalization.

    ``A`` is rescaled internally so that ``S_k/S_l = C(n,k)/C(n,l)``; the
    margins are then

    * ``S_{k-1}/S_k - k/(n-k+1)``
    * ``S_{l+1}/S_l - (n-l)/(l+1)``
    * ``(n-k)/(k+1) - S_{k+1}/S_k``
    * ``l/(n-l+1) - S_{l-1}/S_l``

    and all vanish exactly when ``A`` is a positive multiple of the identity.
    """
    A = _as_square(A)
    n = A.shape[0]
    _check_pair(n, k, l)
    S = matrix_sym_values(A)
    norm = np.linalg.norm(A, 2)
    if cone_order(S, norm) < k:
        raise ValueError(f"matrix is not in the Garding cone of order {k}")
    S = matrix_sym_values(quotient_scale(S, n, k, l) * A)
    return (
        float(sym_at(S, k - 1) / S[k] - k / (n - k + 1)),
        float(sym_at(S, l + 1) / S[l] - (n - l) / (l + 1)),
        float((n - k) / (k + 1) - sym_at(S, k + 1) / S[k]),
        float(l / (n - l + 1) - sym_at(S, l - 1) / S[l]),
    )


def quotient_derivative(A, k: int, l: int) -> np.ndarray:
    """Derivative of ``F = S_k/S_l`` with the :func:`newton_tensor` indexing."""
    A = _as_square(A)
    n = A.shape[0]
    _check_pair(n, k, l)
    S = matrix_sym_values(A)
    if cone_order(S, np.linalg.norm(A, 2)) < k:
        raise ValueError(f"matrix is not in the Garding cone of order {k}")
    if abs(S[l]) <= CONE_TOL:
        raise ValueError("S_l vanishes; the quotient is singular")
    F = S[k] / S[l]
    Tl = newton_tensor(A, l) if l >= 1 else np.zeros((n, n))
    return F * (newton_tensor(A, k) / S[k] - Tl / S[l])
