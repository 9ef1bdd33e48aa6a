"""Seeded randomized property suites for the algebraic layer.

Each suite draws its samples from ``numpy.random.default_rng(seed)`` and
returns a :class:`SuiteResult` with the worst observed value against its
threshold, so the same seed always reproduces the same verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .identities import gauss_map_identity, quotient_weights
from .oracles import principal_minor_sum
from .symfunc import (
    elem_sym_matrix,
    elem_sym_values,
    garding_membership,
    lemma24_margins,
    matrix_sym_values,
    newton_maclaurin_margin,
    newton_tensor,
    quotient_derivative,
    quotient_scale,
    sym_at,
)

NM_TRIPLES = ((2, 2, 0), (3, 2, 0), (3, 2, 1), (4, 2, 1), (4, 3, 1), (5, 3, 2), (6, 4, 2))
QUOTIENT_TRIPLES = ((3, 2, 1), (4, 2, 1), (4, 3, 1))


@dataclass(frozen=True)
class SuiteResult:
    name: str
    samples: int
    worst: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: worst={self.worst:.3e} threshold={self.threshold:.1e} samples={self.samples} {self.detail}".rstrip()


def _scale(A: np.ndarray, k: int) -> float:
    # natural magnitude of a degree-k invariant of A
    return max(np.linalg.norm(A) ** k, 1e-300)


def _rel(a: float, b: float, scale: float) -> float:
    return abs(a - b) / max(abs(b), scale)


def random_matrix(rng, n: int, symmetric: bool) -> np.ndarray:
    A = rng.normal(size=(n, n))
    return 0.5 * (A + A.T) if symmetric else A


def random_spd(rng, n: int, lo: float = 0.1, hi: float = 10.0) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
    return (Q * lam) @ Q.T


def random_cone_vector(rng, n: int, k: int) -> np.ndarray:
    """Rejection sample from the Garding cone of order ``k``."""
    while True:
        lam = rng.normal(size=n) + rng.uniform(0.0, 3.0)
        if garding_membership(lam).contains(k):
            return lam


def suite_sym_oracle(seed: int, samples: int = 1000) -> SuiteResult:
    """S_k of random matrices against sums of principal minors, half of them non-symmetric."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        n = int(rng.integers(2, 7))
        A = random_matrix(rng, n, symmetric=bool(i % 2))
        for k in range(n + 1):
            worst = max(worst, _rel(elem_sym_matrix(A, k), principal_minor_sum(A, k), _scale(A, k)))
    return SuiteResult("sym_oracle", samples, worst, 1e-10, worst < 1e-10)


def suite_newton_contractions(seed: int, samples: int = 1000) -> SuiteResult:
    """Trace, single and double contractions of the Newton tensor."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        n = int(rng.integers(2, 7))
        A = random_matrix(rng, n, symmetric=bool(i % 2))
        S = matrix_sym_values(A)
        for k in range(1, n + 1):
            T = newton_tensor(A, k)
            checks = (
                (np.trace(T), (n - k + 1) * S[k - 1], k - 1),
                (np.trace(T @ A), k * S[k], k),
                (np.trace(T @ A @ A), S[1] * S[k] - (k + 1) * sym_at(S, k + 1), k + 1),
            )
            for got, want, deg in checks:
                worst = max(worst, _rel(got, want, _scale(A, deg)))
    return SuiteResult("newton_contractions", samples, worst, 1e-10, worst < 1e-10)


def suite_gauss_map(seed: int, samples: int = 1000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(1, 7))
        worst = max(worst, gauss_map_identity(random_spd(rng, n)))
    return SuiteResult("gauss_map", samples, worst, 1e-8, worst < 1e-8)


def _nm_pairs(k: int, l: int):
    return [(r, s) for r in range(1, k + 1) for s in range(0, l + 1) if s < r]


def suite_maclaurin(seed: int, samples: int = 1000) -> SuiteResult:
    """Newton-MacLaurin and quotient-ratio margins on random cone samples."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    equality = 0.0
    for n, k, l in NM_TRIPLES:
        pairs = _nm_pairs(k, l)
        for _ in range(samples):
            lam = random_cone_vector(rng, n, k)
            for r, s in pairs:
                worst = min(worst, newton_maclaurin_margin(lam, k, l, r, s))
            Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            worst = min(worst, min(lemma24_margins((Q * lam) @ Q.T, k, l)))
        const = np.full(n, float(rng.uniform(0.1, 5.0)))
        for r, s in pairs:
            equality = max(equality, abs(newton_maclaurin_margin(const, k, l, r, s)))
        equality = max(equality, max(abs(m) for m in lemma24_margins(np.diag(const), k, l)))
    ok = worst >= -1e-10 and equality < 1e-12
    return SuiteResult(
        "maclaurin_margins",
        samples * len(NM_TRIPLES),
        float(-worst),
        1e-10,
        ok,
        f"min_margin={worst:.3e} equality_case={equality:.3e}",
    )


def suite_quotient_derivative(seed: int, samples: int = 1000) -> SuiteResult:
    """Positive definiteness of ``dF/dA`` for ``F = S_k/S_l`` on symmetric cone samples."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for n, k, l in NM_TRIPLES:
        if l == 0 and k == n:
            continue
        for _ in range(samples // len(NM_TRIPLES) + 1):
            lam = random_cone_vector(rng, n, k)
            Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            D = quotient_derivative((Q * lam) @ Q.T, k, l)
            worst = min(worst, float(np.linalg.eigvalsh(0.5 * (D + D.T)).min()))
    return SuiteResult("quotient_derivative_pd", samples, float(worst), 0.0, worst > 0, "value is the minimum eigenvalue")


def suite_quotient_weight_signs(seed: int, samples: int = 1000) -> SuiteResult:
    """``M > 0`` and ``M - Q <= 1e-10`` on cone samples normalized to the quotient constraint."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    min_M = np.inf
    for n, k, l in QUOTIENT_TRIPLES:
        for _ in range(samples):
            lam = random_cone_vector(rng, n, k)
            t = quotient_scale(elem_sym_values(lam), n, k, l)
            S = elem_sym_values(t * lam)
            M, Q = quotient_weights(S, n, k, l)
            worst = max(worst, M - Q)
            min_M = min(min_M, M)
    ok = min_M > 0 and worst <= 1e-10
    return SuiteResult("quotient_weight_signs", samples * len(QUOTIENT_TRIPLES), float(worst), 1e-10, ok, f"min_M={min_M:.3e}")


def suite_trace_free(seed: int, samples: int = 1000) -> SuiteResult:
    """``tr(A^2) - S_1^2/n = (n-1)/n S_1^2 - 2 S_2`` for random matrices."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        n = int(rng.integers(2, 7))
        A = random_matrix(rng, n, symmetric=bool(i % 2))
        S = matrix_sym_values(A)
        lhs = np.trace(A @ A) - S[1] ** 2 / n
        rhs = (n - 1) / n * S[1] ** 2 - 2 * S[2]
        worst = max(worst, abs(lhs - rhs) / max(_scale(A, 2), 1.0))
    return SuiteResult("trace_free_identity", samples, worst, 1e-10, worst < 1e-10)


SUITES = {
    "sym_oracle": suite_sym_oracle,
    "newton_contractions": suite_newton_contractions,
    "gauss_map": suite_gauss_map,
    "maclaurin_margins": suite_maclaurin,
    "quotient_derivative_pd": suite_quotient_derivative,
    "quotient_weight_signs": suite_quotient_weight_signs,
    "trace_free_identity": suite_trace_free,
}


def run_suites(seed: int, samples: int = 1000, names=None) -> list[SuiteResult]:
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites: {unknown}")
    # one derived seed per suite so that selecting a subset does not shift the others
    return [SUITES[name](seed + 7919 * i, samples) for i, name in enumerate(SUITES) if name in names]
