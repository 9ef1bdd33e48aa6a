"""Integral identities and pointwise inequalities for CMC and quotient graphs.

Every evaluator returns an :class:`IdentityReport` holding the individual
terms so that a failing residual can be traced to the piece responsible.

Conventions
-----------
``n`` is the dimension of the base domain, ``H_k = S_k`` (unnormalized),
the mean curvature is normalized to ``S_1 = n``, and the boundary mean
curvature is the average of the boundary principal curvatures, which for a
planar domain is the curve curvature ``kappa``.

The volume term shared by the fundamental, soap-bubble and Heintze-Karcher
identities is

    V = int_Omega [ G(P) + (2 S_2 - (n-1)/n S_1^2) (-1/w) (P + c) ] dx

where the second-order part of ``P`` has already been replaced by its
closed form, and ``G(P)`` is the squared gradient of ``P`` under one of the
interpretations in :data:`GRADIENT_FLAGS`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .domain import PolarGrid, StarDomain
from .graphgeom import CurvatureField, GraphSurface, PFieldGraph
from .symfunc import matrix_sym_values, sym_at

GRADIENT_FLAGS = ("euclid", "metric")
DEFAULT_FLAG = "euclid"
CMC_TOL = 1e-6
QUOTIENT_TOL = 1e-6


class PreconditionError(ValueError):
    """Input does not satisfy the hypotheses an identity is stated under."""


@dataclass
class IdentityReport:
    identity: str
    terms: dict[str, float]
    lhs: float
    rhs: float
    scale: float
    flag: str = ""
    valid: bool = True
    grid: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    kind: str = "identity"

    @property
    def residual(self) -> float:
        """``|lhs - rhs|`` for identities; for inequalities the shortfall ``max(rhs - lhs, 0)``."""
        if self.kind == "inequality":
            return max(self.rhs - self.lhs, 0.0)
        return abs(self.lhs - self.rhs)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    def to_record(self) -> dict:
        rec = {
            "identity": self.identity,
            "kind": self.kind,
            "flag": self.flag,
            "valid": self.valid,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "scale": self.scale,
            "relative_residual": self.relative_residual,
        }
        rec.update(self.grid)
        rec.update({f"term:{k}": v for k, v in self.terms.items()})
        if self.notes:
            rec["notes"] = "; ".join(self.notes)
        return rec


def _grid_meta(grid: PolarGrid) -> dict:
    return {"domain": grid.domain.describe(), "n_r": grid.n_r, "n_phi": grid.n_phi}


def _check_flag(flag: str) -> None:
    if flag not in GRADIENT_FLAGS + ("covariant",):
        raise ValueError(f"unknown gradient flag {flag!r}; choose from {GRADIENT_FLAGS + ('covariant',)}")


def cmc_defect(cf: CurvatureField, rhs: float | None = None) -> float:
    """Max interior ``|S_1 - rhs|``; ``rhs`` defaults to ``n``."""
    rhs = cf.n if rhs is None else rhs
    return float(np.max(np.abs(cf.S1[:-1] - rhs)))


@dataclass(frozen=True)
class BoundaryData:
    """Boundary-ring quantities entering the boundary integrals."""

    grad_norm: np.ndarray
    w: np.ndarray
    H: np.ndarray
    weights: np.ndarray
    P_plus_c: np.ndarray
    dP_normal: np.ndarray

    @property
    def flux(self) -> np.ndarray:
        """``|Du| / w``, which equals ``sqrt(theta^2 - 1)``."""
        return self.grad_norm / self.w

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f))


def boundary_data(surf: GraphSurface, pf: PFieldGraph, c: float) -> BoundaryData:
    grid = surf.grid
    n = surf.Du.shape[-1]
    bnd = grid.boundary
    dPn = np.einsum("ji,ji->j", pf.dP[-1], bnd.normal)
    return BoundaryData(
        grad_norm=surf.grad_norm[-1],
        w=surf.w[-1],
        H=bnd.curvature / (n - 1),
        weights=grid.boundary_weights,
        P_plus_c=pf.P[-1] + c,
        dP_normal=dPn,
    )


def _volume_terms(surf: GraphSurface, cf: CurvatureField, pf: PFieldGraph, c: float, flag: str) -> dict[str, float]:
    """Pieces of the shared volume term ``V`` under gradient interpretation ``flag``."""
    _check_flag(flag)
    grid = surf.grid
    n = cf.n
    w = surf.w
    Pc = pf.P + c
    second = (2 * cf.S2 - (n - 1) / n * cf.S1**2) * (-1.0 / w) * Pc
    if flag == "euclid":
        grad = pf.grad2_euclid
    elif flag == "metric":
        grad = pf.grad2_metric
    else:
        # divergence form with the induced volume element w dx
        grad = w * pf.grad2_metric
        second = second * w
    return {
        "grad_P": grid.integrate(grad),
        "second_order": grid.integrate(second),
        "second_order_hbar": grid.integrate(cf.hbar2 * Pc / w * (w if flag == "covariant" else 1.0)),
    }


def eval_fundamental(
    surf: GraphSurface,
    cf: CurvatureField,
    pf: PFieldGraph,
    dom: StarDomain,
    grid: PolarGrid,
    c: float = 0.0,
    flag: str = DEFAULT_FLAG,
    cmc_tol: float = CMC_TOL,
) -> IdentityReport:
    """Volume term ``V`` against the boundary flux of ``(P + c) grad P``.

    The right-hand side uses the simplified boundary integrand
    ``(n-1)(1 - |Du| H / w) |Du| / w``; the raw form ``(P + c) dP/dnu`` is
    reported alongside as ``boundary_raw``.  With ``flag="covariant"`` the
    volume element is ``w dx`` and the raw boundary flux carries an extra
    ``1/w``, which is the form the divergence theorem yields on the graph.
    """
    _check_flag(flag)
    n = cf.n
    vol = _volume_terms(surf, cf, pf, c, flag)
    bd = boundary_data(surf, pf, c)
    raw_factor = 1.0 / bd.w if flag == "covariant" else 1.0
    raw = bd.integrate(bd.P_plus_c * bd.dP_normal * raw_factor)
    simplified = bd.integrate((n - 1) * (1 - bd.flux * bd.H) * bd.flux * raw_factor)
    lhs = vol["grad_P"] + vol["second_order"]
    area = grid.integrate(1.0)
    terms = dict(vol, volume=lhs, boundary_raw=raw, boundary_simplified=simplified, boundary_deviation=abs(raw - simplified))
    defect = cmc_defect(cf)
    rep = IdentityReport(
        "fundamental",
        terms,
        lhs,
        simplified,
        max(abs(lhs), abs(simplified), n * area),
        flag=flag,
        grid=_grid_meta(grid),
    )
    _check_cmc(rep, defect, cmc_tol)
    return rep


def _check_cmc(rep: IdentityReport, defect: float, tol: float) -> None:
    rep.terms["cmc_defect"] = defect
    if not defect <= tol:
        rep.valid = False
        rep.notes.append(f"surface is not CMC: max |S1 - n| = {defect:.3e} > {tol:g}")


def flux_defect(surf: GraphSurface, grid: PolarGrid) -> float:
    """``int |Du|/w dsigma - n|Omega|``, zero for exact CMC solutions."""
    n = surf.Du.shape[-1]
    flux = surf.grad_norm[-1] / surf.w[-1]
    return float(np.sum(grid.boundary_weights * flux) - n * grid.integrate(1.0))


def eval_soap_bubble(
    surf: GraphSurface,
    cf: CurvatureField,
    pf: PFieldGraph,
    dom: StarDomain,
    grid: PolarGrid,
    c: float = 0.0,
    flag: str = DEFAULT_FLAG,
    cmc_tol: float = CMC_TOL,
) -> IdentityReport:
    """``V/(n-1) + (1/R0) int (|Du|/w - R0)^2 = int (H0 - H)(|Du|/w)^2``."""
    n = cf.n
    vol = _volume_terms(surf, cf, pf, c, flag)
    bd = boundary_data(surf, pf, c)
    area = grid.integrate(1.0)
    perimeter = float(np.sum(bd.weights))
    R0 = n * area / perimeter
    H0 = 1.0 / R0
    term1 = (vol["grad_P"] + vol["second_order"]) / (n - 1)
    term1_hbar = (vol["grad_P"] + vol["second_order_hbar"]) / (n - 1)
    term2 = bd.integrate((bd.flux - R0) ** 2) / R0
    rhs = bd.integrate((H0 - bd.H) * bd.flux**2)
    terms = {
        "volume_term": term1,
        "volume_term_hbar": term1_hbar,
        "flux_term": term2,
        "curvature_deficit": rhs,
        "flux_defect": flux_defect(surf, grid),
        "min_H_minus_H0": float(np.min(bd.H - H0)),
    }
    lhs = term1 + term2
    rep = IdentityReport(
        "soap_bubble", terms, lhs, rhs, max(abs(lhs), abs(rhs), n * area), flag=flag, grid=_grid_meta(grid)
    )
    _check_cmc(rep, cmc_defect(cf), cmc_tol)
    return rep


def _mean_convexity(grid: PolarGrid) -> np.ndarray:
    n = grid.domain.n_ambient
    H = grid.boundary.curvature / (n - 1)
    if not np.min(H) > 0:
        raise PreconditionError(f"boundary is not strictly mean-convex: min H = {np.min(H):.3e}")
    return H


def eval_heintze_karcher(
    surf: GraphSurface,
    cf: CurvatureField,
    pf: PFieldGraph,
    dom: StarDomain,
    grid: PolarGrid,
    c: float = 0.0,
    flag: str = DEFAULT_FLAG,
    cmc_tol: float = CMC_TOL,
) -> IdentityReport:
    """``V/(n-1) + int (1 - |Du| H / w)^2 / H = int 1/H - n|Omega|``."""
    _mean_convexity(grid)
    n = cf.n
    vol = _volume_terms(surf, cf, pf, c, flag)
    bd = boundary_data(surf, pf, c)
    area = grid.integrate(1.0)
    term1 = (vol["grad_P"] + vol["second_order"]) / (n - 1)
    term2 = bd.integrate((1 - bd.flux * bd.H) ** 2 / bd.H)
    inv_H = bd.integrate(1.0 / bd.H)
    rhs = inv_H - n * area
    terms = {
        "volume_term": term1,
        "boundary_term": term2,
        "inverse_mean_curvature": inv_H,
        "n_area": n * area,
        "hk_deficit": rhs,
        "flux_defect": flux_defect(surf, grid),
    }
    lhs = term1 + term2
    rep = IdentityReport(
        "heintze_karcher", terms, lhs, rhs, max(abs(lhs), abs(rhs), n * area), flag=flag, grid=_grid_meta(grid)
    )
    _check_cmc(rep, cmc_defect(cf), cmc_tol)
    return rep


def eval_hk_deficit(grid: PolarGrid) -> IdentityReport:
    """The inequality ``int 1/H dsigma >= n|Omega|`` for a mean-convex domain.

    Depends on the domain only.  ``margin`` is the deficit.
    """
    H = _mean_convexity(grid)
    n = grid.domain.n_ambient
    area = grid.integrate(1.0)
    inv_H = grid.integrate_boundary(1.0 / H)
    return IdentityReport(
        "hk_deficit",
        {"inverse_mean_curvature": inv_H, "n_area": n * area, "hk_deficit": inv_H - n * area},
        inv_H,
        n * area,
        n * area,
        grid=_grid_meta(grid),
        kind="inequality",
    )


def quotient_weights(S: np.ndarray, n: int, k: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """``M = k C(n,l) S_k - l C(n,k) S_l`` and ``Q = (n-k+1) C(n,l) S_{k-1} - (n-l+1) C(n,k) S_{l-1}``."""
    if not 0 <= l < k <= n:
        raise ValueError(f"need 0 <= l < k <= n, got l={l}, k={k}, n={n}")
    M = k * comb(n, l) * sym_at(S, k) - l * comb(n, k) * sym_at(S, l)
    Q = (n - k + 1) * comb(n, l) * sym_at(S, k - 1) - (n - l + 1) * comb(n, k) * sym_at(S, l - 1)
    return M, Q


def quotient_defect(S: np.ndarray, n: int, k: int, l: int) -> float:
    """Max relative ``|S_k/S_l - C(n,k)/C(n,l)|``."""
    target = comb(n, k) / comb(n, l)
    return float(np.max(np.abs(sym_at(S, k) / sym_at(S, l) - target)) / target)


def eval_lemma33(
    surf: GraphSurface,
    cf: CurvatureField,
    dom: StarDomain,
    grid: PolarGrid,
    k: int,
    l: int,
    c: float = 0.0,
    quotient_tol: float = QUOTIENT_TOL,
) -> IdentityReport:
    """Weighted integral identity for the Hessian-quotient problem.

    Evaluates ``int Q (theta + 1/w_b) dx + int M (u - c) dx = 0`` with
    ``theta = -1/w`` and ``w_b`` the boundary value of ``w``.  The version
    without ``1/w_b`` is reported as ``ungrouped_sum`` for comparison.
    """
    n = cf.n
    defect = quotient_defect(cf.S, n, k, l)
    if not defect <= quotient_tol:
        raise PreconditionError(f"S_{k}/S_{l} deviates from C(n,k)/C(n,l) by {defect:.3e} (relative)")
    M, Q = quotient_weights(cf.S, n, k, l)
    theta = -1.0 / surf.w
    # boundary angle is constant under the hypotheses; average its samples
    inv_wb = grid.integrate_boundary(1.0 / surf.w[-1]) / float(np.sum(grid.boundary_weights))
    q_term = grid.integrate(Q * (theta + inv_wb))
    m_term = grid.integrate(M * (surf.u - c))
    ungrouped = grid.integrate(Q * theta) + m_term
    area = grid.integrate(1.0)
    terms = {
        "Q_term": q_term,
        "M_term": m_term,
        "ungrouped_sum": ungrouped,
        "min_M": float(np.min(M)),
        "min_Q": float(np.min(Q)),
        "max_M_minus_Q": float(np.max(M - Q)),
        "quotient_defect": defect,
        "boundary_inverse_w": inv_wb,
    }
    scale = max(abs(q_term), abs(m_term), n * area)
    rep = IdentityReport("quotient_weighted", terms, q_term + m_term, 0.0, scale, flag=f"k={k},l={l}", grid=_grid_meta(grid))
    return rep


def quotient_weights_at(A, k: int, l: int) -> tuple[float, float, float]:
    """``(M, Q, M - Q)`` for a single matrix, after no normalization."""
    A = np.asarray(A, dtype=float)
    S = matrix_sym_values(A)
    M, Q = quotient_weights(S, A.shape[0], k, l)
    return float(M), float(Q), float(M - Q)


def ellipticity_bracket(S: np.ndarray, k: int, l: int) -> np.ndarray:
    """``k - l + (k+1) S_{k+1}/S_k - (l+1) S_{l+1}/S_l`` (non-positive on the quotient cone)."""
    return k - l + (k + 1) * sym_at(S, k + 1) / sym_at(S, k) - (l + 1) * sym_at(S, l + 1) / sym_at(S, l)


def pointwise_ellipticity(cf: CurvatureField, w: np.ndarray, k: int, l: int) -> tuple[float, np.ndarray]:
    """Closed form of ``F^i_j nabla_i nabla^j P`` with ``F = S_k/S_l``.

    Returns the minimum over nodes and the field ``F * bracket * (-1/w)``.
    """
    if np.any(cf.cone < k):
        raise PreconditionError(f"shape operator leaves the Garding cone of order {k}")
    F = sym_at(cf.S, k) / sym_at(cf.S, l)
    field_ = F * ellipticity_bracket(cf.S, k, l) * (-1.0 / np.asarray(w))
    return float(np.min(field_)), field_


def gauss_map_identity(A) -> float:
    """Max over ``k`` of the relative gap in ``S_k(A) S_n(B) = S_{n-k}(B)`` with ``B = A^{-1}``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if np.linalg.cond(A) > 1e14:
        raise ValueError("matrix is singular to working precision")
    n = A.shape[0]
    SA = matrix_sym_values(A)
    SB = matrix_sym_values(np.linalg.inv(A))
    worst = 0.0
    for k in range(n + 1):
        lhs, rhs = SA[k] * SB[n], SB[n - k]
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny))
    return float(worst)


def evaluate_all(
    surf: GraphSurface,
    cf: CurvatureField,
    pf: PFieldGraph,
    dom: StarDomain,
    grid: PolarGrid,
    c: float = 0.0,
    flags=GRADIENT_FLAGS,
) -> list[IdentityReport]:
    """Fundamental identity under every flag, plus the soap-bubble and HK reports."""
    out = [eval_fundamental(surf, cf, pf, dom, grid, c, f) for f in flags]
    out.append(eval_soap_bubble(surf, cf, pf, dom, grid, c))
    try:
        out.append(eval_heintze_karcher(surf, cf, pf, dom, grid, c))
        out.append(eval_hk_deficit(grid))
    except PreconditionError:
        pass
    return out
