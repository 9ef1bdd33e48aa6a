"""Geometry of graphs ``x_{n+1} = u(x)`` in Minkowski space.

The ambient form is ``<x, y> = x_1 y_1 + ... + x_n y_n - x_{n+1} y_{n+1}``.
For a space-like graph (``|Du| < 1``) with ``w = sqrt(1 - |Du|^2)``:

* metric ``g = I - Du Du^T``, inverse ``g^{-1} = I + Du Du^T / w^2``
* second fundamental form ``h = D^2u / w``
* shape operator ``A = h g^{-1}``, i.e. ``A[i, j] = d_i (u_j / w)``

Grid fields are arrays shaped ``(n_r, n_phi, ...)`` on a :class:`PolarGrid`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import PolarGrid
from .symfunc import cone_order, elem_sym_values

EPS_SPACE = 1e-6


class SpacelikeError(ValueError):
    """Raised when a surface violates ``|Du| <= 1 - eps``."""


def minkowski_inner(x, y) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    out = np.sum(x[..., :-1] * y[..., :-1], axis=-1) - x[..., -1] * y[..., -1]
    return float(out) if np.ndim(out) == 0 else out


# --- differentiation --------------------------------------------------------


@dataclass(frozen=True)
class DiffOperators:
    """Sparse maps from nodal values (flattened) to Cartesian derivatives."""

    dx: sp.csr_matrix
    dy: sp.csr_matrix
    dxx: sp.csr_matrix
    dxy: sp.csr_matrix
    dyy: sp.csr_matrix

    @property
    def grad(self):
        return (self.dx, self.dy)

    @property
    def hess(self):
        return ((self.dxx, self.dxy), (self.dxy, self.dyy))


def _lagrange_weights(nodes: np.ndarray, t: float) -> np.ndarray:
    w = np.ones(len(nodes))
    for m in range(len(nodes)):
        for q in range(len(nodes)):
            if q != m:
                w[m] *= (t - nodes[q]) / (nodes[m] - nodes[q])
    return w


def _radial_operators(grid: PolarGrid):
    """``d/ds`` and ``d2/ds2`` as sparse matrices on flattened nodes.

    Rings near the pole borrow ghost values at ``s = -h/2`` and ``s = -3h/2``:
    the point ``x(-s, phi_j)`` lies on the opposite ray ``phi_j + pi`` and is
    interpolated there with a cubic through the four innermost nodes.  The
    first derivative is fourth order in the interior so that the ``1/s``
    factors of the polar chain rule do not degrade the Hessian near the pole.
    """
    n_r, n_phi, h = grid.n_r, grid.n_phi, grid.h
    rho = grid.domain.rho(grid.phi)
    N = grid.size
    j = np.arange(n_phi)
    jo = (j + n_phi // 2) % n_phi
    # ghost weights per angle, shape (n_phi, 4), for ghost rings -1 and -2
    ghosts = {
        -m: np.array([_lagrange_weights(grid.s[:4], (m - 0.5) * h * rho[k] / rho[jo[k]]) for k in j])
        for m in (1, 2)
    }
    triplets = {"s": ([], [], []), "ss": ([], [], [])}

    def add(name, i_row, i, weight):
        rows, cols, vals = triplets[name]
        row = i_row * n_phi + j
        if i >= 0:
            rows.append(row)
            cols.append(i * n_phi + j)
            vals.append(np.full(n_phi, weight))
        else:
            for m in range(4):
                rows.append(row)
                cols.append(m * n_phi + jo)
                vals.append(weight * ghosts[i][:, m])

    for i in range(n_r):
        if i == n_r - 1:
            for off, cs, css in ((0, 1.5, 2.0), (1, -2.0, -5.0), (2, 0.5, 4.0), (3, 0.0, -1.0)):
                add("s", i, i - off, cs / h)
                add("ss", i, i - off, css / h**2)
            continue
        if i == n_r - 2:
            add("s", i, i + 1, 0.5 / h)
            add("s", i, i - 1, -0.5 / h)
        else:
            for off, c in ((2, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0)):
                add("s", i, i + off, c / (12 * h))
        for off, c in ((1, 1.0), (0, -2.0), (-1, 1.0)):
            add("ss", i, i + off, c / h**2)

    def build(name):
        rows, cols, vals = (np.concatenate(a) for a in triplets[name])
        # duplicates (ghost and real node coinciding) are summed by tocsr
        return sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()

    return build("s"), build("ss")


def _angular_operators(grid: PolarGrid):
    """Fourth-order periodic ``d/dphi`` and ``d2/dphi2``, block-diagonal over rings."""
    n_phi, dphi = grid.n_phi, grid.dphi

    def periodic(coeffs):
        j = np.arange(n_phi)
        rows = np.concatenate([j for _ in coeffs])
        cols = np.concatenate([(j + off) % n_phi for off, _ in coeffs])
        vals = np.concatenate([np.full(n_phi, c) for _, c in coeffs])
        return sp.coo_matrix((vals, (rows, cols)), shape=(n_phi, n_phi)).tocsr()

    d1 = periodic(((-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12))) / dphi
    d2 = periodic(((-2, -1 / 12), (-1, 4 / 3), (0, -5 / 2), (1, 4 / 3), (2, -1 / 12))) / dphi**2
    ring = sp.identity(grid.n_r)
    return sp.kron(ring, d1, format="csr"), sp.kron(ring, d2, format="csr")


def map_derivatives(grid: PolarGrid):
    """Jacobian ``J[k, a] = dx_k/da`` and second derivatives of the polar map.

    Returns ``(J, X2)`` with ``J`` shaped ``(n_r, n_phi, 2, 2)`` and
    ``X2[..., k, a, b] = d^2 x_k / da db`` for ``a, b`` in ``(s, phi)``.
    """
    rho, rho1, rho2 = grid.domain.rho_derivs(grid.phi)
    c, sn = np.cos(grid.phi), np.sin(grid.phi)
    S = grid.s[:, None]
    shape = grid.shape
    J = np.zeros(shape + (2, 2))
    J[..., 0, 0] = np.broadcast_to(rho * c, shape)
    J[..., 1, 0] = np.broadcast_to(rho * sn, shape)
    J[..., 0, 1] = S * (rho1 * c - rho * sn)
    J[..., 1, 1] = S * (rho1 * sn + rho * c)
    X2 = np.zeros(shape + (2, 2, 2))
    X2[..., 0, 0, 1] = X2[..., 0, 1, 0] = np.broadcast_to(rho1 * c - rho * sn, shape)
    X2[..., 1, 0, 1] = X2[..., 1, 1, 0] = np.broadcast_to(rho1 * sn + rho * c, shape)
    X2[..., 0, 1, 1] = S * (rho2 * c - 2 * rho1 * sn - rho * c)
    X2[..., 1, 1, 1] = S * (rho2 * sn + 2 * rho1 * c - rho * sn)
    return J, X2


def discrete_map_derivatives(grid: PolarGrid, Ds, Dp, Dss, Dsp, Dpp):
    """Map derivatives in the layout of :func:`map_derivatives`, taken with the grid stencils.

    Differencing the node coordinates with the same stencils that act on
    ``u`` makes the chain rule exact for linear functions: their discrete
    gradient is the true constant and their discrete Hessian vanishes.
    """
    J = np.zeros((grid.size, 2, 2))
    X2 = np.zeros((grid.size, 2, 2, 2))
    for k, coord in enumerate((grid.x.ravel(), grid.y.ravel())):
        J[:, k, 0] = apply_centered(Ds, coord)
        J[:, k, 1] = apply_centered(Dp, coord)
        X2[:, k, 0, 0] = apply_centered(Dss, coord)
        X2[:, k, 0, 1] = X2[:, k, 1, 0] = apply_centered(Dsp, coord)
        X2[:, k, 1, 1] = apply_centered(Dpp, coord)
    return J.reshape(grid.shape + (2, 2)), X2.reshape(grid.shape + (2, 2, 2))


def diff_operators(grid: PolarGrid) -> DiffOperators:
    """Second-order Cartesian derivative matrices for ``grid`` (cached)."""
    if "diff" in grid.cache:
        return grid.cache["diff"]
    Ds, Dss = _radial_operators(grid)
    Dp, Dpp = _angular_operators(grid)
    Dsp = Dp @ Ds
    J, X2 = discrete_map_derivatives(grid, Ds, Dp, Dss, Dsp, Dpp)
    Jinv = np.linalg.inv(J).reshape(grid.size, 2, 2)
    X2 = X2.reshape(grid.size, 2, 2, 2)
    diag = lambda v: sp.diags(v, format="csr")  # noqa: E731

    grad = [diag(Jinv[:, 0, k]) @ Ds + diag(Jinv[:, 1, k]) @ Dp for k in range(2)]
    second = {(0, 0): Dss, (0, 1): Dsp, (1, 0): Dsp, (1, 1): Dpp}
    corrected = {
        ab: second[ab] - diag(X2[:, 0, ab[0], ab[1]]) @ grad[0] - diag(X2[:, 1, ab[0], ab[1]]) @ grad[1]
        for ab in second
    }

    def hess(p, q):
        out = sp.csr_matrix((grid.size, grid.size))
        for a in range(2):
            for b in range(2):
                out = out + diag(Jinv[:, a, p] * Jinv[:, b, q]) @ corrected[(a, b)]
        return out.tocsr()

    ops = DiffOperators(grad[0].tocsr(), grad[1].tocsr(), hess(0, 0), hess(0, 1), hess(1, 1))
    grid.cache["diff"] = ops
    return ops


def apply_centered(D: sp.csr_matrix, f: np.ndarray) -> np.ndarray:
    """``D @ f`` for a constant-annihilating stencil, summed as ``c_k (f_k - f_row)``.

    Pole-ring coefficients reach ``1/(h dphi)^2``; differencing against the
    row value first keeps roundoff proportional to the local variation of
    ``f`` instead of its magnitude.
    """
    rows = np.repeat(np.arange(D.shape[0]), np.diff(D.indptr))
    terms = D.data * (f[D.indices] - f[rows])
    return np.bincount(rows, weights=terms, minlength=D.shape[0])


def differentiate(u, grid: PolarGrid) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian gradient ``(n_r, n_phi, 2)`` and Hessian ``(n_r, n_phi, 2, 2)``."""
    ops = diff_operators(grid)
    flat = np.asarray(u, dtype=float).ravel()
    Du = np.stack([apply_centered(ops.dx, flat), apply_centered(ops.dy, flat)], axis=-1)
    uxx, uxy, uyy = (apply_centered(D, flat) for D in (ops.dxx, ops.dxy, ops.dyy))
    D2u = np.stack([np.stack([uxx, uxy], -1), np.stack([uxy, uyy], -1)], -2)
    return Du.reshape(grid.shape + (2,)), D2u.reshape(grid.shape + (2, 2))


def gradient_field(f, grid: PolarGrid) -> np.ndarray:
    ops = diff_operators(grid)
    flat = np.asarray(f, dtype=float).ravel()
    return np.stack([apply_centered(ops.dx, flat), apply_centered(ops.dy, flat)], axis=-1).reshape(grid.shape + (2,))


# --- surfaces ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphSurface:
    grid: PolarGrid
    u: np.ndarray
    Du: np.ndarray
    D2u: np.ndarray
    source: str
    eps_space: float = EPS_SPACE

    @property
    def grad_norm(self) -> np.ndarray:
        return np.linalg.norm(self.Du, axis=-1)

    @property
    def w(self) -> np.ndarray:
        return np.sqrt(1.0 - np.sum(self.Du**2, axis=-1))

    @property
    def angle(self) -> np.ndarray:
        """Angle function ``<e_{n+1}, E_{n+1}> = -1/w``."""
        return -1.0 / self.w

    @property
    def positions(self) -> np.ndarray:
        return np.stack([self.grid.x, self.grid.y], axis=-1)

    def check_spacelike(self) -> None:
        worst = float(np.max(self.grad_norm))
        if worst > 1.0 - self.eps_space:
            raise SpacelikeError(f"max |Du| = {worst:.12g} exceeds 1 - {self.eps_space:g}")


def analytic_surface(grid: PolarGrid, u, Du, D2u, source: str = "analytic", eps_space: float = EPS_SPACE) -> GraphSurface:
    surf = GraphSurface(grid, np.asarray(u, float), np.asarray(Du, float), np.asarray(D2u, float), source, eps_space)
    surf.check_spacelike()
    return surf


def sampled_surface(grid: PolarGrid, u, source: str = "solved", eps_space: float = EPS_SPACE) -> GraphSurface:
    """Surface from nodal heights; derivatives by finite differences."""
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    Du, D2u = differentiate(u, grid)
    surf = GraphSurface(grid, u, Du, D2u, source, eps_space)
    surf.check_spacelike()
    return surf


def flat_surface(grid: PolarGrid, c: float = 0.0) -> GraphSurface:
    shape = grid.shape
    return analytic_surface(grid, np.full(shape, float(c)), np.zeros(shape + (2,)), np.zeros(shape + (2, 2)), "analytic:flat")


def plane_surface(grid: PolarGrid, slope, c: float = 0.0) -> GraphSurface:
    slope = np.asarray(slope, dtype=float)
    u = c + slope[0] * grid.x + slope[1] * grid.y
    Du = np.broadcast_to(slope, grid.shape + (2,)).copy()
    return analytic_surface(grid, u, Du, np.zeros(grid.shape + (2, 2)), "analytic:plane")


def cap_radius(theta0: float) -> float:
    if not theta0 < -1:
        raise ValueError(f"theta0 must be < -1, got {theta0}")
    return float(np.sqrt(theta0**2 - 1.0))


def cap_values(points, c: float, theta0: float, a=(0.0, 0.0)):
    """Closed-form ``u = c + theta0 + sqrt(1 + |x - a|^2)`` with derivatives."""
    d = np.asarray(points, dtype=float) - np.asarray(a, dtype=float)
    q = np.sqrt(1.0 + np.sum(d**2, axis=-1))
    u = c + theta0 + q
    Du = d / q[..., None]
    eye = np.eye(d.shape[-1])
    D2u = (eye * q[..., None, None] ** 2 - d[..., :, None] * d[..., None, :]) / q[..., None, None] ** 3
    return u, Du, D2u


def hyperboloid_cap(grid: PolarGrid, c: float, theta0: float, a=None, sampled: bool = False) -> GraphSurface:
    """Hyperboloid cap over the disk of radius ``sqrt(theta0^2 - 1)`` about ``a``.

    With ``sampled=True`` only the heights are kept and derivatives are
    recomputed by finite differences.
    """
    R = cap_radius(theta0)
    dom = grid.domain
    a = dom.center if a is None else tuple(a)
    if dom.preset != "disk" or not np.isclose(dom.params["R"], R, rtol=0, atol=1e-10):
        raise ValueError(f"cap with theta0={theta0} needs disk(R={R!r}), got {dom.describe()}")
    if not np.allclose(dom.center, a, rtol=0, atol=1e-10):
        raise ValueError("cap center must match the disk center")
    u, Du, D2u = cap_values(np.stack([grid.x, grid.y], axis=-1), c, theta0, a)
    if sampled:
        return sampled_surface(grid, u, source="sampled:cap")
    return analytic_surface(grid, u, Du, D2u, "analytic:cap")


def unit_hyperboloid(grid: PolarGrid) -> GraphSurface:
    """``u = sqrt(1 + |x|^2)``, the upper unit hyperboloid itself."""
    u, Du, D2u = cap_values(np.stack([grid.x, grid.y], axis=-1), 0.0, 0.0, (0.0, 0.0))
    return analytic_surface(grid, u, Du, D2u, "analytic:hyperboloid")


# --- curvature --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurvatureField:
    g: np.ndarray
    ginv: np.ndarray
    h: np.ndarray
    A: np.ndarray
    lam: np.ndarray
    S: np.ndarray
    hbar2: np.ndarray
    cone: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[-1]

    @property
    def S1(self) -> np.ndarray:
        return self.S[..., 1]

    @property
    def S2(self) -> np.ndarray:
        return self.S[..., 2]


def curvature_field(surf: GraphSurface) -> CurvatureField:
    surf.check_spacelike()
    p, H = surf.Du, surf.D2u
    n = p.shape[-1]
    w = surf.w[..., None, None]
    eye = np.eye(n)
    ppT = p[..., :, None] * p[..., None, :]
    g = eye - ppT
    ginv = eye + ppT / w**2
    h = H / w
    A = h @ ginv
    # C = sqrt(ginv) = I + p p^T / (w (1 + w)); C h C is symmetric and similar to A^T
    C = eye + ppT / (w * (1 + w))
    M = C @ h @ C
    lam = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    S = elem_sym_values(lam)
    trA2 = np.einsum("...ij,...ji->...", A, A)
    trA = np.einsum("...ii->...", A)
    hbar2 = trA2 - trA**2 / n
    cone = cone_order(S, np.linalg.norm(lam, axis=-1))
    return CurvatureField(g, ginv, h, A, lam, S, hbar2, cone)


def trace_free_identity_check(cf: CurvatureField) -> float:
    """Max of ``| |hbar|^2 - ((n-1)/n S_1^2 - 2 S_2) |`` over nodes."""
    n = cf.n
    rhs = (n - 1) / n * cf.S1**2 - 2 * cf.S2
    return float(np.max(np.abs(cf.hbar2 - rhs)))


def metric_inverse_defect(cf: CurvatureField) -> float:
    return float(np.max(np.abs(cf.ginv @ cf.g - np.eye(cf.n))))


def gamma_k_report(cf: CurvatureField, k: int) -> tuple[np.ndarray, bool]:
    ok = cf.cone >= k
    return ok, bool(np.all(ok))


def codazzi_defect(cf: CurvatureField, grid: PolarGrid, interior_only: bool = True) -> float:
    """Max over ``i, m, j`` of ``|d_m A[i, j] - d_i A[m, j]|``."""
    n = cf.n
    dA = np.stack(
        [np.stack([gradient_field(cf.A[..., i, j], grid) for j in range(n)], axis=-2) for i in range(n)],
        axis=-3,
    )  # dA[..., i, j, m] = d_m A[i, j]
    defect = np.abs(dA - np.swapaxes(dA, -3, -1))
    if interior_only:
        defect = defect[:-1]
    return float(defect.max())


def newton_field(cf: CurvatureField, k: int) -> np.ndarray:
    """Pointwise Newton tensor ``T_k`` from ``T_1 = I``, ``T_j = S_{j-1} I - T_{j-1} A``."""
    n = cf.n
    eye = np.eye(n)
    T = np.broadcast_to(eye, cf.A.shape).copy()
    for j in range(2, k + 1):
        T = cf.S[..., j - 1, None, None] * eye - T @ cf.A
    return T


def newton_divergence_defect(cf: CurvatureField, grid: PolarGrid, k: int, interior_only: bool = True) -> float:
    """Max over ``p`` of ``|sum_q d_q T_k[p, q]|`` computed by finite differences."""
    T = newton_field(cf, k)
    n = cf.n
    div = np.zeros(T.shape[:-1])
    for p in range(n):
        for q in range(n):
            div[..., p] += gradient_field(T[..., p, q], grid)[..., q]
    if interior_only:
        div = div[:-1]
    return float(np.max(np.abs(div)))


# --- P-functions ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PFieldGraph:
    P: np.ndarray
    dP: np.ndarray
    grad2_metric: np.ndarray
    grad2_euclid: np.ndarray


def p_field_graph(surf: GraphSurface, cf: CurvatureField) -> PFieldGraph:
    """``P = -u + 1/w`` and its gradient ``P_i = -u_i + A[i, s] u_s``."""
    P = -surf.u + 1.0 / surf.w
    dP = -surf.Du + np.einsum("...is,...s->...i", cf.A, surf.Du)
    g2 = np.einsum("...i,...ij,...j->...", dP, cf.ginv, dP)
    e2 = np.sum(dP**2, axis=-1)
    return PFieldGraph(P, dP, g2, e2)


@dataclass(frozen=True, eq=False)
class PFieldConvex:
    position: np.ndarray
    normal: np.ndarray
    phi_phi: np.ndarray
    phi_e: np.ndarray
    P: np.ndarray
    position_causal: np.ndarray
    inner_negative: np.ndarray


def p_field_convex(surf: GraphSurface) -> PFieldConvex:
    """``P = <phi, phi>/2 - <phi, e_{n+1}>`` with ``e_{n+1} = (Du, 1)/w``.

    ``position_causal`` flags nodes where the position vector is time-like
    or light-like with positive last coordinate; ``inner_negative`` flags
    ``<phi, e_{n+1}> < 0``.
    """
    pts = surf.positions
    phi = np.concatenate([pts, surf.u[..., None]], axis=-1)
    e = np.concatenate([surf.Du, np.ones(surf.u.shape + (1,))], axis=-1) / surf.w[..., None]
    pp = minkowski_inner(phi, phi)
    pe = minkowski_inner(phi, e)
    P = 0.5 * pp - pe
    return PFieldConvex(phi, e, pp, pe, P, (pp <= 0) & (surf.u > 0), pe < 0)
