"""Dirichlet problem for the constant-mean-curvature graph equation.

Solves ``div(Du / sqrt(1 - |Du|^2)) = rhs`` in the domain with ``u = c`` on
the boundary.  The mean curvature is the unnormalized trace ``S_1`` of the
shape operator, and the default right-hand side is the dimension ``n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import PolarGrid, StarDomain
from .graphgeom import (
    EPS_SPACE,
    GraphSurface,
    SpacelikeError,
    curvature_field,
    diff_operators,
    differentiate,
    sampled_surface,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Base class for solver failures; ``report`` holds the last iterate."""

    exit_code = 1

    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


class NonConvergence(SolverError):
    exit_code = 3


class SpacelikeBreakdown(SolverError):
    exit_code = 4


@dataclass
class SolverConfig:
    target_rhs: float | None = None
    c: float = 0.0
    max_newton_iters: int = 50
    residual_tol: float = 1e-10
    damping: float = 0.5
    min_step: float = 1e-8
    eps_space: float = EPS_SPACE
    initial_guess: str | np.ndarray = "flat"

    def __post_init__(self):
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if self.residual_tol <= 0 or self.eps_space <= 0 or self.min_step <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")

    def rhs(self, n: int) -> float:
        return float(n if self.target_rhs is None else self.target_rhs)


@dataclass
class SolveReport:
    iterations: int
    residual: float
    damping_events: int
    min_w: float
    converged: bool
    surface: GraphSurface | None
    u: np.ndarray
    history: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    message: str = ""
    residual_floor: float = 0.0

    def to_record(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "damping_events": self.damping_events,
            "min_w": self.min_w,
            "residual_floor": self.residual_floor,
            "message": self.message,
        }


def cmc_residual(surf: GraphSurface, rhs: float) -> np.ndarray:
    """``S_1(A) - rhs`` at interior nodes, zero on the boundary ring."""
    cf = curvature_field(surf)
    res = np.einsum("...ii->...", cf.A) - rhs
    res[-1] = 0.0
    return res


def _operator_and_jacobian(u: np.ndarray, grid: PolarGrid, rhs: float, c: float):
    """Residual vector and its exact discrete Jacobian at nodal values ``u``.

    The operator is ``a_ij(p) u_ij`` with ``a = I/w + p p^T / w^3``.
    """
    ops = diff_operators(grid)
    flat = u.ravel()
    Du, D2u = differentiate(u, grid)
    p = Du.reshape(-1, 2)
    H = D2u.reshape(-1, 2, 2)
    w2 = 1.0 - np.sum(p**2, axis=-1)
    if not np.all(w2 > 0):
        # trial step left the space-like region; caller rejects it on min_w
        return None, None, 0.0
    w = np.sqrt(w2)
    trH = H[:, 0, 0] + H[:, 1, 1]
    pHp = np.einsum("ni,nij,nj->n", p, H, p)
    Hp = np.einsum("nij,nj->ni", H, p)
    F = trH / w + pHp / w**3

    bnd = np.zeros(grid.shape, dtype=bool)
    bnd[-1] = True
    bnd = bnd.ravel()
    res = F - rhs
    res[bnd] = flat[bnd] - c

    a = np.eye(2)[None] / w[:, None, None] + p[:, :, None] * p[:, None, :] / w[:, None, None] ** 3
    dF = trH[:, None] * p / w[:, None] ** 3 + 2 * Hp / w[:, None] ** 3 + 3 * pHp[:, None] * p / w[:, None] ** 5
    diag = sp.diags
    Jm = (
        diag(a[:, 0, 0]) @ ops.dxx
        + diag(a[:, 0, 1] + a[:, 1, 0]) @ ops.dxy
        + diag(a[:, 1, 1]) @ ops.dyy
        + diag(dF[:, 0]) @ ops.dx
        + diag(dF[:, 1]) @ ops.dy
    )
    keep = sp.diags((~bnd).astype(float))
    Jm = keep @ Jm + sp.diags(bnd.astype(float))
    return res, Jm.tocsc(), float(w.min())


def _interior_norm(res: np.ndarray, grid: PolarGrid) -> float:
    return float(np.max(np.abs(res.reshape(grid.shape)[:-1])))


def residual_floor(Jm: sp.spmatrix, u: np.ndarray, grid: PolarGrid) -> float:
    """Roundoff level of the discrete residual at ``u``.

    Rounding each nodal value to double precision moves row ``i`` of the
    residual by up to ``eps * sum_k |J_ik| |u_k|``.  Near the pole this
    exceeds ``1e-10`` on fine grids, so no iterate can be resolved further.
    """
    bound = np.finfo(float).eps * (abs(Jm) @ np.abs(u.ravel()))
    return float(bound.reshape(grid.shape)[:-1].max())


def initial_guess(grid: PolarGrid, cfg: SolverConfig) -> np.ndarray:
    c = cfg.c
    if isinstance(cfg.initial_guess, np.ndarray):
        u = np.array(cfg.initial_guess, dtype=float).reshape(grid.shape)
        u[-1] = c
        return u
    if cfg.initial_guess == "flat":
        return np.full(grid.shape, float(c))
    if cfg.initial_guess == "scaled_cap":
        # cap over the equal-area disk, bent to meet u = c on the true boundary
        area = grid.weights.sum()
        R = np.sqrt(area / np.pi)
        r2 = (grid.x - grid.domain.center[0]) ** 2 + (grid.y - grid.domain.center[1]) ** 2
        bump = np.sqrt(1 + R**2) - np.sqrt(1 + r2)
        bump = bump - bump[-1][None, :] * grid.s[:, None] ** 2
        for scale in (1.0, 0.75, 0.5, 0.25):
            u = c - scale * bump
            try:
                sampled_surface(grid, u, eps_space=cfg.eps_space)
                return u
            except SpacelikeError:
                continue
        return np.full(grid.shape, float(c))
    raise ValueError(f"unknown initial guess {cfg.initial_guess!r}")


def newton_solve(dom: StarDomain, grid: PolarGrid, cfg: SolverConfig | None = None) -> SolveReport:
    """Damped Newton iteration that keeps every accepted iterate space-like.

    Converges once the interior max-norm residual drops below
    ``residual_tol`` or below :func:`residual_floor`, whichever is larger.
    Raises :class:`NonConvergence` when the iteration budget runs out and
    :class:`SpacelikeBreakdown` when no step above ``min_step`` is admissible.
    """
    cfg = cfg or SolverConfig()
    if grid.domain is not dom:
        raise ValueError("grid was built on a different domain")
    rhs = cfg.rhs(dom.n_ambient)
    u = initial_guess(grid, cfg)
    res, Jm, min_w = _operator_and_jacobian(u, grid, rhs, cfg.c)
    if min_w < np.sqrt(cfg.eps_space * (2 - cfg.eps_space)):
        raise ValueError("initial guess is not space-like")
    history = [_interior_norm(res, grid)]
    steps: list[float] = []
    damping_events = 0
    floor = residual_floor(Jm, u, grid)

    def report(converged, message=""):
        surf = None
        try:
            surf = sampled_surface(grid, u, source="solved", eps_space=cfg.eps_space)
        except SpacelikeError:
            pass
        return SolveReport(
            iterations=len(steps),
            residual=history[-1],
            damping_events=damping_events,
            min_w=min_w,
            converged=converged,
            surface=surf,
            u=u.copy(),
            history=list(history),
            steps=list(steps),
            message=message,
            residual_floor=floor,
        )

    w_floor = np.sqrt(cfg.eps_space * (2 - cfg.eps_space))  # w at |Du| = 1 - eps
    def done():
        return history[-1] <= max(cfg.residual_tol, floor)

    for _ in range(cfg.max_newton_iters):
        if done():
            return report(True)
        delta = spla.spsolve(Jm, -res).reshape(grid.shape)
        t = 1.0
        base = np.linalg.norm(res[: -grid.n_phi])
        reason = ""
        while True:
            trial = u + t * delta
            t_res, t_J, t_minw = _operator_and_jacobian(trial, grid, rhs, cfg.c)
            if not np.isfinite(t_minw) or t_minw < w_floor:
                reason = "spacelike"
            elif np.linalg.norm(t_res[: -grid.n_phi]) >= base and _interior_norm(t_res, grid) > max(cfg.residual_tol, floor):
                reason = "residual"
            else:
                break
            t *= cfg.damping
            damping_events += 1
            if t < cfg.min_step:
                rep = report(False, f"no admissible step ({reason})")
                if reason == "spacelike":
                    raise SpacelikeBreakdown(rep.message, rep)
                raise NonConvergence(rep.message, rep)
        u, res, Jm, min_w = trial, t_res, t_J, t_minw
        floor = residual_floor(Jm, u, grid)
        steps.append(t)
        history.append(_interior_norm(res, grid))
        log.debug("newton step %d: t=%g residual=%.3e", len(steps), t, history[-1])
    if done():
        return report(True)
    rep = report(False, f"no convergence in {cfg.max_newton_iters} iterations")
    raise NonConvergence(rep.message, rep)


@dataclass(frozen=True)
class RadialProfile:
    """``u(r) = c - sqrt(1 + R^2) + sqrt(1 + r^2)``, the CMC ball solution in any dimension."""

    R: float
    n: int
    c: float

    def u(self, r):
        r = np.asarray(r, dtype=float)
        return self.c - np.sqrt(1 + self.R**2) + np.sqrt(1 + r**2)

    def du(self, r):
        r = np.asarray(r, dtype=float)
        return r / np.sqrt(1 + r**2)

    def d2u(self, r):
        r = np.asarray(r, dtype=float)
        return (1 + r**2) ** -1.5

    def flux(self, r):
        """``u'/w``, which equals ``r`` identically."""
        du = self.du(r)
        return du / np.sqrt(1 - du**2)

    @property
    def boundary_angle(self) -> float:
        return -float(np.sqrt(1 + self.R**2))


def radial_exact(R: float, n: int, c: float = 0.0) -> RadialProfile:
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    return RadialProfile(float(R), int(n), float(c))
