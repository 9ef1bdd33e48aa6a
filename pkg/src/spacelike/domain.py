"""Star-shaped planar domains, mapped polar grids and quadrature.

A domain is ``{center + r (cos phi, sin phi) : 0 <= r <= rho(phi)}``.  Grids
use the map ``x(s, phi) = center + s * rho(phi) * (cos phi, sin phi)``.  The
radial nodes are shifted half a step off the pole, ``s_i = (i + 1/2) h`` with
``h = 1 / (n_r - 1/2)``, so the outermost ring sits on the boundary ``s = 1``
and no node lands on the degenerate center.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

RhoFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class StarDomain:
    """Boundary radius function ``rho`` about ``center``.

    ``rho_fn(phi)`` returns ``(rho, rho', rho'')``.  ``preset`` and ``params``
    describe how the domain was built so it can be echoed in reports.
    """

    preset: str
    params: dict
    rho_fn: RhoFn = field(repr=False, compare=False)
    center: tuple[float, float] = (0.0, 0.0)
    n_ambient: int = 2

    def rho(self, phi) -> np.ndarray:
        return self.rho_fn(np.asarray(phi, dtype=float))[0]

    def rho_derivs(self, phi):
        return self.rho_fn(np.asarray(phi, dtype=float))

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.preset}({args})"


def _disk_rho(R: float) -> RhoFn:
    def fn(phi):
        return np.full_like(phi, R), np.zeros_like(phi), np.zeros_like(phi)

    return fn


def _ellipse_rho(a: float, b: float) -> RhoFn:
    # rho = ab D^{-1/2} with D = b^2 cos^2 + a^2 sin^2
    def fn(phi):
        D = b**2 * np.cos(phi) ** 2 + a**2 * np.sin(phi) ** 2
        D1 = (a**2 - b**2) * np.sin(2 * phi)
        D2 = 2 * (a**2 - b**2) * np.cos(2 * phi)
        rho = a * b * D**-0.5
        rho1 = -0.5 * a * b * D**-1.5 * D1
        rho2 = a * b * (0.75 * D**-2.5 * D1**2 - 0.5 * D**-1.5 * D2)
        return rho, rho1, rho2

    return fn


def _fourier_rho(radius: float, cos_coeffs, sin_coeffs) -> RhoFn:
    cos_coeffs = np.asarray(cos_coeffs, dtype=float)
    sin_coeffs = np.asarray(sin_coeffs, dtype=float)

    def fn(phi):
        rho = np.full_like(phi, radius)
        rho1 = np.zeros_like(phi)
        rho2 = np.zeros_like(phi)
        for m, (a, b) in enumerate(zip(cos_coeffs, sin_coeffs), start=1):
            c, s = np.cos(m * phi), np.sin(m * phi)
            rho = rho + a * c + b * s
            rho1 = rho1 + m * (-a * s + b * c)
            rho2 = rho2 - m * m * (a * c + b * s)
        return rho, rho1, rho2

    return fn


def disk(R: float, center=(0.0, 0.0), n_ambient: int = 2) -> StarDomain:
    if not R > 0:
        raise ValueError(f"disk radius must be positive, got {R}")
    return StarDomain("disk", {"R": float(R)}, _disk_rho(float(R)), tuple(map(float, center)), n_ambient)


def ellipse(a: float, b: float, center=(0.0, 0.0)) -> StarDomain:
    """Ellipse with semi-axis ``a`` along x and ``b`` along y."""
    if not (a > 0 and b > 0):
        raise ValueError(f"ellipse semi-axes must be positive, got a={a}, b={b}")
    return StarDomain("ellipse", {"a": float(a), "b": float(b)}, _ellipse_rho(float(a), float(b)), tuple(map(float, center)))


def fourier(radius: float, cos=(), sin=(), center=(0.0, 0.0)) -> StarDomain:
    """``rho = radius + sum_m cos[m-1] cos(m phi) + sin[m-1] sin(m phi)``."""
    cos = [float(c) for c in cos]
    sin = [float(s) for s in sin]
    width = max(len(cos), len(sin))
    cos += [0.0] * (width - len(cos))
    sin += [0.0] * (width - len(sin))
    if not radius > 0:
        raise ValueError(f"base radius must be positive, got {radius}")
    fn = _fourier_rho(float(radius), cos, sin)
    probe = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    if np.min(fn(probe)[0]) <= 0:
        raise ValueError("Fourier coefficients drive the boundary radius to zero or below")
    return StarDomain("fourier", {"radius": float(radius), "cos": cos, "sin": sin}, fn, tuple(map(float, center)))


def make_domain(preset: str, center=(0.0, 0.0), **params) -> StarDomain:
    if preset == "disk":
        return disk(params["R"], center)
    if preset == "ellipse":
        return ellipse(params["a"], params["b"], center)
    if preset == "fourier":
        return fourier(params["radius"], params.get("cos", ()), params.get("sin", ()), center)
    raise ValueError(f"unknown domain preset {preset!r}")


@dataclass(frozen=True)
class BoundaryGeometry:
    phi: np.ndarray
    points: np.ndarray  # (n_phi, 2)
    normal: np.ndarray  # outward unit normal, (n_phi, 2)
    curvature: np.ndarray
    arclength: np.ndarray  # |dx/dphi|


def boundary_geometry(dom: StarDomain, n_phi: int) -> BoundaryGeometry:
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    rho, rho1, rho2 = dom.rho_derivs(phi)
    c, s = np.cos(phi), np.sin(phi)
    tx = rho1 * c - rho * s
    ty = rho1 * s + rho * c
    speed = np.hypot(tx, ty)
    normal = np.stack([ty, -tx], axis=1) / speed[:, None]
    kappa = (rho**2 + 2 * rho1**2 - rho * rho2) / (rho**2 + rho1**2) ** 1.5
    points = np.asarray(dom.center) + np.stack([rho * c, rho * s], axis=1)
    return BoundaryGeometry(phi, points, normal, kappa, speed)


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Tensor-product grid on a :class:`StarDomain`.

    Arrays indexed ``[i, j]`` refer to ring ``i`` (``i = n_r - 1`` is the
    boundary) and angle ``j``; flattened node index is ``i * n_phi + j``.
    """

    domain: StarDomain
    n_r: int
    n_phi: int
    h: float
    s: np.ndarray
    phi: np.ndarray
    x: np.ndarray
    y: np.ndarray
    jacobian: np.ndarray
    weights: np.ndarray
    boundary: BoundaryGeometry
    boundary_weights: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_r * self.n_phi

    @property
    def dphi(self) -> float:
        return 2 * np.pi / self.n_phi

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[-1] = True
        return mask

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * np.asarray(f)))

    def integrate_boundary(self, f) -> float:
        return float(np.sum(self.boundary_weights * np.asarray(f)))


def radial_weights(n_r: int, h: float) -> np.ndarray:
    """Weights for ``int_0^1 F(s) ds`` with ``F`` vanishing linearly at 0.

    Trapezoid on ``[h/2, 1]``; the sliver ``[0, h/2]`` is lumped onto the
    first node, exact for ``F`` proportional to ``s``.
    """
    w = np.full(n_r, h)
    w[-1] = h / 2
    w[0] = h / 2 + h / 4
    return w


def make_grid(dom: StarDomain, n_r: int, n_phi: int) -> PolarGrid:
    if n_r < 8 or n_phi < 16 or n_phi % 2:
        raise ValueError(f"grid too small or n_phi odd: n_r={n_r}, n_phi={n_phi}")
    h = 1.0 / (n_r - 0.5)
    s = (np.arange(n_r) + 0.5) * h
    s[-1] = 1.0
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    rho = dom.rho(phi)
    S, PHI = np.meshgrid(s, phi, indexing="ij")
    R = S * rho[None, :]
    x = dom.center[0] + R * np.cos(PHI)
    y = dom.center[1] + R * np.sin(PHI)
    jac = S * rho[None, :] ** 2
    weights = radial_weights(n_r, h)[:, None] * jac * (2 * np.pi / n_phi)
    bgeo = boundary_geometry(dom, n_phi)
    bweights = bgeo.arclength * (2 * np.pi / n_phi)
    return PolarGrid(dom, n_r, n_phi, h, s, phi, x, y, jac, weights, bgeo, bweights)


@dataclass(frozen=True)
class ReferenceConstants:
    area: float
    perimeter: float
    R0: float
    H0: float


def reference_constants(dom: StarDomain, grid: PolarGrid) -> ReferenceConstants:
    area = float(grid.weights.sum())
    perimeter = float(grid.boundary_weights.sum())
    R0 = dom.n_ambient * area / perimeter
    return ReferenceConstants(area, perimeter, R0, 1.0 / R0)
