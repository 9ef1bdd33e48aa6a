"""Quantitative rigidity estimates for CMC graphs and domain-family sweeps.

The trace-free norm ``||hbar||_{L^2}`` is bounded above by boundary
quantities that vanish exactly on balls.  Constants that the analytic
theory only asserts to exist (the gradient bounds ``K`` and ``Theta``) are
measured on the computed solution, which makes every bound falsifiable.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cmc_solver import SolverConfig, SolverError, newton_solve
from .domain import PolarGrid, StarDomain, disk, ellipse, fourier, make_grid
from .graphgeom import CurvatureField, GraphSurface, curvature_field, p_field_graph, trace_free_identity_check
from .identities import DEFAULT_FLAG, eval_fundamental

log = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "family_param",
    "area",
    "perimeter",
    "R0",
    "H0",
    "hbar_L2",
    "defL1",
    "defInf",
    "hk_deficit",
    "K",
    "Theta",
    "bound53",
    "margin53",
    "bound54a",
    "margin54a",
    "bound54c",
    "margin54c",
    "converged",
)
ZERO_DEFICIT = 1e-12


@dataclass
class StabilityReport:
    """Norms, measured constants and the bounds they enter.

    ``bound54a`` uses the grouping ``((n-1) int 1/H - n|Omega|)^(1/2)``
    and ``bound54a_alt`` the grouping ``((n-1)(int 1/H - n|Omega|))^(1/2)``.
    Fields that need a mean-convex boundary are NaN otherwise.
    """

    n: int
    area: float
    perimeter: float
    R0: float
    H0: float
    hbar_L2: float
    defL1: float
    defInf: float
    hk_deficit: float
    K: float
    Theta: float
    H_min: float
    bound53: float
    bound54a: float
    bound54a_alt: float
    bound54b: float
    bound54c: float
    scaling_ratio: float
    angle_defect_L1: float
    angle_bound_min: float
    height_bound_min: float
    mean_convex: bool

    def margin(self, name: str) -> float:
        return getattr(self, name) - self.hbar_L2

    @property
    def margins(self) -> dict[str, float]:
        return {k: self.margin(k) for k in ("bound53", "bound54a", "bound54a_alt", "bound54b", "bound54c")}

    def to_record(self) -> dict:
        rec = asdict(self)
        rec.update({f"margin_{k}": v for k, v in self.margins.items()})
        return rec


def _safe_sqrt(x: float) -> float:
    if x < 0:
        return 0.0 if x > -ZERO_DEFICIT else math.nan
    return math.sqrt(x)


def angle_bound_fields(surf: GraphSurface, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Two candidate lower bounds on ``(P + c)`` times an angle factor.

    Returns ``(P + c)/w - 1/(1 - |Du|^2)``, which the estimates rely on and
    which is nonnegative whenever ``u <= c``, and the height-weighted variant
    ``-<phi, E_{n+1}> (P + c) - 1/(1 - |Du|^2)`` with ``<phi, E_{n+1}> = -u``,
    which is not sign-definite.
    """
    w = surf.w
    Pc = c - surf.u + 1.0 / w
    target = 1.0 / w**2
    return Pc / w - target, surf.u * Pc - target


def stability_report(surf: GraphSurface, cf: CurvatureField, dom: StarDomain, grid: PolarGrid, c: float = 0.0) -> StabilityReport:
    n = cf.n
    area = grid.integrate(1.0)
    perimeter = float(np.sum(grid.boundary_weights))
    R0 = n * area / perimeter
    H0 = 1.0 / R0
    H = grid.boundary.curvature / (n - 1)
    bw = grid.boundary_weights

    hbar_L2 = math.sqrt(max(grid.integrate(cf.hbar2), 0.0))
    dev = H0 - H
    defL1 = float(np.sum(bw * np.abs(dev)))
    defInf = float(np.max(np.abs(dev)))
    K = float(np.max(1.0 / surf.w[-1]))
    Theta = 1.0 - float(np.max(surf.grad_norm[-1]))
    flux = surf.grad_norm[-1] / surf.w[-1]
    H_min = float(np.min(H))
    mean_convex = H_min > 0

    bound53 = math.sqrt(n - 1) * K * (1 - Theta) * math.sqrt(defL1)
    if mean_convex:
        inv_H = float(np.sum(bw / H))
        hk_deficit = inv_H - n * area
        bound54a = _safe_sqrt((n - 1) * inv_H - n * area)
        bound54a_alt = _safe_sqrt((n - 1) * hk_deficit)
        angle_defect = float(np.sum(bw * np.abs(1.0 / H - flux)))
        bound54b = math.sqrt(n - 1) * math.sqrt(angle_defect)
        bound54c = math.sqrt(n * (n - 1) * area / H_min) * math.sqrt(defInf)
    else:
        hk_deficit = bound54a = bound54a_alt = bound54b = bound54c = angle_defect = math.nan

    # 0/0 on the disk is reported as 0
    ratio = 0.0 if defL1 <= ZERO_DEFICIT else hbar_L2 / math.sqrt(defL1)
    good, height = angle_bound_fields(surf, c)
    return StabilityReport(
        n=n,
        area=area,
        perimeter=perimeter,
        R0=R0,
        H0=H0,
        hbar_L2=hbar_L2,
        defL1=defL1,
        defInf=defInf,
        hk_deficit=hk_deficit,
        K=K,
        Theta=Theta,
        H_min=H_min,
        bound53=bound53,
        bound54a=bound54a,
        bound54a_alt=bound54a_alt,
        bound54b=bound54b,
        bound54c=bound54c,
        scaling_ratio=ratio,
        angle_defect_L1=angle_defect,
        angle_bound_min=float(np.min(good)),
        height_bound_min=float(np.min(height)),
        mean_convex=mean_convex,
    )


# --- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepMember:
    param: float
    preset: str
    params: dict


@dataclass
class SweepRow:
    member: SweepMember
    converged: bool
    report: StabilityReport | None = None
    identity_residual: float = math.nan
    message: str = ""
    iterations: int = 0
    trace_free_residual: float = math.nan

    def tolerance(self) -> float:
        return 10.0 * self.identity_residual

    def satisfied(self, bound: str) -> bool:
        """Whether ``hbar_L2 <= bound + 10 * (identity residual)`` holds for this row."""
        if not self.converged or self.report is None:
            return False
        return self.report.margin(bound) >= -self.tolerance()

    def to_csv_row(self) -> dict:
        row = {k: math.nan for k in SWEEP_COLUMNS}
        row["family_param"] = self.member.param
        row["converged"] = int(self.converged)
        if self.report is not None:
            r = self.report
            row.update(
                area=r.area,
                perimeter=r.perimeter,
                R0=r.R0,
                H0=r.H0,
                hbar_L2=r.hbar_L2,
                defL1=r.defL1,
                defInf=r.defInf,
                hk_deficit=r.hk_deficit,
                K=r.K,
                Theta=r.Theta,
                bound53=r.bound53,
                margin53=r.margin("bound53"),
                bound54a=r.bound54a,
                margin54a=r.margin("bound54a"),
                bound54c=r.bound54c,
                margin54c=r.margin("bound54c"),
            )
        return row


def ellipse_family(ratios=None, a: float = 1.0) -> list[SweepMember]:
    """Ellipses with semi-axes ``a`` and ``a * ratio``; default ratios 1.0, 1.05, ..., 1.5."""
    if ratios is None:
        ratios = np.round(np.linspace(1.0, 1.5, 11), 10)
    return [SweepMember(float(r), "ellipse", {"a": a, "b": float(a * r)}) for r in ratios]


def fourier_family(amplitudes=(0.005, 0.01, 0.02, 0.04), seed: int = 0, modes=(2, 3, 4), radius: float = 1.0) -> list[SweepMember]:
    """Disk perturbations ``rho = radius + amp * f(phi)`` along one seeded direction.

    ``f`` mixes the given Fourier modes with random weights normalized so
    that ``max |f| = 1``.
    """
    rng = np.random.default_rng(seed)
    top = max(modes)
    cos_c = np.zeros(top)
    sin_c = np.zeros(top)
    for m in modes:
        cos_c[m - 1], sin_c[m - 1] = rng.normal(size=2)
    probe = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    k = np.arange(1, top + 1)[:, None]
    f = (cos_c[:, None] * np.cos(k * probe) + sin_c[:, None] * np.sin(k * probe)).sum(axis=0)
    scale = np.max(np.abs(f))
    cos_c, sin_c = cos_c / scale, sin_c / scale
    return [
        SweepMember(float(amp), "fourier", {"radius": radius, "cos": [float(amp * x) for x in cos_c], "sin": [float(amp * x) for x in sin_c]})
        for amp in amplitudes
    ]


def disk_family(R: float = 1.0) -> list[SweepMember]:
    """Single-member family; every deficit vanishes, so the row is a zero baseline."""
    return [SweepMember(float(R), "disk", {"R": float(R)})]


def _member_domain(member: SweepMember) -> StarDomain:
    p = member.params
    if member.preset == "disk":
        return disk(p["R"])
    if member.preset == "ellipse":
        return ellipse(p["a"], p["b"])
    if member.preset == "fourier":
        return fourier(p["radius"], p["cos"], p["sin"])
    raise ValueError(f"unknown sweep preset {member.preset!r}")


def run_member(member: SweepMember, n_r: int, n_phi: int, cfg: SolverConfig | None = None) -> SweepRow:
    """Solve one family member and compute its stability report."""
    cfg = cfg or SolverConfig()
    dom = _member_domain(member)
    grid = make_grid(dom, n_r, n_phi)
    try:
        sol = newton_solve(dom, grid, cfg)
    except SolverError as exc:
        log.warning("sweep member %s failed: %s", member.param, exc)
        return SweepRow(member, False, message=str(exc), iterations=exc.report.iterations)
    surf = sol.surface
    cf = curvature_field(surf)
    pf = p_field_graph(surf, cf)
    ident = eval_fundamental(surf, cf, pf, dom, grid, cfg.c, DEFAULT_FLAG)
    rep = stability_report(surf, cf, dom, grid, cfg.c)
    return SweepRow(member, True, rep, ident.residual, iterations=sol.iterations, trace_free_residual=trace_free_identity_check(cf))


def domain_sweep(members, n_r: int = 48, n_phi: int = 96, cfg: SolverConfig | None = None, workers: int = 1) -> list[SweepRow]:
    """Run every member; failures are recorded per row and the sweep continues.

    With ``workers > 1`` members are solved in separate processes.  Rows are
    always returned in input order.
    """
    members = list(members)
    if workers <= 1:
        return [run_member(m, n_r, n_phi, cfg) for m in members]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_member, m, n_r, n_phi, cfg) for m in members]
        return [f.result() for f in futures]


def sweep_csv(rows: list[SweepRow], header: str = "") -> str:
    """Render rows with the fixed column set; floats use ``repr`` for exact round-trips."""
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if k != "converged" else v) for k, v in row.to_csv_row().items()})
    return buf.getvalue()


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x`` over positive pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        raise ValueError("need at least two positive pairs for a slope")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


@dataclass
class ScalingFit:
    slope: float
    hbar2: list[float] = field(default_factory=list)
    defL1: list[float] = field(default_factory=list)


def scaling_fit(rows: list[SweepRow]) -> ScalingFit:
    """Slope of ``||hbar||^2_{L^2}`` against ``||H0 - H||_{L^1}`` over converged rows."""
    good = [r.report for r in rows if r.converged and r.report is not None]
    h2 = [r.hbar_L2**2 for r in good]
    d = [r.defL1 for r in good]
    return ScalingFit(loglog_slope(d, h2), h2, d)
