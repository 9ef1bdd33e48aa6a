import csv
import io
import math

import numpy as np
import pytest

from spacelike.domain import disk, make_grid
from spacelike.graphgeom import curvature_field, hyperboloid_cap
from spacelike.stability import (
    SWEEP_COLUMNS,
    SweepMember,
    disk_family,
    domain_sweep,
    ellipse_family,
    fourier_family,
    loglog_slope,
    run_member,
    scaling_fit,
    stability_report,
    sweep_csv,
)

SQRT2 = np.sqrt(2.0)


def test_disk_cap_is_the_rigidity_case():
    grid = make_grid(disk(1.0), 32, 64)
    surf = hyperboloid_cap(grid, 0.0, -SQRT2)
    rep = stability_report(surf, curvature_field(surf), grid.domain, grid)
    # square root of a roundoff-level integrand
    assert rep.hbar_L2 < 1e-7
    assert rep.defL1 < 1e-12 and rep.defInf < 1e-12
    assert abs(rep.hk_deficit) < 1e-12
    assert rep.scaling_ratio == 0.0
    # theta = -sqrt(2) on the boundary, so sqrt(theta^2 - 1) = 1 = 1/H
    assert rep.K == pytest.approx(SQRT2)
    assert abs(rep.angle_defect_L1) < 1e-12
    assert all(m >= -1e-12 for m in rep.margins.values())


def test_angle_bound_reading(solve_cached):
    dom, grid, surf, cf, pf, _ = solve_cached("ellipse", (1.0, 1.2), 32, 64)
    rep = stability_report(surf, cf, dom, grid)
    assert rep.angle_bound_min >= -1e-10
    assert rep.height_bound_min < 0  # the height-weighted variant is not a lower bound


@pytest.mark.parametrize("b", [1.1, 1.4])
def test_ellipse_margins_nonnegative(b):
    row = run_member(SweepMember(b, "ellipse", {"a": 1.0, "b": b}), 24, 48)
    assert row.converged
    r = row.report
    assert min(r.hbar_L2, r.defL1, r.defInf, r.hk_deficit) > 0
    for bound in ("bound53", "bound54a", "bound54c"):
        assert row.satisfied(bound)


def test_measured_gradient_constant_grows_with_eccentricity():
    k = [run_member(SweepMember(b, "ellipse", {"a": 1.0, "b": b}), 24, 48).report.K for b in (1.1, 1.4)]
    assert k[1] > k[0]


def test_family_definitions():
    ell = ellipse_family()
    assert len(ell) == 11
    assert ell[0].param == 1.0 and ell[-1].param == 1.5
    f1 = fourier_family(seed=5)
    f2 = fourier_family(seed=5)
    assert f1 == f2
    assert f1 != fourier_family(seed=6)
    # the perturbation direction is normalized so the amplitude is the max deviation
    from spacelike.domain import fourier

    dom = fourier(**{k: f1[-1].params[k] for k in ("radius", "cos", "sin")})
    phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    assert np.abs(dom.rho(phi) - 1.0).max() == pytest.approx(f1[-1].param, rel=1e-3)


def test_disk_sweep_single_zero_row():
    rows = domain_sweep(disk_family(), 24, 48)
    assert len(rows) == 1
    rec = rows[0].to_csv_row()
    for key in ("defL1", "defInf", "hk_deficit", "bound53", "bound54a", "bound54c"):
        assert abs(rec[key]) < 1e-6
    # discrete solution error only
    assert rec["hbar_L2"] < 1e-3
    assert rows[0].satisfied("bound53")


def test_sweep_csv_format_and_determinism():
    members = ellipse_family([1.0, 1.1])
    a = sweep_csv(domain_sweep(members, 16, 32), "seed = 0")
    b = sweep_csv(domain_sweep(members, 16, 32), "seed = 0")
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "# seed = 0"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [float(r["family_param"]) for r in rows] == [1.0, 1.1]


def test_failed_member_is_recorded_not_raised():
    from spacelike.cmc_solver import SolverConfig

    row = run_member(SweepMember(1.2, "ellipse", {"a": 1.0, "b": 1.2}), 16, 32, SolverConfig(max_newton_iters=1))
    assert not row.converged
    assert row.report is None
    assert math.isnan(row.to_csv_row()["hbar_L2"])
    assert not row.satisfied("bound53")


def test_parallel_sweep_matches_serial():
    members = ellipse_family([1.1, 1.2])
    serial = sweep_csv(domain_sweep(members, 16, 32))
    parallel = sweep_csv(domain_sweep(members, 16, 32, workers=2))
    assert serial == parallel


def test_loglog_slope():
    x = np.array([0.1, 0.2, 0.4])
    assert loglog_slope(x, 3 * x**2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        loglog_slope([1.0], [1.0])


def test_scaling_fit_on_small_fourier_family():
    rows = domain_sweep(fourier_family((0.01, 0.02), seed=1), 16, 32)
    fit = scaling_fit(rows)
    assert len(fit.hbar2) == 2
    # both sides scale with the amplitude: hbar^2 quadratically, the L1 deficit linearly
    assert fit.slope == pytest.approx(2.0, abs=0.2)
