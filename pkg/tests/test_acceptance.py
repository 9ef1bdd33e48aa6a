"""Acceptance suite: twelve criteria, each printed as one PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -s``) or directly with
``python tests/test_acceptance.py``.  Every check uses its stated tolerance;
a criterion that the implementation does not meet fails here rather than
being relaxed.
"""

from __future__ import annotations

import functools
import math
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from spacelike.cli import main as cli_main
from spacelike.cmc_solver import newton_solve, radial_exact
from spacelike.domain import disk, ellipse, make_grid
from spacelike.graphgeom import curvature_field, flat_surface, hyperboloid_cap, p_field_graph, trace_free_identity_check
from spacelike.identities import eval_fundamental, eval_heintze_karcher, eval_hk_deficit, eval_lemma33, eval_soap_bubble
from spacelike.selftest import run_suites
from spacelike.stability import disk_family, domain_sweep, ellipse_family, fourier_family, scaling_fit

SQRT2 = math.sqrt(2.0)
SAMPLES = 1000
SEED = 0

# curvature fields of every surface built below, for the trace-free check
_touched: dict[str, float] = {}


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d} ({self.title}): {self.detail}"


def _touch(label: str, cf) -> None:
    _touched[label] = trace_free_identity_check(cf)


def _order(errs) -> list[float]:
    e = np.asarray(errs, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


@functools.lru_cache(maxsize=None)
def solved(preset: str, params: tuple, n_r: int):
    dom = disk(*params) if preset == "disk" else ellipse(*params)
    grid = make_grid(dom, n_r, 2 * n_r)
    rep = newton_solve(dom, grid)
    surf = rep.surface
    cf = curvature_field(surf)
    _touch(f"solved {dom.describe()} {n_r}x{2 * n_r}", cf)
    return dom, grid, surf, cf, p_field_graph(surf, cf), rep


def cap(n_r: int, theta0: float = -SQRT2, c: float = 0.0, sampled: bool = False):
    dom = disk(math.sqrt(theta0**2 - 1))
    grid = make_grid(dom, n_r, 2 * n_r)
    surf = hyperboloid_cap(grid, c, theta0, sampled=sampled)
    cf = curvature_field(surf)
    _touch(f"cap theta0={theta0:.4f} {'sampled ' if sampled else ''}{n_r}x{2 * n_r}", cf)
    return dom, grid, surf, cf, p_field_graph(surf, cf)


@functools.lru_cache(maxsize=None)
def full_sweep():
    """Ellipse and Fourier families at the default 48x96 grid, with wall time."""
    t0 = time.perf_counter()
    ell = domain_sweep(ellipse_family())
    four = domain_sweep(fourier_family(seed=SEED))
    elapsed = time.perf_counter() - t0
    for row in ell + four:
        if row.converged:
            _touched[f"sweep {row.member.preset} {row.member.param}"] = row.trace_free_residual
    return ell, four, elapsed


# --- criteria -----------------------------------------------------------------


def criterion_01() -> Outcome:
    t0 = time.perf_counter()
    res = run_suites(SEED, SAMPLES, ["sym_oracle", "newton_contractions"])
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in res) and elapsed < 10
    detail = ", ".join(f"{r.name} worst {r.worst:.2e}" for r in res) + f"; {elapsed:.2f} s (limit 10 s)"
    return Outcome(1, "symmetric-function oracle", ok, detail)


def criterion_02() -> Outcome:
    (r,) = run_suites(SEED, SAMPLES, ["gauss_map"])
    return Outcome(2, "Gauss-map identity", r.passed, f"worst relative gap {r.worst:.2e} (limit 1e-8) over {r.samples} SPD matrices")


def criterion_03() -> Outcome:
    (r,) = run_suites(SEED, SAMPLES, ["maclaurin_margins"])
    return Outcome(3, "Newton-MacLaurin margins", r.passed, f"{r.detail} (limits -1e-10 and 1e-12)")


def criterion_04() -> Outcome:
    t0 = time.perf_counter()
    errs = []
    for n_r in (32, 64):
        *_, cf, _ = cap(n_r, sampled=True)
        errs.append(float(np.max(np.linalg.norm(cf.A - np.eye(2), axis=(-2, -1)))))
    elapsed = time.perf_counter() - t0
    ratio = errs[0] / errs[1]
    ok = 3.5 <= ratio <= 4.5 and elapsed < 5
    return Outcome(4, "sampled cap shape operator", ok, f"max|A-I| {errs[0]:.3e} -> {errs[1]:.3e}, ratio {ratio:.2f} (want [3.5, 4.5]); {elapsed:.2f} s (limit 5 s)")


def criterion_05() -> Outcome:
    # make sure the suite's standard surfaces are present even when run alone
    cap(32)
    cap(32, sampled=True)
    grid = make_grid(disk(1.0), 16, 32)
    _touch("flat 16x32", curvature_field(flat_surface(grid)))
    solved("disk", (1.0,), 32)
    solved("ellipse", (1.0, 1.2), 32)
    worst_label = max(_touched, key=_touched.get)
    worst = _touched[worst_label]
    ok = worst < 1e-10 and all(math.isfinite(v) for v in _touched.values())
    return Outcome(5, "trace-free algebraic identity", ok, f"{len(_touched)} surfaces, worst {worst:.2e} on {worst_label} (limit 1e-10)")


def criterion_06() -> Outcome:
    errs, iters, resid = [], [], []
    for n_r in (32, 64):
        dom, grid, surf, cf, pf, rep = solved("disk", (1.0,), n_r)
        exact = radial_exact(1.0, 2).u(np.hypot(grid.x, grid.y))
        errs.append(float(np.max(np.abs(rep.u - exact))))
        iters.append(rep.iterations)
        resid.append(rep.residual)
    ratio = errs[0] / errs[1]
    ok = max(iters) <= 12 and max(resid) <= 1e-10 and 3.5 <= ratio <= 4.5
    return Outcome(
        6,
        "CMC solver vs radial oracle",
        ok,
        f"iterations {iters} (limit 12), residuals {[f'{r:.1e}' for r in resid]} (limit 1e-10), "
        f"max error {errs[0]:.3e} -> {errs[1]:.3e}, ratio {ratio:.2f} (want [3.5, 4.5])",
    )


SOAP_TERMS = ("volume_term", "flux_term", "curvature_deficit")
HK_TERMS = ("volume_term", "boundary_term", "hk_deficit")


def criterion_07() -> Outcome:
    dom, grid, surf, cf, pf, _ = solved("disk", (1.0,), 64)
    sb = eval_soap_bubble(surf, cf, pf, dom, grid)
    hk = eval_heintze_karcher(surf, cf, pf, dom, grid)
    vals = {f"soap_bubble.{k}": sb.terms[k] for k in SOAP_TERMS}
    vals.update({f"heintze_karcher.{k}": hk.terms[k] for k in HK_TERMS})
    vals["soap_bubble.residual"] = sb.residual
    vals["heintze_karcher.residual"] = hk.residual
    worst = max(vals, key=lambda k: abs(vals[k]))
    ok = all(abs(v) < 1e-6 for v in vals.values()) and sb.valid and hk.valid
    return Outcome(7, "soap-bubble and HK identities on the disk", ok, f"largest |term| {abs(vals[worst]):.2e} ({worst}) at 64x128 (limit 1e-6)")


def criterion_08() -> Outcome:
    grids = (32, 64, 128)
    rel = {flag: [] for flag in ("euclid", "metric", "covariant")}
    bdev = []
    for n_r in grids:
        dom, grid, surf, cf, pf, _ = solved("ellipse", (1.0, 1.2), n_r)
        for flag in rel:
            rep = eval_fundamental(surf, cf, pf, dom, grid, 0.0, flag)
            rel[flag].append(rep.relative_residual)
            if flag == "euclid":
                bdev.append(rep.terms["boundary_deviation"])
    orders = {flag: _order(v) for flag, v in rel.items()}
    winners = [f for f in ("euclid", "metric") if min(orders[f]) >= 1.0]
    bd_order = min(_order(bdev))
    ok = bool(winners) and bd_order >= 1.8
    parts = [f"{f} rel {['%.2e' % x for x in rel[f]]} orders {['%.2f' % o for o in orders[f]]}" for f in ("euclid", "metric")]
    parts.append(f"boundary raw-vs-simplified {['%.1e' % x for x in bdev]} order {bd_order:.2f} (want >= 1.8)")
    parts.append(f"[info] covariant rel {['%.2e' % x for x in rel['covariant']]} orders {['%.2f' % o for o in orders['covariant']]}")
    return Outcome(8, "fundamental identity on ellipse(1,1.2)", ok, "; ".join(parts))


def criterion_09() -> Outcome:
    ell, four, _ = full_sweep()
    (drow,) = domain_sweep(disk_family())
    rows = ell + four + [drow]
    sweep_min = min(r.report.hk_deficit for r in rows if r.converged)
    all_conv = all(r.converged for r in rows)
    disk_def = [abs(eval_hk_deficit(make_grid(disk(R), 64, 128)).margin) for R in (1.0, 2.0)] + [abs(drow.report.hk_deficit)]
    dom, grid, surf, cf, pf, _ = solved("ellipse", (1.0, 1.2), 64)
    hk = eval_heintze_karcher(surf, cf, pf, dom, grid)
    deficit = eval_hk_deficit(grid).margin
    ok = all_conv and sweep_min >= -1e-6 and max(disk_def) <= 1e-6 and deficit > 10 * hk.residual
    return Outcome(
        9,
        "Heintze-Karcher deficit",
        ok,
        f"sweep min deficit {sweep_min:.3e} (want >= -1e-6, all converged: {all_conv}); disk |deficit| max {max(disk_def):.1e} (limit 1e-6); "
        f"ellipse(1,1.2) deficit {deficit:.4f} vs 10x HK identity residual {10 * hk.residual:.4f}",
    )


def criterion_10() -> Outcome:
    ell, four, elapsed = full_sweep()
    members = [r for r in ell if r.member.param >= 1.05 - 1e-12]
    bad = [r.member.param for r in members if not r.satisfied("bound53")]
    worst = min(members, key=lambda r: r.report.margin("bound53") + r.tolerance() if r.converged else -math.inf)
    fit = scaling_fit(four)
    ok = not bad and abs(fit.slope - 1.0) <= 0.2 and elapsed < 300 and all(r.converged for r in four)
    tight = worst.report.margin("bound53") if worst.converged else math.nan
    return Outcome(
        10,
        "stability bound and scaling",
        ok,
        f"bound holds on {len(members) - len(bad)}/{len(members)} ellipses (tightest margin {tight:.3e} at b/a={worst.member.param}); "
        f"Fourier log-log slope {fit.slope:.3f} (want 1.0 +- 0.2); sweep {elapsed:.1f} s (limit 300 s)",
    )


def criterion_11() -> Outcome:
    (r,) = run_suites(SEED, SAMPLES, ["quotient_weight_signs"])
    worst = 0.0
    for theta0 in (-SQRT2, -2.0):
        dom, grid, surf, cf, pf = cap(32, theta0=theta0, c=0.3)
        for k, l in ((1, 0), (2, 0), (2, 1)):
            worst = max(worst, eval_lemma33(surf, cf, dom, grid, k, l, c=0.3).residual)
    ok = r.passed and worst < 1e-6
    return Outcome(11, "quotient weight signs", ok, f"max(M-Q) {r.worst:.2e} (limit 1e-10), {r.detail}; cap integrated residual {worst:.2e} (limit 1e-6)")


def criterion_12() -> Outcome:
    with tempfile.TemporaryDirectory() as tmp:
        dump = Path(tmp) / "flat.csv"
        gen = cli_main(["gen", "--flat", "--n-r", "16", "--n-phi", "32", "--out", str(dump)])
        code = cli_main(["verify", "--input", str(dump), "--id", "54", "--out", str(Path(tmp) / "v.csv")])
    dom, grid, surf, cf, pf, _ = solved("ellipse", (1.0, 1.2), 32)
    gap = eval_soap_bubble(surf, cf, pf, dom, grid).terms["min_H_minus_H0"]
    ok = gen == 0 and code == 5 and gap < 0
    return Outcome(12, "negative controls", ok, f"flat verify exit {code} (want 5); ellipse min(H - H0) {gap:.4f} (want < 0)")


# criterion 5 goes last so that it sees every surface the others built
ORDER = (1, 2, 3, 4, 6, 7, 8, 9, 10, 11, 12, 5)
CRITERIA = {n: globals()[f"criterion_{n:02d}"] for n in ORDER}


def _report(out: Outcome, capsys=None) -> None:
    if capsys is None:
        print(out.line(), flush=True)
    else:
        with capsys.disabled():
            print("\n" + out.line(), flush=True)


@pytest.mark.slow
@pytest.mark.parametrize("number", ORDER, ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, capsys):
    out = CRITERIA[number]()
    _report(out, capsys)
    assert out.passed, out.line()


if __name__ == "__main__":
    results = [CRITERIA[n]() for n in ORDER]
    for out in sorted(results, key=lambda o: o.number):
        _report(out)
    sys.exit(0 if all(o.passed for o in results) else 1)
