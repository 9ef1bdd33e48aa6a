"""Plain-text surface dumps.

A dump is a CSV table with one row per grid node, ring by ring, preceded by
``#`` comment lines of the form ``# key = <json value>``.  The comments carry
everything needed to rebuild the domain and grid, so a dump can be read back
without any side information.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .domain import PolarGrid, StarDomain, make_domain, make_grid
from .graphgeom import (
    GraphSurface,
    curvature_field,
    flat_surface,
    hyperboloid_cap,
    p_field_graph,
    sampled_surface,
)

COLUMNS = ("s", "phi", "x1", "x2", "u", "u_x1", "u_x2", "w", "lambda1", "lambda2", "S1", "S2", "P")
MAGIC = "spacelike surface dump"


def domain_spec(dom: StarDomain) -> dict:
    return {"preset": dom.preset, "params": dom.params, "center": list(dom.center)}


def domain_from_spec(spec: dict) -> StarDomain:
    return make_domain(spec["preset"], tuple(spec.get("center", (0.0, 0.0))), **spec["params"])


def format_header(meta: dict) -> str:
    lines = [f"# {MAGIC}"]
    for key in sorted(meta):
        lines.append(f"# {key} = {json.dumps(meta[key], sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "%.17g" % x


def surface_table(surf: GraphSurface) -> np.ndarray:
    """Node table with the columns of :data:`COLUMNS`."""
    grid = surf.grid
    cf = curvature_field(surf)
    pf = p_field_graph(surf, cf)
    lam = np.sort(cf.lam, axis=-1)
    S, PHI = np.meshgrid(grid.s, grid.phi, indexing="ij")
    cols = [S, PHI, grid.x, grid.y, surf.u, surf.Du[..., 0], surf.Du[..., 1], surf.w, lam[..., 0], lam[..., 1], cf.S1, cf.S2, pf.P]
    return np.stack([np.asarray(c, dtype=float).ravel() for c in cols], axis=1)


def dumps_surface(surf: GraphSurface, meta: dict | None = None) -> str:
    """Serialize ``surf``; ``meta`` is merged over the grid and domain description."""
    grid = surf.grid
    head = {
        "version": __version__,
        "domain": domain_spec(grid.domain),
        "n_r": grid.n_r,
        "n_phi": grid.n_phi,
        "source": surf.source,
    }
    head.update(meta or {})
    buf = io.StringIO()
    buf.write(format_header(head))
    buf.write(",".join(COLUMNS) + "\n")
    for row in surface_table(surf):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_surface(path, surf: GraphSurface, meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_surface(surf, meta))


@dataclass
class SurfaceDump:
    meta: dict
    table: dict[str, np.ndarray]
    domain: StarDomain
    grid: PolarGrid
    comments: list[str] = field(default_factory=list)

    @property
    def u(self) -> np.ndarray:
        return self.table["u"].reshape(self.grid.shape)

    @property
    def c(self) -> float:
        return float(self.meta.get("c", 0.0))

    def surface(self) -> GraphSurface:
        """Rebuild the surface.

        Analytic sources are regenerated from their closed form so that a
        dumped cap verifies to machine precision; anything else is treated as
        nodal heights and differentiated on the grid.
        """
        source = str(self.meta.get("source", ""))
        if source == "analytic:cap":
            return hyperboloid_cap(self.grid, self.c, float(self.meta["theta0"]))
        if source == "analytic:flat":
            return flat_surface(self.grid, self.c)
        return sampled_surface(self.grid, self.u, source=source or "sampled")


def parse_header(lines) -> tuple[dict, list[str]]:
    meta: dict = {}
    comments: list[str] = []
    for line in lines:
        body = line[1:].strip()
        if body == MAGIC:
            continue
        key, sep, value = body.partition("=")
        if not sep:
            comments.append(body)
            continue
        try:
            meta[key.strip()] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad header value for {key.strip()!r}: {exc}") from None
    return meta, comments


def loads_surface(text: str) -> SurfaceDump:
    lines = text.splitlines()
    head = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    meta, comments = parse_header(head)
    for key in ("domain", "n_r", "n_phi"):
        if key not in meta:
            raise ValueError(f"surface dump lacks the {key!r} header")
    reader = csv.reader(body)
    columns = next(reader, None)
    if columns is None or tuple(columns) != COLUMNS:
        raise ValueError(f"unexpected columns {columns}")
    data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    dom = domain_from_spec(meta["domain"])
    grid = make_grid(dom, int(meta["n_r"]), int(meta["n_phi"]))
    if data.shape != (grid.size, len(COLUMNS)):
        raise ValueError(f"expected {grid.size} node rows, found {data.shape[0]}")
    table = {name: data[:, i] for i, name in enumerate(COLUMNS)}
    if not np.allclose(table["x1"], grid.x.ravel(), rtol=0, atol=1e-9) or not np.allclose(table["x2"], grid.y.ravel(), rtol=0, atol=1e-9):
        raise ValueError("node coordinates do not match the grid described in the header")
    return SurfaceDump(meta, table, dom, grid, comments)


def read_surface(path) -> SurfaceDump:
    with open(path) as fh:
        return loads_surface(fh.read())
