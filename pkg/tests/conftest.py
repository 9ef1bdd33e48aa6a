import functools

import numpy as np
import pytest
from hypothesis import settings

from spacelike.cmc_solver import newton_solve
from spacelike.domain import disk, ellipse, make_grid
from spacelike.graphgeom import curvature_field, p_field_graph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def solved(preset: str, params: tuple, n_r: int, n_phi: int):
    """Solve once per session: ``(dom, grid, surf, cf, pf, report)``."""
    dom = disk(*params) if preset == "disk" else ellipse(*params)
    grid = make_grid(dom, n_r, n_phi)
    rep = newton_solve(dom, grid)
    surf = rep.surface
    cf = curvature_field(surf)
    return dom, grid, surf, cf, p_field_graph(surf, cf), rep


@pytest.fixture(scope="session")
def solve_cached():
    return solved


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)
