import numpy as np
import pytest

from spacelike.domain import disk, ellipse, make_grid
from spacelike.graphgeom import hyperboloid_cap, sampled_surface
from spacelike.surface_io import COLUMNS, dumps_surface, loads_surface, parse_header, read_surface, write_surface

SQRT2 = np.sqrt(2.0)


def test_round_trip_is_lossless():
    grid = make_grid(ellipse(1.0, 1.2), 8, 16)
    u = -0.3 + 0.1 * (grid.x**2 + grid.y**2)
    text = dumps_surface(sampled_surface(grid, u), {"note": "hello"})
    dump = loads_surface(text)
    np.testing.assert_array_equal(dump.u, u)
    assert dump.meta["note"] == "hello"
    assert dump.domain.preset == "ellipse"
    assert dump.grid.shape == grid.shape
    # re-serializing the rebuilt surface reproduces the text byte for byte
    assert dumps_surface(dump.surface(), {"note": "hello"}) == text


def test_layout():
    grid = make_grid(disk(1.0), 8, 16)
    lines = dumps_surface(hyperboloid_cap(grid, 0.0, -SQRT2), {"theta0": -SQRT2}).splitlines()
    assert lines[0] == "# spacelike surface dump"
    body = [ln for ln in lines if not ln.startswith("#")]
    assert tuple(body[0].split(",")) == COLUMNS
    assert len(body) == 1 + grid.size
    # the header keys are sorted
    keys = [ln[2:].split(" = ")[0] for ln in lines[1:] if ln.startswith("#")]
    assert keys == sorted(keys)


def test_cap_is_regenerated_analytically(tmp_path):
    grid = make_grid(disk(1.0), 8, 16)
    path = tmp_path / "cap.csv"
    write_surface(path, hyperboloid_cap(grid, 0.2, -SQRT2), {"c": 0.2, "theta0": -SQRT2})
    surf = read_surface(path).surface()
    assert surf.source == "analytic:cap"
    np.testing.assert_allclose(surf.u[-1], 0.2, atol=1e-15)


def test_header_parsing():
    meta, comments = parse_header(["# spacelike surface dump", "# a = [1, 2]", "# free text"])
    assert meta == {"a": [1, 2]}
    assert comments == ["free text"]
    with pytest.raises(ValueError):
        parse_header(["# a = {oops"])


def test_malformed_dumps_rejected():
    grid = make_grid(disk(1.0), 8, 16)
    text = dumps_surface(sampled_surface(grid, np.zeros(grid.shape)))
    with pytest.raises(ValueError, match="columns"):
        loads_surface(text.replace("lambda1", "lam1"))
    with pytest.raises(ValueError, match="rows"):
        loads_surface(text.rsplit("\n", 2)[0] + "\n")
    with pytest.raises(ValueError, match="n_r"):
        loads_surface("\n".join(ln for ln in text.splitlines() if not ln.startswith("# n_r")))
    with pytest.raises(ValueError, match="coordinates"):
        loads_surface(text.replace('"R": 1.0', '"R": 1.5'))
