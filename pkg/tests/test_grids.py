from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gagliardo.grids import GridFunction, GridSpec, load_grid_function, sample


def _padded(values: np.ndarray) -> np.ndarray:
    return np.pad(np.abs(values), 1)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((0.0,), 0.0, (3,))
    with pytest.raises(ValueError):
        GridSpec((0.0, 0.0), 1.0, (3,))


def test_covering():
    g = GridSpec.covering((-1.0,), (1.0,), 0.25)
    assert g.lo[0] == pytest.approx(-1.25)
    assert g.hi[0] >= 1.0 + 0.25 - 1e-12
    assert g.centers().shape == (g.size, 1)


def test_rejects_negative_with_cell_index():
    with pytest.raises(ValueError, match=r"cell \(2,\)"):
        GridFunction(GridSpec((0.0,), 1.0, (5,)), [0, 1, -1, 1, 0])


def test_rejects_nonzero_boundary():
    with pytest.raises(ValueError, match="boundary"):
        GridFunction(GridSpec((0.0,), 1.0, (3,)), [1, 1, 0])


@settings(max_examples=25, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(0, 1e6)))
def test_csv_and_binary_round_trip(tmp_path_factory, vals):
    v = _padded(vals)
    u = GridFunction(GridSpec((-0.5, 2.0), 0.125, v.shape), v)
    d = tmp_path_factory.mktemp("io")
    u.to_csv(d / "u.csv")
    u.to_binary(d / "u.bin")
    for path in (d / "u.csv", d / "u.bin"):
        back = load_grid_function(path)
        assert back.grid == u.grid
        assert np.array_equal(back.values, u.values)


def test_csv_errors_are_positional(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# gagliardo-gridfunction v1\nn,1\nshape,3\nlo,0.0\nh,1.0\nvalues\n0.0\nabc\n0.0\n")
    with pytest.raises(ValueError, match=r"bad.csv:8"):
        load_grid_function(p)
    with pytest.raises(FileNotFoundError):
        load_grid_function(tmp_path / "missing.csv")


def test_shift_and_padded_keep_values():
    u = GridFunction(GridSpec((0.0,), 0.5, (4,)), [0, 1, 2, 0])
    s = u.shift([3])
    assert s.grid.lo[0] == pytest.approx(1.5)
    assert np.array_equal(s.values, u.values)
    p = u.padded(1, 2)
    assert p.values.shape == (7,)
    assert p.grid.lo[0] == pytest.approx(-0.5)


@pytest.mark.parametrize("method", ["interp", "mean"])
@pytest.mark.parametrize("shape", [(10,), (11,), (9, 12)])
def test_coarsen_geometry(method, shape):
    g = GridSpec(tuple([0.0] * len(shape)), 0.1, shape)
    mid = np.array(shape) * 0.05
    u = sample(lambda X: np.maximum(0.0, 0.3**2 - np.sum((X - mid) ** 2, axis=1)), g)
    c = u.coarsen(method)
    assert c.h == pytest.approx(0.2)
    assert np.all(c.values >= 0)
    # the coarse cells tile a region containing the fine grid
    assert all(cl <= fl + 1e-12 for cl, fl in zip(c.grid.lo, g.lo))
    assert all(ch >= fh - 1e-12 for ch, fh in zip(c.grid.hi, g.hi))


def test_coarsen_interp_is_fourth_order_on_smooth_data():
    errs = []
    for h in (0.02, 0.01):
        g = GridSpec.covering((-1.0,), (1.0,), h, margin=3)
        f = lambda X: np.cos(np.pi * X[:, 0] / 2.0) ** 4 * (np.abs(X[:, 0]) < 1)  # noqa: E731
        c = sample(f, g).coarsen("interp")
        errs.append(np.max(np.abs(c.flat() - f(c.grid.centers()))))
    assert errs[1] < errs[0] / 8.0


def test_coarsen_mean_preserves_integral():
    u = GridFunction(GridSpec((0.0,), 0.25, (6,)), [0, 1, 3, 2, 5, 0])
    c = u.coarsen("mean")
    assert np.sum(c.values) * c.h == pytest.approx(np.sum(u.values) * u.h)
    with pytest.raises(ValueError):
        u.coarsen("cubic")
