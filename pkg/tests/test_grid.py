import numpy as np
import pytest

from sonicflow import grid as G
from sonicflow.errors import InvalidParameter
from sonicflow.grid import ScalarField, StripGrid

OPS = (G.dx, G.dxx, G.dy, G.dyy, G.dxy)


def test_grid_geometry():
    g = StripGrid(5, 8)
    assert g.hx == 0.25 and g.hy == pytest.approx(np.pi / 4)
    assert g.index(2, 8) == g.index(2, 0)
    assert g.index(1, -1) == g.index(1, 7)
    with pytest.raises(InvalidParameter):
        StripGrid(2, 8)
    with pytest.raises(InvalidParameter):
        StripGrid(5, 3)


def test_field_rejects_nonfinite():
    with pytest.raises(InvalidParameter):
        ScalarField(StripGrid(3, 4), np.full((3, 4), np.nan))


def test_constant_field_has_zero_derivatives():
    f = ScalarField(StripGrid(6, 8), np.full((6, 8), 3.7))
    for op in OPS:
        for i in range(6):
            assert op(f, i, 3) == 0.0


def test_linear_in_x_exact_everywhere():
    f = ScalarField.from_function(StripGrid(7, 8), lambda X, Y: X)
    for i in range(7):
        assert G.dx(f, i, 2) == pytest.approx(1.0, abs=1e-12)
        assert G.dxx(f, i, 2) == pytest.approx(0.0, abs=1e-9)


def test_quadratic_exactness_all_node_classes():
    g = StripGrid(7, 8)
    f = ScalarField.from_function(g, lambda X, Y: 2 * X**2 - X + 0.5)
    x = g.x
    for i in range(g.nx):
        assert G.dx(f, i, 0) == pytest.approx(4 * x[i] - 1, abs=1e-11)
        assert G.dxx(f, i, 0) == pytest.approx(4.0, abs=1e-9)


def test_mixed_derivative_with_periodic_factor():
    g = StripGrid(9, 64)
    f = ScalarField.from_function(g, lambda X, Y: X**2 * np.sin(Y))
    for i in (0, 4, 8):
        for j in (0, 10, 63):
            dyexact = np.sin(g.y[j] + g.hy) - np.sin(g.y[j] - g.hy)
            assert G.dxy(f, i, j) == pytest.approx(2 * g.x[i] * dyexact / (2 * g.hy), abs=1e-10)


def test_dyy_second_order():
    errs = []
    for ny in (32, 64):
        g = StripGrid(3, ny)
        f = ScalarField.from_function(g, lambda X, Y: np.sin(Y))
        j = ny // 4  # sin(y) = 1
        errs.append(abs(G.dyy(f, 1, j) + 1.0))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


def test_periodic_wrap_dy():
    g = StripGrid(3, 16)
    f = ScalarField.from_function(g, lambda X, Y: np.sin(Y))
    expected = np.sin(g.hy) / g.hy  # central difference of sin at 0
    assert G.dy(f, 1, 0) == pytest.approx(expected, abs=1e-14)


def test_index_out_of_range():
    f = ScalarField(StripGrid(3, 4), np.zeros((3, 4)))
    with pytest.raises(IndexError):
        G.dx(f, 3, 0)


def test_array_and_pointwise_stencils_agree():
    g = StripGrid(6, 8)
    rng = np.random.default_rng(1)
    f = ScalarField(g, rng.standard_normal(g.shape))
    d = G.gradients(f)
    for key, op in zip(("x", "xx", "y", "yy", "xy"), OPS):
        for i in range(g.nx):
            for j in range(g.ny):
                assert d[key][i, j] == pytest.approx(op(f, i, j), abs=1e-10)


def test_lift_properties(gas, profile):
    from sonicflow.symmetric import build_symmetric_flow
    flow = build_symmetric_flow(gas, profile, 65)
    g = StripGrid(33, 8)
    lift = G.lift_symmetric(flow, g)
    assert np.all(lift.values == lift.values[:, :1])
    assert flow.phi_b.min() <= G.mean(lift) <= flow.phi_b.max()
    assert G.inf_norm(lift.values[:, 0] - flow.phi_b[::2]) == 0.0


def test_field_csv_roundtrip(tmp_path):
    g = StripGrid(4, 5)
    f = ScalarField(g, np.arange(20.0).reshape(4, 5) / 7)
    f.to_csv(tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "4,5"
    back = G.read_field_csv(tmp_path / "f.csv")
    assert np.array_equal(back.values, f.values)
