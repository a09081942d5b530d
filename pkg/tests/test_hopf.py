import json

import numpy as np
import pytest

from sonicflow import hopf, linop, pde2d
from sonicflow.errors import (ConditionFailed, InvalidParameter, NonzeroC, NotAnExtremum,
                              RectangleVanished)
from sonicflow.grid import ScalarField

ROT = [[0.0, 1.0], [-1.0, 0.0]]  # z = (y, -x): exit x = 1 becomes the graph z2 = -1


def heat_like(beta=1.0, a22=1.0):
    return hopf.DegenOperator.constant([[0.0, 0.0], [0.0, a22]], [-beta, 0.0]).affine(ROT)


def test_flatten_flat_is_identity():
    a = np.array([[2.0, 0.3], [0.3, 1.0]])
    op = hopf.DegenOperator.constant(a, [0.4, -0.7])
    alpha, beta = hopf.flatten(op, hopf.BoundaryPatch.flat([0.2, 0.0]))
    np.testing.assert_array_equal(alpha, a)
    np.testing.assert_array_equal(beta, [0.4, -0.7])


def test_heat_like_orientation():
    op = heat_like(beta=1.0)
    alpha, beta = hopf.flatten(op, hopf.BoundaryPatch.flat([0.0, -1.0]))
    assert beta[-1] == 1.0
    np.testing.assert_array_equal(alpha, [[1.0, 0.0], [0.0, 0.0]])


def test_curvature_term():
    kappa = 0.7
    op = hopf.DegenOperator.constant(np.eye(2), [0.0, 0.0])
    patch = hopf.BoundaryPatch.quadratic([0.0, 0.0], [[kappa]])
    _, beta = hopf.flatten(op, patch)
    assert beta[-1] == pytest.approx(-kappa, abs=1e-15)
    assert hopf.hopf_condition(op, patch) == pytest.approx(-kappa, abs=1e-15)


@pytest.mark.parametrize("case, expected", [
    (lambda: (heat_like(0.8), hopf.BoundaryPatch.flat([0.0, -1.0])), 0.8),
    (lambda: (hopf.DegenOperator.constant(np.eye(2), [0.0, 0.0]),
              hopf.BoundaryPatch.flat([0.0, 0.0])), 0.0),
])
def test_condition_values(case, expected):
    op, patch = case()
    value = hopf.hopf_condition(op, patch)
    assert value == pytest.approx(expected, abs=1e-15)
    assert abs(value - hopf.flatten(op, patch)[1][-1]) <= 1e-12


def test_condition_matches_flatten_on_tilted_patch():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = rng.normal(size=(3, 3))
        op = hopf.DegenOperator.constant(m @ m.T, rng.normal(size=3))
        patch = hopf.BoundaryPatch.quadratic(np.array([0.1, -0.2, 0.0]), np.diag(rng.normal(size=2)))
        P = patch.P.copy()
        # tilt: linear term through a shifted quadratic centre
        tilted = hopf.BoundaryPatch(
            P, lambda s: patch.f(s) + 0.3 * (s[0] - P[0]),
            lambda s: patch.grad_f(s) + np.array([0.3, 0.0]), patch.hess_f)
        for pt in (patch, tilted):
            assert abs(hopf.hopf_condition(op, pt) - hopf.flatten(op, pt)[1][-1]) <= 1e-12


def test_nonzero_c():
    op = hopf.DegenOperator.constant(np.eye(2), [0.0, 1.0], c=-0.5)
    patch = hopf.BoundaryPatch.flat([0.0, 0.0])
    with pytest.raises(NonzeroC):
        hopf.hopf_condition(op, patch)
    assert hopf.hopf_condition(op, patch, mode="nonpositive_c", u_at_P=-1.0) == 1.0
    with pytest.raises(NonzeroC):
        hopf.hopf_condition(op, patch, mode="nonpositive_c", u_at_P=1.0)
    with pytest.raises(NonzeroC):
        hopf.hopf_condition(hopf.DegenOperator.constant(np.eye(2), [0, 1], c=0.5), patch,
                            mode="nonpositive_c", u_at_P=-1.0)


def test_patch_must_contain_point():
    with pytest.raises(InvalidParameter):
        hopf.BoundaryPatch(np.array([0.0, 1.0]), lambda s: 0.0, lambda s: np.zeros(1),
                           lambda s: np.zeros((1, 1)))


@pytest.mark.parametrize("tr, bn, mu, lh", [(1.0, 1.0, 6.0, 4.0), (0.0, 1.0, 2.0, 2.0)])
def test_choose_mu_examples(tr, bn, mu, lh):
    alpha = np.diag([tr, 0.0])
    got = hopf.choose_mu(alpha, np.array([0.0, bn]))
    assert got == mu
    assert -2 * tr + got * bn == lh


def test_choose_mu_postcondition_exact():
    rng = np.random.default_rng(1)
    for _ in range(500):
        tr = rng.uniform(0, 10)
        bn = 10 ** rng.uniform(-6, 2)
        mu = hopf.choose_mu(np.diag([tr, 0.0]), np.array([0.0, bn]))
        assert -2 * tr + mu * bn >= 2.0


@pytest.mark.parametrize("bn", [0.0, -1.0])
def test_choose_mu_requires_positive_drift(bn):
    with pytest.raises(ConditionFailed):
        hopf.choose_mu(np.eye(2), np.array([0.0, bn]))


def test_barrier_constant_coefficients():
    op = heat_like(1.0)
    patch = hopf.BoundaryPatch.flat([0.0, -1.0])
    alpha, beta = hopf.flatten(op, patch)
    mu = hopf.choose_mu(alpha, beta)
    for d in (0.01, 0.3, 1.0):
        ok, worst = hopf.verify_barrier(op, patch, mu, [d, d])
        # L h = -2 tr(alpha) + beta . grad h, minimized at the far corner
        assert ok
        assert worst == pytest.approx(-2 * np.trace(alpha) + beta[-1] * (mu - 2 * d)
                                      - 2 * abs(beta[0]) * d)


def test_barrier_linear_coefficients_shrink():
    op = hopf.DegenOperator(
        2, lambda z: np.diag([1.0 + 0.5 * z[0], max(z[1], 0.0)]),
        lambda z: np.array([0.0, 1.0 - 3.0 * z[1]]))
    rep = hopf.analyze(op, hopf.BoundaryPatch.flat([0.0, 0.0]))
    assert rep.barrier_ok
    assert rep.mu == 6.0
    assert rep.d1_dims[1] <= 0.5


def test_barrier_needs_sub_scale_box():
    # beta_n(O) = 1 but beta_n < 0 once |y1| > 0.0707
    op = hopf.DegenOperator(2, lambda z: np.zeros((2, 2)),
                            lambda z: np.array([0.0, 1.0 - 200.0 * z[0] ** 2]))
    patch = hopf.BoundaryPatch.flat([0.0, 0.0])
    rep = hopf.analyze(op, patch)
    assert rep.barrier_ok
    assert rep.d1_dims[0] < 0.1
    assert rep.shrink_steps >= 1


def test_rectangle_vanishes():
    # Lh(O) > 0 but every off-axis sample sees a strongly negative tangential drift
    op = hopf.DegenOperator(2, lambda z: np.zeros((2, 2)),
                            lambda z: np.array([1e9 * np.sign(z[0]), 1.0]))
    patch = hopf.BoundaryPatch.flat([0.0, 0.0])
    with pytest.raises(RectangleVanished):
        hopf.find_barrier_rectangle(op, patch, 2.0, [0.5, 0.5])


def test_inapplicable_report_has_no_barrier():
    rep = hopf.analyze(hopf.DegenOperator.constant(np.eye(2), [0.0, 0.0]),
                       hopf.BoundaryPatch.flat([0.0, 0.0]))
    assert rep.condition_value == 0.0
    assert rep.mu is None and rep.barrier_ok is None
    assert set(json.loads(rep.to_json())) == {"condition_value", "mu", "barrier_ok",
                                              "d1_dims", "alpha_trace", "beta_n"}


def test_affine_translation_invariance():
    op = hopf.DegenOperator.constant([[1.0, 0.2], [0.2, 0.5]], [0.3, 0.9])
    patch = hopf.BoundaryPatch.quadratic([0.0, 0.0], [[0.4]])
    shift = np.array([2.0, -1.0])
    moved = op.affine(np.eye(2), shift)
    moved_patch = hopf.BoundaryPatch.quadratic(shift, [[0.4]])
    assert hopf.hopf_condition(moved, moved_patch) == pytest.approx(
        hopf.hopf_condition(op, patch), abs=1e-14)


def test_semidefiniteness_preserved():
    rng = np.random.default_rng(2)
    for _ in range(50):
        v = rng.normal(size=3)
        a = np.outer(v, v)  # rank one
        op = hopf.DegenOperator.constant(a, np.zeros(3))
        patch = hopf.BoundaryPatch.quadratic(np.zeros(3), rng.normal(size=(2, 2)))
        pts = [patch.to_x(y) for y in rng.uniform(0, 0.2, size=(9, 3))]
        assert op.is_semidefinite(pts)
        alpha, _ = hopf.flatten(op, patch)
        assert np.linalg.eigvalsh(alpha).min() >= -1e-10


def test_boundary_derivative_rates():
    patch = hopf.BoundaryPatch.flat([0.0, 0.0])
    up = lambda x: x[1] + x[1] ** 2
    assert hopf.boundary_derivative_check(up, patch, "min") == pytest.approx(1.0, abs=1e-9)
    down = lambda x: -(x[1] + x[1] ** 2)
    assert hopf.boundary_derivative_check(down, patch, "max") == pytest.approx(-1.0, abs=1e-9)
    with pytest.raises(NotAnExtremum):
        hopf.boundary_derivative_check(lambda x: x[0] + x[1], patch, "min")
    with pytest.raises(InvalidParameter):
        hopf.boundary_derivative_check(up, patch, "saddle")


def test_exit_extremum_rate_on_polynomial():
    from sonicflow.grid import StripGrid
    g = StripGrid(33, 8)
    psi = ScalarField.from_function(g, lambda X, Y: (1 - X) + (1 - X) ** 2 + 0 * Y)
    rate, node = hopf.exit_extremum_rate(psi, "min")
    assert rate == pytest.approx(1.0, abs=1e-12)
    assert node[0] == 32


def test_linearized_exit_operator_is_applicable(gas, profile):
    op, patch = linop.exit_operator(gas, profile)
    rep = hopf.analyze(op, patch)
    assert rep.condition_value == pytest.approx(-linop.closed_form_exit_drift(gas, profile), rel=1e-6)
    assert rep.barrier_ok


@pytest.mark.slow
def test_solution_difference_has_flat_exit_rate(gas, profile, coarse_solution):
    grid, _, lift, rep = coarse_solution
    start = lift + pde2d.smooth_perturbation(grid, 1e-2, seed=7)
    other = pde2d.newton_solve(start, gas, profile, grid, pde2d.BoundaryData.symmetric(gas, profile))
    assert other.converged
    psi = other.solution - rep.solution
    psi = ScalarField(grid, psi.values - psi.values.mean())
    for kind in ("min", "max"):
        rate, _ = hopf.exit_extremum_rate(psi, kind)
        assert abs(rate) < 10 * pde2d.SolverConfig().newton_tol
