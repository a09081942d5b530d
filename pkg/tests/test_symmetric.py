import csv

import numpy as np
import pytest

from sonicflow import gasdyn
from sonicflow.gasdyn import GasModel
from sonicflow.symmetric import (acceleration, build_symmetric_flow, critical_flux,
                                 exit_acceleration, speed_at)

from test_gasdyn import B0_125, RHO_SONIC, mp, mp_density

# 40-digit bisection of 1.0625 * g(u) = g* (x = 0.5, a = 0.25)
U_HALF = 0.77879732897856648


def test_critical_flux(gas, profile):
    assert critical_flux(gas, profile) == pytest.approx(RHO_SONIC, rel=1e-14)
    g2 = GasModel(2.0, 3.0)
    assert critical_flux(g2, profile) == pytest.approx(np.sqrt(2.0), rel=1e-14)
    from sonicflow.nozzle import make_profile
    assert critical_flux(gas, make_profile(0.7)) == critical_flux(gas, profile)


def test_u_half_oracle():
    lo, hi = mp.mpf(0), mp.mpf(1)
    target = mp_density(1.4, 1.2, 1) / mp.mpf("1.0625")
    for _ in range(140):
        mid = (lo + hi) / 2
        if mp_density(1.4, 1.2, mid) * mid < target:
            lo = mid
        else:
            hi = mid
    assert float(lo) == pytest.approx(U_HALF, abs=1e-16)


def test_speed_at(gas, profile):
    assert speed_at(gas, profile, 1.0) == 1.0
    assert speed_at(gas, profile, 0.0) == pytest.approx(gasdyn.entry_speed(gas, 1.25), abs=1e-10)
    assert speed_at(gas, profile, 0.0) == pytest.approx(B0_125, abs=1e-12)
    assert speed_at(gas, profile, 0.5) == pytest.approx(U_HALF, abs=1e-12)


def test_two_station_flow(gas, profile):
    flow = build_symmetric_flow(gas, profile, 2)
    assert flow.u[0] == pytest.approx(B0_125, abs=1e-12)
    assert flow.u[1] == 1.0


def test_flow_invariants(gas, profile):
    flow = build_symmetric_flow(gas, profile, 101)
    flux = profile.n(flow.xs) * flow.rho * flow.u
    assert np.max(np.abs(flux / flow.m - 1)) <= 1e-10
    assert np.all(np.diff(flow.u) > 0)
    assert np.all(flow.mach[:-1] < 1.0)
    assert flow.mach[-1] == pytest.approx(1.0, abs=1e-6)
    assert flow.u[0] < flow.phi_b[-1] < flow.u[-1]
    assert flow.phi_b[0] == 0.0
    np.testing.assert_allclose(flow.cs**2 + 0.2 * flow.u**2, 1.2, rtol=0, atol=1e-14)


def test_refinement_consistency(gas, profile):
    coarse = build_symmetric_flow(gas, profile, 101)
    fine = build_symmetric_flow(gas, profile, 1001)
    np.testing.assert_allclose(fine.u[::10], coarse.u, rtol=0, atol=1e-10)


def test_even_station_count_uses_trapezoid(gas, profile):
    flow = build_symmetric_flow(gas, profile, 100)
    ref = build_symmetric_flow(gas, profile, 2001)
    assert flow.phi_b[-1] == pytest.approx(ref.phi_b[-1], abs=1e-4)


def test_quadrature_converges(gas, profile):
    ref = build_symmetric_flow(gas, profile, 4097).phi_b[-1]
    e1 = abs(build_symmetric_flow(gas, profile, 33).phi_b[-1] - ref)
    e2 = abs(build_symmetric_flow(gas, profile, 65).phi_b[-1] - ref)
    assert e2 < e1 / 8


def test_exit_acceleration_closed_form(gas, profile):
    # u'(1)^2 = 2 a b1^2 / (gamma + 1); 40-digit finite difference gave 0.45643545...
    assert exit_acceleration(gas, profile) == pytest.approx(np.sqrt(0.5 / 2.4), rel=1e-15)
    x = 1 - 1e-4
    slope = (1.0 - speed_at(gas, profile, x)) / 1e-4
    assert slope == pytest.approx(exit_acceleration(gas, profile), rel=1e-3)


def test_acceleration_matches_finite_differences(gas, profile):
    xs = np.array([0.1, 0.5, 0.9, 0.99])
    h = 1e-5
    fd = np.array([(speed_at(gas, profile, x + h) - speed_at(gas, profile, x - h)) / (2 * h)
                   for x in xs])
    np.testing.assert_allclose(acceleration(gas, profile, xs), fd, rtol=1e-5)
    assert acceleration(gas, profile, 1.0) == pytest.approx(exit_acceleration(gas, profile))


def test_csv_export(gas, profile, tmp_path):
    flow = build_symmetric_flow(gas, profile, 11)
    path = tmp_path / "sym.csv"
    flow.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "u", "rho", "c", "mach", "phi"]
    assert len(rows) == 12
    assert float(rows[1][1]) == flow.u[0]
    assert float(rows[-1][5]) == flow.phi_b[-1]
