import pytest

from sonicflow import pde2d
from sonicflow.gasdyn import GasModel
from sonicflow.grid import StripGrid, lift_symmetric
from sonicflow.nozzle import make_profile
from sonicflow.symmetric import build_symmetric_flow


@pytest.fixture(scope="session")
def gas():
    return GasModel(1.4, 1.2)


@pytest.fixture(scope="session")
def profile():
    return make_profile(0.25, 2)


def lifted(gas, profile, nx, ny, refine=16):
    grid = StripGrid(nx, ny)
    flow = build_symmetric_flow(gas, profile, refine * (nx - 1) + 1)
    return grid, flow, lift_symmetric(flow, grid)


@pytest.fixture(scope="session")
def coarse_solution(gas, profile):
    grid, flow, lift = lifted(gas, profile, 33, 16)
    rep = pde2d.newton_solve(lift, gas, profile, grid, pde2d.BoundaryData.symmetric(gas, profile))
    return grid, flow, lift, rep


@pytest.fixture(scope="session")
def fine_solution(gas, profile):
    grid, flow, lift = lifted(gas, profile, 65, 32)
    rep = pde2d.newton_solve(lift, gas, profile, grid, pde2d.BoundaryData.symmetric(gas, profile))
    return grid, flow, lift, rep
