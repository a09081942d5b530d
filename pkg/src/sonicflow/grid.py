"""Uniform grid on the periodic strip [0, 1] x [0, 2*pi) and its stencils.

Field values are stored as ``(nx, ny)`` arrays: axis 0 runs along x and
includes both boundaries, axis 1 runs along the periodic y direction.  All
x-derivatives are second order, one-sided at ``i = 0`` and ``i = nx - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidParameter



# One-sided second-order stencils (weights -3/2, 2, -1/2 and 2, -5, 4, -1),
# written in differences from the boundary value so constants map to exact 0.
def _one_sided_d1(v0, v1, v2):
    return 2.0 * (v1 - v0) - 0.5 * (v2 - v0)


def _one_sided_d2(v0, v1, v2, v3):
    return -5.0 * (v1 - v0) + 4.0 * (v2 - v0) - (v3 - v0)


@dataclass(frozen=True)
class StripGrid:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3:
            raise InvalidParameter(f"nx must be >= 3, got {self.nx}")
        if self.ny < 4:
            raise InvalidParameter(f"ny must be >= 4, got {self.ny}")

    @property
    def hx(self) -> float:
        return 1.0 / (self.nx - 1)

    @property
    def hy(self) -> float:
        return 2.0 * np.pi / self.ny

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.hy * np.arange(self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def index(self, i: int, j: int) -> int:
        """Flat index with periodic wrap in j."""
        if not 0 <= i < self.nx:
            raise IndexError(f"i={i} outside [0, {self.nx})")
        return i * self.ny + (j % self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")


@dataclass
class ScalarField:
    grid: StripGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            self.values = self.values.reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("field contains non-finite values")

    @classmethod
    def from_function(cls, grid: StripGrid, fn) -> "ScalarField":
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).copy())

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - other)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + other)

    def to_csv(self, path) -> None:
        write_field_csv(self, path)


# ---------------------------------------------------------------- array stencils

def diff_x(v: np.ndarray, hx: float) -> np.ndarray:
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * hx)
    d[0] = _one_sided_d1(v[0], v[1], v[2]) / hx
    d[-1] = -_one_sided_d1(v[-1], v[-2], v[-3]) / hx
    return d


def diff_xx(v: np.ndarray, hx: float) -> np.ndarray:
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / hx**2
    if v.shape[0] >= 4:
        d[0] = _one_sided_d2(v[0], v[1], v[2], v[3]) / hx**2
        d[-1] = _one_sided_d2(v[-1], v[-2], v[-3], v[-4]) / hx**2
    else:
        d[0] = d[1]
        d[-1] = d[-2]
    return d


def diff_y(v: np.ndarray, hy: float) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * hy)


def diff_yy(v: np.ndarray, hy: float) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - 2.0 * v + np.roll(v, 1, axis=1)) / hy**2


def diff_xy(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    return diff_x(diff_y(v, hy), hx)


def gradients(field: ScalarField) -> dict[str, np.ndarray]:
    """All first and second differences of ``field`` as full arrays."""
    g, v = field.grid, field.values
    vy = diff_y(v, g.hy)
    return {
        "x": diff_x(v, g.hx),
        "y": vy,
        "xx": diff_xx(v, g.hx),
        "yy": diff_yy(v, g.hy),
        "xy": diff_x(vy, g.hx),
    }


# ------------------------------------------------------------ pointwise stencils

def _check(field: ScalarField, i: int, j: int) -> None:
    g = field.grid
    if not (0 <= i < g.nx and 0 <= j < g.ny):
        raise IndexError(f"node ({i}, {j}) outside {g.nx} x {g.ny} grid")


def _x_column(v: np.ndarray, i: int, j: int) -> np.ndarray:
    return v[:, j % v.shape[1]]


def _dx_at(col: np.ndarray, i: int, hx: float) -> float:
    n = col.shape[0]
    if i == 0:
        return float(_one_sided_d1(col[0], col[1], col[2])) / hx
    if i == n - 1:
        return -float(_one_sided_d1(col[n - 1], col[n - 2], col[n - 3])) / hx
    return (col[i + 1] - col[i - 1]) / (2.0 * hx)


def dx(field: ScalarField, i: int, j: int) -> float:
    _check(field, i, j)
    return _dx_at(_x_column(field.values, i, j), i, field.grid.hx)


def dxx(field: ScalarField, i: int, j: int) -> float:
    _check(field, i, j)
    col, hx, n = field.values[:, j], field.grid.hx, field.grid.nx
    if 0 < i < n - 1:
        return (col[i + 1] - 2.0 * col[i] + col[i - 1]) / hx**2
    if n < 4:
        k = 1 if i == 0 else n - 2
        return (col[k + 1] - 2.0 * col[k] + col[k - 1]) / hx**2
    idx = [0, 1, 2, 3] if i == 0 else [n - 1, n - 2, n - 3, n - 4]
    return float(_one_sided_d2(*col[idx])) / hx**2


def dy(field: ScalarField, i: int, j: int) -> float:
    _check(field, i, j)
    v, ny = field.values, field.grid.ny
    return (v[i, (j + 1) % ny] - v[i, (j - 1) % ny]) / (2.0 * field.grid.hy)


def dyy(field: ScalarField, i: int, j: int) -> float:
    _check(field, i, j)
    v, ny = field.values, field.grid.ny
    return (v[i, (j + 1) % ny] - 2.0 * v[i, j] + v[i, (j - 1) % ny]) / field.grid.hy**2


def dxy(field: ScalarField, i: int, j: int) -> float:
    _check(field, i, j)
    v, ny, hy = field.values, field.grid.ny, field.grid.hy
    col = (v[:, (j + 1) % ny] - v[:, (j - 1) % ny]) / (2.0 * hy)
    return _dx_at(col, i, field.grid.hx)


# -------------------------------------------------------------------- utilities

def inf_norm(field) -> float:
    v = field.values if isinstance(field, ScalarField) else np.asarray(field)
    return float(np.max(np.abs(v)))


def mean(field: ScalarField) -> float:
    return float(np.mean(field.values))


def lift_symmetric(flow, grid: StripGrid) -> ScalarField:
    """Interpolate the 1D potential onto the grid, constant along y."""
    spline = CubicSpline(flow.xs, flow.phi_b)
    col = spline(grid.x)
    # reproduce coinciding stations exactly
    hit = np.searchsorted(flow.xs, grid.x)
    for k, (xg, h) in enumerate(zip(grid.x, hit)):
        if h < len(flow.xs) and flow.xs[h] == xg:
            col[k] = flow.phi_b[h]
    return ScalarField(grid, np.repeat(col[:, None], grid.ny, axis=1))


def write_field_csv(field: ScalarField, path) -> None:
    g = field.grid
    with Path(path).open("w") as fh:
        fh.write(f"{g.nx},{g.ny}\n")
        for row in field.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_field_csv(path) -> ScalarField:
    lines = Path(path).read_text().splitlines()
    nx, ny = (int(s) for s in lines[0].split(","))
    vals = np.array([[float(s) for s in ln.split(",")] for ln in lines[1:]])
    return ScalarField(StripGrid(nx, ny), vals)
