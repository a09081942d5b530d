"""Discrete full-potential problem on the periodic strip and its Newton solver.

Unknown: nodal potential ``phi`` on a ``StripGrid``.  Rows of the discrete
system:

* interior nodes: the potential flow equation in non-divergence form with the
  sound speed from the Bernoulli law,
* ``i = 0``: entry Bernoulli condition ``|grad phi|^2 = B(y)`` (metric norm),
* ``i = nx - 1``: exit condition ``|grad phi|^2 = b1^2 (1 - eps)^2``,
* node ``(0, 0)``: replaced by the gauge pin ``phi(0, 0) = 0``.

Both ends carry Bernoulli data, so the problem is solvable only for
flux-compatible data.  The regularized problem therefore rescales the entry
data by the entry speed of the *discrete* symmetric flow with the same exit
speed (see ``compatible_entry_speed_sq``); for symmetric data this makes the
y-invariant discrete flow satisfy every row, including the one displaced by
the gauge pin.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import root
from scipy.sparse.linalg import spsolve

from . import gasdyn
from .errors import InvalidParameter, SonicExceeded, ToleranceNotReached
from .gasdyn import GasModel
from .grid import ScalarField, StripGrid, _one_sided_d1, diff_x, diff_xx, diff_y, diff_yy
from .nozzle import NozzleProfile

FD_STEP = 1e-7
GAUGE_NODE = (0, 0)
POLISH_STEPS = 2


@dataclass(frozen=True)
class BoundaryData:
    """Entry speed^2 ``B(y)`` and unregularized exit speed^2.

    ``entry_reference_sq`` is the unperturbed entry value ``b0^2``; the
    regularized solves rescale ``B`` by ``B_h(eps) / entry_reference_sq``.
    """
    entry_speed_sq: Callable[[np.ndarray], np.ndarray]
    exit_speed_sq: float
    entry_reference_sq: float
    label: str = "symmetric"

    @classmethod
    def symmetric(cls, gas: GasModel, profile: NozzleProfile) -> "BoundaryData":
        b0 = gasdyn.entry_speed(gas, profile.n0)
        b1 = gasdyn.sonic_speed(gas).b1
        b0sq = b0 * b0
        return cls(lambda y: np.full_like(np.asarray(y, dtype=float), b0sq), b1 * b1, b0sq)

    @classmethod
    def perturbed(cls, gas: GasModel, profile: NozzleProfile, delta: float,
                  kind: str = "sin") -> "BoundaryData":
        """``B = b0^2 (1 + delta sin y)`` or, for ``kind='sin2'``, ``b0^2 (1 - delta sin^2 y)``."""
        base = cls.symmetric(gas, profile)
        b0sq = base.entry_reference_sq
        if kind == "sin":
            fn = lambda y: b0sq * (1.0 + delta * np.sin(y))
        elif kind == "sin2":
            fn = lambda y: b0sq * (1.0 - delta * np.sin(y) ** 2)
        else:
            raise InvalidParameter(f"unknown perturbation kind {kind!r}")
        data = cls(fn, base.exit_speed_sq, b0sq, label=f"{kind}:{delta:g}")
        data.validate(np.linspace(0.0, 2.0 * np.pi, 257))
        return data

    def validate(self, y: np.ndarray) -> None:
        vals = np.asarray(self.entry_speed_sq(y))
        if np.any(vals <= 0.0):
            raise InvalidParameter("entry speed^2 must be positive")
        if not np.allclose(self.entry_speed_sq(y + 2.0 * np.pi), vals, rtol=0, atol=1e-12):
            raise InvalidParameter("entry data must be 2*pi periodic")


@dataclass(frozen=True)
class SolverConfig:
    eps0: float = 1e-1
    eps_factor: float = 0.5
    eps_min: float = 1e-3
    newton_tol: float = 1e-9
    max_newton: int = 50
    damping_min: float = 2.0**-10

    def __post_init__(self):
        if not (0.0 < self.eps_min <= self.eps0 < 1.0):
            raise InvalidParameter("require 0 < eps_min <= eps0 < 1")
        if not (0.0 < self.eps_factor < 1.0):
            raise InvalidParameter("require 0 < eps_factor < 1")
        if self.newton_tol <= 0.0 or self.max_newton < 1 or not (0.0 < self.damping_min <= 1.0):
            raise InvalidParameter("invalid Newton settings")

    def schedule(self) -> list[float]:
        eps, out = self.eps0, []
        while eps > self.eps_min * (1.0 + 1e-12):
            out.append(eps)
            eps *= self.eps_factor
        out.append(self.eps_min)
        return out


@dataclass
class SolveReport:
    converged: bool
    final_eps: float
    residual_history: list
    mach_field: ScalarField
    entry_flow_direction_ok: bool
    solution: ScalarField
    stall_reason: str | None = None
    max_interior_mach: float = float("nan")
    gauge_row_residual: float = float("nan")
    eps_reached: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "final_eps": float(self.final_eps),
            "residual_history": [float(r) for r in self.residual_history],
            "stall_reason": self.stall_reason,
            "h2_ok": bool(self.entry_flow_direction_ok),
            "max_interior_mach": float(self.max_interior_mach),
            "gauge_row_residual": float(self.gauge_row_residual),
            "eps_reached": [float(e) for e in self.eps_reached],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ------------------------------------------------------------------ residuals

def _interior_rows(v, hx, hy, n, dn, gas):
    """Interior equation values for an ``(nx, m)`` array ``v`` (all rows computed)."""
    px = diff_x(v, hx)
    py = diff_y(v, hy)
    pxx = diff_xx(v, hx)
    pyy = diff_yy(v, hy)
    pxy = diff_x(py, hx)
    n = n[:, None]
    dn = dn[:, None]
    q2 = px * px + py * py / (n * n)
    c2 = gas.c0 - 0.5 * (gas.gamma - 1.0) * q2
    inner = c2[1:-1]
    if np.any(inner <= 0.0):
        raise SonicExceeded("speed reached the limit speed at an interior node")
    r = (n * n * (c2 - px * px) * pxx
         - 2.0 * px * py * pxy
         + (c2 - py * py / (n * n)) * pyy
         + n * dn * (c2 + py * py / (n * n)) * px)
    r[0] = 0.0
    r[-1] = 0.0
    return r


def interior_residual(phi: ScalarField, gas: GasModel, profile: NozzleProfile,
                      grid: StripGrid | None = None) -> ScalarField:
    grid = phi.grid if grid is None else grid
    x = grid.x
    r = _interior_rows(phi.values, grid.hx, grid.hy, profile.n(x), profile.dn(x), gas)
    return ScalarField(grid, r)


def _boundary_rows(v, hx, hy, n0, entry_target, exit_target):
    px_in = _one_sided_d1(v[0], v[1], v[2]) / hx
    px_out = -_one_sided_d1(v[-1], v[-2], v[-3]) / hx
    py = diff_y(v[[0, -1]], hy)
    entry = px_in**2 + py[0] ** 2 / n0**2 - entry_target
    exit_ = px_out**2 + py[1] ** 2 - exit_target
    return entry, exit_


def boundary_residual(phi: ScalarField, data: BoundaryData, eps: float,
                      grid: StripGrid | None = None, profile: NozzleProfile | None = None,
                      entry_scale: float = 1.0):
    """Entry and exit row values, each of length ``ny``."""
    grid = phi.grid if grid is None else grid
    n0 = 1.0 if profile is None else profile.n0
    entry_target = entry_scale * np.asarray(data.entry_speed_sq(grid.y), dtype=float)
    exit_target = data.exit_speed_sq * (1.0 - eps) ** 2
    return _boundary_rows(phi.values, grid.hx, grid.hy, n0, entry_target, exit_target)


@dataclass
class DiscreteProblem:
    """Residual of the full system at one regularization level."""
    gas: GasModel
    profile: NozzleProfile
    grid: StripGrid
    data: BoundaryData
    eps: float
    entry_scale: float = 1.0
    gauge_value: float = 0.0

    def __post_init__(self):
        x = self.grid.x
        self._n = self.profile.n(x)
        self._dn = self.profile.dn(x)
        self._entry = self.entry_scale * np.asarray(self.data.entry_speed_sq(self.grid.y), float)
        self._exit = self.data.exit_speed_sq * (1.0 - self.eps) ** 2

    def raw_residual(self, v: np.ndarray) -> np.ndarray:
        """All rows before gauge fixing, shape ``(nx, ny)``."""
        g = self.grid
        r = _interior_rows(v, g.hx, g.hy, self._n, self._dn, self.gas)
        r[0], r[-1] = _boundary_rows(v, g.hx, g.hy, self._n[0], self._entry, self._exit)
        return r

    def residual(self, flat: np.ndarray) -> np.ndarray:
        r = self.raw_residual(flat.reshape(self.grid.shape)).ravel()
        gauge_fix(r, None, flat, self.gauge_value)
        return r


def gauge_fix(residual: np.ndarray, jacobian, phi_flat: np.ndarray, target: float = 0.0,
              node: int = 0):
    """Replace row ``node`` by ``phi[node] - target`` (in place); return both."""
    residual[node] = phi_flat[node] - target
    if jacobian is not None:
        jacobian = sp.lil_matrix(jacobian) if not sp.isspmatrix_lil(jacobian) else jacobian
        jacobian.rows[node] = [node]
        jacobian.data[node] = [1.0]
        jacobian = jacobian.tocsr()
    return residual, jacobian


# ------------------------------------------------------------------- Jacobian

def _y_colors(ny: int) -> np.ndarray:
    """Colors on the periodic index circle, distinct within distance 2."""
    colors = -np.ones(ny, dtype=int)
    for j in range(ny):
        used = {colors[(j + d) % ny] for d in (-2, -1, 1, 2)}
        c = 0
        while c in used:
            c += 1
        colors[j] = c
    return colors


def column_groups(grid: StripGrid) -> np.ndarray:
    """Color per unknown such that no residual row touches two same-colored unknowns."""
    yc = _y_colors(grid.ny)
    ncy = yc.max() + 1
    ic = np.arange(grid.nx) % 3
    return (ic[:, None] * ncy + yc[None, :]).ravel()


def sparsity_pattern(grid: StripGrid) -> sp.csr_matrix:
    """Structural nonzeros of the residual Jacobian (rows x columns)."""
    nx, ny = grid.nx, grid.ny
    rows, cols = [], []
    for i in range(nx):
        if i == 0:
            xi = [0, 1, 2]
        elif i == nx - 1:
            xi = [nx - 1, nx - 2, nx - 3]
        else:
            xi = [i - 1, i, i + 1]
        for j in range(ny):
            r = i * ny + j
            for ii in xi:
                for dj in (-1, 0, 1):
                    rows.append(r)
                    cols.append(ii * ny + (j + dj) % ny)
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(grid.size, grid.size))
    m.data[:] = 1.0
    return m


def assemble_jacobian(phi: ScalarField, problem: DiscreteProblem, *,
                      pattern: sp.csr_matrix | None = None,
                      groups: np.ndarray | None = None) -> sp.csr_matrix:
    """Forward-difference Jacobian using column groups (gauge row included)."""
    grid = problem.grid
    pattern = sparsity_pattern(grid) if pattern is None else pattern
    groups = column_groups(grid) if groups is None else groups
    flat = phi.values.ravel()
    base = problem.raw_residual(phi.values).ravel()
    pat_csc = pattern.tocsc()
    steps = FD_STEP * (1.0 + np.abs(flat))
    rows_out, cols_out, vals_out = [], [], []
    for color in range(groups.max() + 1):
        members = np.flatnonzero(groups == color)
        pert = flat.copy()
        pert[members] += steps[members]
        diff = problem.raw_residual(pert.reshape(grid.shape)).ravel() - base
        for k in members:
            rs = pat_csc.indices[pat_csc.indptr[k]:pat_csc.indptr[k + 1]]
            rows_out.append(rs)
            cols_out.append(np.full(rs.shape, k))
            vals_out.append(diff[rs] / steps[k])
    J = sp.csr_matrix((np.concatenate(vals_out),
                       (np.concatenate(rows_out), np.concatenate(cols_out))),
                      shape=(grid.size, grid.size))
    r = base.copy()
    _, J = gauge_fix(r, J, flat, problem.gauge_value)
    return J


# -------------------------------------------------------- compatible entry data

def compatible_entry_speed_sq(gas: GasModel, profile: NozzleProfile, grid: StripGrid,
                              exit_speed_sq: float, eps: float) -> tuple[float, np.ndarray]:
    """Entry speed^2 of the y-invariant discrete flow with exit speed ``sqrt(exit_speed_sq)(1-eps)``.

    Solves the one-column discrete system (interior rows + exit row, with
    ``phi(0) = 0``) and reads the entry speed off the one-sided difference.
    Returns the speed^2 and the column of potential values.
    """
    from .symmetric import build_symmetric_flow  # local: avoids an import cycle

    x = grid.x
    hx = grid.hx
    n, dn = profile.n(x), profile.dn(x)
    exit_speed = math.sqrt(exit_speed_sq) * (1.0 - eps)
    flux = float(gasdyn.flux_density(gas, exit_speed))
    guess = build_symmetric_flow(gas, profile, 8 * (grid.nx - 1) + 1, flux=flux)
    col0 = np.interp(x, guess.xs, guess.phi_b)

    def fun(z):
        v = np.concatenate([[0.0], z])[:, None]
        r = _interior_rows(v, hx, 1.0, n, dn, gas)[1:-1, 0]
        px_out = -_one_sided_d1(v[-1, 0], v[-2, 0], v[-3, 0]) / hx
        return np.concatenate([r, [px_out**2 - exit_speed**2]])

    sol = root(fun, col0[1:], method="hybr", options={"xtol": 1e-14})
    z = _polish_dense(fun, sol.x)
    col = np.concatenate([[0.0], z])
    if np.max(np.abs(fun(z))) > 1e-10:
        raise ToleranceNotReached(f"compatible entry solve failed: {sol.message}")
    px_in = _one_sided_d1(col[0], col[1], col[2]) / hx
    return px_in**2, col


def _polish_dense(fun, z, steps=3, h=1e-6):
    """A few Newton steps with a central-difference dense Jacobian."""
    r = fun(z)
    for _ in range(steps):
        J = np.empty((r.size, z.size))
        for k in range(z.size):
            e = np.zeros_like(z)
            e[k] = h
            J[:, k] = (fun(z + e) - fun(z - e)) / (2.0 * h)
        cand = z - np.linalg.solve(J, r)
        rc = fun(cand)
        if _norm(rc) >= _norm(r):
            break
        z, r = cand, rc
    return z


# -------------------------------------------------------------- diagnostics

def mach_field(phi: ScalarField, gas: GasModel, profile: NozzleProfile) -> ScalarField:
    g = phi.grid
    v = phi.values
    n = profile.n(g.x)[:, None]
    q2 = diff_x(v, g.hx) ** 2 + diff_y(v, g.hy) ** 2 / n**2
    c2 = gas.c0 - 0.5 * (gas.gamma - 1.0) * q2
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(c2 > 0.0, np.sqrt(q2 / np.where(c2 > 0, c2, 1.0)), np.inf)
    m = np.where(np.isfinite(m), m, 1e300)
    return ScalarField(g, m)


def h2_ok(phi: ScalarField, tol: float = 1e-8) -> bool:
    px = diff_x(phi.values, phi.grid.hx)
    return bool(np.all(px[0] >= -tol) and np.all(px[-1] >= -tol))


# ------------------------------------------------------------------ solver

def _norm(r):
    return float(np.max(np.abs(r)))


def newton_solve(initial: ScalarField, gas: GasModel, profile: NozzleProfile,
                 grid: StripGrid | None, data: BoundaryData,
                 config: SolverConfig | None = None, *, gauge_value: float = 0.0,
                 log: Callable[[str], None] | None = None) -> SolveReport:
    """Damped Newton with continuation in the exit regularization ``eps``."""
    grid = initial.grid if grid is None else grid
    config = SolverConfig() if config is None else config
    pattern = sparsity_pattern(grid)
    groups = column_groups(grid)
    flat = initial.values.ravel().copy()
    flat += gauge_value - flat[0]  # the equations only see gradients
    flat[0] = gauge_value
    history: list[float] = []
    reached: list[float] = []
    stall = None
    final_eps = float("nan")
    problem = None

    for eps in config.schedule():
        bsq, _ = compatible_entry_speed_sq(gas, profile, grid, data.exit_speed_sq, eps)
        problem = DiscreteProblem(gas, profile, grid, data, eps,
                                  entry_scale=bsq / data.entry_reference_sq,
                                  gauge_value=gauge_value)
        try:
            r = problem.residual(flat)
        except SonicExceeded:
            raise SonicExceeded(f"starting point infeasible at eps={eps:g}")
        rn = _norm(r)
        history.append(rn)
        it, polish = 0, 0
        while it < config.max_newton:
            if rn <= config.newton_tol:
                # a couple of extra steps are nearly free once in the quadratic regime
                if polish >= POLISH_STEPS or rn == 0.0:
                    break
                polish += 1
            it += 1
            J = assemble_jacobian(ScalarField(grid, flat.reshape(grid.shape)), problem,
                                  pattern=pattern, groups=groups)
            step = spsolve(J.tocsc(), -r)
            if not np.all(np.isfinite(step)):
                stall = f"singular Newton system at eps={eps:g}"
                break
            lam, accepted = 1.0, False
            while lam >= config.damping_min:
                trial = flat + lam * step
                try:
                    rt = problem.residual(trial)
                except SonicExceeded:
                    lam *= 0.5
                    continue
                if _norm(rt) < rn:
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                if rn <= config.newton_tol:
                    break  # polishing hit the rounding floor
                stall = f"line search stalled at eps={eps:g} (residual {rn:.3e})"
                break
            flat, r, rn = trial, rt, _norm(rt)
            history.append(rn)
            if log:
                log(f"eps={eps:.4g} it={it} lam={lam:.3g} res={rn:.3e}")
        final_eps = eps
        if stall is not None:
            break
        if rn > config.newton_tol:
            stall = f"max_newton={config.max_newton} reached at eps={eps:g} (residual {rn:.3e})"
            break
        reached.append(eps)

    sol = ScalarField(grid, flat.reshape(grid.shape))
    mf = mach_field(sol, gas, profile)
    raw = problem.raw_residual(sol.values)
    displaced = float(raw[GAUGE_NODE])
    if stall is None:
        # the gauge pin displaced one entry row; the full discrete problem
        # is solved only if that row holds as well
        full = max(rn, abs(displaced))
        history.append(full)
        if full > config.newton_tol:
            stall = (f"residual floor {full:.3e} at eps={final_eps:g}: entry row displaced by "
                     "the gauge pin cannot be satisfied (incompatible entry data)")
    return SolveReport(
        converged=stall is None,
        final_eps=final_eps,
        residual_history=history,
        mach_field=mf,
        entry_flow_direction_ok=h2_ok(sol),
        solution=sol,
        stall_reason=stall,
        max_interior_mach=float(mf.values[1:-1].max()),
        gauge_row_residual=displaced,
        eps_reached=reached,
    )


def smooth_perturbation(grid: StripGrid, amplitude: float, seed: int, modes: int = 4) -> ScalarField:
    """Seeded band-limited perturbation ``x(1-x)^2 * sum_k (a_k cos ky + b_k sin ky)``.

    Zero mean along every column, vanishing on both boundaries, scaled to the
    requested sup-norm.  The double zero at the exit leaves the speed on the
    sonic line untouched; with a simple zero a 1e-2 perturbation already makes
    the start supersonic next to the exit.
    """
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((modes, 2))
    X, Y = grid.mesh()
    s = np.zeros_like(Y)
    for k in range(1, modes + 1):
        s += coef[k - 1, 0] * np.cos(k * Y) + coef[k - 1, 1] * np.sin(k * Y)
    v = X * (1.0 - X) ** 2 * s
    peak = np.max(np.abs(v))
    return ScalarField(grid, amplitude * v / peak if peak > 0 else v)
