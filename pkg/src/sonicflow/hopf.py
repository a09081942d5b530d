"""Boundary-point lemma toolkit for degenerate elliptic operators.

``L = a^{ij} d_ij + b^i d_i + c`` with ``a`` positive semidefinite.  Near a
boundary point ``P`` the boundary is the graph ``x_n = f(x')`` with the domain
above it.  The straightening map ``y' = x' - P'``, ``y_n = x_n - f(x')``
transforms ``L`` into ``alpha^{kl} d_kl + beta^l d_l + c``; the lemma applies
when ``beta^n(O) > 0`` and is verified with the barrier
``h(y) = -|y|^2 + mu * y_n`` on a small box ``D1`` above ``O``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConditionFailed, InvalidParameter, NonzeroC, NotAnExtremum, RectangleVanished

PSD_TOL = 1e-12
C_TOL = 1e-12
MAX_SHRINK = 20


@dataclass(frozen=True)
class DegenOperator:
    dim: int
    a: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    c: Callable[[np.ndarray], float] = lambda x: 0.0

    @classmethod
    def constant(cls, a, b, c=0.0) -> "DegenOperator":
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        return cls(len(b), lambda x: a, lambda x: b, lambda x: float(c))

    def affine(self, M, shift=None) -> "DegenOperator":
        """The same operator written in coordinates ``z = M x + shift``."""
        M = np.asarray(M, dtype=float)
        shift = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        Minv = np.linalg.inv(M)
        back = lambda z: Minv @ (np.asarray(z, dtype=float) - shift)
        return DegenOperator(
            self.dim,
            lambda z: M @ self.a(back(z)) @ M.T,
            lambda z: M @ self.b(back(z)),
            lambda z: self.c(back(z)),
        )

    def min_eigenvalue(self, points) -> float:
        return min(float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())
                   for A in (np.asarray(self.a(p), dtype=float) for p in points))

    def is_semidefinite(self, points, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue(points) >= -tol


@dataclass(frozen=True)
class BoundaryPatch:
    """Boundary near ``P`` as the graph ``x_n = f(x')``; interior is ``x_n > f``."""
    P: np.ndarray
    f: Callable[[np.ndarray], float]
    grad_f: Callable[[np.ndarray], np.ndarray]
    hess_f: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        if abs(self.f(P[:-1]) - P[-1]) > 1e-12 * (1.0 + abs(P[-1])):
            raise InvalidParameter("base point does not lie on the boundary graph")

    @classmethod
    def flat(cls, P, level: float | None = None) -> "BoundaryPatch":
        P = np.asarray(P, dtype=float)
        lvl = P[-1] if level is None else level
        m = len(P) - 1
        return cls(P, lambda s: lvl, lambda s: np.zeros(m), lambda s: np.zeros((m, m)))

    @classmethod
    def quadratic(cls, P, hessian) -> "BoundaryPatch":
        """``f(x') = P_n + 1/2 (x'-P')^T H (x'-P')``."""
        P = np.asarray(P, dtype=float)
        H = np.atleast_2d(np.asarray(hessian, dtype=float))
        Pt = P[:-1]
        return cls(P,
                   lambda s: float(P[-1] + 0.5 * (s - Pt) @ H @ (s - Pt)),
                   lambda s: H @ (s - Pt),
                   lambda s: H)

    @property
    def dim(self) -> int:
        return len(self.P)

    def normal(self) -> np.ndarray:
        """Interior normal ``(-grad f, 1)`` at ``P`` (not normalized)."""
        return np.concatenate([-np.asarray(self.grad_f(self.P[:-1]), float), [1.0]])

    def to_x(self, yv) -> np.ndarray:
        yv = np.asarray(yv, dtype=float)
        xt = self.P[:-1] + yv[:-1]
        return np.concatenate([xt, [yv[-1] + self.f(xt)]])


@dataclass
class HopfReport:
    condition_value: float
    mu: float | None = None
    barrier_ok: bool | None = None
    d1_dims: list | None = None
    alpha_trace: float | None = None
    beta_n: float | None = None
    worst_barrier: float | None = None
    shrink_steps: int | None = None

    def to_dict(self) -> dict:
        return {
            "condition_value": self.condition_value,
            "mu": self.mu,
            "barrier_ok": self.barrier_ok,
            "d1_dims": self.d1_dims,
            "alpha_trace": self.alpha_trace,
            "beta_n": self.beta_n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _transformed(op: DegenOperator, patch: BoundaryPatch, x: np.ndarray):
    """``alpha``, ``beta`` at the physical point ``x``."""
    n = op.dim
    xt = x[:-1]
    gf = np.asarray(patch.grad_f(xt), dtype=float)
    Hf = np.atleast_2d(np.asarray(patch.hess_f(xt), dtype=float))
    T = np.eye(n)
    T[-1, :-1] = -gf
    A = np.asarray(op.a(x), dtype=float)
    bvec = np.asarray(op.b(x), dtype=float)
    alpha = T @ A @ T.T
    beta = T @ bvec
    beta[-1] -= float(np.sum(A[:-1, :-1] * Hf))
    return alpha, beta


def flatten(op: DegenOperator, patch: BoundaryPatch):
    """Transformed principal matrix and drift at ``O`` (the image of ``P``)."""
    if op.dim != patch.dim:
        raise InvalidParameter("operator and patch dimensions differ")
    return _transformed(op, patch, patch.P)


def hopf_condition(op: DegenOperator, patch: BoundaryPatch, *, mode: str = "zero_c",
                   u_at_P: float | None = None, extremum: str = "min") -> float:
    """``-sum b^i f_i + b^n - sum a^{ij} f_ij`` at ``P``.

    ``mode='zero_c'`` requires ``c(P) = 0``; ``mode='nonpositive_c'`` allows
    ``c(P) <= 0`` when ``u(P) <= 0`` at a minimum (``>= 0`` at a maximum).
    """
    P = patch.P
    cP = float(op.c(P))
    if mode == "zero_c":
        if abs(cP) > C_TOL:
            raise NonzeroC(f"c(P) = {cP:.3e} but mode requires c = 0")
    elif mode == "nonpositive_c":
        if cP > C_TOL:
            raise NonzeroC(f"c(P) = {cP:.3e} > 0")
        if u_at_P is None:
            raise NonzeroC("nonpositive_c mode needs the value u(P)")
        if (extremum == "min" and u_at_P > 0.0) or (extremum == "max" and u_at_P < 0.0):
            raise NonzeroC("sign of u(P) incompatible with c <= 0")
    else:
        raise InvalidParameter(f"unknown mode {mode!r}")
    b = np.asarray(op.b(P), dtype=float)
    A = np.asarray(op.a(P), dtype=float)
    gf = np.asarray(patch.grad_f(P[:-1]), dtype=float)
    Hf = np.atleast_2d(np.asarray(patch.hess_f(P[:-1]), dtype=float))
    return float(-b[:-1] @ gf + b[-1] - np.sum(A[:-1, :-1] * Hf))


def choose_mu(alpha: np.ndarray, beta: np.ndarray) -> float:
    """Barrier slope with ``-2 tr(alpha) + mu beta_n >= 2`` at ``O``."""
    bn = float(beta[-1])
    if not bn > 0.0:
        raise ConditionFailed(f"beta_n = {bn:.3e} is not positive")
    tr = float(np.trace(alpha))
    mu = 2.0 * (2.0 * tr + 1.0) / bn
    while -2.0 * tr + mu * bn < 2.0:
        mu = np.nextafter(mu, np.inf)
    return mu


def barrier_value(op: DegenOperator, patch: BoundaryPatch, mu: float, yv: np.ndarray) -> float:
    """``L h`` at the straightened point ``yv``."""
    x = patch.to_x(yv)
    alpha, beta = _transformed(op, patch, x)
    grad_h = -2.0 * yv
    grad_h[-1] += mu
    h = -float(yv @ yv) + mu * yv[-1]
    return float(-2.0 * np.trace(alpha) + beta @ grad_h + op.c(x) * h)


def _lattice(half_widths, density):
    axes = [np.linspace(-d, d, density) for d in half_widths[:-1]]
    axes.append(np.linspace(0.0, half_widths[-1], density))
    return (np.array(p) for p in itertools.product(*axes))


def verify_barrier(op: DegenOperator, patch: BoundaryPatch, mu: float, half_widths,
                   density: int = 9) -> tuple[bool, float]:
    """Sample ``L h`` over the closed box; pass iff every sample is positive."""
    worst = min(barrier_value(op, patch, mu, p) for p in _lattice(half_widths, density))
    return worst > 0.0, worst


def find_barrier_rectangle(op: DegenOperator, patch: BoundaryPatch, mu: float, half_widths,
                           density: int = 9, max_retries: int = MAX_SHRINK):
    """Halve the box until the barrier check passes.

    Returns ``(half_widths, worst_value, retries_used)``.
    """
    dims = np.asarray(half_widths, dtype=float)
    for k in range(max_retries + 1):
        ok, worst = verify_barrier(op, patch, mu, dims, density)
        if ok:
            return dims.tolist(), worst, k
        dims = 0.5 * dims
    raise RectangleVanished(f"barrier still fails after {max_retries} halvings")


def analyze(op: DegenOperator, patch: BoundaryPatch, half_widths=None, density: int = 9,
            **mode) -> HopfReport:
    """Condition value, and when positive the barrier construction."""
    value = hopf_condition(op, patch, **mode)
    if value <= 0.0:
        return HopfReport(condition_value=value)
    alpha, beta = flatten(op, patch)
    mu = choose_mu(alpha, beta)
    hw = np.full(op.dim, 0.5) if half_widths is None else half_widths
    try:
        dims, worst, k = find_barrier_rectangle(op, patch, mu, hw, density)
        ok = True
    except RectangleVanished:
        dims, worst, k, ok = None, None, MAX_SHRINK, False
    return HopfReport(value, mu, ok, dims, float(np.trace(alpha)), float(beta[-1]), worst, k)


def boundary_derivative_check(u: Callable[[np.ndarray], float], patch: BoundaryPatch,
                              extremum_kind: str = "min", step: float = 1e-3,
                              probe: float = 0.05, probes: int = 9) -> float:
    """Rate of ``u`` along the interior normal at ``P`` (3-point one-sided).

    ``u`` takes a physical point.  Raises ``NotAnExtremum`` if sampling along
    the boundary or into the domain finds a value beating ``u(P)``.
    """
    if extremum_kind not in ("min", "max"):
        raise InvalidParameter("extremum_kind must be 'min' or 'max'")
    s = 1.0 if extremum_kind == "min" else -1.0
    P = patch.P
    uP = float(u(P))
    tol = 1e-12 * (1.0 + abs(uP))
    for p in _lattice(np.full(patch.dim, probe), probes):
        if s * (float(u(patch.to_x(p))) - uP) < -tol:
            raise NotAnExtremum(f"u(P) is not a {extremum_kind} near P")
    nu = patch.normal()
    u1 = float(u(P + step * nu))
    u2 = float(u(P + 2.0 * step * nu))
    return (-3.0 * uP + 4.0 * u1 - u2) / (2.0 * step)


def exit_extremum_rate(psi, extremum_kind: str = "min") -> tuple[float, tuple]:
    """Interior-normal rate of a grid field at its extremal exit node.

    The exit is ``x = 1`` with interior normal ``-e_x``; uses the one-sided
    3-point difference.  Returns ``(rate, node)``.
    """
    v = psi.values
    row = v[-1]
    j = int(np.argmin(row) if extremum_kind == "min" else np.argmax(row))
    hx = psi.grid.hx
    rate = (-3.0 * v[-1, j] + 4.0 * v[-2, j] - v[-3, j]) / (2.0 * hx)
    return float(rate), (psi.grid.nx - 1, j)
