"""Linearization about the symmetric flow and the exit sign conditions.

With ``psi = phi_b - phi`` the difference of two solutions satisfies a linear
equation ``a11 psi_xx + a22 psi_yy + b1 psi_x + b2 psi_y = 0`` whose principal
part comes from ``phi_b`` alone.  Uniqueness rests on ``b1 < 0`` along the
sonic exit, which in turn follows from ``(g+1)/2 phi_xx + (g-1)/2 phi_yy > 0``.

Two drift variants are available.  ``"stated"`` is the textbook form of
``b1, b2``; ``"exact"`` flips the sign of the ``n n'`` product term in ``b1``
and the sign of ``b2`` so that the decomposition is an algebraic identity.
The two agree wherever ``n' = 0`` and ``phi_y = 0``, in particular on the
exit of a symmetric flow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import gasdyn
from .gasdyn import GasModel
from .grid import ScalarField, StripGrid, gradients
from .nozzle import NozzleProfile
from .symmetric import SymmetricFlow, acceleration, speed_at

VARIANTS = ("stated", "exact")


@dataclass
class LinearizedCoefficients:
    a11: ScalarField
    a12: ScalarField
    a22: ScalarField
    b1: ScalarField
    b2: ScalarField
    cb2: ScalarField
    variant: str = "stated"


@dataclass
class ObliqueVectors:
    l0: np.ndarray  # (ny, 2) on the entry
    l1: np.ndarray  # (ny, 2) on the exit

    @property
    def oblique(self) -> bool:
        return bool(np.all(self.l0[:, 0] > 0.0) and np.all(self.l1[:, 0] > 0.0))


@dataclass
class SignReport:
    quantity: str
    min_or_max: str
    value: float
    node_of_extremum: tuple
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "quantity": self.quantity,
            "min_or_max": self.min_or_max,
            "value": float(self.value),
            "node_of_extremum": [int(k) for k in self.node_of_extremum],
            "pass": bool(self.passed),
        }
        if self.extra:
            d["extra"] = {k: float(v) for k, v in self.extra.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def base_speed(gas: GasModel, profile: NozzleProfile, grid: StripGrid,
               flow: SymmetricFlow | None = None) -> np.ndarray:
    """``u = phi_b'`` at the grid x-nodes, evaluated pointwise."""
    return np.array([speed_at(gas, profile, x) for x in grid.x])


def assemble_linearized(phi: ScalarField, flow: SymmetricFlow | None, gas: GasModel,
                        profile: NozzleProfile, grid: StripGrid | None = None,
                        variant: str = "stated") -> LinearizedCoefficients:
    """Coefficients of the psi-equation at every grid node.

    ``flow`` is accepted for interface symmetry; ``phi_b'`` is evaluated
    exactly at the grid nodes rather than interpolated.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    grid = phi.grid if grid is None else grid
    g = gas.gamma
    u = base_speed(gas, profile, grid, flow)[:, None]
    n = profile.n(grid.x)[:, None]
    dn = profile.dn(grid.x)[:, None]
    d = gradients(phi)
    p1, p2, p11, p12, p22 = d["x"], d["y"], d["xx"], d["xy"], d["yy"]
    cb2 = gas.c0 - 0.5 * (g - 1.0) * u * u
    shape = grid.shape
    a11 = np.broadcast_to(n * n * (cb2 - u * u), shape).copy()
    a22 = np.broadcast_to(cb2, shape).copy()
    a12 = np.zeros(shape)  # carries phi_b_y = 0 as a factor
    s = p1 + u
    sign = 1.0 if variant == "stated" else -1.0
    b1 = (-(0.5 * (g + 1.0) * n * n * p11 + 0.5 * (g - 1.0) * p22) * s
          + n * dn * (cb2 + sign * 0.5 * (g - 1.0) * p1 * s))
    b2 = sign * (0.5 * (g - 1.0) * p2 * p11 + 2.0 * p1 * p12
                 + 0.5 * (g + 1.0) / (n * n) * p2 * p22
                 + 0.5 * (g - 3.0) * dn / n * p1 * p2)
    f = lambda v: ScalarField(grid, np.broadcast_to(v, shape).copy())
    return LinearizedCoefficients(f(a11), f(a12), f(a22), f(b1), f(b2), f(cb2), variant)


def oblique_vectors(phi: ScalarField, gas: GasModel, profile: NozzleProfile) -> ObliqueVectors:
    grid = phi.grid
    u = base_speed(gas, profile, grid)
    d = gradients(phi)
    l0 = np.column_stack([d["x"][0] + u[0], d["y"][0] / profile.n0**2])
    l1 = np.column_stack([d["x"][-1] + u[-1], d["y"][-1]])
    return ObliqueVectors(l0, l1)


def apply_linearized(coeffs: LinearizedCoefficients, psi: ScalarField) -> ScalarField:
    d = gradients(psi)
    v = (coeffs.a11.values * d["xx"] + 2.0 * coeffs.a12.values * d["xy"]
         + coeffs.a22.values * d["yy"] + coeffs.b1.values * d["x"] + coeffs.b2.values * d["y"])
    return ScalarField(psi.grid, v)


def _equation(n, dn, gas, p1, p2, p11, p12, p22):
    c2 = gas.c0 - 0.5 * (gas.gamma - 1.0) * (p1 * p1 + p2 * p2 / (n * n))
    return (n * n * (c2 - p1 * p1) * p11 - 2.0 * p1 * p2 * p12
            + (c2 - p2 * p2 / (n * n)) * p22 + n * dn * (c2 + p2 * p2 / (n * n)) * p1)


def linearization_defect(phi: ScalarField, gas: GasModel, profile: NozzleProfile,
                         variant: str = "stated") -> ScalarField:
    """Pointwise ``E[phi_b] - E[phi] - L[psi]`` with exact ``phi_b`` derivatives.

    The discrete derivatives of ``phi`` are substituted consistently on both
    sides, so for ``variant='exact'`` the result is zero up to rounding.  A
    nonzero value for ``'stated'`` measures the drift-term discrepancy.
    """
    grid = phi.grid
    u = base_speed(gas, profile, grid)
    up = acceleration(gas, profile, grid.x, u)[:, None]
    u = u[:, None]
    n = profile.n(grid.x)[:, None]
    dn = profile.dn(grid.x)[:, None]
    d = gradients(phi)
    coeffs = assemble_linearized(phi, None, gas, profile, grid, variant)
    e_b = _equation(n, dn, gas, u, 0.0, up, 0.0, 0.0)
    e_p = _equation(n, dn, gas, d["x"], d["y"], d["xx"], d["xy"], d["yy"])
    lin = (coeffs.a11.values * (up - d["xx"]) + coeffs.a22.values * (-d["yy"])
           + coeffs.b1.values * (u - d["x"]) + coeffs.b2.values * (-d["y"]))
    return ScalarField(grid, e_b - e_p - lin)


def linearized_consistency(phi: ScalarField, lifted_base: ScalarField, gas: GasModel,
                           profile: NozzleProfile, variant: str = "stated") -> float:
    """Constant ``C`` in ``|L[psi]| <= C (|psi| + hx^2)`` over interior nodes."""
    psi = lifted_base - phi
    coeffs = assemble_linearized(phi, None, gas, profile, phi.grid, variant)
    lp = apply_linearized(coeffs, psi).values[1:-1]
    spread = np.max(psi.values) - np.min(psi.values)
    return float(np.max(np.abs(lp)) / (spread + phi.grid.hx**2))


def _extremum(values: np.ndarray, kind: str, i: int):
    j = int(np.argmax(values) if kind == "max" else np.argmin(values))
    return float(values[j]), (i, j)


def check_exit_drift_sign(coeffs: LinearizedCoefficients) -> SignReport:
    row = coeffs.b1.values[-1]
    v, node = _extremum(row, "max", coeffs.b1.grid.nx - 1)
    return SignReport("exit_drift_b1", "max", v, node, v < 0.0)


def check_entry_drift_sign(coeffs: LinearizedCoefficients) -> SignReport:
    """Diagnostic only: sign of ``b1`` on the entry."""
    v, node = _extremum(coeffs.b1.values[0], "max", 0)
    return SignReport("entry_drift_b1", "max", v, node, v < 0.0)


def check_key_inequality(phi: ScalarField, gas: GasModel, grid: StripGrid | None = None) -> SignReport:
    """Minimum over exit nodes of ``(g+1)/2 phi_xx + (g-1)/2 phi_yy``.

    ``extra`` carries the minimum exit ``phi_xx`` (acceleration hypothesis)
    and the maximum of ``|(c^2 + phi_y^2) lap(phi) - c^2 phi_xx|``.
    """
    grid = phi.grid if grid is None else grid
    g = gas.gamma
    d = gradients(phi)
    p1, p2, p11, p22 = (d[k][-1] for k in ("x", "y", "xx", "yy"))
    key = 0.5 * (g + 1.0) * p11 + 0.5 * (g - 1.0) * p22
    v, node = _extremum(key, "min", grid.nx - 1)
    c2 = gas.c0 - 0.5 * (g - 1.0) * (p1 * p1 + p2 * p2)
    ident = (c2 + p2 * p2) * (p11 + p22) - c2 * p11
    return SignReport("key_inequality", "min", v, node, v > 0.0, extra={
        "min_exit_phi_xx": float(p11.min()),
        "identity_residual": float(np.max(np.abs(ident))),
        "min_exit_laplacian": float((p11 + p22).min()),
    })


def heat_structure(coeffs: LinearizedCoefficients, gas: GasModel) -> dict:
    """Exit-row degeneracy: ``a11 -> 0`` while ``a22`` stays bounded below."""
    b1 = gasdyn.sonic_speed(gas).b1
    hx = coeffs.a11.grid.hx
    a11 = float(np.max(np.abs(coeffs.a11.values[-1])))
    a22 = float(np.min(coeffs.a22.values[-1]))
    return {"max_exit_a11": a11, "min_exit_a22": a22,
            "ok": a11 <= 10.0 * hx and a22 >= 0.5 * b1 * b1}


def closed_form_exit_drift(gas: GasModel, profile: NozzleProfile) -> float:
    """``-(g+1) u'(1) u(1)`` for the symmetric flow."""
    from .symmetric import exit_acceleration
    b1 = gasdyn.sonic_speed(gas).b1
    return -(gas.gamma + 1.0) * exit_acceleration(gas, profile) * b1


def base_coefficients(gas: GasModel, profile: NozzleProfile, x: float) -> dict:
    """Coefficients of the psi-equation for ``phi = phi_b`` at station ``x``.

    With ``phi_y = 0`` both drift variants coincide: ``b2 = 0`` and
    ``b1 = -(g+1) n^2 u u' + n n' (cb^2 + (g-1) u^2)``.
    """
    g = gas.gamma
    u = speed_at(gas, profile, float(x))
    up = acceleration(gas, profile, float(x), u)
    n, dn = float(profile.n(x)), float(profile.dn(x))
    cb2 = gas.c0 - 0.5 * (g - 1.0) * u * u
    return {
        "a11": n * n * (cb2 - u * u),
        "a22": cb2,
        "b1": -(g + 1.0) * n * n * u * up + n * dn * (cb2 + (g - 1.0) * u * u),
        "b2": 0.0,
    }


def exit_operator(gas: GasModel, profile: NozzleProfile):
    """The psi-operator of the symmetric flow in coordinates ``z = (y, -x)``.

    In these coordinates the exit ``x = 1`` is the flat graph ``z2 = -1``
    with the nozzle interior above it, which is the orientation expected by
    the boundary-point toolkit.  Returns ``(operator, patch)`` at ``y = 0``.
    """
    from .hopf import BoundaryPatch, DegenOperator

    def coeffs(z):
        x = min(max(-float(z[1]), 0.0), 1.0)
        return base_coefficients(gas, profile, x)

    def a(z):
        k = coeffs(z)
        return np.array([[k["a22"], 0.0], [0.0, k["a11"]]])

    def b(z):
        k = coeffs(z)
        return np.array([k["b2"], -k["b1"]])

    op = DegenOperator(2, a, b, lambda z: 0.0)
    return op, BoundaryPatch.flat(np.array([0.0, -1.0]))
