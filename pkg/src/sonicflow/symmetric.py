"""The y-independent subsonic-sonic flow in the convergent nozzle.

For a flow depending on x only, mass conservation gives
``n(x) * rho(u) * u = m`` with ``m`` the sonic flux (``n(1) = 1``).  The
speed at each station is the subsonic root of that relation and the
potential is its primitive, gauged by ``phi_b(0) = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from . import gasdyn
from .errors import InvalidParameter, NoSubsonicRoot
from .gasdyn import GasModel
from .nozzle import NozzleProfile


@dataclass(frozen=True)
class SymmetricFlow:
    xs: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    cs: np.ndarray
    mach: np.ndarray
    phi_b: np.ndarray
    m: float

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u", "rho", "c", "mach", "phi"])
            for row in zip(self.xs, self.u, self.rho, self.cs, self.mach, self.phi_b):
                w.writerow([f"{v:.17g}" for v in row])


def critical_flux(gas: GasModel, profile: NozzleProfile) -> float:
    crit = gasdyn.sonic_speed(gas)
    return float(profile.n(1.0)) * float(gasdyn.density(gas, crit.b1)) * crit.b1


def speed_at(gas: GasModel, profile: NozzleProfile, x: float, flux: float | None = None) -> float:
    """Subsonic speed at station ``x`` carrying mass flux ``flux``.

    ``flux`` defaults to the critical flux, in which case ``x = 1`` returns
    the sonic speed without iterating.
    """
    if not 0.0 <= x <= 1.0:
        raise InvalidParameter(f"station {x} outside [0, 1]")
    if flux is None:
        flux = critical_flux(gas, profile)
        if x == 1.0:
            return gasdyn.sonic_speed(gas).b1
    target = flux / float(profile.n(x))
    crit = gasdyn.sonic_speed(gas)
    # (H1) profiles have n >= 1, so the target never exceeds the sonic flux
    assert target <= crit.flux_star * (1.0 + 1e-14), "profile violates n >= n(1)"
    try:
        return gasdyn.subsonic_flux_root(gas, target)
    except NoSubsonicRoot:  # pragma: no cover - guarded by the assert
        raise


def _quadrature(xs: np.ndarray, u: np.ndarray) -> np.ndarray:
    if len(xs) == 2:
        return np.array([0.0, 0.5 * (u[0] + u[1]) * (xs[1] - xs[0])])
    if len(xs) % 2 == 1:
        return cumulative_simpson(u, x=xs, initial=0.0)
    return cumulative_trapezoid(u, x=xs, initial=0.0)


def build_symmetric_flow(gas: GasModel, profile: NozzleProfile, stations: int = 1001,
                         flux: float | None = None) -> SymmetricFlow:
    """Sample the symmetric flow on ``stations`` uniform stations.

    Passing a ``flux`` below the critical one gives the strictly subsonic
    flow used by the regularized solves (exit speed below ``b1``).
    """
    if stations < 2:
        raise InvalidParameter("need at least 2 stations")
    m = critical_flux(gas, profile) if flux is None else float(flux)
    xs = np.linspace(0.0, 1.0, stations)
    u = np.array([speed_at(gas, profile, x, None if flux is None else m) for x in xs])
    c2 = gasdyn.sound_speed_squared(gas, u)
    return SymmetricFlow(
        xs=xs,
        u=u,
        rho=gasdyn.density(gas, u),
        cs=np.sqrt(c2),
        mach=u / np.sqrt(c2),
        phi_b=_quadrature(xs, u),
        m=m,
    )


def exit_acceleration(gas: GasModel, profile: NozzleProfile) -> float:
    """Closed-form ``u'(1)`` on the smooth subsonic-to-sonic branch.

    Expanding ``n * g(u) = g*`` about the sonic point with ``n'(1) = 0`` gives
    ``u'(1)**2 = n''(1) * b1**2 / (gamma + 1)``.
    """
    b1 = gasdyn.sonic_speed(gas).b1
    return float(np.sqrt(profile.d2n(1.0) * b1 * b1 / (gas.gamma + 1.0)))


def acceleration(gas: GasModel, profile: NozzleProfile, x, u=None):
    """``u'(x)`` of the sonic-exit symmetric flow from the 1D flow equation.

    ``n n' c^2 u + n^2 (c^2 - u^2) u' = 0``; both factors vanish at the exit,
    where the closed-form limit is used.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if u is None:
        u = np.array([speed_at(gas, profile, xi) for xi in xs])
    u = np.atleast_1d(np.asarray(u, dtype=float))
    c2 = gasdyn.sound_speed_squared(gas, u)
    out = np.empty_like(xs)
    near = xs > 1.0 - 1e-4
    far = ~near
    n, dn = profile.n(xs[far]), profile.dn(xs[far])
    out[far] = -dn * c2[far] * u[far] / (n * (c2[far] - u[far] ** 2))
    if np.any(near):
        # linear Taylor extension of u' from the exit limit
        up1 = exit_acceleration(gas, profile)
        h = 1e-4
        xr = 1.0 - h
        ur = speed_at(gas, profile, xr)
        c2r = float(gasdyn.sound_speed_squared(gas, ur))
        upr = float(-profile.dn(xr) * c2r * ur / (profile.n(xr) * (c2r - ur**2)))
        out[near] = up1 + (upr - up1) * (1.0 - xs[near]) / h
    return out if np.ndim(x) else float(out[0])
