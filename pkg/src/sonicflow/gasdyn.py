"""Isentropic gas closure for potential flow with p = rho**gamma.

The Bernoulli law reads ``c**2 + (gamma - 1)/2 * q**2 = c0``, so the sound
speed, density and mass-flux density are all explicit functions of the
flow speed ``q``.  The mass-flux density ``rho(q) * q`` is unimodal with its
maximum at the critical speed ``b1 = sqrt(2*c0/(gamma + 1))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NoSubsonicRoot, SpeedExceedsLimit, ToleranceNotReached


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4
    c0: float = 1.2

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise InvalidParameter(f"gamma must be > 1, got {self.gamma}")
        if not (math.isfinite(self.c0) and self.c0 > 0.0):
            raise InvalidParameter(f"c0 must be > 0, got {self.c0}")

    @property
    def limit_speed(self) -> float:
        """Speed at which the sound speed vanishes."""
        return math.sqrt(2.0 * self.c0 / (self.gamma - 1.0))


@dataclass(frozen=True)
class CriticalData:
    b1: float
    rho_star: float
    flux_star: float


def sound_speed_squared(gas: GasModel, q):
    """Return ``c**2`` from the Bernoulli law; accepts scalars or arrays."""
    q = np.asarray(q, dtype=float)
    c2 = gas.c0 - 0.5 * (gas.gamma - 1.0) * q * q
    if np.any(c2 <= 0.0) or np.any(q < 0.0):
        raise SpeedExceedsLimit(
            f"speed outside [0, q_max={gas.limit_speed:.6g}): max q = {np.max(q):.6g}")
    return c2[()] if c2.ndim == 0 else c2


def density(gas: GasModel, q):
    c2 = sound_speed_squared(gas, q)
    return (c2 / gas.gamma) ** (1.0 / (gas.gamma - 1.0))


def flux_density(gas: GasModel, q):
    return density(gas, q) * np.asarray(q, dtype=float)


def mach(gas: GasModel, q):
    return np.asarray(q, dtype=float) / np.sqrt(sound_speed_squared(gas, q))


def sonic_speed(gas: GasModel) -> CriticalData:
    b1 = math.sqrt(2.0 * gas.c0 / (gas.gamma + 1.0))
    rho_star = (b1 * b1 / gas.gamma) ** (1.0 / (gas.gamma - 1.0))
    return CriticalData(b1=b1, rho_star=rho_star, flux_star=rho_star * b1)


def entry_residual(gas: GasModel, n0: float, b0: float) -> float:
    """Normalized residual of the entry-speed equation.

    ``b0**(g-1) * (c0 - (g-1)/2 b0**2) * n0**(g-1) / b1**(g+1) - 1``; zero
    exactly when ``n0 * rho(b0) * b0`` equals the sonic flux.
    """
    g = gas.gamma
    b1 = sonic_speed(gas).b1
    c2 = gas.c0 - 0.5 * (g - 1.0) * b0 * b0
    return (b0 * n0) ** (g - 1.0) * c2 / b1 ** (g + 1.0) - 1.0


def subsonic_flux_root(gas: GasModel, target: float, *, xtol: float = 0.0,
                       max_iter: int = 200) -> float:
    """Speed ``q`` in ``[0, b1]`` with ``flux_density(q) == target``.

    Plain bisection on the flux residual; the flux density is strictly
    increasing on the subsonic branch, so the bracket ``[0, b1]`` is always
    valid for ``0 <= target <= flux_star``.  Iterates until the bracket stops
    shrinking in floating point unless ``xtol`` is given.
    """
    crit = sonic_speed(gas)
    if target < 0.0:
        raise NoSubsonicRoot(f"negative flux target {target}")
    if target > crit.flux_star * (1.0 + 1e-15):
        raise NoSubsonicRoot(
            f"flux target {target:.17g} exceeds sonic flux {crit.flux_star:.17g}")
    if target >= crit.flux_star:
        return crit.b1
    lo, hi = 0.0, crit.b1
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        if flux_density(gas, mid) < target:
            lo = mid
        else:
            hi = mid
    else:
        raise ToleranceNotReached("bisection exhausted its iteration budget")
    # closer endpoint in flux
    if abs(flux_density(gas, lo) - target) <= abs(flux_density(gas, hi) - target):
        return lo
    return hi


def _check_n0(n0: float) -> None:
    if not math.isfinite(n0) or n0 < 1.0:
        raise NoSubsonicRoot(
            f"entry width n0={n0} < 1: flux matching impossible on the subsonic branch")


def entry_speed(gas: GasModel, n0: float, tol: float = 1e-12) -> float:
    """Subsonic entry speed ``b0`` for a convergent nozzle with ``n(0) = n0``.

    Bisection on the (monotone) flux residual followed by Newton polishing of
    the normalized algebraic residual.
    """
    _check_n0(n0)
    crit = sonic_speed(gas)
    if n0 == 1.0:
        return crit.b1
    b0 = subsonic_flux_root(gas, crit.flux_star / n0)
    b0 = _newton_polish(gas, n0, b0, lo=0.0, hi=crit.b1)
    if abs(entry_residual(gas, n0, b0)) > tol:
        raise ToleranceNotReached(
            f"entry residual {entry_residual(gas, n0, b0):.3e} above {tol:.1e}")
    return b0


def entry_speed_newton(gas: GasModel, n0: float, tol: float = 1e-12,
                       max_iter: int = 100) -> float:
    """Independent safeguarded-Newton route to the entry speed.

    Newton on the normalized residual starting from ``b1/2``; steps leaving
    the current bracket are replaced by bisection steps.
    """
    _check_n0(n0)
    crit = sonic_speed(gas)
    if n0 == 1.0:
        return crit.b1
    lo, hi = 0.0, crit.b1
    b = 0.5 * crit.b1
    for _ in range(max_iter):
        r = entry_residual(gas, n0, b)
        if abs(r) <= tol * 1e-2:
            return b
        # residual increases with b on (0, b1)
        if r < 0.0:
            lo = b
        else:
            hi = b
        step = r / _entry_residual_db(gas, n0, b)
        cand = b - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if cand == b:
            break
        b = cand
    if abs(entry_residual(gas, n0, b)) > tol:
        raise ToleranceNotReached("safeguarded Newton did not reach tolerance")
    return b


def _entry_residual_db(gas: GasModel, n0: float, b: float) -> float:
    g = gas.gamma
    b1 = sonic_speed(gas).b1
    c2 = gas.c0 - 0.5 * (g - 1.0) * b * b
    dc2 = -(g - 1.0) * b
    return n0 ** (g - 1.0) * ((g - 1.0) * b ** (g - 2.0) * c2 + b ** (g - 1.0) * dc2) / b1 ** (g + 1.0)


def _newton_polish(gas, n0, b, lo, hi, steps=4):
    for _ in range(steps):
        r = entry_residual(gas, n0, b)
        if r == 0.0:
            break
        cand = b - r / _entry_residual_db(gas, n0, b)
        if not (lo < cand < hi) or abs(entry_residual(gas, n0, cand)) >= abs(r):
            break
        b = cand
    return b
