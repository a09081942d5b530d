"""Cross-section width n(x) = 1 + a (1 - x)**p of the approximate nozzle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolation, InvalidParameter

_EXACT_TOL = 1e-14


@dataclass(frozen=True)
class NozzleProfile:
    a: float = 0.25
    p: float = 2.0

    def n(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 + self.a * (1.0 - x) ** self.p

    def dn(self, x):
        x = np.asarray(x, dtype=float)
        return -self.a * self.p * (1.0 - x) ** (self.p - 1.0)

    def d2n(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * self.p * (self.p - 1.0) * (1.0 - x) ** (self.p - 2.0)

    @property
    def n0(self) -> float:
        return float(self.n(0.0))


def make_profile(a: float = 0.25, p: float = 2.0, *, strict: bool = True) -> NozzleProfile:
    """Build a width profile.

    In strict mode only ``a > 0`` and ``p == 2`` are accepted; for ``p > 2``
    the curvature vanishes at the exit.  Lenient mode accepts anything finite
    with ``p >= 2`` so that violations can be diagnosed by ``validate_H1``.
    """
    if not (np.isfinite(a) and np.isfinite(p)):
        raise InvalidParameter("profile parameters must be finite")
    if strict:
        if a <= 0.0:
            raise HypothesisViolation(f"amplitude a must be > 0, got {a}")
        if p != 2.0:
            raise HypothesisViolation(f"p={p}: n''(1) = 0 violates strict convexity")
    elif p < 2.0:
        raise InvalidParameter(f"exponent p must be >= 2, got {p}")
    return NozzleProfile(a=float(a), p=float(p))


@dataclass
class ValidationReport:
    min_d2n: float
    max_interior_dn: float
    exit_slope: float
    exit_width_error: float
    flags: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.flags.values())


def validate_H1(profile: NozzleProfile, samples: int = 101) -> ValidationReport:
    """Sampled check of convexity, monotone contraction and exit normalization."""
    if samples < 3:
        raise InvalidParameter("need at least 3 samples")
    xs = np.linspace(0.0, 1.0, samples)
    d2 = profile.d2n(xs)
    d1 = profile.dn(xs[1:-1])
    rep = ValidationReport(
        min_d2n=float(d2.min()),
        max_interior_dn=float(d1.max()),
        exit_slope=float(abs(profile.dn(1.0))),
        exit_width_error=float(abs(profile.n(1.0) - 1.0)),
    )
    rep.flags = {
        "convex": rep.min_d2n > 0.0,
        "decreasing": rep.max_interior_dn < 0.0,
        "flat_exit": rep.exit_slope < _EXACT_TOL,
        "unit_exit": rep.exit_width_error < _EXACT_TOL,
    }
    return rep
