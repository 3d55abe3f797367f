"""Analytic and tabulated descriptions of a spiral curve r(theta)."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import AssumptionViolation, DomainError

TWO_PI = 2.0 * np.pi


class Family(str, Enum):
    POWER = "power"
    ARCHIMEDEAN = "archimedean"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class SpiralProfile:
    """Polar graph ``(r(theta), theta)`` with first and second derivatives.

    Use the constructors :meth:`power`, :meth:`archimedean` and
    :meth:`tabulated` rather than the raw initializer.

    ``theta_min`` is the angle below which the assumption checks (concavity,
    bounded second derivative) are waived; near the origin a power profile
    with ``alpha < 1`` has an unbounded second derivative.
    """

    family: Family
    params: dict = field(default_factory=dict)
    theta_min: float = TWO_PI
    derivative_order: int = 2
    _interp: object = field(default=None, repr=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def power(cls, c=1.0, alpha=0.5, theta_min=TWO_PI):
        """``r = c * theta**alpha``; shrinking iff ``0 < alpha < 1``."""
        if c <= 0 or alpha <= 0:
            raise DomainError(f"power profile needs c > 0 and alpha > 0, got c={c}, alpha={alpha}")
        return cls(Family.POWER, {"c": float(c), "alpha": float(alpha)}, float(theta_min))

    @classmethod
    def archimedean(cls, c=1.0, theta_min=TWO_PI):
        if c <= 0:
            raise DomainError(f"archimedean profile needs c > 0, got {c}")
        return cls(Family.ARCHIMEDEAN, {"c": float(c)}, float(theta_min))

    @classmethod
    def tabulated(cls, theta, r, theta_min=TWO_PI):
        """Monotone cubic interpolant through ``(theta_i, r_i)`` samples."""
        theta = np.asarray(theta, dtype=float)
        r = np.asarray(r, dtype=float)
        if theta.ndim != 1 or theta.shape != r.shape or theta.size < 4:
            raise DomainError("tabulated profile needs at least 4 paired samples")
        if np.any(np.diff(theta) <= 0) or np.any(np.diff(r) <= 0):
            raise DomainError("tabulated samples must be strictly increasing in both coordinates")
        interp = PchipInterpolator(theta, r, extrapolate=False)
        return cls(
            Family.TABULATED,
            {"theta": theta.tolist(), "r": r.tolist()},
            float(theta_min),
            derivative_order=1,
            _interp=(interp, interp.derivative()),
        )

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kind = data.pop("family")
        theta_min = data.pop("theta_min", TWO_PI)
        if kind == Family.POWER:
            return cls.power(data.get("c", 1.0), data.get("alpha", 0.5), theta_min)
        if kind == Family.ARCHIMEDEAN:
            return cls.archimedean(data.get("c", 1.0), theta_min)
        if kind == Family.TABULATED:
            return cls.tabulated(data["theta"], data["r"], theta_min)
        raise DomainError(f"unknown profile family {kind!r}")

    def to_dict(self):
        return {"family": self.family.value, **self.params, "theta_min": self.theta_min}

    # -- evaluation ---------------------------------------------------------

    @property
    def theta_max(self):
        if self.family is Family.TABULATED:
            return self.params["theta"][-1]
        return np.inf

    @property
    def theta_start(self):
        """Where arc length is measured from: 0, or the first tabulated sample."""
        if self.family is Family.TABULATED:
            return self.params["theta"][0]
        return 0.0

    def r(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.family is Family.POWER:
            p = self.params
            return p["c"] * np.power(np.maximum(theta, 0.0), p["alpha"])
        if self.family is Family.ARCHIMEDEAN:
            return self.params["c"] * theta
        return self._interp[0](theta)

    def dr(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.family is Family.POWER:
            c, a = self.params["c"], self.params["alpha"]
            with np.errstate(divide="ignore"):
                return c * a * np.power(theta, a - 1.0)
        if self.family is Family.ARCHIMEDEAN:
            return np.full_like(theta, self.params["c"])
        return self._interp[1](theta)

    def d2r(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.family is Family.POWER:
            c, a = self.params["c"], self.params["alpha"]
            with np.errstate(divide="ignore", invalid="ignore"):
                return c * a * (a - 1.0) * np.power(theta, a - 2.0)
        if self.family is Family.ARCHIMEDEAN:
            return np.zeros_like(theta)
        # central difference of the interpolated first derivative
        lo, hi = self.params["theta"][0], self.params["theta"][-1]
        step = 1e-4 * (hi - lo) / len(self.params["theta"])
        a = np.clip(theta - step, lo, hi)
        b = np.clip(theta + step, lo, hi)
        return (self._interp[1](b) - self._interp[1](a)) / (b - a)

    def coil_increment(self, theta):
        """``r(theta) - r(theta - 2 pi)`` without cancellation for analytic families."""
        theta = np.asarray(theta, dtype=float)
        if self.family is Family.ARCHIMEDEAN:
            return np.full_like(theta, self.params["c"] * TWO_PI)
        if self.family is Family.POWER:
            c, a = self.params["c"], self.params["alpha"]
            # c th^a (1 - (1 - 2pi/th)^a); log1p(-1) = -inf gives r(th) at th = 2 pi
            with np.errstate(divide="ignore"):
                return -c * np.power(theta, a) * np.expm1(a * np.log1p(-TWO_PI / theta))
        return self.r(theta) - self.r(theta - TWO_PI)

    def speed(self, theta):
        """``ds/dtheta = sqrt(r'^2 + r^2)``."""
        return np.hypot(self.dr(theta), self.r(theta))

    def point(self, theta):
        """Cartesian coordinates of the curve point, shape ``(..., 2)``."""
        theta = np.asarray(theta, dtype=float)
        r = self.r(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    def inward_normal(self, theta):
        """Unit normal pointing towards the previous coil."""
        theta = np.asarray(theta, dtype=float)
        r, dr = self.r(theta), self.dr(theta)
        v = np.hypot(dr, r)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([-(dr * s + r * c) / v, (dr * c - r * s) / v], axis=-1)

    def check_assumption(self, theta_max, n=2000):
        """Sample r' > 0, r'' < 0 and boundedness of r'' on ``[theta_min, theta_max]``.

        Returns ``sup |r''|`` over the samples; raises on violation.
        """
        th = np.geomspace(max(self.theta_min, 1e-12), theta_max, n)
        dr, d2r = self.dr(th), self.d2r(th)
        if np.any(dr <= 0):
            raise AssumptionViolation("r is not strictly increasing on the checked range")
        if np.any(d2r >= 0):
            raise AssumptionViolation("r'' < 0 fails on the checked range (profile not concave)")
        bound = float(np.max(np.abs(d2r)))
        if not np.isfinite(bound):
            raise AssumptionViolation("r'' unbounded on the checked range")
        return bound
