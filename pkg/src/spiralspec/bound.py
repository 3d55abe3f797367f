"""Upper bound on Dirichlet eigenvalue moments of a shrinking spiral domain.

All functions take a geometry object exposing ``s0``, ``s_max``, ``d(s)``,
``W(s)``, ``sample_grid()`` and ``central_area()`` -- either a
:class:`~spiralspec.geometry.GeometryCache` or a
:class:`~spiralspec.geometry.SyntheticGeometry`.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from math import factorial, lgamma

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, GeometryError, NumericalError, RangeError

log = logging.getLogger(__name__)

# r(sigma, 1) <= 2 for sigma < 3/2; the upper bound is used throughout
R_SIGMA = 2.0


class ThresholdVariant(str, Enum):
    AS_STATED = "as_stated_Λ"
    CONSERVATIVE = "conservative_2Λ"

    @property
    def k(self):
        return 1.0 if self is ThresholdVariant.AS_STATED else 2.0


class Mode(str, Enum):
    STANDARD = "standard"
    SMALL_SIGMA = "small_sigma"


@dataclass(frozen=True)
class BoundParams:
    sigma: float
    Lambda: float
    threshold_variant: ThresholdVariant = ThresholdVariant.CONSERVATIVE
    mode: Mode | None = None

    def __post_init__(self):
        object.__setattr__(self, "threshold_variant", ThresholdVariant(self.threshold_variant))
        mode = self.mode
        if mode is None:
            mode = Mode.STANDARD if self.sigma >= 1.5 else Mode.SMALL_SIGMA
        object.__setattr__(self, "mode", Mode(mode))
        if self.sigma < 0.5:
            raise DomainError(f"sigma={self.sigma} < 1/2 is not covered")
        if not self.Lambda > 0:
            raise DomainError(f"Lambda must be positive, got {self.Lambda}")
        if self.mode is Mode.STANDARD and self.sigma < 1.5:
            raise DomainError("standard mode needs sigma >= 3/2")
        if self.mode is Mode.SMALL_SIGMA and self.sigma >= 1.5:
            raise DomainError("small_sigma mode needs sigma < 3/2")


@dataclass
class BoundReport:
    sigma: float
    Lambda: float
    integral_term: float
    c1_term: float
    c2_term: float
    total: float
    sup_W: float
    s_star: float | None
    width_integral: float
    threshold_variant: str = ThresholdVariant.CONSERVATIVE.value
    mode: str = Mode.STANDARD.value
    interval: bool = True
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ThresholdSet:
    """``{s >= s0 : d(s) >= pi (W(s) + k Lambda)^{-1/2}}`` as a union of intervals."""

    intervals: tuple
    is_interval: bool

    @property
    def empty(self):
        return not self.intervals

    @property
    def s_star(self):
        return self.intervals[-1][1] if self.intervals else None


# ---------------------------------------------------------------------------
# constants


def lt_constant_1(sigma: float) -> float:
    """One-dimensional semiclassical constant ``Gamma(s+1) / (sqrt(4 pi) Gamma(s+3/2))``."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    n = sigma - 0.5
    if float(n).is_integer() and n < 150:
        # half-integer sigma: the constant is the rational (2n+1)!! / (2^{n+2} (n+1)!)
        n = int(n)
        return float(Fraction(_double_factorial(2 * n + 1), 2 ** (n + 2) * factorial(n + 1)))
    return float(np.exp(lgamma(sigma + 1) - lgamma(sigma + 1.5)) / np.sqrt(4 * np.pi))


def lt_constant_2(sigma: float) -> float:
    """Two-dimensional semiclassical (Berezin) constant ``1 / (4 pi (sigma + 1))``."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    return 1.0 / (4 * np.pi * (sigma + 1))


def _double_factorial(n):
    return int(np.prod(np.arange(n, 0, -2, dtype=object))) if n > 0 else 1


def constant_ratio(sigma: float, check: bool = True) -> float:
    """``2^{sigma+3} pi L_{sigma,1}``, the sharpness ratio of the two constants.

    For half-integer ``sigma = n + 1/2`` the value is cross-checked against
    ``2^{3/2} pi (2n+1)!! / (n+1)!``.
    """
    value = 2.0 ** (sigma + 3) * np.pi * lt_constant_1(sigma)
    n = sigma - 0.5
    if check and n >= 0 and float(n).is_integer():
        n = int(n)
        closed = 2**1.5 * np.pi * _double_factorial(2 * n + 1) / factorial(n + 1)
        if abs(closed - value) > 1e-10 * closed:
            raise NumericalError(f"half-integer identity failed at sigma={sigma}", value, closed)
    return float(value)


# ---------------------------------------------------------------------------
# potential and threshold sets


def potential_W(cache, s):
    """Direct evaluation of the effective potential at ``s >= s0``."""
    return cache.potential_W(s)


def _refined(grid):
    mids = 0.5 * (grid[:-1] + grid[1:])
    out = np.empty(2 * len(grid) - 1)
    out[0::2], out[1::2] = grid, mids
    return out


def sup_W(cache, rtol=1e-4, max_rounds=12, tail=8):
    """Supremum of ``W`` over ``[s0, s_max]`` on a refining grid.

    Raises :class:`NumericalError` if ``W`` is not decreasing over the last
    grid window, since the supremum beyond the table is then unreliable.
    """
    memo = getattr(cache, "_memo", None)
    if memo is not None and ("sup_W", rtol) in memo:
        return memo[("sup_W", rtol)]
    grid = np.asarray(cache.sample_grid(), dtype=float)
    prev = float(np.max(cache.W(grid)))
    for _ in range(max_rounds):
        grid = _refined(grid)
        w = np.asarray(cache.W(grid))
        cur = float(np.max(w))
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            break
        prev = cur
    else:
        raise NumericalError("sup W did not stabilise under grid refinement", estimate=cur)
    end = w[-tail:]
    if np.any(np.diff(end) > 1e-12 * np.abs(end[:-1]) + 1e-300):
        raise NumericalError("W not decreasing at the end of the table; sup unreliable", estimate=cur)
    if memo is not None:
        memo[("sup_W", rtol)] = cur
    return cur


def _g(cache, s, shift):
    return cache.d(s) * np.sqrt(cache.W(s) + shift) - np.pi


def threshold_set(cache, shift: float, use_W: bool = True) -> ThresholdSet:
    """Intervals where ``d(s) sqrt(W(s) + shift) >= pi``.

    ``shift`` is ``k * Lambda``; with ``use_W=False`` the potential is dropped.
    """
    if use_W:
        g = lambda s: _g(cache, s, shift)  # noqa: E731
    else:
        g = lambda s: cache.d(s) * np.sqrt(shift) - np.pi  # noqa: E731
    grid = np.asarray(cache.sample_grid(), dtype=float)
    if not np.isfinite(cache.s_max):
        # open-ended synthetic geometry: extend until the set closes
        while g(grid[-1]) >= 0:
            grid = np.concatenate([grid, grid[-1] * np.geomspace(1.1, 1e3, 200)])
            if grid[-1] > 1e300:
                raise NumericalError("threshold set does not close")
    vals = np.asarray(g(grid))
    if vals[-1] >= 0:
        raise RangeError(
            f"threshold set reaches the end of the geometry table (s_max={cache.s_max}); "
            "build the cache with a larger theta_max"
        )
    pos = vals >= 0
    if not pos.any():
        return ThresholdSet((), True)
    intervals = []
    start = grid[0] if pos[0] else None
    for i in range(len(grid) - 1):
        if pos[i] != pos[i + 1]:
            root = optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-14 * grid[i + 1], rtol=1e-15)
            if pos[i]:
                intervals.append((start, root))
            else:
                start = root
    ts = ThresholdSet(tuple(intervals), len(intervals) == 1 and intervals[0][0] == grid[0])
    if not ts.is_interval:
        log.warning("threshold set is not a single interval starting at s0: %s", intervals)
    return ts


def threshold_endpoint(cache, params: BoundParams):
    """Right endpoint ``s*`` of the threshold set (``None`` when empty)."""
    return threshold_set(cache, params.threshold_variant.k * params.Lambda).s_star


def _integrate_d(cache, ts: ThresholdSet):
    total = 0.0
    for a, b in ts.intervals:
        knots = cache.sample_grid()
        pts = [p for p in knots if a < p < b] if len(knots) < 5000 else None
        pts = pts if pts and len(pts) < 3000 else None
        val, err = integrate.quad(
            cache.d, a, b, epsabs=0.0, epsrel=1e-11, limit=max(200, 2 * len(pts or ()) + 50), points=pts
        )
        if err > 1e-8 * abs(val):
            raise NumericalError(f"width integral on [{a}, {b}] not converged", val, err)
        total += val
    return total


def width_integral(cache, params: BoundParams) -> float:
    """``int d(s) ds`` over the threshold set of ``params``."""
    return _integrate_d(cache, threshold_set(cache, params.threshold_variant.k * params.Lambda))


# ---------------------------------------------------------------------------
# the bound


def c1_constant(cache, sigma: float, mc_samples: int = 40_000, seed: int = 0) -> float:
    """Berezin constant of the central region: ``2 L_{sigma,2} |Omega_2|``."""
    return 2 * lt_constant_2(sigma) * cache.central_area(mc_samples=mc_samples, seed=seed).area


def c2_term(cache, params: BoundParams, sup=None) -> float:
    """Correction from the operator-valued inequality.

    The lowest eigenvalue of the projected operator is replaced by its upper
    bound ``||W|| + Lambda``; the integration set always uses ``W + 2 Lambda``.
    """
    lam = params.Lambda
    sup = sup_W(cache) if sup is None else sup
    wi = _integrate_d(cache, threshold_set(cache, 2 * lam))
    if wi == 0:
        return 0.0
    lam1 = sup + lam
    pref = R_SIGMA * lt_constant_1(0.5) * lam1 / (np.pi * np.sqrt(lam))
    return float(pref * (sup + 2 * lam) ** 1.5 * wi)


def _assemble(cache, params, prefactor, with_c2, mc_samples, seed):
    sup = sup_W(cache)
    ts = threshold_set(cache, params.threshold_variant.k * params.Lambda)
    wi = _integrate_d(cache, ts)
    integral = prefactor / np.pi * (sup + params.Lambda) ** (params.sigma + 1) * wi
    c1 = c1_constant(cache, params.sigma, mc_samples, seed) * params.Lambda ** (params.sigma + 1)
    c2 = c2_term(cache, params, sup) if with_c2 else 0.0
    return BoundReport(
        sigma=params.sigma,
        Lambda=params.Lambda,
        integral_term=float(integral),
        c1_term=float(c1),
        c2_term=float(c2),
        total=float(integral + c1 + c2),
        sup_W=float(sup),
        s_star=ts.s_star,
        width_integral=float(wi),
        threshold_variant=params.threshold_variant.value,
        mode=params.mode.value,
        interval=ts.is_interval or ts.empty,
    )


def moment_bound(cache, params: BoundParams, mc_samples=40_000, seed=0) -> BoundReport:
    """Upper bound on ``tr (H - Lambda)_-^sigma`` for ``sigma >= 3/2``."""
    if params.mode is not Mode.STANDARD:
        raise DomainError("moment_bound needs standard mode (sigma >= 3/2)")
    return _assemble(cache, params, lt_constant_1(params.sigma), True, mc_samples, seed)


def small_sigma_prefactor(sigma: float) -> float:
    return 2 * R_SIGMA * lt_constant_1(sigma)


def small_sigma_bound(cache, params: BoundParams, mc_samples=40_000, seed=0) -> BoundReport:
    """Variant for ``1/2 <= sigma < 3/2``: constant doubled times r(sigma,1), no c2."""
    if not 0.5 <= params.sigma < 1.5:
        raise DomainError(f"small-sigma bound needs 1/2 <= sigma < 3/2, got {params.sigma}")
    return _assemble(cache, params, small_sigma_prefactor(params.sigma), False, mc_samples, seed)


def evaluate(cache, params: BoundParams, **kw) -> BoundReport:
    if params.mode is Mode.STANDARD:
        return moment_bound(cache, params, **kw)
    return small_sigma_bound(cache, params, **kw)


def asymptotic_bound(cache, sigma: float, Lambda: float, mc_samples=40_000, seed=0) -> float:
    """Large-``Lambda`` form: ``Lambda^{sigma+1} (L/pi int_{d >= pi/sqrt(Lambda)} d + c1)``."""
    if sigma < 1.5:
        raise DomainError("asymptotic bound needs sigma >= 3/2")
    wi = _integrate_d(cache, threshold_set(cache, Lambda, use_W=False))
    c1 = c1_constant(cache, sigma, mc_samples, seed)
    return float(Lambda ** (sigma + 1) * (lt_constant_1(sigma) / np.pi * wi + c1))


def lower_bound_example(sigma: float, Lambda: float, w: float) -> float:
    """Leading lower bound for the ``d(s) = 1/s`` example:
    ``(1-w)^2 / (2^{sigma+3} pi^2) Lambda^{sigma+1} ln Lambda``."""
    if not 0 <= w < 1:
        raise DomainError(f"w must lie in [0, 1), got {w}")
    if Lambda <= 1:
        raise DomainError("Lambda must exceed 1 so that ln Lambda > 0")
    return float((1 - w) ** 2 / (2 ** (sigma + 3) * np.pi**2) * Lambda ** (sigma + 1) * np.log(Lambda))


# ---------------------------------------------------------------------------
# multi-arm


@dataclass
class MultiArmReport:
    arms: list
    total: float
    asymptotic: float | None = None

    def to_dict(self):
        return {
            "arms": [a.to_dict() for a in self.arms],
            "total": self.total,
            "asymptotic": self.asymptotic,
        }


def multi_arm_bound(caches, params: BoundParams, mc_samples=40_000, seed=0, asymptotic=False):
    """Per-arm bounds and their sum for an ``m``-armed spiral.

    Each cache must have been built against its inward neighbour arm (its
    ``gap`` is the angular offset to that arm).  The asymptotic form uses the
    largest per-arm central constant for every arm.
    """
    for c in caches:
        if np.any(np.asarray(c.d(c.sample_grid())) <= 0):
            raise GeometryError("overlapping arms: nonpositive normal width")
    reports = [evaluate(c, params, mc_samples=mc_samples, seed=seed) for c in caches]
    total = float(sum(r.total for r in reports))
    asym = None
    if asymptotic:
        sig, lam = params.sigma, params.Lambda
        c_tilde = max(c1_constant(c, sig, mc_samples, seed) for c in caches)
        ints = sum(_integrate_d(c, threshold_set(c, lam, use_W=False)) for c in caches)
        asym = float(lam ** (sig + 1) * (lt_constant_1(sig) / np.pi * ints + c_tilde * len(caches)))
    return MultiArmReport(reports, total, asym)
