"""Geometry of spiral curves: width, arc length, curvature, Fermi coordinates.

Functions taking a :class:`~spiralspec.profiles.SpiralProfile` work directly
on the analytic curve.  Everything that needs the inverse map ``s -> theta``
or the normal width ``d(s)`` goes through a :class:`GeometryCache`, built once
per profile and immutable afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import (
    AssumptionViolation,
    DomainError,
    GeometryError,
    NotSimpleError,
    NumericalError,
    RangeError,
)
from .profiles import TWO_PI, Family, SpiralProfile

log = logging.getLogger(__name__)


class Classification(str, Enum):
    STRICTLY_EXPANDING = "strictly_expanding"
    EXPANDING = "expanding"
    STRICTLY_SHRINKING = "strictly_shrinking"
    SHRINKING = "shrinking"
    ASYMPTOTICALLY_ARCHIMEDEAN = "asymptotically_archimedean"


class CurvatureDerivatives(NamedTuple):
    gamma: float
    dgamma: float
    d2gamma: float
    dgamma_err: float
    d2gamma_err: float


class AreaEstimate(NamedTuple):
    area: float
    stderr: float


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# pointwise quantities of the curve


def width(profile: SpiralProfile, theta):
    """Coil width ``(r(theta) - r(theta - 2 pi)) / (2 pi)`` for ``theta >= 2 pi``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < TWO_PI):
        raise DomainError("width is defined for theta >= 2*pi only")
    if profile.family is Family.ARCHIMEDEAN:
        out = np.full_like(theta, profile.params["c"])
    else:
        out = profile.coil_increment(theta) / TWO_PI
    return out if out.ndim else float(out)


def _speed_integral(profile, a, b, epsrel=1e-13):
    if b <= a:
        return 0.0
    accept = 1e-10
    if profile.family is Family.TABULATED:
        # the interpolant is only C1 at the knots, so ask for less
        epsrel, accept = 1e-10, 1e-8
    val, err, *rest = integrate.quad(
        profile.speed, a, b, epsabs=0.0, epsrel=epsrel, limit=400, full_output=1
    )
    if len(rest) > 1 and abs(err) > accept * abs(val):
        raise NumericalError(
            f"arc length quadrature on [{a}, {b}] did not converge", estimate=val, error=err
        )
    return val


def arc_length(profile: SpiralProfile, theta: float) -> float:
    """Arc length from the origin (first sample for tabulated profiles) to ``theta``
    by adaptive Gauss-Kronrod quadrature."""
    if theta < 0:
        raise DomainError("arc length needs theta >= 0")
    # split at decades so the integrable singularity of r' at 0 stays isolated
    t0 = profile.theta_start
    if theta < t0:
        raise DomainError(f"theta={theta} below the first profile sample {t0}")
    knots = [t0] + [t for t in np.geomspace(1e-6, 1e8, 15) if t0 < t < theta] + [float(theta)]
    return float(sum(_speed_integral(profile, a, b) for a, b in zip(knots[:-1], knots[1:])))


def curvature_theta(profile: SpiralProfile, theta):
    """Signed curvature ``(r^2 + 2 r'^2 - r r'') / (r^2 + r'^2)^{3/2}``."""
    theta = np.asarray(theta, dtype=float)
    r, dr, d2r = profile.r(theta), profile.dr(theta), profile.d2r(theta)
    den = (r * r + dr * dr) ** 1.5
    if np.any(den == 0):
        raise GeometryError("curvature undefined where r and r' vanish together")
    out = (r * r + 2 * dr * dr - r * d2r) / den
    return out if out.ndim else float(out)


def fermi_point(profile: SpiralProfile, theta, u):
    """Point at distance ``u`` from the curve along the inward normal at ``theta``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("Fermi coordinate u must be nonnegative")
    return profile.point(theta) + u[..., None] * profile.inward_normal(theta)


def distance_to_curve(profile: SpiralProfile, p, theta_window, n_scan=256):
    """Distance from ``p`` to the curve restricted to ``theta_window``.

    Coarse scan followed by Newton on the stationarity condition
    ``(Gamma(t) - p) . Gamma'(t) = 0``.  Returns ``(distance, argmin_theta)``.
    """
    lo, hi = map(float, theta_window)
    if not hi > lo:
        raise DomainError("empty theta window")
    p = np.asarray(p, dtype=float)
    ts = np.linspace(lo, hi, n_scan)
    dist = np.linalg.norm(profile.point(ts) - p, axis=-1)
    i = int(np.argmin(dist))
    best_t, best_d = ts[i], dist[i]
    t = best_t
    step = (hi - lo) / (n_scan - 1)
    for _ in range(50):
        r, dr, d2r = profile.r(t), profile.dr(t), profile.d2r(t)
        c, s = np.cos(t), np.sin(t)
        g = np.array([r * c, r * s]) - p
        g1 = np.array([dr * c - r * s, dr * s + r * c])
        g2 = np.array([d2r * c - 2 * dr * s - r * c, d2r * s + 2 * dr * c - r * s])
        f, fp = g @ g1, g1 @ g1 + g @ g2
        if fp <= 0:
            break
        dt = -f / fp
        dt = float(np.clip(dt, -step, step))
        t = min(max(t + dt, lo), hi)
        if abs(dt) <= 1e-15 * (1 + abs(t)):
            break
    d = float(np.linalg.norm(profile.point(t) - p))
    if d < best_d:
        best_t, best_d = float(t), d
    return best_d, float(best_t)


def classify(profile: SpiralProfile, theta_max=1e6, n=400, slope_tol=0.05, flat_tol=1e-3):
    """Classify the spiral by monotonicity and limit of its width function.

    The limit is judged from the log-log slope of ``a(theta)`` over the last
    decade of the scan: clearly negative means ``a -> 0``, clearly positive
    means ``a -> infinity``, and a flat tail means a finite nonzero limit.
    """
    hi = min(theta_max, profile.theta_max)
    th = np.geomspace(max(2 * TWO_PI, profile.theta_min), hi, n)
    a = np.asarray(width(profile, th))
    da = np.diff(a)
    # a is a difference of two radii: cancellation leaves ~eps*r of noise
    rr = np.asarray(profile.r(th))
    noise = 64 * np.finfo(float).eps * (rr[1:] + rr[:-1]) / TWO_PI
    inc = np.all(da >= -noise)
    dec = np.all(da <= noise)
    if not (inc or dec):
        raise NotSimpleError("width function is not monotone on the scan range")
    tail = th >= hi / 10
    slope = np.polyfit(np.log(th[tail]), np.log(a[tail]), 1)[0]
    if slope < -slope_tol:
        return Classification.STRICTLY_SHRINKING
    if slope > slope_tol:
        return Classification.STRICTLY_EXPANDING
    spread = (a[tail].max() - a[tail].min()) / a[tail].mean()
    if spread < flat_tol:
        return Classification.ASYMPTOTICALLY_ARCHIMEDEAN
    return Classification.SHRINKING if dec else Classification.EXPANDING


# ---------------------------------------------------------------------------
# normal width and the neighbouring coil


def _neighbour(profile, phi, gap):
    """Point and tangent of the inward neighbour curve at its own parameter ``phi``.

    For a single-arm spiral the neighbour is the previous coil (``gap = 2 pi``,
    no rotation); for multi-arm spirals it is the next arm rotated by ``gap``.
    """
    R = _rot(gap)
    phi = np.asarray(phi, dtype=float)
    r, dr = profile.r(phi), profile.dr(phi)
    c, s = np.cos(phi), np.sin(phi)
    pt = np.stack([r * c, r * s], axis=-1) @ R.T
    tg = np.stack([dr * c - r * s, dr * s + r * c], axis=-1) @ R.T
    return pt, tg


def normal_width_theta(profile, theta, gap=TWO_PI, n_scan=96, _widen=True, half_window=None):
    """Length of the inward normal at ``theta`` up to the neighbouring coil.

    Scans the neighbour parameter over ``theta - gap +/- half_window``, then
    polishes the smallest positive crossing with 2-variable Newton on
    ``N(phi) - P - u n = 0``.  Returns ``(d, phi)``.
    """
    if half_window is None:
        half_window = min(np.pi / 2, gap / 2)
    P = profile.point(theta)
    n = profile.inward_normal(theta)
    lo = max(theta - gap - half_window, 1e-9)
    hi = theta - gap + half_window
    if hi <= lo:
        raise GeometryError(f"no neighbouring coil at theta={theta}")
    phis = np.linspace(lo, hi, n_scan)
    pts, _ = _neighbour(profile, phis, gap)
    rel = pts - P
    f = _cross(n, rel)
    u = rel @ n
    crossings = []
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]:
        w = f[i] / (f[i] - f[i + 1]) if f[i] != f[i + 1] else 0.0
        ug = u[i] + w * (u[i + 1] - u[i])
        if ug > 0:
            crossings.append((ug, phis[i] + w * (phis[i + 1] - phis[i]), phis[i], phis[i + 1]))
    if not crossings:
        if _widen:
            return normal_width_theta(profile, theta, gap, 2 * n_scan, False, 2 * half_window)
        raise GeometryError(
            f"inward normal at theta={theta} does not meet the neighbouring coil "
            "(spiral not shrinking here, or s < s0)"
        )
    ug, phi, a, b = min(crossings)
    scale = float(profile.r(theta))
    for _ in range(60):
        q, tq = _neighbour(profile, phi, gap)
        res = q - P - ug * n
        if np.linalg.norm(res) <= 1e-14 * scale:
            break
        J = np.column_stack([tq, -n])
        dphi, du = np.linalg.solve(J, -res)
        phi_new = phi + dphi
        if not a - (b - a) <= phi_new <= b + (b - a):
            phi_new = 0.5 * (a + b)
        phi, ug = phi_new, ug + du
    q, _ = _neighbour(profile, phi, gap)
    resid = np.linalg.norm(q - P - ug * n)
    if resid > 1e-9 * scale or ug <= 0:
        raise NumericalError(
            f"normal-width Newton failed at theta={theta}", estimate=ug, error=resid
        )
    return float(ug), float(phi)


# ---------------------------------------------------------------------------
# the cache


def effective_potential(gamma, dgamma, d2gamma, d):
    """Curvature-induced potential of the straightened strip.

    ``gamma^2 / (4 (1 - gamma d)^2) + d |gamma''| / (2 (1 - gamma d)^3)
    + 5/4 d^2 |gamma'|^2 / (1 - gamma d)^4`` with derivatives in arc length.
    """
    gamma, dgamma, d2gamma, d = (np.asarray(x, dtype=float) for x in (gamma, dgamma, d2gamma, d))
    q = 1.0 - gamma * d
    if np.any(q <= 0):
        raise AssumptionViolation("1 - gamma*d <= 0: Fermi coordinates break down")
    out = (
        gamma**2 / (4 * q**2)
        + d * np.abs(d2gamma) / (2 * q**3)
        + 1.25 * d**2 * dgamma**2 / q**4
    )
    return out if out.ndim else float(out)


def _richardson(fun, s, h0, lo):
    """Central first/second differences of ``fun`` at ``s`` with a 3-level
    Richardson tableau.  Returns values and error estimates."""
    h0 = min(h0, 0.5 * (s - lo)) if s - lo < 2 * h0 else h0
    hs = [h0, h0 / 2, h0 / 4]
    f0 = fun(s)
    d1, d2 = [], []
    for h in hs:
        fp, fm = fun(s + h), fun(s - h)
        d1.append((fp - fm) / (2 * h))
        d2.append((fp - 2 * f0 + fm) / (h * h))

    def tableau(col):
        r1 = [(4 * col[i + 1] - col[i]) / 3 for i in range(2)]
        r2 = (16 * r1[1] - r1[0]) / 15
        return r2, abs(r2 - r1[1])

    (g1, e1), (g2, e2) = tableau(d1), tableau(d2)
    return f0, g1, g2, e1, e2


def arc_derivatives(fun, s, lo=0.0, rtol=1e-7, h0=None, rounds=6) -> CurvatureDerivatives:
    """Value and first two derivatives of ``fun`` at ``s`` with step control.

    Starts from ``h0 = 0.02 (1 + s)`` and shrinks the step 4x until the
    Richardson error estimates fall below ``rtol`` (plus a small absolute
    floor scaled by ``|fun(s)|``).  Returns the best estimate found; raises
    :class:`NumericalError` only if the error is hopeless.
    """
    h = 0.02 * (1.0 + s) if h0 is None else h0
    best = None
    for _ in range(rounds):
        g, g1, g2, e1, e2 = _richardson(fun, s, h, lo)
        tol1 = rtol * abs(g1) + 1e-9 * abs(g) / (1 + s)
        tol2 = rtol * abs(g2) + 1e-9 * abs(g) / (1 + s) ** 2
        cand = CurvatureDerivatives(g, g1, g2, e1, e2)
        if best is None or e1 + e2 < best.dgamma_err + best.d2gamma_err:
            best = cand
        if e1 <= tol1 and e2 <= tol2:
            return cand
        h /= 4
    if best.dgamma_err > 1e3 * (abs(best.dgamma) + abs(best.gamma) / (1 + s)):
        raise NumericalError(
            f"derivative step control failed at s={s}",
            estimate=best, error=(best.dgamma_err, best.d2gamma_err),
        )
    return best


@dataclass(frozen=True, eq=False)
class GeometryCache:
    """Tabulated arc-length geometry of one spiral arm.

    Holds the arc-length table ``s(theta)`` on ``[0, theta_max]`` and, on the
    Fermi part ``s >= s_start``, nodes of ``theta, gamma, gamma', gamma'', d``
    and the effective potential ``W``.  Interpolants are cubic; the node grid
    is refined until interpolated ``d`` and ``W`` match direct evaluation to
    ``grid_tol`` at interval midpoints.

    Build with :meth:`build`.
    """

    profile: SpiralProfile
    gap: float
    grid_tol: float
    margin: float
    s0: float
    theta0: float
    s_max: float
    theta_max: float
    # arc table
    arc_theta: np.ndarray = field(repr=False)
    arc_s: np.ndarray = field(repr=False)
    # Fermi node table (s >= s0)
    nodes: dict = field(repr=False)
    s_of_theta: Callable = field(repr=False)
    theta_of_s: Callable = field(repr=False)
    _log_interp: dict = field(repr=False)
    _memo: dict = field(default_factory=dict, repr=False)

    # -- construction -------------------------------------------------------

    @classmethod
    def build(
        cls,
        profile: SpiralProfile,
        theta_max: float = 2e3,
        margin: float = 0.05,
        grid_tol: float = 1e-6,
        gap: float = TWO_PI,
        nodes_per_decade: int = 40,
        max_refine: int = 14,
        check_assumption: bool = True,
    ) -> "GeometryCache":
        # leave room for the difference stencils of the last node inside the profile range
        theta_max = float(min(theta_max, profile.theta_max / 1.25))
        theta_start = max(profile.theta_min, gap)
        if theta_max <= 2 * theta_start:
            raise DomainError("theta_max too small for a Fermi table")
        if check_assumption:
            profile.check_assumption(theta_max)

        # arc-length table on [0, theta_max]
        # the arc table runs past theta_max so difference stencils at the last node fit
        arc_max = 1.25 * theta_max
        t0 = profile.theta_start
        n_arc = int(np.ceil(60 * np.log10(arc_max / max(t0, 1e-8))))
        if t0 > 0:
            th = np.geomspace(t0, arc_max, n_arc)
        else:
            th = np.concatenate([[0.0], np.geomspace(1e-8, arc_max, n_arc)])
        seg = [_speed_integral(profile, a, b) for a, b in zip(th[:-1], th[1:])]
        s = np.concatenate([[0.0], np.cumsum(seg)])
        v = profile.speed(th)
        v[0] = v[1]  # r' may blow up at the origin; the first cell is tiny
        s_of_theta = CubicHermiteSpline(th, s, v, extrapolate=False)
        theta_of_s = CubicHermiteSpline(s, th, 1.0 / v, extrapolate=False)

        partial = cls(
            profile, float(gap), grid_tol, margin, np.nan, np.nan, float(s[-1]), arc_max,
            th, s, {}, s_of_theta, theta_of_s, {},
        )

        # Fermi node table, refined by midpoint checks in log(theta)
        n0 = max(16, int(nodes_per_decade * np.log10(theta_max / theta_start)))
        nth = np.geomspace(theta_start, theta_max, n0)
        table = partial._node_values(nth)
        for _ in range(max_refine):
            mids = np.sqrt(nth[:-1] * nth[1:])
            direct = partial._node_values(mids)
            fit = CubicSpline(np.log(table["s"]), np.log(table["d"]))
            interp_d = np.exp(fit(np.log(direct["s"])))
            bad = np.abs(interp_d - direct["d"]) > grid_tol * direct["d"]
            # W is only defined where gamma*d < 1
            fin = np.isfinite(table["W"])
            fin[: np.argmax(fin)] = False
            # tabulated W carries interpolation noise in d2gamma; refine on d only
            if fin.sum() >= 4 and profile.family is not Family.TABULATED:
                fitw = CubicSpline(np.log(table["s"][fin]), np.log(table["W"][fin]))
                chk = np.isfinite(direct["W"]) & (direct["s"] >= table["s"][fin][0])
                werr = np.abs(np.exp(fitw(np.log(direct["s"][chk]))) - direct["W"][chk])
                bad[chk] |= werr > grid_tol * direct["W"][chk]
            if not bad.any():
                break
            nth = np.concatenate([nth, mids[bad]])
            order = np.argsort(nth)
            nth = nth[order]
            table = {k: np.concatenate([table[k], direct[k][bad]])[order] for k in table}
        else:
            log.warning("geometry grid did not reach grid_tol=%g after %d refinements", grid_tol, max_refine)

        dg = table["gamma"] * table["d"]
        i0 = s0_index(dg, margin)
        keep = slice(i0, None)
        nodes = {k: v[keep].copy() for k, v in table.items()}
        nodes["dgamma_product"] = dg[keep].copy()
        logs = np.log(nodes["s"])
        interp = {
            "d": CubicSpline(logs, np.log(nodes["d"])),
            "gamma": CubicSpline(logs, np.log(nodes["gamma"])),
            "W": CubicSpline(logs, np.log(nodes["W"])),
        }
        return cls(
            profile, float(gap), grid_tol, margin,
            float(nodes["s"][0]), float(nodes["theta"][0]), float(nodes["s"][-1]), arc_max,
            th, s, nodes, s_of_theta, theta_of_s, interp,
        )

    def _node_values(self, thetas):
        out = {k: np.empty(len(thetas)) for k in ("theta", "s", "gamma", "dgamma", "d2gamma", "d", "W")}
        for i, t in enumerate(thetas):
            s = self.arc_length(t)
            cd = self._curvature_derivatives_at(s, t)
            d, _ = normal_width_theta(self.profile, t, self.gap)
            out["theta"][i], out["s"][i] = t, s
            out["gamma"][i], out["dgamma"][i], out["d2gamma"][i] = cd[:3]
            out["d"][i] = d
        q = 1 - out["gamma"] * out["d"]
        with np.errstate(divide="ignore", invalid="ignore"):
            W = (
                out["gamma"] ** 2 / (4 * q**2)
                + out["d"] * np.abs(out["d2gamma"]) / (2 * q**3)
                + 1.25 * out["d"] ** 2 * out["dgamma"] ** 2 / q**4
            )
        out["W"] = np.where(q > 0, W, np.nan)
        return out

    # -- arc length and its inverse ----------------------------------------

    def arc_length(self, theta: float) -> float:
        """Precise ``s(theta)`` from the cumulative table plus one local quadrature."""
        if not 0 <= theta <= self.theta_max * (1 + 1e-12):
            raise RangeError(f"theta={theta} outside cached range [0, {self.theta_max}]")
        i = int(np.searchsorted(self.arc_theta, theta, side="right")) - 1
        i = min(max(i, 0), len(self.arc_theta) - 1)
        return float(self.arc_s[i] + _speed_integral(self.profile, self.arc_theta[i], theta))

    def theta_of_arc(self, s: float) -> float:
        """Inverse arc length by bracketed, safeguarded Newton iteration."""
        if not 0 <= s <= self.arc_s[-1] * (1 + 1e-12):
            raise RangeError(f"s={s} outside cached range [0, {self.arc_s[-1]}]")
        if s == 0:
            return float(self.arc_theta[0])
        j = int(np.searchsorted(self.arc_s, s))
        lo, hi = self.arc_theta[max(j - 1, 0)], self.arc_theta[min(j, len(self.arc_s) - 1)]
        t = float(self.theta_of_s(s))
        if not lo <= t <= hi:
            t = 0.5 * (lo + hi)
        for _ in range(100):
            f = self.arc_length(t) - s
            if f > 0:
                hi = t
            else:
                lo = t
            if abs(f) <= 1e-15 * (1 + s):
                break
            tn = t - f / float(self.profile.speed(t))
            if not lo < tn < hi:
                tn = 0.5 * (lo + hi)
            if abs(tn - t) <= 4e-16 * max(1.0, t):
                t = tn
                break
            t = tn
        return float(t)

    # -- curvature in arc length -------------------------------------------

    def _gamma_of_s(self, s):
        return curvature_theta(self.profile, self.theta_of_arc(s))

    def _curvature_derivatives_at(self, s, theta=None, rtol=1e-7):
        return arc_derivatives(self._gamma_of_s, s, rtol=rtol)

    def curvature_arc_derivatives(self, s: float) -> CurvatureDerivatives:
        """``gamma, gamma', gamma''`` in arc length with error estimates."""
        if s < self.s0:
            raise DomainError(f"s={s} below s0={self.s0}")
        return self._curvature_derivatives_at(s)

    # -- Fermi strip --------------------------------------------------------

    def normal_width(self, s: float) -> float:
        """Direct evaluation of ``d(s)`` (not interpolated)."""
        if s < self.s0:
            raise DomainError(f"s={s} below s0={self.s0}")
        return normal_width_theta(self.profile, self.theta_of_arc(s), self.gap)[0]

    def potential_W(self, s: float) -> float:
        """Direct evaluation of the effective potential at ``s``."""
        cd = self.curvature_arc_derivatives(s)
        return effective_potential(cd.gamma, cd.dgamma, cd.d2gamma, self.normal_width(s))

    def _eval(self, key, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.s0 * (1 - 1e-12)) or np.any(s > self.s_max * (1 + 1e-12)):
            raise RangeError(f"s outside cached Fermi range [{self.s0}, {self.s_max}]")
        out = np.exp(self._log_interp[key](np.log(np.clip(s, self.s0, self.s_max))))
        return out if out.ndim else float(out)

    def d(self, s):
        """Interpolated normal width."""
        return self._eval("d", s)

    def gamma(self, s):
        return self._eval("gamma", s)

    def W(self, s):
        """Interpolated effective potential."""
        return self._eval("W", s)

    def sample_grid(self):
        return self.nodes["s"]

    # -- central region -----------------------------------------------------

    def central_area(self, mc_samples: int = 40_000, seed: int = 0, replicas: int = 4) -> AreaEstimate:
        """Area of the part of the domain not covered by the Fermi strip ``s > s0``.

        Stratified jittered sampling of the disc of radius ``r(theta0)``; a
        sample point belongs to the strip iff the foot of its normal on the
        enclosing coil lies beyond ``theta0``.  ``replicas`` independent
        jitter sets give the standard error.
        """
        key = (mc_samples, seed, replicas)
        if key in self._memo:
            return self._memo[key]
        R = float(self.profile.r(self.theta0))
        m = max(8, int(np.sqrt(mc_samples)))
        rng = np.random.default_rng(seed)
        cell = 2 * R / m
        edges = -R + cell * np.arange(m)
        gx, gy = np.meshgrid(edges, edges, indexing="ij")
        areas = []
        for _ in range(replicas):
            x = gx + cell * rng.random(gx.shape)
            y = gy + cell * rng.random(gy.shape)
            pts = np.stack([x.ravel(), y.ravel()], axis=-1)
            inside = np.hypot(pts[:, 0], pts[:, 1]) < R
            central = np.zeros(len(pts), dtype=bool)
            central[inside] = ~self._in_strip(pts[inside])
            areas.append(central.mean() * (2 * R) ** 2)
        areas = np.asarray(areas)
        est = AreaEstimate(float(areas.mean()), float(areas.std(ddof=1) / np.sqrt(replicas)))
        self._memo[key] = est
        return est

    def _in_strip(self, pts):
        """Vectorized membership test for the Fermi strip ``{s > s0, 0 < u < d}``."""
        prof = self.profile
        rho = np.hypot(pts[:, 0], pts[:, 1])
        psi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
        # enclosing coil: smallest t = psi + 2 pi k with r(t) > rho
        t = psi.copy()
        for _ in range(10_000):
            low = prof.r(t) <= rho
            if not low.any():
                break
            t[low] += TWO_PI
        # inside this arm's channel only if the inward neighbour lies below rho
        inner_t = t - self.gap
        inner_r = np.where(inner_t > 0, prof.r(np.maximum(inner_t, 0)), 0.0)
        own = inner_r < rho
        # Newton for the foot of the normal: cross(n(t), p - Gamma(t)) = 0
        for _ in range(30):
            g = prof.point(t)
            n = prof.inward_normal(t)
            f = _cross(n, pts - g)
            eps = 1e-6 * (1 + t)
            fp = (_cross(prof.inward_normal(t + eps), pts - prof.point(t + eps)) - f) / eps
            dt = np.where(fp != 0, -f / np.where(fp != 0, fp, 1), 0.0)
            t = np.maximum(t + np.clip(dt, -0.5, 0.5), 1e-9)
            if np.max(np.abs(dt)) < 1e-12:
                break
        u = np.einsum("ij,ij->i", pts - prof.point(t), prof.inward_normal(t))
        return own & (t > self.theta0) & (u > 0)


def s0_index(dg, margin, tail=8):
    """Smallest node index after which ``d*gamma <= 1 - margin`` everywhere."""
    ok = np.isfinite(dg) & (dg <= 1 - margin)
    if not ok[-1]:
        raise AssumptionViolation("d*gamma <= 1 - margin never holds on the scan range")
    bad = np.nonzero(~ok)[0]
    idx = int(bad[-1] + 1) if bad.size else 0
    window = dg[-tail:]
    if np.any(np.diff(window) > 1e-12 * np.abs(window[:-1])):
        raise AssumptionViolation("d*gamma not decreasing beyond the scan window")
    return idx


def find_s0(profile: SpiralProfile, theta_max=2e3, margin=0.05, **kw) -> float:
    """Smallest grid arc length beyond which ``d(s) gamma(s) <= 1 - margin``."""
    return GeometryCache.build(profile, theta_max=theta_max, margin=margin, **kw).s0


# ---------------------------------------------------------------------------
# synthetic geometry (for closed-form checks of the bound)


@dataclass(frozen=True, eq=False)
class SyntheticGeometry:
    """Fermi-strip data given directly as functions of arc length.

    Stands in for a :class:`GeometryCache` wherever only ``d``, ``W`` and the
    central area are needed.  ``W`` is taken from ``W_fn`` if given, else
    assembled from ``gamma``/``dgamma``/``d2gamma``, else zero.
    """

    d_fn: Callable
    s0: float = 1.0
    s_max: float = np.inf
    W_fn: Callable | None = None
    gamma_fn: Callable | None = None
    dgamma_fn: Callable | None = None
    d2gamma_fn: Callable | None = None
    area: float = 0.0
    n_grid: int = 2000

    def d(self, s):
        s = np.asarray(s, dtype=float)
        out = np.broadcast_to(self.d_fn(s), s.shape).astype(float)
        return out if out.ndim else float(out)

    def gamma(self, s):
        s = np.asarray(s, dtype=float)
        if self.gamma_fn is None:
            out = np.zeros_like(s)
        else:
            out = np.broadcast_to(self.gamma_fn(s), s.shape).astype(float)
        return out if out.ndim else float(out)

    def W(self, s):
        s = np.asarray(s, dtype=float)
        if self.W_fn is not None:
            out = np.broadcast_to(self.W_fn(s), s.shape).astype(float)
        elif self.gamma_fn is not None:
            zero = np.zeros_like(s)
            dg = zero if self.dgamma_fn is None else self.dgamma_fn(s)
            d2g = zero if self.d2gamma_fn is None else self.d2gamma_fn(s)
            out = np.broadcast_to(effective_potential(self.gamma(s), dg, d2g, self.d(s)), s.shape)
        else:
            out = np.zeros_like(s)
        out = np.asarray(out, dtype=float)
        return out if out.ndim else float(out)

    def potential_W(self, s):
        return self.W(s)

    def sample_grid(self):
        hi = self.s_max if np.isfinite(self.s_max) else self.s0 * 1e4
        return np.geomspace(self.s0, hi, self.n_grid)

    def central_area(self, mc_samples=None, seed=0, replicas=None) -> AreaEstimate:
        return AreaEstimate(float(self.area), 0.0)
