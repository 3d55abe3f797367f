"""Finite-difference Dirichlet Laplacian on rasterized domains.

Independent numerical check of the moment bound: the domain is sampled on a
square lattice, nodes too close to the boundary are removed (Dirichlet by
node removal), the 5-point Laplacian is assembled, and all eigenvalues
below a cutoff are computed by shift-invert Lanczos on spectrum slices whose
counts come from Sylvester inertia.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.spatial import cKDTree

from .errors import DomainError, MissedEigenvalueError, NumericalError
from .geometry import distance_to_curve
from .horn import HornProfile
from .profiles import TWO_PI, SpiralProfile

log = logging.getLogger(__name__)

DENSE_LIMIT = 1200


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Rectangle:
    width: float = 1.0
    height: float = 1.0
    origin: tuple = (0.0, 0.0)


@dataclass(frozen=True, eq=False)
class SpiralDomain:
    """Plane minus one or more rotated copies of a spiral, truncated to a disc."""

    profile: SpiralProfile
    offsets: tuple = (0.0,)

    def __post_init__(self):
        off = tuple(float(o) for o in self.offsets)
        if off[0] != 0 or any(b <= a for a, b in zip(off, off[1:])) or off[-1] >= TWO_PI:
            raise DomainError("arm offsets must satisfy 0 = t0 < t1 < ... < 2 pi")
        object.__setattr__(self, "offsets", off)


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Active lattice nodes of a rasterized domain.

    ``active[i, j]`` refers to the node at ``origin + h * (i, j)``;
    ``node_index`` maps active nodes to matrix rows and holds -1 elsewhere.
    Inactive neighbours encode the Dirichlet condition.
    """

    h: float
    origin: tuple
    dims: tuple
    active: np.ndarray = field(repr=False)
    R_max: float | None = None
    node_index: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not self.active.any():
            raise DomainError("rasterized domain has no active nodes")
        idx = np.full(self.active.shape, -1, dtype=np.int64)
        idx[self.active] = np.arange(int(self.active.sum()))
        object.__setattr__(self, "node_index", idx)

    @property
    def n(self):
        return int(self.active.sum())

    def coords(self):
        i, j = np.nonzero(self.active)
        return np.column_stack([self.origin[0] + self.h * i, self.origin[1] + self.h * j])


def _arc_samples(profile, theta_hi, spacing):
    """Curve parameters spaced roughly ``spacing`` apart in arc length."""
    th = np.concatenate([[0.0], np.geomspace(1e-10, theta_hi, 200_000)])
    v = profile.speed(th[1:])
    ds = 0.5 * (np.concatenate([[v[0]], v[:-1]]) + v) * np.diff(th)
    ds[0] = float(profile.r(th[1]))  # the first cell is a straight segment from the origin
    s = np.concatenate([[0.0], np.cumsum(ds)])
    n = int(np.ceil(s[-1] / spacing)) + 1
    return np.interp(np.linspace(0.0, s[-1], n), s, th)


def _spiral_mask(region: SpiralDomain, h, R_max):
    prof = region.profile
    m = int(np.ceil(R_max / h))
    ax = h * np.arange(-m, m + 1)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    inside = X**2 + Y**2 < R_max**2
    pts = np.column_stack([X[inside], Y[inside]])

    # the last coil that can come within h of the disc
    theta_hi = 1.0
    while prof.r(theta_hi) < R_max + 2 * h:
        theta_hi *= 1.5
    spacing = h / 8
    ts = _arc_samples(prof, theta_hi, spacing)
    base = prof.point(ts)
    dist = np.full(len(pts), np.inf)
    arm = np.zeros(len(pts), dtype=int)
    foot = np.zeros(len(pts))
    for k, off in enumerate(region.offsets):
        c, s = np.cos(off), np.sin(off)
        curve = base @ np.array([[c, s], [-s, c]])
        dd, ii = cKDTree(curve).query(pts)
        better = dd < dist
        dist[better], arm[better], foot[better] = dd[better], k, ts[ii[better]]
    # nearest-sample distance overestimates the true one by at most spacing/2
    unsure = (dist > h / 2) & (dist <= h / 2 + spacing)
    for q in np.nonzero(unsure)[0]:
        off = region.offsets[arm[q]]
        c, s = np.cos(-off), np.sin(-off)
        p = np.array([[c, -s], [s, c]]) @ pts[q]
        dtheta = 4 * spacing / max(float(prof.speed(foot[q])), 1e-12)
        win = (max(foot[q] - dtheta, 0.0), foot[q] + dtheta)
        dist[q] = min(dist[q], distance_to_curve(prof, p, win, n_scan=32)[0])
    keep = dist > h / 2
    active = np.zeros_like(inside)
    active[inside] = keep
    return DomainMask(h, (-m * h, -m * h), active.shape, active, R_max)


def _rect_mask(region: Rectangle, h):
    nx = int(round(region.width / h))
    ny = int(round(region.height / h))
    if abs(nx * h - region.width) > 1e-9 * region.width or abs(ny * h - region.height) > 1e-9 * region.height:
        raise DomainError("rectangle sides must be integer multiples of h")
    active = np.zeros((nx + 1, ny + 1), dtype=bool)
    active[1:-1, 1:-1] = True
    return DomainMask(h, tuple(region.origin), active.shape, active)


def _horn_mask(horn: HornProfile, h, R_max=None):
    L = horn.length if np.isfinite(horn.length) else horn.support_end(1e-300)
    if R_max is not None:
        L = min(L, R_max)
    nx = int(np.ceil(L / h)) + 1
    top = float(horn.f(0.0))
    ny = int(np.ceil(top / h)) + 1
    s = h * np.arange(nx + 1)
    u = h * np.arange(ny + 1)
    S, U = np.meshgrid(s, u, indexing="ij")
    active = (S > 0) & (S < L) & (U > 0) & (U < horn.f(S))
    return DomainMask(h, (0.0, 0.0), active.shape, active, L)


def build_mask(region, h: float, R_max: float | None = None) -> DomainMask:
    """Rasterize a :class:`Rectangle`, :class:`SpiralDomain`, bare profile or horn.

    Spiral domains keep a lattice node iff it lies inside the disc of radius
    ``R_max`` and farther than ``h/2`` from every arm.
    """
    if not h > 0:
        raise DomainError("grid spacing must be positive")
    if isinstance(region, SpiralProfile):
        region = SpiralDomain(region)
    if isinstance(region, SpiralDomain):
        if R_max is None or R_max <= 0:
            raise DomainError("spiral domains need a positive truncation radius R_max")
        return _spiral_mask(region, h, R_max)
    if isinstance(region, Rectangle):
        return _rect_mask(region, h)
    if isinstance(region, HornProfile):
        return _horn_mask(region, h, R_max)
    raise DomainError(f"cannot rasterize {type(region).__name__}")


def assemble(mask: DomainMask) -> sp.csr_matrix:
    """5-point ``-Laplacian``: ``4/h^2`` on the diagonal, ``-1/h^2`` between active neighbours."""
    idx = mask.node_index
    n = mask.n
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0)]
    for a, b in ((idx[:-1, :], idx[1:, :]), (idx[:, :-1], idx[:, 1:])):
        both = (a >= 0) & (b >= 0)
        i, j = a[both], b[both]
        rows += [i, j]
        cols += [j, i]
        vals += [-np.ones(len(i)), -np.ones(len(i))]
    A = sp.coo_matrix(
        (np.concatenate(vals) / mask.h**2, (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A.tocsr()


# ---------------------------------------------------------------------------
# inertia and eigenvalues


def _inertia_once(A, shift):
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        M = A.toarray() - shift * np.eye(n)
        _, D, _ = la.ldl(M)
        ev = la.eigvalsh(D)  # D is block diagonal with 1x1 and 2x2 blocks
        tiny = np.min(np.abs(ev)) <= 1e-13 * np.max(np.abs(ev))
        return int(np.sum(ev < 0)), not tiny
    M = (A - shift * sp.identity(n, format="csc")).tocsc()
    lu = sla.splu(
        M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True}
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None, False
    piv = lu.U.diagonal()
    tiny = np.min(np.abs(piv)) <= 1e-13 * np.max(np.abs(piv))
    return int(np.sum(piv < 0)), not tiny


def inertia_count(A, Lambda: float) -> int:
    """Number of eigenvalues of ``A`` below ``Lambda`` by Sylvester inertia.

    Dense Bunch-Kaufman for small matrices, otherwise a symmetric sparse
    ``LDL^T`` (SuperLU in symmetric mode, diagonal pivots only).  A
    near-singular factorization is retried at ``Lambda (1 +/- 1e-8)``.
    """
    count, ok = _inertia_once(A, Lambda)
    if ok:
        return count
    retry = [_inertia_once(A, Lambda * (1 + e)) for e in (-1e-8, 1e-8)]
    for c, good in retry:
        if good:
            log.info("inertia at %g retried with perturbed shift", Lambda)
            return c
    raise NumericalError(f"symmetric factorization broke down near Lambda={Lambda}")


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    cutoff: float
    inertia_count: int
    h: float | None = None
    residuals: np.ndarray | None = None
    n_nodes: int | None = None
    extrapolated: "Extrapolation | None" = None

    def to_dict(self):
        out = {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "cutoff": self.cutoff,
            "inertia_count": self.inertia_count,
            "h": self.h,
            "n_nodes": self.n_nodes,
            "residuals": None if self.residuals is None else [float(x) for x in self.residuals],
        }
        if self.extrapolated is not None:
            out["extrapolated"] = self.extrapolated.to_dict()
        return out


def _slices(A, cutoff, total, max_slice):
    bounds, counts = [0.0, cutoff], [0, total]
    i = 0
    while i < len(bounds) - 1:
        if counts[i + 1] - counts[i] > max_slice:
            mid = 0.5 * (bounds[i] + bounds[i + 1])
            bounds.insert(i + 1, mid)
            counts.insert(i + 1, inertia_count(A, mid))
        else:
            i += 1
    return list(zip(bounds[:-1], bounds[1:], np.diff(counts)))


def eigenvalues_below(
    A, cutoff: float, h: float | None = None, seed: int = 0, res_tol: float = 1e-8, max_slice: int = 40
) -> EigenResult:
    """All eigenvalues of the SPD matrix ``A`` below ``cutoff``.

    The count is fixed first by inertia; each spectrum slice is solved by
    shift-invert Lanczos (ARPACK, full reorthogonalization) at its midpoint.
    Raises :class:`MissedEigenvalueError` on any count mismatch.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    total = inertia_count(A, cutoff)
    if total == 0:
        return EigenResult(np.empty(0), cutoff, 0, h, np.empty(0), n)
    if n <= DENSE_LIMIT or total >= n - 2:
        w, V = la.eigh(A.toarray(), subset_by_index=[0, total - 1])
        found = [(w, V)]
    else:
        rng = np.random.default_rng(seed)
        found = []
        for a, b, k in _slices(A, cutoff, total, max_slice):
            if k == 0:
                continue
            sigma = 0.5 * (a + b)
            extra = 4
            for _ in range(4):
                kk = min(k + extra, n - 2)
                w, V = sla.eigsh(A, k=kk, sigma=sigma, which="LM", v0=rng.standard_normal(n), tol=0.0)
                sel = (w >= a) & (w < b)
                if sel.sum() == k:
                    break
                extra *= 3
            else:
                raise MissedEigenvalueError(
                    f"slice [{a}, {b}): inertia says {k} eigenvalues, Lanczos found {int(sel.sum())}"
                )
            found.append((w[sel], V[:, sel]))
    w = np.concatenate([f[0] for f in found])
    V = np.concatenate([f[1] for f in found], axis=1)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    res = np.linalg.norm(A @ V - V * w, axis=0) / np.linalg.norm(V, axis=0)
    if len(w) != total or np.any(w >= cutoff):
        raise MissedEigenvalueError(f"found {len(w)} eigenvalues below {cutoff}, inertia says {total}")
    if np.any(res > res_tol * np.maximum(1.0, np.abs(w))):
        raise NumericalError("eigenpair residuals above tolerance", estimate=w, error=res)
    return EigenResult(w, float(cutoff), total, h, res, n)


def moment(result: EigenResult, sigma: float, Lambda: float) -> float:
    """Riesz mean ``sum_{lambda_i < Lambda} (Lambda - lambda_i)^sigma``."""
    if result.cutoff < Lambda:
        raise DomainError(f"spectrum only resolved below {result.cutoff} < Lambda={Lambda}")
    lam = np.asarray(result.eigenvalues)
    gap = Lambda - lam[lam < Lambda]
    if sigma == 0:
        return float(len(gap))
    return float(np.sum(gap**sigma))


@dataclass
class Extrapolation:
    values: np.ndarray
    errors: np.ndarray
    h: float | None
    h2: float | None

    def to_dict(self):
        return {
            "values": [float(x) for x in self.values],
            "errors": [float(x) for x in self.errors],
            "h": self.h,
            "h2": self.h2,
        }


def extrapolate(result_h: EigenResult, result_h2: EigenResult, n: int | None = None) -> Extrapolation:
    """Pairwise Richardson step ``(4 lambda_{h/2} - lambda_h) / 3``.

    Pairs eigenvalues by index; with ``n=None`` both results must hold the same
    number of eigenvalues, otherwise the first ``n`` of each are used.
    """
    a, b = np.asarray(result_h.eigenvalues), np.asarray(result_h2.eigenvalues)
    if n is None:
        if len(a) != len(b):
            raise MissedEigenvalueError(f"eigenvalue counts differ: {len(a)} vs {len(b)}")
        n = len(a)
    elif len(a) < n or len(b) < n:
        raise MissedEigenvalueError(f"need {n} eigenvalues, have {len(a)} and {len(b)}")
    a, b = a[:n], b[:n]
    return Extrapolation((4 * b - a) / 3, np.abs(b - a) / 3, result_h.h, result_h2.h)


def moment_with_budget(ext: Extrapolation, sigma: float, Lambda: float):
    """Moment of extrapolated eigenvalues and a one-sided error budget.

    The budget is the increase of the moment when every eigenvalue is moved
    down by its error estimate.
    """
    lam, err = ext.values, ext.errors
    m = float(np.sum(np.clip(Lambda - lam, 0, None) ** sigma))
    hi = float(np.sum(np.clip(Lambda - (lam - err), 0, None) ** sigma))
    return m, hi - m


def solve_region(region, h, cutoff, R_max=None, seed=0):
    mask = build_mask(region, h, R_max)
    A = assemble(mask)
    res = eigenvalues_below(A, cutoff, h=h, seed=seed)
    return res
