"""Eigenvalue counting asymptotics for horn-shaped regions.

A horn is ``{(s, u): s > 0, 0 < u < f(s)}`` with ``f`` decreasing to zero.
Its Dirichlet counting function behaves for large ``lambda`` like the
transverse-mode integral computed by :func:`weyl_horn_count`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, NumericalError


@dataclass(frozen=True)
class HornProfile:
    """Width profile ``f`` of a horn, optionally truncated at ``length``.

    kinds: ``exponential`` (``scale * exp(-rate s)``), ``power``
    (``scale * (1 + s)^-rate``), ``constant`` (``scale``; needs finite length).
    Beyond ``length`` the width is zero.
    """

    kind: str = "exponential"
    scale: float = 1.0
    rate: float = 1.0
    length: float = np.inf

    def __post_init__(self):
        if self.kind not in ("exponential", "power", "constant"):
            raise DomainError(f"unknown horn kind {self.kind!r}")
        if self.scale <= 0 or self.rate < 0 or self.length <= 0:
            raise DomainError("horn parameters must be positive")
        if self.kind == "constant" and not np.isfinite(self.length):
            raise DomainError("a constant-width horn needs a finite length")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        length = data.pop("length", None)
        return cls(length=np.inf if length is None else float(length), **data)

    def to_dict(self):
        return {
            "kind": self.kind,
            "scale": self.scale,
            "rate": self.rate,
            "length": None if not np.isfinite(self.length) else self.length,
        }

    def _raw(self, s):
        if self.kind == "exponential":
            return self.scale * np.exp(-self.rate * s)
        if self.kind == "power":
            return self.scale * (1.0 + s) ** (-self.rate)
        return self.scale * np.ones_like(s)

    def f(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where((s >= 0) & (s < self.length), self._raw(np.maximum(s, 0)), 0.0)
        return out if out.ndim else float(out)

    def support_end(self, y):
        """Largest ``s`` with ``f(s) >= y`` (the horn is too thin beyond it)."""
        if y > self.scale:
            return 0.0
        if self.kind == "constant":
            return float(self.length)
        if y == self.scale:
            return 0.0
        if self.kind == "exponential":
            end = np.log(self.scale / y) / self.rate if self.rate > 0 else np.inf
        elif self.kind == "power":
            end = (self.scale / y) ** (1.0 / self.rate) - 1.0 if self.rate > 0 else np.inf
        else:
            end = np.inf
        return float(min(end, self.length))

    def check_integrable(self, ts=(0.1, 1.0, 10.0)):
        """Verify ``int_0^inf exp(-t / f(s)^2) ds < inf`` for sample ``t``."""
        for t in ts:
            end = self.support_end(np.sqrt(t / 745.0))  # exp(-745) underflows to 0
            if not np.isfinite(end):
                raise DomainError(f"exp(-t/f^2) not integrable at t={t}")
            val, err = integrate.quad(lambda s: np.exp(-t / self.f(s) ** 2) if self.f(s) > 0 else 0.0,
                                      0.0, end, limit=200)
            if not np.isfinite(val):
                raise DomainError(f"exp(-t/f^2) not integrable at t={t}")
        return True


def _mode_integrand(horn, lam):
    a = lam / np.pi**2

    def fn(s):
        fs = horn.f(s)
        if fs <= 0:
            return 0.0
        kmax = int(np.floor(np.sqrt(lam) * fs / np.pi))
        if kmax < 1:
            return 0.0
        k = np.arange(1, kmax + 1)
        return float(np.sum(np.sqrt(np.clip(a - (k / fs) ** 2, 0.0, None))))

    return fn


def weyl_horn_count(horn: HornProfile, lam: float, rtol: float = 1e-9) -> float:
    """``int_0^inf sum_k ((lambda/pi^2 - k^2/f(s)^2)_+)^{1/2} ds``.

    Integrated piecewise between the points where a transverse mode opens, so
    every piece has a square-root singularity only at its endpoint.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    horn.check_integrable()
    kmax = int(np.floor(np.sqrt(lam) * horn.scale / np.pi))
    if kmax < 1:
        return 0.0
    # s_k: where the k-th mode closes, f(s_k) = k pi / sqrt(lambda)
    breaks = sorted({0.0} | {horn.support_end(k * np.pi / np.sqrt(lam)) for k in range(1, kmax + 1)})
    fn = _mode_integrand(horn, lam)
    total, err_total = 0.0, 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        val, err = integrate.quad(fn, a, b, epsabs=0.0, epsrel=rtol, limit=400)
        total += val
        err_total += err
    if err_total > 1e-6 * abs(total):
        raise NumericalError("horn counting integral did not converge", total, err_total)
    return float(total)


def count_lower_estimate(width_source, Lambda: float) -> float:
    """``Lambda / (2 pi^2) * int_{d >= pi/sqrt(Lambda)} d(s) ds``.

    ``width_source`` is a :class:`HornProfile` or a geometry cache; for the
    latter the integral runs over its Fermi range ``s >= s0``.
    """
    y = np.pi / np.sqrt(Lambda)
    if isinstance(width_source, HornProfile):
        end = width_source.support_end(y)
        if end <= 0:
            return 0.0
        val, err = integrate.quad(width_source.f, 0.0, end, epsabs=0.0, epsrel=1e-11, limit=200)
    else:
        from .bound import _integrate_d, threshold_set

        val = _integrate_d(width_source, threshold_set(width_source, Lambda, use_W=False))
    return float(Lambda / (2 * np.pi**2) * val)


def weyl_inverse(horn: HornProfile, target: float, lam_hi: float = 1e8) -> float:
    """Smallest ``lambda`` with ``weyl_horn_count >= target`` (the count is monotone)."""
    lo = (np.pi / horn.scale) ** 2
    hi = 2 * lo
    while weyl_horn_count(horn, hi) < target:
        lo, hi = hi, 2 * hi
        if hi > lam_hi:
            raise DomainError("target count not reached below lam_hi")
    return float(optimize.brentq(lambda x: weyl_horn_count(horn, x) - target, lo, hi, rtol=1e-10))
