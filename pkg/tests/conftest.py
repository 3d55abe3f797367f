import numpy as np
import pytest

from spiralspec import GeometryCache, SpiralProfile, SyntheticGeometry


@pytest.fixture(scope="session")
def power_half():
    return SpiralProfile.power(1.0, 0.5)


@pytest.fixture(scope="session")
def archimedean():
    return SpiralProfile.archimedean(1.0)


@pytest.fixture(scope="session")
def power_cache(power_half):
    return GeometryCache.build(power_half, theta_max=2000.0)


@pytest.fixture(scope="session")
def arch_cache(archimedean):
    return GeometryCache.build(archimedean, theta_max=400.0, check_assumption=False)


@pytest.fixture(scope="session")
def inv_s():
    """Synthetic strip with d(s) = 1/s on [1, inf), W = 0 and no central region."""
    return SyntheticGeometry(lambda s: 1.0 / s, s0=1.0)


def brute_normal_width(profile, theta, gap=2 * np.pi, n=100_000):
    """Dense sampling of the neighbour coil; linear interpolation of the first crossing."""
    P = profile.point(theta)
    nrm = profile.inward_normal(theta)
    phi = np.linspace(max(theta - gap - np.pi / 2, 1e-9), theta - gap + np.pi / 2, n)
    c, s = np.cos(gap), np.sin(gap)
    q = profile.point(phi) @ np.array([[c, s], [-s, c]])
    rel = q - P
    f = nrm[0] * rel[:, 1] - nrm[1] * rel[:, 0]
    u = rel @ nrm
    idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]
    best = np.inf
    for i in idx:
        w = f[i] / (f[i] - f[i + 1])
        ug = u[i] + w * (u[i + 1] - u[i])
        if 0 < ug < best:
            best = ug
    return best


@pytest.fixture(scope="session")
def power_cache_big(power_half):
    return GeometryCache.build(power_half, theta_max=6e4)


@pytest.fixture(scope="session")
def two_arm_caches(power_half):
    c = GeometryCache.build(power_half, theta_max=2000.0, gap=np.pi)
    return [c, c]
