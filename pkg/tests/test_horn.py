import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spiralspec import DomainError, HornProfile, assemble, build_mask, count_lower_estimate, inertia_count, weyl_horn_count
from spiralspec.horn import weyl_inverse


def exp_horn_exact(lam):
    """Closed form for f = exp(-s): each mode k contributes
    A ln((A + sqrt(A^2 - k^2)) / k) - sqrt(A^2 - k^2) with A = sqrt(lam)/pi."""
    A = np.sqrt(lam) / np.pi
    k = np.arange(1, int(np.floor(A)) + 1, dtype=float)
    q = np.sqrt(A * A - k * k)
    return float(np.sum(A * np.log((A + q) / k) - q))


def test_constant_horn_closed_form():
    L = 3.0
    horn = HornProfile("constant", scale=1.0, length=L)
    assert weyl_horn_count(horn, 2 * np.pi**2) == pytest.approx(L, rel=1e-9)
    lam = 37.5 * np.pi**2
    k = np.arange(1, 7)
    expect = L * np.sum(np.sqrt(lam / np.pi**2 - k**2))
    assert weyl_horn_count(horn, lam) == pytest.approx(expect, rel=1e-9)


def test_below_first_mode():
    horn = HornProfile("exponential", scale=0.5)
    assert weyl_horn_count(horn, 0.99 * (np.pi / 0.5) ** 2) == 0.0


@pytest.mark.parametrize("lam", [50.0, 400.0, 2000.0, 1e4])
def test_exponential_exact(lam):
    assert weyl_horn_count(HornProfile(), lam) == pytest.approx(exp_horn_exact(lam), rel=1e-8)


def test_exponential_refinement():
    coarse = weyl_horn_count(HornProfile(), 3000.0, rtol=1e-6)
    fine = weyl_horn_count(HornProfile(), 3000.0, rtol=1e-11)
    assert coarse == pytest.approx(fine, rel=1e-5)


def test_monotone_in_lambda():
    horn = HornProfile("power", scale=1.0, rate=2.0)
    lams = np.linspace(20, 3000, 40)
    vals = [weyl_horn_count(horn, x) for x in lams]
    assert np.all(np.diff(vals) >= 0)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(20.0, 5e3), c=st.floats(0.2, 5.0))
def test_amplitude_scaling(lam, c):
    # count(c f, lam / c^2) = count(f, lam) / c
    base = weyl_horn_count(HornProfile("exponential", 1.0, 1.3), lam)
    scaled = weyl_horn_count(HornProfile("exponential", c, 1.3), lam / c**2)
    assert scaled == pytest.approx(base / c, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("lam", [100.0, 1000.0])
def test_dilation_invariance(lam):
    # f~(s) = f(pi s)/pi at pi^2 lam gives the same count
    base = weyl_horn_count(HornProfile("exponential", 1.0, 1.0), lam)
    dil = weyl_horn_count(HornProfile("exponential", 1 / np.pi, np.pi), np.pi**2 * lam)
    assert dil == pytest.approx(base, rel=1e-6)


def test_lower_estimate_inverse_s(inv_s):
    for lam in (100.0, 1e4):
        expect = lam / (2 * np.pi**2) * np.log(np.sqrt(lam) / np.pi)
        assert count_lower_estimate(inv_s, lam) == pytest.approx(expect, rel=1e-8)


def test_lower_estimate_empty(inv_s):
    assert count_lower_estimate(inv_s, 0.5 * np.pi**2) == 0.0
    assert count_lower_estimate(HornProfile(scale=0.5), 0.9 * (np.pi / 0.5) ** 2) == 0.0


@pytest.mark.parametrize("horn", [HornProfile(), HornProfile("power", 1.0, 1.5), HornProfile("constant", 1.0, 0.0, 4.0)])
def test_lower_estimate_below_weyl(horn):
    for lam in (1e2, 1e3):
        assert count_lower_estimate(horn, lam) <= weyl_horn_count(horn, lam)


def test_fd_count_consistent():
    lam = 1000.0
    L = np.log(np.sqrt(lam) / np.pi) + 1.0
    horn = HornProfile("exponential", 1.0, 1.0, length=L)
    weyl = weyl_horn_count(horn, lam)
    assert weyl >= 50
    fd = inertia_count(assemble(build_mask(horn, 0.01)), lam)
    assert 0.7 <= fd / weyl <= 1.3


def test_integrability_failure():
    with pytest.raises(DomainError):
        weyl_horn_count(HornProfile("exponential", 1.0, 0.0), 100.0)
    with pytest.raises(DomainError):
        HornProfile("constant")
    with pytest.raises(DomainError):
        weyl_horn_count(HornProfile(), -1.0)


def test_weyl_inverse():
    lam = weyl_inverse(HornProfile(), 50.0)
    assert weyl_horn_count(HornProfile(), lam) == pytest.approx(50.0, rel=1e-8)


def test_dict_roundtrip():
    h = HornProfile("power", 2.0, 1.5, 7.0)
    assert HornProfile.from_dict(h.to_dict()) == h
    assert HornProfile.from_dict(HornProfile().to_dict()) == HornProfile()
