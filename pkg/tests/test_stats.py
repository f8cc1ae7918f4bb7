import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiercert.errors import DomainError
from hiercert.stats import (
    binom_p_value,
    binom_p_values,
    bonferroni_test,
    certified_radius,
    inv_norm_cdf,
    norm_cdf,
)

from oracles import exact_binom_tail

mpmath.mp.dps = 50


def mp_binom_tail(k: int, n: int, tau: float) -> float:
    """High-precision oracle via the regularized incomplete beta identity."""
    if k == 0:
        return 1.0
    return float(mpmath.betainc(k, n - k + 1, 0, tau, regularized=True))


def scipy_binom_tail(k: int, n: int, tau: float) -> float:
    """Independent continued-fraction oracle (cephes incomplete beta)."""
    from scipy.stats import binom
    return float(binom.sf(k - 1, n, tau))


def mp_inv_norm(p: float) -> float:
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def test_beta_identity_against_exact_rational():
    # oracle of the oracles: both high-precision tails equal the exact
    # rational summation where that is feasible
    for n in (5, 12, 20):
        for k in range(n + 1):
            for tau in (0.1, 0.5, 0.75):
                exact = float(exact_binom_tail(k, n, tau))
                assert mp_binom_tail(k, n, tau) == pytest.approx(exact, abs=1e-14)
                assert scipy_binom_tail(k, n, tau) == pytest.approx(exact, abs=1e-13)


class TestBinomPValue:
    def test_k_zero_is_one(self):
        assert binom_p_value(0, 100, 0.75) == 1.0

    def test_k_equals_n_closed_form(self):
        # P[Bin(100, 0.75) >= 100] = 0.75^100
        p = binom_p_value(100, 100, 0.75)
        assert p == pytest.approx(0.75**100, rel=1e-12)

    def test_frozen_example_9_of_10(self):
        # exact rational oracle: C(10,9)*0.75^9*0.25 + 0.75^10
        assert float(exact_binom_tail(9, 10, 0.75)) == pytest.approx(
            0.2440252304077148, abs=1e-15)
        assert binom_p_value(9, 10, 0.75) == pytest.approx(
            0.2440252304077148, abs=1e-12)

    def test_exact_rational_all_small_n(self):
        taus = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        for n in range(1, 21):
            for tau in taus:
                for k in range(n + 1):
                    expected = float(exact_binom_tail(k, n, tau))
                    assert binom_p_value(k, n, tau) == pytest.approx(
                        expected, abs=1e-12), (k, n, tau)

    @pytest.mark.parametrize("n", [100, 500, 100_000])
    def test_high_precision_oracle_large_n(self, n):
        rng = np.random.default_rng(42)
        for _ in range(25):
            k = int(rng.integers(0, n + 1))
            tau = float(rng.uniform(0.05, 0.95))
            assert binom_p_value(k, n, tau) == pytest.approx(
                scipy_binom_tail(k, n, tau), abs=1e-10), (k, n, tau)

    def test_moderate_n_against_mpmath(self):
        rng = np.random.default_rng(7)
        for n in (100, 500):
            for _ in range(10):
                k = int(rng.integers(0, n + 1))
                tau = float(rng.uniform(0.05, 0.95))
                assert binom_p_value(k, n, tau) == pytest.approx(
                    mp_binom_tail(k, n, tau), abs=1e-11), (k, n, tau)

    def test_near_mean_large_n(self):
        # hardest regime: k within a few sd of n*tau, p-value O(1)
        n, tau = 100_000, 0.75
        for k in (74_800, 74_950, 75_000, 75_050, 75_200):
            assert binom_p_value(k, n, tau) == pytest.approx(
                scipy_binom_tail(k, n, tau), abs=1e-11)

    def test_stable_at_one_million_trials(self):
        n, tau = 1_000_000, 0.75
        for k in (749_000, 750_000, 751_000, 999_999):
            assert binom_p_value(k, n, tau) == pytest.approx(
                scipy_binom_tail(k, n, tau), abs=1e-10)

    def test_monotone_in_k(self):
        n, tau = 50, 0.6
        values = [binom_p_value(k, n, tau) for k in range(n + 1)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_monotone_in_tau(self):
        for k in (0, 3, 17, 29, 30):
            values = [binom_p_value(k, 30, tau)
                      for tau in np.linspace(0.05, 0.95, 19)]
            assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            binom_p_value(-1, 10, 0.5)
        with pytest.raises(DomainError):
            binom_p_value(11, 10, 0.5)
        with pytest.raises(DomainError):
            binom_p_value(5, 10, 0.0)
        with pytest.raises(DomainError):
            binom_p_value(5, 10, 1.0)
        with pytest.raises(DomainError):
            binom_p_value(2.5, 10, 0.5)

    def test_vectorized_matches_scalar(self):
        ks = np.array([0, 3, 50, 99, 100])
        vec = binom_p_values(ks, 100, 0.75)
        for k, v in zip(ks, vec):
            assert v == binom_p_value(int(k), 100, 0.75)


class TestInvNormCdf:
    def test_median(self):
        assert inv_norm_cdf(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_frozen_constants(self):
        # constants verified against the mpmath oracle below
        assert inv_norm_cdf(0.75) == pytest.approx(0.6744897501960817, abs=1e-9)
        assert inv_norm_cdf(0.95) == pytest.approx(1.6448536269514722, abs=1e-9)

    @pytest.mark.parametrize("p", [1e-10, 1e-6, 0.01, 0.3, 0.5, 0.75,
                                   0.95, 0.999, 1 - 1e-6, 1 - 1e-10])
    def test_against_mpmath(self, p):
        assert inv_norm_cdf(p) == pytest.approx(mp_inv_norm(p), abs=1e-9)

    def test_roundtrip_through_independent_cdf(self):
        for z in np.linspace(-6.0, 6.0, 121):
            p = float(mpmath.ncdf(z))
            assert inv_norm_cdf(p) == pytest.approx(z, abs=1e-8)

    def test_antisymmetry(self):
        # dyadic grid so 1-p is exact in binary floating point
        for p in [i / 1024 for i in range(1, 1024)]:
            assert inv_norm_cdf(p) == pytest.approx(-inv_norm_cdf(1.0 - p),
                                                    abs=1e-12)

    def test_domain_errors(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DomainError):
                inv_norm_cdf(p)

    def test_norm_cdf_roundtrip(self):
        for p in (1e-8, 0.2, 0.5, 0.9, 1 - 1e-8):
            assert norm_cdf(inv_norm_cdf(p)) == pytest.approx(p, rel=1e-12)


class TestCertifiedRadius:
    def test_formula(self):
        assert certified_radius(0.25, 0.75) == pytest.approx(
            0.25 * 0.6744897501960817, abs=1e-12)

    def test_tau_half_gives_zero(self):
        assert certified_radius(1.0, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            certified_radius(0.0, 0.75)
        with pytest.raises(DomainError):
            certified_radius(-1.0, 0.75)
        with pytest.raises(DomainError):
            certified_radius(0.25, 0.49)
        with pytest.raises(DomainError):
            certified_radius(0.25, 1.0)


class TestBonferroni:
    def test_single_test_full_alpha(self):
        assert bonferroni_test([0.0005], 0.001).tolist() == [True]

    def test_divisor_is_component_count(self):
        # threshold 0.001/2 = 0.0005; the boundary rejects (closed rule)
        flags = bonferroni_test([0.0005, 0.0006], 0.001)
        assert flags.tolist() == [True, False]

    def test_all_ones_abstain(self):
        assert not bonferroni_test(np.ones(16), 0.001).any()

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=64),
           st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
    @settings(max_examples=100, deadline=None)
    def test_rejections_grow_with_alpha(self, pvals, a1, a2):
        lo, hi = sorted((a1, a2))
        small = bonferroni_test(pvals, lo)
        big = bonferroni_test(pvals, hi)
        assert np.all(big | ~small)  # small-alpha rejections are a subset

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            bonferroni_test([0.5], 0.0)
        with pytest.raises(DomainError):
            bonferroni_test([], 0.01)
        with pytest.raises(DomainError):
            bonferroni_test([1.5], 0.01)
