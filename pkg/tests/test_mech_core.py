import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import binomial_sigma
from genptr.errors import BudgetOverflowError, DomainError
from genptr.mech_core import (
    DataDependentLoss,
    PrivacyBudget,
    RandomSource,
    RdpCurve,
    compose_dp,
    compose_rdp,
    gaussian_tail_exact,
    laplace_data_dep_dp,
    rdp_to_dp,
    sample_noise,
    tail_bound,
)

eps_st = st.floats(0, 1e6, allow_nan=False)
delta_st = st.floats(0, 0.49, allow_nan=False)


class TestPrivacyBudget:
    def test_rejects_bad_values(self):
        with pytest.raises(DomainError):
            PrivacyBudget(-0.1, 0.0)
        with pytest.raises(DomainError):
            PrivacyBudget(math.inf, 0.0)
        with pytest.raises(BudgetOverflowError):
            PrivacyBudget(1.0, 1.0)
        with pytest.raises(DomainError):
            PrivacyBudget(1.0, -1e-9)

    @given(eps_st, delta_st, eps_st, delta_st)
    def test_addition_is_componentwise(self, e1, d1, e2, d2):
        b = PrivacyBudget(e1, d1) + PrivacyBudget(e2, d2)
        assert (b.epsilon, b.delta) == (e1 + e2, d1 + d2)

    def test_addition_overflow(self):
        with pytest.raises(BudgetOverflowError):
            PrivacyBudget(0.1, 0.6) + PrivacyBudget(0.1, 0.6)


class TestRandomSource:
    def test_same_seed_same_stream(self):
        a, b = RandomSource(7), RandomSource(7)
        assert np.array_equal(a.uniform(1000), b.uniform(1000))
        assert np.array_equal(
            sample_noise("gaussian", 1.0, RandomSource(7), size=99),
            sample_noise("gaussian", 1.0, RandomSource(7), size=99),
        )

    def test_substreams_reproducible_and_distinct(self):
        r = RandomSource(3)
        assert np.array_equal(r.substream(2).uniform(50), RandomSource(3).substream(2).uniform(50))
        assert not np.array_equal(r.substream(1).uniform(50), r.substream(2).uniform(50))
        assert not np.array_equal(r.substream(1).uniform(50), r.uniform(50))

    def test_substreams_uncorrelated(self):
        r = RandomSource(11)
        a, b = r.substream(0).uniform(200_000), r.substream(1).uniform(200_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 5 / math.sqrt(200_000)

    def test_uniform_open_interval(self):
        u = RandomSource(0).uniform(100_000)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_geometric_support_and_mean(self):
        g = RandomSource(5).geometric(0.2, size=200_000)
        assert g.min() >= 1
        assert abs(g.mean() - 5.0) < 5 * math.sqrt(0.8 / 0.04 / 200_000)
        assert RandomSource(5).geometric(1.0) == 1


class TestSampleNoise:
    def test_laplace_median(self):
        x = sample_noise("laplace", 1.0, RandomSource(1), size=1_000_000)
        assert abs(np.median(x)) <= 0.01

    def test_gaussian_variance(self):
        x = sample_noise("gaussian", 2.0, RandomSource(2), size=1_000_000)
        assert abs(x.var() / 4.0 - 1.0) <= 0.02

    def test_laplace_mean_abs(self):
        x = sample_noise("laplace", 3.0, RandomSource(4), size=400_000)
        # E|Lap(b)| = b, Var|Lap(b)| = b^2
        assert abs(np.abs(x).mean() - 3.0) < 4 * 3.0 / math.sqrt(400_000)

    @pytest.mark.parametrize("scale", [0.0, -1.0, math.inf])
    def test_bad_scale(self, scale):
        with pytest.raises(DomainError):
            sample_noise("laplace", scale, RandomSource(0))

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            sample_noise("cauchy", 1.0, RandomSource(0))

    def test_scalar_and_shape(self):
        assert isinstance(sample_noise("gaussian", 1.0, RandomSource(0)), float)
        assert sample_noise("gaussian", 1.0, RandomSource(0), size=(3, 5)).shape == (3, 5)
        assert sample_noise("gaussian", 1.0, RandomSource(0), size=7).shape == (7,)


class TestTailBound:
    def test_examples(self):
        assert tail_bound("laplace", 1.0, math.log(2.0)) == pytest.approx(0.25, rel=1e-15)
        assert tail_bound("gaussian", 1.0, math.sqrt(2 * math.log(1e6))) == pytest.approx(1e-6, rel=1e-12)
        assert tail_bound("laplace", 1.0, 0.0) == 0.5

    def test_negative_t(self):
        with pytest.raises(DomainError):
            tail_bound("laplace", 1.0, -0.1)

    @pytest.mark.parametrize("t", [0.0, 1.0, 3.0])
    def test_laplace_matches_empirical(self, t):
        n = 1_000_000
        x = sample_noise("laplace", 1.0, RandomSource(int(t * 10) + 1), size=n)
        p = tail_bound("laplace", 1.0, t)
        assert abs((x > t).mean() - p) <= 3 * binomial_sigma(p, n)

    @given(st.floats(0.01, 100), st.floats(0, 20))
    def test_gaussian_bound_dominates_exact(self, s, t):
        assert tail_bound("gaussian", s, t) >= gaussian_tail_exact(s, t)


class TestLaplaceDataDep:
    @pytest.mark.parametrize("ls,phi,want", [(1, 2, 0.5), (0, 5, 0.0), (3, 1, 3.0)])
    def test_examples(self, ls, phi, want):
        assert laplace_data_dep_dp(ls, phi) == want

    def test_bad_phi(self):
        with pytest.raises(DomainError):
            laplace_data_dep_dp(1.0, 0.0)

    # Normal floats only: halving a subnormal drops bits, so exactness cannot hold there.
    @given(st.just(0.0) | st.floats(1e-290, 1e6), st.floats(1e-6, 1e6), st.integers(-30, 30))
    def test_homogeneous_under_powers_of_two(self, ls, phi, k):
        assert laplace_data_dep_dp(ls * 2.0**k, phi * 2.0**k) == laplace_data_dep_dp(ls, phi)

    def test_loss_object(self):
        loss = DataDependentLoss.laplace(lambda x: max(x) - min(x))
        assert loss([1, 4], 2.0) == 1.5
        assert loss.delta == 0.0


class TestRdp:
    def test_to_dp_examples(self):
        b = rdp_to_dp(RdpCurve.zero(), 2.0, 1 / math.e)
        assert b.epsilon == pytest.approx(1.0, rel=1e-15) and b.delta == 1 / math.e
        b = rdp_to_dp(RdpCurve.linear(0.25), 5.0, math.exp(-4))
        assert b.epsilon == pytest.approx(2.25, rel=1e-15)

    def test_domain(self):
        c = RdpCurve.linear(0.25, alpha_max=3.0)
        with pytest.raises(DomainError):
            rdp_to_dp(c, 5.0, 1e-5)
        with pytest.raises(DomainError):
            c(1.0)

    def test_compose_examples(self):
        q = RdpCurve.linear(0.25)
        assert compose_rdp([q, q])(7.0) == 3.5
        c = RdpCurve.constant(0.3)
        assert compose_rdp([RdpCurve.zero(), c])(4.0) == 0.3
        total = compose_rdp([RdpCurve.linear(1 / 4.0)] * 200)(4.0)
        acc = 0.0
        for _ in range(200):
            acc += 4.0 / 4.0
        assert total == acc == 200.0

    def test_compose_domain_and_empty(self):
        c = compose_rdp([RdpCurve.linear(1.0, 10.0), RdpCurve.linear(1.0, 4.0)])
        assert c.alpha_max == 4.0
        with pytest.raises(DomainError):
            compose_rdp([])

    @given(st.floats(1.01, 100), st.floats(1.01, 100), st.floats(1e-12, 0.5))
    def test_zero_curve_conversion_monotone(self, a1, a2, delta):
        lo, hi = sorted((a1, a2))
        z = RdpCurve.zero()
        assert rdp_to_dp(z, hi, delta).epsilon <= rdp_to_dp(z, lo, delta).epsilon

    @given(st.lists(st.floats(0, 10), min_size=3, max_size=3), st.floats(1.01, 50))
    def test_compose_commutative_associative(self, slopes, alpha):
        a, b, c = (RdpCurve.linear(s) for s in slopes)
        assert compose_rdp([a, b])(alpha) == compose_rdp([b, a])(alpha)
        assert compose_rdp([compose_rdp([a, b]), c])(alpha) == pytest.approx(
            compose_rdp([a, compose_rdp([b, c])])(alpha), rel=1e-15
        )

    def test_negative_curve_rejected(self):
        with pytest.raises(DomainError):
            RdpCurve(lambda a: -1.0)(2.0)


class TestComposeDp:
    def test_examples(self):
        b = compose_dp([PrivacyBudget(0.5, 1e-6), PrivacyBudget(0.4, 1e-6), PrivacyBudget(0.0, 1e-6)])
        assert b.epsilon == pytest.approx(0.9, abs=1e-15) and b.delta == pytest.approx(3e-6, rel=1e-15)
        assert tuple(compose_dp([PrivacyBudget(0, 0)])) == (0.0, 0.0)
        with pytest.raises(DomainError):
            compose_dp([PrivacyBudget(0.1, 0.6), PrivacyBudget(0.1, 0.6)])
        with pytest.raises(DomainError):
            compose_dp([])
