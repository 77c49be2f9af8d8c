import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from espy import distributions as dists

logging.basicConfig(level="DEBUG")


def test_normal_tail():

    normal = dists.NormalDistribution()

    assert dists.quantile(normal, 0.025) == pytest.approx(-1.959964, abs=1e-6)
    assert dists.tail_expectation(normal, 0.025) == pytest.approx(-2.337803, abs=1e-6)
    assert normal.abs_moment() == pytest.approx(np.sqrt(2 / np.pi))


def test_symmetric_skewed_t_is_standardized_t():

    nu = 5.0
    skewed = dists.SkewedTDistribution(nu=nu, gamma=1.0)
    scale = np.sqrt((nu - 2) / nu)

    for p in (0.01, 0.025, 0.3, 0.5, 0.9):
        assert skewed.quantile(p) == pytest.approx(stats.t.ppf(p, nu) * scale, abs=1e-8)

    z = np.linspace(-4, 4, 9)
    assert np.allclose(skewed.logpdf(z), stats.t.logpdf(z / scale, nu) - np.log(scale))


@pytest.mark.parametrize("nu", [3.0, 5.0, 10.0, 30.0])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_skewed_t_is_standardized(nu, gamma):

    skewed = dists.SkewedTDistribution(nu=nu, gamma=gamma)

    # the two pieces meet where the raw variable is zero
    kink = float(skewed.quantile(1.0 / (1.0 + gamma ** 2)))

    def moment(k):
        f = lambda z: z ** k * float(skewed.pdf(np.asarray(z)))
        lower, _ = integrate.quad(f, -np.inf, kink, limit=500, epsabs=1e-11, epsrel=1e-11)
        upper, _ = integrate.quad(f, kink, np.inf, limit=500, epsabs=1e-11, epsrel=1e-11)
        return lower + upper

    assert moment(0) == pytest.approx(1.0, abs=1e-6)
    assert moment(1) == pytest.approx(0.0, abs=1e-6)
    assert moment(2) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("gamma", [0.6, 1.0, 1.8])
def test_skewed_t_tail_expectation_matches_integral(gamma):

    skewed = dists.SkewedTDistribution(nu=6.0, gamma=gamma)

    closed = skewed.tail_expectation(0.025)
    numeric = dists.InnovationDistribution.tail_expectation(skewed, 0.025)

    assert closed == pytest.approx(numeric, abs=1e-6)
    assert closed < skewed.quantile(0.025)


@settings(deadline=None, max_examples=30)
@given(p=st.floats(min_value=0.001, max_value=0.999),
       gamma=st.floats(min_value=0.5, max_value=2.0))
def test_skewed_t_quantile_inverts_cdf(p, gamma):

    skewed = dists.SkewedTDistribution(nu=7.0, gamma=gamma)

    assert float(skewed.cdf(np.asarray(skewed.quantile(p)))) == pytest.approx(p, abs=1e-9)


def test_samples_are_standardized():

    for innovation in (dists.NormalDistribution(), dists.SkewedTDistribution(nu=8.0, gamma=1.3)):
        draws = dists.sample(innovation, 200000, 11)

        assert abs(np.mean(draws)) < 0.02
        assert abs(np.var(draws) - 1.0) < 0.05

    skewed = dists.SkewedTDistribution(nu=8.0, gamma=1.3)
    assert np.array_equal(dists.sample(skewed, 10, (3, 4)), dists.sample(skewed, 10, (3, 4)))


def test_log_likelihood():

    z = np.array([-1.0, 0.0, 2.0])

    assert dists.log_likelihood(dists.NormalDistribution(), z) == pytest.approx(float(np.sum(stats.norm.logpdf(z))))


def test_invalid_distributions():

    with pytest.raises(dists.DistributionError):
        dists.make_distribution("cauchy")

    with pytest.raises(dists.DistributionError):
        dists.SkewedTDistribution(nu=2.0)

    with pytest.raises(dists.DistributionError):
        dists.SkewedTDistribution(nu=5.0, gamma=0.0)

    with pytest.raises(dists.DistributionError):
        dists.quantile(dists.NormalDistribution(), 1.0)

    with pytest.raises(dists.DistributionError):
        dists.tail_expectation(dists.NormalDistribution(), 0.5)

    with pytest.raises(dists.DistributionError):
        dists.sample(dists.NormalDistribution(), 0, 1)

    assert dists.make_distribution(dists.SKEWED_T, nu=4.0, gamma=2.0).parameters() == {"nu": 4.0, "gamma": 2.0}
