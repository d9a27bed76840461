"""Limiting and asymptotic regimes.

Claims that do not hold numerically at the stated tolerance are kept as
strict xfails next to a companion test that pins down what does hold.
"""

import math

import numpy as np
import pytest

from squirrelwalk.acceptance import CATALOG
from squirrelwalk.ctsrw import (FractionalPoissonClock, PoissonClock, clock_state_probabilities,
                                time_changed_mean)
from squirrelwalk.montecarlo import RngPolicy, exponent_fit, simulate_ctsrw, simulate_srw
from squirrelwalk.renewal import BroadPowerTail, Geometric, Sibuya, pdf_table
from squirrelwalk.specfun import PrabhakarParams, prabhakar_kernel, prabhakar_scaling_limit
from squirrelwalk.srw import WalkSpec, expected_position, moments, propagators

T_BIG = 10**4


def frozen_deviation(model, t_max):
    mean = expected_position(WalkSpec(model, 1, t_max))
    t = np.arange(1, t_max + 1)
    return float(np.max(np.abs(mean[1:] - t) / t))


# -- renewal tails ---------------------------------------------------------

@pytest.mark.parametrize("mu", [0.2, 0.5, 0.8])
def test_sibuya_tail_constant(mu):
    psi = pdf_table(Sibuya(mu), T_BIG)
    assert psi[-1] * T_BIG ** (mu + 1) == pytest.approx(mu / math.gamma(1 - mu), rel=0.05)


def test_broad_tail_mean_converges_second_moment_diverges():
    means, second = [], []
    for support in (10**3, 10**4, 10**5, 10**6):
        psi = pdf_table(BroadPowerTail(1.5, support), support)
        t = np.arange(psi.size)
        means.append(math.fsum(t * psi))
        second.append(math.fsum(t * t * psi))
    assert all(abs(m / means[-1] - 1) < 0.02 for m in means[1:])
    ratios = np.diff(np.log(second)) / math.log(10)
    # partial sums of t^2 psi_t grow like support^{2 - lam}
    np.testing.assert_allclose(ratios, 0.5, atol=0.05)


# -- frozen limits ---------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="reversals accumulate logarithmically; 8% off by t=10")
def test_sibuya_frozen_limit_mu_002():
    assert frozen_deviation(Sibuya(0.02), 1000) < 0.05


def test_sibuya_frozen_limit_small_mu():
    assert frozen_deviation(Sibuya(0.005), 100) < 0.05
    devs = [frozen_deviation(Sibuya(mu), 300) for mu in (0.04, 0.02, 0.01, 0.005)]
    assert np.all(np.diff(devs) < 0)


def test_geometric_frozen_limit_zero_reversals():
    t = np.array([10, 50, 100, 300])
    s = simulate_srw(WalkSpec(Geometric(1e-3), 1, 300), 20000, t, RngPolicy(31))
    assert np.all(s.no_reversal_fraction >= 0.70)
    np.testing.assert_allclose(s.no_reversal_fraction, (1 - 1e-3) ** t, atol=0.015)


def test_geometric_frozen_limit_mean_short_times():
    mean = expected_position(WalkSpec(Geometric(1e-3), 1, 50))
    t = np.arange(1, 51)
    assert np.all(np.abs(mean[1:] - t) / t < 0.05)


@pytest.mark.xfail(strict=True, reason="mean is t(1 - p t + ...); 25% low at t=300")
def test_geometric_frozen_limit_mean_to_300():
    mean = expected_position(WalkSpec(Geometric(1e-3), 1, 300))
    t = np.arange(1, 301)
    assert np.all(np.abs(mean[1:] - t) / t < 0.05)


# -- parity ----------------------------------------------------------------

@pytest.mark.parametrize("model", [Geometric(0.3), Sibuya(0.5), BroadPowerTail(1.5, 10**4)],
                         ids=lambda m: m.label())
def test_parity_exact_to_200(model):
    dists = propagators(WalkSpec(model, 1, 200))
    for t in (1, 2, 57, 120, 199, 200):
        masses = dists[t].masses
        x = np.arange(-t, t + 1)
        assert np.all(masses[(x + t) % 2 == 1] == 0)
        assert masses.sum() == pytest.approx(1.0, abs=1e-12)


# -- Prabhakar kernel asymptotes -------------------------------------------

@pytest.mark.parametrize("mu", [0.5, 0.75])
def test_prabhakar_polynomial_asymptotes(mu):
    k2 = prabhakar_kernel(PrabhakarParams(mu, mu + 2, 2.0), T_BIG)
    k3 = prabhakar_kernel(PrabhakarParams(mu, mu + 3, 2.0), T_BIG)
    assert k2[T_BIG] / T_BIG == pytest.approx(-0.5, rel=0.02)
    assert k3[T_BIG] / T_BIG**2 == pytest.approx(-0.25, rel=0.02)


@pytest.mark.xfail(strict=True, reason="corrections decay like t^-mu; 6% off at t=1e4 for mu=0.25")
def test_prabhakar_polynomial_asymptotes_mu_quarter():
    k2 = prabhakar_kernel(PrabhakarParams(0.25, 2.25, 2.0), T_BIG)
    assert k2[T_BIG] / T_BIG == pytest.approx(-0.5, rel=0.02)


def test_prabhakar_quarter_approaches_slowly():
    ts = [10**2, 10**3, 10**4]
    k2 = prabhakar_kernel(PrabhakarParams(0.25, 2.25, 2.0), T_BIG)
    gaps = [abs(k2[t] / t + 0.5) for t in ts]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.05


# -- scaling limits --------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="first-order convergence: error 4e-3 at h=1e-3")
def test_exponential_scaling_limit_to_1e6():
    rep = prabhakar_scaling_limit(1.0, 1.0, 1.0, 1.0, [1e-3])
    assert rep.deviations[0] < 1e-6


def test_exponential_scaling_limit_first_order():
    rep = prabhakar_scaling_limit(1.0, 1.0, 1.0, 1.0, [1e-3])
    assert rep.deviations[0] < 5e-3
    # leading correction of (1 - h)^{-1/h} relative to e is h/2
    assert rep.deviations[0] / (math.e * 1e-3) == pytest.approx(1.5, rel=0.01)


@pytest.mark.xfail(strict=True, reason="error 2.3e-3 at h=1/1024")
def test_fractional_scaling_limit_to_1e3():
    rep = prabhakar_scaling_limit(0.5, 2.0, 0.5, 1.0, [1 / 1024])
    assert rep.deviations[0] < 1e-3


def test_fractional_scaling_limit_converges():
    hs = [1 / 2**k for k in range(6, 13)]
    rep = prabhakar_scaling_limit(0.5, 2.0, 0.5, 1.0, hs)
    assert rep.monotone and rep.deviations[-1] < 1e-3


# -- time-changed walk -----------------------------------------------------

CLOCKS = [PoissonClock(1.0), FractionalPoissonClock(0.8, 1.0)]
TIMES = np.array([0.5, 3.0, 20.0])


@pytest.mark.parametrize("model", CATALOG, ids=lambda m: m.label())
@pytest.mark.parametrize("clock", CLOCKS, ids=lambda c: c.label())
def test_conditioning_matches_simulation(model, clock):
    assert np.all(clock.xi * TIMES ** getattr(clock, "alpha", 1.0) <= 25)
    exact = moments(WalkSpec(model, 1, 400))
    s = simulate_ctsrw(WalkSpec(model, 1, 10**6), clock, 20000, TIMES, RngPolicy(41))
    for j, t in enumerate(TIMES):
        mean = time_changed_mean(exact.mean, clock, t).value
        msd = time_changed_mean(exact.msd, clock, t).value
        assert abs(s.mean[j] - mean) <= 4 * s.se_mean[j] + 1e-12
        assert abs(s.msd[j] - msd) <= 4 * s.se_msd[j] + 1e-12


ALPHA = 0.8
DECADE = np.geomspace(7.0, 70.0, 9)  # xi t^alpha stays inside the exact window


@pytest.mark.parametrize("model, exponent", [(Sibuya(0.25), 2 * ALPHA), (Sibuya(0.5), 2 * ALPHA),
                                             (Geometric(0.3), ALPHA), (Geometric(0.5), ALPHA)],
                         ids=["sibuya0.25", "sibuya0.5", "geometric0.3", "geometric0.5"])
def test_time_changed_msd_exponents(model, exponent):
    clock = FractionalPoissonClock(ALPHA, 1.0)
    msd = moments(WalkSpec(model, 1, 2000)).msd
    values = [time_changed_mean(msd, clock, t).value for t in DECADE]
    assert exponent_fit(DECADE, values).slope == pytest.approx(exponent, abs=0.08)


def time_changed_prabhakar_ratios(mu, nu, clock, ts, lam=2.0):
    alpha = getattr(clock, "alpha", 1.0)
    b = clock.xi ** (-1.0 / alpha)
    m_max = clock_state_probabilities(clock, max(ts)).size
    kernel = prabhakar_kernel(PrabhakarParams(mu, nu, lam), m_max)
    e = alpha * (nu - mu - 1)
    law = [-b ** (1 + mu - nu) / lam * t**e / math.gamma(e + 1) for t in ts]
    return np.array([time_changed_mean(kernel, clock, t).value for t in ts]) / law


@pytest.mark.parametrize("mu", [0.5, 0.75])
@pytest.mark.parametrize("shift", [2.0, 3.0])
def test_time_changed_prabhakar_poisson_clock(mu, shift):
    r = time_changed_prabhakar_ratios(mu, mu + shift, PoissonClock(1.0), [900.0, 3000.0, 9000.0])
    np.testing.assert_allclose(r, 1.0, rtol=0.10)


@pytest.mark.xfail(strict=True, reason="the admissible window ends at t=70, far from the asymptote")
def test_time_changed_prabhakar_fractional_clock():
    r = time_changed_prabhakar_ratios(0.5, 2.5, FractionalPoissonClock(0.8, 1.0), [7.0, 20.0, 70.0])
    np.testing.assert_allclose(r, 1.0, rtol=0.10)


@pytest.mark.xfail(strict=True, reason="corrections decay like t^-mu; 11% off at t=900 for mu=0.25")
def test_time_changed_prabhakar_poisson_clock_mu_quarter():
    r = time_changed_prabhakar_ratios(0.25, 2.25, PoissonClock(1.0), [900.0, 3000.0, 9000.0])
    np.testing.assert_allclose(r, 1.0, rtol=0.10)


def test_time_changed_prabhakar_fractional_clock_trends_to_law():
    r = time_changed_prabhakar_ratios(0.5, 2.5, FractionalPoissonClock(0.8, 1.0), [7.0, 20.0, 70.0])
    assert np.all(np.diff(np.abs(r - 1)) < 0)
