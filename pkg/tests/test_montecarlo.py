import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from squirrelwalk.ctsrw import FractionalPoissonClock, PoissonClock
from squirrelwalk.montecarlo import (ORACLE_MAX_T, RngPolicy, exponent_fit, fixed_exponent_prefactor,
                                     mittag_leffler_gaps, path_enumeration_oracle, simulate_ctsrw,
                                     simulate_positions, simulate_srw, step_autocorrelation)
from squirrelwalk.renewal import BroadPowerTail, Custom, FractionalBernoulli, Geometric, Sibuya
from squirrelwalk.specfun import mittag_leffler
from squirrelwalk.srw import WalkSpec, moments, msd_via_k, propagator, sibuya_closed_forms

CATALOG = [Geometric(0.3), Geometric(0.5), Geometric(1.0), Sibuya(0.3), Sibuya(0.5), Sibuya(0.8),
           FractionalBernoulli(0.7, 1.5), Custom((0.2, 0.5, 0.3))]
IDS = [m.label() for m in CATALOG]


def test_unbiased_walk_is_diffusive():
    s = simulate_srw(WalkSpec(Geometric(0.5), 1, 100), 10**5, [100], RngPolicy(1))
    assert abs(s.mean[0]) < 4 * s.se_mean[0]
    assert 0.94 <= s.msd[0] / 100 <= 1.06


@pytest.mark.parametrize("sigma0", [1, -1])
def test_deterministic_oscillation(sigma0):
    t = np.arange(0, 21)
    s = simulate_srw(WalkSpec(Geometric(1.0), sigma0, 20), 1000, t, RngPolicy(2), histogram_at=[7])
    np.testing.assert_array_equal(s.mean, sigma0 / 2 * ((-1.0) ** t - 1))
    np.testing.assert_array_equal(s.variance, 0)
    hist = s.histograms[7]
    assert hist.sum() == 1000 and np.count_nonzero(hist) == 1


def test_sibuya_histogram_chi_square():
    t = 14
    n = 10**6
    spec = WalkSpec(Sibuya(0.5), 1, t)
    s = simulate_srw(spec, n, [t], RngPolicy(3), histogram_at=[t])
    counts = s.histograms[t][::2]  # parity: x + t even
    expected = n * propagator(spec, t).masses[::2]
    keep = expected > 5
    chi2 = np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep])
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3
    assert counts.sum() == n


@pytest.mark.parametrize("model", [Geometric(0.3), Sibuya(0.5), FractionalBernoulli(0.7, 1.5),
                                   BroadPowerTail(1.5, 10**5)], ids=lambda m: m.label())
def test_moments_within_four_standard_errors(model):
    ts = [1, 5, 20, 100]
    spec = WalkSpec(model, -1, 100)
    s = simulate_srw(spec, 40000, ts, RngPolicy(4))
    exact = moments(spec)
    assert np.all(np.abs(s.mean - exact.mean[ts]) < 4 * s.se_mean + 1e-12)
    assert np.all(np.abs(s.msd - exact.msd[ts]) < 4 * s.se_msd + 1e-12)
    assert np.all(s.variance >= 0) and np.all(np.abs(s.mean) <= ts)


def test_reproducibility_and_worker_independence():
    spec = WalkSpec(Sibuya(0.5), 1, 300)
    a = simulate_srw(spec, 9000, [3, 30, 300], RngPolicy(5, block_size=1000), workers=1)
    b = simulate_srw(spec, 9000, [3, 30, 300], RngPolicy(5, block_size=1000), workers=4)
    c = simulate_srw(spec, 9000, [3, 30, 300], RngPolicy(6, block_size=1000), workers=1)
    for name in ("mean", "msd", "variance", "se_mean", "se_msd", "no_reversal_fraction"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(a.msd, c.msd)


def test_blocks_cover_paths():
    policy = RngPolicy(0, block_size=100)
    assert policy.blocks(250) == [(0, 100), (1, 100), (2, 50)]
    assert policy.blocks(0) == []
    x = simulate_positions(WalkSpec(Geometric(0.3), 1, 5), 250, [5], policy)
    assert x.shape == (250, 1)
    # a block's stream does not depend on how many blocks follow
    y = simulate_positions(WalkSpec(Geometric(0.3), 1, 5), 100, [5], policy)
    np.testing.assert_array_equal(x[:100], y)


def test_invalid_inputs():
    spec = WalkSpec(Geometric(0.3), 1, 10)
    with pytest.raises(ValueError):
        simulate_srw(spec, 10, [5, 3], RngPolicy(0))
    with pytest.raises(ValueError):
        simulate_srw(spec, 10, [11], RngPolicy(0))
    with pytest.raises(ValueError):
        simulate_srw(spec, 0, [1], RngPolicy(0))
    with pytest.raises(ValueError):
        RngPolicy(-1)


def test_no_reversal_fraction():
    p = 0.1
    s = simulate_srw(WalkSpec(Geometric(p), 1, 30), 50000, [1, 10, 30], RngPolicy(8))
    expected = (1 - p) ** np.array([1, 10, 30])
    se = np.sqrt(expected * (1 - expected) / 50000)
    assert np.all(np.abs(s.no_reversal_fraction - expected) < 4 * se)


def test_poisson_clock_expected_position():
    p, xi = 0.3, 1.0
    times = np.array([0.0, 0.5, 2.0, 8.0])
    s = simulate_ctsrw(WalkSpec(Geometric(p), 1, 10**6), PoissonClock(xi), 50000, times, RngPolicy(9))
    ref = (1 - 2 * p) / (2 * p) * -np.expm1(-2 * p * xi * times)
    assert s.mean[0] == 0 and s.msd[0] == 0
    assert np.all(np.abs(s.mean[1:] - ref[1:]) < 4 * s.se_mean[1:])


def test_frozen_clock_walk_counts_arrivals():
    times = np.array([1.0, 4.0])
    s = simulate_ctsrw(WalkSpec(Sibuya(0.5), -1, 10**6), PoissonClock(2.0), 40000, times,
                       RngPolicy(10), frozen=True)
    assert np.all(np.abs(s.mean + 2.0 * times) < 4 * s.se_mean)
    assert np.all(np.abs(s.variance - 2.0 * times) < 0.05 * 2.0 * times)


def test_ctsrw_reproducible_across_workers():
    clock = FractionalPoissonClock(0.8, 1.0)
    times = np.array([1.0, 10.0, 100.0])
    spec = WalkSpec(Sibuya(0.5), 1, 10**6)
    a = simulate_ctsrw(spec, clock, 5000, times, RngPolicy(11, block_size=512), workers=1)
    b = simulate_ctsrw(spec, clock, 5000, times, RngPolicy(11, block_size=512), workers=3)
    np.testing.assert_array_equal(a.msd, b.msd)


def test_exponential_gaps():
    g = mittag_leffler_gaps(np.random.default_rng(0), 1.0, 2.0, 20000)
    assert stats.kstest(g, stats.expon(scale=0.5).cdf).pvalue > 1e-3


@pytest.mark.parametrize("alpha", [0.5, 0.8])
def test_mittag_leffler_gap_survival(alpha):
    xi, n = 1.3, 200000
    g = mittag_leffler_gaps(np.random.default_rng(1), alpha, xi, n)
    for t in (0.1, 1.0, 5.0):
        surv = mittag_leffler(alpha, 1.0, -xi * t**alpha)
        emp = np.mean(g > t)
        assert abs(emp - surv) < 4 * np.sqrt(surv * (1 - surv) / n)


def test_step_autocorrelation_geometric():
    p = 0.2
    ts = [1, 3, 8]
    mean, se = step_autocorrelation(Geometric(p), 5, ts, 40000, RngPolicy(12))
    assert np.all(np.abs(mean - (1 - 2 * p) ** np.array(ts)) < 4 * se)


def test_oracle_examples():
    d, m, s = path_enumeration_oracle(WalkSpec(Sibuya(0.5), 1, 0), 0)
    assert d[0] == 1.0 and m == 0 and s == 0
    for model in (Sibuya(0.5), Geometric(0.3)):
        d, _, _ = path_enumeration_oracle(WalkSpec(model, -1, 1), 1)
        psi1 = model.pdf(1)[1]
        assert d[-1] == pytest.approx(1 - psi1) and d[1] == pytest.approx(psi1)
    with pytest.raises(ValueError):
        path_enumeration_oracle(WalkSpec(Geometric(0.3), 1, 20), ORACLE_MAX_T + 1)


@pytest.mark.parametrize("model", CATALOG, ids=IDS)
def test_oracle_moments_match_pipelines(model):
    spec = WalkSpec(model, 1, 12)
    exact = moments(spec)
    for t in (3, 8, 12):
        _, mean, msd = path_enumeration_oracle(spec, t)
        assert mean == pytest.approx(exact.mean[t], abs=1e-11)
        assert msd == pytest.approx(exact.msd[t], abs=1e-11)


def test_exponent_fit_examples():
    t = np.arange(1.0, 2001.0)
    fit = exponent_fit(t, 3.0 * t**2)
    assert abs(fit.slope - 2.0) < 1e-12 and fit.prefactor == pytest.approx(3.0, rel=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fixed_exponent_prefactor(t, 3.0 * t**2, 2.0) == pytest.approx(3.0, rel=1e-12)
    var = sibuya_closed_forms(0.5, 1, 10**4).variance
    assert exponent_fit(np.arange(10**4 + 1), var, (1e3, 1e4)).slope == pytest.approx(2.0, abs=0.05)
    broad = msd_via_k(WalkSpec(BroadPowerTail(1.5), 1, 10**4))
    assert exponent_fit(np.arange(10**4 + 1), broad, (1e3, 1e4)).slope == pytest.approx(1.5, abs=0.1)
    with pytest.raises(ValueError):
        exponent_fit([1.0, 2.0], [1.0, -1.0])


@settings(max_examples=15)
@given(st.integers(0, 2**32), st.integers(1, 3000), st.sampled_from([64, 1000, 4096]))
def test_histogram_mass_and_parity(seed, n, block):
    t = 9
    s = simulate_srw(WalkSpec(Sibuya(0.4), 1, t), n, [t], RngPolicy(seed, block), histogram_at=[t])
    h = s.histograms[t]
    assert h.sum() == n and s.n_paths == n
    assert not np.any(h[1::2])
