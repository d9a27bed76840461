import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.special import gammaln

from squirrelwalk.renewal import (BroadPowerTail, Custom, FractionalBernoulli, Geometric, Sibuya,
                                  broad_tail_constants, gf_series, parse_model, pdf_table,
                                  sample_waiting_time, state_polynomial_at_minus_one,
                                  state_probabilities, survival_table)
from squirrelwalk.series import frac_power_one_minus_u

MODELS = [Geometric(0.3), Geometric(1.0), Sibuya(0.3), Sibuya(0.5), FractionalBernoulli(0.7, 1.5),
          BroadPowerTail(1.5, 5000), Custom((0.2, 0.5, 0.3)), Custom((0.1, 0.0, 0.4))]
IDS = [m.label() for m in MODELS]


def sibuya_gamma_ratio(mu, t):
    return mu * np.exp(gammaln(t - mu) - gammaln(1 - mu) - gammaln(t + 1))


def test_sibuya_pdf_matches_gamma_ratio():
    t = np.arange(1, 301)
    np.testing.assert_allclose(pdf_table(Sibuya(0.5), 300), sibuya_gamma_ratio(0.5, t), rtol=1e-12)
    np.testing.assert_allclose(pdf_table(Sibuya(0.5), 3), [0.5, 0.125, 0.0625], rtol=1e-15)


def test_geometric_p1_is_delta():
    np.testing.assert_array_equal(pdf_table(Geometric(1.0), 5), [1, 0, 0, 0, 0])


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.9])
def test_fractional_bernoulli_mu1_is_geometric(p):
    fb = FractionalBernoulli(1.0, (1 - p) / p)
    np.testing.assert_allclose(pdf_table(fb, 200), pdf_table(Geometric(p), 200), rtol=0, atol=1e-12)


def test_gf_series_examples():
    np.testing.assert_allclose(gf_series(Geometric(0.4), 3).coeffs, [0, 0.4, 0.24, 0.144], rtol=1e-15)
    sib = gf_series(Sibuya(0.5), 50).coeffs
    np.testing.assert_allclose(sib, (1 - frac_power_one_minus_u(0.5, 50)).coeffs, atol=1e-16)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_normalization_and_survival(model):
    T = 400
    psi = gf_series(model, T).coeffs
    surv = survival_table(model, T)
    assert psi[0] == 0
    assert abs(psi.sum() + surv[-1] - 1) < 1e-12
    np.testing.assert_allclose(surv, 1 - np.cumsum(psi), atol=1e-12)
    assert surv[0] == 1 and np.all(np.diff(surv) <= 1e-15) and np.all(surv >= 0)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_state_probabilities_properties(model):
    tab = state_probabilities(model, 60)
    np.testing.assert_allclose(tab.totals(), 1.0, atol=1e-12)
    np.testing.assert_allclose(tab.table[0], survival_table(model, 60), atol=1e-15)
    assert not np.any(np.tril(tab.table, -1))
    assert tab.table[0, 0] == 1 and not np.any(tab.table[1:, 0])


def _brute_force_counts(p, t):
    """P[N(t) = n] by enumerating the 2^t event patterns of a Bernoulli chain."""
    out = np.zeros(t + 1)
    for pattern in itertools.product((0, 1), repeat=t):
        n = sum(pattern)
        out[n] += p**n * (1 - p) ** (t - n)
    return out


def test_geometric_state_probabilities_brute_force():
    p = 0.3
    tab = state_probabilities(Geometric(p), 12).table
    for t in range(13):
        np.testing.assert_allclose(tab[: t + 1, t], _brute_force_counts(p, t), atol=1e-14)
        np.testing.assert_allclose(tab[: t + 1, t], stats.binom.pmf(np.arange(t + 1), t, p), atol=1e-14)


def test_sibuya_trapped_limit():
    s = state_probabilities(Sibuya(1e-4), 200).table[0]
    assert np.all(s > 0.999)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_state_polynomial_at_minus_one(model):
    T = 80
    poly = state_polynomial_at_minus_one(model, T)
    assert poly[0] == pytest.approx(1.0, abs=1e-15)
    signs = (-1.0) ** np.arange(T + 1)
    np.testing.assert_allclose(poly, signs @ state_probabilities(model, T).table, atol=1e-12)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.75, 1.0])
def test_state_polynomial_geometric_closed_form(p):
    np.testing.assert_allclose(state_polynomial_at_minus_one(Geometric(p), 100),
                               (1 - 2 * p) ** np.arange(101), atol=1e-14)


def test_sibuya_first_gap_probability():
    rng = np.random.default_rng(11)
    draws = Sibuya(0.5).sample(rng, 10**6)
    ones = np.count_nonzero(draws == 1)
    chi2 = (ones - 5e5) ** 2 / 5e5 + (ones - 5e5) ** 2 / 5e5
    assert stats.chi2.sf(chi2, 1) > 1e-3


@pytest.mark.parametrize("model", [Sibuya(0.5), FractionalBernoulli(0.7, 1.5), Geometric(0.3),
                                   BroadPowerTail(1.5, 5000), Custom((0.2, 0.5, 0.2))],
                         ids=lambda m: m.label())
def test_sampler_histogram_within_4_sigma(model):
    n = 10**6
    draws = model.sample(np.random.default_rng(5), n)
    psi = pdf_table(model, 50)
    counts = np.bincount(draws[draws <= 50], minlength=51)[1:]
    sigma = np.sqrt(n * psi * (1 - psi))
    mask = sigma > 0
    z = (counts[mask] - n * psi[mask]) / sigma[mask]
    assert np.max(np.abs(z)) < 4.5
    assert not np.any(counts[~mask])


def test_sibuya_hazard_sampler_agrees():
    n = 20000
    draws = Sibuya(0.5, method="hazard").sample(np.random.default_rng(2), n, cap=10**5)
    psi = pdf_table(Sibuya(0.5), 10)
    counts = np.bincount(draws[draws <= 10], minlength=11)[1:]
    z = (counts - n * psi) / np.sqrt(n * psi * (1 - psi))
    assert np.max(np.abs(z)) < 4.5


def test_sample_waiting_time_and_cap():
    rng = np.random.default_rng(0)
    assert all(sample_waiting_time(Geometric(1.0), rng) == 1 for _ in range(50))
    draws = Custom((0.25,)).sample(rng, 4000, cap=99)
    assert set(np.unique(draws)) == {1, 99}
    assert Geometric(1e-12).sample(rng, 10, cap=1000).max() == 1000


def test_parameter_validation():
    for bad in (lambda: Geometric(0.0), lambda: Geometric(1.2), lambda: Sibuya(1.0),
                lambda: Sibuya(0.0), lambda: FractionalBernoulli(1.1, 1.0),
                lambda: FractionalBernoulli(0.5, 0.0), lambda: BroadPowerTail(2.0),
                lambda: Custom((0.7, 0.7)), lambda: Custom((-0.1,)), lambda: Custom(())):
        with pytest.raises(ValueError):
            bad()


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_parse_model_round_trip(model):
    assert parse_model(model.label()) == model


def test_parse_model_errors():
    for text in ("geometric:q=0.3", "levy:alpha=1", "sibuya:mu=2"):
        with pytest.raises(ValueError):
            parse_model(text)


def test_custom_from_file(tmp_path):
    path = tmp_path / "table.tsv"
    path.write_text("# waiting times\n1\t0.2\n3\t0.5\n")
    model = Custom.from_file(path)
    assert model.table == (0.2, 0.0, 0.5)
    assert model.deficit == pytest.approx(0.3)
    assert parse_model(f"custom:path={path}") == model
    path.write_text("2\t0.2\n1\t0.5\n")
    with pytest.raises(ValueError):
        Custom.from_file(path)


def test_broad_tail_constants():
    model = BroadPowerTail(1.5)
    A, B = broad_tail_constants(model)
    t = np.arange(1, model.support + 1, dtype=float)
    assert A == pytest.approx(float(np.dot(t, model._weights)))
    exact_B = model.normalization * math.gamma(-1.5)
    assert B == pytest.approx(exact_B, rel=0.05)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_custom_state_probabilities_sum_to_one(values):
    total = sum(values)
    table = tuple(v / total for v in values) if total > 1 else tuple(values)
    tab = state_probabilities(Custom(table), 30)
    np.testing.assert_allclose(tab.totals(), 1.0, atol=1e-12)
    assert np.all(tab.table >= -1e-15)


@given(st.floats(0.01, 0.99), st.integers(1, 200))
def test_sibuya_survival_is_hazard_product(mu, t):
    s = survival_table(Sibuya(mu), t)
    expected = math.prod(1 - mu / k for k in range(1, t + 1))
    assert s[t] == pytest.approx(expected, rel=1e-12)
