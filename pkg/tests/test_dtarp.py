import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from squirrelwalk.dtarp import (TENSOR_CAP, aged_state_polynomial, aged_state_probabilities,
                                conditional_state_probabilities, forward_recurrence_deficit,
                                forward_recurrence_density, strong_aging_ratio)
from squirrelwalk.montecarlo import RngPolicy, step_autocorrelation
from squirrelwalk.renewal import Custom, FractionalBernoulli, Geometric, Sibuya, state_probabilities

MODELS = [Geometric(0.4), Sibuya(0.5), FractionalBernoulli(0.7, 1.5), Custom((0.2, 0.5, 0.3))]
IDS = [m.label() for m in MODELS]


def test_geometric_forward_density_is_tau_independent():
    f = forward_recurrence_density(Geometric(0.4), 30, 12)
    np.testing.assert_allclose(f[:, 3], 0.144, rtol=1e-14)
    assert np.max(np.ptp(f, axis=0)) < 1e-12


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_forward_density_tau0_is_pdf(model):
    f = forward_recurrence_density(model, 5, 40)
    np.testing.assert_allclose(f[0], model.pdf(40), atol=1e-15)
    assert np.all(f[:, 0] == 0)


def test_geometric_deficit_small_at_ten_tau():
    tau = 20
    f = forward_recurrence_density(Geometric(0.4), tau, 10 * tau)
    assert np.all(forward_recurrence_deficit(f) < 1e-3)


def test_sibuya_deficit_is_reported():
    f = forward_recurrence_density(Sibuya(0.5), 20, 200)
    deficit = forward_recurrence_deficit(f)
    assert np.all((deficit > 0) & (deficit < 1))
    # older processes wait longer for the next event
    assert np.all(np.diff(deficit) > 0)


@pytest.mark.parametrize("mu,tau,t,tol", [(0.5, 200, 10, 0.10), (0.3, 1000, 20, 0.15),
                                          (0.5, 1000, 20, 0.15), (0.7, 1000, 20, 0.15)])
def test_strong_aging(mu, tau, t, tol):
    f = forward_recurrence_density(Sibuya(mu), tau, t)
    assert strong_aging_ratio(mu, f[tau, t], tau, t) == pytest.approx(1.0, abs=tol)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_aged_tensor_invariants(model):
    table = aged_state_probabilities(model, 24, 24, 24)
    np.testing.assert_allclose(table.totals(), 1.0, atol=1e-10)
    expected0 = np.zeros(25)
    expected0[0] = 1
    for tau in (0, 7, 24):
        np.testing.assert_array_equal(table.phi[tau, :, 0], expected0)
    np.testing.assert_allclose(table.phi[0], state_probabilities(model, 24).table, atol=1e-14)


def _bernoulli_window_counts(p, tau, t):
    """P[N(tau + t) - N(tau) = m] over all 2^(tau+t) event patterns."""
    out = np.zeros(t + 1)
    for pattern in itertools.product((0, 1), repeat=tau + t):
        k = sum(pattern)
        out[sum(pattern[tau:])] += p**k * (1 - p) ** (tau + t - k)
    return out


def test_geometric_aged_tensor_brute_force():
    p = 0.35
    table = aged_state_probabilities(Geometric(p), 6, 6, 6)
    for tau, t in [(0, 6), (2, 5), (6, 6), (3, 3), (5, 1)]:
        np.testing.assert_allclose(table.phi[tau, : t + 1, t], _bernoulli_window_counts(p, tau, t),
                                   atol=1e-14)
    np.testing.assert_allclose(table.phi, np.broadcast_to(table.phi[0], table.phi.shape), atol=1e-14)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_aged_polynomial(model):
    np.testing.assert_allclose(aged_state_polynomial(model, 1.0, 10, 10), 1.0, atol=1e-14)
    for v in (-1.0, -0.3, 0.6):
        closed = aged_state_polynomial(model, v, 16, 16)
        tensor = aged_state_polynomial(model, v, 16, 16, route="tensor")
        np.testing.assert_allclose(closed, tensor, atol=1e-12)
    with pytest.raises(ValueError):
        aged_state_polynomial(model, 1.5, 3, 3)
    with pytest.raises(ValueError):
        aged_state_polynomial(model, 0.5, 3, 3, route="other")


def test_geometric_parity_does_not_age():
    p = 0.3
    g = aged_state_polynomial(Geometric(p), -1.0, 20, 20)
    np.testing.assert_allclose(g, np.broadcast_to((1 - 2 * p) ** np.arange(21), g.shape), atol=1e-13)


def test_parity_matches_step_autocorrelation():
    model, tau, ts = Sibuya(0.5), 10, [1, 5, 10]
    g = aged_state_polynomial(model, -1.0, tau, max(ts))
    mean, se = step_autocorrelation(model, tau, ts, 10**6, RngPolicy(99))
    z = (mean - g[tau, ts]) / se
    assert np.all(np.abs(z) < 4)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_conditional_probabilities_marginals(model):
    tau_max, t_max = 8, 8
    cond = conditional_state_probabilities(model, tau_max, t_max)
    phi = aged_state_probabilities(model, tau_max, t_max, t_max).phi
    np.testing.assert_allclose(cond.sum(axis=0).transpose(1, 0, 2), phi, atol=1e-13)
    states = state_probabilities(model, tau_max).table  # [n, tau]
    marg = cond.sum(axis=1)  # [n, tau, t]
    for t in range(t_max + 1):
        np.testing.assert_allclose(marg[:, :, t], states, atol=1e-13)


def test_tensor_cap():
    with pytest.raises(ValueError):
        aged_state_probabilities(Geometric(0.5), 300, 300, 300)
    assert TENSOR_CAP == 256**3


@given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.floats(-1, 1))
def test_custom_aged_routes_agree(values, v):
    total = sum(values)
    table = tuple(x / total for x in values) if total > 1 else tuple(values)
    model = Custom(table)
    closed = aged_state_polynomial(model, v, 8, 8)
    tensor = aged_state_polynomial(model, v, 8, 8, route="tensor")
    np.testing.assert_allclose(closed, tensor, atol=1e-12)
    totals = aged_state_probabilities(model, 8, 8, 8).totals()
    np.testing.assert_allclose(totals, 1.0, atol=1e-10)
