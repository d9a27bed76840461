"""Acceptance suite shared by the test-suite and ``squirrelwalk selftest``.

Each criterion returns a :class:`CriterionResult` with the measured numbers,
so failures are reported with their actual size rather than a bare flag.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .ctsrw import (FractionalPoissonClock, PoissonClock, frozen_variance_prefactor,
                    fractional_telegraph_expected_position, telegraph_expected_position,
                    time_changed_mean)
from .dtarp import aged_state_probabilities, forward_recurrence_density, strong_aging_ratio
from .montecarlo import (RngPolicy, exponent_fit, fixed_exponent_prefactor,
                         path_enumeration_oracle, simulate_ctsrw, simulate_srw)
from .renewal import BroadPowerTail, Custom, FractionalBernoulli, Geometric, Sibuya
from .specfun import (PrabhakarParams, prabhakar_kernel, prabhakar_kernel_direct,
                      prabhakar_scaling_limit)
from .srw import (WalkSpec, bernoulli_closed_forms, expected_position, moments, msd_via_k,
                  propagators, sibuya_closed_forms)

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_criteria", "operation_checks", "relative_error", "CATALOG"]

#: light-tailed custom table used wherever a Custom model is required
CUSTOM_TABLE = (0.2, 0.5, 0.3)

#: models covered by the exhaustive oracle comparison
CATALOG = (
    Geometric(0.3), Geometric(0.5), Geometric(1.0),
    Sibuya(0.3), Sibuya(0.5), Sibuya(0.8),
    FractionalBernoulli(0.7, 1.5),
    Custom(CUSTOM_TABLE),
)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f}s)"


def relative_error(a, b) -> float:
    """``max |a - b| / max(1, |b|)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


# ---------------------------------------------------------------------------


def oracle_equivalence() -> dict:
    worst = {}
    for model in CATALOG:
        spec = WalkSpec(model, 1, 14)
        exact = propagators(spec)
        err = 0.0
        for t in range(15):
            dist, _, _ = path_enumeration_oracle(spec, t)
            err = max(err, float(np.max(np.abs(dist.masses - exact[t].masses))))
        worst[model.label()] = err
    return {"max_abs_error": worst, "passed": max(worst.values()) < 1e-11}


def bernoulli_forms() -> dict:
    out = {}
    for p in (0.1, 0.3, 0.5, 0.9, 1.0):
        for sigma0 in (1, -1):
            spec = WalkSpec(Geometric(p), sigma0, 500)
            got = moments(spec)
            ref = bernoulli_closed_forms(p, sigma0, 500)
            out[f"p={p},s0={sigma0}"] = max(relative_error(got.mean, ref.mean),
                                            relative_error(got.msd, ref.msd),
                                            relative_error(got.variance, ref.variance))
    return {"max_rel_error": out, "passed": max(out.values()) < 1e-12}


def sibuya_forms() -> dict:
    out = {}
    unit = True
    for mu in (0.25, 0.5, 0.75):
        msd = msd_via_k(WalkSpec(Sibuya(mu), 1, 200))
        ref = sibuya_closed_forms(mu, 1, 200)
        out[mu] = float(np.max(np.abs(msd - ref.msd)))
        unit &= bool(msd[1] == 1.0)
    return {"max_abs_error": out, "msd_at_1_exact": unit,
            "passed": max(out.values()) < 1e-10 and unit}


def ballistic_law() -> dict:
    t = np.arange(10001, dtype=float)
    rows = {}
    ok = True
    for mu in (0.25, 0.5, 0.75):
        var = sibuya_closed_forms(mu, 1, 10000).variance
        fit = exponent_fit(t, var, (1e3, 1e4))
        pref = fixed_exponent_prefactor(t, var, 2.0, (1e3, 1e4))
        rel = abs(pref / (1.0 - mu) - 1.0)
        good = abs(fit.slope - 2.0) <= 0.05 and rel <= 0.10
        ok &= good
        rows[mu] = {"slope": fit.slope, "prefactor": pref, "prefactor_rel_dev": rel}
    return {"fits": rows, "passed": ok}


def escape_law() -> dict:
    t = np.arange(10001, dtype=float)
    rows = {}
    ok = True
    for mu in (0.25, 0.5):
        mean = np.abs(sibuya_closed_forms(mu, 1, 10000).mean)
        fit = exponent_fit(t, mean, (1e3, 1e4))
        target = 1.0 / (2.0 * gamma(2.0 - mu))
        pref = fixed_exponent_prefactor(t, mean, 1.0 - mu, (1e3, 1e4))
        rel = abs(pref / target - 1.0)
        good = abs(fit.slope - (1.0 - mu)) <= 0.05 and rel <= 0.10
        ok &= good
        rows[mu] = {"slope": fit.slope, "prefactor": pref, "target": target,
                    "prefactor_rel_dev": rel}
    return {"fits": rows, "passed": ok}


def broad_regime() -> dict:
    t = np.arange(10001, dtype=float)
    broad = msd_via_k(WalkSpec(BroadPowerTail(1.5), 1, 10000))
    light = msd_via_k(WalkSpec(Custom(CUSTOM_TABLE), 1, 10000))
    fb = exponent_fit(t, broad, (1e3, 1e4))
    fl = exponent_fit(t, light, (1e3, 1e4))
    return {"broad_slope": fb.slope, "light_slope": fl.slope,
            "passed": abs(fb.slope - 1.5) <= 0.1 and abs(fl.slope - 1.0) <= 0.05}


def aging() -> dict:
    f_geo = forward_recurrence_density(Geometric(0.4), 64, 64)
    spread = float(np.max(np.abs(f_geo - f_geo[0])))
    sums = 0.0
    for model in (Geometric(0.4), Sibuya(0.5), FractionalBernoulli(0.7, 1.5)):
        table = aged_state_probabilities(model, 64, 64, 64)
        sums = max(sums, float(np.max(np.abs(table.totals() - 1.0))))
    ratios = {}
    for mu in (0.3, 0.5, 0.7):
        f = forward_recurrence_density(Sibuya(mu), 1000, 20)
        ratios[mu] = strong_aging_ratio(mu, f[1000, 20], 1000, 20)
    ok = spread <= 1e-12 and sums <= 1e-10 and all(abs(r - 1) <= 0.15 for r in ratios.values())
    return {"geometric_tau_spread": spread, "row_sum_error": sums,
            "strong_aging_ratio": ratios, "passed": ok}


def prabhakar() -> dict:
    anchors = 0.0
    for mu in (0.25, 0.5, 0.75, 1.0):
        for nu in (0.5, 1.0, 2.0, mu + 2.0, mu + 3.0):
            k = prabhakar_kernel(PrabhakarParams(mu, nu, 2.0), 1)
            scale = max(abs(2.0 * mu), abs(nu), 1.0)
            anchors = max(anchors, abs(k[0] + 1.0), abs(k[1] - (2.0 * mu - nu)) / scale)
    dual = 0.0
    for mu in (0.25, 0.5, 0.75):
        for nu in (2.0, mu + 2.0, mu + 3.0):
            p = PrabhakarParams(mu, nu, 2.0)
            dual = max(dual, relative_error(prabhakar_kernel(p, 500),
                                            prabhakar_kernel_direct(p, 500)))
    hs = 1.0 / 2.0 ** np.arange(6, 11)
    report = prabhakar_scaling_limit(0.5, 2.0, 0.5, 1.0, hs)
    ok = anchors <= 4 * np.finfo(float).eps and dual <= 1e-11 and report.monotone
    return {"anchor_error_ulps": anchors / np.finfo(float).eps, "dual_route_rel_error": dual,
            "scaling_deviations": report.deviations.tolist(), "monotone": report.monotone,
            "passed": ok}


def monte_carlo(n_paths: int = 100_000, workers: int = 8) -> dict:
    checkpoints = [10, 100, 1000]
    rows = {}
    ok = True
    for model in (Geometric(0.3), Sibuya(0.5)):
        spec = WalkSpec(model, 1, 1000)
        exact = moments(spec)
        one = simulate_srw(spec, n_paths, checkpoints, RngPolicy(20240607), workers=1)
        many = simulate_srw(spec, n_paths, checkpoints, RngPolicy(20240607), workers=workers)
        z_mean = (one.mean - exact.mean[checkpoints]) / one.se_mean
        z_msd = (one.msd - exact.msd[checkpoints]) / one.se_msd
        same = all(np.array_equal(getattr(one, f), getattr(many, f))
                   for f in ("mean", "msd", "variance", "se_mean", "se_msd"))
        good = bool(np.all(np.abs(z_mean) < 4) and np.all(np.abs(z_msd) < 4) and same)
        ok &= good
        rows[model.label()] = {"z_mean": z_mean.tolist(), "z_msd": z_msd.tolist(),
                               "bitwise_1_vs_many": same}
    return {"models": rows, "passed": ok}


def ctsrw_laws(n_paths: int = 20_000) -> dict:
    p, xi = 0.3, 1.0
    geo = WalkSpec(Geometric(p), 1, 3000)
    mx = expected_position(geo)
    cond = 0.0
    for t in (0.1, 1.0, 5.0, 20.0, 100.0, 1000.0):
        ref = (1 - 2 * p) / (2 * p) * -math.expm1(-2 * p * xi * t)
        cond = max(cond, abs(time_changed_mean(mx, PoissonClock(xi), t).value - ref))
    times = np.array([0.5, 2.0, 5.0, 20.0])
    mc = simulate_ctsrw(WalkSpec(Geometric(p), 1, 10**9), PoissonClock(xi), 100_000, times,
                        RngPolicy(7))
    ref = (1 - 2 * p) / (2 * p) * -np.expm1(-2 * p * xi * times)
    z = (mc.mean - ref) / mc.se_mean

    alpha = 0.8
    clock = FractionalPoissonClock(alpha, 1.0)
    ts = np.geomspace(1e2, 1e4, 9)
    big = WalkSpec(Sibuya(0.5), 1, 10**9)
    sib = simulate_ctsrw(big, clock, n_paths, ts, RngPolicy(11))
    ber = simulate_ctsrw(WalkSpec(Geometric(p), 1, 10**9), clock, n_paths, ts, RngPolicy(12))
    s_sib = exponent_fit(ts, sib.msd).slope
    s_ber = exponent_fit(ts, ber.msd).slope
    frozen = simulate_ctsrw(big, clock, n_paths, ts, RngPolicy(13), frozen=True)
    c_hat = float(frozen.variance[-1] / ts[-1] ** (2 * alpha))
    c_ref = frozen_variance_prefactor(alpha)
    ok = (cond <= 1e-8 and bool(np.all(np.abs(z) < 4)) and abs(s_sib - 2 * alpha) <= 0.1
          and abs(s_ber - alpha) <= 0.1 and abs(c_hat / c_ref - 1) <= 0.1)
    return {"conditioning_abs_error": cond, "poisson_mc_z": z.tolist(),
            "sibuya_msd_slope": s_sib, "geometric_msd_slope": s_ber,
            "frozen_prefactor": c_hat, "frozen_prefactor_ref": c_ref, "passed": ok}


def continuum() -> dict:
    v0, xi0, t = 1.0, 0.5, 1.0
    hs = (1e-2, 1e-3, 1e-4)
    errs = []
    for h in hs:
        n = int(round(t / h))
        x = h * v0 * expected_position(WalkSpec(Geometric(xi0 * h), 1, n))[n]
        errs.append(abs(x - telegraph_expected_position(v0, xi0, t)))
    order = exponent_fit(hs, errs).slope
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    mu, h = 0.7, 1e-4
    n = int(round(t / h))
    x = h * v0 * expected_position(WalkSpec(FractionalBernoulli(mu, h**-mu / xi0), 1, n))[n]
    frac = abs(x - fractional_telegraph_expected_position(v0, xi0, mu, t))
    ok = abs(order - 1.0) <= 0.05 and all(9.0 <= r <= 11.0 for r in ratios) and frac <= 1e-3
    return {"errors": errs, "order": order, "ratios": ratios, "fractional_error": frac,
            "passed": ok}


CRITERIA = {
    1: ("oracle equivalence", oracle_equivalence),
    2: ("Bernoulli closed forms", bernoulli_forms),
    3: ("Sibuya exact formulas", sibuya_forms),
    4: ("ballistic law", ballistic_law),
    5: ("escape law", escape_law),
    6: ("broad-density regime", broad_regime),
    7: ("aging renewal process", aging),
    8: ("Prabhakar kernel", prabhakar),
    9: ("Monte Carlo consistency", monte_carlo),
    10: ("time-changed walk", ctsrw_laws),
    11: ("continuum convergence", continuum),
}


def run_criterion(number: int) -> CriterionResult:
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    details = fn()
    elapsed = time.perf_counter() - start
    return CriterionResult(number, title, bool(details.pop("passed")), details, elapsed)


def run_criteria(numbers=None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    return [run_criterion(n) for n in numbers]


# ---------------------------------------------------------------------------
# one worked example per operation, run by ``selftest``
# ---------------------------------------------------------------------------


def _series_checks():
    from .series import (TruncatedSeries as S, derivative, div, divided_difference,
                         frac_power_one_minus_u, linear_combine, mul, scale_argument)

    geo = Geometric(0.4)
    bern = Geometric(0.5).gf(4)
    yield "linear_combine", np.allclose(linear_combine(S([1, 2]), S([3, 4]), 2, 1).coeffs, [5, 8])
    yield "mul", (np.allclose(mul(S([1, 1, 1, 1]), S([1, -1, 0, 0])).coeffs, [1, 0, 0, 0])
                  and np.allclose(mul(bern, bern).coeffs, np.convolve(bern.coeffs, bern.coeffs)[:5]))
    yield "div", np.allclose(div(1.0 - geo.gf(3), S([1, -1, 0, 0])).coeffs, [1, 0.6, 0.36, 0.216])
    yield "frac_power_one_minus_u", np.allclose(frac_power_one_minus_u(0.5, 3).coeffs,
                                                [1, -0.5, -0.125, -0.0625])
    yield "scale_argument", np.allclose(scale_argument(S([0, 1, 0]), 1j).coeffs, [0, 1j, 0])
    yield "derivative", np.allclose(derivative(S([1, 1, 1, 1])).coeffs, [1, 2, 3])
    dd = divided_difference(geo.gf(6), 6, 5, 5).coeffs.real
    diag = all(abs(dd[a, k - 1 - a] - 0.4 * 0.6 ** (k - 1)) < 1e-15
               for k in range(1, 7) for a in range(k))
    yield "divided_difference", diag
    fe = divided_difference(geo.gf(10), 10, 5, 5).shift_u(1).div_w(1.0 - geo.gf(5)).coeffs.real
    yield "bivariate_ops", bool(np.allclose(fe[:, 1:5], 0.4 * 0.6 ** np.arange(4), atol=1e-15))


def _renewal_checks():
    from .renewal import (gf_series, pdf_table, sample_waiting_time, state_polynomial_at_minus_one,
                          state_probabilities)

    yield "pdf_table", np.allclose(pdf_table(Sibuya(0.5), 3), [0.5, 0.125, 0.0625])
    yield "gf_series", np.allclose(gf_series(Geometric(0.4), 3).coeffs, [0, 0.4, 0.24, 0.144])
    table = state_probabilities(Geometric(0.3), 12).table
    binom = np.array([[math.comb(t, n) * 0.3**n * 0.7 ** (t - n) for t in range(13)]
                      for n in range(13)])
    yield "state_probabilities", bool(np.max(np.abs(table - binom)) < 1e-12)
    yield "state_polynomial_at_minus_one", np.allclose(
        state_polynomial_at_minus_one(Geometric(0.3), 20), 0.4 ** np.arange(21), atol=1e-14)
    rng = np.random.default_rng(1)
    draws = [sample_waiting_time(Sibuya(0.5), rng) for _ in range(4000)]
    yield "sample_waiting_time", abs(np.mean(np.equal(draws, 1)) - 0.5) < 4 * math.sqrt(0.25 / 4000)


def _srw_checks():
    from .srw import occupation_time_propagator, consistency_identity, propagator, segmented_gf

    spec = WalkSpec(Geometric(0.3), 1, 10)
    yield "expected_position", abs(expected_position(spec)[2] - 0.56) < 1e-12
    yield "bernoulli_closed_forms", np.allclose(bernoulli_closed_forms(0.5, 1, 100).msd,
                                                np.arange(101), rtol=0, atol=1e-12)
    yield "msd_via_k", all(msd_via_k(WalkSpec(m, 1, 3))[1] == 1.0 for m in CATALOG)
    yield "sibuya_closed_forms", abs(sibuya_closed_forms(0.5, 1, 5).msd[1] - 1.0) < 1e-14
    g = segmented_gf(WalkSpec(Sibuya(0.5), 1, 8), 0.5j, 0.5j, 8).coeffs
    yield "segmented_gf", np.allclose(g, (0.5j) ** np.arange(9), atol=1e-15)
    d = propagator(WalkSpec(Sibuya(0.5), 1, 1), 1)
    yield "propagator", abs(d[1] - 0.5) < 1e-15 and abs(d[-1] - 0.5) < 1e-15
    plus = occupation_time_propagator(spec, 10, "plus").mean()
    minus = occupation_time_propagator(spec, 10, "minus").mean()
    yield "occupation_time_propagator", (abs(plus + minus - 10) < 1e-10
                                         and abs(plus - minus - expected_position(spec)[10]) < 1e-10)
    yield "consistency_identity", consistency_identity(WalkSpec(Sibuya(0.5), 1, 50), 50) < 1e-6


def _dtarp_checks():
    from .dtarp import aged_state_polynomial

    f = forward_recurrence_density(Geometric(0.4), 10, 5)
    yield "forward_recurrence_density", bool(np.all(np.abs(f[:, 3] - 0.144) < 1e-15))
    table = aged_state_probabilities(Sibuya(0.5), 8, 8, 8)
    yield "aged_state_probabilities", bool(np.max(np.abs(table.totals() - 1.0)) < 1e-10)
    g = aged_state_polynomial(Geometric(0.3), -1.0, 10, 10)
    yield "aged_state_polynomial", np.allclose(g, np.broadcast_to(0.4 ** np.arange(11), g.shape),
                                               atol=1e-13)


def _specfun_checks():
    from scipy.special import erfc

    from .specfun import fractional_poisson_state_probs, mittag_leffler

    k = prabhakar_kernel(PrabhakarParams(0.5, 2.0, 2.0), 5)
    yield "prabhakar_kernel", k[0] == -1.0 and abs(k[1] + 1.0) < 1e-15
    hs = 1.0 / 2.0 ** np.arange(6, 11)
    yield "prabhakar_scaling_limit", prabhakar_scaling_limit(0.5, 2.0, 0.5, 1.0, hs).monotone
    yield "mittag_leffler", (abs(mittag_leffler(1.0, 1.0, -1.0) - math.exp(-1)) < 1e-14
                             and abs(mittag_leffler(0.5, 1.0, -1.0) - math.e * erfc(1.0)) < 1e-13)
    probs = fractional_poisson_state_probs(0.8, 1.0, 3.0)
    yield "fractional_poisson_state_probs", (
        abs(probs[0] - mittag_leffler(0.8, 1.0, -(3.0**0.8))) < 1e-13
        and abs(math.fsum(probs) - 1.0) < 1e-10)


def _montecarlo_checks():
    stats = simulate_srw(WalkSpec(Geometric(0.5), 1, 100), 100_000, [100], RngPolicy(3))
    yield "simulate_srw", (abs(stats.mean[0]) < 4 * stats.se_mean[0]
                           and 0.94 <= stats.msd[0] / 100 <= 1.06)
    times = np.array([0.0, 1.0, 3.0])
    cts = simulate_ctsrw(WalkSpec(Geometric(0.3), 1, 10**6), PoissonClock(1.0), 20_000, times,
                         RngPolicy(4))
    ref = 0.4 / 0.6 * -np.expm1(-0.6 * times)
    yield "simulate_ctsrw", (cts.mean[0] == 0.0
                             and bool(np.all(np.abs(cts.mean[1:] - ref[1:]) < 4 * cts.se_mean[1:])))
    dist, mean, msd = path_enumeration_oracle(WalkSpec(Sibuya(0.5), 1, 1), 1)
    yield "path_enumeration_oracle", abs(dist[1] - 0.5) < 1e-15 and msd == 1.0
    t = np.arange(1.0, 1001.0)
    yield "exponent_fit", abs(exponent_fit(t, t**2).slope - 2.0) < 1e-12


def _ctsrw_checks():
    from .ctsrw import ctsrw_propagator

    spec = WalkSpec(Geometric(0.3), 1, 400)
    clock = PoissonClock(1.0)
    ones = time_changed_mean(np.ones(400), clock, 30.0).value
    yield "time_changed_mean", abs(ones - 1.0) < 1e-10
    dist = ctsrw_propagator(spec, clock, 10.0)
    mean = time_changed_mean(expected_position(spec), clock, 10.0).value
    yield "ctsrw_propagator", abs(dist.mean() - mean) < 1e-9
    yield "telegraph_expected_position", (telegraph_expected_position(1.0, 0.5, 0.0) == 0.0
                                          and abs(telegraph_expected_position(1.0, 0.5, 1e3) - 1) < 1e-15)
    ts = np.array([0.3, 1.0, 2.0])
    yield "fractional_telegraph_expected_position", np.allclose(
        fractional_telegraph_expected_position(1.0, 0.5, 1.0, ts),
        telegraph_expected_position(1.0, 0.5, ts), rtol=1e-12)


def operation_checks() -> list[tuple[str, bool]]:
    """``(operation, passed)`` for a worked example of every library operation."""
    out = []
    for group in (_series_checks, _renewal_checks, _srw_checks, _dtarp_checks, _specfun_checks,
                  _montecarlo_checks, _ctsrw_checks):
        out.extend((name, bool(ok)) for name, ok in group())
    return out
