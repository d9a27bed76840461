"""Discrete Prabhakar kernels, Mittag-Leffler functions and fractional Poisson laws.

The discrete Prabhakar kernel ``p_{mu,nu}(lam, t)`` is the coefficient
sequence of ``(1-u)^{-nu} / (1 - lam (1-u)^{-mu})``.  Alternating series for
the Mittag-Leffler function and the fractional Poisson state probabilities
are summed in multiprecision (mpmath) with a working precision sized from
the largest term, so results are accurate to double precision inside the
documented windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gamma, gammaln, gammasgn as gamma_sign

from .series import div, frac_power_one_minus_u

__all__ = [
    "PrabhakarParams",
    "prabhakar_kernel",
    "prabhakar_kernel_direct",
    "prabhakar_scaling_limit",
    "ScalingReport",
    "mittag_leffler",
    "fractional_poisson_state_probs",
    "ML_SERIES_WINDOW",
    "ML_GROWTH_LIMIT",
    "FRACTIONAL_POISSON_WINDOW",
    "FRACTIONAL_POISSON_GROWTH",
    "WindowError",
]

ML_SERIES_WINDOW = 50.0
#: E_alpha(z) grows like exp(z^{1/alpha}) on the positive axis; beyond this it overflows
ML_GROWTH_LIMIT = 700.0
FRACTIONAL_POISSON_WINDOW = 30.0
#: the cancelling terms scale like exp(z^{1/alpha}); this bounds the mp cost
FRACTIONAL_POISSON_GROWTH = 150.0


class WindowError(ValueError):
    """Argument outside the validated evaluation window."""


@dataclass(frozen=True)
class PrabhakarParams:
    mu: float
    nu: float
    lam: float
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if not self.nu > 0.0:
            raise ValueError("nu must be positive")
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")
        if self.lam == 1.0:
            raise ValueError("the kernel series diverges at lambda = 1")
        if self.gamma != 1.0:
            raise ValueError("only gamma = 1 is supported")


def prabhakar_kernel(params: PrabhakarParams, t_max: int) -> np.ndarray:
    """``p_{mu,nu}(lam, t)`` for ``t = 0..t_max`` by series coefficient extraction.

    Uses ``(1-u)^{mu-nu} / ((1-u)^mu - lam)``, whose denominator has the
    nonzero constant term ``1 - lam``.
    """
    num = frac_power_one_minus_u(params.mu - params.nu, t_max)
    den = frac_power_one_minus_u(params.mu, t_max) - params.lam
    return np.array(div(num, den).coeffs)


def _rising_over_factorial(c: float, t_max: int, scale: float) -> np.ndarray:
    """``scale * (c)_t / t!`` for ``t = 0..t_max`` by the product recurrence."""
    k = np.arange(t_max, dtype=float)
    ratios = (c + k) / (k + 1.0)
    out = np.empty(t_max + 1)
    out[0] = scale
    out[1:] = scale * np.cumprod(ratios)
    return out


def prabhakar_kernel_direct(params: PrabhakarParams, t_max: int, rtol: float = 1e-15,
                            max_terms: int = 10**6) -> np.ndarray:
    """Independent evaluation by direct summation over ``m``.

    For ``lam > 1``: ``p(t) = -sum_{m>=1} lam^{-m} (nu - m mu)_t / t!``.
    For ``lam < 1``: ``p(t) = sum_{m>=0} lam^m (nu + m mu)_t / t!``.
    Summation stops once a rigorous bound on the remaining terms falls below
    ``rtol`` times the current magnitude.
    """
    mu, nu, lam = params.mu, params.nu, params.lam
    total = np.zeros(t_max + 1)
    if lam > 1.0:
        # |(c)_t/t!| <= 1 for -t < c <= 0 and <= 2^{|c|} below -t, so every
        # term with nu - m mu <= 0 is bounded by max(1/lam, 2^mu/lam)^m.
        r = max(1.0 / lam, 2.0**mu / lam)
        m0 = math.ceil(nu / mu)
        for m in range(1, max_terms):
            term = _rising_over_factorial(nu - m * mu, t_max, -(lam ** -m))
            if not np.all(np.isfinite(term)):
                raise OverflowError("direct summation overflowed; use the series route")
            total += term
            scale = max(1.0, float(np.max(np.abs(total))))
            if m >= m0:
                if r < 1.0:
                    if r ** (m + 1) * 2.0 ** max(0.0, -nu) / (1.0 - r) < rtol * scale:
                        return total
                elif m * mu > nu + t_max + 1 and np.max(np.abs(term)) < rtol * scale:
                    return total
        raise RuntimeError("direct summation did not converge")
    peak = t_max / max(math.log(1.0 / lam), 1e-300) + 1.0
    for m in range(0, max_terms):
        term = _rising_over_factorial(nu + m * mu, t_max, lam**m)
        if not np.all(np.isfinite(term)):
            raise OverflowError("direct summation overflowed; use the series route")
        total += term
        if m > peak and np.max(np.abs(term)) < rtol * max(1.0, float(np.max(np.abs(total)))):
            return total
    raise RuntimeError("direct summation did not converge")


# ---------------------------------------------------------------------------
# Mittag-Leffler
# ---------------------------------------------------------------------------

def _check_ml_params(alpha: float, beta: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not beta > 0.0:
        raise ValueError("beta must be positive")


def _series_digits(x: float, alpha: float) -> int:
    """Decimal digits lost to cancellation in ``sum x^k / Gamma(alpha k + beta)``."""
    if x >= 0:
        return 0
    return int(abs(x) ** (1.0 / alpha) / math.log(10.0)) + 1


def _ml_series_mp(alpha, beta, z: float) -> mpmath.mpf:
    extra = _series_digits(z, alpha)
    with mpmath.workdps(25 + extra):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        k = 0
        tol = mpmath.mpf(10) ** (-18)
        past_peak = False
        prev = None
        while True:
            term = power * mpmath.rgamma(a * k + b)
            total += term
            mag = abs(term)
            if prev is not None and mag < prev:
                past_peak = True
            if past_peak and mag <= tol * abs(total) and k > 2:
                break
            if past_peak and total == 0 and mag == 0:
                break
            prev = mag
            power *= zz
            k += 1
        return +total


def _ml_asymptotic(alpha: float, beta: float, z: float, max_terms: int = 10**5) -> tuple[float, float]:
    """Optimally truncated ``-sum_k z^{-k} / Gamma(beta - alpha k)`` for ``z < 0``.

    Returns ``(value, error_estimate)``.  The poles of ``1/Gamma`` make the
    term sizes oscillate, so truncation uses the smooth envelope
    ``|1/Gamma(x)| <= Gamma(1-x)/pi`` (``x < 0``), whose minimum near
    ``alpha k ~ |z|^{1/alpha}`` bounds the error.  Exponentially small parts
    are added to the estimate when ``alpha == 1``.
    """
    n = int(min(max_terms, max(60.0, 3.0 * abs(z) ** (1.0 / alpha) / alpha)))
    k = np.arange(1, n + 1, dtype=float)
    arg = beta - alpha * k
    log_z = math.log(abs(z))
    with np.errstate(over="ignore", divide="ignore"):
        log_env = np.where(arg < 0.5, gammaln(1.0 - arg) - math.log(math.pi), -gammaln(arg))
        log_env -= k * log_z
        cut = int(np.argmin(log_env))
        mags = np.exp(-k[:cut] * log_z - gammaln(arg[:cut]))
    pole = (arg[:cut] <= 0) & (arg[:cut] == np.round(arg[:cut]))
    signs = -gamma_sign(arg[:cut]) * np.where(k[:cut] % 2 == 0, 1.0, -1.0)
    mags[pole] = 0.0
    signs[pole] = 0.0
    total = math.fsum(signs * mags)
    err = math.exp(float(log_env[cut]))
    if alpha == 1.0:
        err += math.exp(z) * abs(z) ** (1.0 - beta)
    return total, err


def mittag_leffler(alpha: float, beta: float, z) -> float | np.ndarray:
    """Two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)`` for real ``z``.

    Inside ``|z| <= 50`` the power series is summed exactly (multiprecision);
    on the negative axis the algebraic asymptotic expansion is used instead
    wherever its truncation error is below 1e-17 relative, which is always
    the case for ``z < -50``.  ``z > 50`` raises :class:`WindowError`, as
    does any ``z > 0`` with ``z^{1/alpha} > 700`` (the value overflows).
    """
    _check_ml_params(alpha, beta)
    zs = np.asarray(z, dtype=float)
    out = np.empty(zs.shape)
    for idx, x in np.ndenumerate(zs):
        x = float(x)
        if x > ML_SERIES_WINDOW:
            raise WindowError(f"E_{{alpha,beta}}({x}) outside the evaluation window z <= 50")
        if x > 0 and math.log(x) / alpha > math.log(ML_GROWTH_LIMIT):
            raise WindowError(f"E_{{{alpha},beta}}({x}) overflows (z^(1/alpha) > {ML_GROWTH_LIMIT})")
        if alpha == 1.0 and beta == 1.0:
            out[idx] = math.exp(x)
            continue
        if x < -1.0:
            value, err = _ml_asymptotic(alpha, beta, x)
            if x < -ML_SERIES_WINDOW or err <= 1e-17 * abs(value):
                out[idx] = value
                continue
        out[idx] = float(_ml_series_mp(alpha, beta, x))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# fractional Poisson
# ---------------------------------------------------------------------------

def fractional_poisson_state_probs(alpha: float, xi: float, t: float, n_max: int | None = None,
                                   tail_tol: float = 1e-12) -> np.ndarray:
    """``P[M(t) = n]`` for the fractional Poisson process, ``n = 0..n_max``.

    ``P_n = sum_{j>=n} C(j, n) (-1)^{j-n} z^j / Gamma(alpha j + 1)`` with
    ``z = xi t^alpha``.  All ``P_n`` are produced at once by expanding
    ``sum_j z^j (v-1)^j / Gamma(alpha j + 1)`` in powers of ``v`` (a Horner
    scheme in multiprecision).  If ``n_max`` is None it is chosen so that the
    neglected mass is below ``tail_tol``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not xi > 0.0:
        raise ValueError("xi must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    z = xi * t**alpha
    if z > FRACTIONAL_POISSON_WINDOW * (1.0 + 1e-12):
        raise WindowError(
            f"xi t^alpha = {z:.4g} exceeds the exact-evaluation window {FRACTIONAL_POISSON_WINDOW}; "
            "use Monte Carlo (simulate_ctsrw) for larger times"
        )
    if z > 0.0 and math.log(z) / alpha > math.log(FRACTIONAL_POISSON_GROWTH):
        raise WindowError(
            f"(xi t^alpha)^(1/alpha) = {z ** (1 / alpha):.4g} exceeds {FRACTIONAL_POISSON_GROWTH}; "
            "use Monte Carlo (simulate_ctsrw) for larger times"
        )
    if z == 0.0:
        n = 0 if n_max is None else n_max
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    auto = n_max is None
    if auto:
        n_max = _default_n_max(alpha, z)
    while True:
        probs = _frac_poisson_horner(alpha, z, n_max)
        if not auto or 1.0 - probs.sum() < tail_tol or n_max > 10**4:
            return probs
        n_max *= 2


def _default_n_max(alpha: float, z: float) -> int:
    mean = z / gamma(1.0 + alpha)
    second = 2.0 * z * z / gamma(1.0 + 2.0 * alpha) + mean
    sd = math.sqrt(max(second - mean * mean, 0.0))
    return int(mean + 12.0 * sd + 30)


def _log_term_bound(alpha: float, z: float, n_max: int, k: np.ndarray) -> np.ndarray:
    """log of ``C(k, min(n_max, k//2)) z^k / Gamma(alpha k + 1)``, the largest
    contribution of coefficient ``k`` to any ``P_n`` with ``n <= n_max``."""
    n = np.minimum(n_max, k // 2)
    log_binom = gammaln(k + 1.0) - gammaln(n + 1.0) - gammaln(k - n + 1.0)
    return log_binom + k * math.log(z) - gammaln(alpha * k + 1.0)


def _frac_poisson_horner(alpha: float, z: float, n_max: int) -> np.ndarray:
    # size the working precision and the number of coefficients from the
    # largest term that enters any P_n
    k = np.arange(0, 64)
    while True:
        logs = _log_term_bound(alpha, z, n_max, k)
        peak = float(logs.max())
        floor = -25.0 * math.log(10.0)
        if k[-1] > n_max and logs[-1] < floor and logs[-1] < logs[-2]:
            break
        k = np.arange(0, 2 * k.size)
    cut = np.flatnonzero(logs >= floor)[-1] + 2
    digits = 25 + int(max(peak, 0.0) / math.log(10.0))
    with mpmath.workdps(digits):
        a = mpmath.mpf(alpha)
        zz = mpmath.mpf(z)
        coeffs = []
        power = mpmath.mpf(1)
        for j in range(max(cut, n_max + 1)):
            coeffs.append(power * mpmath.rgamma(a * j + 1))
            power *= zz
        # Horner in (v - 1), truncated at degree n_max
        poly = [mpmath.mpf(0)] * (n_max + 1)
        for c in reversed(coeffs):
            # poly <- poly * (v - 1) + c
            for i in range(n_max, 0, -1):
                poly[i] = poly[i - 1] - poly[i]
            poly[0] = c - poly[0]
        return np.array([float(p) for p in poly])


# ---------------------------------------------------------------------------
# scaling limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingReport:
    h: np.ndarray
    values: np.ndarray
    limit: float
    deviations: np.ndarray

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.deviations) < 0))


def prabhakar_scaling_limit(mu: float, nu: float, lam0: float, t: float, hs) -> ScalingReport:
    """Compare ``h^{nu-1} p_{mu,nu}(lam0 h^mu, t/h)`` with ``t^{nu-1} E_{mu,nu}(lam0 t^mu)``.

    Each ``t/h`` must be an integer (to 1e-9).
    """
    hs = np.asarray(hs, dtype=float)
    values = np.empty(hs.size)
    for i, h in enumerate(hs):
        n = t / h
        steps = int(round(n))
        if abs(n - steps) > 1e-9 * max(1.0, n):
            raise ValueError("t/h must be an integer")
        lam = lam0 * h**mu
        if not lam < 1.0:
            raise ValueError("scaling limit needs lam0 h^mu < 1")
        kernel = prabhakar_kernel(PrabhakarParams(mu, nu, lam), steps)
        values[i] = h ** (nu - 1.0) * kernel[steps]
    limit = t ** (nu - 1.0) * mittag_leffler(mu, nu, lam0 * t**mu)
    return ScalingReport(hs, values, float(limit), np.abs(values - limit))
