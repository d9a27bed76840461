"""Walk observed on a continuous-time clock: ``Y(t) = X_{M(t)}``.

Averages are computed by conditioning on the clock count,
``<f(M(t))> = sum_m P[M(t) = m] f(m)``, which sidesteps any numerical
Laplace inversion.  The continuum telegraph limits of the expected position
are provided in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .specfun import WindowError, fractional_poisson_state_probs, mittag_leffler
from .srw import LatticeDistribution, WalkSpec, propagators

__all__ = [
    "PoissonClock",
    "FractionalPoissonClock",
    "TimeChangedValue",
    "clock_state_probabilities",
    "time_changed_mean",
    "ctsrw_propagator",
    "telegraph_expected_position",
    "fractional_telegraph_expected_position",
    "frozen_variance_prefactor",
    "MASS_TOL",
    "M_CAP",
]

#: conditioning sums stop once the neglected clock mass is below this
MASS_TOL = 1e-10
#: hard cap on the number of conditioning terms
M_CAP = 10**4


@dataclass(frozen=True)
class PoissonClock:
    """Exponential inter-arrival times with rate ``xi``."""

    xi: float

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("xi must be positive")

    @property
    def alpha(self) -> float:
        return 1.0

    def label(self) -> str:
        return f"poisson:xi={self.xi!r}"


@dataclass(frozen=True)
class FractionalPoissonClock:
    """Mittag-Leffler inter-arrival times with survival ``E_alpha(-xi t^alpha)``."""

    alpha: float
    xi: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.xi > 0:
            raise ValueError("xi must be positive")

    def label(self) -> str:
        return f"fracpoisson:alpha={self.alpha!r},xi={self.xi!r}"


def parse_clock(text: str):
    """``poisson:xi=1`` or ``fracpoisson:alpha=0.8,xi=1``."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        params[key.strip()] = float(value)
    kind = kind.strip().lower()
    try:
        if kind == "poisson":
            return PoissonClock(params["xi"])
        if kind in ("fracpoisson", "fractionalpoisson"):
            return FractionalPoissonClock(params["alpha"], params["xi"])
    except KeyError as exc:
        raise ValueError(f"missing clock parameter {exc.args[0]!r} in {text!r}") from None
    raise ValueError(f"unknown clock {kind!r}")


def clock_state_probabilities(clock, t: float) -> np.ndarray:
    """``P[M(t) = m]`` for ``m = 0..m_max`` with neglected mass below ``MASS_TOL``.

    The Poisson clock uses the exact pmf at any ``t``; the fractional clock
    is limited to ``xi t^alpha`` within the fractional Poisson window.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return np.ones(1)
    if isinstance(clock, PoissonClock) or clock.alpha == 1.0:
        lam = clock.xi * t
        m_max = int(stats.poisson.isf(MASS_TOL / 10, lam)) + 1
        if m_max > M_CAP:
            raise WindowError(f"Poisson mean {lam:.4g} needs more than {M_CAP} terms")
        return stats.poisson.pmf(np.arange(m_max + 1), lam)
    probs = fractional_poisson_state_probs(clock.alpha, clock.xi, t)
    tail = np.cumsum(probs[::-1])[::-1]
    keep = np.flatnonzero(tail >= MASS_TOL)
    m_max = int(keep[-1]) + 1 if keep.size else 0
    return probs[: min(m_max + 1, probs.size, M_CAP + 1)]


@dataclass(frozen=True)
class TimeChangedValue:
    value: float
    m_max: int
    neglected_mass: float
    bound: float


def time_changed_mean(f, clock, t: float) -> TimeChangedValue:
    """``<f(M(t))>`` by conditioning on the clock count.

    ``f`` is a table ``f(0), f(1), ...``; it must cover every ``m`` with
    non-negligible clock mass.  ``bound`` is ``neglected_mass * max|f|``.
    """
    f = np.asarray(f, dtype=float)
    probs = clock_state_probabilities(clock, t)
    m_max = probs.size - 1
    if f.size <= m_max:
        raise ValueError(f"f must be tabulated up to m = {m_max}")
    neglected = max(0.0, 1.0 - math.fsum(probs))
    value = math.fsum(probs * f[: m_max + 1])
    return TimeChangedValue(value, m_max, neglected, neglected * float(np.max(np.abs(f))))


def ctsrw_propagator(spec: WalkSpec, clock, t: float) -> LatticeDistribution:
    """``P[Y(t) = x] = sum_m P[M(t) = m] P(x, m)``."""
    probs = clock_state_probabilities(clock, t)
    m_max = probs.size - 1
    walk = WalkSpec(spec.model, spec.sigma0, m_max)
    dists = propagators(walk)
    masses = np.zeros(2 * m_max + 1)
    for m, pm in enumerate(probs):
        masses[m_max - m : m_max + m + 1] += pm * dists[m].masses
    total = masses.sum()
    if abs(total - 1.0) > 1e-8:
        raise ArithmeticError(f"time-changed propagator mass {total!r} deviates from 1")
    masses.setflags(write=False)
    return LatticeDistribution(m_max, masses)


def telegraph_expected_position(v0: float, xi0: float, t):
    """``(v0 / (2 xi0)) (1 - exp(-2 xi0 t))``."""
    if not xi0 > 0:
        raise ValueError("xi0 must be positive")
    t = np.asarray(t, dtype=float)
    out = -v0 / (2.0 * xi0) * np.expm1(-2.0 * xi0 * t)
    return float(out) if out.ndim == 0 else out


def fractional_telegraph_expected_position(v0: float, xi0: float, mu: float, t):
    """``v0 t E_{mu,2}(-2 xi0 t^mu)``."""
    if not xi0 > 0:
        raise ValueError("xi0 must be positive")
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must lie in (0, 1]")
    t = np.asarray(t, dtype=float)
    out = v0 * t * np.asarray(mittag_leffler(mu, 2.0, -2.0 * xi0 * t**mu))
    return float(out) if out.ndim == 0 else out


def frozen_variance_prefactor(alpha: float) -> float:
    """``C_alpha = 2/Gamma(2 alpha + 1) - 1/Gamma(alpha + 1)^2``."""
    return 2.0 / math.gamma(2.0 * alpha + 1.0) - 1.0 / math.gamma(alpha + 1.0) ** 2
