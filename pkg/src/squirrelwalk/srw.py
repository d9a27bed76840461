"""Exact generating-function analytics of the squirrel random walk.

The walk starts at ``X_0 = 0`` and moves one unit per step; the direction is
``sigma0`` until the first renewal event and flips at every event, so
``X_t = sigma0 * sum_{r=1}^t (-1)^{N(r)}``.  Moments and the full propagator
are obtained as coefficients of rational functions of the waiting-time
generating function ``psi(u)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .renewal import Geometric, WaitingTimeModel, survival_series
from .series import TruncatedSeries, cauchy_product, derivative, div, mul, series_quotient
from .specfun import PrabhakarParams, prabhakar_kernel

__all__ = [
    "WalkSpec",
    "LatticeDistribution",
    "MomentTrack",
    "expected_position",
    "msd_via_k",
    "moments",
    "bernoulli_closed_forms",
    "sibuya_closed_forms",
    "segmented_gf",
    "propagator",
    "propagators",
    "occupation_time_propagator",
    "consistency_identity",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WalkSpec:
    """Waiting-time model, initial direction ``sigma0`` and horizon."""

    model: WaitingTimeModel
    sigma0: int = 1
    t_max: int = 100

    def __post_init__(self):
        if self.sigma0 not in (-1, 1):
            raise ValueError("sigma0 must be +1 or -1")
        if self.t_max < 0:
            raise ValueError("t_max must be non-negative")


@dataclass(frozen=True)
class LatticeDistribution:
    """``P(x)`` on sites ``x = -t..t`` at time ``t``."""

    t: int
    masses: np.ndarray
    imag_residue: float = 0.0
    min_mass: float = 0.0

    @property
    def x(self) -> np.ndarray:
        return np.arange(-self.t, self.t + 1)

    def __getitem__(self, x: int) -> float:
        if abs(x) > self.t:
            return 0.0
        return float(self.masses[x + self.t])

    def total(self) -> float:
        return float(self.masses.sum())

    def moment(self, k: int) -> float:
        return float(np.dot(self.x.astype(float) ** k, self.masses))

    def mean(self) -> float:
        return self.moment(1)

    def second_moment(self) -> float:
        return self.moment(2)

    def rows(self):
        return [(int(x), float(m)) for x, m in zip(self.x, self.masses)]


@dataclass(frozen=True)
class MomentTrack:
    """``<X_t>``, ``<X_t^2>`` and the variance for ``t = 0..t_max``."""

    mean: np.ndarray
    msd: np.ndarray
    variance: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.variance is None:
            object.__setattr__(self, "variance", self.msd - self.mean**2)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.mean.size)

    def rows(self):
        return [(int(t), float(m), float(s), float(v))
                for t, m, s, v in zip(self.t, self.mean, self.msd, self.variance)]


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def expected_position(spec: WalkSpec) -> np.ndarray:
    """``<X_t>`` from ``sigma0 (1-psi) / ((1-u)^2 (1+psi)) - sigma0 / (1-u)``."""
    T = spec.t_max
    psi = spec.model.gf(T)
    ratio = div(survival_series(spec.model, T), 1.0 + psi)
    x = spec.sigma0 * (ratio.cumulative().coeffs - 1.0)
    x[0] = 0.0
    return x


def msd_via_k(spec: WalkSpec) -> np.ndarray:
    """``<X_t^2> = 2 K(t) - t`` with

    ``K(u) = 1/(1-u)^3 - [2 u psi'(u) + (1-psi)^2] / ((1-u)^2 (1-psi^2))``.

    Substituting ``1 - psi = (1-u) S`` with the survival series ``S`` cancels
    the pole at ``u = 1`` analytically::

        K(u) = [S (2 - (2-u) S) + 2 u S'] / ((1-u)^2 S (1+psi))

    which keeps the coefficient extraction free of large cancellations.
    """
    T = spec.t_max
    if T == 0:
        return np.zeros(1)
    psi = spec.model.gf(T)
    surv = survival_series(spec.model, T)
    u = TruncatedSeries.monomial(1, T)
    d_surv = TruncatedSeries(np.concatenate((derivative(surv).coeffs, [0.0])))
    num = mul(surv, 2.0 - mul(2.0 - u, surv)) + mul(u, d_surv) * 2.0
    e = div(num, mul(surv, 1.0 + psi)).coeffs
    # K = e/(1-u)^2, i.e. K_t = (t+1) sum_k e_k - sum_k k e_k; avoids the
    # rounding drift of two sequential prefix sums
    t = np.arange(T + 1, dtype=float)
    K = (t + 1.0) * np.cumsum(e) - np.cumsum(t * e)
    K[0] = 0.0
    return 2.0 * K - t


def moments(spec: WalkSpec) -> MomentTrack:
    """Mean, MSD and variance from the generating-function pipelines."""
    return MomentTrack(expected_position(spec), msd_via_k(spec))


def bernoulli_closed_forms(p: float, sigma0: int, t_max: int) -> MomentTrack:
    """Closed forms for geometric waiting times with reversal probability ``p``."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if sigma0 not in (-1, 1):
        raise ValueError("sigma0 must be +1 or -1")
    t = np.arange(t_max + 1, dtype=float)
    eps = 1.0 - 2.0 * p
    if abs(eps) < 1e-8:
        # first order in eps: (1 - eps^t) -> 1 for t >= 1
        mean = sigma0 * eps / (2.0 * p) * (t > 0)
    elif eps > 0:
        mean = sigma0 * eps / (2.0 * p) * -np.expm1(t * np.log(eps))
    else:
        mean = sigma0 * eps / (2.0 * p) * (1.0 - eps**t)
    msd = (1.0 - p) / p * t - sigma0 / p * mean
    variance = (1.0 - p) / p * t - sigma0 / p * mean - mean**2
    if p == 1.0:
        msd = (1.0 - (-1.0) ** t) / 2.0
        variance = np.zeros_like(t)
    return MomentTrack(mean, msd, variance)


def sibuya_closed_forms(mu: float, sigma0: int, t_max: int) -> MomentTrack:
    """Exact Sibuya moments through discrete Prabhakar kernels at ``lam = 2``."""
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    if sigma0 not in (-1, 1):
        raise ValueError("sigma0 must be +1 or -1")
    t = np.arange(t_max + 1, dtype=float)
    p3 = prabhakar_kernel(PrabhakarParams(mu, mu + 3.0, 2.0), t_max)
    p2 = prabhakar_kernel(PrabhakarParams(mu, mu + 2.0, 2.0), t_max)
    pc = prabhakar_kernel(PrabhakarParams(mu, 2.0, 2.0), t_max)
    msd = (t + 1.0) ** 2 + 1.0 + 4.0 * mu * p3 - 4.0 * mu * p2 + 2.0 * pc
    mean = -sigma0 * (pc + 1.0)
    variance = (t + 1.0) ** 2 + 4.0 * mu * p3 - 4.0 * mu * p2 - pc**2
    return MomentTrack(mean, msd, variance)


# ---------------------------------------------------------------------------
# propagator
# ---------------------------------------------------------------------------

def _segmented_coeffs(psi: np.ndarray, surv: np.ndarray, z1, z2) -> np.ndarray:
    """Coefficients of ``g(u, z1, z2)`` for arrays of ``z1``, ``z2`` (batch)."""
    z1 = np.atleast_1d(np.asarray(z1, dtype=complex))
    z2 = np.atleast_1d(np.asarray(z2, dtype=complex))
    k = np.arange(psi.size)
    p1 = z1[:, None] ** k * psi
    p2 = z2[:, None] ** k * psi
    s1 = z1[:, None] ** k * surv
    s2 = z2[:, None] ** k * surv
    num = s1 + (z2 / z1)[:, None] * cauchy_product(s2, p1)
    den = -cauchy_product(p1, p2)
    den[:, 0] += 1.0
    return series_quotient(num, den)


def segmented_gf(spec: WalkSpec, zeta1, zeta2, T: int) -> TruncatedSeries:
    """``g(u, zeta1, zeta2)``, the generating function of ``<zeta1^{n+} zeta2^{n-}>``.

    ``n+`` counts the steps taken in the initial direction beyond the first
    one and ``n-`` the steps against it.
    """
    if abs(zeta1) > 1.0 + 1e-12 or abs(zeta2) > 1.0 + 1e-12:
        raise ValueError("|zeta| must not exceed 1")
    return TruncatedSeries(_segmented_raw(spec.model, zeta1, zeta2, T))


def _segmented_raw(model: WaitingTimeModel, zeta1, zeta2, T: int) -> np.ndarray:
    psi = model.pdf(T)
    surv = model.survival(T)
    return _segmented_coeffs(psi, surv, zeta1, zeta2)[0]


def _invert(t: int, phi: np.ndarray, kappa: np.ndarray, sign: int = 1) -> LatticeDistribution:
    """Inverse discrete Fourier sum over the odd grid of ``2t+1`` points."""
    n = kappa.size
    x = np.arange(-t, t + 1)
    kernel = np.exp(sign * 1j * np.outer(x, kappa))
    raw = kernel @ phi / n
    residue = float(np.max(np.abs(raw.imag))) if raw.size else 0.0
    masses = raw.real
    total = masses.sum()
    if abs(total - 1.0) > 1e-10:
        raise ArithmeticError(f"propagator mass {total!r} deviates from 1")
    if residue > 1e-10:
        raise ArithmeticError(f"imaginary residue {residue:.3g} exceeds 1e-10")
    low = float(masses.min())
    if low < 0:
        if low < -1e-12:
            raise ArithmeticError(f"negative mass {low:.3g} beyond rounding level")
        log.debug("clipping masses down to %.3g at t=%d", low, t)
    masses = np.clip(masses, 0.0, None)
    masses.setflags(write=False)
    return LatticeDistribution(t, masses, residue, low)


def _grid(t: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(2 * t + 1) / (2 * t + 1)


def propagator(spec: WalkSpec, t: int) -> LatticeDistribution:
    """``P(x, t)`` by exact Fourier inversion of ``g(u, e^{-i k s0}, e^{i k s0})``."""
    if not 0 <= t <= spec.t_max:
        raise ValueError("t must lie in [0, t_max]")
    kappa = _grid(t)
    z = np.exp(-1j * kappa * spec.sigma0)
    coeffs = _segmented_coeffs(spec.model.pdf(t), spec.model.survival(t), z, np.conj(z))
    return _enforce_parity(_invert(t, coeffs[:, t], kappa))


def _enforce_parity(dist: LatticeDistribution) -> LatticeDistribution:
    """Sites with ``x + t`` odd are unreachable; drop their rounding noise."""
    masses = dist.masses.copy()
    masses[1::2] = 0.0
    masses.setflags(write=False)
    return LatticeDistribution(dist.t, masses, dist.imag_residue, dist.min_mass)


def propagators(spec: WalkSpec) -> list[LatticeDistribution]:
    """All propagators ``t = 0..t_max`` from one shared grid of ``2 t_max + 1`` points."""
    T = spec.t_max
    kappa = _grid(T)
    z = np.exp(-1j * kappa * spec.sigma0)
    coeffs = _segmented_coeffs(spec.model.pdf(T), spec.model.survival(T), z, np.conj(z))
    n = kappa.size
    x = np.arange(-T, T + 1)
    kernel = np.exp(1j * np.outer(x, kappa))
    full = (kernel @ coeffs) / n  # (sites, t)
    out = []
    for t in range(T + 1):
        raw = full[T - t : T + t + 1, t]
        residue = float(np.max(np.abs(raw.imag)))
        masses = raw.real
        if abs(masses.sum() - 1.0) > 1e-10 or residue > 1e-10:
            raise ArithmeticError(f"inversion failed at t={t}")
        low = float(masses.min())
        masses = np.clip(masses, 0.0, None)
        masses[1::2] = 0.0  # x + t odd is unreachable
        masses.setflags(write=False)
        out.append(LatticeDistribution(t, masses, residue, low))
    return out


def occupation_time_propagator(spec: WalkSpec, t: int, which: str) -> LatticeDistribution:
    """Law of the occupation coordinate ``X+`` or ``X-``.

    ``X+`` sums the displacement made in the initial direction (excluding
    the first step's unit offset) and ``X-`` the displacement made against
    it, so ``X_t = X+ - X-`` and ``sigma0 (X+ + X-) = t``.
    """
    if not 0 <= t <= spec.t_max:
        raise ValueError("t must lie in [0, t_max]")
    kappa = _grid(t)
    z = np.exp(-1j * kappa * spec.sigma0)
    ones = np.ones_like(z)
    model = spec.model
    if which == "plus":
        coeffs = _segmented_coeffs(model.pdf(t), model.survival(t), z, ones)
        return _invert(t, coeffs[:, t], kappa)
    if which == "minus":
        # zeta2 = e^{i kappa sigma0} yields <e^{+i kappa X-}>
        coeffs = _segmented_coeffs(model.pdf(t), model.survival(t), ones, np.conj(z))
        return _invert(t, coeffs[:, t], kappa, sign=-1)
    raise ValueError("which must be 'plus' or 'minus'")


def consistency_identity(spec: WalkSpec, T: int, h: float = 1e-5) -> float:
    """Max deviation between ``(d/dz1 - d/dz2)[z1 g]`` at ``z = 1`` and ``P(-1,u)/(1-u)``.

    Derivatives are fourth-order central differences with step ``h`` along
    the real axis.
    """
    model = spec.model
    psi = model.pdf(T)
    surv = model.survival(T)

    def f(z1, z2):
        return (z1 * _segmented_coeffs(psi, surv, z1, z2)[0]).real

    stencil = ((-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0))
    d1 = sum(w * f(1.0 + s * h, 1.0) for s, w in stencil) / (12.0 * h)
    d2 = sum(w * f(1.0, 1.0 + s * h) for s, w in stencil) / (12.0 * h)
    lhs = d1 - d2
    rhs = div(survival_series(model, T), 1.0 + model.gf(T)).cumulative().coeffs.real
    return float(np.max(np.abs(lhs - rhs)))


def symmetrized(track_plus: MomentTrack) -> MomentTrack:
    """Even mixture of the two initial directions: mean 0, same MSD."""
    mean = np.zeros_like(track_plus.mean)
    return MomentTrack(mean, track_plus.msd, track_plus.msd.copy())


def symmetrized_propagator(dist: LatticeDistribution) -> LatticeDistribution:
    masses = 0.5 * (dist.masses + dist.masses[::-1])
    masses.setflags(write=False)
    return LatticeDistribution(dist.t, masses, dist.imag_residue, dist.min_mass)


def is_geometric(model: WaitingTimeModel) -> bool:
    return isinstance(model, Geometric)
