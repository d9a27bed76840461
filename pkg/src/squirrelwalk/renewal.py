"""Discrete waiting-time models and the counting process they generate.

A waiting-time model is a PDF ``psi_t`` on ``t = 1, 2, ...`` (``psi_0 = 0``).
Each model exposes its tabulated PDF, survival function ``S_t``, generating
function as a :class:`~squirrelwalk.series.TruncatedSeries` and a vectorized
sampler.  Models are frozen dataclasses, hence hashable and shareable across
threads; tables are cached per ``(model, T)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gamma

from .series import TruncatedSeries, div, frac_power_one_minus_u, mul

__all__ = [
    "SAMPLE_CAP",
    "WaitingTimeModel",
    "Geometric",
    "Sibuya",
    "FractionalBernoulli",
    "BroadPowerTail",
    "Custom",
    "StateProbabilityTable",
    "pdf_table",
    "survival_table",
    "gf_series",
    "state_probabilities",
    "state_polynomial_at_minus_one",
    "sample_waiting_time",
    "broad_tail_constants",
    "parse_model",
]

#: draws at or beyond this value are reported as the cap
SAMPLE_CAP = 10**7


class WaitingTimeModel:
    """Base class; subclasses implement ``_pdf`` and ``_sample``."""

    kind = "abstract"

    def pdf(self, T: int) -> np.ndarray:
        """``psi_0 .. psi_T`` (read-only, ``psi_0 = 0``)."""
        return _cached_pdf(self, int(T))

    def survival(self, T: int) -> np.ndarray:
        """``S_0 .. S_T`` with ``S_t = 1 - sum_{k<=t} psi_k``."""
        return _cached_survival(self, int(T))

    def gf(self, T: int) -> TruncatedSeries:
        return TruncatedSeries(self.pdf(T))

    def sample(self, rng: np.random.Generator, size, cap: int = SAMPLE_CAP) -> np.ndarray:
        """Independent draws as ``int64``; values ``>= cap`` are returned as ``cap``."""
        out = self._sample(rng, size, cap)
        return np.minimum(out, cap).astype(np.int64)

    def hazard(self, T: int) -> np.ndarray:
        """``h_t = psi_t / S_{t-1}`` for ``t = 0..T`` (``h_0 = 0``)."""
        psi = self.pdf(T)
        s = self.survival(T)
        h = np.zeros(T + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            h[1:] = np.where(s[:-1] > 0, psi[1:] / s[:-1], 1.0)
        return np.clip(h, 0.0, 1.0)

    def label(self) -> str:
        raise NotImplementedError

    def _pdf(self, T: int) -> np.ndarray:
        raise NotImplementedError

    def _sample(self, rng, size, cap):
        raise NotImplementedError

    def _survival(self, T: int) -> np.ndarray:
        return 1.0 - np.cumsum(self.pdf(T))


@functools.lru_cache(maxsize=256)
def _cached_pdf(model: WaitingTimeModel, T: int) -> np.ndarray:
    if T < 0:
        raise ValueError("T must be non-negative")
    psi = np.asarray(model._pdf(T), dtype=float)
    psi[0] = 0.0
    psi.setflags(write=False)
    return psi


@functools.lru_cache(maxsize=256)
def _cached_survival(model: WaitingTimeModel, T: int) -> np.ndarray:
    s = np.clip(np.asarray(model._survival(T), dtype=float), 0.0, 1.0)
    s[0] = 1.0
    s.setflags(write=False)
    return s


def _geometric_draws(rng: np.random.Generator, p, size, cap: int) -> np.ndarray:
    """Inversion ``ceil(log U / log(1-p))``, robust for tiny ``p``."""
    u = 1.0 - rng.random(size)  # (0, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.ceil(np.log(u) / np.log1p(-np.asarray(p, dtype=float)))
    x = np.where(np.isnan(x), cap, x)
    x = np.clip(x, 1, cap)
    return x.astype(np.int64)


@dataclass(frozen=True)
class Geometric(WaitingTimeModel):
    """``psi_t = p q^{t-1}``: the Bernoulli reversal model."""

    p: float
    kind = "geometric"

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("Geometric requires p in (0, 1]")

    def _pdf(self, T):
        t = np.arange(T + 1)
        psi = np.zeros(T + 1)
        if T >= 1:
            psi[1:] = self.p * (1.0 - self.p) ** (t[1:] - 1)
        return psi

    def _survival(self, T):
        return (1.0 - self.p) ** np.arange(T + 1, dtype=float)

    def _sample(self, rng, size, cap):
        if self.p == 1.0:
            return np.ones(size, dtype=np.int64)
        return _geometric_draws(rng, self.p, size, cap)

    def label(self):
        return f"geometric:p={self.p!r}"


@dataclass(frozen=True)
class Sibuya(WaitingTimeModel):
    """Sibuya PDF with generating function ``1 - (1-u)^mu``.

    ``method`` selects the sampler: ``"mixture"`` draws a geometric variable
    whose success probability is Beta(mu, 1-mu) distributed (exact, O(1) per
    draw); ``"hazard"`` runs the sequential chain with event probability
    ``mu/t`` at step ``t`` (exact, cost proportional to the draw).
    """

    mu: float
    method: str = field(default="mixture", compare=False)
    kind = "sibuya"

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError("Sibuya requires mu in (0, 1)")
        if self.method not in ("mixture", "hazard"):
            raise ValueError("method must be 'mixture' or 'hazard'")

    def _pdf(self, T):
        k = np.arange(1, T + 1, dtype=float)
        s = np.concatenate(([1.0], np.cumprod(1.0 - self.mu / k)))
        psi = np.zeros(T + 1)
        psi[1:] = s[:-1] * self.mu / k
        return psi

    def _survival(self, T):
        k = np.arange(1, T + 1, dtype=float)
        return np.concatenate(([1.0], np.cumprod(1.0 - self.mu / k)))

    def _sample(self, rng, size, cap):
        if self.method == "hazard":
            return _sibuya_hazard(rng, self.mu, size, cap)
        p = rng.beta(self.mu, 1.0 - self.mu, size)
        return _geometric_draws(rng, p, np.shape(p), cap)

    def label(self):
        return f"sibuya:mu={self.mu!r}"


def _sibuya_hazard(rng, mu, size, cap):
    n = int(np.prod(size))
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        start, chunk = 1, 64
        value = cap
        while start < cap:
            stop = min(start + chunk, cap)
            steps = np.arange(start, stop, dtype=float)
            hit = np.flatnonzero(rng.random(steps.size) < mu / steps)
            if hit.size:
                value = start + int(hit[0])
                break
            start, chunk = stop, chunk * 2
        out[i] = value
    return out.reshape(size)


@dataclass(frozen=True)
class FractionalBernoulli(WaitingTimeModel):
    """Generating function ``u / (lam (1-u)^mu + 1)``; ``mu = 1`` is Geometric(1/(1+lam)).

    Sampling uses the exact compound representation
    ``1 + sum_{i=1}^N Sibuya_i`` with ``P(N=n) = (1-a) a^n``, ``a = lam/(1+lam)``.
    """

    mu: float
    lam: float
    kind = "fracbernoulli"

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("FractionalBernoulli requires mu in (0, 1]")
        if not self.lam > 0.0:
            raise ValueError("FractionalBernoulli requires lambda > 0")

    def gf(self, T):
        num = TruncatedSeries.monomial(1, T)
        den = frac_power_one_minus_u(self.mu, T) * self.lam + 1.0
        return div(num, den)

    def _pdf(self, T):
        return np.array(self.gf(T).coeffs)

    def _survival(self, T):
        # (1 - psi)/(1 - u) = (lam (1-u)^(mu-1) + 1) / (lam (1-u)^mu + 1)
        num = frac_power_one_minus_u(self.mu - 1.0, T) * self.lam + 1.0
        den = frac_power_one_minus_u(self.mu, T) * self.lam + 1.0
        return np.array(div(num, den).coeffs)

    def _sample(self, rng, size, cap):
        n = _geometric_draws(rng, 1.0 / (1.0 + self.lam), size, cap) - 1
        if self.mu == 1.0:
            return 1 + n
        flat = n.ravel()
        total = int(flat.sum())
        inner = Sibuya(self.mu).sample(rng, total, cap).astype(float)
        owner = np.repeat(np.arange(flat.size), flat)
        sums = np.bincount(owner, weights=inner, minlength=flat.size)
        return (1 + np.minimum(sums, cap)).astype(np.int64).reshape(n.shape)

    def label(self):
        return f"fracbernoulli:mu={self.mu!r},lambda={self.lam!r}"


@dataclass(frozen=True)
class BroadPowerTail(WaitingTimeModel):
    """``psi_t = C t^{-lam-1}`` on ``1 <= t <= support``, ``1 < lam < 2``."""

    lam: float
    support: int = 10**6
    kind = "broad"

    def __post_init__(self):
        if not 1.0 < self.lam < 2.0:
            raise ValueError("BroadPowerTail requires lambda in (1, 2)")
        if self.support < 1:
            raise ValueError("support must be positive")

    @functools.cached_property
    def _weights(self) -> np.ndarray:
        t = np.arange(1, self.support + 1, dtype=float)
        w = t ** (-self.lam - 1.0)
        return w / w[::-1].sum()

    @property
    def normalization(self) -> float:
        t = np.arange(1, self.support + 1, dtype=float)
        return 1.0 / (t ** (-self.lam - 1.0))[::-1].sum()

    def _pdf(self, T):
        psi = np.zeros(T + 1)
        m = min(T, self.support)
        psi[1 : m + 1] = self._weights[:m]
        return psi

    @functools.cached_property
    def _tail(self) -> np.ndarray:
        # _tail[k] = sum of weights beyond the first k entries
        return np.concatenate((np.cumsum(self._weights[::-1])[::-1], [0.0]))

    def _survival(self, T):
        s = np.zeros(T + 1)
        m = min(T, self.support)
        s[: m + 1] = self._tail[: m + 1]
        s[0] = 1.0
        return s

    @functools.cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(self._weights)

    def _sample(self, rng, size, cap):
        cdf = self._cdf
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return np.minimum(idx, self.support - 1) + 1

    def label(self):
        return f"broad:lambda={self.lam!r},support={self.support}"


@dataclass(frozen=True)
class Custom(WaitingTimeModel):
    """Tabulated ``psi_1 .. psi_n``; missing mass ``1 - sum psi`` never arrives."""

    table: tuple
    kind = "custom"

    def __post_init__(self):
        tab = tuple(float(x) for x in self.table)
        object.__setattr__(self, "table", tab)
        arr = np.asarray(tab)
        if arr.size == 0:
            raise ValueError("Custom table must not be empty")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("Custom table must be finite and non-negative")
        if arr.sum() > 1.0 + 1e-12:
            raise ValueError("Custom table sums to more than 1")

    @property
    def deficit(self) -> float:
        return max(0.0, 1.0 - math.fsum(self.table))

    @classmethod
    def from_file(cls, path) -> "Custom":
        """Read ``t<TAB>psi_t`` lines, ``t`` strictly increasing from 1."""
        values = {}
        last = 0
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 't<TAB>psi_t'")
            t, p = int(parts[0]), float(parts[1])
            if t <= last:
                raise ValueError(f"{path}:{lineno}: t must be strictly increasing from 1")
            values[t] = p
            last = t
        if not values:
            raise ValueError(f"{path}: no entries")
        tab = np.zeros(last)
        for t, p in values.items():
            tab[t - 1] = p
        return cls(tuple(tab))

    def _pdf(self, T):
        psi = np.zeros(T + 1)
        m = min(T, len(self.table))
        psi[1 : m + 1] = self.table[:m]
        return psi

    def _survival(self, T):
        tab = np.asarray(self.table)
        tail = np.concatenate((np.cumsum(tab[::-1])[::-1], [0.0])) + self.deficit
        s = np.full(T + 1, self.deficit)
        m = min(T, tab.size)
        s[: m + 1] = tail[: m + 1]
        s[0] = 1.0
        return s

    def _sample(self, rng, size, cap):
        cdf = np.cumsum(self.table)
        u = rng.random(size)
        idx = np.searchsorted(cdf, u, side="right") + 1
        return np.where(u >= cdf[-1], cap, idx)

    def label(self):
        return "custom:" + ",".join(repr(x) for x in self.table)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def pdf_table(model: WaitingTimeModel, T: int) -> np.ndarray:
    """``psi_1 .. psi_T``."""
    return model.pdf(T)[1:]


def survival_table(model: WaitingTimeModel, T: int) -> np.ndarray:
    """``S_0 .. S_T``."""
    return model.survival(T)


def gf_series(model: WaitingTimeModel, T: int) -> TruncatedSeries:
    """Series ``0, psi_1, ..., psi_T``."""
    return model.gf(T)


def survival_series(model: WaitingTimeModel, T: int) -> TruncatedSeries:
    """``(1 - psi(u)) / (1 - u)``, coefficients ``S_t``."""
    return TruncatedSeries(model.survival(T))


@dataclass(frozen=True)
class StateProbabilityTable:
    """``table[n, t] = P[N(t) = n]`` for ``0 <= n, t <= t_max``."""

    t_max: int
    table: np.ndarray

    def totals(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def __getitem__(self, nt):
        return self.table[nt]


def state_probabilities(model: WaitingTimeModel, t_max: int) -> StateProbabilityTable:
    """Coefficients of ``S(u) psi(u)^n`` for ``n = 0..t_max``."""
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    psi = model.gf(t_max)
    cur = survival_series(model, t_max)
    table = np.zeros((t_max + 1, t_max + 1))
    for n in range(t_max + 1):
        table[n] = cur.coeffs
        cur = mul(cur, psi)
    # psi_0 = 0 makes entries with n > t vanish identically
    table = np.triu(table)
    table.setflags(write=False)
    return StateProbabilityTable(t_max, table)


def state_polynomial_at_minus_one(model: WaitingTimeModel, t_max: int) -> np.ndarray:
    """``sum_n (-1)^n P[N(t)=n]`` from ``(1-psi)/((1-u)(1+psi))``."""
    psi = model.gf(t_max)
    return div(survival_series(model, t_max), 1.0 + psi).coeffs.real.copy()


def sample_waiting_time(model: WaitingTimeModel, rng: np.random.Generator, cap: int = SAMPLE_CAP) -> int:
    """Single draw from ``model``."""
    return int(model.sample(rng, 1, cap)[0])


def broad_tail_constants(model: WaitingTimeModel, s_min: float = 1e-3, s_max: float = 3e-2,
                         n_points: int = 24) -> tuple[float, float]:
    """Fit ``psi(1-s) = 1 - A s + B s^lam + D s^2`` near ``s = 0`` for a broad model.

    Returns ``(A, B)``.  ``A`` is the mean waiting time over the support and
    ``B`` comes from a least-squares fit on a log-spaced grid of ``s``; the
    ``s^2`` term absorbs the next analytic order.  For an exact power tail
    ``C t^{-lam-1}`` the limit is ``B = C Gamma(-lam)``.
    """
    if not isinstance(model, BroadPowerTail):
        raise TypeError("tail constants are defined for BroadPowerTail")
    t = np.arange(1, model.support + 1, dtype=float)
    w = model._weights
    A = float(np.dot(t, w))
    s = np.geomspace(s_min, s_max, n_points)
    # psi(1-s) - 1 + A s = sum_t w_t [(1-s)^t - 1 + t s]
    resid = np.array([np.dot(w, np.expm1(t * np.log1p(-x)) + t * x) for x in s])
    basis = np.stack([s**model.lam, s**2], axis=1)
    B = float(np.linalg.lstsq(basis, resid, rcond=None)[0][0])
    return A, B


def parse_model(text: str) -> WaitingTimeModel:
    """Build a model from ``kind:key=value,...``.

    Examples: ``geometric:p=0.3``, ``sibuya:mu=0.5``,
    ``fracbernoulli:mu=0.7,lambda=1.5``, ``broad:lambda=1.5,support=1000000``,
    ``custom:path=table.tsv`` or ``custom:0.2,0.5,0.3``.
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "custom":
        if rest.startswith("path="):
            return Custom.from_file(rest[5:])
        return Custom(tuple(float(x) for x in rest.split(",") if x))
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        params[key.strip().lower()] = float(value)
    try:
        if kind == "geometric":
            return Geometric(params["p"])
        if kind == "sibuya":
            return Sibuya(params["mu"])
        if kind == "fracbernoulli":
            return FractionalBernoulli(params["mu"], params["lambda"])
        if kind == "broad":
            return BroadPowerTail(params["lambda"], int(params.get("support", 10**6)))
    except KeyError as exc:
        raise ValueError(f"missing parameter {exc} for model '{kind}'") from None
    raise ValueError(f"unknown model kind '{kind}'")


def sibuya_tail_constant(mu: float) -> float:
    """Limit of ``psi_t t^{mu+1}`` for the Sibuya PDF."""
    return mu / gamma(1.0 - mu)
