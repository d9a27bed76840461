"""Seeded, reproducible Monte Carlo for the discrete walk and its time-changed version.

Paths are processed in fixed blocks.  Block ``b`` owns the random stream
``PCG64DXSM(SeedSequence(seed, spawn_key=(b,)))``; per-block sums are merged
in block order, so results are bitwise identical for any worker count.

The walk engine draws renewal gaps for all unfinished paths of a block in
lockstep rounds.  A path keeps ``(a, Y, s)``: the first step index ``a`` of
the current run, the position ``Y = X_{a-1}`` before it and the run
direction ``s``.  Starting from ``a = 0`` and ``Y = -sigma0`` makes the
first run (shortened by one because no step is taken at ``t = 0``) look like
every other one, and gives ``X_0 = 0`` for free.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ctsrw import FractionalPoissonClock, PoissonClock
from .renewal import SAMPLE_CAP, WaitingTimeModel
from .srw import LatticeDistribution, WalkSpec

__all__ = [
    "RngPolicy",
    "EnsembleStats",
    "FitResult",
    "simulate_srw",
    "simulate_ctsrw",
    "simulate_positions",
    "step_autocorrelation",
    "mittag_leffler_gaps",
    "path_enumeration_oracle",
    "exponent_fit",
    "fixed_exponent_prefactor",
]

#: largest horizon accepted by the exhaustive oracle
ORACLE_MAX_T = 14


@dataclass(frozen=True)
class RngPolicy:
    """Master seed plus the block size of the counter-based stream split."""

    seed: int
    block_size: int = 4096

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")

    def generator(self, block: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(block,))
        return np.random.Generator(np.random.PCG64DXSM(ss))

    def blocks(self, n_paths: int) -> list[tuple[int, int]]:
        """``(block index, paths in block)`` covering ``n_paths``."""
        full, rest = divmod(n_paths, self.block_size)
        out = [(b, self.block_size) for b in range(full)]
        if rest:
            out.append((full, rest))
        return out


@dataclass
class EnsembleStats:
    """Moment estimates at each checkpoint."""

    checkpoints: np.ndarray
    n_paths: int
    mean: np.ndarray
    msd: np.ndarray
    variance: np.ndarray
    se_mean: np.ndarray
    se_msd: np.ndarray
    histograms: dict = field(default_factory=dict)
    n_capped: int = 0
    no_reversal_fraction: np.ndarray | None = None

    def rows(self):
        return [
            (c, float(m), float(s), float(v), float(a), float(b))
            for c, m, s, v, a, b in zip(self.checkpoints.tolist(), self.mean, self.msd,
                                         self.variance, self.se_mean, self.se_msd)
        ]


class _Accumulator:
    """Power sums of the positions; merged in a fixed order."""

    def __init__(self, k: int):
        self.n = 0
        self.s1 = np.zeros(k)
        self.s2 = np.zeros(k)
        self.s4 = np.zeros(k)
        self.no_rev = np.zeros(k)
        self.capped = 0
        self.hist: dict[int, np.ndarray] = {}

    def add(self, part: dict) -> None:
        self.n += part["n"]
        self.s1 += part["s1"]
        self.s2 += part["s2"]
        self.s4 += part["s4"]
        self.no_rev += part["no_rev"]
        self.capped += part["capped"]
        for j, h in part["hist"].items():
            cur = self.hist.get(j)
            if cur is None or cur.size < h.size:
                cur, h = h.copy(), (cur if cur is not None else np.zeros(0, dtype=np.int64))
            cur[: h.size] += h
            self.hist[j] = cur

    def finish(self, checkpoints: np.ndarray) -> EnsembleStats:
        n = self.n
        mean = self.s1 / n
        m2 = self.s2 / n
        m4 = self.s4 / n
        var = np.maximum(m2 - mean**2, 0.0) * (n / (n - 1) if n > 1 else 1.0)
        se_mean = np.sqrt(var / n)
        se_msd = np.sqrt(np.maximum(m4 - m2**2, 0.0) / max(n - 1, 1))
        return EnsembleStats(checkpoints, n, mean, m2, var, se_mean, se_msd,
                             dict(self.hist), self.capped, self.no_rev / n)


def _summarize(X: np.ndarray, first_gap: np.ndarray, Q: np.ndarray, capped: int,
               histogram_at) -> dict:
    Xf = X.astype(float)
    x2 = Xf * Xf
    hist = {}
    for j in histogram_at:
        col = X[:, j]
        offset = int(Q[:, j].max()) if Q.size else 0
        hist[j] = np.bincount(col + offset, minlength=2 * offset + 1)
    return {
        "n": X.shape[0],
        "s1": Xf.sum(axis=0),
        "s2": x2.sum(axis=0),
        "s4": (x2 * x2).sum(axis=0),
        "no_rev": (first_gap[:, None] > Q).sum(axis=0).astype(float),
        "capped": capped,
        "hist": hist,
    }


def _walk_positions(model: WaitingTimeModel, sigma0: int, Q: np.ndarray,
                    rng: np.random.Generator, cap: int = SAMPLE_CAP):
    """Positions ``X_q`` for per-path non-decreasing query times ``Q[i, :]``.

    Returns ``(X, first_gap, n_capped)``.
    """
    n, k = Q.shape
    X = np.zeros((n, k), dtype=np.int64)
    first_gap = np.zeros(n, dtype=np.int64)
    if n == 0 or k == 0:
        return X, first_gap, 0
    a = np.zeros(n, dtype=np.int64)
    Y = np.full(n, -sigma0, dtype=np.int64)
    s = np.full(n, sigma0, dtype=np.int64)
    ptr = np.zeros(n, dtype=np.int64)
    cols = np.arange(k)
    active = np.arange(n)
    capped = 0
    first = True
    while active.size:
        G = model.sample(rng, active.size, cap)
        capped += int(np.count_nonzero(G >= cap))
        if first:
            first_gap[:] = G
            first = False
        aa = a[active]
        end = aa + G
        Qa = Q[active]
        old = ptr[active]
        new = np.count_nonzero(Qa < end[:, None], axis=1)
        hit = (cols >= old[:, None]) & (cols < new[:, None])
        vals = Y[active][:, None] + s[active][:, None] * (Qa - aa[:, None] + 1)
        X[active] = np.where(hit, vals, X[active])
        Y[active] += s[active] * G
        s[active] = -s[active]
        a[active] = end
        ptr[active] = new
        active = active[new < k]
    return X, first_gap, capped


def _run_blocks(fn, policy: RngPolicy, n_paths: int, workers: int) -> list:
    blocks = policy.blocks(n_paths)
    if workers <= 1 or len(blocks) <= 1:
        return [fn(b, m) for b, m in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bm: fn(*bm), blocks))


def simulate_positions(spec: WalkSpec, n_paths: int, times, rng: RngPolicy,
                       workers: int = 1) -> np.ndarray:
    """Raw positions ``X[path, j]`` at integer ``times`` (non-decreasing)."""
    times = np.asarray(times, dtype=np.int64)
    _check_times(times, spec.t_max)

    def run(block, m):
        Q = np.broadcast_to(times, (m, times.size))
        return _walk_positions(spec.model, spec.sigma0, Q, rng.generator(block))[0]

    parts = _run_blocks(run, rng, n_paths, workers)
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, times.size), np.int64)


def _check_times(times: np.ndarray, t_max: int) -> None:
    if times.ndim != 1:
        raise ValueError("checkpoints must be a 1-D sequence")
    if np.any(np.diff(times) < 0):
        raise ValueError("checkpoints must be non-decreasing")
    if times.size and (times[0] < 0 or times[-1] > t_max):
        raise ValueError("checkpoints must lie in [0, t_max]")


def simulate_srw(spec: WalkSpec, n_paths: int, checkpoints, rng: RngPolicy, workers: int = 1,
                 histogram_at=()) -> EnsembleStats:
    """Ensemble statistics of ``X_t`` at integer checkpoints.

    ``histogram_at`` lists checkpoint values whose full position histogram
    (indexed by ``x + t``) is kept.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    times = np.asarray(checkpoints, dtype=np.int64)
    _check_times(times, spec.t_max)
    hist_cols = [int(np.flatnonzero(times == c)[0]) for c in histogram_at]

    def run(block, m):
        Q = np.broadcast_to(times, (m, times.size))
        X, first, capped = _walk_positions(spec.model, spec.sigma0, Q, rng.generator(block))
        return _summarize(X, first, Q, capped, hist_cols)

    acc = _Accumulator(times.size)
    for part in _run_blocks(run, rng, n_paths, workers):
        acc.add(part)
    stats = acc.finish(times)
    stats.histograms = {int(times[j]): h for j, h in stats.histograms.items()}
    return stats


# ---------------------------------------------------------------------------
# clocks
# ---------------------------------------------------------------------------

def mittag_leffler_gaps(rng: np.random.Generator, alpha: float, xi: float, size) -> np.ndarray:
    """``xi^{-1/alpha} (-ln U) (sin(a pi)/tan(a pi V) - cos(a pi))^{1/alpha}``."""
    u = 1.0 - rng.random(size)
    if alpha == 1.0:
        return -np.log(u) / xi
    v = 1.0 - rng.random(size)
    ap = alpha * np.pi
    core = np.sin(ap) / np.tan(ap * v) - np.cos(ap)
    return xi ** (-1.0 / alpha) * (-np.log(u)) * core ** (1.0 / alpha)


def _clock_gaps(clock, rng: np.random.Generator, size) -> np.ndarray:
    if isinstance(clock, PoissonClock):
        return rng.exponential(1.0 / clock.xi, size)
    if isinstance(clock, FractionalPoissonClock):
        return mittag_leffler_gaps(rng, clock.alpha, clock.xi, size)
    raise TypeError(f"unsupported clock {clock!r}")


def _clock_counts(clock, times: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Number of clock arrivals ``<= t`` for each checkpoint ``t``."""
    counts = np.zeros((m, times.size), dtype=np.int64)
    if times.size == 0:
        return counts
    now = np.zeros(m)
    active = np.arange(m)
    horizon = times[-1]
    while active.size:
        now[active] += _clock_gaps(clock, rng, active.size)
        counts[active] += now[active][:, None] <= times
        active = active[now[active] <= horizon]
    return counts


def simulate_ctsrw(spec: WalkSpec, clock, n_paths: int, times, rng: RngPolicy,
                   workers: int = 1, frozen: bool = False) -> EnsembleStats:
    """Statistics of ``Y(t) = X_{M(t)}`` with ``M`` the clock's counting process.

    ``frozen=True`` disables reversals, so ``Y(t) = sigma0 M(t)``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be non-negative and non-decreasing")

    def run(block, m):
        g = rng.generator(block)
        M = _clock_counts(clock, times, m, g)
        if frozen:
            X = spec.sigma0 * M
            first = np.full(m, np.iinfo(np.int64).max)
            capped = 0
        else:
            X, first, capped = _walk_positions(spec.model, spec.sigma0, M, g)
        return _summarize(X, first, M, capped, ())

    acc = _Accumulator(times.size)
    for part in _run_blocks(run, rng, n_paths, workers):
        acc.add(part)
    return acc.finish(times)


def step_autocorrelation(model: WaitingTimeModel, tau: int, ts, n_paths: int, rng: RngPolicy,
                         workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo ``<sigma_{t+tau} sigma_tau>`` with standard errors, ``tau, t >= 1``."""
    ts = np.asarray(ts, dtype=np.int64)
    if tau < 1 or np.any(ts < 1):
        raise ValueError("tau and t must be at least 1")
    ts = np.sort(ts)
    times = np.concatenate(([tau - 1, tau], np.ravel(np.column_stack((tau + ts - 1, tau + ts)))))
    order = np.argsort(times, kind="stable")
    spec = WalkSpec(model, 1, int(times.max()))
    X = simulate_positions(spec, n_paths, times[order], rng, workers)
    Xs = np.empty_like(X)
    Xs[:, order] = X
    step_tau = Xs[:, 1] - Xs[:, 0]
    later = Xs[:, 3::2] - Xs[:, 2::2]
    prod = (step_tau[:, None] * later).astype(float)
    mean = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / np.sqrt(n_paths)
    return mean, se


# ---------------------------------------------------------------------------
# exact enumeration and fits
# ---------------------------------------------------------------------------

def path_enumeration_oracle(spec: WalkSpec, t: int) -> tuple[LatticeDistribution, float, float]:
    """Exact ``P(x, t)``, ``<X_t>`` and ``<X_t^2>`` over all ``2^t`` event patterns.

    A pattern with events at ``r_1 < ... < r_n <= t`` has weight
    ``prod_i psi(r_i - r_{i-1}) * S(t - r_n)`` with ``r_0 = 0``.
    """
    if not 0 <= t <= ORACLE_MAX_T:
        raise ValueError(f"enumeration supports 0 <= t <= {ORACLE_MAX_T}")
    psi = np.asarray(spec.model.pdf(max(t, 1)))
    surv = np.asarray(spec.model.survival(max(t, 1)))
    patterns = np.arange(2**t, dtype=np.int64)
    bits = ((patterns[:, None] >> np.arange(t)) & 1).astype(bool)  # bit r-1: event at r
    weight = np.ones(patterns.size)
    last = np.zeros(patterns.size, dtype=np.int64)
    count = np.zeros(patterns.size, dtype=np.int64)
    x = np.zeros(patterns.size, dtype=np.int64)
    for r in range(1, t + 1):
        ev = bits[:, r - 1]
        weight = np.where(ev, weight * psi[r - last], weight)
        last = np.where(ev, r, last)
        count += ev
        x += np.where(count % 2 == 0, 1, -1)
    weight = weight * surv[t - last]
    x *= spec.sigma0
    masses = np.bincount(x + t, weights=weight, minlength=2 * t + 1)
    masses.setflags(write=False)
    dist = LatticeDistribution(t, masses)
    xf = x.astype(float)
    return dist, float(np.dot(weight, xf)), float(np.dot(weight, xf * xf))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.intercept))


def _window(t, values, window):
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        lo, hi = window
        sel = (t >= lo) & (t <= hi)
        t, v = t[sel], v[sel]
    if t.size < 2:
        raise ValueError("need at least two points in the window")
    if np.any(v <= 0) or np.any(t <= 0):
        raise ValueError("values and times must be positive in the window")
    return np.log(t), np.log(v)


def exponent_fit(t, values, window=None) -> FitResult:
    """Least-squares line through ``(log t, log value)``."""
    x, y = _window(t, values, window)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return FitResult(float(slope), float(intercept), float(r2))


def fixed_exponent_prefactor(t, values, exponent: float, window=None) -> float:
    """Least-squares prefactor ``c`` of ``c t^exponent`` in log space."""
    x, y = _window(t, values, window)
    return float(np.exp(np.mean(y - exponent * x)))
