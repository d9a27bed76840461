"""Discrete-time aging renewal process ``N_tau(t) = N(t + tau) - N(tau)``.

Double generating functions in ``(w, u)`` are stored as
:class:`~squirrelwalk.series.BivariateSeries` tables whose row ``tau`` is
the ``w**tau`` slice.  The removable singularity at ``u = w`` never appears
because the divided difference ``(psi(u) - psi(w)) / (u - w)`` is expanded
directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .renewal import WaitingTimeModel, state_probabilities
from .series import BivariateSeries, TruncatedSeries, divided_difference

__all__ = [
    "TENSOR_CAP",
    "AgedDistributionTable",
    "forward_recurrence_density",
    "forward_recurrence_deficit",
    "aged_state_probabilities",
    "aged_state_polynomial",
    "conditional_state_probabilities",
    "strong_aging_ratio",
]

#: maximal number of entries of the dense (tau, m, t) tensor
TENSOR_CAP = 256**3


@dataclass(frozen=True)
class AgedDistributionTable:
    """``phi[tau, m, t] = P[N_tau(t) = m]`` together with ``f_E(tau, t)``."""

    f_E: np.ndarray
    phi: np.ndarray

    @property
    def tau_max(self) -> int:
        return self.phi.shape[0] - 1

    @property
    def m_max(self) -> int:
        return self.phi.shape[1] - 1

    @property
    def t_max(self) -> int:
        return self.phi.shape[2] - 1

    def totals(self) -> np.ndarray:
        """``sum_m phi[tau, m, t]``; equals 1 when ``m_max >= t_max``."""
        return self.phi.sum(axis=1)

    def polynomial(self, v: float) -> np.ndarray:
        """``sum_m phi[tau, m, t] v^m``."""
        powers = float(v) ** np.arange(self.m_max + 1)
        return np.einsum("amt,m->at", self.phi, powers)


def _psi_w(model: WaitingTimeModel, tau_max: int) -> TruncatedSeries:
    return model.gf(tau_max)


def _forward_series(model: WaitingTimeModel, tau_max: int, t_max: int) -> BivariateSeries:
    T = tau_max + t_max
    dd = divided_difference(model.gf(T), T, tau_max, t_max)
    return dd.shift_u(1).div_w(1.0 - _psi_w(model, tau_max))


def forward_recurrence_density(model: WaitingTimeModel, tau_max: int, t_max: int) -> np.ndarray:
    """``f_E(tau, t)``: law of the time from ``tau`` to the next renewal.

    Coefficients of ``u (psi(u) - psi(w)) / ((u - w)(1 - psi(w)))`` for
    ``0 <= tau <= tau_max`` and ``0 <= t <= t_max``; ``f_E(tau, 0) = 0``.
    """
    if tau_max < 0 or t_max < 0:
        raise ValueError("tau_max and t_max must be non-negative")
    out = np.array(_forward_series(model, tau_max, t_max).coeffs.real)
    out[:, 0] = 0.0
    np.clip(out, 0.0, None, out=out)
    out.setflags(write=False)
    return out


def forward_recurrence_deficit(f_E: np.ndarray) -> np.ndarray:
    """Per-``tau`` mass beyond the tabulated horizon, ``1 - sum_t f_E(tau, t)``."""
    return 1.0 - f_E.sum(axis=1)


def _check_tensor(tau_max: int, m_max: int, t_max: int) -> None:
    size = (tau_max + 1) * (m_max + 1) * (t_max + 1)
    if size > TENSOR_CAP:
        raise ValueError(
            f"aged tensor of {size} entries exceeds the cap of {TENSOR_CAP}; "
            "reduce tau_max, m_max or t_max"
        )


def aged_state_probabilities(model: WaitingTimeModel, tau_max: int, m_max: int,
                             t_max: int) -> AgedDistributionTable:
    """Dense tensor ``P[N_tau(t) = m]``.

    ``m = 0`` is the survival ``1 - sum_{r<=t} f_E(tau, r)``; ``m >= 1``
    convolves ``f_E(tau, .)`` with the state probabilities ``P[N(.) = m-1]``.
    """
    if min(tau_max, m_max, t_max) < 0:
        raise ValueError("orders must be non-negative")
    _check_tensor(tau_max, m_max, t_max)
    f_E = forward_recurrence_density(model, tau_max, t_max)
    base = state_probabilities(model, t_max).table  # [n, t]
    phi = np.zeros((tau_max + 1, m_max + 1, t_max + 1))
    phi[:, 0, :] = 1.0 - np.cumsum(f_E, axis=1)
    rows = base[: m_max]
    zeros = np.zeros(t_max + 1)
    for tau in range(tau_max + 1):
        # lower-triangular Toeplitz matrix L[t, r] = f_E(tau, t - r)
        L = toeplitz(f_E[tau], zeros)
        phi[tau, 1:, :] = rows @ L.T
    np.clip(phi, 0.0, None, out=phi)
    phi.setflags(write=False)
    return AgedDistributionTable(f_E, phi)


def aged_state_polynomial(model: WaitingTimeModel, v: float, tau_max: int, t_max: int,
                          route: str = "closed") -> np.ndarray:
    """``g_v(tau, t) = <v^{N_tau(t)}>`` for ``|v| <= 1``.

    ``route="closed"`` expands ``1/((1-w)(1-u)) - (1-v) f_E(w,u) / ((1-u)(1 - v psi(u)))``;
    ``route="tensor"`` sums the dense state-probability tensor.
    """
    if abs(v) > 1.0:
        raise ValueError("|v| must not exceed 1")
    if route == "tensor":
        return aged_state_probabilities(model, tau_max, t_max, t_max).polynomial(v)
    if route != "closed":
        raise ValueError("route must be 'closed' or 'tensor'")
    fe = _forward_series(model, tau_max, t_max)
    corr = fe.div_u(1.0 - model.gf(t_max) * v).cumulative_u()
    return 1.0 - (1.0 - v) * np.array(corr.coeffs.real)


def conditional_state_probabilities(model: WaitingTimeModel, tau_max: int,
                                    t_max: int) -> np.ndarray:
    """``out[n, m, tau, t] = P[N_tau(t) = m, N(tau) = n]`` for ``n <= tau_max``, ``m <= t_max``.

    Built from the conditional double generating functions: for ``m >= 1``
    ``psi(w)^n u D(w,u) psi(u)^{m-1} S(u)`` and for ``m = 0``
    ``psi(w)^n [S(w) - u D(w,u)] / (1 - u)``, with ``D`` the divided
    difference and ``S`` the survival series.
    """
    T = tau_max + t_max
    psi_u = model.gf(t_max)
    psi_w = model.gf(tau_max)
    surv_u = TruncatedSeries(model.survival(t_max))
    surv_w = model.survival(tau_max)
    uD = divided_difference(model.gf(T), T, tau_max, t_max).shift_u(1)
    out = np.zeros((tau_max + 1, t_max + 1, tau_max + 1, t_max + 1))
    zero_core = np.zeros(uD.shape)
    zero_core[:, 0] = surv_w
    zero_core = BivariateSeries(zero_core).add(uD, 1.0, -1.0).cumulative_u()
    for n in range(tau_max + 1):
        wn = psi_w**n
        out[n, 0] = zero_core.mul_w(wn).coeffs.real
        cur = uD.mul_w(wn).mul_u(surv_u)
        for m in range(1, t_max + 1):
            out[n, m] = cur.coeffs.real
            cur = cur.mul_u(psi_u)
    return out


def strong_aging_ratio(model_mu: float, f_value: float, tau: int, t: int) -> float:
    """``f_E(tau, t) Gamma(1-mu) Gamma(mu) t^mu / tau^{mu-1}`` (tends to 1 for ``tau >> t >> 1``)."""
    from scipy.special import gamma

    mu = model_mu
    return float(f_value * gamma(1.0 - mu) * gamma(mu) * t**mu / tau ** (mu - 1.0))
