"""Truncated formal power series in one and two variables.

Every generating function in the package is carried by a
:class:`TruncatedSeries` (coefficients ``c_0 .. c_T`` of a series in ``u``)
or, for double generating functions in ``(w, u)``, by a
:class:`BivariateSeries`.  Both are immutable: operations return new objects.

Products are direct Cauchy convolutions and quotients use forward
substitution, so every coefficient up to the truncation order is exact up to
floating-point rounding.
"""

from __future__ import annotations

from numbers import Number

import numpy as np

__all__ = [
    "TruncatedSeries",
    "BivariateSeries",
    "linear_combine",
    "mul",
    "div",
    "frac_power_one_minus_u",
    "scale_argument",
    "derivative",
    "divided_difference",
    "geometric_series",
    "cauchy_product",
    "series_quotient",
]


# ---------------------------------------------------------------------------
# array kernels (operate along the last axis, broadcast over leading axes)
# ---------------------------------------------------------------------------

def _result_dtype(*arrays):
    return np.result_type(float, *arrays)


def cauchy_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product along the last axis.

    ``a`` and ``b`` must have the same length along the last axis and
    broadcastable leading shapes.  The output has the broadcast shape.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[-1]
    if b.shape[-1] != n:
        raise ValueError("order mismatch")
    if a.ndim == 1 and b.ndim == 1:
        return np.convolve(a, b)[:n]
    shape = np.broadcast_shapes(a.shape, b.shape)
    a = np.broadcast_to(a, shape)
    b = np.broadcast_to(b, shape)
    out = np.zeros(shape, dtype=_result_dtype(a, b))
    for k in range(n):
        out[..., k] = np.einsum("...j,...j->...", a[..., : k + 1], b[..., k::-1])
    return out


def series_quotient(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Forward substitution for ``q`` with ``q * den == num`` along the last axis."""
    num = np.asarray(num)
    den = np.asarray(den)
    n = num.shape[-1]
    if den.shape[-1] != n:
        raise ValueError("order mismatch")
    d0 = den[..., 0]
    if np.any(d0 == 0):
        raise ZeroDivisionError("non-invertible series")
    shape = np.broadcast_shapes(num.shape, den.shape)
    num = np.broadcast_to(num, shape)
    den = np.broadcast_to(den, shape)
    q = np.zeros(shape, dtype=_result_dtype(num, den))
    if len(shape) == 1:
        inv = 1.0 / d0
        q[0] = num[0] * inv
        for k in range(1, n):
            q[k] = (num[k] - np.dot(den[1 : k + 1], q[k - 1 :: -1])) * inv
        return q
    d0 = den[..., 0]
    q[..., 0] = num[..., 0] / d0
    for k in range(1, n):
        acc = np.einsum("...j,...j->...", den[..., 1 : k + 1], q[..., k - 1 :: -1])
        q[..., k] = (num[..., k] - acc) / d0
    return q


def _tag(arr: np.ndarray) -> str:
    return "complex" if np.iscomplexobj(arr) else "real"


def _as_coeffs(values) -> np.ndarray:
    arr = np.array(values, copy=True)
    if arr.dtype.kind not in "biufc":
        raise TypeError("series coefficients must be numeric")
    arr = arr.astype(complex if arr.dtype.kind == "c" else float)
    return arr


# ---------------------------------------------------------------------------
# univariate series
# ---------------------------------------------------------------------------

class TruncatedSeries:
    """Coefficients ``c_0 .. c_T`` of a formal power series in ``u``.

    Parameters
    ----------
    coeffs : array_like
        Real or complex coefficients; the truncation order is ``len - 1``.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = _as_coeffs(coeffs)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D array")
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        c.setflags(write=False)
        self._c = c

    # constructors ---------------------------------------------------------
    @classmethod
    def zeros(cls, T: int) -> "TruncatedSeries":
        return cls(np.zeros(T + 1))

    @classmethod
    def one(cls, T: int) -> "TruncatedSeries":
        return cls.monomial(0, T)

    @classmethod
    def monomial(cls, k: int, T: int, coefficient=1.0) -> "TruncatedSeries":
        c = np.zeros(T + 1, dtype=np.result_type(float, coefficient))
        if k <= T:
            c[k] = coefficient
        return cls(c)

    # accessors ------------------------------------------------------------
    @property
    def order(self) -> int:
        return self._c.size - 1

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def field(self) -> str:
        return _tag(self._c)

    def __len__(self) -> int:
        return self._c.size

    def __getitem__(self, k):
        return self._c[k]

    def __repr__(self) -> str:
        return f"TruncatedSeries(T={self.order}, field={self.field}, coeffs={self._c!r})"

    def real(self) -> "TruncatedSeries":
        return TruncatedSeries(self._c.real)

    def resize(self, T: int) -> "TruncatedSeries":
        """Truncate or zero-pad to order ``T``."""
        c = np.zeros(T + 1, dtype=self._c.dtype)
        m = min(T, self.order) + 1
        c[:m] = self._c[:m]
        return TruncatedSeries(c)

    def shift(self, k: int = 1) -> "TruncatedSeries":
        """Multiply by ``u**k`` keeping the order."""
        c = np.zeros_like(self._c)
        if k <= self.order:
            c[k:] = self._c[: self.order + 1 - k]
        return TruncatedSeries(c)

    def cumulative(self) -> "TruncatedSeries":
        """Multiply by ``1/(1-u)``."""
        return TruncatedSeries(np.cumsum(self._c))

    def allclose(self, other, rtol=1e-12, atol=1e-12) -> bool:
        other = other.coeffs if isinstance(other, TruncatedSeries) else np.asarray(other)
        return bool(np.allclose(self._c, other, rtol=rtol, atol=atol))

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return other
        if isinstance(other, Number):
            return TruncatedSeries.monomial(0, self.order, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return linear_combine(self, other, 1.0, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return linear_combine(self, other, 1.0, -1.0)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return linear_combine(other, self, 1.0, -1.0)

    def __neg__(self):
        return TruncatedSeries(-self._c)

    def __mul__(self, other):
        if isinstance(other, Number):
            return TruncatedSeries(self._c * other)
        if isinstance(other, TruncatedSeries):
            return mul(self, other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return TruncatedSeries(self._c / other)
        if isinstance(other, TruncatedSeries):
            return div(self, other)
        return NotImplemented

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return div(other, self)

    def __pow__(self, n: int):
        if int(n) != n or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = TruncatedSeries.one(self.order)
        base = self
        n = int(n)
        while n:
            if n & 1:
                result = mul(result, base)
            n >>= 1
            if n:
                base = mul(base, base)
        return result


def _check_orders(a: TruncatedSeries, b: TruncatedSeries) -> None:
    if a.order != b.order:
        raise ValueError(f"order mismatch: {a.order} != {b.order}")


def linear_combine(a: TruncatedSeries, b: TruncatedSeries, alpha=1.0, beta=1.0) -> TruncatedSeries:
    """Coefficient-wise ``alpha*a + beta*b``."""
    _check_orders(a, b)
    return TruncatedSeries(alpha * a.coeffs + beta * b.coeffs)


def mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at the common order."""
    _check_orders(a, b)
    return TruncatedSeries(cauchy_product(a.coeffs, b.coeffs))


def div(num: TruncatedSeries, den: TruncatedSeries) -> TruncatedSeries:
    """Series quotient by forward substitution; ``den[0]`` must be nonzero."""
    _check_orders(num, den)
    return TruncatedSeries(series_quotient(num.coeffs, den.coeffs))


def frac_power_one_minus_u(mu: float, T: int) -> TruncatedSeries:
    """Coefficients of ``(1-u)**mu`` from ``c_k = c_{k-1} (k-1-mu)/k``."""
    if T < 0:
        raise ValueError("T must be non-negative")
    k = np.arange(1, T + 1, dtype=float)
    c = np.empty(T + 1)
    c[0] = 1.0
    c[1:] = np.cumprod((k - 1.0 - mu) / k)
    return TruncatedSeries(c)


def geometric_series(T: int, ratio=1.0) -> TruncatedSeries:
    """Coefficients of ``1/(1 - ratio*u)``."""
    return TruncatedSeries(np.power(ratio, np.arange(T + 1)))


def scale_argument(a: TruncatedSeries, zeta, strict: bool = True) -> TruncatedSeries:
    """Substitute ``u -> zeta*u``.

    ``strict=False`` permits ``|zeta| > 1``, which is harmless for truncated
    series and is used for finite differences in ``zeta``.
    """
    if strict and abs(zeta) > 1.0 + 1e-12:
        raise ValueError("|zeta| must not exceed 1")
    if zeta == 1:
        return a
    powers = np.power(np.asarray(zeta, dtype=np.result_type(float, zeta)), np.arange(a.order + 1))
    return TruncatedSeries(a.coeffs * powers)


def derivative(a: TruncatedSeries) -> TruncatedSeries:
    """Term-wise derivative; the result has order ``T-1``."""
    if a.order < 1:
        raise ValueError("derivative needs order >= 1")
    k = np.arange(1, a.order + 1)
    return TruncatedSeries(a.coeffs[1:] * k)


# ---------------------------------------------------------------------------
# bivariate series
# ---------------------------------------------------------------------------

class BivariateSeries:
    """Coefficient table ``c[tau, t]`` of a double series in ``(w, u)``.

    Row ``tau`` holds the ``w**tau`` slice, itself a series in ``u``.  The
    table is rectangular; callers track which entries are exact (for the
    divided difference these are ``tau + t <= T - 1``).
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = _as_coeffs(coeffs)
        if c.ndim != 2 or 0 in c.shape:
            raise ValueError("bivariate coefficients must be a non-empty 2-D array")
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        c.setflags(write=False)
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def shape(self) -> tuple[int, int]:
        return self._c.shape

    @property
    def order_w(self) -> int:
        return self._c.shape[0] - 1

    @property
    def order_u(self) -> int:
        return self._c.shape[1] - 1

    @property
    def field(self) -> str:
        return _tag(self._c)

    def __repr__(self) -> str:
        return f"BivariateSeries(shape={self.shape}, field={self.field})"

    def w_slice(self, tau: int) -> TruncatedSeries:
        return TruncatedSeries(self._c[tau])

    def u_slice(self, t: int) -> TruncatedSeries:
        return TruncatedSeries(self._c[:, t])

    def add(self, other: "BivariateSeries", alpha=1.0, beta=1.0) -> "BivariateSeries":
        if self.shape != other.shape:
            raise ValueError("order mismatch")
        return BivariateSeries(alpha * self._c + beta * other._c)

    def mul_w(self, s: TruncatedSeries) -> "BivariateSeries":
        """Multiply by a univariate series in ``w``."""
        b = _fit(s, self.order_w)
        return BivariateSeries(cauchy_product(self._c.T, b).T)

    def mul_u(self, s: TruncatedSeries) -> "BivariateSeries":
        """Multiply by a univariate series in ``u`` (slice-wise)."""
        b = _fit(s, self.order_u)
        return BivariateSeries(cauchy_product(self._c, b))

    def div_w(self, s: TruncatedSeries) -> "BivariateSeries":
        """Divide by a univariate series in ``w`` with nonzero constant term."""
        d = _fit(s, self.order_w)
        if d[0] == 0:
            raise ZeroDivisionError("non-invertible series")
        nw = self.order_w + 1
        out = np.zeros(self._c.shape, dtype=_result_dtype(self._c, d))
        for tau in range(nw):
            acc = self._c[tau]
            if tau:
                acc = acc - d[1 : tau + 1] @ out[tau - 1 :: -1]
            out[tau] = acc / d[0]
        return BivariateSeries(out)

    def div_u(self, s: TruncatedSeries) -> "BivariateSeries":
        """Divide by a univariate series in ``u`` (slice-wise)."""
        d = _fit(s, self.order_u)
        return BivariateSeries(series_quotient(self._c, d))

    def shift_u(self, k: int = 1) -> "BivariateSeries":
        """Multiply by ``u**k``."""
        out = np.zeros_like(self._c)
        if k <= self.order_u:
            out[:, k:] = self._c[:, : self.order_u + 1 - k]
        return BivariateSeries(out)

    def cumulative_w(self) -> "BivariateSeries":
        """Multiply by ``1/(1-w)``."""
        return BivariateSeries(np.cumsum(self._c, axis=0))

    def cumulative_u(self) -> "BivariateSeries":
        """Multiply by ``1/(1-u)``."""
        return BivariateSeries(np.cumsum(self._c, axis=1))


def _fit(s: TruncatedSeries, T: int) -> np.ndarray:
    if s.order < T:
        raise ValueError("univariate factor has too low an order")
    return s.coeffs[: T + 1]


def divided_difference(psi: TruncatedSeries, T: int | None = None,
                       tau_max: int | None = None, t_max: int | None = None) -> BivariateSeries:
    """Bivariate expansion of ``(psi(u) - psi(w)) / (u - w)``.

    The coefficient of ``w**tau u**t`` is ``psi_{tau+t+1}`` whenever
    ``tau + t + 1 <= T`` and zero beyond.  ``tau_max``/``t_max`` crop the
    table (default ``T`` each).
    """
    if psi.coeffs[0] != 0:
        raise ValueError("psi must have zero constant term")
    if T is None:
        T = psi.order
    if T > psi.order:
        psi = psi.resize(T)
    tau_max = T if tau_max is None else tau_max
    t_max = T if t_max is None else t_max
    c = np.zeros(T + 2, dtype=psi.coeffs.dtype)
    c[: T + 1] = psi.coeffs[: T + 1]
    idx = np.add.outer(np.arange(tau_max + 1), np.arange(t_max + 1)) + 1
    idx = np.minimum(idx, T + 1)
    return BivariateSeries(c[idx])
