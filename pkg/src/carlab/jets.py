"""Bivariate truncated Taylor (jet) arithmetic.

A ``Jet2`` stores the scaled partial derivatives of a smooth function f(t, x)
at a base point: ``coeffs[j, k] = (d^j/dx^j)(d^k/dt^k) f / (j! k!)`` for
``j <= kx_order``, ``k <= kt_order``.  Sums, products, exp and reciprocal of
jets at the same point are again jets, so derivatives of composite
expressions come out exact (no differencing error) up to the truncation
orders.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Jet2",
    "JetMismatchError",
    "JetSingularityError",
    "jet_add",
    "jet_mul",
    "jet_exp",
    "jet_recip",
]


class JetMismatchError(ValueError):
    """Operands live at different base points or carry different orders."""


class JetSingularityError(ZeroDivisionError):
    """Reciprocal of a jet whose value coefficient vanishes."""


class Jet2:
    """Truncated bivariate Taylor series at a fixed (t, x) base point."""

    __slots__ = ("coeffs", "base_point")

    def __init__(self, coeffs, base_point=(0.0, 0.0)):
        arr = np.array(coeffs, copy=True)
        if arr.ndim != 2:
            raise ValueError("coeffs must be a 2-d array indexed by (j, k)")
        if not np.issubdtype(arr.dtype, np.complexfloating):
            arr = arr.astype(np.float64)
        self.coeffs = arr
        self.base_point = (float(base_point[0]), float(base_point[1]))

    # -- construction -------------------------------------------------

    @staticmethod
    def constant(value, kx, kt, base_point=(0.0, 0.0)):
        dtype = np.complex128 if isinstance(value, complex) else np.float64
        c = np.zeros((kx + 1, kt + 1), dtype=dtype)
        c[0, 0] = value
        return Jet2(c, base_point)

    @staticmethod
    def coordinate_x(base_point, kx, kt):
        """Jet of the function (t, x) -> x."""
        c = np.zeros((kx + 1, kt + 1))
        c[0, 0] = base_point[1]
        if kx >= 1:
            c[1, 0] = 1.0
        return Jet2(c, base_point)

    @staticmethod
    def coordinate_t(base_point, kx, kt):
        """Jet of the function (t, x) -> t."""
        c = np.zeros((kx + 1, kt + 1))
        c[0, 0] = base_point[0]
        if kt >= 1:
            c[0, 1] = 1.0
        return Jet2(c, base_point)

    # -- structure ----------------------------------------------------

    @property
    def kx_order(self):
        return self.coeffs.shape[0] - 1

    @property
    def kt_order(self):
        return self.coeffs.shape[1] - 1

    @property
    def value(self):
        return self.coeffs[0, 0]

    def derivative(self, j, k=0):
        """Unscaled partial derivative d_x^j d_t^k f at the base point."""
        if not (0 <= j <= self.kx_order and 0 <= k <= self.kt_order):
            raise JetMismatchError(
                f"derivative ({j},{k}) beyond jet orders ({self.kx_order},{self.kt_order})"
            )
        return self.coeffs[j, k] * math.factorial(j) * math.factorial(k)

    def truncate(self, kx, kt):
        if kx > self.kx_order or kt > self.kt_order:
            raise JetMismatchError("cannot truncate to higher orders")
        return Jet2(self.coeffs[: kx + 1, : kt + 1], self.base_point)

    def conj(self):
        return Jet2(np.conj(self.coeffs), self.base_point)

    def dx(self):
        """Jet of the x-derivative (loses one x order)."""
        if self.kx_order < 1:
            raise JetMismatchError("no x orders left to differentiate")
        j = np.arange(1, self.kx_order + 1)
        return Jet2(self.coeffs[1:, :] * j[:, None], self.base_point)

    def dt(self):
        """Jet of the t-derivative (loses one t order)."""
        if self.kt_order < 1:
            raise JetMismatchError("no t orders left to differentiate")
        k = np.arange(1, self.kt_order + 1)
        return Jet2(self.coeffs[:, 1:] * k[None, :], self.base_point)

    def _check_compatible(self, other):
        if self.coeffs.shape != other.coeffs.shape:
            raise JetMismatchError(
                f"order mismatch: {self.coeffs.shape} vs {other.coeffs.shape}"
            )
        if self.base_point != other.base_point:
            raise JetMismatchError(
                f"base point mismatch: {self.base_point} vs {other.base_point}"
            )

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet2):
            self._check_compatible(other)
            return Jet2(self.coeffs + other.coeffs, self.base_point)
        c = self.coeffs.copy()
        c = c.astype(np.result_type(c.dtype, type(other)))
        c[0, 0] += other
        return Jet2(c, self.base_point)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.coeffs, self.base_point)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet2) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.coeffs * other, self.base_point)
        self._check_compatible(other)
        a, b = self.coeffs, other.coeffs
        out = np.zeros(a.shape, dtype=np.result_type(a.dtype, b.dtype))
        nj, nk = a.shape
        for j in range(nj):
            for k in range(nk):
                out[j, k] = np.sum(a[: j + 1, : k + 1] * b[j::-1, k::-1])
        return Jet2(out, self.base_point)

    __rmul__ = __mul__

    def __repr__(self):
        return (
            f"Jet2(orders=({self.kx_order},{self.kt_order}), "
            f"base={self.base_point}, value={self.value})"
        )


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    return a + b


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    return a * b


def _nilpotent_series(hat: Jet2, term_coeffs) -> Jet2:
    """Sum c_m * hat^m for a jet with zero value coefficient.

    hat^m vanishes identically once m exceeds kx+kt, so the sum is finite
    and exact at the truncation orders.
    """
    nmax = hat.kx_order + hat.kt_order
    acc = Jet2.constant(term_coeffs[0], hat.kx_order, hat.kt_order, hat.base_point)
    power = None
    for m in range(1, nmax + 1):
        power = hat if power is None else power * hat
        acc = acc + power * term_coeffs[m]
    return acc


def jet_exp(a: Jet2) -> Jet2:
    """Truncated series of exp(a)."""
    hat = Jet2(a.coeffs, a.base_point)
    a00 = a.value
    hat.coeffs[0, 0] = 0.0
    nmax = hat.kx_order + hat.kt_order
    coeffs = [1.0 / math.factorial(m) for m in range(nmax + 1)]
    series = _nilpotent_series(hat, coeffs)
    if np.iscomplexobj(a.coeffs):
        scale = np.exp(a00)
    else:
        scale = math.exp(a00) if a00 < 700.0 else math.inf
    return series * scale


def jet_recip(a: Jet2) -> Jet2:
    """Truncated series of 1/a; requires a nonzero value coefficient."""
    a00 = a.value
    if a00 == 0:
        raise JetSingularityError("reciprocal of jet with zero value coefficient")
    hat = Jet2(a.coeffs, a.base_point)
    hat.coeffs[0, 0] = 0.0
    hat = hat * (1.0 / a00)
    nmax = hat.kx_order + hat.kt_order
    coeffs = [(-1.0) ** m for m in range(nmax + 1)]
    series = _nilpotent_series(hat, coeffs)
    return series * (1.0 / a00)
