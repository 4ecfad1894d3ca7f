"""Carleman weight system: psi, varphi, l and theta = exp(l).

The weight is built from psi(x) = (x - x0)^2 with the observation-free
endpoint x0 outside [0, 1]:

    varphi(t, x) = exp(3 mu psi(x)) / (t (T - t))
    l(t, x)      = lam * (exp(3 mu psi(x)) - exp(5 mu sup psi)) / (t (T - t))
    theta        = exp(l)  (l < 0 everywhere, so theta in (0, 1])

All derivatives are produced by jet arithmetic on this exact formula.  Note
that differentiating the exponential exactly yields l_x = 3 lam mu psi_x
varphi; the factor 3 is kept everywhere (no shortcut forms), since the
pointwise identity only closes for the derivatives of the formula actually
used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet2, jet_exp, jet_recip

__all__ = [
    "CarlemanParams",
    "WeightJet",
    "WeightTable",
    "WeightBoundsReport",
    "psi_eval",
    "weight_jet",
    "weight_bounds_check",
]

WEIGHT_KX = 8
WEIGHT_KT = 2


@dataclass(frozen=True)
class CarlemanParams:
    """Weight parameters (lam, mu, x0, T) plus the derived sup of psi."""

    lam: float
    mu: float
    x0: float = -1.0
    T: float = 2.0
    psi_sup: float = field(init=False)

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0 and self.T > 0):
            raise ValueError("lam, mu and T must be positive")
        if 0.0 <= self.x0 <= 1.0:
            raise ValueError("x0 must lie outside [0, 1]")
        sup = max((0.0 - self.x0) ** 2, (1.0 - self.x0) ** 2)
        object.__setattr__(self, "psi_sup", sup)

    @property
    def offset(self):
        """The constant exp(5 mu sup psi) subtracted inside l."""
        return math.exp(5.0 * self.mu * self.psi_sup)


def psi_eval(x, params: CarlemanParams):
    """psi, psi_x, psi_xx at x in [0, 1]; higher derivatives vanish."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    d = x - params.x0
    return d * d, 2.0 * d, 2.0


@dataclass(frozen=True)
class WeightJet:
    """Jets of l and varphi at one interior point, plus theta = exp(l)."""

    l: Jet2
    varphi: Jet2
    theta: float
    point: tuple
    params: CarlemanParams

    @property
    def lx(self):
        return self.l.derivative(1, 0)

    @property
    def lxx(self):
        return self.l.derivative(2, 0)

    @property
    def lxxx(self):
        return self.l.derivative(3, 0)

    @property
    def lxxxx(self):
        return self.l.derivative(4, 0)

    @property
    def lt(self):
        return self.l.derivative(0, 1)

    @property
    def ltt(self):
        return self.l.derivative(0, 2)

    @property
    def ltx(self):
        return self.l.derivative(1, 1)

    @property
    def ltxx(self):
        return self.l.derivative(2, 1)

    @property
    def ltxxx(self):
        return self.l.derivative(3, 1)


def _psi_jet(x, params, kx, kt, base_point):
    """Jet of 3 mu psi at the base point (polynomial, exact)."""
    c = np.zeros((kx + 1, kt + 1))
    val, d1, d2 = (x - params.x0) ** 2, 2.0 * (x - params.x0), 2.0
    c[0, 0] = 3.0 * params.mu * val
    c[1, 0] = 3.0 * params.mu * d1
    c[2, 0] = 3.0 * params.mu * d2 / 2.0
    return Jet2(c, base_point)


def _time_factor_jet(t, params, kx, kt, base_point, horizon=None):
    """Jet of t (T - t) at the base point (polynomial, exact)."""
    T = params.T if horizon is None else horizon
    c = np.zeros((kx + 1, kt + 1))
    c[0, 0] = t * (T - t)
    if kt >= 1:
        c[0, 1] = T - 2.0 * t
    if kt >= 2:
        c[0, 2] = -1.0
    return Jet2(c, base_point)


def weight_jet(t, x, params: CarlemanParams, kx=WEIGHT_KX, kt=WEIGHT_KT) -> WeightJet:
    """Exact jets of l and varphi at an interior point (t, x)."""
    if not 0.0 < t < params.T:
        raise ValueError(f"t={t} outside (0, {params.T})")
    base = (t, x)
    expo = jet_exp(_psi_jet(x, params, kx, kt, base))
    recip = jet_recip(_time_factor_jet(t, params, kx, kt, base))
    varphi = expo * recip
    l = ((expo - params.offset) * recip) * params.lam
    lval = l.value
    theta = math.exp(lval) if lval > -745.0 else 0.0
    return WeightJet(l=l, varphi=varphi, theta=theta, point=base, params=params)


class WeightTable:
    """Vectorised weight evaluation on a tensor grid.

    l(t, x) = lam (E(x) - K) g(t) is separable, so every mixed derivative is
    an outer product of 1-d jet-derived derivative arrays of
    E(x) = exp(3 mu psi) and g(t) = 1/(t(T-t)).  Rows at t = 0 and t = T are
    flagged; weighted integrands vanish there (theta underflows to exact 0).
    """

    def __init__(self, params: CarlemanParams, t_nodes, x_nodes):
        self.params = params
        self.t_nodes = np.asarray(t_nodes, dtype=float)
        self.x_nodes = np.asarray(x_nodes, dtype=float)
        T = params.T
        self.interior_t = (self.t_nodes > 0.0) & (self.t_nodes < T)

        kx, kt = WEIGHT_KX, WEIGHT_KT
        self._E = np.zeros((kx + 1, self.x_nodes.size))
        for i, x in enumerate(self.x_nodes):
            jet = jet_exp(_psi_jet(x, params, kx, 0, (0.0, x)))
            for n in range(kx + 1):
                self._E[n, i] = jet.derivative(n, 0)
        self._g = np.zeros((kt + 1, self.t_nodes.size))
        for i, t in enumerate(self.t_nodes):
            if not self.interior_t[i]:
                continue
            jet = jet_recip(_time_factor_jet(t, params, 0, kt, (t, 0.0)))
            for n in range(kt + 1):
                self._g[n, i] = jet.derivative(0, n)

    def l_deriv(self, j, k):
        """Array (n_t, n_x) of d_x^j d_t^k l; exterior-t rows are 0."""
        lam, K = self.params.lam, self.params.offset
        xpart = self._E[j] - K if j == 0 else self._E[j]
        out = lam * np.outer(self._g[k], xpart)
        out[~self.interior_t] = 0.0
        return out

    def log_varphi(self):
        """log varphi, -inf on the exterior-t rows."""
        tt = self.t_nodes * (self.params.T - self.t_nodes)
        with np.errstate(divide="ignore"):
            ltime = np.where(self.interior_t, np.log(np.where(tt > 0, tt, 1.0)), np.inf)
        out = np.log(self._E[0])[None, :] - ltime[:, None]
        return out

    def varphi(self):
        out = np.outer(self._g[0], self._E[0])
        out[~self.interior_t] = 0.0
        return out

    def l_values(self):
        """l itself, with -inf on the exterior-t rows."""
        out = self.l_deriv(0, 0)
        out[~self.interior_t] = -np.inf
        return out

    def theta(self):
        with np.errstate(under="ignore"):
            return np.exp(self.l_values())


@dataclass
class WeightBoundsReport:
    """Empirical smallest constants C in the derivative bounds of l."""

    c_dx: np.ndarray  # n = 1..8: |d_x^n l| <= C lam mu^n varphi
    c_dxt: np.ndarray  # n = 0..3: |d_x^n l_t| <= C lam mu^n T varphi^2
    c_tt: float  # |l_tt| <= C lam T^2 varphi^3
    n_t: int
    n_x: int

    def as_dict(self):
        return {
            **{f"c_dx{n}": float(self.c_dx[n - 1]) for n in range(1, 9)},
            **{f"c_dxt{n}": float(self.c_dxt[n]) for n in range(0, 4)},
            "c_tt": float(self.c_tt),
        }


def weight_bounds_check(params: CarlemanParams, grid) -> WeightBoundsReport:
    """Scan the grid for the smallest constants in the derivative bounds."""
    table = WeightTable(params, grid.t_nodes, grid.x_nodes)
    mask = table.interior_t
    lam, mu, T = params.lam, params.mu, params.T
    phi = table.varphi()[mask]

    c_dx = np.zeros(8)
    for n in range(1, 9):
        num = np.abs(table.l_deriv(n, 0)[mask])
        c_dx[n - 1] = np.max(num / (lam * mu**n * phi))

    c_dxt = np.zeros(4)
    for n in range(0, 4):
        num = np.abs(table.l_deriv(n, 1)[mask])
        c_dxt[n] = np.max(num / (lam * mu**n * T * phi**2))

    c_tt = float(np.max(np.abs(table.l_deriv(0, 2)[mask]) / (lam * T**2 * phi**3)))
    return WeightBoundsReport(
        c_dx=c_dx, c_dxt=c_dxt, c_tt=c_tt, n_t=grid.n_t, n_x=grid.n_x
    )
