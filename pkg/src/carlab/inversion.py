"""Potential identification from boundary traces of u_xx and u_xxx at x = 1.

Pipeline: the difference y of two solutions with potentials p and q solves
i y_t + y_xxxx + q y = f R with f = q - p and R the p-solution; an
even-conjugate extension in time (conjugation composed with reflection,
which is what preserves the equation for real f, q and real initial data)
followed by a time shift puts the initial data in the middle of a doubled
horizon; the reversed time derivative z of the extended field carries f in
its mid-horizon value, where a weighted duality functional recovers the
squared size of f from boundary data.  On top of the machinery sits a
Lipschitz-stability experiment and an output-least-squares reconstruction
(Gauss-Newton with finite-difference Jacobian and Tikhonov term).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace, field

import numpy as np

from .solver import (
    BoundaryTrace,
    Grid,
    Potential,
    SpaceTimeField,
    assemble_generator,
    extract_traces,
    solve,
)
from .weights import CarlemanParams, WeightTable

__all__ = [
    "InversionSetup",
    "StabilityReport",
    "BKReport",
    "ReconstructionResult",
    "difference_system",
    "difference_residual",
    "extend_and_shift",
    "z_field",
    "j_functional",
    "im_j_reference",
    "bk_report",
    "h1_norm_sq",
    "trace_h1_norm",
    "stability_ratio",
    "reconstruct_potential",
]


@dataclass
class InversionSetup:
    """A hypothesis-checked pair of potentials with shared initial data."""

    p: Potential
    q: Potential
    u0: np.ndarray
    grid: Grid
    params: CarlemanParams
    r: float = field(init=False)
    m: float = field(init=False)
    conjugation: str = field(init=False)

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=complex)
        if u0.size == self.grid.n_x:
            full = np.zeros(self.grid.n_x + 2, dtype=complex)
            full[1:-1] = u0
            u0 = full
        if u0.size != self.grid.n_x + 2:
            raise ValueError("initial data length does not match grid")
        self.u0 = u0
        interior = u0[1:-1]
        scale = float(np.max(np.abs(interior)))
        if scale == 0.0:
            raise ValueError("initial data vanishes identically")
        if np.max(np.abs(interior.imag)) <= 1e-12 * scale:
            conj = "even"
        elif np.max(np.abs(interior.real)) <= 1e-12 * scale:
            conj = "odd"
        else:
            raise ValueError(
                "initial data must be real or purely imaginary for the "
                "conjugate extension"
            )
        self.conjugation = conj
        r = float(np.min(np.abs(interior)))
        if r <= 0.0:
            raise ValueError("|u0| must be positive on interior nodes")
        self.r = r
        self.m = max(self.p.sup_norm, self.q.sup_norm)


def difference_system(setup: InversionSetup):
    """Solve both potentials from the same data; return (y, R, f)."""
    up = solve(setup.u0, setup.p, None, setup.grid)
    uq = solve(setup.u0, setup.q, None, setup.grid)
    y = SpaceTimeField(up.values - uq.values, setup.grid)
    f = setup.q.values - setup.p.values
    return y, up, f


def difference_residual(y: SpaceTimeField, q: Potential, f, R: SpaceTimeField):
    """Max norm of i y_t + y_xxxx + q y - f R at interior times, relative
    to the source scale (centered time differences, discrete operator)."""
    g = y.grid
    dt = g.dt
    L = assemble_generator(g, q)
    yv = y.interior()
    res = (
        1j * (yv[2:] - yv[:-2]) / (2 * dt)
        + yv[1:-1] @ L.T
        - (f[None, 1:-1] * R.interior()[1:-1])
    )
    scale = float(np.max(np.abs(f[None, 1:-1] * R.interior()))) or 1.0
    return float(np.max(np.abs(res))) / scale


def extend_and_shift(y: SpaceTimeField, R: SpaceTimeField, conjugation="even"):
    """Conjugate-extend y and R through t = 0 and shift onto (0, 2T).

    Extended index n corresponds to original time n dt - T: the original
    initial slice sits at the midpoint of the doubled horizon.
    """
    g = y.grid
    g2 = Grid(n_x=g.n_x, n_t=2 * g.n_t, T=2 * g.T)
    sign = 1.0 if conjugation == "even" else -1.0
    scale = float(np.max(np.abs(R.values[0]))) or 1.0
    mismatch = (
        np.max(np.abs(R.values[0].imag)) if conjugation == "even"
        else np.max(np.abs(R.values[0].real))
    )
    if mismatch > 1e-8 * scale:
        raise ValueError(
            f"initial slice violates the {conjugation}-conjugate hypothesis "
            f"({mismatch:.2e} relative to {scale:.2e})"
        )

    def extend(fld):
        out = np.zeros((2 * g.n_t + 1, g.n_x + 2), dtype=complex)
        out[g.n_t :] = fld.values
        out[: g.n_t] = sign * np.conj(fld.values[g.n_t : 0 : -1])
        return SpaceTimeField(out, g2)

    return extend(y), extend(R)


def z_field(y2: SpaceTimeField) -> SpaceTimeField:
    """z(t) = (d/dt y2)(2T - t): centered differences then index reversal."""
    g2 = y2.grid
    dt = g2.dt
    vals = y2.values
    ddt = np.zeros_like(vals)
    ddt[1:-1] = (vals[2:] - vals[:-2]) / (2 * dt)
    ddt[0] = (-3 * vals[0] + 4 * vals[1] - vals[2]) / (2 * dt)
    ddt[-1] = (3 * vals[-1] - 4 * vals[-2] + vals[-3]) / (2 * dt)
    return SpaceTimeField(ddt[::-1], g2)


def _clamped_xx_xxxx(vals, dx):
    """v_xx and v_xxxx of a clamped row-stack (ghost reflection inside)."""
    vxx = np.zeros_like(vals)
    vxx[:, 1:-1] = (vals[:, 2:] - 2 * vals[:, 1:-1] + vals[:, :-2]) / dx**2
    ext = np.concatenate([vals[:, 1:2], vals, vals[:, -2:-1]], axis=1)
    vx4 = np.zeros_like(vals)
    vx4[:, 1:-1] = (
        ext[:, 4:] - 4 * ext[:, 3:-1] + 6 * ext[:, 2:-2] - 4 * ext[:, 1:-3] + ext[:, :-4]
    ) / dx**4
    return vxx, vx4


def j_functional(
    z: SpaceTimeField, params: CarlemanParams, psi_mode="zero", table=None
) -> complex:
    """Duality functional: integral of I1 theta conj(z) over the first half
    of the doubled horizon.

    params.T must equal the doubled horizon of z.  I1 = i v_t + Psi v
    + a2 v_xx + v_xxxx with v = theta z; derivatives by grid differences,
    weights from jets.
    """
    g2 = z.grid
    if abs(params.T - g2.T) > 1e-12:
        raise ValueError("params horizon must match the extended field")
    if table is None:
        table = WeightTable(params, g2.t_nodes, g2.x_nodes)
    with np.errstate(under="ignore"):
        theta = np.exp(table.l_values())
    lx = table.l_deriv(1, 0)
    lxx = table.l_deriv(2, 0)
    a2 = 6.0 * (lx**2 - lxx)
    if psi_mode == "zero":
        psi = np.zeros_like(a2)
    elif psi_mode == "quartic_slope":
        psi = lx**4
    else:
        raise ValueError(f"unknown psi_mode {psi_mode!r}")

    v = theta * z.values
    dt, dx = g2.dt, g2.dx
    vt = np.zeros_like(v)
    vt[1:-1] = (v[2:] - v[:-2]) / (2 * dt)
    vt[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt)
    vt[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dt)
    vxx, vx4 = _clamped_xx_xxxx(v, dx)
    i1 = 1j * vt + psi * v + a2 * vxx + vx4

    half = g2.n_t // 2
    integrand = i1 * theta * np.conj(z.values)
    wt = np.ones(half + 1)
    wt[0] = wt[-1] = 0.5
    wx = np.ones(g2.n_x + 2)
    wx[0] = wx[-1] = 0.5
    return complex(np.einsum("i,ij,j->", wt, integrand[: half + 1], wx) * dt * dx)


def im_j_reference(f, R2: SpaceTimeField, params: CarlemanParams) -> float:
    """(1/2) int exp(2 l(T, x)) |f|^2 |R2(T, x)|^2 dx at the mid-horizon."""
    g2 = R2.grid
    table = WeightTable(params, g2.t_nodes, g2.x_nodes)
    mid = g2.n_t // 2
    with np.errstate(under="ignore"):
        w = np.exp(2.0 * table.l_values()[mid])
    integrand = w * np.abs(f) ** 2 * np.abs(R2.values[mid]) ** 2
    return 0.5 * float(np.trapz(integrand, dx=g2.dx))


@dataclass
class BKReport:
    """Two-way check of Im(J) and its lower bound for one setup."""

    im_j: float
    im_j_ref: float
    lower_bound: float
    rel_gap: float
    terminal_rel_err: float


def bk_report(setup: InversionSetup, psi_mode="zero") -> BKReport:
    """Run the full pipeline on a setup and compare Im(J) both ways."""
    y, R, f = difference_system(setup)
    y2, R2 = extend_and_shift(y, R, setup.conjugation)
    z = z_field(y2)
    params2 = replace(setup.params, T=2.0 * setup.grid.T)
    im_j = j_functional(z, params2, psi_mode=psi_mode).imag
    ref = im_j_reference(f, R2, params2)

    mid = y2.grid.n_t // 2
    target = -1j * f * R2.values[mid]
    num = np.linalg.norm(z.values[mid] - target)
    den = np.linalg.norm(target) or 1.0
    terminal_rel_err = float(num / den)

    table = WeightTable(params2, y2.grid.t_nodes, y2.grid.x_nodes)
    with np.errstate(under="ignore"):
        w = np.exp(2.0 * table.l_values()[mid])
    lower = 0.5 * setup.r**2 * float(np.trapz(w * np.abs(f) ** 2, dx=y2.grid.dx))
    rel_gap = abs(im_j - ref) / max(abs(ref), 1e-300)
    return BKReport(
        im_j=im_j, im_j_ref=ref, lower_bound=lower,
        rel_gap=rel_gap, terminal_rel_err=terminal_rel_err,
    )


def h1_norm_sq(series, dt) -> float:
    """Squared H^1 norm of a complex time series: int |g|^2 + |g_t|^2."""
    g = np.asarray(series, dtype=complex)
    if g.size < 3:
        raise ValueError("need at least 3 samples for the H1 norm")
    gt = np.zeros_like(g)
    gt[1:-1] = (g[2:] - g[:-2]) / (2 * dt)
    gt[0] = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * dt)
    gt[-1] = (3 * g[-1] - 4 * g[-2] + g[-3]) / (2 * dt)
    return float(np.trapz(np.abs(g) ** 2 + np.abs(gt) ** 2, dx=dt))


def trace_h1_norm(tr: BoundaryTrace, dt) -> float:
    """Summed squared H^1 norms of both trace components."""
    return h1_norm_sq(tr.uxx, dt) + h1_norm_sq(tr.uxxx, dt)


@dataclass
class StabilityReport:
    f_norm_sq: float
    trace_h1_sq: float
    ratio: float
    degenerate: bool


def stability_ratio(setup: InversionSetup) -> StabilityReport:
    """|f|^2-to-trace-misfit ratio for one potential pair."""
    up = solve(setup.u0, setup.p, None, setup.grid)
    uq = solve(setup.u0, setup.q, None, setup.grid)
    tp, tq = extract_traces(up), extract_traces(uq)
    f = setup.q.values - setup.p.values
    f_norm_sq = float(np.trapz(np.abs(f) ** 2, dx=setup.grid.dx))
    dt = setup.grid.dt
    trace_h1_sq = h1_norm_sq(tp.uxx - tq.uxx, dt) + h1_norm_sq(tp.uxxx - tq.uxxx, dt)
    if trace_h1_sq == 0.0:
        return StabilityReport(f_norm_sq, 0.0, float("nan"), True)
    return StabilityReport(f_norm_sq, trace_h1_sq, f_norm_sq / trace_h1_sq, False)


# ---------------------------------------------------------------------------
# output least squares
# ---------------------------------------------------------------------------


@dataclass
class ReconstructionResult:
    potential: Potential
    misfit_history: list
    n_iterations: int
    converged: bool
    warning: str = ""


def _trace_residual_vector(tr: BoundaryTrace, target: BoundaryTrace, dt, wt_sqrt):
    parts = []
    for g, g0 in ((tr.uxx, target.uxx), (tr.uxxx, target.uxxx)):
        d = g - g0
        ddt = np.zeros_like(d)
        ddt[1:-1] = (d[2:] - d[:-2]) / (2 * dt)
        ddt[0] = (-3 * d[0] + 4 * d[1] - d[2]) / (2 * dt)
        ddt[-1] = (3 * d[-1] - 4 * d[-2] + d[-3]) / (2 * dt)
        for comp in (d, ddt):
            w = wt_sqrt * comp
            parts.extend([w.real, w.imag])
    return np.concatenate(parts)


def reconstruct_potential(
    target: BoundaryTrace,
    u0,
    p_init: Potential,
    grid: Grid,
    reg=0.0,
    max_iter=30,
    misfit_tol=1e-14,
    jacobian_step=1e-6,
    workers=4,
) -> ReconstructionResult:
    """Gauss-Newton output least squares for the stationary potential.

    Minimizes the summed squared H^1 trace misfits plus reg * ||q - p_init||^2
    over the interior potential values; the Jacobian is built column by
    column from finite-difference forward solves (run concurrently), and a
    backtracking line search keeps the misfit monotone.
    """
    dt, dx = grid.dt, grid.dx
    wt = np.full(grid.n_t + 1, dt)
    wt[0] = wt[-1] = dt / 2.0
    wt_sqrt = np.sqrt(wt)
    wx_sqrt = np.sqrt(np.full(grid.n_x, dx))
    q = p_init.values.copy()

    def residual(q_full):
        u = solve(u0, Potential(q_full), None, grid)
        r = _trace_residual_vector(extract_traces(u), target, dt, wt_sqrt)
        if reg > 0.0:
            r = np.concatenate(
                [r, np.sqrt(reg) * wx_sqrt * (q_full[1:-1] - p_init.values[1:-1])]
            )
        return r

    r = residual(q)
    misfit = float(r @ r)
    history = [misfit]
    converged = misfit <= misfit_tol
    warning = ""
    it = 0
    while not converged and it < max_iter:
        def column(j):
            qj = q.copy()
            h = jacobian_step * max(1.0, abs(q[1 + j]))
            qj[1 + j] += h
            return (residual(qj) - r) / h

        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(grid.n_x)))
        J = np.stack(cols, axis=1)
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)

        alpha = 1.0
        accepted = False
        while alpha >= 2.0**-16:
            q_try = q.copy()
            q_try[1:-1] = q[1:-1] + alpha * step
            r_try = residual(q_try)
            m_try = float(r_try @ r_try)
            if m_try < misfit:
                q, r, misfit = q_try, r_try, m_try
                accepted = True
                break
            alpha *= 0.5
        it += 1
        if not accepted:
            warning = "line search stalled before the misfit tolerance"
            break
        history.append(misfit)
        converged = misfit <= misfit_tol
    if it >= max_iter and not converged and not warning:
        warning = "iteration cap reached before the misfit tolerance"
    return ReconstructionResult(
        potential=Potential(q),
        misfit_history=history,
        n_iterations=it,
        converged=converged,
        warning=warning,
    )
