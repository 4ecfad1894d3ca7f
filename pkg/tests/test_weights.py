import math

import numpy as np
import pytest

from carlab.solver import Grid
from carlab.weights import (
    CarlemanParams,
    WeightTable,
    psi_eval,
    weight_bounds_check,
    weight_jet,
)

PARAMS = CarlemanParams(lam=1.0, mu=1.0, x0=-1.0, T=2.0)


def test_params_validation():
    with pytest.raises(ValueError):
        CarlemanParams(lam=1.0, mu=1.0, x0=0.5)
    with pytest.raises(ValueError):
        CarlemanParams(lam=-1.0, mu=1.0)
    with pytest.raises(ValueError):
        CarlemanParams(lam=1.0, mu=1.0, T=0.0)


def test_psi_sup():
    assert PARAMS.psi_sup == 4.0
    right = CarlemanParams(lam=1.0, mu=1.0, x0=2.0)
    assert right.psi_sup == 4.0


def test_psi_eval_substitution():
    assert psi_eval(0.0, PARAMS) == (1.0, 2.0, 2.0)
    assert psi_eval(1.0, PARAMS) == (4.0, 4.0, 2.0)


def test_psi_eval_domain():
    with pytest.raises(ValueError):
        psi_eval(-0.1, PARAMS)
    # psi_x never vanishes on [0,1] since x0 is excluded from the interval
    xs = np.linspace(0, 1, 50)
    assert min(abs(psi_eval(x, PARAMS)[1]) for x in xs) >= 2.0 * min(
        abs(PARAMS.x0), abs(1 - PARAMS.x0)
    )


def test_weight_jet_values_at_midpoint():
    w = weight_jet(1.0, 0.0, PARAMS)
    assert w.varphi.value == pytest.approx(math.exp(3.0), rel=1e-14)
    assert w.l.value == pytest.approx(math.exp(3.0) - math.exp(20.0), rel=1e-14)
    assert w.theta == 0.0  # clean underflow
    assert w.lt == pytest.approx(0.0, abs=1e-8)  # midpoint symmetry
    assert w.lx == pytest.approx(6.0 * math.exp(3.0), rel=1e-13)


def test_weight_jet_derivatives_vs_finite_differences():
    p = CarlemanParams(lam=0.7, mu=0.4, x0=-1.0, T=2.0)

    def ell(t, x):
        return p.lam * (math.exp(3 * p.mu * (x - p.x0) ** 2) - p.offset) / (t * (p.T - t))

    t0, x0 = 0.8, 0.6
    w = weight_jet(t0, x0, p)
    h = 1e-6
    dx_fd = (ell(t0, x0 + h) - ell(t0, x0 - h)) / (2 * h)
    dt_fd = (ell(t0 + h, x0) - ell(t0 - h, x0)) / (2 * h)
    dxx_fd = (ell(t0, x0 + h) - 2 * ell(t0, x0) + ell(t0, x0 - h)) / h**2
    assert w.lx == pytest.approx(dx_fd, rel=1e-6)
    assert w.lt == pytest.approx(dt_fd, rel=1e-6)
    assert w.lxx == pytest.approx(dxx_fd, rel=1e-3)


def test_weight_jet_domain_error():
    with pytest.raises(ValueError):
        weight_jet(0.0, 0.5, PARAMS)
    with pytest.raises(ValueError):
        weight_jet(2.5, 0.5, PARAMS)


def test_l_negative_theta_in_unit_interval():
    gentle = CarlemanParams(lam=1e-8, mu=1.0, x0=-1.0, T=2.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = rng.uniform(0.05, 1.95)
        x = rng.uniform(0.0, 1.0)
        w = weight_jet(t, x, gentle)
        assert w.l.value < 0.0
        assert 0.0 < w.theta <= 1.0


def test_l_maximised_at_time_midpoint():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(0, 1)
        t = rng.uniform(0.05, 1.95)
        w_mid = weight_jet(PARAMS.T / 2, x, PARAMS)
        w = weight_jet(t, x, PARAMS)
        assert w_mid.l.value >= w.l.value - 1e-9


def test_phi_dominated_by_phi_squared():
    # varphi <= (T^2/4) varphi^2 pointwise
    grid = Grid(n_x=32, n_t=64, T=2.0)
    table = WeightTable(PARAMS, grid.t_nodes, grid.x_nodes)
    phi = table.varphi()[table.interior_t]
    assert np.all(phi <= (PARAMS.T**2 / 4.0) * phi**2 + 1e-12)


def test_weight_table_matches_pointwise_jets():
    p = CarlemanParams(lam=0.3, mu=0.5, x0=-1.0, T=2.0)
    grid = Grid(n_x=16, n_t=16, T=2.0)
    table = WeightTable(p, grid.t_nodes, grid.x_nodes)
    it, ix = 5, 7
    w = weight_jet(grid.t_nodes[it], grid.x_nodes[ix], p)
    pairs = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (0, 1), (1, 1), (0, 2), (8, 0)]
    for j, k in pairs:
        assert table.l_deriv(j, k)[it, ix] == pytest.approx(
            w.l.derivative(j, k), rel=1e-12
        )
    assert table.varphi()[it, ix] == pytest.approx(w.varphi.value, rel=1e-13)


def test_bounds_constants():
    grid = Grid(n_x=64, n_t=200, T=2.0)
    rep = weight_bounds_check(PARAMS, grid)
    # first-derivative constant: |l_x| = 3 psi_x varphi, psi_x <= 2(1-x0)
    assert rep.c_dx[0] <= 6.0 * (1.0 - PARAMS.x0) + 1e-9
    assert np.all(np.isfinite(rep.c_dx))
    assert np.all(np.isfinite(rep.c_dxt))
    assert math.isfinite(rep.c_tt)

    # lambda-independence: both sides scale linearly in lambda
    doubled = CarlemanParams(lam=2.0, mu=1.0, x0=-1.0, T=2.0)
    rep2 = weight_bounds_check(doubled, grid)
    np.testing.assert_allclose(rep2.c_dx, rep.c_dx, rtol=1e-10)
    np.testing.assert_allclose(rep2.c_dxt, rep.c_dxt, rtol=1e-10)

    # refinement stability in time within 1% between n_t=200 and n_t=400
    rep4 = weight_bounds_check(PARAMS, Grid(n_x=64, n_t=400, T=2.0))
    np.testing.assert_allclose(rep4.c_dx, rep.c_dx, rtol=1e-2)
    np.testing.assert_allclose(rep4.c_dxt, rep.c_dxt, rtol=1e-2)
    assert rep4.c_tt == pytest.approx(rep.c_tt, rel=1e-2)
