import math

import numpy as np
import pytest

from carlab.jets import (
    Jet2,
    JetMismatchError,
    JetSingularityError,
    jet_add,
    jet_exp,
    jet_mul,
    jet_recip,
)

BASE = (0.3, 0.4)


def random_jet(rng, kx=8, kt=2, scale=0.5, base=BASE, complex_=False):
    c = rng.normal(size=(kx + 1, kt + 1)) * scale
    if complex_:
        c = c + 1j * rng.normal(size=(kx + 1, kt + 1)) * scale
    return Jet2(c, base)


def test_add_cancellation():
    x = Jet2.coordinate_x(BASE, 4, 1)
    s = (1 + x) + (1 - x)
    expect = Jet2.constant(2.0, 4, 1, BASE)
    np.testing.assert_allclose(s.coeffs, expect.coeffs)


def test_add_identity():
    rng = np.random.default_rng(1)
    a = random_jet(rng)
    z = Jet2.constant(0.0, 8, 2, BASE)
    np.testing.assert_array_equal(jet_add(a, z).coeffs, a.coeffs)


def test_add_matches_per_entry_derivatives():
    rng = np.random.default_rng(2)
    a, b = random_jet(rng), random_jet(rng)
    s = jet_add(a, b)
    for j in range(9):
        for k in range(3):
            assert s.derivative(j, k) == pytest.approx(
                a.derivative(j, k) + b.derivative(j, k)
            )


def test_mul_binomial():
    x = Jet2.coordinate_x((0.0, 0.0), 4, 0)
    p = (1 + x) * (1 + x)
    np.testing.assert_allclose(p.coeffs[:, 0], [1.0, 2.0, 1.0, 0.0, 0.0])


def test_mul_unit_identity():
    rng = np.random.default_rng(3)
    a = random_jet(rng)
    one = Jet2.constant(1.0, 8, 2, BASE)
    np.testing.assert_allclose(jet_mul(a, one).coeffs, a.coeffs)


def test_mul_product_rule():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a, b = random_jet(rng), random_jet(rng)
        p = jet_mul(a, b)
        lhs = p.derivative(1, 0)
        rhs = a.derivative(1, 0) * b.value + a.value * b.derivative(1, 0)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_mul_leibniz_all_orders():
    rng = np.random.default_rng(5)
    a, b = random_jet(rng, kx=5, kt=2), random_jet(rng, kx=5, kt=2)
    p = a * b
    for j in range(6):
        for k in range(3):
            conv = sum(
                math.comb(j, j1) * math.comb(k, k1)
                * a.derivative(j1, k1) * b.derivative(j - j1, k - k1)
                for j1 in range(j + 1)
                for k1 in range(k + 1)
            )
            assert p.derivative(j, k) == pytest.approx(conv, rel=1e-11, abs=1e-11)


def test_polynomial_coefficients_exact():
    # integer-coefficient polynomial of degree <= kx reproduced bit-for-bit
    x = Jet2.coordinate_x((0.0, 0.0), 6, 0)
    p = 3 + x * (x * (x * 5 + 2) + -7)  # 5x^3 + 2x^2 - 7x + 3
    assert p.coeffs[0, 0] == 3.0
    assert p.coeffs[1, 0] == -7.0
    assert p.coeffs[2, 0] == 2.0
    assert p.coeffs[3, 0] == 5.0
    assert np.all(p.coeffs[4:, 0] == 0.0)


def test_exp_of_zero():
    z = Jet2.constant(0.0, 8, 2, BASE)
    np.testing.assert_allclose(jet_exp(z).coeffs, Jet2.constant(1.0, 8, 2, BASE).coeffs)


def test_exp_group_law():
    rng = np.random.default_rng(6)
    for _ in range(10):
        a = random_jet(rng)
        p = jet_exp(a) * jet_exp(-a)
        dev = np.max(np.abs(p.coeffs - Jet2.constant(1.0, 8, 2, BASE).coeffs))
        assert dev <= 1e-12


def test_exp_finite_difference_oracle():
    # jet of 3*mu*psi at x=0.5 for mu=1, x0=-1; value e^{6.75}
    mu, x0, x = 1.0, -1.0, 0.5
    c = np.zeros((9, 3))
    c[0, 0] = 3 * mu * (x - x0) ** 2
    c[1, 0] = 3 * mu * 2 * (x - x0)
    c[2, 0] = 3 * mu
    j = jet_exp(Jet2(c, (1.0, x)))
    f = lambda s: math.exp(3 * mu * (s - x0) ** 2)
    assert j.value == pytest.approx(math.exp(6.75), rel=1e-14)
    h = 1e-5
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
    assert j.derivative(1, 0) == pytest.approx(d1, rel=1e-8)
    assert j.derivative(2, 0) == pytest.approx(d2, rel=1e-6)


def test_recip_unit():
    one = Jet2.constant(1.0, 8, 2, BASE)
    np.testing.assert_allclose(jet_recip(one).coeffs, one.coeffs)


def test_recip_time_factor_symmetry():
    # 1/(t(T-t)) at t=1, T=2: value 1, first t-derivative 0 by symmetry
    c = np.zeros((1, 3))
    c[0, 0], c[0, 1], c[0, 2] = 1.0, 0.0, -1.0  # t(T-t) Taylor at midpoint
    r = jet_recip(Jet2(c, (1.0, 0.0)))
    assert r.value == pytest.approx(1.0)
    assert r.derivative(0, 1) == pytest.approx(0.0, abs=1e-15)


def test_recip_self_consistency():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = random_jet(rng)
        a.coeffs[0, 0] = 0.1 + abs(a.coeffs[0, 0])
        p = a * jet_recip(a)
        dev = np.max(np.abs(p.coeffs - Jet2.constant(1.0, 8, 2, BASE).coeffs))
        assert dev <= 1e-12


def test_recip_zero_value_raises():
    a = Jet2.constant(0.0, 3, 1, BASE)
    with pytest.raises(JetSingularityError):
        jet_recip(a)


def test_order_mismatch_raises():
    a = Jet2.constant(1.0, 3, 1, BASE)
    b = Jet2.constant(1.0, 4, 1, BASE)
    with pytest.raises(JetMismatchError):
        jet_add(a, b)
    with pytest.raises(JetMismatchError):
        jet_mul(a, b)


def test_base_point_mismatch_raises():
    a = Jet2.constant(1.0, 3, 1, (0.0, 0.0))
    b = Jet2.constant(1.0, 3, 1, (0.0, 0.5))
    with pytest.raises(JetMismatchError):
        jet_add(a, b)


def test_dx_dt_shift():
    rng = np.random.default_rng(8)
    a = random_jet(rng, kx=6, kt=2)
    ax = a.dx()
    at = a.dt()
    for j in range(6):
        for k in range(3):
            assert ax.derivative(j, k) == pytest.approx(a.derivative(j + 1, k))
    for j in range(7):
        for k in range(2):
            assert at.derivative(j, k) == pytest.approx(a.derivative(j, k + 1))


def test_complex_jets_and_conj():
    rng = np.random.default_rng(9)
    a = random_jet(rng, complex_=True)
    b = random_jet(rng, complex_=True)
    p = a * b
    q = a.conj() * b.conj()
    np.testing.assert_allclose(p.conj().coeffs, q.coeffs, rtol=1e-13)
