import csv

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from hjbilateral.core import Field, Grid, Params
from hjbilateral.exceptions import DomainError
from hjbilateral.kernels import (
    apply_control_transform,
    apply_inverse_control_transform,
    bessel_I0,
    bessel_I1,
    bessel_J0,
    bessel_J1,
    build_kernel_table,
    control_kernel_k,
    control_kernel_k_x,
    inverse_kernel_l,
    kernel_pde_residual,
    observer_kernel_P,
    observer_kernel_P_xi,
    phi,
    unilateral_kernel,
    unilateral_kernel_x,
)
from hjbilateral.verify import backstepping_roundtrip, observed_orders, observer_roundtrip

# k(1, 1/2) at c1 = 1, eps = 1/4 reduces to -I1(1); value from mpmath.besseli(1, 1)
K_1_HALF = -0.565159103992485


def test_bessel_examples():
    assert bessel_I1(1.0) == pytest.approx(0.56515910, abs=1e-8)
    assert bessel_J1(1.0) == pytest.approx(0.44005059, abs=1e-8)
    assert float(mpmath.besseli(1, 1)) == pytest.approx(-K_1_HALF, rel=1e-15)


@pytest.mark.parametrize("s", [0.0, 1e-9, 0.3, 2.0, 7.9, 8.1, 15.0, 30.0, 50.0, -4.0])
def test_bessel_against_scipy(s):
    assert bessel_I1(s) == pytest.approx(special.iv(1, s), rel=1e-13, abs=1e-300)
    assert bessel_I0(s) == pytest.approx(special.iv(0, s), rel=1e-13)
    assert bessel_J1(s) == pytest.approx(special.jv(1, s), rel=1e-10, abs=1e-13)
    assert bessel_J0(s) == pytest.approx(special.jv(0, s), rel=1e-10, abs=1e-13)


def test_bessel_range_is_enforced():
    with pytest.raises(DomainError):
        bessel_I1(50.5)


def test_phi_series_identities():
    # Phi_1(q) = 2 I1(sqrt q)/sqrt q for q > 0 and 2 J1(sqrt -q)/sqrt -q for q < 0
    assert phi(4.0, 1) == pytest.approx(special.iv(1, 2.0), rel=1e-14)
    assert phi(-4.0, 1) == pytest.approx(special.jv(1, 2.0), rel=1e-14)
    assert phi(0.0, 1) == 1.0 and phi(0.0, 2) == 0.5


def test_golden_kernel_value():
    assert control_kernel_k(1.0, 0.5, 1.0, 0.25) == pytest.approx(K_1_HALF, abs=1e-14)


def test_observer_kernel_examples():
    assert observer_kernel_P(0.0, 0.0, 1.0, 0.25) == pytest.approx(1.0, abs=1e-15)
    t = build_kernel_table(Grid(41), Params(epsilon=0.25, a=1.0, b=1.0, c1=1.0, c2=1.0))
    assert t.p00 == -1.0 and t.p11 == 1.0
    assert t.k_diag0 == 1.0 and t.k_diag1 == -1.0
    assert t.k1_diag1 == -2.0


xs = st.floats(0.0, 1.0)
rates = st.floats(0.0, 5.0)
eps_s = st.floats(0.05, 2.0)


@settings(max_examples=100, deadline=None)
@given(xs, rates, eps_s)
def test_antidiagonal_vanishes(x, c, eps):
    assert abs(control_kernel_k(x, 1.0 - x, c, eps)) <= 1e-14
    assert abs(inverse_kernel_l(x, 1.0 - x, c, eps)) <= 1e-14
    assert abs(observer_kernel_P(1.0 - x, x, c, eps)) <= 1e-14


@settings(max_examples=100, deadline=None)
@given(xs, rates, eps_s)
def test_diagonal_law(x, c, eps):
    target = -c / (2 * eps) * (x - 0.5)
    assert control_kernel_k(x, x, c, eps) == pytest.approx(target, abs=1e-12)
    assert inverse_kernel_l(x, x, c, eps) == pytest.approx(target, abs=1e-12)
    assert observer_kernel_P(x, x, c, eps) == pytest.approx(target, abs=1e-12)


def test_domains_are_enforced():
    with pytest.raises(DomainError):
        control_kernel_k(0.5, 0.9, 1.0, 0.25)
    with pytest.raises(DomainError):
        observer_kernel_P(0.9, 0.5, 1.0, 0.25)
    with pytest.raises(DomainError):
        unilateral_kernel(0.3, 0.6, 1.0, 0.25)


def test_unilateral_kernel_diagonal():
    for c in (0.5, 1.0, 3.0):
        assert unilateral_kernel(1.0, 1.0, c, 0.25) == pytest.approx(-c / (2 * 0.25), rel=1e-14)


def test_zero_rate_gives_zero_kernels():
    t = build_kernel_table(Grid(21), Params(epsilon=0.25, a=1.0, b=1.0))
    for arr in (t.k_row0, t.k_row1, t.p1.values, t.p2.values, t.k1_row1):
        assert not np.any(arr)
    assert t.k_diag0 == t.k_diag1 == t.p00 == t.p11 == 0.0


def test_small_rate_direct_and_inverse_kernels_agree_to_second_order():
    x = np.linspace(0, 1, 41)
    pts = [(a, b) for a in x for b in x if abs(b - 0.5) <= abs(a - 0.5)]

    def gap(c):
        return max(abs(control_kernel_k(a, b, c, 0.25) - inverse_kernel_l(a, b, c, 0.25)) for a, b in pts)

    ratio = gap(0.02) / gap(0.01)
    assert 3.8 <= ratio <= 4.2


def _fd(f, h=1e-6):
    return (f(h) - f(-h)) / (2 * h)


@pytest.mark.parametrize("xi", [0.1, 0.3, 0.5, 0.8])
def test_kernel_derivatives_against_finite_differences(xi):
    c, eps = 1.3, 0.25
    for x in (0.02, 0.98):
        if abs(xi - 0.5) < abs(x - 0.5):
            fd = _fd(lambda h: control_kernel_k(x + h, xi, c, eps))
            assert control_kernel_k_x(x, xi, c, eps) == pytest.approx(fd, abs=1e-7)
            fd = _fd(lambda h: observer_kernel_P(xi, x + h, c, eps))
            assert observer_kernel_P_xi(xi, x, c, eps) == pytest.approx(fd, abs=1e-7)
    fd = _fd(lambda h: unilateral_kernel(0.9 + h, xi * 0.8, c, eps))
    assert unilateral_kernel_x(0.9, xi * 0.8, c, eps) == pytest.approx(fd, abs=1e-7)


def test_table_gains_match_kernel_derivatives():
    g = Grid(11)
    eps = 0.25
    t = build_kernel_table(g, Params(epsilon=eps, a=1.0, b=1.0, c1=1.0, c2=1.5))
    for j, x in enumerate(g.nodes):
        assert t.p2[j] == pytest.approx(-eps * observer_kernel_P_xi(x, 0.0, 1.5, eps), abs=1e-14)
        assert t.p1[j] == pytest.approx(-eps * observer_kernel_P_xi(x, 1.0, 1.5, eps), abs=1e-14)
        assert t.k_row1[j] == pytest.approx(control_kernel_k_x(1.0, x, 1.0, eps), abs=1e-14)


@pytest.mark.parametrize("which", ["control", "observer"])
def test_kernel_pde_residual(which):
    res = kernel_pde_residual(which, 1.0, 0.25, 41)
    assert res.max_residual <= 1e-3
    assert res.antidiagonal_error <= 1e-14
    assert res.diagonal_error <= 1e-12
    assert res.passed()


def test_kernel_pde_residual_detects_a_wrong_kernel():
    assert not kernel_pde_residual("control", 1.0, 0.25, 41, kernel_c=1.1).passed()


def test_transform_roundtrips_and_orders():
    ns = (101, 201, 401)
    ec, eo = [], []
    for n in ns:
        x = Grid(n).nodes
        ec.append(backstepping_roundtrip(Field(Grid(n), 1 + np.sin(2 * np.pi * x)), 1.0, 0.25))
        eo.append(observer_roundtrip(Field(Grid(n), np.cos(2 * np.pi * (x - 0.5))), 1.0, 0.25))
    assert ec[-1] <= 1e-6 and eo[-1] <= 1e-6
    assert np.all(observed_orders(ns, ec) >= 3.5)
    assert np.all(observed_orders(ns, eo) >= 3.5)


def test_apply_transform_pair():
    g = Grid(201)
    v = g.sample(lambda x: x**2 - 0.3)
    back = apply_inverse_control_transform(apply_control_transform(v, 2.0, 0.5), 2.0, 0.5)
    np.testing.assert_allclose(back.values, v.values, atol=1e-8)


def test_table_csv(tmp_path):
    t = build_kernel_table(Grid(5), Params(epsilon=0.25, a=1.0, b=1.0, c1=1.0, c2=1.0))
    path = tmp_path / "kernels.csv"
    t.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "xi", "k", "l", "P"]
    assert len(rows) == 26
    # x = 1/2 only reaches xi = 1/2 in the control domain
    mid = [r for r in rows[1:] if r[0] == "0.5"]
    assert [r[2] != "" for r in mid] == [False, False, True, False, False]
    assert float(rows[1][4]) == pytest.approx(1.0, abs=1e-15)
