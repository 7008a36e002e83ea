import math

import numpy as np
import pytest

from hjbilateral.core import Grid, Params
from hjbilateral.kernels import build_kernel_table
from hjbilateral.observer import (
    ObserverState,
    boundary_injections,
    observer_boundary_slopes,
    observer_rhs,
)

TRAFFIC = Params(epsilon=0.25, a=1.0, b=1.0, c1=1.0, c2=1.0)


@pytest.fixture(scope="module")
def table():
    return build_kernel_table(Grid(41), TRAFFIC)


def test_zero_injection_with_exact_boundaries():
    g = Grid(41)
    inj = boundary_injections(0.5, 0.0, 0.5, 0.0, g.zeros(), TRAFFIC)
    assert inj == (0.0, 0.0)


def test_injection_values():
    g = Grid(41)
    inj0, inj1 = boundary_injections(0.55, 0.02, 0.5, 0.0, g.zeros(), TRAFFIC)
    # errors 0.05 and 0.02, weights exp(-4 * 0.5) and exp(-2 - 0)
    assert inj0 == pytest.approx(math.expm1(-0.2) * math.exp(-2.0), rel=1e-14)
    assert inj1 == pytest.approx(math.expm1(-0.08) * math.exp(-2.0), rel=1e-14)


def test_zero_estimate_zero_injection_is_equilibrium(table):
    st = ObserverState.from_table(Grid(41).zeros(), table)
    assert not np.any(observer_rhs(st, (0.0, 0.0), TRAFFIC).values)


def test_rhs_against_hand_rolled_differences(table):
    g = Grid(41)
    h = g.spacing
    v = g.sample(lambda x: 0.01 * np.cos(2 * x) + 0.003 * x)
    inj = (0.002, -0.001)
    V = (0.01, -0.02)
    st = ObserverState.from_table(v, table)
    got = observer_rhs(st, inj, TRAFFIC, V).values

    g0 = V[0] + table.p00 * inj[0]
    g1 = V[1] + table.p11 * inj[1]
    assert observer_boundary_slopes(st, inj, V) == pytest.approx((g0, g1))
    vv = v.values
    expected = np.empty(g.n)
    for j in range(g.n):
        left = vv[j - 1] if j > 0 else vv[1] - 2 * h * g0
        right = vv[j + 1] if j < g.n - 1 else vv[-2] + 2 * h * g1
        lap = (left - 2 * vv[j] + right) / h**2
        expected[j] = 0.25 * lap - 1.0 * vv[j] + table.p2[j] * inj[0] + table.p1[j] * inj[1]
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_with_estimate_keeps_gains(table):
    st = ObserverState.from_table(Grid(41).zeros(), table)
    st2 = st.with_estimate(Grid(41).constant(1.0))
    assert st2.p1 is st.p1 and st2.p00 == st.p00 and st2.v_hat[3] == 1.0
