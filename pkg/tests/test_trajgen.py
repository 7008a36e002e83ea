import math

import numpy as np
import pytest

from hjbilateral.core import Field, Grid, Params
from hjbilateral.exceptions import ReferenceInfeasibleError, TruncationError
from hjbilateral.trajgen import (
    exp_derivatives,
    gevrey_signal_ramp,
    gevrey_signal_sine,
    leibniz_product,
    output_lift,
    reference_profile,
    reference_slope,
    reference_state,
    series_reference,
    sine_inputs_closed_form,
    sine_plan,
    sine_reference_closed_form,
    smallness_margin,
    traffic_plan,
    traffic_reference_closed_form,
)

SINE = Params(epsilon=0.5, a=-1.0, b=0.0)
TRAFFIC = Params(epsilon=0.25, a=1.0, b=1.0)


def test_signal_derivatives():
    s = gevrey_signal_sine(0.25)
    t = np.linspace(0, 3, 7)
    np.testing.assert_allclose(s.derivative(1, t), 0.25 * np.cos(t), atol=1e-15)
    np.testing.assert_allclose(s.derivative(4, t), s(t), atol=1e-15)
    r = gevrey_signal_ramp(0.25)
    assert r(4.0) == 1.0 and r.derivative(1, 4.0) == 0.25 and r.derivative(2, 4.0) == 0.0
    with pytest.raises(ValueError):
        s.derivative(-1, 0.0)


def test_signal_is_continuous_on_dense_sampling():
    t = np.linspace(0, 2 * np.pi, 20001)
    y = gevrey_signal_sine(0.25)(t)
    assert np.max(np.abs(np.diff(y))) <= 0.25 * (t[1] - t[0]) * 1.0001


def test_exp_derivatives_of_linear_exponent():
    # d^n/dt^n exp(2t) = 2^n exp(2t)
    t = 0.3
    f = np.array([2 * t, 2.0, 0.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(exp_derivatives(f), 2.0 ** np.arange(6) * math.exp(2 * t), rtol=1e-14)


def test_leibniz_product_matches_direct_derivatives():
    # (sin t)(t^2): third derivative = -cos t t^2 - 6 t sin t + 6 cos t
    t = 0.7
    f = np.array([math.sin(t), math.cos(t), -math.sin(t), -math.cos(t)])
    g = np.array([t * t, 2 * t, 2.0, 0.0])
    h = leibniz_product(f, g)
    expected = -math.cos(t) * t * t - 6 * t * math.sin(t) + 6 * math.cos(t)
    assert h[3] == pytest.approx(expected, rel=1e-14)


def test_output_lift_traffic_values():
    for t in (0.0, 1.0, 3.0):
        y1v, y2v = output_lift(t / 4, -0.5, TRAFFIC, 1.0)
        assert y1v == pytest.approx(math.exp(-2) * (math.exp(-t) - 1), abs=1e-15)
        assert y2v == pytest.approx(2 * math.exp(-2), rel=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.9, 2.5, 5.0])
def test_sine_series_matches_closed_form(t):
    g = Grid(201)
    vr, _ = series_reference(sine_plan(), SINE, t, g)
    ref = sine_reference_closed_form(0.25, 0.5, 0.5, t, g)
    assert np.max(np.abs(vr.values - ref.values)) <= 1e-8


@pytest.mark.parametrize("t", [0.0, 1.5, 4.0, 8.0])
def test_traffic_series_matches_closed_form(t):
    g = Grid(201)
    vr, _ = series_reference(traffic_plan(), TRAFFIC, t, g)
    ref = traffic_reference_closed_form(0.25, t, g)
    assert np.max(np.abs(vr.values - ref.values)) <= 1e-8


def test_traffic_reference_profile_is_capacity_flow():
    g = Grid(201)
    st = reference_state(traffic_plan(), TRAFFIC, g, 2.0)
    np.testing.assert_allclose(st.ur.values, 0.5 + (1 - g.nodes) / 2, atol=1e-10)
    assert st.U0r == pytest.approx(-0.5, abs=1e-10)
    assert st.U1r == pytest.approx(-0.5, abs=1e-10)
    np.testing.assert_allclose(reference_slope(st.vr, st.vr_x, TRAFFIC).values, -0.5, atol=1e-9)


@pytest.mark.parametrize("t", [0.0, 1.0, 2.2])
def test_sine_inputs_match_closed_form(t):
    st = reference_state(sine_plan(), SINE, Grid(201), t)
    U0, U1 = sine_inputs_closed_form(0.25, 0.5, 0.5, t)
    assert st.U0r == pytest.approx(U0, abs=1e-10)
    assert st.U1r == pytest.approx(U1, abs=1e-10)


@pytest.mark.parametrize("t", [0.3, 1.7])
def test_series_interpolates_the_lifted_outputs(t):
    g = Grid(201)
    plan = sine_plan()
    vr, vr_x = series_reference(plan, SINE, t, g)
    y1v, y2v = output_lift(plan.y1(t), plan.y2(t), SINE, plan.x0)
    assert vr[100] == pytest.approx(y1v, abs=1e-14)
    assert vr_x[100] == pytest.approx(y2v, abs=1e-14)


@pytest.mark.parametrize("plan,p", [(sine_plan(), SINE), (traffic_plan(), TRAFFIC)])
def test_series_satisfies_the_linear_pde(plan, p):
    g = Grid(401)
    h, dt, t = g.spacing, 1e-3, 1.3
    v = {k: series_reference(plan, p, t + k * dt, g)[0].values for k in (-2, -1, 0, 1, 2)}
    v_t = (v[-2] - 8 * v[-1] + 8 * v[1] - v[2]) / (12 * dt)
    u = v[0]
    v_xx = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h * h)
    residual = v_t[2:-2] - p.epsilon * v_xx + p.decay * u[2:-2]
    assert np.max(np.abs(residual)) <= 1e-6


def test_truncation_mismatch_is_monotone_in_K():
    g = Grid(101)
    t = 1.1
    ref = sine_reference_closed_form(0.25, 0.5, 0.5, t, g).values
    errs = []
    for K in range(1, 13):
        vr, _ = series_reference(sine_plan(K=K), SINE, t, g, check=False)
        errs.append(np.max(np.abs(vr.values - ref)))
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-12


def test_truncation_error_reports_last_term():
    with pytest.raises(TruncationError) as info:
        series_reference(sine_plan(K=2), SINE, 1.0, Grid(51))
    assert info.value.last_term > 1e-12
    # at t = 0 the last kept term vanishes identically; that alone must not
    # be mistaken for convergence
    with pytest.raises(TruncationError):
        series_reference(sine_plan(K=2), SINE, 0.0, Grid(51))


def test_reference_profile_rejects_infeasible_reference():
    g = Grid(11)
    with pytest.raises(ReferenceInfeasibleError) as info:
        reference_profile(g.constant(-1.5), g.zeros(), SINE, t=3.0)
    assert info.value.time == 3.0


def test_smallness_margin_signs():
    g = Grid(101)
    times = np.linspace(0, 8, 17)
    assert smallness_margin(sine_plan(), SINE, g, np.linspace(0, 20, 41)) > 0.7
    # the traffic reference grows without bound in the linear variables
    assert smallness_margin(traffic_plan(), TRAFFIC, g, times) < 0


def test_zero_outputs_give_zero_reference():
    plan = sine_plan(d=0.0)
    st = reference_state(plan, SINE, Grid(21), 1.0)
    assert not np.any(st.ur.values) and st.U0r == 0.0 and st.U1r == 0.0
    assert isinstance(st.vr, Field)
