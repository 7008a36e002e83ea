"""Flatness-based trajectory generation with Gevrey power series.

A reference for the nonlinear plant is produced in three stages: the desired
outputs ``u(x0, t)`` and ``u_x(x0, t)`` are lifted through the exponential
transform, a power series in ``x - x0`` solves the linear heat-type motion
planning problem, and the logarithmic inverse returns the reference state
and the two feedforward boundary inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Field, Grid, Params, Signal
from .exceptions import ReferenceInfeasibleError, TruncationError
from .transforms import EXPONENT_LIMIT, FEASIBILITY_MARGIN

DEFAULT_TERM_TOL = 1e-12


def gevrey_signal_sine(d: float) -> Signal:
    """``d sin(t)``."""
    d = float(d)
    return Signal(lambda n, t: d * np.sin(t + n * np.pi / 2), name=f"sine({d:g})")


def gevrey_signal_ramp(slope: float) -> Signal:
    """``slope * t``."""
    slope = float(slope)

    def deriv(n, t):
        if n == 0:
            return slope * t
        return np.full_like(t, slope if n == 1 else 0.0)

    return Signal(deriv, name=f"ramp({slope:g})")


def gevrey_signal_const(c: float) -> Signal:
    c = float(c)
    return Signal(lambda n, t: np.full_like(t, c if n == 0 else 0.0), name=f"const({c:g})")


@dataclass(frozen=True)
class ReferencePlan:
    """Desired outputs at the location ``x0`` and the series truncation policy."""

    x0: float
    y1: Signal
    y2: Signal
    K: int = 30
    term_tol: float = DEFAULT_TERM_TOL

    def __post_init__(self):
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError(f"x0 must lie in [0, 1], got {self.x0}")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.term_tol > 0:
            raise ValueError("term_tol must be positive")


def sine_plan(d: float = 0.25, x0: float = 0.5, K: int = 20, term_tol: float = DEFAULT_TERM_TOL):
    """Outputs ``u(x0, t) = 0`` and ``u_x(x0, t) = d sin(t)``."""
    return ReferencePlan(x0, gevrey_signal_const(0.0), gevrey_signal_sine(d), K, term_tol)


def traffic_plan(K: int = 30, term_tol: float = DEFAULT_TERM_TOL):
    """Outlet outputs ``u(1, t) = t / 4`` and ``u_x(1, t) = -1/2`` (capacity flow)."""
    return ReferencePlan(1.0, gevrey_signal_ramp(0.25), gevrey_signal_const(-0.5), K, term_tol)


def output_lift(y1, y2, p: Params, x0: float):
    """Values of the lifted outputs for the linear motion planning problem."""
    e = math.exp(-p.drift * x0)
    exponent = -p.ratio * np.asarray(y1, dtype=float)
    if np.any(np.abs(exponent) > EXPONENT_LIMIT):
        raise ReferenceInfeasibleError("output_lift: exponent overflow")
    em1 = np.expm1(exponent)
    y1v = e * em1
    y2v = e * (-p.ratio * (em1 + 1.0) * y2 - p.drift * em1)
    return y1v, y2v


@lru_cache(maxsize=None)
def _binomials(n_max: int) -> np.ndarray:
    """Pascal triangle ``C[n, k]`` as floats, zero above the diagonal."""
    table = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for k in range(n + 1):
            table[n, k] = math.comb(n, k)
    table.setflags(write=False)
    return table


def exp_derivatives(f_derivs: np.ndarray) -> np.ndarray:
    """Derivatives ``0..N`` of ``exp(f)`` from those of ``f``.

    Uses ``g' = f' g`` and Leibniz: ``g^(n) = sum_i C(n-1, i) f^(i+1) g^(n-1-i)``.
    """
    f_derivs = np.asarray(f_derivs, dtype=float)
    n_max = f_derivs.shape[0] - 1
    C = _binomials(max(n_max, 1))
    g = np.empty_like(f_derivs)
    g[0] = np.exp(f_derivs[0])
    for n in range(1, n_max + 1):
        prod = f_derivs[1 : n + 1] * g[n - 1 :: -1][:n]
        g[n] = C[n - 1, :n] @ prod if prod.ndim == 1 else np.tensordot(C[n - 1, :n], prod, axes=1)
    return g


def leibniz_product(f_derivs: np.ndarray, g_derivs: np.ndarray) -> np.ndarray:
    """Derivatives ``0..N`` of ``f g`` from those of the factors."""
    f_derivs = np.asarray(f_derivs, dtype=float)
    g_derivs = np.asarray(g_derivs, dtype=float)
    n_max = f_derivs.shape[0] - 1
    C = _binomials(n_max)
    n_idx = np.arange(n_max + 1)
    lag = n_idx[:, None] - n_idx[None, :]
    # G[n, i] = g^(n - i) on and below the diagonal; C vanishes above it
    G = g_derivs[np.clip(lag, 0, None)]
    return np.einsum("ni,ni...->n...", C, f_derivs[None, :] * G)


def lifted_output_derivatives(plan: ReferencePlan, p: Params, t, n_max: int):
    """Derivative stacks ``0..n_max`` of both lifted outputs at time(s) ``t``."""
    f = -p.ratio * plan.y1.derivatives(n_max, t)
    if np.any(np.abs(f[0]) > EXPONENT_LIMIT):
        raise ReferenceInfeasibleError("lifted output exponent overflow", time=None)
    E = exp_derivatives(f)
    em1 = E.copy()
    em1[0] = np.expm1(f[0])
    w = math.exp(-p.drift * plan.x0)
    y1v = w * em1
    y2v = w * (-p.ratio * leibniz_product(E, plan.y2.derivatives(n_max, t)) - p.drift * em1)
    return y1v, y2v


def series_reference(plan: ReferencePlan, p: Params, t: float, grid: Grid, check: bool = True):
    """Truncated power series for the linear reference and its x-derivative.

    The k-th term combines ``(x - x0)^(2k) / (2k)!`` and
    ``(x - x0)^(2k+1) / (2k+1)!`` with binomially weighted time
    derivatives of the lifted outputs.  Summation stops once two consecutive
    terms fall below ``plan.term_tol`` on the grid (a single vanishing term
    is not enough: odd or even time derivatives can vanish at isolated
    instants); reaching ``plan.K`` without that happening raises
    :class:`TruncationError`.  With
    ``check=False`` all ``K + 1`` terms are summed and no error is raised,
    which is useful for truncation studies.
    """
    t = float(t)
    K = plan.K
    Y1, Y2 = lifted_output_derivatives(plan, p, t, K)
    beta = p.decay
    eps = p.epsilon
    s = grid.nodes - plan.x0

    k = np.arange(K + 1)
    C = _binomials(K)
    lag = np.clip(k[:, None] - k[None, :], 0, None)
    weights = C * beta**lag / eps ** k[:, None]  # lower triangular (C vanishes above)
    A = weights @ Y1
    B = weights @ Y2

    # even[k] = s^(2k)/(2k)!, odd[k] = s^(2k+1)/(2k+1)!, built by cumulative products
    s2 = s * s
    ratio_even = np.ones((K + 1, grid.n))
    ratio_even[1:] = s2 / ((2 * k[1:, None] - 1) * (2 * k[1:, None]))
    even = np.cumprod(ratio_even, axis=0)
    ratio_odd = np.empty((K + 1, grid.n))
    ratio_odd[0] = s
    ratio_odd[1:] = s2 / ((2 * k[1:, None]) * (2 * k[1:, None] + 1))
    odd = np.cumprod(ratio_odd, axis=0)
    # derivative of the even power is the previous odd power
    odd_prev = np.vstack([np.zeros(grid.n), odd[:-1]])

    terms = A[:, None] * even + B[:, None] * odd
    size = np.max(np.abs(terms), axis=1)
    small = size < plan.term_tol
    stop = np.flatnonzero(small[1:] & small[:-1])
    if not check:
        last_k = K
    elif stop.size:
        last_k = int(stop[0]) + 1
    else:
        raise TruncationError(
            f"series term {K} has magnitude {size[-1]:.3g} >= {plan.term_tol:.3g}",
            last_term=float(size[-1]),
        )
    sl = slice(0, last_k + 1)
    vr = terms[sl].sum(axis=0)
    vr_x = (A[sl, None] * odd_prev[sl] + B[sl, None] * even[sl]).sum(axis=0)
    return Field(grid, vr), Field(grid, vr_x)


def reference_profile(vr: Field, vr_x: Field, p: Params, t: float | None = None):
    """Map a linear reference to ``(u_ref, U0_ref, U1_ref)``."""
    x = vr.grid.nodes
    d = p.drift
    weight = np.exp(d * x)
    arg = weight * vr.values + 1.0
    if np.min(arg) < FEASIBILITY_MARGIN:
        i = int(np.argmin(arg))
        raise ReferenceInfeasibleError(
            f"reference infeasible: log argument {arg[i]:.3g} at node {i}", time=t
        )
    ur = -np.log1p(weight * vr.values) / p.ratio
    den0 = 1.0 + vr.values[0]
    den1 = 1.0 + math.exp(d) * vr.values[-1]
    if abs(den0) < FEASIBILITY_MARGIN or abs(den1) < FEASIBILITY_MARGIN:
        raise ReferenceInfeasibleError("reference infeasible: vanishing input denominator", time=t)
    U0r = -(vr_x.values[0] + d * vr.values[0]) / (p.ratio * den0)
    U1r = -math.exp(d) * (vr_x.values[-1] + d * vr.values[-1]) / (p.ratio * den1)
    return Field(vr.grid, ur), float(U0r), float(U1r)


def reference_slope(vr: Field, vr_x: Field, p: Params) -> Field:
    """x-derivative of the reference state."""
    weight = np.exp(p.drift * vr.grid.nodes)
    num = weight * (vr_x.values + p.drift * vr.values)
    return vr.with_values(-num / (p.ratio * (weight * vr.values + 1.0)))


@dataclass(frozen=True)
class ReferenceState:
    t: float
    vr: Field
    vr_x: Field
    ur: Field
    U0r: float
    U1r: float


def reference_state(plan: ReferencePlan, p: Params, grid: Grid, t: float) -> ReferenceState:
    vr, vr_x = series_reference(plan, p, t, grid)
    ur, U0r, U1r = reference_profile(vr, vr_x, p, t)
    return ReferenceState(float(t), vr, vr_x, ur, U0r, U1r)


def smallness_margin(plan: ReferencePlan, p: Params, grid: Grid, times) -> float:
    """``exp(-|ab/2eps|) - sup |v_ref|`` over the grid and the sampled times.

    A positive value means the sampled reference stays inside the region
    where the logarithmic inverse and the input denominators are well posed.
    """
    peak = 0.0
    for t in np.atleast_1d(times):
        vr, _ = series_reference(plan, p, float(t), grid)
        peak = max(peak, float(np.max(np.abs(vr.values))))
    return math.exp(-abs(p.drift)) - peak


# Closed forms used as independent oracles ---------------------------------


def sine_reference_closed_form(d: float, eps: float, x0: float, t: float, grid: Grid) -> Field:
    """Linear reference for ``a = -1, b = 0`` and outputs ``(0, d sin t)``."""
    r = math.sqrt(2.0 * eps)
    s = (grid.nodes - x0) / r
    c = d / (2.0 * math.sqrt(eps))
    values = c * np.exp(s) * np.sin(t + s - np.pi / 4) - c * np.exp(-s) * np.sin(t - s - np.pi / 4)
    return Field(grid, values)


def sine_inputs_closed_form(d: float, eps: float, x0: float, t: float):
    """Feedforward inputs ``(U0_ref, U1_ref)`` of the sine family in closed form."""
    r = math.sqrt(2.0 * eps)
    g = sine_reference_closed_form(d, eps, x0, t, Grid(3)).values
    g0, g1 = g[0], g[-1]
    U0 = d / 2 * (math.exp(-x0 / r) * math.sin(t - x0 / r) + math.exp(x0 / r) * math.sin(t + x0 / r))
    U1 = d / 2 * (
        math.exp((1 - x0) / r) * math.sin(t + (1 - x0) / r)
        + math.exp((x0 - 1) / r) * math.sin(t + (x0 - 1) / r)
    )
    return U0 / (1 + g0), U1 / (1 + g1)


def traffic_reference_closed_form(eps: float, t: float, grid: Grid) -> Field:
    """Linear reference of the capacity-flow problem for ``a = b = 1``."""
    c = 1.0 / (2.0 * eps)
    return Field(grid, math.exp(-c) * (np.exp(-t / (4.0 * eps)) - np.exp(c * (1.0 - grid.nodes))))


__all__ = [
    "ReferencePlan",
    "ReferenceState",
    "exp_derivatives",
    "gevrey_signal_const",
    "gevrey_signal_ramp",
    "gevrey_signal_sine",
    "leibniz_product",
    "lifted_output_derivatives",
    "output_lift",
    "reference_profile",
    "reference_slope",
    "reference_state",
    "series_reference",
    "sine_inputs_closed_form",
    "sine_plan",
    "sine_reference_closed_form",
    "smallness_margin",
    "traffic_plan",
    "traffic_reference_closed_form",
]
