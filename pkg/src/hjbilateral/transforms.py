"""Feedback-linearizing exponential transforms and their inverses.

The forward maps are exponential, the inverses logarithmic.  All maps act
samplewise on a shared grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, Params, check_same_grid
from .exceptions import FeasibilityError, OverflowGuardError

EXPONENT_LIMIT = 700.0
# ln arguments below this are treated as infeasible
FEASIBILITY_MARGIN = 1e-8


def _guard(exponent: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(np.abs(exponent) > EXPONENT_LIMIT)
    if bad.size:
        i = int(bad[0])
        raise OverflowGuardError(
            f"{what}: exponent {exponent[i]:.4g} at node {i} exceeds {EXPONENT_LIMIT}",
            index=i,
            exponent=float(exponent[i]),
        )


def _check_log_argument(arg: np.ndarray, what: str) -> None:
    i = int(np.argmin(arg))
    if arg[i] < FEASIBILITY_MARGIN:
        raise FeasibilityError(
            f"{what}: logarithm argument {arg[i]:.4g} at node {i} is outside the feasible region",
            minimum=float(arg[i]),
            index=i,
        )


def hopf_cole_forward(u: Field, p: Params) -> Field:
    """``exp(-(a/eps) u) - 1``."""
    exponent = -p.ratio * u.values
    _guard(exponent, "hopf_cole_forward")
    return u.with_values(np.expm1(exponent))


def hopf_cole_inverse(vbar: Field, p: Params) -> Field:
    """``-(eps/a) ln(vbar + 1)``; raises :class:`FeasibilityError` if ``vbar <= -1``."""
    _check_log_argument(vbar.values + 1.0, "hopf_cole_inverse")
    return vbar.with_values(-np.log1p(vbar.values) / p.ratio)


def spatial_weight(vbar: Field, p: Params, sign: str = "forward") -> Field:
    """Multiply by ``exp(-(ab/2eps) x)`` (forward) or its reciprocal (inverse)."""
    if sign not in ("forward", "inverse"):
        raise ValueError("sign must be 'forward' or 'inverse'")
    s = -1.0 if sign == "forward" else 1.0
    exponent = s * p.drift * vbar.grid.nodes
    _guard(exponent, "spatial_weight")
    return vbar.with_values(vbar.values * np.exp(exponent))


def error_weight_exponent(u_ref: Field, p: Params) -> np.ndarray:
    """Exponent of the weight ``exp(-(ab/2eps) x - (a/eps) u_ref)``."""
    return -p.drift * u_ref.grid.nodes - p.ratio * u_ref.values


def error_transform(u_tilde: Field, u_ref: Field, p: Params) -> Field:
    """Map a tracking error to the state of the linear error system."""
    check_same_grid(u_tilde, u_ref)
    inner = -p.ratio * u_tilde.values
    outer = error_weight_exponent(u_ref, p)
    _guard(inner, "error_transform")
    _guard(outer, "error_transform")
    return u_tilde.with_values(np.expm1(inner) * np.exp(outer))


def error_inverse(v_tilde: Field, u_ref: Field, p: Params) -> Field:
    """Inverse of :func:`error_transform`."""
    check_same_grid(v_tilde, u_ref)
    outer = -error_weight_exponent(u_ref, p)
    _guard(outer, "error_inverse")
    scaled = v_tilde.values * np.exp(outer)
    _check_log_argument(scaled + 1.0, "error_inverse")
    return v_tilde.with_values(-np.log1p(scaled) / p.ratio)


@dataclass(frozen=True)
class LinearizationResidual:
    residual: float
    truncation: float

    @property
    def ratio(self) -> float:
        if self.truncation == 0.0:
            return 0.0 if self.residual == 0.0 else np.inf
        return self.residual / self.truncation


def linearization_residual(
    u_prev: Field, u_curr: Field, u_next: Field, dt: float, p: Params
) -> LinearizationResidual:
    """Residual of the linear PDE satisfied by the Hopf-Cole image of a simulated state.

    The three states are consecutive time levels of a semi-implicit run.  The
    residual ``v_t - eps v_xx + (a^2 b^2 / 4 eps) v`` of
    ``v = spatial_weight(hopf_cole_forward(u))`` is measured at the newest
    level with the solver's own differences, on nodes at least two spacings
    from the boundary.  ``truncation`` is the leading-order local
    truncation error of the scheme, estimated from the same data and mapped
    through the transform by the chain rule.
    """
    grid = check_same_grid(u_prev, u_curr, u_next)
    h = grid.spacing
    eps, a, b = p.epsilon, p.a, p.b
    sl = slice(2, grid.n - 2)

    def d1(y):
        return (y[3:-1] - y[1:-3]) / (2 * h)

    def d2(y):
        return (y[3:-1] - 2 * y[2:-2] + y[1:-3]) / h**2

    def d3(y):
        return (y[4:] - 2 * y[3:-1] + 2 * y[1:-3] - y[:-4]) / (2 * h**3)

    def d4(y):
        return (y[4:] - 4 * y[3:-1] + 6 * y[2:-2] - 4 * y[1:-3] + y[:-4]) / h**4

    um, u0, u1 = u_prev.values, u_curr.values, u_next.values
    weight = np.exp(-p.drift * grid.nodes)
    v = [np.expm1(-p.ratio * y) * weight for y in (um, u0, u1)]
    residual = (v[2][sl] - v[1][sl]) / dt - eps * d2(v[2]) + p.decay * v[2][sl]

    ux = d1(u1)
    utt = (u1[sl] - 2 * u0[sl] + um[sl]) / dt**2
    uxt = (d1(u1) - d1(u0)) / dt
    tau_u = (
        0.5 * dt * np.abs(utt)
        + dt * abs(a) * np.abs(b + 2 * ux) * np.abs(uxt)
        + eps * h**2 / 12 * np.abs(d4(u1))
        + abs(a) * np.abs(b + 2 * ux) * h**2 / 6 * np.abs(d3(u1))
    )
    jac = abs(p.ratio) * np.exp(-p.ratio * u1[sl]) * weight[sl]
    vtt = (v[2][sl] - 2 * v[1][sl] + v[0][sl]) / dt**2
    tau_v = 0.5 * dt * np.abs(vtt) + eps * h**2 / 12 * np.abs(d4(v[2]))
    return LinearizationResidual(
        residual=float(np.max(np.abs(residual))),
        truncation=float(np.max(jac * tau_u + tau_v)),
    )
