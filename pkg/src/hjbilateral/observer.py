"""Bilateral observer for the transformed tracking error.

The observer is a copy of the linear error system
``v_t = eps v_xx - (a^2 b^2 / 4 eps) v`` driven by output injection from
both boundaries.  The injected quantities are the mismatches between the
measured transformed error at ``x = 0, 1`` and the estimate there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Params, check_same_grid
from .kernels import KernelTable
from .transforms import _guard


@dataclass(frozen=True, eq=False)
class ObserverState:
    """Estimate ``v_hat`` of the transformed error plus the output-injection gains."""

    v_hat: Field
    p1: Field
    p2: Field
    p00: float
    p11: float

    def __post_init__(self):
        check_same_grid(self.v_hat, self.p1, self.p2)

    @classmethod
    def from_table(cls, v_hat: Field, table: KernelTable) -> "ObserverState":
        return cls(v_hat, table.p1, table.p2, table.p00, table.p11)

    def with_estimate(self, v_hat: Field) -> "ObserverState":
        return ObserverState(v_hat, self.p1, self.p2, self.p00, self.p11)


def boundary_injections(
    u0: float, u1: float, ur0: float, ur1: float, v_hat: Field, p: Params
):
    """Measured-minus-estimated transformed error at both ends."""
    r = p.ratio
    e0, e1 = -r * (u0 - ur0), -r * (u1 - ur1)
    w0, w1 = -r * ur0, -p.drift - r * ur1
    _guard(np.array([e0, e1, w0, w1]), "boundary_injections")
    inj0 = math.expm1(e0) * math.exp(w0) - v_hat[0]
    inj1 = math.expm1(e1) * math.exp(w1) - v_hat[-1]
    return inj0, inj1


def observer_boundary_slopes(state: ObserverState, injections, V=(0.0, 0.0)):
    """Neumann data ``(v_hat_x(0), v_hat_x(1))`` of the observer."""
    inj0, inj1 = injections
    return V[0] + state.p00 * inj0, V[1] + state.p11 * inj1


def observer_rhs(state: ObserverState, injections, p: Params, V=(0.0, 0.0)) -> Field:
    """Time derivative of the estimate on every node.

    ``V`` holds the boundary values ``(V0, V1)`` of the backstepping law;
    together with the injections they fix the Neumann data, which enter
    through ghost nodes ``v_{-1} = v_1 - 2 h g0`` and
    ``v_n = v_{n-2} + 2 h g1``.
    """
    inj0, inj1 = injections
    v = state.v_hat.values
    h = state.v_hat.grid.spacing
    g0, g1 = observer_boundary_slopes(state, injections, V)
    ext = np.concatenate(([v[1] - 2 * h * g0], v, [v[-2] + 2 * h * g1]))
    lap = (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / h**2
    rhs = p.epsilon * lap - p.decay * v + state.p2.values * inj0 + state.p1.values * inj1
    return state.v_hat.with_values(rhs)


__all__ = [
    "ObserverState",
    "boundary_injections",
    "observer_boundary_slopes",
    "observer_rhs",
]
