"""Boundary feedback laws expressed in the physical variable ``u``.

Four families are provided: the bilateral full-state backstepping law, its
observer-based output-feedback variant, the static collocated law, and a
one-sided backstepping baseline that only acts through the right boundary.
Every law returns exactly the feedforward pair ``(U0_ref, U1_ref)`` when
the tracking error vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Params, check_same_grid, simpson_weights
from .exceptions import GridMismatchError
from .kernels import KernelTable
from .transforms import _guard, error_transform


@dataclass(frozen=True)
class BoundaryInput:
    """Neumann data ``u_x(0) = U0`` and ``u_x(1) = U1``."""

    U0: float
    U1: float

    def __post_init__(self):
        for name in ("U0", "U1"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    def __iter__(self):
        return iter((self.U0, self.U1))


def _exp(x: float, what: str) -> float:
    _guard(np.atleast_1d(x), what)
    return math.exp(x)


def _check_table(field: Field, table: KernelTable) -> None:
    if field.grid != table.grid:
        raise GridMismatchError(f"kernel table built on {table.grid}, field lives on {field.grid}")


def _kernel_integrals(v: Field, row0: np.ndarray, row1: np.ndarray):
    w = simpson_weights(v.grid.n, v.grid.spacing)
    return float(w @ (row0 * v.values)), float(w @ (row1 * v.values))


def backstepping_V(v_tilde: Field, table: KernelTable):
    """Boundary values ``(V0, V1)`` of ``v_tilde_x`` that realize the target system.

    ``V0 = k(0,0) v(0) - int k_x(0, xi) v(xi) dxi`` and
    ``V1 = k(1,1) v(1) + int k_x(1, xi) v(xi) dxi``.
    """
    _check_table(v_tilde, table)
    i0, i1 = _kernel_integrals(v_tilde, table.k_row0, table.k_row1)
    return table.k_diag0 * v_tilde[0] - i0, table.k_diag1 * v_tilde[-1] + i1


def physical_inputs(
    V0: float,
    V1: float,
    u0_err: float,
    u1_err: float,
    ur0: float,
    ur1: float,
    U0r: float,
    U1r: float,
    p: Params,
) -> BoundaryInput:
    """Neumann inputs for ``u`` that make ``v_tilde_x`` equal ``(V0, V1)`` at the ends.

    Differentiating the error transform at ``x = 0, 1`` and solving for
    ``u_x`` gives ``U = U_ref - (V / W + (E - 1)(ab/2eps + (a/eps) U_ref)) / ((a/eps) E)``
    with ``E = exp(-(a/eps) u_err)`` and ``W`` the outer weight at that end.
    """
    r, d = p.ratio, p.drift
    out = []
    for V, err, ur, Ur, x in ((V0, u0_err, ur0, U0r, 0.0), (V1, u1_err, ur1, U1r, 1.0)):
        E = _exp(-r * err, "physical_inputs")
        W = _exp(-d * x - r * ur, "physical_inputs")
        out.append(Ur - (V / W + (E - 1.0) * (d + r * Ur)) / (r * E))
    return BoundaryInput(*out)


def _law(u_err0, u_err1, ur0, ur1, U0r, U1r, int0, int1, diag0, diag1, p: Params):
    # the common shape of the physical-variable backstepping laws
    r, d = p.ratio, p.drift
    g0 = _exp(r * u_err0, "feedback law")
    g1 = _exp(r * u_err1, "feedback law")
    U0 = -g0 / r * ((diag0 + d) * math.expm1(-r * u_err0) - _exp(r * ur0, "feedback law") * int0)
    U1 = -g1 / r * ((diag1 + d) * math.expm1(-r * u_err1) + _exp(d + r * ur1, "feedback law") * int1)
    return BoundaryInput(U0 + U0r * g0, U1 + U1r * g1)


def fullstate_bilateral(
    u: Field, ur: Field, U0r: float, U1r: float, table: KernelTable, p: Params
) -> BoundaryInput:
    """Bilateral full-state backstepping law in the original variable."""
    check_same_grid(u, ur)
    _check_table(u, table)
    v_tilde = error_transform(u.with_values(u.values - ur.values), ur, p)
    int0, int1 = _kernel_integrals(v_tilde, table.k_row0, table.k_row1)
    return _law(
        u[0] - ur[0], u[-1] - ur[-1], ur[0], ur[-1], U0r, U1r,
        int0, int1, table.k_diag0, table.k_diag1, p,
    )


def output_feedback(
    u0: float,
    u1: float,
    v_hat: Field,
    ur: Field,
    U0r: float,
    U1r: float,
    table: KernelTable,
    p: Params,
) -> BoundaryInput:
    """Observer-based law: boundary measurements ``u0, u1`` plus the estimate ``v_hat``."""
    check_same_grid(v_hat, ur)
    _check_table(v_hat, table)
    int0, int1 = _kernel_integrals(v_hat, table.k_row0, table.k_row1)
    return _law(
        u0 - ur[0], u1 - ur[-1], ur[0], ur[-1], U0r, U1r,
        int0, int1, table.k_diag0, table.k_diag1, p,
    )


def static_collocated(
    u0_err: float, u1_err: float, U0r: float, U1r: float, p: Params
) -> BoundaryInput:
    """Decentralized static law ``U = (b/2)(exp((a/eps) u_err) - 1) + U_ref exp((a/eps) u_err)``.

    Each end uses only its own measurement.  The closed loop is stable for
    ``b != 0`` at a rate fixed by the plant, not chosen by design.
    """
    out = []
    for err, Ur in ((u0_err, U0r), (u1_err, U1r)):
        g = _exp(p.ratio * err, "static_collocated")
        out.append(p.b / 2.0 * (g - 1.0) + Ur * g)
    return BoundaryInput(*out)


def unilateral_baseline(
    u: Field, ur: Field, U0r: float, U1r: float, p: Params, table: KernelTable
) -> BoundaryInput:
    """One-sided backstepping at ``x = 1`` with pure feedforward at ``x = 0``.

    Uses the kernel ``k1`` of the classical one-boundary design, tuned to the
    same target decay rate ``c1`` as the bilateral law.
    """
    check_same_grid(u, ur)
    _check_table(u, table)
    v_tilde = error_transform(u.with_values(u.values - ur.values), ur, p)
    w = simpson_weights(u.grid.n, u.grid.spacing)
    int1 = float(w @ (table.k1_row1 * v_tilde.values))
    r, d = p.ratio, p.drift
    err1 = u[-1] - ur[-1]
    g1 = _exp(r * err1, "unilateral_baseline")
    U1 = -g1 / r * (
        (table.k1_diag1 + d) * math.expm1(-r * err1) + _exp(d + r * ur[-1], "unilateral_baseline") * int1
    )
    return BoundaryInput(U0r, U1 + U1r * g1)


__all__ = [
    "BoundaryInput",
    "backstepping_V",
    "fullstate_bilateral",
    "output_feedback",
    "physical_inputs",
    "static_collocated",
    "unilateral_baseline",
]
