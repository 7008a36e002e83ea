"""Bessel-type backstepping kernels, observer gains and Volterra operators.

All kernels are written through the entire function

.. math:: \\Phi_\\nu(q) = \\sum_{m \\ge 0} \\frac{(q/4)^m}{m!\\,(m+\\nu)!},

which satisfies ``I1(s)/s = Phi_1(s^2)/2``, ``J1(s)/s = Phi_1(-s^2)/2`` and
``Phi_1' = Phi_2 / 4``.  Working with ``Phi`` removes the ``0/0`` on the
kernel diagonals without any case switch, and gives analytic derivatives
in closed form.

Coordinates: the control kernels live on the bowtie
``D = {|xi - 1/2| <= |x - 1/2|}`` and the observer kernels on the
complementary bowtie ``E = {|x - 1/2| <= |xi - 1/2|}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .core import Field, Grid, Params, check_same_grid, segment_weights
from .exceptions import DomainError

BESSEL_RANGE = 50.0
# Past this argument the alternating J series loses too many digits in double
# precision and is summed in extended precision instead.
_J_DOUBLE_LIMIT = 8.0
_DOMAIN_TOL = 1e-12


def phi(q, nu: int = 1):
    """``Phi_nu(q)`` by its power series, summed to relative size ``1e-17``."""
    q = np.asarray(q, dtype=float)
    term = np.full_like(q, 1.0 / math.factorial(nu))
    total = np.zeros_like(q)
    quarter = q / 4.0
    for m in range(400):
        total = total + term
        term = term * quarter / ((m + 1) * (m + 1 + nu))
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _bessel_series_mp(s: float, order: int, alternating: bool) -> float:
    with mpmath.workdps(60):
        x = mpmath.mpf(s) / 2
        term = x**order / mpmath.factorial(order)
        total = mpmath.mpf(0)
        sign = -1 if alternating else 1
        m = 0
        while True:
            total += term
            m += 1
            term = term * sign * x * x / (m * (m + order))
            if abs(term) < mpmath.mpf(10) ** -40 * max(abs(total), mpmath.mpf(10) ** -300):
                break
        return float(total)


def _check_range(s):
    s = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(np.abs(s) > BESSEL_RANGE):
        raise DomainError(f"Bessel argument outside [-{BESSEL_RANGE}, {BESSEL_RANGE}]")
    return s


def bessel_I1(s):
    """Modified Bessel function of the first kind, order 1, for ``|s| <= 50``."""
    s = _check_range(s)
    return s * phi(s * s, 1) / 2.0


def bessel_I0(s):
    s = _check_range(s)
    return phi(s * s, 0)


def _bessel_J(s, order: int):
    s = _check_range(s)
    out = s**order * phi(-s * s, order) / 2.0**order
    big = np.abs(s) > _J_DOUBLE_LIMIT
    if np.any(big):
        out = np.array(out, dtype=float)
        flat = out.reshape(-1)
        for idx in np.flatnonzero(big.reshape(-1)):
            flat[idx] = _bessel_series_mp(float(s.reshape(-1)[idx]), order, alternating=True)
        out = flat.reshape(s.shape)
    return out if out.ndim else float(out)


def bessel_J1(s):
    """Bessel function of the first kind, order 1, for ``|s| <= 50``."""
    return _bessel_J(s, 1)


def bessel_J0(s):
    return _bessel_J(s, 0)


# ---------------------------------------------------------------------------
# kernels


def _in_unit_square(x, xi):
    lo, hi = -_DOMAIN_TOL, 1.0 + _DOMAIN_TOL
    return np.all((x >= lo) & (x <= hi) & (xi >= lo) & (xi <= hi))


def _check_domain(x, xi, which: str):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if which == "D":
        ok = np.abs(xi - 0.5) <= np.abs(x - 0.5) + _DOMAIN_TOL
    elif which == "E":
        ok = np.abs(x - 0.5) <= np.abs(xi - 0.5) + _DOMAIN_TOL
    else:  # triangle 0 <= y <= x
        ok = xi <= x + _DOMAIN_TOL
    if not (_in_unit_square(x, xi) and np.all(ok)):
        raise DomainError(f"kernel evaluated outside its domain {which}")
    return x, xi


def _scalar(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def _bowtie_kernel(x, xi, c, eps, sign):
    # value of the D-kernel family; sign=+1 gives the I1 kernel, -1 the J1 kernel
    lam = c / eps
    r = (x - 0.5) ** 2 - (xi - 0.5) ** 2
    return -(lam / 4.0) * phi(sign * lam * r, 1) * (x + xi - 1.0)


def _bowtie_kernel_dx(x, xi, c, eps, sign):
    lam = c / eps
    r = (x - 0.5) ** 2 - (xi - 0.5) ** 2
    q = sign * lam * r
    dphi = sign * lam * 2.0 * (x - 0.5) * phi(q, 2) / 4.0
    return -(lam / 4.0) * (phi(q, 1) + (x + xi - 1.0) * dphi)


def control_kernel_k(x, xi, c1: float, eps: float):
    """Control kernel ``k(x, xi)`` on the bowtie ``D``."""
    x, xi = _check_domain(x, xi, "D")
    return _scalar(_bowtie_kernel(x, xi, c1, eps, 1.0))


def control_kernel_k_x(x, xi, c1: float, eps: float):
    """Analytic ``d k / d x``."""
    x, xi = _check_domain(x, xi, "D")
    return _scalar(_bowtie_kernel_dx(x, xi, c1, eps, 1.0))


def inverse_kernel_l(x, xi, c1: float, eps: float):
    """Kernel ``l`` of the inverse control transform (``J1`` in place of ``I1``)."""
    x, xi = _check_domain(x, xi, "D")
    return _scalar(_bowtie_kernel(x, xi, c1, eps, -1.0))


# The observer kernels are the control family with the roles of x and xi
# exchanged: P(x, xi) = k(xi, x).


def observer_kernel_P(x, xi, c2: float, eps: float):
    """Observer kernel ``P(x, xi)`` on the bowtie ``E``."""
    x, xi = _check_domain(x, xi, "E")
    return _scalar(_bowtie_kernel(xi, x, c2, eps, 1.0))


def observer_kernel_P_xi(x, xi, c2: float, eps: float):
    """Analytic ``d P / d xi``."""
    x, xi = _check_domain(x, xi, "E")
    return _scalar(_bowtie_kernel_dx(xi, x, c2, eps, 1.0))


def observer_inverse_kernel(x, xi, c2: float, eps: float):
    """Kernel of the inverse observer transform, the ``J1`` mirror of ``P``."""
    x, xi = _check_domain(x, xi, "E")
    return _scalar(_bowtie_kernel(xi, x, c2, eps, -1.0))


def unilateral_kernel(x, y, c1: float, eps: float):
    """Kernel ``k1(x, y)`` of the one-sided design, for ``0 <= y <= x <= 1``."""
    x, y = _check_domain(x, y, "T")
    lam = c1 / eps
    return _scalar(-(lam / 2.0) * x * phi(lam * (x * x - y * y), 1))


def unilateral_kernel_x(x, y, c1: float, eps: float):
    x, y = _check_domain(x, y, "T")
    lam = c1 / eps
    q = lam * (x * x - y * y)
    return _scalar(-(lam / 2.0) * (phi(q, 1) + x * lam * 2.0 * x * phi(q, 2) / 4.0))


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel data consumed by the feedback laws and the observer.

    ``k_row0[j] = k_x(0, xi_j)`` and ``k_row1[j] = k_x(1, xi_j)``; the
    ``k1_*`` entries belong to the one-sided baseline design.
    """

    grid: Grid
    c1: float
    c2: float
    eps: float
    k_row0: np.ndarray
    k_row1: np.ndarray
    k_diag0: float
    k_diag1: float
    p1: Field
    p2: Field
    p00: float
    p11: float
    k1_row1: np.ndarray
    k1_diag1: float

    @property
    def c(self) -> float:
        return self.c1

    def to_csv(self, path) -> None:
        """Write ``x, xi, k, l, P`` over the grid lattice; blank outside each domain."""
        x = self.grid.nodes
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "xi", "k", "l", "P"])
            for xv in x:
                in_d = np.abs(x - 0.5) <= abs(xv - 0.5) + _DOMAIN_TOL
                kv = _bowtie_kernel(xv, x, self.c1, self.eps, 1.0)
                lv = _bowtie_kernel(xv, x, self.c1, self.eps, -1.0)
                pv = _bowtie_kernel(x, xv, self.c2, self.eps, 1.0)
                in_e = abs(xv - 0.5) <= np.abs(x - 0.5) + _DOMAIN_TOL
                for j, xiv in enumerate(x):
                    writer.writerow(
                        [
                            f"{xv:.10g}",
                            f"{xiv:.10g}",
                            f"{kv[j]:.17g}" if in_d[j] else "",
                            f"{lv[j]:.17g}" if in_d[j] else "",
                            f"{pv[j]:.17g}" if in_e[j] else "",
                        ]
                    )


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def build_kernel_table(grid: Grid, p: Params) -> KernelTable:
    x = grid.nodes
    c1, c2, eps = p.c1, p.c2, p.epsilon
    zero, one = np.zeros_like(x), np.ones_like(x)
    return KernelTable(
        grid=grid,
        c1=c1,
        c2=c2,
        eps=eps,
        k_row0=_readonly(control_kernel_k_x(zero, x, c1, eps)),
        k_row1=_readonly(control_kernel_k_x(one, x, c1, eps)),
        k_diag0=control_kernel_k(0.0, 0.0, c1, eps),
        k_diag1=control_kernel_k(1.0, 1.0, c1, eps),
        p1=Field(grid, -eps * observer_kernel_P_xi(x, one, c2, eps)),
        p2=Field(grid, -eps * observer_kernel_P_xi(x, zero, c2, eps)),
        p00=-observer_kernel_P(0.0, 0.0, c2, eps),
        p11=-observer_kernel_P(1.0, 1.0, c2, eps),
        k1_row1=_readonly(unilateral_kernel_x(one, x, c1, eps)),
        k1_diag1=unilateral_kernel(1.0, 1.0, c1, eps),
    )


# ---------------------------------------------------------------------------
# Volterra operators as matrices


def control_transform_matrices(grid: Grid, c1: float, eps: float):
    """Matrices of the direct (kernel ``k``) and inverse (kernel ``l``) control transforms.

    Row ``i`` of the direct operator realizes
    ``w(x) = v(x) - int_{1-x}^{x} k(x, xi) v(xi) dxi`` with the integral
    oriented, so it is negative when ``1 - x > x``.
    """
    n, h, x = grid.n, grid.spacing, grid.nodes
    direct = np.eye(n)
    inverse = np.eye(n)
    for i in range(n):
        w = segment_weights(n, h, n - 1 - i, i)
        direct[i] -= w * _bowtie_kernel(x[i], x, c1, eps, 1.0)
        inverse[i] += w * _bowtie_kernel(x[i], x, c1, eps, -1.0)
    return direct, inverse


def observer_transform_matrices(grid: Grid, c2: float, eps: float):
    """Matrices of the observer-error transform (kernel ``P``) and its inverse.

    In the shifted coordinate ``z = x - 1/2`` the integration ranges differ
    on the two halves: for ``z >= 0`` the integrals run over ``[x, 1]`` and
    ``[0, 1 - x]``, for ``z < 0`` over ``[0, x]`` and ``[1 - x, 1]``.  The
    returned ``direct`` maps the target state to the estimation error.
    """
    n, h, x = grid.n, grid.spacing, grid.nodes
    direct = np.eye(n)
    inverse = np.eye(n)
    for i in range(n):
        row = _bowtie_kernel(x, x[i], c2, eps, 1.0)
        row_bar = _bowtie_kernel(x, x[i], c2, eps, -1.0)
        if x[i] >= 0.5 - _DOMAIN_TOL:
            upper = segment_weights(n, h, i, n - 1)
            lower = segment_weights(n, h, 0, n - 1 - i)
            direct[i] += (lower - upper) * row
            inverse[i] += (upper - lower) * row_bar
        else:
            lower = segment_weights(n, h, 0, i)
            upper = segment_weights(n, h, n - 1 - i, n - 1)
            direct[i] += (lower - upper) * row
            inverse[i] += (upper - lower) * row_bar
    return direct, inverse


def apply_control_transform(v: Field, c1: float, eps: float) -> Field:
    direct, _ = control_transform_matrices(v.grid, c1, eps)
    return v.with_values(direct @ v.values)


def apply_inverse_control_transform(w: Field, c1: float, eps: float) -> Field:
    _, inverse = control_transform_matrices(w.grid, c1, eps)
    return w.with_values(inverse @ w.values)


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class KernelPDEResidual:
    max_residual: float
    diagonal_error: float
    antidiagonal_error: float

    @property
    def bc_errors(self):
        return (self.diagonal_error, self.antidiagonal_error)

    def passed(self, tol: float = 1e-3, bc_tol: float = 1e-12) -> bool:
        return self.max_residual <= tol and max(self.bc_errors) <= bc_tol


def _second_derivative(f, h):
    # fourth-order central stencil applied to five samples
    return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)


def kernel_pde_residual(
    which: str, c: float, eps: float, density: int, kernel_c: float | None = None
) -> KernelPDEResidual:
    """Residual of the kernel PDE and its boundary data in shifted coordinates.

    With ``z = x - 1/2`` and ``y = xi - 1/2`` the observer kernel
    ``p(z, y) = P(z + 1/2, y + 1/2)`` solves ``eps p_yy - eps p_zz = c p``
    with ``p(z, z) = -(c / 2 eps) z`` and ``p(z, -z) = 0``; the control
    kernel is its transpose.  The PDE is checked on a ``density x density``
    lattice, keeping points at least one lattice spacing from the
    characteristic lines ``|y| = |z|`` and using a fourth-order stencil of
    half that spacing.  ``kernel_c`` evaluates the kernel with a different
    rate than the PDE (a mutation hook for self-tests).
    """
    if which not in ("control", "observer"):
        raise ValueError("which must be 'control' or 'observer'")
    if density < 21:
        raise ValueError("density must be at least 21")
    kc = c if kernel_c is None else kernel_c
    axis = np.linspace(-0.5, 0.5, density)
    spacing = axis[1] - axis[0]
    hs = spacing / 2.0
    offsets = np.arange(-2, 3) * hs

    if which == "observer":

        def p(z, y):
            return _bowtie_kernel(y + 0.5, z + 0.5, kc, eps, 1.0)

        def pde(z, y):
            p_yy = _second_derivative([p(z, y + o) for o in offsets], hs)
            p_zz = _second_derivative([p(z + o, y) for o in offsets], hs)
            return eps * p_yy - eps * p_zz - c * p(z, y)

        Z, Y = np.meshgrid(axis, axis, indexing="ij")
        mask = np.abs(Y) - np.abs(Z) >= spacing - 1e-12
        # keep the z-stencil inside the square as well
        mask &= np.abs(Z) <= 0.5 - 2 * hs + 1e-12
        diag = np.abs(p(axis, axis) + c / (2 * eps) * axis)
        anti = np.abs(p(axis, -axis))
    else:

        def p(z, y):
            return _bowtie_kernel(z + 0.5, y + 0.5, kc, eps, 1.0)

        def pde(z, y):
            k_zz = _second_derivative([p(z + o, y) for o in offsets], hs)
            k_yy = _second_derivative([p(z, y + o) for o in offsets], hs)
            return eps * k_zz - eps * k_yy - c * p(z, y)

        Z, Y = np.meshgrid(axis, axis, indexing="ij")
        mask = np.abs(Z) - np.abs(Y) >= spacing - 1e-12
        mask &= np.abs(Y) <= 0.5 - 2 * hs + 1e-12
        diag = np.abs(p(axis, axis) + c / (2 * eps) * axis)
        anti = np.abs(p(axis, -axis))

    res = pde(Z[mask], Y[mask]) if np.any(mask) else np.zeros(1)
    return KernelPDEResidual(
        max_residual=float(np.max(np.abs(res))),
        diagonal_error=float(np.max(diag)),
        antidiagonal_error=float(np.max(anti)),
    )


__all__ = [
    "BESSEL_RANGE",
    "KernelPDEResidual",
    "KernelTable",
    "apply_control_transform",
    "apply_inverse_control_transform",
    "bessel_I0",
    "bessel_I1",
    "bessel_J0",
    "bessel_J1",
    "build_kernel_table",
    "control_kernel_k",
    "control_kernel_k_x",
    "control_transform_matrices",
    "inverse_kernel_l",
    "kernel_pde_residual",
    "observer_inverse_kernel",
    "observer_kernel_P",
    "observer_kernel_P_xi",
    "observer_transform_matrices",
    "phi",
    "unilateral_kernel",
    "unilateral_kernel_x",
]
