"""Grids, sampled fields, parameters, quadrature and norms.

Every other module computes on the objects defined here.  Grids are uniform
on ``[0, 1]``; fields are immutable samples on such a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .exceptions import GridMismatchError, NonFiniteError


@dataclass(frozen=True)
class Params:
    """Plant coefficients and design rates.

    Parameters
    ----------
    epsilon : float
        Viscosity, strictly positive.
    a : float
        Coefficient of the quadratic gradient term, nonzero.
    b : float
        Coefficient of the linear gradient term.
    c1, c2 : float
        Controller and observer decay rates, nonnegative.
    """

    epsilon: float
    a: float
    b: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "a", "b", "c1", "c2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.a == 0:
            raise ValueError("a must be nonzero")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be nonnegative")

    @property
    def ratio(self) -> float:
        """a / epsilon, the Hopf-Cole exponent scale."""
        return self.a / self.epsilon

    @property
    def drift(self) -> float:
        """a b / (2 epsilon), the exponent of the spatial weight."""
        return self.a * self.b / (2.0 * self.epsilon)

    @property
    def decay(self) -> float:
        """a^2 b^2 / (4 epsilon), the reaction coefficient of the linear PDE."""
        return (self.a * self.b) ** 2 / (4.0 * self.epsilon)

    def replace(self, **changes) -> "Params":
        values = dict(epsilon=self.epsilon, a=self.a, b=self.b, c1=self.c1, c2=self.c2)
        values.update(changes)
        return Params(**values)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` nodes on ``[0, 1]``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"a grid needs an integer n >= 3, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n) * self.spacing
        x[-1] = 1.0
        x.setflags(write=False)
        return x

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self, np.broadcast_to(func(self.nodes), (self.n,)))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n))

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.n, float(value)))


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar samples on a :class:`Grid`.

    Construction copies ``values`` into a read-only float array and rejects
    non-finite samples, reporting the first offending node.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise GridMismatchError(
                f"field has shape {values.shape}, grid expects ({self.grid.n},)"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteError(f"non-finite sample at node {bad[0]}", index=int(bad[0]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __getitem__(self, index):
        return self.values[index]

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def derivative(self) -> np.ndarray:
        """Second-order accurate first derivative (one-sided at the ends)."""
        return np.gradient(self.values, self.grid.spacing, edge_order=2)


def check_same_grid(*fields: Field) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


@dataclass(frozen=True)
class Signal:
    """A scalar time function with exact derivatives of every order.

    ``derivative(n, t)`` must accept scalar or array ``t``.
    """

    derivative_fn: Callable[[int, np.ndarray], np.ndarray]
    name: str = "signal"

    def derivative(self, n: int, t):
        if n < 0:
            raise ValueError("derivative order must be nonnegative")
        return self.derivative_fn(int(n), np.asarray(t, dtype=float))

    def __call__(self, t):
        return self.derivative(0, t)

    def derivatives(self, n_max: int, t) -> np.ndarray:
        """Stack of derivatives ``0..n_max``, shape ``(n_max + 1,) + shape(t)``."""
        return np.array([self.derivative(n, t) for n in range(n_max + 1)], dtype=float)


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Quadrature weights over ``n`` equispaced nodes.

    Composite Simpson for odd ``n``; the trapezoid rule when ``n`` is even.
    """
    w = np.empty(n)
    if n % 2 == 1:
        w[0::2] = 2.0
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * (h / 3.0)
    w[:] = 1.0
    w[0] = w[-1] = 0.5
    return w * h


def segment_weights(n: int, h: float, start: int, stop: int) -> np.ndarray:
    """Weights over all ``n`` nodes for the oriented integral from node ``start`` to ``stop``.

    Even interval counts use composite Simpson; odd counts finish with a
    3/8 panel.  A single interval is integrated with the quadratic through
    one neighbouring node, which keeps the local error at fourth order.
    """
    w = np.zeros(n)
    sign = 1.0
    if stop < start:
        start, stop, sign = stop, start, -1.0
    m = stop - start
    if m == 0:
        return w
    if m == 1:
        if stop + 1 < n:
            w[start] += 5.0 / 12.0 * h
            w[stop] += 8.0 / 12.0 * h
            w[stop + 1] -= 1.0 / 12.0 * h
        else:
            w[start - 1] -= 1.0 / 12.0 * h
            w[start] += 8.0 / 12.0 * h
            w[stop] += 5.0 / 12.0 * h
        return sign * w
    end = stop if m % 2 == 0 else stop - 3
    if end > start:
        w[start : end + 1] += simpson_weights(end - start + 1, h)
    if m % 2 == 1:
        w[end : end + 4] += np.array([3.0, 9.0, 9.0, 3.0]) * (h / 8.0)
    return sign * w


def integrate(f: Field) -> float:
    """Approximate the integral of ``f`` over ``[0, 1]``."""
    return float(simpson_weights(f.grid.n, f.grid.spacing) @ f.values)


def l2_norm(f: Field) -> float:
    return math.sqrt(max(integrate(f.with_values(f.values**2)), 0.0))


def h1_norm(f: Field) -> float:
    """Sum of the L2 norms of ``f`` and of its derivative.

    Note this is a sum of two square roots, not the square root of a sum.
    """
    fx = f.derivative()
    w = simpson_weights(f.grid.n, f.grid.spacing)
    return math.sqrt(max(w @ f.values**2, 0.0)) + math.sqrt(max(w @ fx**2, 0.0))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))
