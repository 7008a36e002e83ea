"""Bilateral boundary control and estimation for viscous Hamilton-Jacobi PDEs.

The plant ``u_t = eps u_xx - a u_x (b + u_x)`` on ``[0, 1]`` with Neumann
inputs at both ends is linearized by an exponential change of variables,
tracked along Gevrey-series references, stabilized by Bessel-kernel
backstepping laws and estimated by a bilateral observer.
"""

from .core import Field, Grid, Params, Signal, h1_norm, integrate, l2_norm, sup_norm
from .exceptions import (
    ConfigError,
    DivergenceError,
    DomainError,
    FeasibilityError,
    GridMismatchError,
    HJError,
    NonFiniteError,
    OverflowGuardError,
    ReferenceInfeasibleError,
    TruncationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "FeasibilityError",
    "Field",
    "Grid",
    "GridMismatchError",
    "HJError",
    "NonFiniteError",
    "OverflowGuardError",
    "Params",
    "ReferenceInfeasibleError",
    "Signal",
    "TruncationError",
    "h1_norm",
    "integrate",
    "l2_norm",
    "sup_norm",
]
