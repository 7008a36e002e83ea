"""Method-of-lines simulation of the viscous Hamilton-Jacobi plant in closed loop.

The plant ``u_t = eps u_xx - a u_x (b + u_x)`` with Neumann actuation
``u_x(0) = U0``, ``u_x(1) = U1`` is discretized with second-order central
differences and ghost nodes.  Time stepping is either explicit Euler or a
semi-implicit scheme (implicit diffusion, explicit gradient term).  The
controller is sampled once per step and held over it.
"""

from __future__ import annotations

import csv
import time as _time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.linalg import solve_banded

from .control import (
    BoundaryInput,
    fullstate_bilateral,
    output_feedback,
    physical_inputs,
    static_collocated,
    unilateral_baseline,
)
from .core import Field, Grid, Params, h1_norm, simpson_weights
from .exceptions import (
    DivergenceError,
    FeasibilityError,
    OverflowGuardError,
    ReferenceInfeasibleError,
)
from .kernels import KernelTable, build_kernel_table, control_transform_matrices
from .observer import ObserverState, boundary_injections, observer_boundary_slopes
from .transforms import error_inverse, error_transform, linearization_residual
from .trajgen import ReferencePlan, reference_state, sine_plan, traffic_plan

SCHEMES = ("explicit", "semi-implicit")
CONTROLLERS = ("fullstate", "output_feedback", "static", "unilateral", "feedforward")
DIVERGENCE_LIMIT = 1e6
CFL_FACTOR = 0.4


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop run description.

    ``reference`` is ``"traffic"``, ``"sine"`` or a :class:`ReferencePlan`.
    ``u0`` is the initial state as a callable of ``x`` or a :class:`Field`;
    ``None`` starts on the reference.  ``v_hat0`` likewise initializes the
    observer (zero by default).
    """

    params: Params
    grid: Grid = field(default_factory=lambda: Grid(201))
    t0: float = 0.0
    t_end: float = 8.0
    dt: float = 1e-3
    scheme: str = "semi-implicit"
    controller: str = "fullstate"
    reference: object = "traffic"
    record_every: int = 20
    u0: object = None
    v_hat0: object = None
    linearization_check: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if self.scheme == "explicit":
            limit = CFL_FACTOR * self.grid.spacing**2 / self.params.epsilon
            if self.dt > limit:
                raise ValueError(f"explicit scheme needs dt <= {limit:.3g}, got {self.dt:.3g}")
        if isinstance(self.reference, str) and self.reference not in ("traffic", "sine"):
            raise ValueError("reference must be 'traffic', 'sine' or a ReferencePlan")

    @property
    def plan(self) -> ReferencePlan:
        if isinstance(self.reference, ReferencePlan):
            return self.reference
        return traffic_plan() if self.reference == "traffic" else sine_plan()

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))

    def replace(self, **changes) -> "SimConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SimConfig(**values)


def traffic_initial_state(x: np.ndarray) -> np.ndarray:
    """Capacity-flow profile perturbed by ``0.1 sin(pi x)``."""
    return (1.0 - x) / 2.0 + 0.1 * np.sin(np.pi * x)


def traffic_config(controller: str = "fullstate", c1: float = 1.0, c2: float = 1.0, **kw) -> SimConfig:
    """The highway scenario: ``a = b = 1``, ``eps = 1/4``, capacity-flow reference."""
    p = Params(epsilon=0.25, a=1.0, b=1.0, c1=c1, c2=c2)
    kw.setdefault("u0", traffic_initial_state)
    return SimConfig(params=p, controller=controller, reference="traffic", **kw)


# ---------------------------------------------------------------------------
# plant


def _ghost_extend(u: np.ndarray, h: float, U0: float, U1: float) -> np.ndarray:
    return np.concatenate(([u[1] - 2 * h * U0], u, [u[-2] + 2 * h * U1]))


def _gradient_term(u: np.ndarray, h: float, U0: float, U1: float, p: Params) -> np.ndarray:
    ux = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    ux[0], ux[-1] = U0, U1
    return -p.a * ux * (p.b + ux)


def hj_rhs(u: Field, inputs: BoundaryInput, p: Params) -> Field:
    """Semi-discrete right-hand side with Neumann data imposed through ghost nodes."""
    h = u.grid.spacing
    ext = _ghost_extend(u.values, h, inputs.U0, inputs.U1)
    lap = (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / h**2
    return u.with_values(p.epsilon * lap + _gradient_term(u.values, h, inputs.U0, inputs.U1, p))


def _diffusion_matrix(n: int, h: float, dt: float, eps: float, reaction: float = 0.0):
    # banded form of I - dt*(eps*D2 - reaction) with ghost-node Neumann rows
    r = dt * eps / h**2
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r + dt * reaction
    ab[2, :-1] = -r
    ab[0, 1] *= 2.0
    ab[2, -2] *= 2.0
    return ab


def _implicit_solve(ab, rhs, h, dt, eps, g0, g1):
    rhs = rhs.copy()
    rhs[0] -= 2.0 * dt * eps * g0 / h
    rhs[-1] += 2.0 * dt * eps * g1 / h
    return solve_banded((1, 1), ab, rhs)


def _check_state(values: np.ndarray, t: float | None) -> None:
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > DIVERGENCE_LIMIT:
        raise DivergenceError(
            f"state diverged (sup > {DIVERGENCE_LIMIT:g}) at t = {t}", time=float("nan") if t is None else t
        )


def step(u: Field, inputs: BoundaryInput, cfg: SimConfig, t: float | None = None) -> Field:
    """Advance the plant by ``cfg.dt``."""
    p, h, dt = cfg.params, u.grid.spacing, cfg.dt
    if cfg.scheme == "explicit":
        new = u.values + dt * hj_rhs(u, inputs, p).values
    else:
        ab = _diffusion_matrix(u.grid.n, h, dt, p.epsilon)
        rhs = u.values + dt * _gradient_term(u.values, h, inputs.U0, inputs.U1, p)
        new = _implicit_solve(ab, rhs, h, dt, p.epsilon, inputs.U0, inputs.U1)
    _check_state(new, t)
    return u.with_values(new)


# ---------------------------------------------------------------------------
# traffic variables


def moskowitz_from_density(rho: Field, outflow_integral: float = 0.0) -> Field:
    """``u(x) = int_x^1 rho(y) dy + outflow_integral``."""
    rev = cumulative_simpson(rho.values[::-1], dx=rho.grid.spacing, initial=0.0)
    return rho.with_values(rev[::-1] + outflow_integral)


def density_from_moskowitz(u: Field) -> Field:
    """``rho = -u_x``."""
    return u.with_values(-u.derivative())


def traffic_flux(rho, rho_x, p: Params):
    """Flux ``rho V(rho) - eps rho_x`` with the linear speed law ``V = a (b - rho)``."""
    rho = np.asarray(rho, dtype=float)
    return rho * p.a * (p.b - rho) - p.epsilon * np.asarray(rho_x, dtype=float)


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class SimResult:
    """Recorded output of :func:`run_closed_loop`.

    ``norms`` maps diagnostic names to arrays aligned with ``times``:
    ``h1_u_tilde`` (tracking error), ``h1_e`` (estimation error, output
    feedback only), ``h1_w`` and ``S1`` (target-system state and its
    Lyapunov functional), ``sup_u_tilde``, ``rho_deviation`` (sup of the
    density error ``-u_tilde_x``), ``u_at_1``/``ur_at_1`` and
    ``lin_residual``/``lin_truncation``.
    ``max_abs_U0``/``max_abs_U1`` are taken over every step, not only the
    recorded ones.
    """

    config: SimConfig
    times: np.ndarray
    u_snapshots: list
    v_hat_snapshots: list | None
    U0_series: np.ndarray
    U1_series: np.ndarray
    norms: dict
    max_abs_U0: float
    max_abs_U1: float
    wall_time: float = 0.0

    def tracking_error_at_1(self) -> np.ndarray:
        """``u(1, t) - u_ref(1, t)`` at the recorded times."""
        return self.norms["u_at_1"] - self.norms["ur_at_1"]

    def density(self, index: int = -1) -> Field:
        return density_from_moskowitz(self.u_snapshots[index])

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def write_series_csv(self, path) -> None:
        keys = [k for k in self.norms]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "U0", "U1", *keys])
            for i, t in enumerate(self.times):
                row = [t, self.U0_series[i], self.U1_series[i], *(self.norms[k][i] for k in keys)]
                writer.writerow([f"{v:.12g}" for v in row])

    def write_fields_csv(self, path) -> None:
        x = self.config.grid.nodes
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "u", "rho", "v_hat"])
            for i, t in enumerate(self.times):
                u = self.u_snapshots[i]
                rho = density_from_moskowitz(u).values
                vh = self.v_hat_snapshots[i].values if self.v_hat_snapshots else None
                for j in range(len(x)):
                    writer.writerow(
                        [f"{t:.12g}", f"{x[j]:.12g}", f"{u[j]:.12g}", f"{rho[j]:.12g}",
                         "" if vh is None else f"{vh[j]:.12g}"]
                    )


def _initial_field(spec, grid: Grid, default: Callable[[], np.ndarray]) -> Field:
    if spec is None:
        return Field(grid, default())
    if isinstance(spec, Field):
        return Field(grid, spec.values)
    return grid.sample(spec)


def run_closed_loop(cfg: SimConfig, table: KernelTable | None = None) -> SimResult:
    """Simulate plant, controller and (for output feedback) observer.

    Raises
    ------
    ReferenceInfeasibleError
        The reference leaves the domain of the logarithmic inverse.
    FeasibilityError
        The observer estimate leaves the feasible region (carries ``time``).
    DivergenceError
        The plant state blows up or an exponent overflows (carries ``time``).
    """
    start = _time.perf_counter()
    p, grid, dt = cfg.params, cfg.grid, cfg.dt
    h, n = grid.spacing, grid.n
    plan = cfg.plan
    table = build_kernel_table(grid, p) if table is None else table
    direct, _ = control_transform_matrices(grid, p.c1, p.epsilon)
    weights = simpson_weights(n, h)

    t = cfg.t0
    ref = reference_state(plan, p, grid, t)
    u = _initial_field(cfg.u0, grid, lambda: ref.ur.values)
    use_observer = cfg.controller == "output_feedback"
    obs = None
    if use_observer:
        obs = ObserverState.from_table(_initial_field(cfg.v_hat0, grid, lambda: np.zeros(n)), table)
    ab_plant = _diffusion_matrix(n, h, dt, p.epsilon)
    ab_obs = _diffusion_matrix(n, h, dt, p.epsilon, p.decay)

    rec_t, rec_u, rec_vh, rec_U0, rec_U1 = [], [], [], [], []
    names = ["h1_u_tilde", "sup_u_tilde", "h1_w", "S1", "sup_v_tilde", "u_at_1", "ur_at_1",
             "rho_deviation"]
    if use_observer:
        names.append("h1_e")
    if cfg.linearization_check:
        names += ["lin_residual", "lin_truncation"]
    norms = {k: [] for k in names}
    max_U0 = max_U1 = 0.0
    history = [None, None]  # two previous plant states for the residual check

    for s in range(cfg.n_steps + 1):
        t = cfg.t0 + s * dt
        try:
            if s > 0:
                ref = reference_state(plan, p, grid, t)
            u_err = u.with_values(u.values - ref.ur.values)
            v_tilde = error_transform(u_err, ref.ur, p)
            inputs, V = _controller(cfg, u, u_err, v_tilde, ref, table, obs)
        except ReferenceInfeasibleError as exc:
            raise ReferenceInfeasibleError(str(exc), time=t) from exc
        except OverflowGuardError as exc:
            raise DivergenceError(f"exponent overflow at t = {t:.6g}: {exc}", time=t) from exc

        max_U0 = max(max_U0, abs(inputs.U0))
        max_U1 = max(max_U1, abs(inputs.U1))

        if s % cfg.record_every == 0 or s == cfg.n_steps:
            rec_t.append(t)
            rec_u.append(u)
            rec_U0.append(inputs.U0)
            rec_U1.append(inputs.U1)
            w = v_tilde.with_values(direct @ v_tilde.values)
            wx = w.derivative()
            norms["h1_u_tilde"].append(h1_norm(u_err))
            norms["sup_u_tilde"].append(float(np.max(np.abs(u_err.values))))
            # density error against the reference density -u_ref_x
            norms["rho_deviation"].append(float(np.max(np.abs(u_err.derivative()))))
            norms["h1_w"].append(h1_norm(w))
            norms["S1"].append(0.5 * weights @ w.values**2 + 0.5 * weights @ wx**2)
            norms["sup_v_tilde"].append(float(np.max(np.abs(v_tilde.values))))
            norms["u_at_1"].append(u[-1])
            norms["ur_at_1"].append(ref.ur[-1])
            if use_observer:
                rec_vh.append(obs.v_hat)
                norms["h1_e"].append(h1_norm(v_tilde.with_values(v_tilde.values - obs.v_hat.values)))
                try:
                    error_inverse(obs.v_hat, ref.ur, p)
                except FeasibilityError as exc:
                    raise FeasibilityError(
                        f"observer estimate left the feasible region at t = {t:.6g}",
                        minimum=exc.minimum, index=exc.index, time=t,
                    ) from exc
            if cfg.linearization_check:
                if history[0] is not None:
                    lr = linearization_residual(history[0], history[1], u, dt, p)
                    norms["lin_residual"].append(lr.residual)
                    norms["lin_truncation"].append(lr.truncation)
                else:
                    norms["lin_residual"].append(np.nan)
                    norms["lin_truncation"].append(np.nan)

        if s == cfg.n_steps:
            break
        if use_observer:
            obs = _observer_step(obs, u, ref, V, p, ab_obs, h, dt, t)
        history = [history[1], u]
        u = step(u, inputs, cfg, t + dt)

    return SimResult(
        config=cfg,
        times=np.array(rec_t),
        u_snapshots=rec_u,
        v_hat_snapshots=rec_vh if use_observer else None,
        U0_series=np.array(rec_U0),
        U1_series=np.array(rec_U1),
        norms={k: np.array(v, dtype=float) for k, v in norms.items()},
        max_abs_U0=max_U0,
        max_abs_U1=max_U1,
        wall_time=_time.perf_counter() - start,
    )


def _controller(cfg, u, u_err, v_tilde, ref, table, obs):
    p = cfg.params
    if cfg.controller == "fullstate":
        return fullstate_bilateral(u, ref.ur, ref.U0r, ref.U1r, table, p), None
    if cfg.controller == "unilateral":
        return unilateral_baseline(u, ref.ur, ref.U0r, ref.U1r, p, table), None
    if cfg.controller == "static":
        return static_collocated(u_err[0], u_err[-1], ref.U0r, ref.U1r, p), None
    if cfg.controller == "feedforward":
        # the linearizing inputs with the backstepping correction switched off
        return (
            physical_inputs(0.0, 0.0, u_err[0], u_err[-1], ref.ur[0], ref.ur[-1], ref.U0r, ref.U1r, p),
            None,
        )
    inj = boundary_injections(u[0], u[-1], ref.ur[0], ref.ur[-1], obs.v_hat, p)
    w = simpson_weights(u.grid.n, u.grid.spacing)
    # the boundary values of the transformed error are measured
    v0, v1 = inj[0] + obs.v_hat[0], inj[1] + obs.v_hat[-1]
    V0 = table.k_diag0 * v0 - float(w @ (table.k_row0 * obs.v_hat.values))
    V1 = table.k_diag1 * v1 + float(w @ (table.k_row1 * obs.v_hat.values))
    U = output_feedback(u[0], u[-1], obs.v_hat, ref.ur, ref.U0r, ref.U1r, table, p)
    return U, (V0, V1, inj)


def _observer_step(obs, u, ref, V, p, ab, h, dt, t):
    V0, V1, inj = V
    g0, g1 = observer_boundary_slopes(obs, inj, (V0, V1))
    rhs = obs.v_hat.values + dt * (obs.p2.values * inj[0] + obs.p1.values * inj[1])
    new = _implicit_solve(ab, rhs, h, dt, p.epsilon, g0, g1)
    _check_state(new, t + dt)
    return obs.with_estimate(obs.v_hat.with_values(new))


__all__ = [
    "CONTROLLERS",
    "SCHEMES",
    "SimConfig",
    "SimResult",
    "density_from_moskowitz",
    "hj_rhs",
    "moskowitz_from_density",
    "run_closed_loop",
    "step",
    "traffic_config",
    "traffic_flux",
    "traffic_initial_state",
]
