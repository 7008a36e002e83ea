"""Command-line experiment runner.

Subcommands::

    hjbilateral trajgen  --config FILE [--config FILE ...] [--out DIR]
    hjbilateral simulate --config FILE [--config FILE ...] [--out DIR]
    hjbilateral verify   [--suite all|kernels|gevrey|norms|roundtrips] [--out DIR]

Configurations are INI files with the sections ``scenario``, ``params``,
``grid``, ``time``, ``controller``, ``reference``, ``initial`` and
``output``.  A bare name such as ``traffic`` refers to a configuration
shipped with the package.  Exit status: 0 success, 1 a check failed,
2 a runtime or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import Grid, Params
from .exceptions import ConfigError, HJError
from .sim import SimConfig, run_closed_loop
from .trajgen import (
    ReferencePlan,
    gevrey_signal_const,
    gevrey_signal_ramp,
    gevrey_signal_sine,
    reference_slope,
    series_reference,
    reference_profile,
    smallness_margin,
)
from .verify import SUITES, all_passed, fit_decay_rate, lyapunov_decay, run_suite, write_report

EXIT_OK, EXIT_CHECK, EXIT_ERROR = 0, 1, 2

DEFAULTS = {
    "scenario": {"name": "run"},
    "params": {"epsilon": "0.25", "a": "1", "b": "1", "c1": "1", "c2": "1"},
    "grid": {"n": "201"},
    "time": {"t0": "0", "t_end": "8", "dt": "1e-3", "scheme": "semi-implicit", "record_every": "20"},
    "controller": {"type": "fullstate", "compare": "none"},
    "reference": {
        "family": "traffic",
        "d": "0.25",
        "x0": "0.5",
        "k": "30",
        "term_tol": "1e-12",
        "nt": "101",
        "require_smallness": "yes",
    },
    "initial": {"u0": "reference", "amplitude": "0.1"},
    "output": {"fit_window": "1, 5"},
}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class LoadedConfig:
    parser: configparser.ConfigParser
    source: str
    lines: dict  # (section, key) -> line number

    def get(self, section, key):
        return self.parser.get(section, key)

    def _fail(self, section, key, message):
        raise ConfigError(f"[{section}] {key}: {message}", line=self.lines.get((section, key.lower())))

    def number(self, section, key, kind=float):
        raw = self.get(section, key)
        try:
            return kind(raw)
        except ValueError:
            self._fail(section, key, f"expected a {kind.__name__}, got {raw!r}")

    def choice(self, section, key, options):
        raw = self.get(section, key).strip().lower()
        if raw not in options:
            self._fail(section, key, f"expected one of {', '.join(options)}, got {raw!r}")
        return raw

    def flag(self, section, key):
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self._fail(section, key, f"expected yes/no, got {self.get(section, key)!r}")


def _line_numbers(text: str) -> dict:
    lines, section = {}, None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", stripped)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = lineno
    return lines


def shipped_configs() -> list:
    return sorted(p.stem for p in resources.files("hjbilateral").joinpath("data").iterdir()
                  if p.name.endswith(".ini"))


def resolve_config_path(path: str):
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    if path in shipped_configs():
        res = resources.files("hjbilateral").joinpath("data", f"{path}.ini")
        return res.read_text(), f"<shipped:{path}>"
    raise ConfigError(f"configuration file not found: {path}")


def load_config(path: str, overrides: dict | None = None) -> LoadedConfig:
    text, source = resolve_config_path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str.lower
    parser.read_dict(DEFAULTS)
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse {source}", line=lineno) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(":")[-1].strip(), line=exc.lineno) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing section header", line=exc.lineno) from exc
    known = set(DEFAULTS)
    lines = _line_numbers(text)
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]", line=_section_line(text, section))
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line=lines.get((section, key)))
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            parser.set(section, key, str(value))
    return LoadedConfig(parser, source, lines)


def _section_line(text, section):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{section}]":
            return lineno
    return None


def build_params(cfg: LoadedConfig) -> Params:
    values = {k: cfg.number("params", k) for k in ("epsilon", "a", "b", "c1", "c2")}
    try:
        return Params(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), line=cfg.lines.get(("params", "epsilon"))) from exc


def build_plan(cfg: LoadedConfig) -> ReferencePlan:
    family = cfg.choice("reference", "family", ("traffic", "sine", "zero"))
    K = cfg.number("reference", "k", int)
    tol = cfg.number("reference", "term_tol")
    if family == "traffic":
        return ReferencePlan(1.0, gevrey_signal_ramp(0.25), gevrey_signal_const(-0.5), K, tol)
    x0 = cfg.number("reference", "x0")
    if family == "sine":
        d = cfg.number("reference", "d")
        return ReferencePlan(x0, gevrey_signal_const(0.0), gevrey_signal_sine(d), K, tol)
    return ReferencePlan(x0, gevrey_signal_const(0.0), gevrey_signal_const(0.0), K, tol)


def build_sim_config(cfg: LoadedConfig, controller: str | None = None) -> SimConfig:
    p = build_params(cfg)
    grid = Grid(cfg.number("grid", "n", int))
    initial = cfg.choice("initial", "u0", ("reference", "perturbed"))
    amplitude = cfg.number("initial", "amplitude")
    u0 = None
    if initial == "perturbed":
        plan = build_plan(cfg)
        t0 = cfg.number("time", "t0")
        vr, vr_x = series_reference(plan, p, t0, grid)
        ur, _, _ = reference_profile(vr, vr_x, p, t0)
        u0 = grid.sample(lambda x: ur.values + amplitude * np.sin(np.pi * x))
    ctrl = controller or cfg.choice(
        "controller", "type", ("fullstate", "output_feedback", "static", "unilateral", "feedforward")
    )
    try:
        return SimConfig(
            params=p,
            grid=grid,
            t0=cfg.number("time", "t0"),
            t_end=cfg.number("time", "t_end"),
            dt=cfg.number("time", "dt"),
            scheme=cfg.choice("time", "scheme", ("explicit", "semi-implicit")),
            controller=ctrl,
            reference=build_plan(cfg),
            record_every=cfg.number("time", "record_every", int),
            u0=u0,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), line=cfg.lines.get(("time", "dt"))) from exc


def echo_config(cfg: LoadedConfig, out: Path) -> None:
    with open(out / "effective_config.ini", "w") as fh:
        cfg.parser.write(fh)


# ---------------------------------------------------------------------------
# commands


def _copy_template(name: str, out: Path) -> None:
    src = resources.files("hjbilateral").joinpath("data", name)
    (out / name).write_text(src.read_text())


def cmd_trajgen(config_path: str, out: Path, overrides=None) -> int:
    cfg = load_config(config_path, overrides)
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out)
    p = build_params(cfg)
    grid = Grid(cfg.number("grid", "n", int))
    plan = build_plan(cfg)
    t0, t_end = cfg.number("time", "t0"), cfg.number("time", "t_end")
    times = np.linspace(t0, t_end, cfg.number("reference", "nt", int))
    margin = smallness_margin(plan, p, grid, times)
    print(f"smallness margin exp(-|ab/2eps|) - sup|v_ref| = {margin:.6g}")
    with open(out / "reference_field.csv", "w", newline="") as fa, open(
        out / "reference_inputs.csv", "w", newline=""
    ) as fb:
        wa, wb = csv.writer(fa), csv.writer(fb)
        wa.writerow(["t", "x", "u_ref", "u_ref_x", "v_ref"])
        wb.writerow(["t", "U0_ref", "U1_ref"])
        for t in times:
            vr, vr_x = series_reference(plan, p, float(t), grid)
            ur, U0r, U1r = reference_profile(vr, vr_x, p, float(t))
            urx = reference_slope(vr, vr_x, p)
            for j, x in enumerate(grid.nodes):
                wa.writerow([f"{t:.12g}", f"{x:.12g}", f"{ur[j]:.12g}", f"{urx[j]:.12g}", f"{vr[j]:.12g}"])
            wb.writerow([f"{t:.12g}", f"{U0r:.12g}", f"{U1r:.12g}"])
    _copy_template("reference.gp", out)
    if margin < 0 and cfg.flag("reference", "require_smallness"):
        print("smallness condition violated: the reference leaves the certified region", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def summarize(result, cfg: LoadedConfig) -> dict:
    """Scalar digest of a run: tracking, decay rates, control effort, density."""
    window = tuple(float(s) for s in cfg.get("output", "fit_window").split(","))
    p = result.config.params
    summary = {
        "controller": result.config.controller,
        "final_time": float(result.times[-1]),
        "final_tracking_error_at_1": float(abs(result.tracking_error_at_1()[-1])),
        "sup_u_tilde_initial": float(result.norms["sup_u_tilde"][0]),
        "h1_u_tilde_initial": float(result.norms["h1_u_tilde"][0]),
        "h1_u_tilde_final": float(result.norms["h1_u_tilde"][-1]),
        "target_rate": p.c1 + p.decay,
        "S1_decay_rate": lyapunov_decay(result, window).rate,
        "max_abs_U0": result.max_abs_U0,
        "max_abs_U1": result.max_abs_U1,
        "final_density_deviation": float(result.norms["rho_deviation"][-1]),
    }
    if "h1_e" in result.norms:
        summary["observer_target_rate"] = p.c2 + p.decay
        summary["h1_e_decay_rate"] = fit_decay_rate(result.times, result.norms["h1_e"], window).rate
    return summary


def _write_summary(summary: dict, path: Path) -> None:
    with open(path, "w") as fh:
        for key, value in summary.items():
            fh.write(f"{key} = {value:.10g}\n" if isinstance(value, float) else f"{key} = {value}\n")


def _simulate_one(cfg: LoadedConfig, controller: str | None, out: Path) -> dict:
    result = run_closed_loop(build_sim_config(cfg, controller))
    out.mkdir(parents=True, exist_ok=True)
    result.write_series_csv(out / "series.csv")
    result.write_fields_csv(out / "fields.csv")
    summary = summarize(result, cfg)
    _write_summary(summary, out / "summary.txt")
    return summary


def cmd_simulate(config_path: str, out: Path, overrides=None) -> int:
    cfg = load_config(config_path, overrides)
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out)
    for name in ("tracking.gp", "density.gp", "effort.gp"):
        _copy_template(name, out)
    compare = cfg.choice("controller", "compare", ("none", "unilateral"))
    summary = _simulate_one(cfg, None, out)
    for key, value in summary.items():
        print(f"{key} = {value}")
    if compare == "none":
        return EXIT_OK
    other = _simulate_one(cfg, compare, out / compare)
    ratio = summary["max_abs_U1"] / other["max_abs_U1"]
    with open(out / "compare.txt", "w") as fh:
        fh.write(f"max_abs_U1_bilateral = {summary['max_abs_U1']:.10g}\n")
        fh.write(f"max_abs_U1_{compare} = {other['max_abs_U1']:.10g}\n")
        fh.write(f"ratio = {ratio:.10g}\n")
    print(f"max|U1| {summary['controller']} / {compare} = {ratio:.6g}")
    return EXIT_OK if ratio < 1.0 else EXIT_CHECK


def cmd_verify(suite: str, out: Path, kernel_rate_factor: float = 1.0) -> int:
    out.mkdir(parents=True, exist_ok=True)
    records = run_suite(suite, kernel_rate_factor=kernel_rate_factor)
    write_report(records, out / "verify_report.csv")
    failed = [r for r in records if not r.passed]
    for r in failed:
        print(f"FAIL {r.check} [{r.case}] measured={r.measured:.4g} bound={r.bound:.4g}")
    print(f"{len(records) - len(failed)}/{len(records)} checks passed")
    return EXIT_OK if all_passed(records) else EXIT_CHECK


# ---------------------------------------------------------------------------
# entry point


def _run_guarded(func, *args) -> int:
    try:
        return func(*args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except HJError as exc:
        when = getattr(exc, "time", None)
        suffix = f" (t = {when:.6g})" if isinstance(when, float) else ""
        print(f"error: {type(exc).__name__}: {exc}{suffix}", file=sys.stderr)
        return EXIT_ERROR


def _job(args):
    command, config_path, out, overrides = args
    func = cmd_trajgen if command == "trajgen" else cmd_simulate
    return _run_guarded(func, config_path, Path(out), overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjbilateral", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("trajgen", "simulate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", action="append", required=True, metavar="PATH",
                        help="INI file or shipped name; repeat to run several in parallel")
        sp.add_argument("--out", default="out", metavar="DIR")
        sp.add_argument("--grid-n", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--t-end", type=float)
        sp.add_argument("--workers", type=int, default=None)
    sv = sub.add_parser("verify")
    sv.add_argument("--suite", default="all", choices=SUITES)
    sv.add_argument("--out", default="out", metavar="DIR")
    sv.add_argument("--kernel-rate-factor", type=float, default=1.0,
                    help="evaluate kernels with a scaled rate (self-test of the residual check)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _run_guarded(cmd_verify, args.suite, Path(args.out), args.kernel_rate_factor)
    overrides = {("grid", "n"): args.grid_n, ("time", "dt"): args.dt, ("time", "t_end"): args.t_end}
    out = Path(args.out)
    if len(args.config) == 1:
        return _job((args.command, args.config[0], out, overrides))
    jobs = [(args.command, c, out / Path(c).stem, overrides) for c in args.config]
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        codes = list(pool.map(_job, jobs))
    return max(codes)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
