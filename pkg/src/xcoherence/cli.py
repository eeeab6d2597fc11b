"""Command line entry point: run an analytic and/or Monte Carlo g2 scan.

Exit codes
----------
0  success
2  configuration error (syntax, validation, integrator guards)
3  unstable system (no stationary state)
4  numerical failure (non-diagonalizable drift, zero detector intensity,
   Lyapunov check failure)
5  I/O error writing results
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import Mode, OracleConfig, RunSpec, load_config, serialize_config
from .correlations import G2Trace, check_lyapunov, g2_cross, stationary_kernel
from .errors import (ConfigSyntaxError, ConfigValidationError, ModelError,
                     NonDiagonalizableError, StepGuardError, StepTooCoarseError,
                     TauOffGridError, UnstableSystemError, ZeroIntensityError)
from .model import ModeSystem, validate
from .oracle import SimParams, estimate_g2, simulate_ensemble

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

CSV_HEADER = ("tau", "g2_analytic", "g2_mc", "g2_mc_stderr")
CSV_NAME = "g2.csv"
REPORT_NAME = "report.txt"

_EXIT_CODES = (
    ((ConfigSyntaxError, ConfigValidationError, ModelError, StepGuardError,
      TauOffGridError), EXIT_CONFIG),
    ((UnstableSystemError,), EXIT_UNSTABLE),
    ((NonDiagonalizableError, ZeroIntensityError, StepTooCoarseError), EXIT_NUMERICAL),
    ((OSError,), EXIT_IO),
)


def exit_code_for(exc: BaseException) -> int:
    for types, code in _EXIT_CODES:
        if isinstance(exc, types):
            return code
    raise exc


@dataclass(frozen=True, eq=False)
class ResultSet:
    system: ModeSystem
    tau: np.ndarray
    eigenvalues: np.ndarray
    cond: float
    reconstruction_residual: float
    covariance: np.ndarray
    lyapunov_residual: float
    analytic: G2Trace | None = None
    monte_carlo: G2Trace | None = None
    sim: SimParams | None = None


def run(spec: RunSpec) -> ResultSet:
    """Compute every result requested by ``spec``. Raises on failure; writes nothing."""
    system = spec.build_system()
    diag = validate(system)
    if not diag.stable:
        raise UnstableSystemError(
            f"min Re(lambda) = {diag.min_real:.6g}; no stationary state exists")
    kernel = stationary_kernel(system)
    covariance, residual = check_lyapunov(system, kernel)
    geom = spec.detectors.geometry()
    tau = spec.tau_grid

    analytic = g2_cross(system, geom, tau, kernel=kernel) if spec.mode.analytic else None
    mc = sim = None
    if spec.mode.monte_carlo:
        sim = spec.sim.sim_params(spec.tau_spacing)
        ens = simulate_ensemble(system, sim)
        mc = estimate_g2(ens, geom, tau)
    return ResultSet(
        system=system,
        tau=tau,
        eigenvalues=kernel.decomp.eigenvalues,
        cond=kernel.decomp.cond,
        reconstruction_residual=kernel.decomp.residual,
        covariance=covariance,
        lyapunov_residual=residual,
        analytic=analytic,
        monte_carlo=mc,
        sim=sim,
    )


def _f(x) -> str:
    return repr(float(x))


def _c(z) -> str:
    return repr(complex(z)).strip("()")


def render_csv(results: ResultSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    an, mc = results.analytic, results.monte_carlo
    for k, t in enumerate(results.tau):
        writer.writerow([
            _f(t),
            _f(an.values[k]) if an is not None else "",
            _f(mc.values[k]) if mc is not None else "",
            _f(mc.stderr[k]) if mc is not None else "",
        ])
    return buf.getvalue()


def render_report(results: ResultSet, spec: RunSpec) -> str:
    lines = [f"xcoherence {__version__} run report", ""]
    lines += ["== configuration ==", serialize_config(spec).rstrip(), ""]
    lines += ["== spectrum of the drift matrix =="]
    lines += [f"lambda[{k}] = {_c(lam)}" for k, lam in enumerate(results.eigenvalues)]
    lines += [f"cond(U) = {_f(results.cond)}",
              f"reconstruction residual = {_f(results.reconstruction_residual)}", ""]
    lines += ["== steady covariance <x x^dagger> =="]
    lines += ["  ".join(_c(v) for v in row) for row in results.covariance]
    lines += [f"Lyapunov residual ||M S + S M^dagger - D|| = {_f(results.lyapunov_residual)}", ""]
    if results.analytic is not None:
        v = results.analytic.values
        lines += ["== analytic g2 ==",
                  f"points = {v.size}", f"min = {_f(v.min())}", f"max = {_f(v.max())}",
                  f"at tau_max = {_f(v[-1])}", ""]
    if results.monte_carlo is not None:
        sim = results.sim
        mc = results.monte_carlo
        lines += ["== Monte Carlo oracle ==",
                  f"seed = {sim.seed}",
                  f"trajectories = {sim.n_traj}",
                  f"effective dt = {_f(sim.dt)}",
                  f"sample interval = {_f(sim.sample_interval)}",
                  f"burn_in = {_f(sim.burn_in)}",
                  f"horizon = {_f(sim.horizon)}",
                  f"max stderr = {_f(mc.stderr.max())}"]
        if results.analytic is not None:
            z = np.abs(mc.values - results.analytic.values) / mc.stderr
            lines += [f"max |mc - analytic| / stderr = {_f(z.max())}",
                      f"points beyond 3 stderr = {int(np.sum(z > 3))} of {z.size}"]
        lines.append("")
    return "\n".join(lines)


def write_results(results: ResultSet, spec: RunSpec) -> tuple[str, str]:
    """Write ``g2.csv`` and ``report.txt`` into ``spec.output_dir``."""
    csv_text = render_csv(results)
    report = render_report(results, spec)
    out = spec.output_dir
    paths = (os.path.join(out, CSV_NAME), os.path.join(out, REPORT_NAME))
    try:
        os.makedirs(out, exist_ok=True)
        for path, text in zip(paths, (csv_text, report)):
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {out!r}: {exc.strerror}") from exc
    return paths


def _apply_overrides(spec: RunSpec, args) -> RunSpec:
    changes = {"output_dir": args.output}
    if args.mode is not None:
        changes["mode"] = Mode(args.mode)
    if args.tau_max is not None:
        changes["tau_max"] = args.tau_max
    if args.tau_steps is not None:
        changes["tau_steps"] = args.tau_steps
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigValidationError("seed must be an unsigned 64-bit integer")
        if spec.sim is not None:
            changes["sim"] = OracleConfig(spec.sim.dt, spec.sim.burn_in, spec.sim.horizon,
                                          spec.sim.n_traj, args.seed)
    return spec.with_overrides(**changes)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="xcoherence",
        description="Joint matter-wave/optical detection statistics: g2 cross-correlation scan.")
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--output", default="xcoherence-out", help="output directory")
    p.add_argument("--mode", choices=[m.value for m in Mode], help="override [scan] mode")
    p.add_argument("--seed", type=int, help="override [oracle] seed")
    p.add_argument("--tau-max", type=float, help="override [scan] tau_max")
    p.add_argument("--tau-steps", type=int, help="override [scan] tau_steps")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _apply_overrides(load_config(args.config), args)
        results = run(spec)
        paths = write_results(results, spec)
    except (ConfigSyntaxError, ConfigValidationError, ModelError, StepGuardError,
            TauOffGridError, UnstableSystemError, NonDiagonalizableError,
            ZeroIntensityError, StepTooCoarseError, OSError) as exc:
        code = exit_code_for(exc)
        print(f"xcoherence: error: {exc}", file=sys.stderr)
        return code
    if not args.quiet:
        for path in paths:
            print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
