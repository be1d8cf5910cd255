"""Command-line front end.

Verbs:
  analyze   closed-form values at one operating point
  solve     optimal decision threshold, or (lambda, rho) under a power budget
  simulate  one Monte-Carlo run, optional per-slot trace file
  sweep     run a figure-style grid from a JSON config, emit CSV
  delay     threshold and throughput meeting a target delay bound
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

from . import closed_form as cf
from . import solvers
from .channel import rayleigh
from .policies import PolicySpec, identity, log_capacity
from .simulator import SimConfig, TRACE_COLUMNS, run
from .special_functions import DEFAULT_QUAD, QuadratureSpec
from .sweeps import ConfigError, COLUMNS, parse_config, run_sweep, write_csv

__all__ = ["main"]


def _quad_from_tol(tol: float | None) -> QuadratureSpec:
    if tol is None:
        return DEFAULT_QUAD
    return QuadratureSpec(abs_tol=tol, rel_tol=10.0 * tol)


def _decision(kind: str):
    return identity() if kind == "identity" else log_capacity()


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=float)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_analyze(args) -> int:
    quad = _quad_from_tol(args.tol)
    ms, mr = rayleigh(args.omega_s), rayleigh(args.omega_r)
    f = _decision(args.decision_fn)
    payload = {
        "omega_s": args.omega_s,
        "omega_r": args.omega_r,
        "rho": args.rho,
        "decision_fn": args.decision_fn,
        "tau_conv1": cf.tau_conv1_rayleigh(args.omega_s, args.omega_r),
        "tau_conv2": cf.tau_conv2_rayleigh(args.omega_s, args.omega_r),
        "arrival_rate": cf.arrival_rate(f, args.rho, ms, mr, quad),
        "departure_rate": cf.tau_max(f, args.rho, ms, mr, quad),
        "threshold_residual": cf.threshold_residual(f, args.rho, ms, mr, quad),
    }
    if args.decision_fn == "identity":
        m = cf.delay_moments(args.rho, args.omega_s, args.omega_r, quad)
        payload["queue_load_xi"] = m.xi
        if m.xi < 1.0:
            payload["delay_upper_bound"] = cf.delay_upper_bound(m)
    _emit(payload, args.out)
    return 0


def _cmd_solve(args) -> int:
    quad = _quad_from_tol(args.tol)
    ms, mr = rayleigh(args.omega_s), rayleigh(args.omega_r)
    if args.gamma_bar is not None:
        res = solvers.solve_lambda_rho(ms, mr, args.gamma_bar, quad)
        payload = {
            "mode": "power_allocation",
            "gamma_bar": args.gamma_bar,
            "lambda": res.lam,
            "rho": res.rho,
            "tau": res.tau,
            "residuals": list(res.residuals),
            "tau_conv2_pa": solvers.tau_conv2_pa_rayleigh(
                args.omega_s, args.omega_r, args.gamma_bar
            ),
        }
    else:
        res = solvers.solve_rho_opt(_decision(args.decision_fn), ms, mr, quad)
        payload = {
            "mode": "threshold",
            "decision_fn": args.decision_fn,
            "rho_opt": res.rho,
            "tau_max": res.tau,
            "residuals": list(res.residuals),
            "tau_conv2": cf.tau_conv2_rayleigh(args.omega_s, args.omega_r),
        }
    payload["iterations"] = res.iterations
    payload["converged"] = res.converged
    _emit(payload, args.out)
    return 0 if res.converged else 1


def _cmd_simulate(args) -> int:
    policy = PolicySpec(
        protocol=args.protocol,
        rho=args.rho,
        lam=args.lam,
        gamma_bar=args.gamma_bar,
        q_max=args.q_max,
        decision_fn=_decision(args.decision_fn),
    )
    config = SimConfig(
        policy=policy,
        model_s=rayleigh(args.omega_s),
        model_r=rayleigh(args.omega_r),
        slots=args.slots,
        seed=args.seed,
        warmup_slots=args.warmup,
        record_trace=args.trace is not None,
    )
    metrics = run(config)
    if args.trace is not None and metrics.trace is not None:
        with open(args.trace, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in metrics.trace:
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
    payload = {
        f.name: getattr(metrics, f.name)
        for f in dataclasses.fields(metrics)
        if f.name != "trace"
    }
    _emit(payload, args.out)
    return 0


def _cmd_sweep(args) -> int:
    plan = parse_config(args.config)
    rows = run_sweep(plan, jobs=args.jobs, quad=_quad_from_tol(args.tol))
    out = args.out or plan.out
    if out is None:
        raise ConfigError("no output path: pass --out or set 'out' in the config")
    write_csv(rows, plan.experiment, out, timestamp=not args.no_timestamp)
    failures = [r for r in rows if r.get("error")]
    print(f"wrote {len(rows)} rows ({plan.experiment}) to {out}", file=sys.stderr)
    for r in failures:
        print(f"  point failed: {r['error']}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_delay(args) -> int:
    quad = _quad_from_tol(args.tol)
    res = solvers.solve_rho_for_delay(args.target, args.omega_s, args.omega_r, quad)
    m = cf.delay_moments(res.rho, args.omega_s, args.omega_r, quad)
    payload = {
        "target_delay": args.target,
        "rho": res.rho,
        "tau": res.tau,
        "queue_load_xi": m.xi,
        "delay_upper_bound": cf.delay_upper_bound(m),
        "converged": res.converged,
    }
    _emit(payload, args.out)
    return 0 if res.converged else 1


def _add_link_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega-s", type=float, default=1.0,
                   help="mean of the source-relay link (SNR or gain)")
    p.add_argument("--omega-r", type=float, default=1.0,
                   help="mean of the relay-destination link (SNR or gain)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bufrelay",
        description="Buffer-aided relaying with adaptive link selection: "
                    "closed forms, solvers, and Monte-Carlo simulation.",
    )
    parser.add_argument("--seed", type=int, default=12345, help="master RNG seed")
    parser.add_argument("--out", help="write output here instead of stdout")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="suppress the timestamp header line in CSV output")
    parser.add_argument("--tol", type=float,
                        help="quadrature absolute tolerance (relative = 10x)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form values at one point")
    _add_link_args(p)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--decision-fn", choices=["identity", "log_capacity"],
                   default="identity")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("solve", help="rho_opt, or (lambda, rho) with --gamma-bar")
    _add_link_args(p)
    p.add_argument("--decision-fn", choices=["identity", "log_capacity"],
                   default="log_capacity")
    p.add_argument("--gamma-bar", type=float,
                   help="average power budget; switches to joint power allocation")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("simulate", help="one Monte-Carlo run")
    _add_link_args(p)
    p.add_argument("--protocol", required=True,
                   choices=["conv_no_buffer", "conv_buffer", "adaptive_fixed",
                            "adaptive_pa", "starved", "queue_limited"])
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--lam", type=float)
    p.add_argument("--gamma-bar", type=float)
    p.add_argument("--q-max", type=float, default=math.inf)
    p.add_argument("--decision-fn", choices=["identity", "log_capacity"],
                   default="log_capacity")
    p.add_argument("--slots", type=int, default=1_000_000)
    p.add_argument("--warmup", type=int, default=10_000)
    p.add_argument("--trace", help="write a per-slot trace CSV to this path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a JSON-configured experiment grid")
    p.add_argument("config", help="path to the sweep config (JSON)")
    p.add_argument("--jobs", type=int, default=1,
                   help="run up to this many grid points concurrently")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("delay", help="threshold meeting a target delay bound")
    _add_link_args(p)
    p.add_argument("--target", type=float, required=True,
                   help="desired upper bound on mean delay, in slots")
    p.set_defaults(func=_cmd_delay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
