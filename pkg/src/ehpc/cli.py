"""Command-line front end.

Subcommands: threshold | bounds | solve | simulate | curves | sweep |
phicheck | verify.  Tabular commands emit deterministic CSV (12 significant
digits, LF endings); scalar commands emit JSON.  Exit codes: 0 success,
2 domain error, 3 numerical non-convergence, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analysis, bellman, sim, threshold
from .distributions import parse_distribution
from .errors import ConvergenceError, DomainError, GreedyAlwaysOptimalError
from .reward import AwgnReward, LinearReward


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the CLI contract is 64
        raise _UsageError(message)


def _parse_reward(text: str):
    name, _, params = text.strip().partition(":")
    name = name.lower()
    if name == "awgn":
        if params:
            raise DomainError("awgn reward takes no parameters")
        return AwgnReward()
    if name == "linear":
        key, _, value = params.partition("=")
        if key.strip() != "slope":
            raise DomainError("linear reward needs slope=<value>")
        try:
            return LinearReward(float(value))
        except ValueError as exc:
            raise DomainError(f"bad slope: {exc}") from exc
    raise DomainError(f"unknown reward {text!r}")


def _parse_policy(text: str, grid_n: int):
    name, _, params = text.strip().partition(":")
    name = name.lower()
    if name == "greedy":
        return ("greedy", None)
    if name == "modified":
        key, _, value = params.partition("=")
        if key.strip() != "eps":
            raise DomainError("modified policy needs eps=<value>")
        try:
            return ("modified", float(value))
        except ValueError as exc:
            raise DomainError(f"bad eps: {exc}") from exc
    if name == "optimal":
        if params:
            key, _, value = params.partition("=")
            if key.strip() != "grid_n":
                raise DomainError("optimal policy accepts only grid_n=<int>")
            try:
                grid_n = int(value)
            except ValueError as exc:
                raise DomainError(f"bad grid_n: {exc}") from exc
        return ("optimal", grid_n)
    raise DomainError(f"unknown policy {text!r}")


def _jsonable(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.floating):
        return _jsonable(float(value))
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out_path: str | None) -> None:
    _emit(json.dumps(_jsonable(obj), sort_keys=True) + "\n", out_path)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ehpc", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--out", default=None, help="write output to this path")
        return p

    p = add("threshold", help="threshold and all bounds")
    p.add_argument("--dist", required=True)
    p.add_argument("--reward", default="awgn")
    p.add_argument("--scan-points", type=int, default=threshold.DEFAULT_SCAN_POINTS)
    p.add_argument("--json", action="store_true", help="accepted for symmetry")

    p = add("bounds", help="envelope and semi-universal bounds only")
    p.add_argument("--dist", required=True)
    p.add_argument("--reward", default="awgn")
    p.add_argument("--scan-points", type=int, default=threshold.DEFAULT_SCAN_POINTS)
    p.add_argument("--json", action="store_true")

    p = add("solve", help="Bellman solution on a battery grid")
    p.add_argument("--dist", required=True)
    p.add_argument("--reward", default="awgn")
    p.add_argument("--capacity", type=float, required=True)
    p.add_argument("--grid-n", type=int, default=512)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=100_000)
    p.add_argument("--json", action="store_true", help="emit the summary instead of CSV")

    p = add("simulate", help="seeded trajectory simulation")
    p.add_argument("--dist", required=True)
    p.add_argument("--reward", default="awgn")
    p.add_argument("--capacity", type=float, required=True)
    p.add_argument("--policy", default="greedy")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--grid-n", type=int, default=512, help="grid for policy=optimal")
    p.add_argument("--json", action="store_true")

    p = add("curves", help="throughput curves over a capacity grid")
    p.add_argument("--dist", required=True)
    p.add_argument("--reward", default="awgn")
    p.add_argument("--c-min", type=float, required=True)
    p.add_argument("--c-max", type=float, required=True)
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--grid-n", type=int, default=256)
    p.add_argument("--json", action="store_true")

    p = add("sweep", help="asymptotic threshold-to-reference sweep")
    p.add_argument("--family", required=True, choices=analysis.SWEEP_FAMILIES)
    p.add_argument("--regime", required=True, choices=("small", "large"))
    p.add_argument("--mu", required=True, help="comma-separated ascending means")
    p.add_argument("--json", action="store_true")

    p = add("phicheck", help="saving-objective monotonicity scan")
    p.add_argument("--dist", required=True)
    p.add_argument("--reward", default="awgn")
    p.add_argument("--capacity", type=float, required=True)
    p.add_argument("--b-points", type=int, default=50)
    p.add_argument("--g-points", type=int, default=200)
    p.add_argument("--json", action="store_true")

    p = add("verify", help="run the acceptance checks")
    p.add_argument("--criteria", default=None, help="comma-separated subset, e.g. 1,3")
    return parser


def _threshold_payload(args, with_c_star: bool):
    d = parse_distribution(args.dist)
    r = _parse_reward(args.reward)
    try:
        rep = threshold.threshold_report(d, r, scan_points=args.scan_points)
    except GreedyAlwaysOptimalError:
        return {"greedy_optimal_for_all_c": True, "mu": d.mean}
    payload = {
        "c_lower": rep.c_lower,
        "c_upper": rep.c_upper,
        "c_upper_unbounded": rep.c_upper_unbounded,
        "semi_lower": rep.semi_lower,
        "semi_upper": rep.semi_upper,
        "mu": rep.mu,
        "x_lo": rep.x_lo,
        "x_hi": rep.x_hi,
        "x_hi_cap": rep.x_hi_cap,
        "scan_points": rep.scan_points,
    }
    if with_c_star:
        payload["c_star"] = rep.c_star
        payload["method"] = rep.method
        payload["residual"] = rep.residual
    return payload


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("missing subcommand")
        return _dispatch(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 64
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, sim.AdmissibilityError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


def _dispatch(args) -> int:
    if args.command == "threshold":
        _emit_json(_threshold_payload(args, with_c_star=True), args.out)
        return 0

    if args.command == "bounds":
        _emit_json(_threshold_payload(args, with_c_star=False), args.out)
        return 0

    if args.command == "solve":
        d = parse_distribution(args.dist)
        r = _parse_reward(args.reward)
        sol = bellman.solve(
            d, r, args.capacity, grid_n=args.grid_n, tol=args.tol,
            max_sweeps=args.max_sweeps,
        )
        if args.json:
            _emit_json(bellman.solution_summary(sol), args.out)
        else:
            _emit(bellman.solution_to_csv(sol), args.out)
        return 0

    if args.command == "simulate":
        d = parse_distribution(args.dist)
        r = _parse_reward(args.reward)
        kind, param = _parse_policy(args.policy, args.grid_n)
        if kind == "greedy":
            policy = sim.GreedyPolicy()
        elif kind == "modified":
            policy = sim.ModifiedGreedyPolicy(param)
        else:
            sol = bellman.solve(d, r, args.capacity, grid_n=param)
            policy = sim.SolutionPolicy(sol)
        res = sim.simulate(policy, d, r, args.capacity, args.steps, args.seed)
        _emit_json(
            {
                "steps": res.steps,
                "avg_reward": res.avg_reward,
                "ci_halfwidth_95": res.ci_halfwidth_95,
                "seed": res.seed,
                "final_battery": res.final_battery,
                "policy": args.policy,
                "capacity": args.capacity,
            },
            args.out,
        )
        return 0

    if args.command == "curves":
        d = parse_distribution(args.dist)
        r = _parse_reward(args.reward)
        rows = analysis.curves(
            d, r, args.c_min, args.c_max, args.points, grid_n=args.grid_n
        )
        if args.json:
            _emit_json([row.__dict__ for row in rows], args.out)
        else:
            _emit(analysis.curves_csv(rows), args.out)
        return 0

    if args.command == "sweep":
        try:
            mus = [float(v) for v in args.mu.split(",") if v.strip()]
        except ValueError as exc:
            raise DomainError(f"bad mu list: {exc}") from exc
        rows = analysis.asymptotic_sweep(args.family, args.regime, mus)
        if args.json:
            _emit_json([row.__dict__ for row in rows], args.out)
        else:
            _emit(analysis.sweep_csv(rows), args.out)
        return 0

    if args.command == "phicheck":
        d = parse_distribution(args.dist)
        r = _parse_reward(args.reward)
        c = args.capacity
        min_diff = math.inf
        min_left = math.inf
        for b in np.linspace(0.0, c, args.b_points):
            if b <= 0.0:
                continue
            gs = np.linspace(0.0, b, args.g_points)
            vals = [bellman.phi_value(d, r, c, float(b), float(g)) for g in gs]
            diffs = np.diff(vals)
            if diffs.size:
                min_diff = min(min_diff, float(diffs.min()))
            for g in gs[1:]:
                left, _ = bellman.phi_semi_derivatives(d, r, c, float(b), float(g))
                min_left = min(min_left, left)
        _emit_json(
            {
                "capacity": c,
                "monotone": min_diff >= -1e-9,
                "min_increment": min_diff,
                "min_left_derivative": min_left,
            },
            args.out,
        )
        return 0

    if args.command == "verify":
        from . import verify  # deferred: verify drives the CLI in its checks

        numbers = None
        if args.criteria:
            try:
                numbers = [int(v) for v in args.criteria.split(",") if v.strip()]
            except ValueError as exc:
                raise DomainError(f"bad criteria list: {exc}") from exc
        try:
            results = verify.run(numbers, stream=sys.stdout)
        except KeyError as exc:
            raise DomainError(str(exc)) from exc
        return 0 if all(r.passed for r in results) else 1

    raise _UsageError(f"unknown subcommand {args.command!r}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
