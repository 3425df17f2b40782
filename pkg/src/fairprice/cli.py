"""Command-line surface.

Subcommands:
  policy solve    optimal fair policy for an environment -> policy CSV
  fairness curve  revenue ratio rho(delta0) sweep -> CSV
  bandit run      one two-phase bandit trace -> CSV + summary JSON
  bandit sweep    relative regret vs horizon over repeated trials -> CSV
  plot            any of the emitted CSVs -> SVG line chart

Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bandit import COMPUTATIONAL, THEORETICAL, make_params, read_trace_csv, run_bandit
from .distributions import discretize
from .harness import (Environment, ExperimentConfig, loglog_slope,
                      read_rho_csv, read_sweep_csv, regret_sweep, rho_curve)
from .solver import (build_policy, evaluate_policy_revenue,
                     linear_optimal_policy, solve_dp, unconstrained_revenue,
                     write_policy, write_value_table_csv)
from .svgplot import save_chart


class ConfigError(Exception):
    pass


def _load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad JSON in {path}: {e}")


def _load_env(path) -> Environment:
    obj = _load_json(path)
    try:
        return Environment.from_json(obj)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid config {path}: {e}")


def parse_delta0_spec(spec: str) -> list[float]:
    """Either a single value '0.3' or an inclusive range 'a:b:step'."""
    if ":" not in spec:
        return [float(spec)]
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"bad delta0 range {spec!r}; expected a:b:step")
    a, b, step = (float(v) for v in parts)
    if step <= 0 or b < a:
        raise ConfigError(f"bad delta0 range {spec!r}")
    n = int((b - a) / step + 1e-9) + 1
    return [round(a + i * step, 12) for i in range(n)]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_policy_solve(args) -> int:
    env = _load_env(args.config)
    b = env.bounds()
    grid = discretize(env.utility_dist, b.B, args.eps)
    use_linear = (env.model.link.kind == "linear"
                  or (b.sigma_u > 0 and args.delta0 <= b.sigma_u / b.M_r))
    solution = None
    if use_linear:
        mu_u, nu_sq = env.moments()
        policy = linear_optimal_policy(env.model, mu_u, nu_sq, args.delta0,
                                       grid=grid, bounds=b)
    else:
        solution = solve_dp(env.model, grid, args.delta0, eps=args.eps,
                            keep_value_table=args.value_table is not None)
        policy = build_policy(solution, grid, args.delta0)
    if args.value_table is not None:
        if solution is None:
            print("note: linear fast path taken; no value table to export",
                  file=sys.stderr)
        else:
            write_value_table_csv(solution, args.value_table)
    revenue = evaluate_policy_revenue(policy, env.model, grid)
    rho = revenue / unconstrained_revenue(env.model, grid)
    write_policy(policy, args.out)
    print(json.dumps({"revenue": revenue, "rho": rho, "form": policy.form,
                      "out": str(args.out)}, indent=2))
    return 0


def cmd_fairness_curve(args) -> int:
    env = _load_env(args.config)
    values = parse_delta0_spec(args.delta0)
    rows = rho_curve(env, values, eps=args.eps, method=args.method,
                     out=args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_bandit_run(args) -> int:
    env = _load_env(args.config)
    seed = env.seed if args.seed is None else args.seed
    params = make_params(args.T, env.model.dim, args.delta0, args.mode)
    trace = run_bandit(env, params, np.random.default_rng(seed))
    trace.to_csv(args.out)
    summary = trace.summary_json(seed)
    Path(args.out).with_suffix(".json").write_text(
        json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_bandit_sweep(args) -> int:
    obj = _load_json(args.config)
    try:
        config = ExperimentConfig.from_json(obj)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid config {args.config}: {e}")
    if args.seed is not None:
        config.base_seed = args.seed
        config.seeds = None
    rows = regret_sweep(config, out=args.out)
    result = {"rows": len(rows), "out": str(args.out)}
    if len(rows) >= 2:
        result["slope"] = loglog_slope(
            [(r["T"], r["mean_rel_regret"]) for r in rows])
    print(json.dumps(result, indent=2))
    return 0


def cmd_plot(args) -> int:
    """Chart type is inferred from the CSV header."""
    path = Path(args.infile)
    if not path.exists():
        raise ConfigError(f"input not found: {args.infile}")
    header = path.read_text().splitlines()[0] if path.read_text() else ""
    if header == "delta0,rho":
        rows = read_rho_csv(path)
        series = [("rho", [r[0] for r in rows], [r[1] for r in rows])]
        save_chart(args.out, series, title=args.title or "cost of fairness",
                   xlabel="delta0", ylabel="rho")
    elif header == "T,mean_rel_regret,sd_rel_regret,n_trials":
        rows = read_sweep_csv(path)
        series = [("mean", [r["T"] for r in rows],
                   [r["mean_rel_regret"] for r in rows])]
        save_chart(args.out, series, title=args.title or "relative regret",
                   xlabel="T", ylabel="relative regret", logx=True, logy=True)
    elif header == "t,arm,price,y,instant_regret,cum_regret":
        cols = read_trace_csv(path)
        series = [("cum regret", cols["t"].tolist(),
                   cols["cum_regret"].tolist())]
        save_chart(args.out, series, title=args.title or "cumulative regret",
                   xlabel="t", ylabel="cumulative regret")
    else:
        raise ConfigError(f"unrecognized CSV header in {args.infile}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairprice",
        description="Utility-fair contextual pricing: solver, cost-of-"
                    "fairness curves, and demand-learning bandit simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    policy = sub.add_parser("policy", help="fair policy solver")
    psub = policy.add_subparsers(dest="subcommand", required=True)
    solve = psub.add_parser("solve", help="solve one environment")
    solve.add_argument("--config", required=True, help="environment JSON")
    solve.add_argument("--delta0", type=float, required=True)
    solve.add_argument("--eps", type=float, default=1e-2,
                       help="utility grid resolution (default 0.01)")
    solve.add_argument("--out", default="policy.csv")
    solve.add_argument("--value-table", default=None, metavar="PATH",
                       help="also dump the DP value table as CSV")
    solve.set_defaults(func=cmd_policy_solve)

    fairness = sub.add_parser("fairness", help="cost-of-fairness analysis")
    fsub = fairness.add_subparsers(dest="subcommand", required=True)
    curve = fsub.add_parser("curve", help="rho(delta0) sweep")
    curve.add_argument("--config", required=True, help="environment JSON")
    curve.add_argument("--delta0", required=True,
                       help="single value or inclusive range a:b:step")
    curve.add_argument("--eps", type=float, default=None,
                       help="numeric grid resolution (default 2B/100)")
    curve.add_argument("--method", choices=["auto", "closed", "numeric"],
                       default="auto")
    curve.add_argument("--out", default="curve.csv")
    curve.set_defaults(func=cmd_fairness_curve)

    bandit = sub.add_parser("bandit", help="demand-learning simulation")
    bsub = bandit.add_subparsers(dest="subcommand", required=True)
    run = bsub.add_parser("run", help="one trace")
    run.add_argument("--config", required=True, help="environment JSON")
    run.add_argument("--T", type=int, required=True, help="horizon (>= 8)")
    run.add_argument("--delta0", type=float, required=True)
    run.add_argument("--seed", type=int, default=None,
                     help="RNG seed (default: environment's)")
    run.add_argument("--mode", choices=[COMPUTATIONAL, THEORETICAL],
                     default=COMPUTATIONAL)
    run.add_argument("--out", default="trace.csv")
    run.set_defaults(func=cmd_bandit_run)
    sweep = bsub.add_parser("sweep", help="regret vs horizon")
    sweep.add_argument("--config", required=True, help="experiment JSON")
    sweep.add_argument("--seed", type=int, default=None,
                       help="override the config's base seed")
    sweep.add_argument("--out", default="sweep.csv")
    sweep.set_defaults(func=cmd_bandit_sweep)

    plot = sub.add_parser("plot", help="CSV -> SVG line chart")
    plot.add_argument("--in", dest="infile", required=True)
    plot.add_argument("--out", default="chart.svg")
    plot.add_argument("--title", default=None)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # solver/domain/IO failures
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
