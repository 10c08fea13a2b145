"""Command-line interface.

Subcommands: ``optimize``, ``rho-star``, ``capacity``, ``regress``,
``oracle``, ``generate``. Every command prints a human-readable report to
stdout and can write the same numbers as JSON with ``--out``; floats are
rounded to 12 significant digits in both so they agree at printed precision.

Exit codes (stable contract):
  0  success
  2  input error (files, config, parameters)
  3  costs kill every alpha (no valid allocation)
  4  convergence failure (cycle or iteration cap)
  5  capacity undefined (unbounded or never positive)
  6  singular / indefinite / degenerate covariance
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .covariance import pca_factor_model, sample_covariance
from .errors import (
    AllAlphasKilled,
    AllZeroWeights,
    AlphaCrossError,
    CycleDetected,
    IndefiniteCorrelation,
    IndefiniteCovariance,
    InputError,
    MaxIterations,
    NoFeasiblePattern,
    NoPositiveCapacity,
    NotPositiveDefinite,
    OuterLoopCycle,
    RankDeficient,
    RankDeficientLoadings,
    SingularCovariance,
    TooManyStreams,
    UnboundedCapacity,
    ZeroVarianceStream,
    ZeroVolatility,
)
from .fileio import (
    load_alpha_set,
    load_config,
    load_factor_model_json,
    round_sig,
    write_alpha_csv,
    write_turnover_csv,
)
from .covariance import build_factor_model
from .impact import find_capacity
from .model import evaluate_pnl
from .optimizer import solve_linear_cost, solve_no_cost, solve_with_rho_star_loop
from .oracle import brute_force_solve
from .regression import RegressionSpec, regression_limit_weights, regression_with_costs
from .generate import generate_instance
from .turnover import TurnoverModel, linear_cost_vector, spectral_rho_star

SCHEMA_ID = "alphacross-report/v1"

EXIT_CODES = (
    (
        (InputError, TooManyStreams, RankDeficient, RankDeficientLoadings), 2),
    ((AllAlphasKilled, AllZeroWeights, NoFeasiblePattern), 3),
    ((CycleDetected, MaxIterations, OuterLoopCycle), 4),
    ((NoPositiveCapacity, UnboundedCapacity), 5),
    (
        (
            SingularCovariance,
            IndefiniteCovariance,
            IndefiniteCorrelation,
            NotPositiveDefinite,
            ZeroVarianceStream,
            ZeroVolatility,
        ),
        6,
    ),
)


def exit_code_for(exc: AlphaCrossError) -> int:
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    return 1


def _emit(report: dict, out_path=None) -> dict:
    rounded = round_sig(report)
    if out_path:
        Path(out_path).write_text(json.dumps(rounded, indent=2) + "\n")
    return rounded


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _print_allocation_table(labels, payload) -> None:
    width = max(8, *(len(l) for l in labels))
    print(f"{'stream':<{width}}  {'weight':>18}  {'sign':>4}  {'cost L_i':>14}")
    for label, w, s, c in zip(
        labels, payload["weights"], payload["signs"], payload["effective_costs"]
    ):
        print(f"{label:<{width}}  {_fmt(w):>18}  {s:>4}  {_fmt(c):>14}")


def _allocation_payload(alloc, labels) -> dict:
    diag = alloc.diagnostics
    return {
        "labels": list(labels),
        "weights": list(alloc.weights),
        "signs": [int(s) for s in alloc.signs],
        "active_set": [labels[i] for i in alloc.active_set],
        "inactive_set": [labels[i] for i in alloc.inactive_set],
        "lambda": alloc.lambda_,
        "rho_star": alloc.rho_star,
        "effective_costs": list(alloc.effective_costs),
        "diagnostics": {
            "inner_iterations": diag.inner_iterations,
            "outer_rounds": diag.outer_rounds,
            "objective": diag.objective_value,
            "rho_star_source": diag.rho_star_source,
            "rho_star_clamped": diag.rho_star_clamped,
            "rho_star_degenerate": diag.rho_star_degenerate,
            "tau_skewness": diag.tau_skewness,
        },
    }


def _verification_payload(alloc, tolerance: float) -> dict:
    diag = alloc.diagnostics
    passed = (
        diag.stationarity_residual <= tolerance and diag.cost_slack >= -tolerance
    )
    slack = diag.cost_slack
    return {
        "stationarity_residual": diag.stationarity_residual,
        "cost_slack": None if slack == float("inf") else slack,
        "tolerance": tolerance,
        "passed": bool(passed),
    }


def _pnl_payload(report) -> dict:
    return {
        "pnl": report.pnl,
        "volatility": report.volatility,
        "sharpe": report.sharpe,
        "linear_cost_total": report.linear_cost_total,
        "impact_cost_total": report.impact_cost_total,
        "impact_cost_approx": report.impact_cost_approx,
        "dollar_turnover": report.dollar_turnover,
        "turnover": report.turnover,
    }


def _build_risk_model(alpha_set, args):
    """Factor model per the CLI flags; shared by optimize and oracle."""
    if getattr(args, "factor_model", "pca") == "file":
        if not getattr(args, "factor_file", None):
            raise InputError("--factor-model file requires --factor-file")
        omega, phi, xi2 = load_factor_model_json(args.factor_file)
        return build_factor_model(omega, phi, xi2), None
    cov_est = sample_covariance(alpha_set.history)
    factors = getattr(args, "factors", None)
    f = cov_est.rank_estimate if factors is None else int(factors)
    return pca_factor_model(cov_est, f), cov_est


def cmd_optimize(args) -> int:
    alpha_set = load_alpha_set(args.alphas, args.turnovers)
    cost_spec, options, _ = load_config(args.config)
    labels = alpha_set.labels
    fm, cov_est = _build_risk_model(alpha_set, args)

    if args.no_cost:
        alloc = solve_no_cost(alpha_set.alphas, fm.implied_covariance())
        rho = 1.0
    elif args.outer_loop:
        corr = cov_est.corr if cov_est is not None else sample_covariance(alpha_set.history).corr
        alloc = solve_with_rho_star_loop(alpha_set, fm, cost_spec, options, corr=corr)
        rho = alloc.rho_star
    else:
        if cost_spec.rho_star_override is not None:
            rho_model = TurnoverModel.override(cost_spec.rho_star_override, alpha_set.num_streams)
        else:
            corr = cov_est.corr if cov_est is not None else sample_covariance(alpha_set.history).corr
            rho_model = spectral_rho_star(corr)
        costs = linear_cost_vector(cost_spec, alpha_set.turnovers, rho_model.rho_star)
        alloc = solve_linear_cost(alpha_set, fm, costs, options, rho_model)
        rho = rho_model.rho_star

    pnl = evaluate_pnl(alpha_set, alloc.weights, cost_spec, rho, factor_model=fm)
    report = {
        "schema": SCHEMA_ID,
        "command": "optimize",
        "allocation": _allocation_payload(alloc, labels),
        "pnl": _pnl_payload(pnl),
        "verification": _verification_payload(alloc, options.condition_tolerance),
    }
    rounded = _emit(report, args.out)

    _print_allocation_table(labels, rounded["allocation"])
    a = rounded["allocation"]
    v = rounded["verification"]
    p = rounded["pnl"]
    print(f"lambda        {_fmt(a['lambda'])}")
    print(f"rho_star      {_fmt(a['rho_star'])}  (source: {a['diagnostics']['rho_star_source']})")
    print(f"objective     {_fmt(a['diagnostics']['objective'])}")
    print(f"iterations    inner={a['diagnostics']['inner_iterations']} outer={a['diagnostics']['outer_rounds']}")
    print(f"pnl           {_fmt(p['pnl'])}")
    print(f"volatility    {_fmt(p['volatility'])}")
    print(f"sharpe        {_fmt(p['sharpe'])}")
    print(f"verification  passed={v['passed']} residual={_fmt(v['stationarity_residual'])}"
          f" slack={_fmt(v['cost_slack']) if v['cost_slack'] is not None else 'n/a'}")
    return 0


def cmd_rho_star(args) -> int:
    alpha_set = load_alpha_set(args.alphas)
    cov_est = sample_covariance(alpha_set.history)
    model = spectral_rho_star(cov_est.corr)
    report = {
        "schema": SCHEMA_ID,
        "command": "rho-star",
        "rho_star": {
            "value": model.rho_star,
            "psi1": model.psi1,
            "eigenvector_sum_abs": model.vector_sum_abs,
            "num_streams": len(model.universe),
            "clamped": model.clamped,
            "degenerate": model.degenerate,
            "source": model.source,
        },
    }
    rounded = _emit(report, args.out)
    r = rounded["rho_star"]
    print(f"rho_star             {_fmt(r['value'])}")
    print(f"psi1                 {_fmt(r['psi1'])}")
    print(f"|sum eigenvector|    {_fmt(r['eigenvector_sum_abs'])}")
    print(f"streams              {r['num_streams']}")
    print(f"clamped              {r['clamped']}")
    print(f"degenerate           {r['degenerate']}")
    return 0


def cmd_capacity(args) -> int:
    alpha_set = load_alpha_set(args.alphas, args.turnovers)
    cost_spec, options, _ = load_config(args.config)
    fm, _ = _build_risk_model(alpha_set, args)
    result = find_capacity(alpha_set, fm, cost_spec, options)

    if args.curve_csv:
        with Path(args.curve_csv).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["investment", "pnl_opt"])
            for inv, pnl in zip(result.investment_grid, result.pnl_grid):
                writer.writerow([f"{inv:.12g}", "" if np.isnan(pnl) else f"{pnl:.12g}"])

    report = {
        "schema": SCHEMA_ID,
        "command": "capacity",
        "capacity": {
            "investment": result.capacity,
            "pnl": result.pnl_at_capacity,
            "bracket": list(result.bracket),
            "grid_points": int(result.investment_grid.size),
        },
    }
    rounded = _emit(report, args.out)
    c = rounded["capacity"]
    print(f"capacity I*   {_fmt(c['investment'])}")
    print(f"pnl at I*     {_fmt(c['pnl'])}")
    print(f"bracket       [{_fmt(c['bracket'][0])}, {_fmt(c['bracket'][1])}]")
    return 0


def cmd_regress(args) -> int:
    alpha_set = load_alpha_set(args.alphas, args.turnovers)
    cost_spec, options, _ = load_config(args.config)
    cov_est = sample_covariance(alpha_set.history)
    f = cov_est.rank_estimate if args.factors is None else int(args.factors)
    fm = pca_factor_model(cov_est, f)
    spec = RegressionSpec.from_factor_model(fm)

    if args.costs:
        if args.turnovers is None:
            raise InputError("--costs needs --turnovers for the cost vector")
        if cost_spec.rho_star_override is not None:
            rho = cost_spec.rho_star_override
        else:
            rho = spectral_rho_star(cov_est.corr).rho_star
        costs = linear_cost_vector(cost_spec, alpha_set.turnovers, rho)
        alloc = regression_with_costs(alpha_set, spec, costs, options)
        mode = "with-costs"
    else:
        alloc = regression_limit_weights(alpha_set, spec)
        mode = "limit"

    neutrality = float(np.max(np.abs(spec.loadings.T @ alloc.weights))) if f else 0.0
    report = {
        "schema": SCHEMA_ID,
        "command": "regress",
        "regression": {
            "mode": mode,
            "factors": int(f),
            "factor_neutrality_residual": neutrality,
        },
        "allocation": _allocation_payload(alloc, alpha_set.labels),
    }
    rounded = _emit(report, args.out)
    _print_allocation_table(alpha_set.labels, rounded["allocation"])
    r = rounded["regression"]
    print(f"mode                 {r['mode']}")
    print(f"factors              {r['factors']}")
    print(f"neutrality residual  {_fmt(r['factor_neutrality_residual'])}")
    return 0


def cmd_oracle(args) -> int:
    alpha_set = load_alpha_set(args.alphas, args.turnovers)
    cost_spec, options, _ = load_config(args.config)
    fm, cov_est = _build_risk_model(alpha_set, args)
    gamma = fm.implied_covariance()
    if cost_spec.rho_star_override is not None:
        rho_model = TurnoverModel.override(cost_spec.rho_star_override, alpha_set.num_streams)
    else:
        corr = cov_est.corr if cov_est is not None else sample_covariance(alpha_set.history).corr
        rho_model = spectral_rho_star(corr)
    costs = linear_cost_vector(cost_spec, alpha_set.turnovers, rho_model.rho_star)

    result = brute_force_solve(alpha_set.alphas, gamma, costs)
    payload = {
        "pattern": list(result.pattern),
        "objective": result.objective,
        "weights": list(result.weights),
        "examined": result.examined,
        "feasible_count": len(result.feasible),
        "ties": [list(t) for t in result.ties],
    }

    comparison = None
    if args.compare:
        alloc = solve_linear_cost(alpha_set, fm, costs, options, rho_model)
        raw = alloc.weights * alloc.lambda_
        quad = float(raw @ gamma @ raw)
        g_solver = 0.5 * quad - float(np.sum(alpha_set.alphas * raw - costs * np.abs(raw)))
        matches = bool(
            abs(g_solver - result.objective) <= 1e-10 * (1.0 + abs(result.objective))
            and list(np.sign(alloc.weights).astype(int)) == list(result.pattern)
        )
        comparison = {
            "solver_objective": g_solver,
            "oracle_objective": result.objective,
            "partitions_agree": list(np.sign(alloc.weights).astype(int)) == list(result.pattern),
            "equivalent": matches,
        }

    report = {"schema": SCHEMA_ID, "command": "oracle", "oracle": payload}
    if comparison is not None:
        report["comparison"] = comparison
    rounded = _emit(report, args.out)

    o = rounded["oracle"]
    print(f"pattern       {o['pattern']}")
    print(f"objective     {_fmt(o['objective'])}")
    print(f"examined      {o['examined']}")
    print(f"feasible      {o['feasible_count']}")
    if comparison is not None:
        c = rounded["comparison"]
        verdict = "PASS" if c["equivalent"] else "FAIL"
        print(
            f"equivalence   {verdict}: solver g={_fmt(c['solver_objective'])} "
            f"oracle g={_fmt(c['oracle_objective'])}"
        )
    return 0


def cmd_generate(args) -> int:
    instance = generate_instance(
        seed=args.seed,
        num_streams=args.n,
        num_observations=args.m + 1,
        num_factors=args.factors or 0,
        uniform_corr=args.rho,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aset = instance.alpha_set
    write_alpha_csv(out_dir / "alphas.csv", aset.history, aset.labels)
    write_turnover_csv(out_dir / "turnovers.csv", aset.labels, aset.turnovers)
    (out_dir / "truth.json").write_text(json.dumps(instance.truth, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir / 'alphas.csv'}")
    print(f"wrote {out_dir / 'turnovers.csv'}")
    print(f"wrote {out_dir / 'truth.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alphacross",
        description="Allocate investment across alpha streams traded with internal crossing.",
    )
    parser.add_argument("--version", action="version", version=f"alphacross {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, turnovers=True, config=True, risk=True):
        p.add_argument("--alphas", required=True, help="alpha history CSV (t,label,... rows)")
        if turnovers:
            p.add_argument("--turnovers", help="turnover CSV (label,tau)")
        if config:
            p.add_argument("--config", help="JSON config (costs, solver options)")
        if risk:
            p.add_argument("--factor-model", choices=("pca", "file"), default="pca")
            p.add_argument("--factor-file", help="JSON factor model (omega, phi, xi2)")
            p.add_argument("--factors", type=int, help="number of PCA factors (default: rank)")
        p.add_argument("--out", help="write the JSON report here")

    p_opt = sub.add_parser("optimize", help="solve for allocation weights")
    add_common(p_opt)
    p_opt.add_argument("--no-cost", action="store_true", help="ignore all costs")
    p_opt.add_argument("--outer-loop", action="store_true",
                       help="recompute turnover reduction on the surviving universe")
    p_opt.set_defaults(func=cmd_optimize)

    p_rho = sub.add_parser("rho-star", help="spectral turnover-reduction coefficient")
    add_common(p_rho, turnovers=False, config=False, risk=False)
    p_rho.set_defaults(func=cmd_rho_star)

    p_cap = sub.add_parser("capacity", help="find the P&L-maximizing investment level")
    add_common(p_cap)
    p_cap.add_argument("--curve-csv", help="write the sampled (investment, pnl) curve here")
    p_cap.set_defaults(func=cmd_capacity)

    p_reg = sub.add_parser("regress", help="regression-limit weights (singular-covariance path)")
    add_common(p_reg, risk=False)
    p_reg.add_argument("--factors", type=int, help="number of PCA factors (default: rank)")
    p_reg.add_argument("--costs", action="store_true", help="iterate with linear costs")
    p_reg.set_defaults(func=cmd_regress)

    p_orc = sub.add_parser("oracle", help="brute-force global minimum (N <= 8)")
    add_common(p_orc)
    p_orc.add_argument("--compare", action="store_true",
                       help="also run the iterative solver and print an equivalence line")
    p_orc.set_defaults(func=cmd_oracle)

    p_gen = sub.add_parser("generate", help="emit a synthetic instance")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--n", type=int, required=True, help="number of streams")
    p_gen.add_argument("--m", type=int, required=True, help="number of past periods (M)")
    p_gen.add_argument("--factors", type=int, help="factor-structured correlation")
    p_gen.add_argument("--rho", type=float, help="uniform pairwise correlation")
    p_gen.add_argument("--out-dir", required=True)
    p_gen.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AlphaCrossError as exc:
        code = exit_code_for(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    raise SystemExit(main())
