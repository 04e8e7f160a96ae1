"""Command-line interface.

Subcommands::

    simulate          dump a simulated path as CSV (t,x_minus,x,x_plus,rule)
    estimate          structural LS estimate on a fresh simulation or path file
    sequential        one sequential-estimation result row
    hypothesis        one decision-rule result row
    mc                run a full Monte Carlo experiment (report + raw CSVs)
    check-conditions  analytic summability / inverse-link integrability report

Exit codes: 0 on success/pass, 2 when an mc experiment's acceptance flag
fails, 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config_file, resolve_seed
from .decision import decide, required_level
from .estimators import (EstimationError, SQRT_MAP, g_condition_check,
                         sequential_ls, structural_ls)
from .harness import run_experiment, write_report, xi_for
from .integrals import IntegralError, slln_condition_value
from .paths import PathError, _fmt, dump_path_csv, load_path_csv
from .simulators import build_scenario, design_for

_ERRORS = (ConfigError, EstimationError, IntegralError, PathError)


def _add_common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (overrides config and environment)")
    p.add_argument("--out", default=None, help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optregress", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="dump a simulated path CSV")
    _add_common(p, "output CSV file (default: stdout)")
    p.add_argument("--component", choices=["X", "M", "drift"], default="X")

    p = sub.add_parser("estimate", help="structural LS estimate")
    _add_common(p, "ignored (prints to stdout)")
    p.add_argument("--t", type=float, default=None,
                   help="evaluation time (default: horizon)")
    p.add_argument("--path-csv", default=None,
                   help="estimate from this observed-path file instead of "
                        "simulating")

    p = sub.add_parser("sequential", help="one sequential estimation run")
    _add_common(p, "output CSV file (default: stdout)")
    p.add_argument("--H", type=float, required=True, dest="level",
                   help="design level at which sampling stops")
    p.add_argument("--form", choices=["corrected", "literal"],
                   default="corrected")

    p = sub.add_parser("hypothesis", help="one decision-rule run")
    _add_common(p, "output CSV file (default: stdout)")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--H", type=float, default=None, dest="level",
                   help="design level (default: guaranteed-error threshold)")
    p.add_argument("--under", choices=["H0", "H1"], default="H0",
                   help="simulate under the drift (H0) or pure-noise (H1) "
                        "hypothesis")
    p.add_argument("--form", choices=["corrected", "literal"],
                   default="corrected")

    p = sub.add_parser("mc", help="run a Monte Carlo experiment")
    _add_common(p, "output directory (default: current directory)")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel workers (default: experiment setting)")
    p.add_argument("--form", choices=["corrected", "literal"], default=None)

    p = sub.add_parser("check-conditions",
                       help="analytic condition values for a scenario")
    _add_common(p, "ignored (prints to stdout)")
    p.add_argument("--q", type=float, default=2.0)

    return parser


def _cmd_simulate(args) -> int:
    scenario, _ = load_config_file(args.config)
    seed = resolve_seed(args.seed, scenario.seed)
    model = build_scenario(scenario, master_seed=seed)
    path = {"X": model.X, "M": model.M, "drift": model.drift}[args.component]
    if args.out:
        with open(args.out, "w", newline="") as fp:
            dump_path_csv(path, fp)
    else:
        dump_path_csv(path, sys.stdout)
    return 0


def _cmd_estimate(args) -> int:
    scenario, _ = load_config_file(args.config)
    seed = resolve_seed(args.seed, scenario.seed)
    if args.path_csv:
        with open(args.path_csv) as fp:
            X = load_path_csv(fp)
        f, a = design_for(scenario, X)
    else:
        model = build_scenario(scenario, master_seed=seed)
        X, f, a = model.X, model.integrand, model.integrator
    t = X.horizon if args.t is None else args.t
    theta = structural_ls(X, f, a, t)
    print(f"theta_hat={_fmt(theta)} t={_fmt(t)}")
    return 0


def _cmd_sequential(args) -> int:
    scenario, _ = load_config_file(args.config)
    seed = resolve_seed(args.seed, scenario.seed)
    model = build_scenario(scenario, master_seed=seed)
    res = sequential_ls(model.X, model.integrand, model.integrator,
                        args.level, form=args.form)
    header = "replicate,seed,theta_true,theta_hat,tau_H,beta_H,crossed,form"
    row = ",".join([
        "0", str(seed), _fmt(model.coef), _fmt(res.theta_hat),
        _fmt(res.stop_time), _fmt(res.jump_weight),
        "true" if res.crossed else "false", res.form,
    ])
    text = header + "\n" + row + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_hypothesis(args) -> int:
    scenario, _ = load_config_file(args.config)
    seed = resolve_seed(args.seed, scenario.seed)
    if args.under == "H1":
        scenario = scenario.replace(theta=0.0, c=None)
    theta = scenario.resolved_theta()
    level = args.level
    if level is None:
        level = required_level(args.delta, args.epsilon, xi_for(scenario))
    model = build_scenario(scenario, master_seed=seed)
    res = sequential_ls(model.X, model.integrand, model.integrator, level,
                        form=args.form)
    if not res.crossed:
        raise EstimationError("design did not reach the level within the horizon")
    verdict = decide(res.theta_hat, args.delta)
    header = "replicate,true_hypothesis,theta,phi,decision,H,delta,epsilon"
    row = ",".join([
        "0", args.under, _fmt(theta), _fmt(res.theta_hat), verdict,
        _fmt(level), _fmt(args.delta), _fmt(args.epsilon),
    ])
    text = header + "\n" + row + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_mc(args) -> int:
    scenario, experiment = load_config_file(args.config)
    if experiment is None:
        raise ConfigError("mc needs an 'experiment' section in the config")
    seed = resolve_seed(args.seed, scenario.seed)
    overrides = {}
    if args.jobs is not None:
        overrides["n_jobs"] = args.jobs
    if args.form is not None:
        overrides["form"] = args.form
    if overrides:
        experiment = experiment.replace(**overrides)
    report = run_experiment(experiment, master_seed=seed)
    out_dir = args.out or "."
    files = write_report(report, out_dir)
    for cell in report.cells:
        print(f"cell {cell['cell']}: " + ", ".join(
            f"{k}={_fmt(v) if isinstance(v, float) else v}"
            for k, v in cell.items() if k not in ("cell", "level")))
    status = ("PASS" if report.passed else
              "FAIL" if report.passed is False else "N/A")
    print(f"experiment {report.experiment}: {status}"
          + (f" ({report.annotation})" if report.annotation else ""))
    print("wrote " + ", ".join(files))
    return 2 if report.passed is False else 0


def _cmd_check_conditions(args) -> int:
    scenario, _ = load_config_file(args.config)
    try:
        value = slln_condition_value(scenario, q=args.q)
        print(f"slln_condition(q={_fmt(args.q)}) = {_fmt(value)}"
              + ("  (divergent)" if value == float("inf") else "  (finite)"))
    except IntegralError as exc:
        print(f"slln_condition(q={_fmt(args.q)}): unsupported scenario: {exc}")
    if scenario.kind == "nonlinear":
        res = g_condition_check(SQRT_MAP)
        print(f"g_condition(sqrt link) = {_fmt(res.value)}"
              + ("  (converged)" if res.converged else "  (divergent)"))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "sequential": _cmd_sequential,
    "hypothesis": _cmd_hypothesis,
    "mc": _cmd_mc,
    "check-conditions": _cmd_check_conditions,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
