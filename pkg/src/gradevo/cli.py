"""Command line front end.

Subcommands: ``run`` one experiment, ``suite`` the benchmark grid,
``wine`` the regression comparison, ``scale`` the high-dimensional
Michalewicz study, ``plot`` SVG rendering from experiment CSVs, and
``gradcheck`` the finite-difference suite.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .harness import (
    ALGO_NAMES,
    ExperimentConfig,
    load_experiment,
    parse_config_file,
    run_experiment,
)
from .plots import emit_boxplot_svg, emit_convergence_svg
from .problems import benchmark_names

GRID_PROBLEMS = ("ackley", "michalewicz", "rosenbrock", "griewank")
GRID_DIMS = (30, 50)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if v < 0.0:
        raise argparse.ArgumentTypeError(f"expected a non-negative value, got {v}")
    return v


def _bool_flag(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_config_flags(p: argparse.ArgumentParser, skip=()) -> None:
    """One flag per ExperimentConfig field, defaulting to 'not provided'."""
    add = p.add_argument
    if "algo" not in skip:
        add("--algo", choices=ALGO_NAMES, default=None,
            help="algorithm (classical name or <name>-diff)")
    if "problem" not in skip:
        add("--problem", choices=benchmark_names() + ("wine",), default=None)
    if "dim" not in skip:
        add("--dim", type=_positive_int, default=None,
            help="problem dimensionality")
    if "pop" not in skip:
        add("--pop", type=_positive_int, default=None, help="population size")
    if "budget" not in skip:
        add("--budget", type=_positive_int, default=None,
            help="total fitness evaluations per run")
    if "runs" not in skip:
        add("--runs", type=_positive_int, default=None,
            help="independent seeded runs")
    if "seed" not in skip:
        add("--seed", type=int, default=None, help="base seed; run i uses seed+i")
    if "lr" not in skip:
        add("--lr", type=_nonneg_float, default=None,
            help="outer Adam learning rate (0 freezes the hyperparameters)")
    add("--loss", choices=("best", "mean"), default=None,
        help="generation loss: best candidate or population mean")
    add("--tau", type=float, default=None, help="relaxation temperature")
    if "sigma0" not in skip:
        add("--sigma0", type=_nonneg_float, default=None,
            help="initial CMA-ES step size (0 = default)")
    add("--variant", choices=("rand1", "best1"), default=None,
        help="DE mutation variant")
    add("--elitism", type=_bool_flag, default=None, metavar="BOOL")
    add("--hard-masks", dest="hard_masks", type=_bool_flag, default=None,
        metavar="BOOL", help="straight-through masks instead of soft blends")
    add("--hard-selection", dest="hard_selection", type=_bool_flag,
        default=None, metavar="BOOL",
        help="straight-through parent selection instead of soft mixtures")
    add("--patience", type=_positive_int, default=None,
        help="plateau generations before the lr halves")
    add("--lr-factor", dest="lr_factor", type=float, default=None)
    add("--min-lr", dest="min_lr", type=_nonneg_float, default=None)
    add("--lo", type=float, default=None, help="box lower bound")
    add("--hi", type=float, default=None, help="box upper bound")
    add("--wine-data", dest="wine_data", default=None,
        help="path to the semicolon-separated wine table "
             "(default: a bundled synthetic stand-in)")
    add("--out-dir", dest="out_dir", default=None,
        help="output root (default: $GRADEVO_OUTDIR or cwd)")
    add("--workers", type=_positive_int, default=None,
        help="parallel worker processes")
    if "label" not in skip:
        add("--label", default=None, help="experiment directory name")


def _cli_overrides(args: argparse.Namespace) -> dict:
    names = {f.name for f in fields(ExperimentConfig)}
    return {
        k: v for k, v in vars(args).items() if k in names and v is not None
    }


def _make_config(args: argparse.Namespace, **forced) -> ExperimentConfig:
    vals: dict = {}
    if getattr(args, "config", None):
        vals.update(parse_config_file(args.config))
    vals.update(_cli_overrides(args))
    vals.update(forced)
    return ExperimentConfig(**vals)


def _cmd_run(args) -> int:
    cfg = _make_config(args)
    run_experiment(cfg)
    return 0


def _cmd_suite(args) -> int:
    problems = args.problems.split(",") if args.problems else list(GRID_PROBLEMS)
    dims = [int(d) for d in args.dims.split(",")] if args.dims else list(GRID_DIMS)
    algos = args.algos.split(",") if args.algos else list(ALGO_NAMES[:-1])
    base = _cli_overrides(args)
    base.pop("label", None)
    failures = 0
    for problem in problems:
        for dim in dims:
            for algo in algos:
                vals = dict(base)
                vals.update(
                    algo=algo, problem=problem, dim=dim,
                    budget=args.evals_per_dim * dim,
                )
                vals.setdefault("pop", 100)
                vals.setdefault("runs", 5)
                if algo == "cmaes-diff":
                    # same interior start as the scale study
                    vals.setdefault("sigma0", 1.0)
                try:
                    run_experiment(ExperimentConfig(**vals))
                except RuntimeError as exc:
                    print(f"error: {exc}", file=sys.stderr)
                    failures += 1
    return 1 if failures else 0


def _cmd_wine(args) -> int:
    base = _cli_overrides(args)
    for key in ("algo", "problem", "dim", "pop", "budget", "label", "lr"):
        base.pop(key, None)
    evo = dict(base)
    evo.update(
        algo="cmaes-diff", problem="wine", pop=args.pop, budget=args.budget,
        lr=args.lr, sigma0=args.sigma0, label="cmaes-diff-wine",
    )
    evo.setdefault("loss", "mean")
    evo.setdefault("patience", 10)
    adam = dict(base)
    adam.update(
        algo="adam", problem="wine", pop=1, budget=args.budget,
        lr=args.adam_lr, label="adam-wine",
    )
    evo_stats, evo_dir = run_experiment(ExperimentConfig(**evo))
    adam_stats, _ = run_experiment(ExperimentConfig(**adam))
    print(
        f"final MSE: cmaes-diff mean={evo_stats.mean:.4g} "
        f"(min {evo_stats.min:.4g}, max {evo_stats.max:.4g}) | "
        f"adam mean={adam_stats.mean:.4g} "
        f"(min {adam_stats.min:.4g}, max {adam_stats.max:.4g})"
    )
    return 0


def _cmd_scale(args) -> int:
    base = _cli_overrides(args)
    base.pop("label", None)
    for algo in ("cmaes", "cmaes-diff"):
        vals = dict(base)
        vals.update(algo=algo, problem="michalewicz", dim=args.dim,
                    pop=args.pop, budget=args.budget)
        if algo == "cmaes-diff":
            # start the gradient arm interior: a box-wide initial step pins
            # most samples to the bounds, where clamping silences the
            # gradients and selection only sees corner patterns
            vals.setdefault("sigma0", 1.0)
        run_experiment(ExperimentConfig(**vals))
    return 0


def _cmd_plot(args) -> int:
    curves = {}
    finals = {}
    for d in args.dirs:
        label, evals, runs, fin = load_experiment(d)
        curves[label] = (evals, runs)
        finals[label] = fin
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    conv = emit_convergence_svg(curves, str(out / "convergence.svg"),
                                title=args.title, log_y=args.log_y)
    box = emit_boxplot_svg(finals, str(out / "boxplot.svg"),
                           title=args.title, log_y=args.log_y)
    print(conv)
    print(box)
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_all

    results = run_all(seed=args.seed, h=args.step)
    worst = 0.0
    failed = 0
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status}  {r.name:<42s} max_err={r.max_err:.3e}  tol={r.tol:.1e}")
        worst = max(worst, r.max_err)
        failed += 0 if r.ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed, "
          f"worst error {worst:.3e}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradevo",
        description="Classical and differentiable evolutionary optimization "
                    "with learned hyperparameters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--config", default=None,
                   help="key=value file; explicit flags override it")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("suite", help="benchmark grid: problems x dims x algorithms")
    p.add_argument("--problems", default=None,
                   help=f"comma list (default {','.join(GRID_PROBLEMS)})")
    p.add_argument("--dims", default=None,
                   help="comma list of dimensions (default 30,50)")
    p.add_argument("--algos", default=None,
                   help="comma list (default: all eight)")
    p.add_argument("--evals-per-dim", dest="evals_per_dim",
                   type=_positive_int, default=5000,
                   help="budget = this x dim (default 5000)")
    _add_config_flags(p, skip=("algo", "problem", "dim", "budget", "label"))
    p.set_defaults(fn=_cmd_suite)

    p = sub.add_parser("wine", help="network regression: evolved vs backprop")
    p.add_argument("--pop", type=_positive_int, default=30)
    p.add_argument("--budget", type=_positive_int, default=3000,
                   help="fitness evaluations (and backprop epochs)")
    p.add_argument("--lr", type=_nonneg_float, default=1.0,
                   help="outer learning rate of the evolved arm")
    p.add_argument("--adam-lr", dest="adam_lr", type=_nonneg_float,
                   default=0.001, help="backprop arm learning rate")
    p.add_argument("--sigma0", type=_nonneg_float, default=0.1,
                   help="evolved arm initial step size")
    _add_config_flags(p, skip=("algo", "problem", "dim", "pop", "budget",
                               "label", "lr", "sigma0"))
    p.set_defaults(fn=_cmd_wine, runs_default=10)

    p = sub.add_parser("scale", help="high-dimensional Michalewicz study")
    p.add_argument("--dim", type=_positive_int, default=100)
    p.add_argument("--pop", type=_positive_int, default=100)
    p.add_argument("--budget", type=_positive_int, default=100000)
    _add_config_flags(p, skip=("algo", "problem", "dim", "pop", "budget"))
    p.set_defaults(fn=_cmd_scale)

    p = sub.add_parser("plot", help="render SVGs from experiment directories")
    p.add_argument("dirs", nargs="+", help="experiment output directories")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--title", default="")
    p.add_argument("--log-y", dest="log_y", action="store_true")
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-5,
                   help="central difference step")
    p.set_defaults(fn=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "runs", None) is None and hasattr(args, "runs"):
        default_runs = getattr(args, "runs_default", None)
        if default_runs is not None:
            args.runs = default_runs
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
