"""Command-line front end.

Every subcommand writes its outputs into --out-dir with fixed file names
and echoes its full resolved configuration (defaults included) to
runlog.json in the same directory, so identical command lines reproduce
byte-identical output trees.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Errors are reported on stderr as one line: "<category>: <message>" with
category in {usage-error, data-error, numerical-error}.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .core import (
    DataError,
    Hyperparameters,
    SolverOptions,
    TaskKind,
    full_objective,
    standardize,
)
from .modelio import (
    ModelFile,
    format_float,
    load_model,
    load_problem,
    model_predictions,
    model_scores,
    read_task_csv,
    save_model,
    write_csv,
)
from .modelselect import auc, cross_validate, explained_variance
from .regpath import lam_max, lambda_sequence, reg_path
from .simdata import BENCHMARK_METHODS, SimulationSpec, run_benchmark, simulate
from .solver import SolverError, fista_fit

__all__ = ["main"]


class UsageError(ValueError):
    pass


def _ensure_out_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_runlog(out_dir, command: str, config: dict) -> None:
    doc = {"command": command, "config": config, "version": __version__}
    with open(os.path.join(out_dir, "runlog.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys}


def _load_fit_inputs(manifest_path):
    """Load, optionally standardize, and report the pieces fit-like commands need."""
    problem, feature_names, manifest = load_problem(manifest_path)
    record = None
    if manifest.standardize:
        problem, record = standardize(problem, standardize_regression_outcomes=True)
    return problem, feature_names, manifest, record


def _solver_options(args, fit_intercept: bool) -> SolverOptions:
    return SolverOptions(
        max_iter=args.max_iter, tol=args.tol, L0=args.l0, fit_intercept=fit_intercept
    )


def cmd_simulate(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    spec = SimulationSpec(
        t_classification=args.t_classification,
        t_regression=args.t_regression,
        p=args.p,
        n_per_task=args.n_per_task,
        sparsity=args.sparsity,
        noise_scale=args.noise_scale,
        seed=args.seed,
    )
    sim = simulate(spec)
    width = len(str(spec.p))
    feature_names = [f"x{j + 1:0{width}d}" for j in range(spec.p)]

    for split, problem in (("train", sim.train), ("test", sim.test)):
        split_dir = _ensure_out_dir(os.path.join(out_dir, split))
        entries = []
        for task in problem.tasks:
            file_name = f"{task.name}.csv"
            write_csv(
                os.path.join(split_dir, file_name),
                feature_names + ["y"],
                [list(task.X[r]) + [task.y[r]] for r in range(task.n_samples)],
            )
            entries.append(
                {
                    "name": task.name,
                    "kind": task.kind.value,
                    "data_path": file_name,
                    "outcome_column": "y",
                }
            )
        manifest = {"standardize": False, "fit_intercept": False, "tasks": entries}
        with open(
            os.path.join(split_dir, "manifest.json"), "w", encoding="utf-8", newline="\n"
        ) as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    write_csv(
        os.path.join(out_dir, "true_support.csv"),
        ["feature", "row"],
        [[feature_names[j], str(j)] for j in sim.true_support],
    )
    _write_runlog(
        out_dir,
        "simulate",
        _config(
            args,
            [
                "t_classification",
                "t_regression",
                "p",
                "n_per_task",
                "sparsity",
                "noise_scale",
                "seed",
                "out_dir",
            ],
        ),
    )
    return 0


def cmd_fit(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    problem, feature_names, manifest, record = _load_fit_inputs(args.manifest)
    opts = _solver_options(args, manifest.fit_intercept)
    hyper = Hyperparameters(args.lam, args.alpha, args.beta)
    result = fista_fit(problem, hyper, opts)
    model = ModelFile(
        feature_names=feature_names,
        task_names=[task.name for task in problem.tasks],
        task_kinds=[task.kind for task in problem.tasks],
        coef=result.coef,
        standardization=record,
        standardize_outcomes=manifest.standardize,
        lam=hyper.lam,
        alpha=hyper.alpha,
        beta=hyper.beta,
        seed=None,
    )
    save_model(model, os.path.join(out_dir, "model.json"))
    _write_runlog(
        out_dir,
        "fit",
        _config(args, ["manifest", "lam", "alpha", "beta", "tol", "max_iter", "l0", "out_dir"])
        | {"fit_intercept": manifest.fit_intercept, "standardize": manifest.standardize},
    )
    return 0


def cmd_path(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    problem, feature_names, manifest, _ = _load_fit_inputs(args.manifest)
    opts = _solver_options(args, manifest.fit_intercept)
    top = lam_max(problem, fit_intercept=opts.fit_intercept)
    sequence = lambda_sequence(top, ratio=args.ratio, n=args.n_lambda)
    path = reg_path(problem, sequence, alpha=args.alpha, beta=args.beta, opts=opts)

    rows = []
    for lam, fit, nonzero in zip(sequence.values, path.fits, path.nonzero_rows):
        objective = full_objective(problem, fit.coef, Hyperparameters(lam, args.alpha, args.beta))
        rows.append([lam, objective, str(int(nonzero))])
    write_csv(os.path.join(out_dir, "path.csv"), ["lambda", "objective", "nonzero_rows"], rows)

    if args.save_coefficients:
        coef_dir = _ensure_out_dir(os.path.join(out_dir, "coefficients"))
        task_names = [task.name for task in problem.tasks]
        for idx, fit in enumerate(path.fits):
            coef_rows = [
                [name] + list(fit.coef.W[j]) for j, name in enumerate(feature_names)
            ]
            if fit.coef.intercepts is not None:
                coef_rows.append(["(intercept)"] + list(fit.coef.intercepts))
            write_csv(
                os.path.join(coef_dir, f"lambda_{idx:04d}.csv"),
                ["feature"] + task_names,
                coef_rows,
            )
    _write_runlog(
        out_dir,
        "path",
        _config(
            args,
            [
                "manifest",
                "ratio",
                "n_lambda",
                "alpha",
                "beta",
                "tol",
                "max_iter",
                "l0",
                "save_coefficients",
                "out_dir",
            ],
        )
        | {"fit_intercept": manifest.fit_intercept, "standardize": manifest.standardize},
    )
    return 0


def cmd_cv(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    problem, _, manifest, _ = _load_fit_inputs(args.manifest)
    opts = _solver_options(args, manifest.fit_intercept)
    result = cross_validate(
        problem,
        alpha=args.alpha,
        beta=args.beta,
        k=args.k,
        seed=args.seed,
        opts=opts,
        n_lambda=args.n_lambda,
        ratio=args.ratio,
        one_se=args.one_se,
    )
    write_csv(
        os.path.join(out_dir, "cv.csv"),
        ["lambda", "mean_error", "se_error"],
        list(zip(result.sequence.values, result.mean_cv_error, result.se_cv_error)),
    )
    with open(os.path.join(out_dir, "best_lambda.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_float(result.best_lambda) + "\n")
    _write_runlog(
        out_dir,
        "cv",
        _config(
            args,
            [
                "manifest",
                "k",
                "seed",
                "ratio",
                "n_lambda",
                "alpha",
                "beta",
                "tol",
                "max_iter",
                "l0",
                "one_se",
                "out_dir",
            ],
        )
        | {"fit_intercept": manifest.fit_intercept, "standardize": manifest.standardize},
    )
    return 0


def cmd_predict(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    model = load_model(args.model)
    task_idx = model.task_index(args.task)
    header, values = read_task_csv(args.data)
    missing = [name for name in model.feature_names if name not in header]
    if missing:
        raise DataError(f"data file {args.data!r} is missing feature columns {missing[:5]}")
    column_of = {name: i for i, name in enumerate(header)}
    X = values[:, [column_of[name] for name in model.feature_names]]
    columns = model_predictions(model, X, task_idx)
    names = list(columns)
    write_csv(
        os.path.join(out_dir, "predictions.csv"),
        names,
        list(zip(*[columns[name] for name in names])),
    )
    _write_runlog(out_dir, "predict", _config(args, ["model", "data", "task", "out_dir"]))
    return 0


def cmd_eval(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    model = load_model(args.model)
    # Evaluation applies the model's stored standardization to raw inputs;
    # the manifest's own standardize flag is deliberately ignored here.
    problem, feature_names, _ = load_problem(args.manifest)
    if list(feature_names) != list(model.feature_names):
        raise DataError("evaluation data features do not match the model's features")
    rows = []
    for task in problem.tasks:
        idx = model.task_index(task.name)
        if model.task_kinds[idx] is not task.kind:
            raise DataError(f"task {task.name!r}: kind differs between model and data")
        scores = model_scores(model, task.X, idx)
        if task.kind is TaskKind.CLASSIFICATION:
            rows.append([task.name, task.kind.value, "auc", auc(scores, task.y)])
        else:
            pred = scores
            if model.standardization is not None:
                pred = model.standardization.tasks[idx].inverse_outcome(scores)
            rows.append(
                [task.name, task.kind.value, "explained_variance", explained_variance(pred, task.y)]
            )
    write_csv(os.path.join(out_dir, "eval.csv"), ["task", "kind", "metric", "value"], rows)
    _write_runlog(out_dir, "eval", _config(args, ["model", "manifest", "out_dir"]))
    return 0


def cmd_bench(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for method in methods:
        if method not in BENCHMARK_METHODS:
            raise UsageError(
                f"unknown method {method!r}; choose from {', '.join(BENCHMARK_METHODS)}"
            )
    try:
        ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError as err:
        raise UsageError(f"could not parse --ratios/--seeds: {err}") from None
    if not ratios or not seeds:
        raise UsageError("--ratios and --seeds must be non-empty")
    for ratio in ratios:
        if not 0.0 < ratio <= 1.0:
            raise UsageError(f"ratios must lie in (0, 1], got {ratio}")

    spec = SimulationSpec(
        t_classification=args.t_classification,
        t_regression=args.t_regression,
        p=args.p,
        n_per_task=max(1, int(round(ratios[0] * args.p))),
        sparsity=args.sparsity,
        noise_scale=args.noise_scale,
        seed=seeds[0],
    )
    rows = run_benchmark(
        spec,
        methods=methods,
        ratios=ratios,
        seeds=seeds,
        k=args.k,
        n_lambda=args.n_lambda,
        lambda_ratio=args.lambda_ratio,
        alpha=args.alpha,
        beta=args.beta,
    )
    write_csv(
        os.path.join(out_dir, "benchmark.csv"),
        [
            "method",
            "ratio",
            "seed-count",
            "mean_recovery",
            "mean_ev_regression",
            "mean_pseudo_ev_classification",
        ],
        [
            [
                row.method,
                row.ratio,
                str(row.seed_count),
                row.mean_recovery,
                row.mean_ev_regression,
                row.mean_pseudo_ev_classification,
            ]
            for row in rows
        ],
    )
    _write_runlog(
        out_dir,
        "bench",
        _config(
            args,
            [
                "t_classification",
                "t_regression",
                "p",
                "sparsity",
                "noise_scale",
                "methods",
                "ratios",
                "seeds",
                "k",
                "n_lambda",
                "lambda_ratio",
                "alpha",
                "beta",
                "out_dir",
            ],
        ),
    )
    return 0


def _add_spec_flags(sub) -> None:
    sub.add_argument("--t-classification", type=int, default=10)
    sub.add_argument("--t-regression", type=int, default=10)
    sub.add_argument("--p", type=int, default=200)
    sub.add_argument("--sparsity", type=float, default=0.9)
    sub.add_argument("--noise-scale", type=float, default=0.5)


def _add_solver_flags(sub, max_iter: int, tol: float) -> None:
    sub.add_argument("--alpha", type=float, default=0.0)
    sub.add_argument("--beta", type=float, default=0.0)
    sub.add_argument("--max-iter", type=int, default=max_iter)
    sub.add_argument("--tol", type=float, default=tol)
    sub.add_argument("--l0", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixedmtl",
        description="Joint sparse multi-task learning for mixed regression and "
        "classification tasks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("simulate", help="generate a synthetic mixed-task dataset")
    _add_spec_flags(sub)
    sub.add_argument("--n-per-task", type=int, default=100)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_simulate)

    sub = commands.add_parser("fit", help="fit a model at a fixed penalty")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_solver_flags(sub, max_iter=1000, tol=1e-8)
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_fit)

    sub = commands.add_parser("path", help="fit the full regularization path")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--ratio", type=float, default=0.01)
    sub.add_argument("--n-lambda", type=int, default=100)
    _add_solver_flags(sub, max_iter=100, tol=1e-6)
    sub.add_argument("--save-coefficients", action="store_true")
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_path)

    sub = commands.add_parser("cv", help="select the penalty by cross-validation")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--k", type=int, default=10)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--ratio", type=float, default=0.01)
    sub.add_argument("--n-lambda", type=int, default=100)
    _add_solver_flags(sub, max_iter=100, tol=1e-6)
    sub.add_argument("--one-se", action="store_true")
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_cv)

    sub = commands.add_parser("predict", help="score new data with a fitted model")
    sub.add_argument("--model", required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--task", required=True)
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_predict)

    sub = commands.add_parser("eval", help="evaluate a fitted model on a manifest")
    sub.add_argument("--model", required=True)
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("bench", help="run the simulation benchmark")
    _add_spec_flags(sub)
    sub.add_argument("--methods", default=",".join(BENCHMARK_METHODS))
    sub.add_argument("--ratios", default="0.1,0.4,0.8")
    sub.add_argument("--seeds", default="1,2,3,4,5")
    sub.add_argument("--k", type=int, default=5)
    sub.add_argument("--n-lambda", type=int, default=50)
    sub.add_argument("--lambda-ratio", type=float, default=0.01)
    sub.add_argument("--alpha", type=float, default=0.0)
    sub.add_argument("--beta", type=float, default=0.0)
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_info:
        return int(exit_info.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage-error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data-error: {err}", file=sys.stderr)
        return 3
    except SolverError as err:
        print(f"numerical-error: {err}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as err:
        print(f"data-error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
