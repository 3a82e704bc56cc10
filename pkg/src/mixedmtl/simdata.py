"""Synthetic mixed-task data generation and the benchmark harness.

The generator draws a dense standard-normal p x t coefficient matrix,
zeroes all rows past the shared support, and produces one train and one
test problem from fresh feature draws under the same coefficients.
Regression outcomes are X w + noise_scale * N(0, 1); classification
outcomes are the sign of the same noisy score.  The benchmark harness
fits the joint mixed-task model, a binarize-then-classify baseline, and
per-task single-task fits, each with a CV-selected penalty, and scores
prediction quality and support recovery on the held-out test problem.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    CoefficientMatrix,
    DataError,
    MtlProblem,
    SolverOptions,
    TaskDataset,
    TaskKind,
)
from .modelselect import cross_validate, explained_variance, pseudo_explained_variance
from .regpath import LambdaSequence, path_options, reg_path

__all__ = [
    "SimulationSpec",
    "SimulationOutput",
    "BenchmarkRow",
    "BENCHMARK_METHODS",
    "simulate",
    "binarize_problem",
    "recovery_accuracy",
    "run_benchmark",
]

BENCHMARK_METHODS = ("mtlcomb", "mtlbin", "singletask")


@dataclass(frozen=True)
class SimulationSpec:
    """Generator configuration.

    Defaults: 10 classification + 10 regression tasks, 200 features,
    100 samples per task, 90% zero rows, noise scale 0.5.
    """

    t_classification: int = 10
    t_regression: int = 10
    p: int = 200
    n_per_task: int = 100
    sparsity: float = 0.9
    noise_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.t_classification < 0 or self.t_regression < 0:
            raise ValueError("task counts must be nonnegative")
        if self.t_classification + self.t_regression < 1:
            raise ValueError("at least one task is required")
        if self.p < 1 or self.n_per_task < 1:
            raise ValueError("p and n_per_task must be >= 1")
        if not 0.0 < self.sparsity < 1.0:
            raise ValueError("sparsity must lie in (0, 1)")
        if self.noise_scale < 0.0:
            raise ValueError("noise_scale must be nonnegative")

    @property
    def t(self) -> int:
        return self.t_classification + self.t_regression

    @property
    def support_size(self) -> int:
        return int(round((1.0 - self.sparsity) * self.p))


@dataclass(frozen=True)
class SimulationOutput:
    train: MtlProblem
    test: MtlProblem
    true_W: np.ndarray
    true_support: np.ndarray


def _draw_tasks(rng, spec: SimulationSpec, W: np.ndarray) -> MtlProblem:
    tasks = []
    for i in range(spec.t):
        is_classification = i < spec.t_classification
        name = f"clf{i + 1:02d}" if is_classification else f"reg{i + 1 - spec.t_classification:02d}"
        X = rng.standard_normal((spec.n_per_task, spec.p))
        noisy = X @ W[:, i] + spec.noise_scale * rng.standard_normal(spec.n_per_task)
        if is_classification:
            y = np.where(noisy >= 0.0, 1.0, -1.0)
            tasks.append(TaskDataset(X, y, TaskKind.CLASSIFICATION, name))
        else:
            tasks.append(TaskDataset(X, noisy, TaskKind.REGRESSION, name))
    return MtlProblem(tuple(tasks))


def simulate(spec: SimulationSpec) -> SimulationOutput:
    """Draw a (train, test, ground truth) triple; deterministic given the seed."""
    rng = np.random.default_rng(spec.seed)
    W = rng.standard_normal((spec.p, spec.t))
    W[spec.support_size :, :] = 0.0
    train = _draw_tasks(rng, spec, W)
    test = _draw_tasks(rng, spec, W)
    return SimulationOutput(
        train=train,
        test=test,
        true_W=W,
        true_support=np.arange(spec.support_size),
    )


def binarize_problem(problem: MtlProblem, at_zero: bool = False) -> MtlProblem:
    """Turn every regression task into a classification task.

    Outcomes above the per-task median (or above zero with at_zero) become
    +1, the rest -1.  Classification tasks pass through unchanged; task
    order is preserved (every output task is a classification task).
    """
    tasks = []
    for task in problem.tasks:
        if task.kind is TaskKind.CLASSIFICATION:
            tasks.append(task)
            continue
        if np.all(task.y == task.y[0]):
            raise DataError(f"task {task.name!r}: constant outcomes cannot be binarized")
        threshold = 0.0 if at_zero else float(np.median(task.y))
        labels = np.where(task.y > threshold, 1.0, -1.0)
        if len(np.unique(labels)) < 2:
            raise DataError(f"task {task.name!r}: binarization produced a single class")
        tasks.append(TaskDataset(task.X, labels, TaskKind.CLASSIFICATION, task.name))
    return MtlProblem(tuple(tasks))


def recovery_accuracy(W_hat, true_support) -> float:
    """Fraction of the true support found among the top-ranked rows.

    Rows are ranked by descending Euclidean norm and the top
    |true_support| are compared against the truth, so the score is
    invariant to any positive rescaling of the estimate.  Zero rows are
    never counted as selected (an all-zero estimate scores 0, not
    whatever an index-order tie break would hand it).
    """
    W = W_hat.W if isinstance(W_hat, CoefficientMatrix) else np.asarray(W_hat, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    support = np.unique(np.asarray(true_support, dtype=int))
    if support.size < 1:
        raise ValueError("true_support must contain at least one index")
    if support.max() >= W.shape[0]:
        raise ValueError(
            f"support index {support.max()} is out of range for {W.shape[0]} rows"
        )
    norms = np.linalg.norm(W, axis=1)
    top = np.argsort(-norms, kind="stable")[: support.size]
    top = top[norms[top] > 0.0]
    return float(np.intersect1d(top, support).size / support.size)


@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    ratio: float
    seed_count: int
    mean_recovery: float
    mean_ev_regression: float
    mean_pseudo_ev_classification: float


def _squared_correlation(a: np.ndarray, b: np.ndarray) -> float:
    ca = a - a.mean()
    cb = b - b.mean()
    denom = float(np.vdot(ca, ca)) * float(np.vdot(cb, cb))
    if denom == 0.0:
        return 0.0
    return min(float(np.vdot(ca, cb)) ** 2 / denom, 1.0)


def _cv_selected_fit(problem, alpha, beta, k, seed, opts, n_lambda, lambda_ratio):
    """CV on the problem, then a warm-started refit down to the chosen penalty."""
    cv = cross_validate(
        problem, alpha=alpha, beta=beta, k=k, seed=seed, opts=opts,
        n_lambda=n_lambda, ratio=lambda_ratio,
    )
    best_idx = int(np.flatnonzero(cv.sequence.values == cv.best_lambda)[0])
    values = cv.sequence.values[: best_idx + 1]
    seq = LambdaSequence(values=values, ratio=float(values[-1] / values[0]))
    path = reg_path(problem, seq, alpha=alpha, beta=beta, opts=opts)
    return path.fits[-1].coef


def _run_cell(method, sim, alpha, beta, k, seed, opts, n_lambda, lambda_ratio):
    train, test = sim.train, sim.test

    if method == "mtlcomb":
        fitted = train
        coef = _cv_selected_fit(train, alpha, beta, k, seed, opts, n_lambda, lambda_ratio)
        rank_matrix = coef.W
    elif method == "mtlbin":
        fitted = binarize_problem(train)
        coef = _cv_selected_fit(fitted, alpha, beta, k, seed, opts, n_lambda, lambda_ratio)
        rank_matrix = coef.W
    else:  # singletask
        fitted = train
        columns = []
        intercepts = []
        for task in train.tasks:
            single_coef = _cv_selected_fit(
                MtlProblem((task,)), alpha, beta, k, seed, opts, n_lambda, lambda_ratio
            )
            columns.append(single_coef.W[:, 0])
            intercepts.append(
                None if single_coef.intercepts is None else single_coef.intercepts[0]
            )
        W_stack = np.column_stack(columns)
        coef = CoefficientMatrix(
            W_stack,
            None if intercepts[0] is None else np.array(intercepts, dtype=float),
        )
        # Meta-analysis style aggregation: mean absolute coefficient per feature.
        rank_matrix = np.abs(W_stack).mean(axis=1)[:, None]

    evs, pevs = [], []
    for i, test_task in enumerate(test.tasks):
        s = test_task.X @ coef.W[:, i]
        if coef.intercepts is not None:
            s = s + coef.intercepts[i]
        if test_task.kind is TaskKind.CLASSIFICATION:
            pevs.append(pseudo_explained_variance(s, test_task.y))
        elif fitted.tasks[i].kind is TaskKind.CLASSIFICATION:
            # The model saw a binarized version of this task; its scores have
            # no outcome scale, so report squared correlation instead.
            evs.append(_squared_correlation(s, test_task.y))
        else:
            evs.append(explained_variance(s, test_task.y))

    recovery = recovery_accuracy(rank_matrix, sim.true_support)
    mean_ev = float(np.mean(evs)) if evs else float("nan")
    mean_pev = float(np.mean(pevs)) if pevs else float("nan")
    return recovery, mean_ev, mean_pev


def run_benchmark(
    spec: SimulationSpec,
    methods: Sequence[str] = BENCHMARK_METHODS,
    ratios: Sequence[float] = (0.1, 0.4, 0.8),
    seeds: Sequence[int] = (1, 2, 3, 4, 5),
    k: int = 5,
    n_lambda: int = 50,
    lambda_ratio: float = 0.01,
    alpha: float = 0.0,
    beta: float = 0.0,
    opts: Optional[SolverOptions] = None,
) -> list:
    """Average prediction and support-recovery quality over seeds.

    For each (ratio, seed) cell the per-task sample count is
    round(ratio * p) with p held fixed, so the ratio sweeps the
    samples-per-feature regime.  Every method gets its penalty from
    cross-validation on the training problem.  Returns one BenchmarkRow
    per (method, ratio), in input order.
    """
    methods = list(methods)
    ratios = [float(r) for r in ratios]
    seeds = [int(s) for s in seeds]
    for method in methods:
        if method not in BENCHMARK_METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {BENCHMARK_METHODS}")
    for ratio in ratios:
        if not 0.0 < ratio <= 1.0:
            raise ValueError(f"ratios must lie in (0, 1], got {ratio!r}")
    if not seeds:
        raise ValueError("at least one seed is required")
    opts = opts or path_options()

    rows = []
    for method in methods:
        for ratio in ratios:
            recoveries, evs, pevs = [], [], []
            for seed in seeds:
                cell_spec = dataclasses.replace(
                    spec, n_per_task=int(round(ratio * spec.p)), seed=seed
                )
                sim = simulate(cell_spec)
                rec, ev, pev = _run_cell(
                    method, sim, alpha, beta, k, seed, opts, n_lambda, lambda_ratio
                )
                recoveries.append(rec)
                evs.append(ev)
                pevs.append(pev)
            rows.append(
                BenchmarkRow(
                    method=method,
                    ratio=ratio,
                    seed_count=len(seeds),
                    mean_recovery=float(np.mean(recoveries)),
                    mean_ev_regression=float(np.mean(evs)),
                    mean_pseudo_ev_classification=float(np.mean(pevs)),
                )
            )
    return rows
