"""Problem containers and the weighted mixed-task objective.

A model couples c classification tasks and t - c regression tasks through
a shared p x t coefficient matrix W (column i belongs to task i, row j to
feature j).  The smooth part of the training objective is

    F(W) = 2 * sum_{i < c}  mean(log(1 + exp(-y * (X w_i + b_i))))
         + 0.5 * sum_{i >= c} mean((y - X w_i - b_i)^2)
         + alpha * ||W G||_F^2 + beta * ||W||_F^2

where G is the t x t centering matrix, so the alpha term penalizes
cross-task disagreement of each feature's coefficients and beta is a
plain ridge term.  The fixed loss weights (2 on the logit loss, 0.5 on
the least-squares loss) put both task types on the same penalty scale,
which is what lets a single lambda drive joint feature selection.  The
sparse row penalty lambda * ||W||_{2,1} is handled by the solver's
proximal step, not here.

Intercepts, when enabled, are per-task scalars that enter the losses but
none of the penalties.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "DataError",
    "TaskKind",
    "TaskDataset",
    "MtlProblem",
    "CoefficientMatrix",
    "Hyperparameters",
    "SolverOptions",
    "TaskStandardization",
    "StandardizationRecord",
    "make_centering",
    "sigmoid",
    "l21_norm",
    "smooth_objective",
    "smooth_gradient",
    "full_objective",
    "predict",
    "standardize",
]


class DataError(ValueError):
    """Input data violates a documented requirement."""


class TaskKind(str, enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-d array, got shape {arr.shape}")
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be a 1-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TaskDataset:
    """One task: features X (n x p), outcomes y (n), and the task kind.

    Classification outcomes must be -1/+1; regression outcomes any finite
    reals.  Arrays are copied at construction and not mutated afterwards.
    """

    X: np.ndarray
    y: np.ndarray
    kind: TaskKind
    name: str

    def __post_init__(self):
        X = _as_matrix(self.X, f"task {self.name!r}: X")
        y = _as_vector(self.y, f"task {self.name!r}: y")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"task {self.name!r}: X must have at least one row and column")
        if y.shape[0] != X.shape[0]:
            raise DataError(
                f"task {self.name!r}: y has {y.shape[0]} entries for {X.shape[0]} samples"
            )
        if not np.all(np.isfinite(X)):
            raise DataError(f"task {self.name!r}: X contains non-finite values")
        if not np.all(np.isfinite(y)):
            raise DataError(f"task {self.name!r}: y contains non-finite values")
        kind = TaskKind(self.kind)
        if kind is TaskKind.CLASSIFICATION and not np.all((y == 1.0) | (y == -1.0)):
            raise DataError(f"task {self.name!r}: classification outcomes must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "kind", kind)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class MtlProblem:
    """Ordered task collection: classification tasks first, shared feature count."""

    tasks: tuple

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if len(tasks) < 1:
            raise DataError("a problem needs at least one task")
        p = tasks[0].n_features
        for task in tasks:
            if task.n_features != p:
                raise DataError(
                    f"task {task.name!r} has {task.n_features} features, expected {p}"
                )
        seen_regression = False
        for task in tasks:
            if task.kind is TaskKind.REGRESSION:
                seen_regression = True
            elif seen_regression:
                raise DataError(
                    f"task {task.name!r}: classification tasks must precede regression tasks"
                )
        names = [task.name for task in tasks]
        if len(set(names)) != len(names):
            raise DataError("task names must be unique")
        object.__setattr__(self, "tasks", tasks)

    @property
    def t(self) -> int:
        return len(self.tasks)

    @property
    def c(self) -> int:
        return sum(1 for task in self.tasks if task.kind is TaskKind.CLASSIFICATION)

    @property
    def p(self) -> int:
        return self.tasks[0].n_features


@dataclass(frozen=True)
class CoefficientMatrix:
    """Coefficient matrix W (p x t) plus optional per-task intercepts (length t)."""

    W: np.ndarray
    intercepts: Optional[np.ndarray] = None

    def __post_init__(self):
        W = _as_matrix(self.W, "W")
        if not np.all(np.isfinite(W)):
            raise DataError("coefficient matrix contains non-finite values")
        intercepts = self.intercepts
        if intercepts is not None:
            intercepts = _as_vector(intercepts, "intercepts")
            if intercepts.shape[0] != W.shape[1]:
                raise DataError(
                    f"{intercepts.shape[0]} intercepts for {W.shape[1]} tasks"
                )
            if not np.all(np.isfinite(intercepts)):
                raise DataError("intercepts contain non-finite values")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "intercepts", intercepts)

    @classmethod
    def zeros(cls, p: int, t: int, fit_intercept: bool = False) -> "CoefficientMatrix":
        intercepts = np.zeros(t) if fit_intercept else None
        return cls(np.zeros((p, t)), intercepts)


@dataclass(frozen=True)
class Hyperparameters:
    """Penalty strengths: lam on the row-sparsity term, alpha on the
    cross-task-agreement term, beta on the ridge term."""

    lam: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        for field_name in ("lam", "alpha", "beta"):
            value = float(getattr(self, field_name))
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{field_name} must be a nonnegative real, got {value!r}")
            object.__setattr__(self, field_name, value)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 1000
    tol: float = 1e-8
    L0: float = 1.0
    fit_intercept: bool = False

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if not self.L0 > 0.0:
            raise ValueError("L0 must be positive")
        object.__setattr__(self, "max_iter", int(self.max_iter))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "L0", float(self.L0))
        object.__setattr__(self, "fit_intercept", bool(self.fit_intercept))


def make_centering(t: int) -> np.ndarray:
    """Return the t x t centering matrix I - (1/t) * ones.

    Symmetric and idempotent; right-multiplying W by it subtracts each
    row's cross-task mean, so ||W G||_F^2 measures cross-task disagreement.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    return np.eye(t) - np.full((t, t), 1.0 / t)


def sigmoid(z):
    """Stable logistic function; P(y = +1) for a linear score z."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def l21_norm(W: np.ndarray) -> float:
    """Sum over rows of the Euclidean norm of each row; zero iff W == 0."""
    W = np.asarray(W, dtype=float)
    return float(np.linalg.norm(W, axis=1).sum())


def _check_dimensions(problem: MtlProblem, coef: CoefficientMatrix) -> None:
    if coef.W.shape != (problem.p, problem.t):
        raise ValueError(
            f"coefficient shape {coef.W.shape} does not match problem "
            f"({problem.p}, {problem.t})"
        )


def _row_centered(W: np.ndarray) -> np.ndarray:
    # Identical to W @ make_centering(t) but cheaper and exactly zero on
    # rows whose cross-task mean is exact (e.g. integer-valued rows).
    return W - W.mean(axis=1, keepdims=True)


def _smooth_objective_raw(problem, W, intercepts, alpha, beta) -> float:
    total = 0.0
    for i, task in enumerate(problem.tasks):
        s = task.X @ W[:, i]
        if intercepts is not None:
            s = s + intercepts[i]
        if task.kind is TaskKind.CLASSIFICATION:
            total += 2.0 * float(np.mean(np.logaddexp(0.0, -task.y * s)))
        else:
            r = task.y - s
            total += 0.5 * float(np.mean(r * r))
    if alpha != 0.0:
        centered = _row_centered(W)
        total += alpha * float(np.vdot(centered, centered))
    if beta != 0.0:
        total += beta * float(np.vdot(W, W))
    return total


def _smooth_gradient_raw(problem, W, intercepts, alpha, beta):
    grad = np.empty_like(W)
    grad_b = np.empty(problem.t) if intercepts is not None else None
    for i, task in enumerate(problem.tasks):
        n = task.n_samples
        s = task.X @ W[:, i]
        if intercepts is not None:
            s = s + intercepts[i]
        if task.kind is TaskKind.CLASSIFICATION:
            r = -task.y * sigmoid(-task.y * s)
            weight = 2.0 / n
        else:
            r = s - task.y
            weight = 1.0 / n
        grad[:, i] = weight * (task.X.T @ r)
        if grad_b is not None:
            grad_b[i] = weight * float(r.sum())
    if alpha != 0.0:
        grad += 2.0 * alpha * _row_centered(W)
    if beta != 0.0:
        grad += 2.0 * beta * W
    return grad, grad_b


def smooth_objective(
    problem: MtlProblem, coef: CoefficientMatrix, alpha: float = 0.0, beta: float = 0.0
) -> float:
    """Evaluate the smooth part F(W) of the training objective."""
    _check_dimensions(problem, coef)
    return _smooth_objective_raw(problem, coef.W, coef.intercepts, alpha, beta)


def smooth_gradient(
    problem: MtlProblem, coef: CoefficientMatrix, alpha: float = 0.0, beta: float = 0.0
):
    """Gradient of F: returns (grad_W, grad_intercepts).

    grad_intercepts is None when coef carries no intercepts.  Column i is
    (2/N_i) X^T (-y * sigmoid(-y * s)) for classification tasks and
    (1/N_i) X^T (s - y) for regression tasks, plus 2*alpha*(W centered) and
    2*beta*W.  Intercept gradients use the same loss weights and no penalty.
    """
    _check_dimensions(problem, coef)
    return _smooth_gradient_raw(problem, coef.W, coef.intercepts, alpha, beta)


def full_objective(
    problem: MtlProblem, coef: CoefficientMatrix, hyper: Hyperparameters
) -> float:
    """F(W) plus the row-sparsity penalty lam * ||W||_{2,1}."""
    smooth = smooth_objective(problem, coef, hyper.alpha, hyper.beta)
    return smooth + hyper.lam * l21_norm(coef.W)


def predict(
    X,
    w,
    kind: TaskKind,
    intercept: float = 0.0,
    output: Optional[str] = None,
) -> np.ndarray:
    """Per-row predictions for one task from its coefficient column.

    output defaults to "score" for regression and "probability" for
    classification; "label" returns hard -1/+1 labels (score 0 maps to +1).
    """
    X = _as_matrix(X, "X")
    w = _as_vector(w, "w")
    if X.shape[1] != w.shape[0]:
        raise ValueError(f"{X.shape[1]} feature columns for {w.shape[0]} coefficients")
    kind = TaskKind(kind)
    scores = X @ w + float(intercept)
    if output is None:
        output = "probability" if kind is TaskKind.CLASSIFICATION else "score"
    if output == "score":
        return scores
    if kind is not TaskKind.CLASSIFICATION:
        raise ValueError(f"output {output!r} only applies to classification tasks")
    if output == "probability":
        return sigmoid(scores)
    if output == "label":
        return np.where(scores >= 0.0, 1.0, -1.0)
    raise ValueError(f"unknown output {output!r}")


@dataclass(frozen=True)
class TaskStandardization:
    """Column transform fitted on one task.

    Constant feature columns (sample sd 0) are transformed to all zeros and
    flagged rather than raising, so the feature count stays aligned across
    tasks.  outcome_* fields are set only for standardized regression
    outcomes; outcome_scale 0 flags a constant outcome.
    """

    feature_mean: np.ndarray
    feature_scale: np.ndarray
    constant_features: np.ndarray
    outcome_mean: Optional[float] = None
    outcome_scale: Optional[float] = None

    def transform_features(self, X) -> np.ndarray:
        X = _as_matrix(X, "X")
        if X.shape[1] != self.feature_mean.shape[0]:
            raise ValueError(
                f"{X.shape[1]} feature columns for a {self.feature_mean.shape[0]}-column transform"
            )
        out = (X - self.feature_mean) / np.where(self.constant_features, 1.0, self.feature_scale)
        out[:, self.constant_features] = 0.0
        return out

    def transform_outcome(self, y) -> np.ndarray:
        if self.outcome_mean is None:
            raise ValueError("no outcome transform was fitted for this task")
        y = _as_vector(y, "y")
        if self.outcome_scale == 0.0:
            return np.zeros_like(y)
        return (y - self.outcome_mean) / self.outcome_scale

    def inverse_outcome(self, scores) -> np.ndarray:
        """Map model scores back to the original outcome scale."""
        if self.outcome_mean is None:
            return _as_vector(scores, "scores")
        scores = _as_vector(scores, "scores")
        return self.outcome_mean + self.outcome_scale * scores


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-task transforms, in problem task order."""

    tasks: tuple

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))


def standardize(
    problem: MtlProblem, standardize_regression_outcomes: bool = False
) -> tuple:
    """Z-standardize each task's feature columns (sample sd, ddof=1).

    Regression outcomes are standardized too when the flag is set;
    classification labels are never touched.  Returns the transformed
    problem and the record needed to apply/invert the transform at
    prediction time.
    """
    new_tasks = []
    records = []
    for task in problem.tasks:
        if task.n_samples < 2:
            raise DataError(
                f"task {task.name!r}: standardization needs at least 2 samples"
            )
        mean = task.X.mean(axis=0)
        scale = task.X.std(axis=0, ddof=1)
        constant = scale == 0.0
        Xs = (task.X - mean) / np.where(constant, 1.0, scale)
        Xs[:, constant] = 0.0

        y = task.y
        outcome_mean = outcome_scale = None
        if standardize_regression_outcomes and task.kind is TaskKind.REGRESSION:
            outcome_mean = float(y.mean())
            outcome_scale = float(y.std(ddof=1))
            y = np.zeros_like(y) if outcome_scale == 0.0 else (y - outcome_mean) / outcome_scale

        new_tasks.append(TaskDataset(Xs, y, task.kind, task.name))
        records.append(
            TaskStandardization(
                feature_mean=mean,
                feature_scale=np.where(constant, 1.0, scale),
                constant_features=constant,
                outcome_mean=outcome_mean,
                outcome_scale=outcome_scale,
            )
        )
    return MtlProblem(tuple(new_tasks)), StandardizationRecord(tuple(records))
