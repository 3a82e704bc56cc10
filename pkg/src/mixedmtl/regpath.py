"""Penalty-strength sequence estimation and warm-started path fitting.

The path root lam_max is the smallest penalty for which the all-zero
coefficient matrix is optimal.  Thanks to the fixed loss weights (2 on
the logit loss, 0.5 on the least-squares loss) the cross-product matrix

    C[j, i] = (1/N_i) * sum_k y_k^(i) x_kj^(i)

is the negative loss gradient at W = 0 for classification and regression
tasks alike, so a single lam_max = max_j ||C[j, :]||_2 anchors both task
types.  The sequence is then interpolated geometrically down to
ratio * lam_max, and models are fitted in descending order, each warm
started from the previous solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CoefficientMatrix,
    DataError,
    Hyperparameters,
    MtlProblem,
    SolverOptions,
    TaskKind,
    _smooth_gradient_raw,
)
from .solver import SolverError, fista_fit

__all__ = [
    "NONZERO_ROW_THRESHOLD",
    "LambdaSequence",
    "PathResult",
    "path_options",
    "lam_max",
    "lambda_sequence",
    "reg_path",
    "count_nonzero_rows",
]

# Row norm above which a feature counts as selected in path reports.
NONZERO_ROW_THRESHOLD = 1e-8


def path_options(fit_intercept: bool = False) -> SolverOptions:
    """Default solver settings for individual path points."""
    return SolverOptions(max_iter=100, tol=1e-6, L0=1.0, fit_intercept=fit_intercept)


@dataclass(frozen=True)
class LambdaSequence:
    """Strictly decreasing positive penalty values with geometric spacing."""

    values: np.ndarray
    ratio: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 1:
            raise ValueError("values must be a non-empty 1-d array")
        if not np.all(values > 0.0):
            raise ValueError("penalty values must be positive")
        if np.any(np.diff(values) >= 0.0):
            raise ValueError("penalty values must be strictly decreasing")
        ratio = float(self.ratio)
        if not 0.0 < ratio <= 1.0 or (values.shape[0] > 1 and ratio >= 1.0):
            raise ValueError(f"ratio must lie in (0, 1), got {ratio!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ratio", ratio)

    @property
    def length(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PathResult:
    """One fit per penalty value, in descending-penalty order."""

    sequence: LambdaSequence
    fits: tuple
    nonzero_rows: np.ndarray

    def __post_init__(self):
        fits = tuple(self.fits)
        if len(fits) != self.sequence.length:
            raise ValueError("one fit per penalty value is required")
        object.__setattr__(self, "fits", fits)
        object.__setattr__(self, "nonzero_rows", np.array(self.nonzero_rows, dtype=int))


def count_nonzero_rows(W: np.ndarray, threshold: float = NONZERO_ROW_THRESHOLD) -> int:
    return int(np.sum(np.linalg.norm(W, axis=1) > threshold))


def _optimal_zero_intercepts(problem: MtlProblem) -> np.ndarray:
    """Per-task intercepts that are optimal while all coefficients are zero.

    Regression: the outcome mean.  Classification: the log odds
    log(n_pos / n_neg), the intercept-only logit fit.
    """
    intercepts = np.empty(problem.t)
    for i, task in enumerate(problem.tasks):
        if task.kind is TaskKind.CLASSIFICATION:
            n_pos = int(np.sum(task.y > 0))
            n_neg = task.n_samples - n_pos
            if n_pos == 0 or n_neg == 0:
                raise DataError(
                    f"task {task.name!r}: both classes are required to fit an intercept"
                )
            intercepts[i] = np.log(n_pos / n_neg)
        else:
            intercepts[i] = task.y.mean()
    return intercepts


def lam_max(problem: MtlProblem, fit_intercept: bool = False) -> float:
    """Smallest penalty for which the all-zero coefficient matrix is optimal.

    Equals the largest row norm of the negative loss gradient at W = 0
    (with intercepts first optimized at zero coefficients when enabled).
    Returns 0.0 for degenerate all-zero cross products; callers must not
    build a path from that.
    """
    W0 = np.zeros((problem.p, problem.t))
    b0 = _optimal_zero_intercepts(problem) if fit_intercept else None
    grad, _ = _smooth_gradient_raw(problem, W0, b0, 0.0, 0.0)
    return float(np.max(np.linalg.norm(grad, axis=1)))


def lambda_sequence(lam_max_val: float, ratio: float = 0.01, n: int = 100) -> LambdaSequence:
    """Geometric grid of n values from lam_max_val down to ratio * lam_max_val."""
    if not lam_max_val > 0.0:
        raise DataError(f"lam_max must be positive to build a path, got {lam_max_val!r}")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio!r}")
    if n < 2:
        raise ValueError("n must be >= 2")
    values = np.geomspace(lam_max_val, ratio * lam_max_val, num=int(n))
    return LambdaSequence(values=values, ratio=float(ratio))


def reg_path(
    problem: MtlProblem,
    sequence: LambdaSequence,
    alpha: float = 0.0,
    beta: float = 0.0,
    opts: Optional[SolverOptions] = None,
) -> PathResult:
    """Fit the whole path in descending-penalty order with warm starts.

    The first fit starts from the all-zero matrix; every later fit starts
    from the previous solution.
    """
    opts = opts or path_options()
    coef = CoefficientMatrix.zeros(problem.p, problem.t, opts.fit_intercept)
    fits = []
    nonzero = []
    for lam in sequence.values:
        try:
            result = fista_fit(problem, Hyperparameters(lam, alpha, beta), opts, w_init=coef)
        except SolverError as err:
            raise SolverError(f"path fit failed at lambda={float(lam)!r}: {err}") from err
        coef = result.coef
        fits.append(result)
        nonzero.append(count_nonzero_rows(coef.W))
    return PathResult(sequence=sequence, fits=tuple(fits), nonzero_rows=np.array(nonzero))
