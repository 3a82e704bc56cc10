"""Joint sparse multi-task learning for mixed regression and classification tasks.

Fits several related prediction tasks at once through a shared p x t
coefficient matrix whose rows are driven to zero jointly, so all tasks
select the same features.  Classification (logit loss) and regression
(least-squares loss) tasks can be mixed freely: fixed loss weights put
both task types on a common penalty scale, giving them a single shared
regularization path.
"""

__version__ = "0.1.0"

from .core import (
    CoefficientMatrix,
    DataError,
    Hyperparameters,
    MtlProblem,
    SolverOptions,
    StandardizationRecord,
    TaskDataset,
    TaskKind,
    TaskStandardization,
    full_objective,
    l21_norm,
    make_centering,
    predict,
    sigmoid,
    smooth_gradient,
    smooth_objective,
    standardize,
)
from .modelio import (
    ModelFile,
    load_model,
    load_problem,
    model_predictions,
    model_scores,
    parse_manifest,
    save_model,
)
from .modelselect import (
    CvResult,
    auc,
    cross_validate,
    explained_variance,
    kfold_split,
    pseudo_explained_variance,
)
from .regpath import (
    LambdaSequence,
    PathResult,
    lam_max,
    lambda_sequence,
    path_options,
    reg_path,
)
from .simdata import (
    BenchmarkRow,
    SimulationOutput,
    SimulationSpec,
    binarize_problem,
    recovery_accuracy,
    run_benchmark,
    simulate,
)
from .solver import FitResult, SolverError, fista_fit, ista_fit, line_search, prox_l21

__all__ = [
    "__version__",
    "CoefficientMatrix",
    "DataError",
    "Hyperparameters",
    "MtlProblem",
    "SolverOptions",
    "StandardizationRecord",
    "TaskDataset",
    "TaskKind",
    "TaskStandardization",
    "full_objective",
    "l21_norm",
    "make_centering",
    "predict",
    "sigmoid",
    "smooth_gradient",
    "smooth_objective",
    "standardize",
    "ModelFile",
    "load_model",
    "load_problem",
    "model_predictions",
    "model_scores",
    "parse_manifest",
    "save_model",
    "CvResult",
    "auc",
    "cross_validate",
    "explained_variance",
    "kfold_split",
    "pseudo_explained_variance",
    "LambdaSequence",
    "PathResult",
    "lam_max",
    "lambda_sequence",
    "path_options",
    "reg_path",
    "BenchmarkRow",
    "SimulationOutput",
    "SimulationSpec",
    "binarize_problem",
    "recovery_accuracy",
    "run_benchmark",
    "simulate",
    "FitResult",
    "SolverError",
    "fista_fit",
    "ista_fit",
    "line_search",
    "prox_l21",
]
