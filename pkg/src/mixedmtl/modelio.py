"""Manifest/CSV ingestion and the versioned model file.

A task manifest is a JSON document with a task list and two global
options::

    {
      "standardize": false,
      "fit_intercept": false,
      "tasks": [
        {"name": "diagnosis", "kind": "classification",
         "data_path": "diagnosis.csv", "outcome_column": "y"},
        ...
      ]
    }

Data paths are resolved relative to the manifest's directory.  Each data
file is a headered CSV; the outcome column is extracted and every other
column must be numeric.  Feature columns are matched across tasks by
name and reordered to a canonical (sorted) order, so column permutations
in the files do not change the loaded problem.  Classification outcomes
may be given as -1/+1 or 0/1; 0/1 is remapped on load.  Missing values
are rejected.

Model files are canonical JSON (sorted keys, repr-exact floats), so
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CoefficientMatrix,
    DataError,
    MtlProblem,
    StandardizationRecord,
    TaskDataset,
    TaskKind,
    TaskStandardization,
    sigmoid,
)

__all__ = [
    "MODEL_FORMAT_VERSION",
    "ManifestTask",
    "TaskManifest",
    "ModelFile",
    "parse_manifest",
    "read_task_csv",
    "load_problem",
    "save_model",
    "load_model",
    "model_scores",
    "model_predictions",
    "format_float",
    "write_csv",
]

MODEL_FORMAT_VERSION = 1


def format_float(value: float) -> str:
    """17 significant digits: enough for exact float round trips."""
    return format(float(value), ".17g")


def write_csv(path, header, rows) -> None:
    """Write a CSV with Unix newlines and round-trip-exact numbers."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(cell if isinstance(cell, str) else format_float(cell) for cell in row)
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class ManifestTask:
    name: str
    kind: TaskKind
    data_path: str
    outcome_column: str


@dataclass(frozen=True)
class TaskManifest:
    tasks: tuple
    standardize: bool = False
    fit_intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        names = [task.name for task in self.tasks]
        if len(set(names)) != len(names):
            raise DataError("manifest task names must be unique")


def parse_manifest(path) -> TaskManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"manifest {path!r} does not exist") from None
    except json.JSONDecodeError as err:
        raise DataError(f"manifest {path!r} is not valid JSON: {err}") from None
    if not isinstance(raw, dict) or "tasks" not in raw:
        raise DataError(f"manifest {path!r} must be an object with a 'tasks' list")
    tasks = []
    for entry in raw["tasks"]:
        missing = {"name", "kind", "data_path", "outcome_column"} - set(entry)
        if missing:
            raise DataError(f"manifest task entry is missing {sorted(missing)}")
        try:
            kind = TaskKind(entry["kind"])
        except ValueError:
            raise DataError(
                f"task {entry['name']!r}: kind must be 'classification' or 'regression', "
                f"got {entry['kind']!r}"
            ) from None
        tasks.append(
            ManifestTask(
                name=str(entry["name"]),
                kind=kind,
                data_path=str(entry["data_path"]),
                outcome_column=str(entry["outcome_column"]),
            )
        )
    if not tasks:
        raise DataError(f"manifest {path!r} lists no tasks")
    return TaskManifest(
        tasks=tuple(tasks),
        standardize=bool(raw.get("standardize", False)),
        fit_intercept=bool(raw.get("fit_intercept", False)),
    )


def read_task_csv(path):
    """Read a headered numeric CSV; returns (header, values).

    Rejects duplicated header names, ragged rows, missing values, and
    non-numeric cells.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"data file {path!r} does not exist") from None
    rows = [row for row in rows if row]
    if not rows:
        raise DataError(f"data file {path!r} is empty")
    header = [cell.strip() for cell in rows[0]]
    if len(set(header)) != len(header):
        duplicates = sorted({name for name in header if header.count(name) > 1})
        raise DataError(f"data file {path!r} has duplicated columns: {duplicates}")
    if len(rows) < 2:
        raise DataError(f"data file {path!r} has a header but no rows")
    values = np.empty((len(rows) - 1, len(header)))
    for r, cells in enumerate(rows[1:]):
        if len(cells) != len(header):
            raise DataError(
                f"data file {path!r}, row {r + 2}: {len(cells)} cells for "
                f"{len(header)} columns"
            )
        for c, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "":
                raise DataError(
                    f"data file {path!r}, row {r + 2}, column {header[c]!r}: missing "
                    "value (impute before loading)"
                )
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"data file {path!r}, row {r + 2}, column {header[c]!r}: "
                    f"non-numeric cell {cell!r}"
                ) from None
            if not np.isfinite(value):
                raise DataError(
                    f"data file {path!r}, row {r + 2}, column {header[c]!r}: "
                    f"non-finite value {cell!r}"
                )
            values[r, c] = value
    return header, values


def _remap_labels(y: np.ndarray, task_name: str) -> np.ndarray:
    values = set(np.unique(y).tolist())
    if values <= {-1.0, 1.0}:
        return y
    if values <= {0.0, 1.0}:
        return 2.0 * y - 1.0
    raise DataError(
        f"task {task_name!r}: classification outcomes must be in {{-1,+1}} or {{0,1}}, "
        f"got values {sorted(values)[:5]}"
    )


def load_problem(manifest_path):
    """Load a manifest and its data files.

    Returns (problem, feature_names, manifest).  Tasks are reordered
    classification-first (stable); feature columns are reordered to the
    canonical sorted order shared by all tasks.
    """
    manifest = parse_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    canonical = None
    loaded = []
    for entry in manifest.tasks:
        data_path = os.path.join(base, entry.data_path)
        header, values = read_task_csv(data_path)
        if entry.outcome_column not in header:
            raise DataError(
                f"task {entry.name!r}: outcome column {entry.outcome_column!r} not in "
                f"{data_path!r}"
            )
        outcome_idx = header.index(entry.outcome_column)
        feature_names = [name for name in header if name != entry.outcome_column]
        if not feature_names:
            raise DataError(f"task {entry.name!r}: no feature columns besides the outcome")
        if canonical is None:
            canonical = sorted(feature_names)
        elif sorted(feature_names) != canonical:
            extra = sorted(set(feature_names) - set(canonical))
            absent = sorted(set(canonical) - set(feature_names))
            raise DataError(
                f"task {entry.name!r}: feature set differs from the first task "
                f"(extra: {extra}, missing: {absent})"
            )
        y = values[:, outcome_idx]
        if entry.kind is TaskKind.CLASSIFICATION:
            y = _remap_labels(y, entry.name)
        column_of = {name: i for i, name in enumerate(header)}
        X = values[:, [column_of[name] for name in canonical]]
        loaded.append(TaskDataset(X, y, entry.kind, entry.name))

    ordered = [t for t in loaded if t.kind is TaskKind.CLASSIFICATION]
    ordered += [t for t in loaded if t.kind is TaskKind.REGRESSION]
    return MtlProblem(tuple(ordered)), list(canonical), manifest


@dataclass(frozen=True)
class ModelFile:
    """A fitted model plus everything needed to apply it to raw data."""

    feature_names: tuple
    task_names: tuple
    task_kinds: tuple
    coef: CoefficientMatrix
    standardization: Optional[StandardizationRecord]
    standardize_outcomes: bool
    lam: float
    alpha: float
    beta: float
    seed: Optional[int] = None
    version: int = MODEL_FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "task_names", tuple(self.task_names))
        object.__setattr__(self, "task_kinds", tuple(TaskKind(k) for k in self.task_kinds))
        p, t = self.coef.W.shape
        if len(self.feature_names) != p:
            raise DataError(f"{len(self.feature_names)} feature names for {p} rows")
        if len(self.task_names) != t or len(self.task_kinds) != t:
            raise DataError(f"task names/kinds do not match {t} columns")

    def task_index(self, name: str) -> int:
        try:
            return self.task_names.index(name)
        except ValueError:
            raise DataError(f"model has no task named {name!r}") from None


def _standardization_to_dict(record: StandardizationRecord) -> list:
    out = []
    for ts in record.tasks:
        out.append(
            {
                "feature_mean": ts.feature_mean.tolist(),
                "feature_scale": ts.feature_scale.tolist(),
                "constant_features": [bool(v) for v in ts.constant_features],
                "outcome_mean": ts.outcome_mean,
                "outcome_scale": ts.outcome_scale,
            }
        )
    return out


def _standardization_from_dict(items) -> StandardizationRecord:
    tasks = []
    for item in items:
        tasks.append(
            TaskStandardization(
                feature_mean=np.array(item["feature_mean"], dtype=float),
                feature_scale=np.array(item["feature_scale"], dtype=float),
                constant_features=np.array(item["constant_features"], dtype=bool),
                outcome_mean=item["outcome_mean"],
                outcome_scale=item["outcome_scale"],
            )
        )
    return StandardizationRecord(tuple(tasks))


def save_model(model: ModelFile, path) -> None:
    doc = {
        "format_version": model.version,
        "feature_names": list(model.feature_names),
        "tasks": [
            {"name": name, "kind": kind.value}
            for name, kind in zip(model.task_names, model.task_kinds)
        ],
        "coefficients": model.coef.W.tolist(),
        "intercepts": None if model.coef.intercepts is None else model.coef.intercepts.tolist(),
        "standardization": (
            None
            if model.standardization is None
            else {
                "standardize_outcomes": model.standardize_outcomes,
                "tasks": _standardization_to_dict(model.standardization),
            }
        ),
        "hyperparameters": {"lambda": model.lam, "alpha": model.alpha, "beta": model.beta},
        "seed": model.seed,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_model(path) -> ModelFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"model file {path!r} does not exist") from None
    except json.JSONDecodeError as err:
        raise DataError(f"model file {path!r} is not valid JSON: {err}") from None
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(
            f"model file {path!r} has format version {doc.get('format_version')!r}; "
            f"this build reads version {MODEL_FORMAT_VERSION}"
        )
    std = doc["standardization"]
    record = None
    standardize_outcomes = False
    if std is not None:
        record = _standardization_from_dict(std["tasks"])
        standardize_outcomes = bool(std["standardize_outcomes"])
    intercepts = doc["intercepts"]
    coef = CoefficientMatrix(
        np.array(doc["coefficients"], dtype=float),
        None if intercepts is None else np.array(intercepts, dtype=float),
    )
    return ModelFile(
        feature_names=tuple(doc["feature_names"]),
        task_names=tuple(entry["name"] for entry in doc["tasks"]),
        task_kinds=tuple(entry["kind"] for entry in doc["tasks"]),
        coef=coef,
        standardization=record,
        standardize_outcomes=standardize_outcomes,
        lam=float(doc["hyperparameters"]["lambda"]),
        alpha=float(doc["hyperparameters"]["alpha"]),
        beta=float(doc["hyperparameters"]["beta"]),
        seed=doc["seed"],
        version=int(doc["format_version"]),
    )


def model_scores(model: ModelFile, X: np.ndarray, task_index: int) -> np.ndarray:
    """Linear scores of one task column on raw features.

    The model's stored standardization (if any) is applied to X first, so
    raw and pre-standardized inputs give identical scores.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DataError(
            f"expected {len(model.feature_names)} feature columns, got shape {X.shape}"
        )
    if model.standardization is not None:
        X = model.standardization.tasks[task_index].transform_features(X)
    scores = X @ model.coef.W[:, task_index]
    if model.coef.intercepts is not None:
        scores = scores + model.coef.intercepts[task_index]
    return scores


def model_predictions(model: ModelFile, X: np.ndarray, task_index: int) -> dict:
    """Column name -> vector for a prediction report on one task."""
    scores = model_scores(model, X, task_index)
    kind = model.task_kinds[task_index]
    if kind is TaskKind.CLASSIFICATION:
        return {
            "score": scores,
            "probability": sigmoid(scores),
            "label": np.where(scores >= 0.0, 1.0, -1.0),
        }
    prediction = scores
    if model.standardization is not None:
        prediction = model.standardization.tasks[task_index].inverse_outcome(scores)
    return {"score": scores, "prediction": prediction}
