import json
import os

import numpy as np
import numpy.testing as npt
import pytest

from mixedmtl import (
    CoefficientMatrix,
    DataError,
    MtlProblem,
    ModelFile,
    TaskDataset,
    TaskKind,
    auc,
    explained_variance,
    load_model,
    load_problem,
    model_scores,
    save_model,
    standardize,
)
from mixedmtl.cli import main
from mixedmtl.modelio import format_float, read_task_csv, write_csv


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _manifest(tmp_path, tasks, standardize=False, fit_intercept=False, name="manifest.json"):
    doc = {"standardize": standardize, "fit_intercept": fit_intercept, "tasks": tasks}
    path = tmp_path / name
    _write(path, json.dumps(doc))
    return str(path)


# ---------------------------------------------------------------------------
# CSV primitives


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-8, 8, size=(7, 3))
    path = tmp_path / "round.csv"
    write_csv(path, ["a", "b", "c"], [list(row) for row in values])
    header, loaded = read_task_csv(path)
    assert header == ["a", "b", "c"]
    npt.assert_array_equal(loaded, values)


def test_format_float_17_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1.0 / 3.0)) == 1.0 / 3.0


def test_read_task_csv_errors(tmp_path):
    with pytest.raises(DataError, match="does not exist"):
        read_task_csv(tmp_path / "missing.csv")

    path = tmp_path / "bad.csv"
    _write(path, "")
    with pytest.raises(DataError, match="empty"):
        read_task_csv(path)

    _write(path, "a,b,a\n1,2,3\n")
    with pytest.raises(DataError, match="duplicated"):
        read_task_csv(path)

    _write(path, "a,b\n1\n")
    with pytest.raises(DataError, match="2 columns|columns"):
        read_task_csv(path)

    _write(path, "a,b\n1,\n")
    with pytest.raises(DataError, match="missing value"):
        read_task_csv(path)

    _write(path, "a,b\n1,x\n")
    with pytest.raises(DataError, match="non-numeric"):
        read_task_csv(path)

    _write(path, "a,b\n1,inf\n")
    with pytest.raises(DataError, match="non-finite"):
        read_task_csv(path)

    _write(path, "a,b\n")
    with pytest.raises(DataError, match="no rows"):
        read_task_csv(path)


# ---------------------------------------------------------------------------
# manifest loading


def test_load_problem_basic(tmp_path):
    _write(tmp_path / "c.csv", "f1,f2,y\n1,2,1\n3,4,0\n")
    _write(tmp_path / "r.csv", "f1,f2,y\n1,2,0.5\n3,4,1.5\n")
    manifest = _manifest(
        tmp_path,
        [
            {"name": "reg", "kind": "regression", "data_path": "r.csv", "outcome_column": "y"},
            {"name": "clf", "kind": "classification", "data_path": "c.csv", "outcome_column": "y"},
        ],
    )
    problem, features, options = load_problem(manifest)
    assert features == ["f1", "f2"]  # p = header count - 1
    assert problem.p == 2
    # classification first, 0/1 labels remapped
    assert problem.tasks[0].name == "clf"
    npt.assert_array_equal(problem.tasks[0].y, [1.0, -1.0])
    assert problem.tasks[1].kind is TaskKind.REGRESSION
    assert options.standardize is False


def test_load_problem_column_permutation_invariant(tmp_path):
    _write(tmp_path / "a.csv", "f1,f2,y\n1,2,0.1\n3,4,0.2\n")
    _write(tmp_path / "b.csv", "y,f2,f1\n0.1,2,1\n0.2,4,3\n")
    man_a = _manifest(
        tmp_path,
        [{"name": "t", "kind": "regression", "data_path": "a.csv", "outcome_column": "y"}],
        name="ma.json",
    )
    man_b = _manifest(
        tmp_path,
        [{"name": "t", "kind": "regression", "data_path": "b.csv", "outcome_column": "y"}],
        name="mb.json",
    )
    pa, fa, _ = load_problem(man_a)
    pb, fb, _ = load_problem(man_b)
    assert fa == fb
    npt.assert_array_equal(pa.tasks[0].X, pb.tasks[0].X)
    npt.assert_array_equal(pa.tasks[0].y, pb.tasks[0].y)


def test_load_problem_errors(tmp_path):
    _write(tmp_path / "a.csv", "f1,f2,y\n1,2,0.1\n")
    _write(tmp_path / "short.csv", "f1,y\n1,0.1\n")
    _write(tmp_path / "badlab.csv", "f1,f2,y\n1,2,3\n3,4,1\n")

    with pytest.raises(DataError, match="does not exist"):
        load_problem(tmp_path / "nope.json")

    man = _manifest(
        tmp_path,
        [{"name": "t", "kind": "regression", "data_path": "gone.csv", "outcome_column": "y"}],
        name="m1.json",
    )
    with pytest.raises(DataError, match="does not exist"):
        load_problem(man)

    man = _manifest(
        tmp_path,
        [{"name": "t", "kind": "regression", "data_path": "a.csv", "outcome_column": "z"}],
        name="m2.json",
    )
    with pytest.raises(DataError, match="outcome column"):
        load_problem(man)

    man = _manifest(
        tmp_path,
        [
            {"name": "t1", "kind": "regression", "data_path": "a.csv", "outcome_column": "y"},
            {"name": "t2", "kind": "regression", "data_path": "short.csv", "outcome_column": "y"},
        ],
        name="m3.json",
    )
    with pytest.raises(DataError, match="feature set differs"):
        load_problem(man)

    man = _manifest(
        tmp_path,
        [{"name": "t", "kind": "classification", "data_path": "badlab.csv", "outcome_column": "y"}],
        name="m4.json",
    )
    with pytest.raises(DataError, match="classification outcomes"):
        load_problem(man)

    man = _manifest(
        tmp_path,
        [
            {"name": "t", "kind": "regression", "data_path": "a.csv", "outcome_column": "y"},
            {"name": "t", "kind": "regression", "data_path": "a.csv", "outcome_column": "y"},
        ],
        name="m5.json",
    )
    with pytest.raises(DataError, match="unique"):
        load_problem(man)

    man = _manifest(
        tmp_path,
        [{"name": "t", "kind": "ordinal", "data_path": "a.csv", "outcome_column": "y"}],
        name="m6.json",
    )
    with pytest.raises(DataError, match="kind"):
        load_problem(man)

    _write(tmp_path / "m7.json", "{not json")
    with pytest.raises(DataError, match="JSON"):
        load_problem(tmp_path / "m7.json")


# ---------------------------------------------------------------------------
# model file


def _small_model(with_standardization=False):
    rng = np.random.default_rng(1)
    W = rng.standard_normal((3, 2))
    record = None
    if with_standardization:
        X = rng.standard_normal((10, 3)) * 2.0 + 1.0
        problem = MtlProblem(
            (
                TaskDataset(X, np.where(rng.standard_normal(10) > 0, 1.0, -1.0),
                            "classification", "c"),
                TaskDataset(X + 0.5, rng.standard_normal(10), "regression", "r"),
            )
        )
        _, record = standardize(problem, standardize_regression_outcomes=True)
    return ModelFile(
        feature_names=("f1", "f2", "f3"),
        task_names=("c", "r"),
        task_kinds=("classification", "regression"),
        coef=CoefficientMatrix(W, rng.standard_normal(2)),
        standardization=record,
        standardize_outcomes=with_standardization,
        lam=0.25,
        alpha=0.0,
        beta=0.1,
        seed=None,
    )


@pytest.mark.parametrize("with_standardization", [False, True])
def test_model_save_load_save_byte_identical(tmp_path, with_standardization):
    model = _small_model(with_standardization)
    p1 = tmp_path / "m1.json"
    p2 = tmp_path / "m2.json"
    save_model(model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_model_round_trip_predictions(tmp_path):
    model = _small_model(True)
    rng = np.random.default_rng(2)
    X = rng.standard_normal((6, 3))
    path = tmp_path / "m.json"
    save_model(model, path)
    again = load_model(path)
    for idx in range(2):
        npt.assert_array_equal(model_scores(model, X, idx), model_scores(again, X, idx))


def test_model_load_rejects_unknown_version(tmp_path):
    model = _small_model()
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    _write(path, json.dumps(doc))
    with pytest.raises(DataError, match="format version"):
        load_model(path)


def test_model_standardization_applies_at_predict_time():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 4)) * 3.0 + 2.0
    y = rng.standard_normal(30)
    problem = MtlProblem((TaskDataset(X, y, "regression", "r"),))
    std_problem, record = standardize(problem, standardize_regression_outcomes=True)
    W = rng.standard_normal((4, 1))
    model = ModelFile(
        feature_names=("a", "b", "c", "d"),
        task_names=("r",),
        task_kinds=("regression",),
        coef=CoefficientMatrix(W),
        standardization=record,
        standardize_outcomes=True,
        lam=0.1, alpha=0.0, beta=0.0,
    )
    raw_scores = model_scores(model, X, 0)
    npt.assert_allclose(raw_scores, std_problem.tasks[0].X @ W[:, 0], atol=1e-10)


# ---------------------------------------------------------------------------
# CLI


def _run(args):
    return main([str(a) for a in args])


def _simulate_dir(tmp_path, name="sim", seed=3):
    out = tmp_path / name
    code = _run([
        "simulate", "--p", 25, "--t-classification", 2, "--t-regression", 2,
        "--n-per-task", 40, "--seed", seed, "--out-dir", out,
    ])
    assert code == 0
    return out


def test_cli_simulate_outputs(tmp_path):
    out = _simulate_dir(tmp_path)
    assert (out / "true_support.csv").exists()
    assert (out / "runlog.json").exists()
    problem, features, _ = load_problem(out / "train" / "manifest.json")
    assert problem.t == 4 and problem.p == 25
    assert len(features) == 25
    test_problem, _, _ = load_problem(out / "test" / "manifest.json")
    assert test_problem.t == 4
    runlog = json.loads((out / "runlog.json").read_text())
    assert runlog["command"] == "simulate"
    assert runlog["config"]["seed"] == 3


def test_cli_fit_at_lam_max_gives_zero_model(tmp_path):
    sim = _simulate_dir(tmp_path)
    path_dir = tmp_path / "path"
    assert _run([
        "path", "--manifest", sim / "train" / "manifest.json",
        "--n-lambda", 2, "--ratio", 0.5, "--out-dir", path_dir,
    ]) == 0
    lines = (path_dir / "path.csv").read_text().splitlines()
    assert lines[0] == "lambda,objective,nonzero_rows"
    lam_top = lines[1].split(",")[0]
    assert lines[1].split(",")[2] == "0"

    fit_dir = tmp_path / "fit"
    assert _run([
        "fit", "--manifest", sim / "train" / "manifest.json",
        "--lambda", lam_top, "--out-dir", fit_dir,
    ]) == 0
    model = load_model(fit_dir / "model.json")
    npt.assert_array_equal(model.coef.W, np.zeros((25, 4)))


def test_cli_cv_fit_eval_pipeline(tmp_path):
    sim = _simulate_dir(tmp_path)
    cv_dir = tmp_path / "cv"
    assert _run([
        "cv", "--manifest", sim / "train" / "manifest.json",
        "--k", 3, "--seed", 0, "--n-lambda", 15, "--out-dir", cv_dir,
    ]) == 0
    best = (cv_dir / "best_lambda.txt").read_text().strip()
    cv_lines = (cv_dir / "cv.csv").read_text().splitlines()
    assert cv_lines[0] == "lambda,mean_error,se_error"
    assert len(cv_lines) == 16

    fit_dir = tmp_path / "fit"
    assert _run([
        "fit", "--manifest", sim / "train" / "manifest.json",
        "--lambda", best, "--out-dir", fit_dir,
    ]) == 0

    eval_dir = tmp_path / "eval"
    assert _run([
        "eval", "--model", fit_dir / "model.json",
        "--manifest", sim / "test" / "manifest.json", "--out-dir", eval_dir,
    ]) == 0
    rows = [line.split(",") for line in (eval_dir / "eval.csv").read_text().splitlines()[1:]]
    by_metric = {}
    for name, kind, metric, value in rows:
        by_metric.setdefault(metric, []).append(float(value))
    assert all(v > 0.5 for v in by_metric["auc"])  # strong simulated signal
    assert all(np.isfinite(v) for v in by_metric["explained_variance"])


def test_cli_predict_zero_model_gives_half_probability(tmp_path):
    sim = _simulate_dir(tmp_path)
    path_dir = tmp_path / "p"
    _run(["path", "--manifest", sim / "train" / "manifest.json",
          "--n-lambda", 2, "--ratio", 0.5, "--out-dir", path_dir])
    lam_top = (path_dir / "path.csv").read_text().splitlines()[1].split(",")[0]
    fit_dir = tmp_path / "fit"
    _run(["fit", "--manifest", sim / "train" / "manifest.json",
          "--lambda", lam_top, "--out-dir", fit_dir])
    pred_dir = tmp_path / "pred"
    assert _run([
        "predict", "--model", fit_dir / "model.json",
        "--data", sim / "test" / "clf01.csv", "--task", "clf01", "--out-dir", pred_dir,
    ]) == 0
    lines = (pred_dir / "predictions.csv").read_text().splitlines()
    assert lines[0] == "score,probability,label"
    probs = [float(line.split(",")[1]) for line in lines[1:]]
    assert probs and all(p == 0.5 for p in probs)


def test_cli_predict_data_errors(tmp_path):
    sim = _simulate_dir(tmp_path)
    path_dir = tmp_path / "p"
    _run(["path", "--manifest", sim / "train" / "manifest.json",
          "--n-lambda", 2, "--ratio", 0.5, "--out-dir", path_dir])
    lam_top = (path_dir / "path.csv").read_text().splitlines()[1].split(",")[0]
    fit_dir = tmp_path / "fit"
    _run(["fit", "--manifest", sim / "train" / "manifest.json",
          "--lambda", lam_top, "--out-dir", fit_dir])

    # unknown task name
    assert _run(["predict", "--model", fit_dir / "model.json",
                 "--data", sim / "test" / "clf01.csv", "--task", "nope",
                 "--out-dir", tmp_path / "o1"]) == 3

    # data file missing model features
    _write(tmp_path / "narrow.csv", "x01,y\n1,0.5\n")
    assert _run(["predict", "--model", fit_dir / "model.json",
                 "--data", tmp_path / "narrow.csv", "--task", "clf01",
                 "--out-dir", tmp_path / "o2"]) == 3


def test_cli_eval_standardized_model_on_raw_data(tmp_path):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 3)) * 5.0 + 3.0
    w = np.array([1.0, -2.0, 0.5])
    y = X @ w + 0.1 * rng.standard_normal(40)
    labels = np.where(X @ w - np.mean(X @ w) > 0, 1.0, -1.0)

    def write_task(path, outcomes):
        write_csv(path, ["f1", "f2", "f3", "y"],
                  [list(X[r]) + [outcomes[r]] for r in range(40)])

    write_task(tmp_path / "r.csv", y)
    write_task(tmp_path / "c.csv", labels)
    manifest = _manifest(
        tmp_path,
        [
            {"name": "c", "kind": "classification", "data_path": "c.csv", "outcome_column": "y"},
            {"name": "r", "kind": "regression", "data_path": "r.csv", "outcome_column": "y"},
        ],
        standardize=True,
    )
    fit_dir = tmp_path / "fit"
    assert _run(["fit", "--manifest", manifest, "--lambda", 0.01, "--out-dir", fit_dir]) == 0
    eval_dir = tmp_path / "eval"
    assert _run(["eval", "--model", fit_dir / "model.json", "--manifest", manifest,
                 "--out-dir", eval_dir]) == 0

    # Independent evaluation on pre-standardized data must agree to 1e-10.
    model = load_model(fit_dir / "model.json")
    problem, _, _ = load_problem(manifest)
    std_problem, record = standardize(problem, standardize_regression_outcomes=True)
    reported = {
        line.split(",")[0]: float(line.split(",")[3])
        for line in (eval_dir / "eval.csv").read_text().splitlines()[1:]
    }
    clf_idx, reg_idx = 0, 1
    scores_std = std_problem.tasks[clf_idx].X @ model.coef.W[:, clf_idx]
    assert reported["c"] == pytest.approx(auc(scores_std, std_problem.tasks[clf_idx].y), abs=1e-10)
    pred_std = std_problem.tasks[reg_idx].X @ model.coef.W[:, reg_idx]
    assert reported["r"] == pytest.approx(
        explained_variance(pred_std, std_problem.tasks[reg_idx].y), abs=1e-10
    )


def test_cli_pipeline_with_intercepts_and_standardization(tmp_path):
    rng = np.random.default_rng(6)
    X = rng.standard_normal((50, 4)) * 2.0 + 7.0  # offset features need the intercept
    w = np.array([1.5, -1.0, 0.0, 0.0])
    y = X @ w + 4.0 + 0.2 * rng.standard_normal(50)
    labels = np.where(X @ w - np.median(X @ w) > 0, 1.0, -1.0)

    def dump(path, outcome):
        write_csv(path, ["f1", "f2", "f3", "f4", "y"],
                  [list(X[r]) + [outcome[r]] for r in range(50)])

    dump(tmp_path / "c.csv", labels)
    dump(tmp_path / "r.csv", y)
    manifest = _manifest(
        tmp_path,
        [
            {"name": "c", "kind": "classification", "data_path": "c.csv", "outcome_column": "y"},
            {"name": "r", "kind": "regression", "data_path": "r.csv", "outcome_column": "y"},
        ],
        standardize=True,
        fit_intercept=True,
    )
    cv_dir = tmp_path / "cv"
    assert _run(["cv", "--manifest", manifest, "--k", 4, "--seed", 0,
                 "--n-lambda", 12, "--out-dir", cv_dir]) == 0
    best = (cv_dir / "best_lambda.txt").read_text().strip()
    fit_dir = tmp_path / "fit"
    assert _run(["fit", "--manifest", manifest, "--lambda", best,
                 "--out-dir", fit_dir]) == 0
    model = load_model(fit_dir / "model.json")
    assert model.coef.intercepts is not None and model.standardization is not None

    eval_dir = tmp_path / "eval"
    assert _run(["eval", "--model", fit_dir / "model.json", "--manifest", manifest,
                 "--out-dir", eval_dir]) == 0
    metrics = {
        line.split(",")[0]: float(line.split(",")[3])
        for line in (eval_dir / "eval.csv").read_text().splitlines()[1:]
    }
    assert metrics["c"] > 0.9  # in-sample, strong signal
    assert metrics["r"] > 0.9

    # raw-scale regression predictions must sit near the raw outcomes
    pred_dir = tmp_path / "pred"
    assert _run(["predict", "--model", fit_dir / "model.json", "--data",
                 tmp_path / "r.csv", "--task", "r", "--out-dir", pred_dir]) == 0
    lines = (pred_dir / "predictions.csv").read_text().splitlines()
    assert lines[0] == "score,prediction"
    preds = np.array([float(line.split(",")[1]) for line in lines[1:]])
    assert explained_variance(preds, y) > 0.9


def test_cli_full_pipeline_is_byte_identical(tmp_path):
    def pipeline(root):
        sim = root / "sim"
        _run(["simulate", "--p", 20, "--t-classification", 1, "--t-regression", 1,
              "--n-per-task", 30, "--seed", 9, "--out-dir", sim])
        cv_dir = root / "cv"
        _run(["cv", "--manifest", sim / "train" / "manifest.json", "--k", 3,
              "--seed", 1, "--n-lambda", 8, "--out-dir", cv_dir])
        best = (cv_dir / "best_lambda.txt").read_text().strip()
        fit_dir = root / "fit"
        _run(["fit", "--manifest", sim / "train" / "manifest.json", "--lambda", best,
              "--out-dir", fit_dir])
        eval_dir = root / "eval"
        _run(["eval", "--model", fit_dir / "model.json",
              "--manifest", sim / "test" / "manifest.json", "--out-dir", eval_dir])
        return root

    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    files_a = sorted(
        os.path.relpath(os.path.join(d, f), a)
        for d, _, fs in os.walk(a) for f in fs
    )
    files_b = sorted(
        os.path.relpath(os.path.join(d, f), b)
        for d, _, fs in os.walk(b) for f in fs
    )
    assert files_a == files_b
    for rel in files_a:
        if rel.endswith("runlog.json"):
            continue  # contains the differing --out-dir paths
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_cli_exit_codes(tmp_path, capsys):
    # usage: unknown flag (argparse) and bad bench method
    assert _run(["fit", "--nope"]) == 2
    assert _run(["bench", "--methods", "banana", "--out-dir", tmp_path / "b"]) == 2
    assert "usage-error" in capsys.readouterr().err

    # data error: missing manifest
    assert _run(["fit", "--manifest", tmp_path / "gone.json", "--lambda", 1.0,
                 "--out-dir", tmp_path / "f"]) == 3
    assert "data-error" in capsys.readouterr().err

    # numerical error: squared loss overflows on huge outcomes
    _write(tmp_path / "huge.csv", "f1,y\n1,1e200\n2,-1e200\n")
    man = _manifest(
        tmp_path,
        [{"name": "t", "kind": "regression", "data_path": "huge.csv", "outcome_column": "y"}],
        name="huge.json",
    )
    with np.errstate(over="ignore"):
        assert _run(["fit", "--manifest", man, "--lambda", 0.1,
                     "--out-dir", tmp_path / "n"]) == 4
    assert "numerical-error" in capsys.readouterr().err


def test_cli_bench_writes_table(tmp_path):
    out = tmp_path / "bench"
    assert _run([
        "bench", "--p", 20, "--t-classification", 1, "--t-regression", 1,
        "--sparsity", 0.8, "--methods", "mtlcomb,mtlbin", "--ratios", "0.8",
        "--seeds", "1,2", "--k", 2, "--n-lambda", 5, "--out-dir", out,
    ]) == 0
    lines = (out / "benchmark.csv").read_text().splitlines()
    assert lines[0] == (
        "method,ratio,seed-count,mean_recovery,mean_ev_regression,"
        "mean_pseudo_ev_classification"
    )
    assert len(lines) == 3
    assert lines[1].startswith("mtlcomb,") and lines[2].startswith("mtlbin,")
