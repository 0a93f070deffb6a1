import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigenprog import svm


def test_two_point_optimum():
    model = svm.train([[-1.0], [1.0]], [-1, 1], C=1e4, tol=1e-10)
    assert model.weights[0] == pytest.approx(1.0, abs=1e-6)
    assert model.bias == pytest.approx(0.0, abs=1e-6)
    assert model.converged


def oracle_qp(X, y, C):
    """Dual optimum of the augmented problem by scipy's bounded solver."""
    from scipy.optimize import minimize
    Z = np.hstack([X, np.ones((len(y), 1))]) * y[:, None]
    Q = Z @ Z.T
    res = minimize(lambda a: 0.5 * a @ Q @ a - a.sum(), np.zeros(len(y)),
                   jac=lambda a: Q @ a - 1, bounds=[(0, C)] * len(y),
                   method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return -res.fun


def test_dual_optimum_matches_reference_solver():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 4))
    y = np.where(X[:, 0] + 0.5 * rng.standard_normal(30) > 0, 1.0, -1.0)
    model = svm.train(X, y, C=1.0, tol=1e-8)
    assert model.dual_history[-1] == pytest.approx(oracle_qp(X, y, 1.0), rel=1e-6)


def _separable(rng, n=20, d=5):
    w = rng.standard_normal(d)
    X = rng.standard_normal((n, d))
    y = np.where(X @ w >= 0, 1.0, -1.0)
    X += 0.5 * y[:, None] * w / np.linalg.norm(w)
    if len(set(y)) < 2:
        y[0] = -y[0]
        X[0] = -X[0]
    return X, y


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_separable_training_accuracy(seed):
    X, y = _separable(np.random.default_rng(seed))
    model = svm.train(X, y, C=1e4)
    preds = np.array([svm.predict(model, x)[0] for x in X])
    assert np.all(preds == y)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_monotone_dual_and_kkt(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 3))
    y = np.where(X[:, 0] + rng.standard_normal(25) > 0, 1.0, -1.0)
    if len(set(y)) < 2:
        y[0] = -y[0]
    C, tol = 10.0, 1e-6
    model = svm.train(X, y, C=C, tol=tol, debug=True)
    assert model.converged
    assert np.all(np.diff(model.dual_history) >= -1e-9 * np.abs(model.dual_history[1:]))
    alpha = model.dual
    margins = y * (X @ model.weights + model.bias)
    assert np.all(margins[alpha <= 0] >= 1 - tol)
    assert np.all(margins[alpha >= C] <= 1 + tol)
    free = (alpha > 0) & (alpha < C)
    assert np.all(np.abs(margins[free] - 1) <= tol)
    Z = np.hstack([X, np.ones((25, 1))])
    assert np.allclose((alpha * y) @ Z, np.append(model.weights, model.bias))


def test_conflicting_duplicates():
    X = np.array([[0.0, 1.0], [0.0, 1.0], [2.0, 0.0], [-2.0, 0.0]])
    y = np.array([1.0, -1.0, 1.0, -1.0])
    model = svm.train(X, y, C=1e4)
    assert np.all(np.isfinite(model.weights))
    preds = np.array([svm.predict(model, x)[0] for x in X])
    assert np.mean(preds == y) <= 3 / 4


def test_predict_examples():
    model = svm.LinearSvmModel(np.array([1.0]), 0.0)
    assert svm.predict(model, [2.0]) == (1, 2.0)
    assert svm.predict(model, [0.0]) == (1, 0.0)
    assert svm.predict(model, [-3.0]) == (-1, -3.0)
    with pytest.raises(ValueError):
        svm.predict(model, [1.0, 2.0])


@given(st.floats(1e-3, 1e3))
def test_prediction_scale_invariance(scale):
    rng = np.random.default_rng(0)
    w, b = rng.standard_normal(3), 0.3
    a = svm.LinearSvmModel(w, b)
    c = svm.LinearSvmModel(w * scale, b * scale)
    for x in rng.standard_normal((10, 3)):
        assert svm.predict(a, x)[0] == svm.predict(c, x)[0]


def test_training_errors():
    with pytest.raises(svm.TrainingError):
        svm.train([[1.0], [2.0]], [1, 1])
    with pytest.raises(svm.TrainingError):
        svm.train([[np.nan], [2.0]], [1, -1])
    with pytest.raises(svm.TrainingError):
        svm.encode_labels(["a", "a", "a"])


def test_label_mapping():
    y, classes = svm.encode_labels(["mozart", "haydn", "mozart"])
    assert classes == ("haydn", "mozart") and list(y) == [1, -1, 1]


def test_determinism():
    X, y = _separable(np.random.default_rng(3))
    a, b = svm.train(X, y), svm.train(X, y)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias


def _clusters(seed=0, n=10, d=6):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.standard_normal((n, d)) + 4, rng.standard_normal((n, d)) - 4])
    return X, ["a"] * n + ["b"] * n


def test_loocv_clusters():
    X, labels = _clusters()
    report = svm.loocv(X, labels, energy_fraction=None)
    assert report["accuracy"] == 1.0 and report["n"] == 20
    assert len(report["folds"]) == 20 and report["failed_folds"] == 0


def test_loocv_fold_count_and_modes():
    X, labels = _clusters(n=2)
    report = svm.loocv(X + 10, labels, energy_fraction=0.9)
    assert len(report["folds"]) == 4 and report["mode"] == "per-fold"
    parity = svm.loocv(X + 10, labels, energy_fraction=0.9, paper_parity=True)
    assert parity["mode"] == "paper-parity"
    assert len({f["selected_dim"] for f in parity["folds"]}) == 1


def test_loocv_workers_do_not_change_results():
    X, labels = _clusters(seed=2)
    a = svm.loocv(X + 10, labels, workers=1)
    b = svm.loocv(X + 10, labels, workers=2)
    assert a == b


def test_loocv_reports_failed_fold():
    X = np.array([[1.0], [2.0], [3.0]])
    report = svm.loocv(X, ["a", "a", "b"], energy_fraction=None)
    failed = [f for f in report["folds"] if f["status"] == "failed"]
    assert len(failed) == 1 and failed[0]["index"] == 2
    assert report["failed_folds"] == 1


def test_model_file_round_trip(tmp_path):
    model = svm.LinearSvmModel(np.array([1.5, -2.0]), 0.25, 10.0,
                               paths=("j1=0", "j1=1"), classes=("a", "b"))
    svm.save_model(model, tmp_path / "m.epsv")
    got = svm.load_model(tmp_path / "m.epsv")
    assert (tmp_path / "m.epsv").read_bytes()[:4] == b"EPSV"
    assert np.array_equal(got.weights, model.weights)
    assert (got.bias, got.C, got.paths, got.classes) == (0.25, 10.0, model.paths, model.classes)
