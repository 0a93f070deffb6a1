"""
Linear soft-margin SVM (hinge loss) trained by dual coordinate descent, and
leave-one-out cross-validation around feature shrinkage and standardization.

The bias is learned as the weight of an appended constant feature equal to
1, so it is regularized together with the weights.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .features import fit_stats, shrink_select

MODEL_MAGIC = b"EPSV"
MODEL_VERSION = 1
DEFAULT_C = 1e4


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    C: float = DEFAULT_C
    iterations: int = 0
    max_violation: float = 0.0
    converged: bool = True
    dual_history: tuple = field(default=(), repr=False)
    dual: np.ndarray | None = field(default=None, repr=False)
    paths: tuple = ()
    classes: tuple = ()

    @property
    def dim(self):
        return self.weights.shape[0]


def encode_labels(labels):
    """Map two class names to -1/+1 (lexicographically smaller is -1)."""
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise TrainingError("exactly two classes required, found %d" % len(classes))
    y = np.array([1.0 if label == classes[1] else -1.0 for label in labels])
    return y, tuple(classes)


def dual_objective(alpha, w):
    return float(alpha.sum() - 0.5 * w @ w)


def train(X, y, C=DEFAULT_C, tol=1e-4, max_iter=10000, debug=False):
    """
    Solve ``min 1/2 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)`` in the dual.

    Coordinates are swept in index order; each update maximizes the dual
    exactly along one coordinate, clipped to ``[0, C]``. Training stops once
    every projected gradient is below ``tol`` at the current iterate, or
    after ``max_iter`` epochs.

    Parameters
    ----------
    X : array, shape (n, d)
    y : array of -1/+1, shape (n,)

    Returns
    -------
    LinearSvmModel

    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise TrainingError("X must be n x d with one label per row")
    if not np.all(np.isfinite(X)):
        raise TrainingError("features contain NaN or infinite values")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise TrainingError("labels must be -1 or +1")
    if len(np.unique(y)) != 2:
        raise TrainingError("both classes must be present")
    if C <= 0:
        raise TrainingError("C must be positive")
    n = X.shape[0]
    Z = np.hstack([X, np.ones((n, 1))])
    qdiag = np.einsum("ij,ij->i", Z, Z)
    alpha = np.zeros(n)
    w = np.zeros(Z.shape[1])
    history = [0.0]
    violation = np.inf
    converged = False
    epoch = 0
    for epoch in range(1, max_iter + 1):
        sweep_max = 0.0
        for i in range(n):
            g = y[i] * (w @ Z[i]) - 1.0
            a = alpha[i]
            pg = min(g, 0.0) if a <= 0.0 else (max(g, 0.0) if a >= C else g)
            sweep_max = max(sweep_max, abs(pg))
            if pg != 0.0:
                new = min(max(a - g / qdiag[i], 0.0), C)
                w += (new - a) * y[i] * Z[i]
                alpha[i] = new
        history.append(dual_objective(alpha, w))
        if debug and history[-1] < history[-2] - 1e-9 * max(1.0, abs(history[-2])):
            raise AssertionError("dual objective decreased at epoch %d" % epoch)
        if sweep_max < tol:
            violation = float(np.max(np.abs(_projected_gradient(Z, y, alpha, w, C))))
            if violation < tol:
                converged = True
                break
    else:
        violation = float(np.max(np.abs(_projected_gradient(Z, y, alpha, w, C))))
    return LinearSvmModel(weights=w[:-1].copy(), bias=float(w[-1]), C=float(C),
                          iterations=epoch, max_violation=violation,
                          converged=converged, dual_history=tuple(history),
                          dual=alpha)


def _projected_gradient(Z, y, alpha, w, C):
    g = y * (Z @ w) - 1.0
    return np.where(alpha <= 0, np.minimum(g, 0.0),
                    np.where(alpha >= C, np.maximum(g, 0.0), g))


def decision(model, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.dim:
        raise ValueError("feature dimension %d, model expects %d"
                         % (X.shape[-1], model.dim))
    return X @ model.weights + model.bias


def predict(model, x):
    """``(label, margin)`` with label +1 when ``w.x + b >= 0`` else -1."""
    margin = float(decision(model, np.asarray(x, dtype=float).ravel()))
    return (1 if margin >= 0 else -1), margin


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

def _prepare(train_rows, energy_fraction):
    if energy_fraction is None:
        keep = np.arange(train_rows.shape[1])
    else:
        keep = shrink_select(train_rows, energy_fraction)
    mean, std = fit_stats(train_rows[:, keep])
    return keep, mean, std


def _fold(args):
    index, values, y, C, energy_fraction, tol, max_iter, prepared = args
    train_idx = np.delete(np.arange(len(y)), index)
    try:
        if prepared is None:
            keep, mean, std = _prepare(values[train_idx], energy_fraction)
        else:
            keep, mean, std = prepared
        if keep.size == 0:
            raise TrainingError("no feature selected")
        Xs = (values[:, keep] - mean) / std
        model = train(Xs[train_idx], y[train_idx], C=C, tol=tol, max_iter=max_iter)
        label, margin = predict(model, Xs[index])
        return {"index": index, "predicted": label, "margin": margin,
                "selected_dim": int(keep.size), "iterations": model.iterations,
                "converged": model.converged, "status": "ok"}
    except (TrainingError, ValueError) as exc:
        return {"index": index, "predicted": None, "margin": None,
                "selected_dim": None, "status": "failed", "error": str(exc)}


def loocv(X, labels=None, C=DEFAULT_C, energy_fraction=0.5, paper_parity=False,
          tol=1e-4, max_iter=10000, workers=1):
    """
    Leave-one-out cross-validation.

    By default shrinkage and standardization are fit on each fold's
    training rows only; ``paper_parity`` fits them once on all rows.
    ``energy_fraction=None`` disables shrinkage. Failed folds count as
    errors and are reported.

    Returns
    -------
    dict
        JSON-ready report.

    """
    values = np.asarray(getattr(X, "values", X), dtype=float)
    labels = list(getattr(X, "labels", labels) if labels is None else labels)
    n = values.shape[0]
    if n < 3:
        raise TrainingError("leave-one-out needs at least three examples")
    y, classes = encode_labels(labels)
    prepared = _prepare(values, energy_fraction) if paper_parity else None
    jobs = [(i, values, y, C, energy_fraction, tol, max_iter, prepared)
            for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            folds = list(pool.map(_fold, jobs))
    else:
        folds = [_fold(job) for job in jobs]
    correct = 0
    for fold in folds:
        truth = labels[fold["index"]]
        fold["true"] = truth
        if fold["predicted"] is not None:
            fold["predicted"] = classes[1] if fold["predicted"] == 1 else classes[0]
            correct += fold["predicted"] == truth
    return {
        "accuracy": correct / n,
        "n": n,
        "dimension": int(values.shape[1]),
        "classes": list(classes),
        "C": C,
        "energy_fraction": energy_fraction,
        "mode": "paper-parity" if paper_parity else "per-fold",
        "failed_folds": sum(f["status"] != "ok" for f in folds),
        "folds": folds,
    }


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# model file
# ---------------------------------------------------------------------------

def save_model(model, path):
    paths = [p.encode("utf-8") for p in model.paths]
    classes = [c.encode("utf-8") for c in model.classes]
    out = bytearray(MODEL_MAGIC)
    out += struct.pack("<IIdd", MODEL_VERSION, model.dim, model.C, model.bias)
    out += model.weights.astype("<f8").tobytes()
    out += struct.pack("<I", len(paths))
    for raw in paths:
        out += struct.pack("<I", len(raw)) + raw
    out += struct.pack("<I", len(classes))
    for raw in classes:
        out += struct.pack("<I", len(raw)) + raw
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def load_model(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError("%s: not a model file" % path)
    version, dim, C, bias = struct.unpack_from("<IIdd", raw, 4)
    if version != MODEL_VERSION:
        raise ValueError("%s: unsupported model version %d" % (path, version))
    pos = 4 + struct.calcsize("<IIdd")
    weights = np.frombuffer(raw, dtype="<f8", count=dim, offset=pos).astype(float)
    pos += 8 * dim
    tables = []
    for _ in range(2):
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        items = []
        for _ in range(count):
            (length,) = struct.unpack_from("<I", raw, pos)
            items.append(raw[pos + 4:pos + 4 + length].decode("utf-8"))
            pos += 4 + length
        tables.append(tuple(items))
    return LinearSvmModel(weights, bias, C, paths=tables[0], classes=tables[1])
