"""Embedded property checks run by ``eigenprog selftest``."""

from __future__ import annotations

import time
import warnings

import numpy as np

from . import fft as native_fft
from .filterbank import FilterbankConfig
from .pianoroll import NoteEvent, parse_midi, write_midi
from .scattering import ProgPlan, Transformer, s1, scatter_s2, symmetry, u1
from .spectral import (EigenResidualError, TonnetzLaplacian,
                       eigenprogression_basis, symmetric_eigendecomposition,
                       tonnetz_laplacian, triad_operator)
from .svm import train


def _laplacian(corrupt=False):
    lap = tonnetz_laplacian()
    if not corrupt:
        return lap
    matrix = lap.matrix.copy()
    # symmetric but no longer transposition invariant
    matrix[0, 3] += 0.5
    matrix[3, 0] += 0.5
    return TonnetzLaplacian(matrix)


def check_convolution():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 6))
    h = rng.standard_normal((8, 6)) + 1j * rng.standard_normal((8, 6))
    direct = np.zeros((8, 6), dtype=complex)
    for t in range(8):
        for p in range(6):
            for tt in range(8):
                for pp in range(6):
                    direct[t, p] += x[tt, pp] * h[(t - tt) % 8, (p - pp) % 6]
    err = np.abs(native_fft.cyclic_convolve(x, h) - direct).max()
    return err < 1e-9, "max error %.2e" % err


def check_fft():
    rng = np.random.default_rng(2)
    worst = 0.0
    for n in (1, 2, 12, 64, 132):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst = max(worst, np.abs(native_fft.fft(v) - np.fft.fft(v)).max())
    return worst < 1e-9, "max error %.2e" % worst


def check_triad_spectrum():
    worst = 0.0
    for q in (0, 1):
        vals, _ = symmetric_eigendecomposition(triad_operator(q).matrix)
        worst = max(worst, np.abs(vals - [1.0, 1.0, 7.0]).max())
    return worst < 1e-10, "max deviation %.2e" % worst


def check_tonnetz(corrupt=False):
    lap = _laplacian(corrupt)
    vals, vecs = symmetric_eigendecomposition(lap.matrix)
    try:
        basis = eigenprogression_basis(lap)
    except EigenResidualError as exc:
        return False, str(exc)
    worst = 0.0
    for w in basis:
        for part in (w.values.real, w.values.imag):
            if np.any(part):
                r = lap.matrix @ part.ravel() - w.eigenvalue * part.ravel()
                worst = max(worst, np.linalg.norm(r))
    ok = (worst < 1e-10 and abs(vals[0]) < 1e-10
          and abs(np.trace(lap.matrix) - 72) < 1e-12
          and np.allclose(np.sort(vals), np.sort(6 - vals), atol=1e-10))
    return ok, "max residual %.2e, %d wavelets" % (worst, len(basis))


def _small_transformer():
    config = FilterbankConfig(frames=32, pitches=24, pitch_pad=24,
                              j1_scales=3, j2_scales=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Transformer(config)


def check_invariance():
    tr = _small_transformer()
    rng = np.random.default_rng(3)
    x = (rng.random((32, 24)) < 0.2).astype(float)
    a1, a2 = tr(x)
    b1, b2 = tr(symmetry(symmetry(x, "shift", 5), "transpose", 7))
    e1 = np.abs(a1.data - b1.data).max() / np.abs(a1.data).max()
    e2 = np.abs(a2.values - b2.values).max() / np.abs(a2.values).max()
    return max(e1, e2) < 1e-9, "relative change S1 %.1e, S2 %.1e" % (e1, e2)


def check_inversion():
    tr = _small_transformer()
    rng = np.random.default_rng(4)
    x = (rng.random((32, 24)) < 0.2).astype(float)
    a = s1(u1(x, tr.fb1)).data
    b = s1(u1(symmetry(x, "invert"), tr.fb1)).data
    err = np.abs(b - a[:, ::-1]).max() / np.abs(a).max()
    return err < 1e-9, "relative error %.1e" % err


def check_fast_path():
    tr = _small_transformer()
    rng = np.random.default_rng(5)
    U1 = u1((rng.random((32, 24)) < 0.2).astype(float), tr.fb1)
    fast = scatter_s2(U1, tr.fb2, tr.plan).values
    slow = scatter_s2(U1, tr.fb2, ProgPlan(tr.fb2, method="generic")).values
    err = np.abs(fast - slow).max() / np.abs(slow).max()
    return err < 1e-9, "relative error %.1e" % err


def check_midi_roundtrip():
    notes = [NoteEvent(0, 60, 480, 90), NoteEvent(240, 64, 0, 70),
             NoteEvent(480, 60, 960, 1)]
    ok = parse_midi(write_midi(notes)) == sorted(notes)
    return ok, "%d notes" % len(notes)


def check_svm():
    model = train([[-1.0], [1.0]], [-1.0, 1.0], C=1e4, tol=1e-10)
    err = max(abs(model.weights[0] - 1.0), abs(model.bias))
    return err < 1e-6, "w=%.6f b=%.2e" % (model.weights[0], model.bias)


CHECKS = [
    ("convolution oracle", check_convolution, True),
    ("fft vs numpy", check_fft, True),
    ("triad operator spectrum", check_triad_spectrum, True),
    ("tonnetz eigen-residuals", check_tonnetz, True),
    ("midi round trip", check_midi_roundtrip, True),
    ("svm two-point optimum", check_svm, True),
    ("shift/transpose invariance", check_invariance, False),
    ("inversion reflection", check_inversion, False),
    ("second-order fast path", check_fast_path, False),
]


def run(quick=False, corrupt_tonnetz=False, out=print):
    """Run the checks and print a table; returns True iff all pass."""
    results = []
    for name, fn, is_quick in CHECKS:
        if quick and not is_quick:
            continue
        start = time.perf_counter()
        try:
            if fn is check_tonnetz:
                ok, detail = fn(corrupt=corrupt_tonnetz)
            else:
                ok, detail = fn()
        except Exception as exc:  # a crash is a failure, reported like one
            ok, detail = False, "%s: %s" % (type(exc).__name__, exc)
        results.append((name, ok, detail, time.perf_counter() - start))
    width = max(len(r[0]) for r in results)
    for name, ok, detail, elapsed in results:
        out("%-*s  %s  %7.3fs  %s" % (width, name, "PASS" if ok else "FAIL",
                                       elapsed, detail))
    passed = sum(r[1] for r in results)
    out("%d/%d checks passed" % (passed, len(results)))
    return passed == len(results)
