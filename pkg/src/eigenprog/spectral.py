"""
Triad operators, the Tonnetz Laplacian and their eigenbases.

Vertices of the Tonnetz are pairs ``(p, q)`` with pitch class ``p`` in Z_12
and quality ``q`` in Z_2 (0 = minor, 1 = major). Flattened 24-vectors use the
index ``2 * p + q`` so that a ``(12, 2)`` array reshapes to the vertex order.

"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

#: Semitone offsets of the minor (q=0) and major (q=1) triads.
TRIAD_INTERVALS = {0: (0, 3, 7), 1: (0, 4, 7)}
#: Size of the third above the root, per quality.
THIRDS = {0: 3, 1: 4}
#: Eigentriad frequencies, in tensor index order.
BETA1_VALUES = (-1, 0, 1)

N_PITCH_CLASSES = 12
N_VERTICES = 24
GROUPING_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """Raised when the Jacobi solver hits its sweep cap."""

    def __init__(self, message, residual):
        super().__init__("%s (off-diagonal residual %.3e)" % (message, residual))
        self.residual = residual


class EigenResidualError(ValueError):
    """Raised when a basis vector fails the eigen-equation check."""


# ---------------------------------------------------------------------------
# symmetric eigensolver
# ---------------------------------------------------------------------------

def symmetric_eigendecomposition(matrix, tol=1e-10, max_sweeps=100):
    """
    Diagonalize a real symmetric matrix with cyclic Jacobi rotations.

    Parameters
    ----------
    matrix : numpy array, shape (n, n)
        Real symmetric matrix.
    tol : float, optional
        Symmetry tolerance on input and residual bound on output.
    max_sweeps : int, optional
        Iteration cap, counted in full sweeps over the upper triangle.

    Returns
    -------
    eigenvalues : numpy array, shape (n,)
        Ascending eigenvalues.
    eigenvectors : numpy array, shape (n, n)
        Orthonormal eigenvectors as columns. Each column is signed so that its
        largest-magnitude entry (first one on ties) is positive.

    Notes
    -----
    Rotations below a threshold are skipped during the first three sweeps,
    which keeps the sweep order fixed and the output bit-reproducible.

    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square, got shape %s" % (a.shape,))
    if not np.allclose(a, a.T, rtol=0.0, atol=tol):
        raise ValueError("matrix is not symmetric within %g" % tol)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    eps = np.finfo(float).eps

    def off_norm():
        return np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)

    for sweep in range(max_sweeps):
        off = off_norm()
        if off <= eps * scale:
            break
        threshold = 0.2 * off / n ** 2 if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= eps * 1e-2 * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                if abs(apq) <= threshold:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = off_norm()
        if off > eps * scale:
            raise ConvergenceError("Jacobi did not converge in %d sweeps"
                                   % max_sweeps, off)

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    v = v[:, order]
    for k in range(n):
        if v[np.argmax(np.abs(v[:, k])), k] < 0:
            v[:, k] = -v[:, k]
    residual = np.linalg.norm(matrix @ v - v * eigenvalues, axis=0)
    if residual.size and residual.max() > tol * max(1.0, scale):
        raise ConvergenceError("eigen-residual above tolerance",
                               float(residual.max()))
    return eigenvalues, v


def group_eigenvalues(eigenvalues, tol=GROUPING_TOL, weights=None):
    """Cluster eigenvalues; returns ascending (value, multiplicity) pairs."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if weights is None:
        weights = np.ones(len(eigenvalues), dtype=int)
    order = np.argsort(eigenvalues, kind="stable")
    groups = []
    for k in order:
        lam = eigenvalues[k]
        if groups and abs(lam - groups[-1][0]) <= tol:
            groups[-1][1] += int(weights[k])
        else:
            groups.append([float(lam), int(weights[k])])
    return [(lam, mult) for lam, mult in groups]


# ---------------------------------------------------------------------------
# triads
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriadOperator:
    """Laplacian-type operator of a triad graph, restricted to its support."""
    quality: int
    intervals: tuple
    matrix: np.ndarray = field(repr=False)

    def embedded(self, n_pitches):
        """The operator as an ``n_pitches`` square matrix, zero off-support."""
        full = np.zeros((n_pitches, n_pitches))
        idx = np.array(self.intervals) % n_pitches
        full[np.ix_(idx, idx)] = self.matrix
        return full


def triad_operator(quality):
    """
    Operator of the complete graph on the triad ``TRIAD_INTERVALS[quality]``.

    Every on-support entry is ``|I_q| = 3`` minus the adjacency, so the
    diagonal is 3 and off-diagonal entries are 2.

    """
    if quality not in TRIAD_INTERVALS:
        raise ValueError("quality must be 0 (minor) or 1 (major)")
    intervals = TRIAD_INTERVALS[quality]
    size = len(intervals)
    adjacency = np.ones((size, size)) - np.eye(size)
    matrix = size * np.ones((size, size)) - adjacency
    return TriadOperator(quality, intervals, matrix)


@dataclass(frozen=True)
class Eigentriad:
    beta1: int
    quality: int
    values: np.ndarray = field(repr=False)


def eigentriad(beta1, quality, n_pitches=12):
    """
    Complex pitch signal with 3-point DFT phases on the triad's pitches.

    The n-th note of the triad (n = 1, 2, 3) carries ``exp(2i pi beta1 n / 3)``.

    """
    if beta1 not in BETA1_VALUES:
        raise ValueError("beta1 must be -1, 0 or +1")
    if quality not in TRIAD_INTERVALS:
        raise ValueError("quality must be 0 (minor) or 1 (major)")
    if n_pitches < N_PITCH_CLASSES:
        raise ValueError("need at least 12 pitches")
    values = np.zeros(n_pitches, dtype=complex)
    for n, offset in enumerate(TRIAD_INTERVALS[quality], start=1):
        values[offset] = np.exp(2j * np.pi * beta1 * n / 3)
    return Eigentriad(beta1, quality, values)


# ---------------------------------------------------------------------------
# Tonnetz
# ---------------------------------------------------------------------------

def vertex_index(p, q):
    return 2 * (p % N_PITCH_CLASSES) + (q % 2)


@dataclass(frozen=True)
class TonnetzLaplacian:
    """Unnormalized Laplacian ``3 I - A`` of the 24-vertex Tonnetz."""
    matrix: np.ndarray = field(repr=False)
    thirds: dict = field(default_factory=lambda: dict(THIRDS))

    @property
    def adjacency(self):
        return np.diag(np.diag(self.matrix)) - self.matrix

    def neighbors(self, p, q):
        row = self.adjacency[vertex_index(p, q)]
        return sorted((k // 2, k % 2) for k in np.flatnonzero(row))


def _major_row_neighbors(p):
    # Evaluates the three adjacency terms for a major vertex (p, 1): the
    # quality test keeps only minor partners p', the third-related terms
    # are congruences mod 12.
    found = []
    for pp in range(N_PITCH_CLASSES):
        diff = (p - pp) % N_PITCH_CLASSES
        terms = int((-diff) % N_PITCH_CLASSES == THIRDS[1])
        terms += int(diff == THIRDS[0])
        terms += int(diff == 0)
        if terms:
            found.append((pp, terms))
    return found


def tonnetz_laplacian():
    """
    Build the Tonnetz Laplacian.

    Major triad ``(p, 1)`` is joined to the minor triads on roots ``p``
    (parallel), ``p + 4`` (leading-tone) and ``p + 9`` (relative); edges are
    undirected, so each minor vertex receives the mirror edges.

    """
    adjacency = np.zeros((N_VERTICES, N_VERTICES))
    for p in range(N_PITCH_CLASSES):
        for pp, weight in _major_row_neighbors(p):
            i, j = vertex_index(p, 1), vertex_index(pp, 0)
            adjacency[i, j] = adjacency[j, i] = weight
    degree = adjacency.sum(axis=1)
    return TonnetzLaplacian(np.diag(degree) - adjacency)


# ---------------------------------------------------------------------------
# eigenprogressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProgWavelet:
    """
    One eigenprogression: ``values[p, q] = v_re[p, q] + 1j * v_im[p, q]``.

    ``omega`` is the pitch-class Fourier frequency the wavelet oscillates at
    (0..6); for 0 and 6 the wavelet is real.
    """
    beta2: int
    eigenvalue: float
    omega: int
    values: np.ndarray = field(repr=False)

    @property
    def is_real(self):
        return not np.any(self.values.imag)


@dataclass(frozen=True)
class EigenprogressionBasis:
    wavelets: tuple
    spectrum: tuple = ()

    def __len__(self):
        return len(self.wavelets)

    def __iter__(self):
        return iter(self.wavelets)

    def __getitem__(self, item):
        return self.wavelets[item]

    @property
    def eigenvalues(self):
        return np.array([w.eigenvalue for w in self.wavelets])

    def rebased(self, index, phase=0.0, conjugate=False):
        """
        Copy with wavelet ``index`` replaced by ``exp(1j*phase) * psi``, or by
        its complex conjugate first when ``conjugate`` is set. This is the
        set of orthonormal re-bases of a two-dimensional eigensubspace.
        """
        old = self.wavelets[index]
        values = np.conj(old.values) if conjugate else old.values
        new = replace(old, values=np.exp(1j * phase) * values)
        wavelets = list(self.wavelets)
        wavelets[index] = new
        return replace(self, wavelets=tuple(wavelets))

    def subset(self, indices):
        return replace(self, wavelets=tuple(self.wavelets[i] for i in indices))

    def to_csv(self):
        """Debug dump: one row per (beta2, lambda, omega, p, q, re, im)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["beta2", "lambda", "omega", "p", "q", "re", "im"])
        for w in self.wavelets:
            for p in range(N_PITCH_CLASSES):
                for q in range(2):
                    z = w.values[p, q]
                    writer.writerow([w.beta2, repr(w.eigenvalue), w.omega, p, q,
                                     repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()


def _hermitian_2x2(block):
    """Ascending eigenpairs of a 2x2 Hermitian matrix, closed form."""
    a = block[0, 0].real
    d = block[1, 1].real
    b = block[0, 1]
    if abs(b) <= 1e-14 * max(1.0, abs(a), abs(d)):
        diag = [(a, np.array([1.0, 0.0], dtype=complex)),
                (d, np.array([0.0, 1.0], dtype=complex))]
        return sorted(diag, key=lambda pair: pair[0])
    mean = 0.5 * (a + d)
    radius = np.hypot(0.5 * (a - d), abs(b))
    pairs = []
    for lam in (mean - radius, mean + radius):
        # first row of (B - lam I) u = 0
        u = np.array([b, lam - a], dtype=complex)
        u = u / np.linalg.norm(u)
        # canonical phase: first non-negligible entry real positive
        lead = u[0] if abs(u[0]) > 1e-12 else u[1]
        u = u * np.conj(lead) / abs(lead)
        pairs.append((float(lam), u))
    return pairs


def eigenprogression_basis(laplacian=None, tol=1e-10):
    """
    Canonical eigenprogression wavelets of the Tonnetz Laplacian.

    The Laplacian commutes with transposition ``p -> p + 1``, so it is
    block-diagonalized by pitch-class Fourier modes: for each frequency
    omega the 2x2 quality block is diagonalized, giving eigenvectors
    ``exp(2i pi omega p / 12) * u[q]``. Frequencies omega and 12 - omega
    span the same real eigensubspace and are merged into one complex wavelet
    whose real and imaginary parts are orthonormal; omega = 0 and omega = 6
    give real wavelets.

    Parameters
    ----------
    laplacian : TonnetzLaplacian, optional
        Defaults to :func:`tonnetz_laplacian`.
    tol : float, optional
        Bound on ``||L v - lambda v||`` for real and imaginary parts.

    Returns
    -------
    EigenprogressionBasis
        Wavelets sorted by (eigenvalue, omega), ``beta2`` numbered from 0.

    Raises
    ------
    EigenResidualError
        If any wavelet part fails the residual bound, e.g. when the matrix is
        not transposition invariant.

    """
    if laplacian is None:
        laplacian = tonnetz_laplacian()
    mat = np.asarray(laplacian.matrix, dtype=float)
    lap4 = mat.reshape(N_PITCH_CLASSES, 2, N_PITCH_CLASSES, 2)
    p = np.arange(N_PITCH_CLASSES)

    raw = []
    for omega in range(N_PITCH_CLASSES // 2 + 1):
        mode = np.exp(2j * np.pi * omega * p / N_PITCH_CLASSES)
        block = np.einsum("i,iajb,j->ab", np.conj(mode), lap4, mode) / N_PITCH_CLASSES
        block = 0.5 * (block + np.conj(block.T))
        for lam, u in _hermitian_2x2(block):
            v = mode[:, None] * u[None, :]
            if omega in (0, N_PITCH_CLASSES // 2):
                values = v.real / np.linalg.norm(v.real)
                parts = [values]
            else:
                re, im = v.real, v.imag
                scale = np.linalg.norm(re)
                values = v / scale
                parts = [re / scale, im / np.linalg.norm(im)]
            for part in parts:
                res = np.linalg.norm(mat @ part.ravel() - lam * part.ravel())
                if res > tol:
                    raise EigenResidualError(
                        "eigenprogression omega=%d lambda=%.6f has residual %.3e"
                        % (omega, lam, res))
            raw.append((lam, omega, values, len(parts)))

    groups = group_eigenvalues([r[0] for r in raw], weights=[r[3] for r in raw])
    reps = [g[0] for g in groups]

    def group_of(lam):
        return int(np.argmin([abs(lam - r) for r in reps]))

    raw.sort(key=lambda r: (group_of(r[0]), r[1]))
    wavelets = tuple(ProgWavelet(k, lam, omega, values)
                     for k, (lam, omega, values, _) in enumerate(raw))
    return EigenprogressionBasis(wavelets, tuple(groups))


def fourier_structure(values, tol=1e-10):
    """
    Decompose a 12x2 wavelet as ``exp(2i pi omega p / 12) * u[q]``.

    Returns ``(omega, u)`` with omega in Z_12, or None when the wavelet is not
    a single pitch-class Fourier mode.

    """
    values = np.asarray(values, dtype=complex)
    u = values[0].copy()
    if not np.any(np.abs(u) > tol):
        return None
    p = np.arange(N_PITCH_CLASSES)
    scale = max(np.abs(values).max(), 1.0)
    for omega in range(N_PITCH_CLASSES):
        mode = np.exp(2j * np.pi * omega * p / N_PITCH_CLASSES)
        if np.abs(values - mode[:, None] * u[None, :]).max() <= tol * scale:
            return omega, u
    return None
