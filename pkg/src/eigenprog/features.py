"""
Dataset-level feature matrices: ablation by marginal sums, standardization,
energy-based shrinkage, and the EPFM binary format.
"""

from __future__ import annotations

import csv
import io
import struct
import warnings
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .scattering import format_sign, parse_path

LEVELS = ("a1", "a1b1", "a1b1a2", "a1b1a2b2", "full")
MATRIX_MAGIC = b"EPFM"
MATRIX_VERSION = 1
_PATH_KEYS = ("j1", "b1", "j2", "b2", "g2")


class FeatureFileError(ValueError):
    pass


class ChecksumError(FeatureFileError):
    pass


class VersionError(FeatureFileError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    """
    ``values`` is n x d; ``stats`` is ``(mean, std)`` over the d columns when
    the values have been standardized; ``mask`` lists kept column indices.
    """
    values: np.ndarray = field(repr=False)
    paths: tuple
    labels: tuple
    stats: tuple | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("feature values must be an n x d matrix")
        n, d = values.shape
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.paths) != d:
            raise ValueError("%d paths for %d columns" % (len(self.paths), d))
        if len(self.labels) != n:
            raise ValueError("%d labels for %d rows" % (len(self.labels), n))
        if self.stats is not None:
            mean, std = (np.asarray(s, dtype=float) for s in self.stats)
            if mean.shape != (d,) or std.shape != (d,):
                raise ValueError("stats must hold one mean and std per column")
            object.__setattr__(self, "stats", (mean, std))
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=np.int64)
            if mask.ndim != 1 or np.any(np.diff(mask) <= 0) or (
                    mask.size and (mask[0] < 0 or mask[-1] >= d)):
                raise ValueError("mask must be strictly increasing within [0, d)")
            object.__setattr__(self, "mask", mask)

    @property
    def shape(self):
        return self.values.shape

    def selected(self):
        """Kept columns only (the matrix itself when no mask is set)."""
        if self.mask is None:
            return self
        stats = None
        if self.stats is not None:
            stats = (self.stats[0][self.mask], self.stats[1][self.mask])
        return FeatureMatrix(self.values[:, self.mask],
                             [self.paths[i] for i in self.mask], self.labels, stats)

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        stats_equal = (self.stats is None and other.stats is None) or (
            self.stats is not None and other.stats is not None
            and all(same(a, b) for a, b in zip(self.stats, other.stats)))
        return (self.paths == other.paths and self.labels == other.labels
                and same(self.values, other.values) and stats_equal
                and same(self.mask, other.mask))


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

def path_key(parts):
    """``(j1, b1, ...)`` prefix to its ``j1=../b1=..`` string."""
    out = []
    for name, v in zip(_PATH_KEYS, parts):
        out.append("%s=%s" % (name, format_sign(v) if name in ("b1", "g2") else v))
    return "/".join(out)


def _marginalize(paths, values, keep):
    # sums columns sharing their first ``keep`` path entries, first-seen order
    keys, index = [], {}
    for p in paths:
        k = tuple(p[:keep])
        if k not in index:
            index[k] = len(keys)
            keys.append(k)
    out = np.zeros((values.shape[0], len(keys)))
    for col, p in enumerate(paths):
        out[:, index[tuple(p[:keep])]] += values[:, col]
    return [path_key(k) for k in keys], out


def assemble(s1_rows, s2_rows, labels, level="full", s1_paths=None, s2_paths=None):
    """
    Stack per-piece coefficients into a feature matrix at one ablation level.

    Parameters
    ----------
    s1_rows : sequence of arrays of shape (J1, 3), or None
        First-order coefficients; needed by levels ``a1`` and ``a1b1``.
    s2_rows : sequence of 1-d arrays, or None
        Second-order coefficients in ``s2_paths`` order; needed otherwise.
    labels : sequence of str
    level : {'a1', 'a1b1', 'a1b1a2', 'a1b1a2b2', 'full'}
        ``a1b1`` is S1 and ``full`` is S2; the others sum the excluded
        trailing path variables out.
    s1_paths, s2_paths : optional path tuples (default: S1 in (j1, b1) order)

    """
    if level not in LEVELS:
        raise ValueError("unknown level %r; expected one of %s" % (level, LEVELS))
    if level in ("a1", "a1b1"):
        values = np.array([np.asarray(r, dtype=float).ravel() for r in s1_rows])
        if s1_paths is None:
            j1s = np.asarray(s1_rows[0]).shape[0]
            s1_paths = [(j, b) for j in range(j1s) for b in (-1, 0, 1)]
        keep = 1 if level == "a1" else 2
    else:
        values = np.array([np.asarray(r, dtype=float) for r in s2_rows])
        s1_paths = s2_paths
        keep = {"a1b1a2": 3, "a1b1a2b2": 4, "full": 5}[level]
    values = values.reshape(len(labels), -1)
    paths, out = _marginalize(list(s1_paths), values, keep)
    return FeatureMatrix(out, paths, labels)


def read_coefficients(text):
    """Parse a ``path,value`` CSV into (paths, values)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["path", "value"]:
        raise FeatureFileError("coefficient file must start with header path,value")
    paths = [parse_path(r[0]) for r in rows[1:] if r]
    values = np.array([float(r[1]) for r in rows[1:] if r])
    return tuple(paths), values


def write_coefficients(paths, values):
    lines = ["path,value"]
    for p, v in zip(paths, values):
        lines.append("%s,%r" % (path_key(p), float(v)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# standardization and shrinkage
# ---------------------------------------------------------------------------

def fit_stats(values):
    """Column mean and population std; near-constant columns get std 1."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        raise ValueError("standardization needs at least two rows")
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    flat = std <= 1e-12 * np.maximum(np.abs(mean), 1e-300)
    std = np.where(flat, 1.0, std)
    return mean, std


def standardize(X, stats=None):
    """
    Zero mean, unit population variance per column. With ``stats`` given
    (statistics of a training fold), those are applied instead of refit.
    """
    if stats is None:
        stats = fit_stats(X.values)
    mean, std = (np.asarray(s, dtype=float) for s in stats)
    return replace(X, values=(X.values - mean) / std, stats=(mean, std))


def column_energy(values):
    values = np.asarray(values, dtype=float)
    return np.mean(values * values, axis=0)


def shrink_select(X, energy_fraction=0.5):
    """
    Indices of the highest-energy columns, sorted ascending.

    Columns are ranked by mean squared value (ties by ascending index) and
    the shortest prefix reaching ``energy_fraction`` of the total energy is
    kept. Fraction 1 keeps every column of non-zero energy.

    Raises
    ------
    ValueError
        If ``X`` is already standardized: every column would have unit
        energy and the ranking would carry no information.

    """
    if isinstance(X, FeatureMatrix):
        if X.stats is not None:
            raise ValueError("shrinkage must run on raw, unstandardized features")
        values = X.values
    else:
        values = np.asarray(X, dtype=float)
    if not 0 < energy_fraction <= 1:
        raise ValueError("energy_fraction must be in (0, 1]")
    energy = column_energy(values)
    if not np.any(energy > 0):
        warnings.warn("all-zero feature matrix: nothing selected", stacklevel=2)
        return np.zeros(0, dtype=np.int64)
    if energy_fraction >= 1:
        return np.flatnonzero(energy > 0).astype(np.int64)
    order = np.argsort(-energy, kind="stable")
    cumulative = np.cumsum(energy[order])
    count = int(np.searchsorted(cumulative, energy_fraction * cumulative[-1],
                                side="left")) + 1
    return np.sort(order[:count]).astype(np.int64)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _pack_strings(items):
    out = bytearray()
    for s in items:
        raw = s.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
    return bytes(out)


def _unpack_strings(raw, pos, count):
    items = []
    for _ in range(count):
        (length,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        items.append(raw[pos:pos + length].decode("utf-8"))
        pos += length
    return items, pos


def dumps(X):
    n, d = X.shape
    body = bytearray(MATRIX_MAGIC + struct.pack("<III", MATRIX_VERSION, n, d))
    body += _pack_strings(X.paths) + _pack_strings(X.labels)
    body += np.ascontiguousarray(X.values, dtype="<f8").tobytes()
    flags = (1 if X.stats is not None else 0) | (2 if X.mask is not None else 0)
    body += struct.pack("<B", flags)
    if X.stats is not None:
        body += X.stats[0].astype("<f8").tobytes() + X.stats[1].astype("<f8").tobytes()
    if X.mask is not None:
        body += struct.pack("<I", X.mask.size) + X.mask.astype("<u4").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    return bytes(body)


def loads(raw):
    if raw[:4] != MATRIX_MAGIC:
        raise FeatureFileError("not a feature-matrix file")
    if len(raw) < 8:
        raise ChecksumError("feature-matrix file truncated")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != MATRIX_VERSION:
        raise VersionError("feature-matrix version %d, reader expects %d"
                           % (version, MATRIX_VERSION))
    if len(raw) < 20 or zlib.crc32(raw[:-4]) != struct.unpack("<I", raw[-4:])[0]:
        raise ChecksumError("feature-matrix checksum mismatch (corrupt or truncated)")
    n, d = struct.unpack_from("<II", raw, 8)
    paths, pos = _unpack_strings(raw, 16, d)
    labels, pos = _unpack_strings(raw, pos, n)
    values = np.frombuffer(raw, dtype="<f8", count=n * d, offset=pos).reshape(n, d)
    pos += 8 * n * d
    flags = raw[pos]
    pos += 1
    stats = mask = None
    if flags & 1:
        mean = np.frombuffer(raw, dtype="<f8", count=d, offset=pos)
        std = np.frombuffer(raw, dtype="<f8", count=d, offset=pos + 8 * d)
        stats = (mean.astype(float), std.astype(float))
        pos += 16 * d
    if flags & 2:
        (m,) = struct.unpack_from("<I", raw, pos)
        mask = np.frombuffer(raw, dtype="<u4", count=m, offset=pos + 4).astype(np.int64)
    return FeatureMatrix(values.astype(float), paths, labels, stats, mask)


def save(X, path):
    with open(path, "wb") as fh:
        fh.write(dumps(X))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
