"""
First- and second-order scattering of piano rolls.

``U1[t, p, q, j1, b1] = |x * Psi_triad(j1, b1, q)|`` and
``U2[t, p, q, j1, b1, j2, b2, g2] = |U1[..., j1, b1] * Psi_prog(j2, b2, g2)|``,
all convolutions circular on every axis. S1 and S2 sum those moduli over
time, pitch and quality, in that order.

Second-order responses exploit that each eigenprogression is a single
pitch-class Fourier mode, ``exp(2i pi omega p / 12) * u[q]``: convolving with
it amounts to demodulating the input by omega, convolving with the spiral
envelope, and mixing the two quality channels with ``u``. Wavelets without
that structure fall back to a full three-axis FFT convolution.

"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .filterbank import (FilterbankConfig, build_prog_filterbank,
                         build_triad_filterbank, tile_tonnetz)
from .kernels import mixed_modulus_colsum
from .spectral import (BETA1_VALUES, N_PITCH_CLASSES, eigenprogression_basis,
                       fourier_structure)

SYMMETRIES = ("shift", "transpose", "retrograde", "invert")


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

def format_sign(v):
    return "+1" if v == 1 else ("-1" if v == -1 else "0")


def parse_sign(text):
    value = int(text)
    if value not in (-1, 0, 1):
        raise ValueError("expected -1, 0 or +1, got %r" % text)
    return value


def format_path(path):
    """``(j1, b1[, j2, b2, g2])`` to its ``j1=../b1=..`` string form."""
    parts = ["j1=%d" % path[0], "b1=%s" % format_sign(path[1])]
    if len(path) > 2:
        parts += ["j2=%d" % path[2], "b2=%d" % path[3],
                  "g2=%s" % format_sign(path[4])]
    return "/".join(parts)


def parse_path(text):
    fields = dict(item.split("=", 1) for item in text.strip().split("/"))
    path = [int(fields["j1"]), parse_sign(fields["b1"])]
    if "j2" in fields:
        path += [int(fields["j2"]), int(fields["b2"]), parse_sign(fields["g2"])]
    return tuple(path)


@dataclass(frozen=True)
class ScatterTensor1:
    """U1 indexed ``[t, p, q, j1, b1]`` (b1 index order -1, 0, +1)."""
    data: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class S1Matrix:
    data: np.ndarray

    @property
    def paths(self):
        j1s, nb = self.data.shape
        return [(j1, BETA1_VALUES[b]) for j1 in range(j1s) for b in range(nb)]

    @property
    def values(self):
        return self.data.ravel()


@dataclass(frozen=True)
class ScatterTensor2:
    """
    U2 indexed ``[t, p, q, j1, b1, j2, b2, g2]``; ``valid[j1, j2]`` marks the
    scale pairs allowed by the coupling rule (other entries are zero).
    """
    data: np.ndarray = field(repr=False)
    valid: np.ndarray
    gamma2_set: tuple


@dataclass(frozen=True)
class S2Vector:
    paths: tuple
    values: np.ndarray
    omitted: tuple = ()

    def __len__(self):
        return len(self.paths)


# ---------------------------------------------------------------------------
# symmetry operators
# ---------------------------------------------------------------------------

def pad_pitch(x, pitch_pad):
    """Zero-fill the pitch axis of a ``(T, P)`` array up to ``pitch_pad``."""
    x = np.asarray(getattr(x, "data", x), dtype=float)
    if x.shape[1] > pitch_pad:
        raise ValueError("cannot pad %d pitches to %d" % (x.shape[1], pitch_pad))
    out = np.zeros((x.shape[0], pitch_pad))
    out[:, :x.shape[1]] = x
    return out


def symmetry(x, op, amount=0):
    """
    Apply a musical symmetry to a (padded) piano-roll array.

    ``shift`` moves time by ``amount`` frames and ``transpose`` moves pitch by
    ``amount`` bins, both circularly; ``retrograde`` maps t to -t and
    ``invert`` maps p to -p, modulo the axis length.
    """
    x = np.asarray(getattr(x, "data", x))
    if op == "shift":
        return np.roll(x, amount, axis=0)
    if op == "transpose":
        return np.roll(x, amount, axis=1)
    if op == "retrograde":
        return np.roll(x[::-1], 1, axis=0)
    if op == "invert":
        return np.roll(x[:, ::-1], 1, axis=1)
    raise ValueError("unknown symmetry %r; expected one of %s" % (op, SYMMETRIES))


# ---------------------------------------------------------------------------
# first order
# ---------------------------------------------------------------------------

def _as_padded(x, config):
    x = np.asarray(getattr(x, "data", x), dtype=float)
    if x.ndim != 2:
        raise ValueError("piano roll must be two-dimensional")
    if x.shape[0] != config.frames:
        raise ValueError("roll has %d frames, config expects %d"
                         % (x.shape[0], config.frames))
    if x.shape[1] == config.pitch_pad:
        return x
    if x.shape[1] == config.pitches:
        return pad_pitch(x, config.pitch_pad)
    raise ValueError("roll has %d pitches, config expects %d (padded %d)"
                     % (x.shape[1], config.pitches, config.pitch_pad))


def u1(x, fb):
    """
    Eigentriad transform of a piano roll.

    Parameters
    ----------
    x : PianoRoll or numpy array, shape (T, P) or (T, P')
        Unpadded rolls are zero-padded on the pitch axis first.
    fb : TriadFilterbank

    Returns
    -------
    ScatterTensor1

    """
    config = fb.config
    x = _as_padded(x, config)
    frames, pitches = x.shape
    spectrum = sfft.fft2(x)
    n_j1 = len(fb.temporal)
    out = np.empty((frames, pitches, 2, n_j1, len(BETA1_VALUES)), order="F")
    pitch_hat = {}
    for f in fb.filters:
        pitch_hat[(f.beta1, f.quality)] = sfft.fft(f.pitch)
    for gabor in fb.temporal:
        w = sfft.ifft(spectrum * sfft.fft(gabor.values)[:, None], axis=0)
        for b, beta1 in enumerate(BETA1_VALUES):
            for q in (0, 1):
                y = sfft.ifft(w * pitch_hat[(beta1, q)][None, :], axis=1)
                out[:, :, q, gabor.j, b] = np.abs(y)
    return ScatterTensor1(out)


def _sum_tpq(modulus):
    # fixed reduction order: t, then p, then q
    return modulus.sum(axis=0).sum(axis=0).sum(axis=0)


def s1(U1):
    """``S1[j1, b1] = sum over t, p, q of U1``."""
    data = U1.data if isinstance(U1, ScatterTensor1) else np.asarray(U1)
    return S1Matrix(_sum_tpq(data))


# ---------------------------------------------------------------------------
# second order
# ---------------------------------------------------------------------------

class ProgPlan:
    """
    Precomputed spectra for second-order convolutions with one filterbank.

    ``method='auto'`` uses the Fourier-mode factorization wherever a wavelet
    admits it; ``method='generic'`` forces full FFT convolutions throughout.
    """

    def __init__(self, fb2, method="auto"):
        if method not in ("auto", "generic"):
            raise ValueError("method must be 'auto' or 'generic'")
        self.fb2 = fb2
        self.pitches = fb2.pitches
        self.gammas = fb2.config.gamma2_set
        self.temporal_hat = [sfft.fft(g.values) for g in fb2.temporal]
        octave = np.arange(self.pitches) // N_PITCH_CLASSES
        self.spiral_hat = []
        for spiral in fb2.spirals:
            envelope = spiral.values[octave]
            if np.all(envelope == envelope[0]):
                self.spiral_hat.append(("const", envelope[0]))
            else:
                self.spiral_hat.append(("full", sfft.fft(envelope)))
        self.groups = {}
        self.generic = []
        for wavelet in fb2.basis:
            structure = None if method == "generic" else fourier_structure(wavelet.values)
            if structure is None:
                self.generic.append(wavelet.beta2)
            else:
                omega, u = structure
                self.groups.setdefault(omega, []).append((wavelet.beta2, u))
        self.generic_hat = {}
        for beta2 in self.generic:
            for gi, gamma in enumerate(self.gammas):
                h = fb2.pitch_filter(beta2, gamma)
                self.generic_hat[(beta2, gi)] = sfft.fft2(h.T)

    def responses(self, spectrum, j2):
        """
        Second-order responses of one U1 slice at scale ``j2``, in groups.

        ``spectrum`` is the (t, p) FFT of each quality channel, shape
        (2, T, P'). Yields ``(beta2s, gamma_index, z, mix)``: the complex
        response of wavelet ``beta2s[k // 2]`` in quality channel ``k % 2`` is
        ``mix[k, 0] * z[0] + mix[k, 1] * z[1]``. ``z`` has shape (2, T, P'),
        or (2, T, 1) when the response is constant along pitch. Responses
        match the circular convolution up to a unimodular factor depending on
        pitch only.
        """
        w = sfft.ifft(spectrum * self.temporal_hat[j2][None, :, None], axis=1)
        for omega, members in sorted(self.groups.items()):
            # demodulating the filter rather than the input moves the
            # pitch-only phase exp(2i pi omega p / 12) onto the output
            shift = omega * self.pitches // N_PITCH_CLASSES
            mix = np.empty((2 * len(members), 2), dtype=complex)
            for k, (_, u) in enumerate(members):
                mix[2 * k] = u[0], u[1]
                mix[2 * k + 1] = u[1], u[0]
            beta2s = [beta2 for beta2, _ in members]
            for gi, (kind, ghat) in enumerate(self.spiral_hat):
                if kind == "const":
                    z = ghat * w[:, :, shift:shift + 1]
                else:
                    z = sfft.ifft(w * np.roll(ghat, shift)[None, None, :], axis=2,
                                  overwrite_x=True)
                yield beta2s, gi, z, mix
        if self.generic:
            wq = np.stack((w[0] + w[1], w[0] - w[1]))
            for beta2 in self.generic:
                for gi in range(len(self.gammas)):
                    y = wq * self.generic_hat[(beta2, gi)][:, None, :]
                    y = sfft.ifft(sfft.ifft(y, axis=0), axis=2)
                    yield [beta2], gi, y, np.eye(2, dtype=complex)


def _slice_spectrum(data, j1, b1):
    slice_ = np.ascontiguousarray(data[:, :, :, j1, b1].transpose(2, 0, 1))
    return sfft.fft2(slice_, axes=(1, 2))


def u2(U1, fb2, plan=None):
    """
    Eigenprogression transform. Materializes the full rank-eight tensor, so
    it is meant for small configurations; use :func:`scatter_s2` otherwise.
    """
    data = U1.data if isinstance(U1, ScatterTensor1) else np.asarray(U1)
    plan = ProgPlan(fb2) if plan is None else plan
    frames, pitches, _, n_j1, n_b1 = data.shape
    if pitches != fb2.pitches:
        raise ValueError("U1 has %d pitches, filterbank expects %d"
                         % (pitches, fb2.pitches))
    n_j2 = len(fb2.temporal)
    n_b2 = len(fb2.basis)
    n_g = len(fb2.spirals)
    out = np.zeros((frames, pitches, 2, n_j1, n_b1, n_j2, n_b2, n_g), order="F")
    valid = np.zeros((n_j1, n_j2), dtype=bool)
    for j1 in range(n_j1):
        for j2 in fb2.j2_for(j1):
            valid[j1, j2] = True
    for j1 in range(n_j1):
        for b1 in range(n_b1):
            spectrum = _slice_spectrum(data, j1, b1)
            for j2 in fb2.j2_for(j1):
                for beta2s, gi, z, mix in plan.responses(spectrum, j2):
                    for k, row in enumerate(mix):
                        r = np.abs(row[0] * z[0] + row[1] * z[1])
                        out[:, :, k % 2, j1, b1, j2, beta2s[k // 2], gi] = r
    return ScatterTensor2(out, valid, fb2.config.gamma2_set)


def s2_paths(n_j1, fb2):
    paths, omitted = [], []
    for j1 in range(n_j1):
        j2s = fb2.j2_for(j1)
        for b1 in BETA1_VALUES:
            if not j2s:
                omitted.append((j1, b1))
            for j2 in j2s:
                for wavelet in fb2.basis:
                    for g in fb2.config.gamma2_set:
                        paths.append((j1, b1, j2, wavelet.beta2, g))
    return tuple(paths), tuple(omitted)


def s2(U2):
    """``S2[path] = sum over t, p, q of U2[..., path]`` for every valid path."""
    data = U2.data
    _, _, _, n_j1, n_b1, n_j2, n_b2, n_g = data.shape
    paths, values, omitted = [], [], []
    for j1 in range(n_j1):
        j2s = [j2 for j2 in range(n_j2) if U2.valid[j1, j2]]
        for b1 in range(n_b1):
            if not j2s:
                omitted.append((j1, BETA1_VALUES[b1]))
            for j2 in j2s:
                for b2 in range(n_b2):
                    for gi in range(n_g):
                        paths.append((j1, BETA1_VALUES[b1], j2, b2,
                                      U2.gamma2_set[gi]))
                        values.append(_sum_tpq(data[:, :, :, j1, b1, j2, b2, gi]))
    return S2Vector(tuple(paths), np.array(values, dtype=float), tuple(omitted))


def scatter_s2(U1, fb2, plan=None):
    """
    S2 computed slice by slice, without materializing U2.
    Path order matches :func:`s2`.
    """
    data = U1.data if isinstance(U1, ScatterTensor1) else np.asarray(U1)
    plan = ProgPlan(fb2) if plan is None else plan
    _, pitches, _, n_j1, n_b1 = data.shape
    if pitches != fb2.pitches:
        raise ValueError("U1 has %d pitches, filterbank expects %d"
                         % (pitches, fb2.pitches))
    paths, omitted = s2_paths(n_j1, fb2)
    n_b2, n_g = len(fb2.basis), len(fb2.spirals)
    values = []
    for j1 in range(n_j1):
        j2s = fb2.j2_for(j1)
        for b1 in range(n_b1):
            if not j2s:
                continue
            spectrum = _slice_spectrum(data, j1, b1)
            for j2 in j2s:
                block = np.zeros((n_b2, n_g))
                for beta2s, gi, z, mix in plan.responses(spectrum, j2):
                    per_p = mixed_modulus_colsum(z, mix)
                    if per_p.shape[1] == 1:
                        per_q = per_p[:, 0] * pitches
                    else:
                        per_q = per_p.sum(axis=1)
                    for k, beta2 in enumerate(beta2s):
                        block[beta2, gi] = per_q[2 * k] + per_q[2 * k + 1]
                values.append(block.ravel())
    values = np.concatenate(values) if values else np.zeros(0)
    return S2Vector(paths, values, omitted)


# ---------------------------------------------------------------------------
# full transform
# ---------------------------------------------------------------------------

class Transformer:
    """Filterbanks and plans for one configuration, reusable across pieces."""

    def __init__(self, config=None, basis=None, method="auto"):
        self.config = FilterbankConfig() if config is None else config
        self.basis = eigenprogression_basis() if basis is None else basis
        self.fb1 = build_triad_filterbank(self.config)
        self.fb2 = build_prog_filterbank(self.config, self.basis)
        self.plan = ProgPlan(self.fb2, method=method)

    def __call__(self, x):
        U1 = u1(x, self.fb1)
        return s1(U1), scatter_s2(U1, self.fb2, self.plan)

    def metadata(self):
        paths, omitted = s2_paths(self.config.j1_scales, self.fb2)
        return {
            "config": self.config.as_dict(),
            "s1_dim": self.config.j1_scales * len(BETA1_VALUES),
            "s2_dim": len(paths),
            "beta2_count": len(self.basis),
            "eigenvalues": [w.eigenvalue for w in self.basis],
            "omegas": [w.omega for w in self.basis],
            "omitted_slices": [list(s) for s in omitted],
        }


def transform(x, config=None, basis=None):
    """Convenience wrapper: ``(S1Matrix, S2Vector)`` of one piano roll."""
    return Transformer(config, basis)(x)


__all__ = [
    "ScatterTensor1", "S1Matrix", "ScatterTensor2", "S2Vector", "ProgPlan",
    "Transformer", "format_path", "parse_path", "pad_pitch", "symmetry",
    "u1", "s1", "u2", "s2", "scatter_s2", "s2_paths", "transform", "tile_tonnetz",
]
