"""Fused inner loop of the second-order transform."""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def mixed_modulus_colsum_numpy(z, mix):
    """
    ``out[k, p] = sum_t |mix[k, 0] * z[0, t, p] + mix[k, 1] * z[1, t, p]|``.

    Reference implementation; the time sum runs before anything else.
    """
    out = np.empty((mix.shape[0], z.shape[2]))
    for k in range(mix.shape[0]):
        out[k] = np.abs(mix[k, 0] * z[0] + mix[k, 1] * z[1]).sum(axis=0)
    return out


if numba is not None:
    @numba.njit(cache=True, nogil=True, fastmath=True)
    def _colsum_jit(z, mix, out):
        n_k = mix.shape[0]
        frames = z.shape[1]
        pitches = z.shape[2]
        for t in range(frames):
            for p in range(pitches):
                a = z[0, t, p]
                b = z[1, t, p]
                for k in range(n_k):
                    v = mix[k, 0] * a + mix[k, 1] * b
                    out[k, p] += np.sqrt(v.real * v.real + v.imag * v.imag)


def mixed_modulus_colsum(z, mix):
    """Same contract as :func:`mixed_modulus_colsum_numpy`, compiled if possible."""
    if numba is None or os.environ.get("EIGENPROG_NO_JIT"):
        return mixed_modulus_colsum_numpy(z, mix)
    z = np.ascontiguousarray(z, dtype=np.complex128)
    mix = np.ascontiguousarray(mix, dtype=np.complex128)
    out = np.zeros((mix.shape[0], z.shape[2]))
    _colsum_jit(z, mix, out)
    return out
