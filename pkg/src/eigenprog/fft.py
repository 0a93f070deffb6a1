"""
Discrete Fourier transforms and exact cyclic convolution.

Power-of-two lengths use an iterative radix-2 decimation-in-time transform;
any other length goes through Bluestein's chirp-z identity on top of it.
Transforms are unnormalized forward, ``1/n`` inverse.

"""

from __future__ import annotations

import numpy as np
import scipy.fft


def _is_pow2(n):
    return n >= 1 and not n & (n - 1)


def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(a, sign):
    # a: (batch, n) complex, n a power of two
    n = a.shape[-1]
    a = a[:, _bit_reverse(n)]
    m = 2
    while m <= n:
        half = m // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        blocks = a.reshape(a.shape[0], n // m, m)
        even = blocks[:, :, :half]
        odd = blocks[:, :, half:] * twiddle
        a = np.concatenate((even + odd, even - odd), axis=2).reshape(a.shape[0], n)
        m *= 2
    return a


def _bluestein(a, sign):
    n = a.shape[-1]
    k = np.arange(n)
    # n**2 mod 2n keeps the chirp phase exact for large n
    chirp = np.exp(sign * 1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1
    while m < 2 * n - 1:
        m *= 2
    padded = np.zeros((a.shape[0], m), dtype=complex)
    padded[:, :n] = a * chirp
    kernel = np.zeros(m, dtype=complex)
    kernel[:n] = np.conj(chirp)
    kernel[m - n + 1:] = np.conj(chirp[1:][::-1])
    spec = _radix2(padded, -1) * _radix2(kernel[None, :], -1)
    conv = _radix2(spec, 1) / m
    return conv[:, :n] * chirp


def fft(v, inverse=False, axis=-1):
    """
    One-dimensional DFT along ``axis``.

    ``fft(v)[k] = sum_n v[n] exp(-2i pi n k / N)``; the inverse carries the
    ``1/N`` factor, so ``fft(fft(v), inverse=True) == v`` up to rounding.

    """
    a = np.asarray(v, dtype=complex)
    if a.ndim == 0:
        raise ValueError("fft needs at least one dimension")
    n = a.shape[axis]
    if n < 1:
        raise ValueError("unsupported length %d" % n)
    moved = np.moveaxis(a, axis, -1)
    flat = moved.reshape(-1, n)
    sign = 1 if inverse else -1
    out = _radix2(flat, sign) if _is_pow2(n) else _bluestein(flat, sign)
    if inverse:
        out = out / n
    return np.moveaxis(out.reshape(moved.shape), -1, axis)


def fftn(v, inverse=False, axes=None):
    a = np.asarray(v, dtype=complex)
    axes = range(a.ndim) if axes is None else axes
    for ax in axes:
        a = fft(a, inverse=inverse, axis=ax)
    return a


def cyclic_convolve(x, h, backend="native"):
    """
    Multidimensional circular convolution over every axis.

    ``out[n] = sum_m x[m] h[(n - m) mod N]`` computed through the DFT.

    Parameters
    ----------
    x, h : numpy arrays
        Same shape; real or complex.
    backend : {'native', 'scipy'}
        Transform implementation; both compute the same convolution.

    Returns
    -------
    numpy array, complex

    """
    x = np.asarray(x)
    h = np.asarray(h)
    if x.shape != h.shape:
        raise ValueError("shape mismatch: %s vs %s" % (x.shape, h.shape))
    if backend == "native":
        return fftn(fftn(x) * fftn(h), inverse=True)
    if backend == "scipy":
        return scipy.fft.ifftn(scipy.fft.fftn(x) * scipy.fft.fftn(h))
    raise ValueError("unknown backend %r" % backend)
