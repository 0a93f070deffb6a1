import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigenprog.fft import cyclic_convolve, fft, fftn

from conftest import direct_convolve


def naive_dft(v):
    n = len(v)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ v


@pytest.mark.parametrize("n", [1, 2, 3, 8, 12, 17, 64, 100, 132])
def test_fft_matches_defining_sum(n):
    rng = np.random.default_rng(n)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.allclose(fft(v), naive_dft(v), atol=1e-10)


def test_delta_spectra():
    assert np.allclose(fft([1, 0, 0, 0]), np.ones(4))
    assert np.allclose(fft([0, 1, 0, 0]), [1, -1j, -1, 1j])


@given(st.integers(1, 70), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_inverse_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.allclose(fft(fft(v), inverse=True), v, atol=1e-10)


def test_fft_along_axis():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 6, 7))
    for axis in range(3):
        assert np.allclose(fft(a, axis=axis), np.fft.fft(a, axis=axis))
    assert np.allclose(fftn(a), np.fft.fftn(a))


def test_parseval():
    rng = np.random.default_rng(3)
    v = rng.standard_normal(48)
    assert np.isclose(np.sum(np.abs(fft(v)) ** 2) / 48, np.sum(v ** 2))


@pytest.mark.parametrize("backend", ["native", "scipy"])
def test_convolution_matches_direct_sum(backend):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((9, 12))
    h = rng.standard_normal((9, 12)) + 1j * rng.standard_normal((9, 12))
    assert np.abs(cyclic_convolve(x, h, backend) - direct_convolve(x, h)).max() < 1e-10


def test_convolution_with_delta_is_shift():
    x = np.arange(24.0).reshape(4, 6)
    h = np.zeros((4, 6))
    h[1, 2] = 1
    assert np.allclose(cyclic_convolve(x, h), np.roll(x, (1, 2), axis=(0, 1)))


def test_convolution_errors():
    with pytest.raises(ValueError):
        cyclic_convolve(np.zeros(4), np.zeros(5))
    with pytest.raises(ValueError):
        cyclic_convolve(np.zeros(4), np.zeros(4), backend="fftw")
