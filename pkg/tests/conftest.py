import warnings

import numpy as np
import pytest

from eigenprog.filterbank import FilterbankConfig
from eigenprog.scattering import Transformer
from eigenprog.spectral import eigenprogression_basis


def direct_convolve(x, h):
    """Circular convolution by the defining double (or triple) sum."""
    x = np.asarray(x)
    h = np.asarray(h)
    out = np.zeros(x.shape, dtype=complex)
    for idx in np.ndindex(x.shape):
        if x[idx] != 0:
            out += x[idx] * np.roll(h, idx, axis=tuple(range(h.ndim)))
    return out


@pytest.fixture(scope="session")
def basis():
    return eigenprogression_basis()


@pytest.fixture(scope="session")
def tiny_config():
    return FilterbankConfig(frames=16, pitches=20, pitch_pad=24, j1_scales=3,
                            j2_scales=3, j2_coupling="all", sigma=0.8, xi=2.0)


@pytest.fixture(scope="session")
def small_transformer(basis):
    config = FilterbankConfig(frames=32, pitches=30, pitch_pad=36, j1_scales=3,
                              j2_scales=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Transformer(config, basis)


def random_roll(rng, frames, pitches, density=0.15):
    return (rng.random((frames, pitches)) < density).astype(float)


ACCEPTANCE = []


def record(criterion, ok, detail):
    """Log one acceptance line; the terminal summary repeats them all."""
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    line = "criterion %-4s %-4s %s" % (criterion, status, detail)
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
