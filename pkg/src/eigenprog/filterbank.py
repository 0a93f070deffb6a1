"""
Gabor filterbanks for the two scattering orders.

Temporal wavelets are dyadic, ``alpha = 2**-j``; pitch-side filters are the
eigentriads (first order) and the eigenprogressions tiled over octaves and
modulated by a spiral wavelet (second order). All filters are centered on
the origin of a circular axis.

"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .spectral import BETA1_VALUES, N_PITCH_CLASSES, eigentriad

DEFAULT_SIGMA = 0.1
DEFAULT_XI = 2 * math.pi / 3
COUPLINGS = ("coarser", "all")


class AdmissibilityError(ValueError):
    """A wavelet's center frequency exceeds the Nyquist frequency."""


@dataclass(frozen=True)
class FilterbankConfig:
    frames: int = 1024
    pitches: int = 128
    pitch_pad: int = 132
    j1_scales: int = 8
    j2_scales: int = 8
    j2_coupling: str = "coarser"
    sigma: float = DEFAULT_SIGMA
    xi: float = DEFAULT_XI
    gamma2_set: tuple = (-1, 0, 1)

    def __post_init__(self):
        if self.frames < 1 or self.frames & (self.frames - 1):
            raise ValueError("frames must be a power of two, got %d" % self.frames)
        if self.pitch_pad < self.pitches:
            raise ValueError("pitch_pad must be at least pitches")
        if self.pitch_pad % N_PITCH_CLASSES:
            raise ValueError("pitch dimension must be a multiple of 12, got %d"
                             % self.pitch_pad)
        if self.j1_scales < 1 or self.j2_scales < 1:
            raise ValueError("scale counts must be positive")
        if self.j2_coupling not in COUPLINGS:
            raise ValueError("j2_coupling must be one of %s" % (COUPLINGS,))
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        gammas = tuple(sorted(set(int(g) for g in self.gamma2_set)))
        if not gammas or any(g not in (-1, 0, 1) for g in gammas):
            raise ValueError("gamma2_set must be a non-empty subset of {-1, 0, 1}")
        object.__setattr__(self, "gamma2_set", gammas)

    @property
    def octaves(self):
        return self.pitch_pad // N_PITCH_CLASSES

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# one-dimensional wavelets
# ---------------------------------------------------------------------------

def circular_coordinate(n):
    """Signed coordinate of each index of Z_n, in (-n/2, n/2]."""
    idx = np.arange(n)
    return np.where(idx <= n / 2, idx, idx - n)


@dataclass(frozen=True)
class TemporalGabor:
    j: int
    alpha: float
    sigma: float
    xi: float
    values: np.ndarray = field(repr=False)

    @property
    def center_frequency(self):
        return self.alpha * self.xi

    @property
    def width(self):
        """Envelope standard deviation, in samples."""
        return self.sigma / self.alpha


def temporal_gabor(j, frames, sigma=DEFAULT_SIGMA, xi=DEFAULT_XI):
    """
    Temporal Gabor wavelet at scale ``alpha = 2**-j``.

    ``values[t] = alpha * exp(-alpha**2 t**2 / (2 sigma**2)) * exp(1j alpha xi t)``
    with ``t`` the signed circular coordinate on Z_frames.

    Raises
    ------
    AdmissibilityError
        If ``alpha * |xi| > pi``.

    """
    if frames < 1 or frames & (frames - 1):
        raise ValueError("frames must be a power of two, got %d" % frames)
    if j < 0:
        raise ValueError("scale index must be non-negative")
    alpha = 2.0 ** (-j)
    if alpha * abs(xi) > math.pi:
        raise AdmissibilityError(
            "center frequency %.4f exceeds pi at j=%d" % (alpha * abs(xi), j))
    if sigma / alpha < 1.0:
        warnings.warn("temporal envelope at j=%d is narrower than one sample "
                      "(width %.3g)" % (j, sigma / alpha), stacklevel=2)
    t = circular_coordinate(frames).astype(float)
    values = (alpha * np.exp(-(alpha * t) ** 2 / (2 * sigma ** 2))
              * np.exp(1j * alpha * xi * t))
    return TemporalGabor(j, alpha, sigma, xi, values)


def _quiet_gabor(j, frames, sigma, xi):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return temporal_gabor(j, frames, sigma, xi)


@dataclass(frozen=True)
class SpiralGabor:
    gamma2: int
    values: np.ndarray = field(repr=False)


def spiral_gabor(gamma2, octaves, sigma=DEFAULT_SIGMA, xi=DEFAULT_XI):
    """
    Gabor wavelet over octave offsets of the pitch spiral.

    ``values[o]`` is evaluated at the signed circular octave offset of
    index ``o``. ``gamma2 = 0`` gives the all-ones (octave-averaging) filter,
    since the literal formula vanishes there.

    """
    if gamma2 not in (-1, 0, 1):
        raise ValueError("gamma2 must be -1, 0 or +1")
    if octaves < 1:
        raise ValueError("need at least one octave")
    if gamma2 == 0:
        return SpiralGabor(0, np.ones(octaves, dtype=complex))
    c = circular_coordinate(octaves).astype(float)
    values = (gamma2 * np.exp(-(gamma2 * c) ** 2 / (2 * sigma ** 2))
              * np.exp(1j * gamma2 * xi * c))
    return SpiralGabor(gamma2, values)


# ---------------------------------------------------------------------------
# separable banks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriadFilter:
    j1: int
    beta1: int
    quality: int
    temporal: TemporalGabor = field(repr=False)
    pitch: np.ndarray = field(repr=False)

    def values(self):
        return np.outer(self.temporal.values, self.pitch)


@dataclass(frozen=True)
class TriadFilterbank:
    config: FilterbankConfig
    temporal: tuple = field(repr=False)
    filters: tuple = field(repr=False)

    def __len__(self):
        return len(self.filters)

    def index(self, j1, beta1, quality):
        return (j1 * len(BETA1_VALUES) + BETA1_VALUES.index(beta1)) * 2 + quality


def build_triad_filterbank(config, pitches=None):
    """
    First-order bank: every (j1, beta1, q), ordered j1 outer, beta1 middle,
    q inner. Pitch filters have length ``pitches`` (the padded pitch axis by
    default).
    """
    pitches = config.pitch_pad if pitches is None else pitches
    temporal = tuple(_quiet_gabor(j, config.frames, config.sigma, config.xi)
                     for j in range(config.j1_scales))
    filters = []
    for gabor in temporal:
        for beta1 in BETA1_VALUES:
            for quality in (0, 1):
                pitch = eigentriad(beta1, quality, pitches).values
                filters.append(TriadFilter(gabor.j, beta1, quality, gabor, pitch))
    return TriadFilterbank(config, temporal, tuple(filters))


def tile_tonnetz(wavelet_values, spiral, pitches):
    """Pitch-quality filter ``h[p, q] = psi[p mod 12, q] * spiral[p // 12]``."""
    if pitches % N_PITCH_CLASSES:
        raise ValueError("pitch dimension must be a multiple of 12, got %d" % pitches)
    octave = np.arange(pitches) // N_PITCH_CLASSES
    tiled = np.tile(np.asarray(wavelet_values), (pitches // N_PITCH_CLASSES, 1))
    return tiled * spiral.values[octave][:, None]


@dataclass(frozen=True)
class ProgFilter:
    j2: int
    beta2: int
    gamma2: int
    temporal: TemporalGabor = field(repr=False)
    pitch_quality: np.ndarray = field(repr=False)

    def values(self):
        return self.temporal.values[:, None, None] * self.pitch_quality[None, :, :]


@dataclass(frozen=True)
class ProgFilterbank:
    config: FilterbankConfig
    basis: object = field(repr=False)
    pitches: int
    temporal: tuple = field(repr=False)
    spirals: tuple = field(repr=False)
    filters: tuple = field(repr=False)
    coupling: str = "coarser"

    def __len__(self):
        return len(self.filters)

    def j2_for(self, j1):
        """Second-order scales composed with first-order scale ``j1``."""
        scales = range(len(self.temporal))
        if self.coupling == "all":
            return list(scales)
        return [j2 for j2 in scales if j2 > j1]

    def pitch_filter(self, beta2, gamma2):
        spiral = self.spirals[self.config.gamma2_set.index(gamma2)]
        return tile_tonnetz(self.basis[beta2].values, spiral, self.pitches)


def build_prog_filterbank(config, basis, pitches=None, coupling=None):
    """
    Second-order bank over all (j2, beta2, gamma2), ordered in that nesting.
    The coupling rule is applied later, per first-order scale, through
    :meth:`ProgFilterbank.j2_for`.
    """
    pitches = config.pitch_pad if pitches is None else pitches
    if pitches % N_PITCH_CLASSES:
        raise ValueError("pitch dimension must be a multiple of 12, got %d" % pitches)
    coupling = config.j2_coupling if coupling is None else coupling
    if coupling not in COUPLINGS:
        raise ValueError("j2_coupling must be one of %s" % (COUPLINGS,))
    octaves = pitches // N_PITCH_CLASSES
    temporal = tuple(_quiet_gabor(j, config.frames, config.sigma, config.xi)
                     for j in range(config.j2_scales))
    spirals = tuple(spiral_gabor(g, octaves, config.sigma, config.xi)
                    for g in config.gamma2_set)
    filters = []
    for gabor in temporal:
        for wavelet in basis:
            for spiral in spirals:
                h = tile_tonnetz(wavelet.values, spiral, pitches)
                filters.append(ProgFilter(gabor.j, wavelet.beta2, spiral.gamma2,
                                          gabor, h))
    return ProgFilterbank(config, basis, pitches, temporal, spirals,
                          tuple(filters), coupling)


def admissibility_report(filterbank):
    """
    Per temporal wavelet: scale, center frequency, envelope width (samples),
    and two flags, ``inadmissible`` (frequency above pi) and ``subsample``
    (envelope narrower than one sample). Accepts a filterbank or any
    iterable of :class:`TemporalGabor`.
    """
    gabors = getattr(filterbank, "temporal", filterbank)
    rows = []
    for g in gabors:
        rows.append({
            "j": g.j,
            "alpha": g.alpha,
            "center_frequency": g.center_frequency,
            "width": g.width,
            "inadmissible": bool(abs(g.center_frequency) > math.pi),
            "subsample": bool(g.width < 1.0),
        })
    return rows
