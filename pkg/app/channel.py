"""Gaussian sub-channels: gain draws, additive noise and the AMQD block.

Gains are drawn once per trial and held for the whole frame; of the n
sub-channels only the l good ones ever carry data.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from app.errors import DomainError
from app.mathcore import (
    CircularGaussianSpec,
    as_generator,
    sample_circular_gaussian,
    unitary_dft,
    unitary_idft,
)

BOUNDED_MAX = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class FadingModel:
    """F(T_i) ~ CN(0, gain_variance); the model all closed forms assume."""

    gain_variance: float

    def __post_init__(self):
        if self.gain_variance < 0:
            raise DomainError("gain variance must be >= 0")


@dataclass(frozen=True)
class BoundedModel:
    """Physical gains with Re = Im in [0, 1/sqrt 2].

    Either a fixed list of n gains (returned verbatim) or a grid of quadrature
    magnitudes t from which each sub-channel draws t + it uniformly.
    """

    gains: tuple[complex, ...] | None = None
    magnitude_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.gains is None) == (self.magnitude_grid is None):
            raise DomainError("BoundedModel needs exactly one of gains or magnitude_grid")
        if self.gains is not None:
            for g in self.gains:
                if not (0 <= g.real <= BOUNDED_MAX + 1e-12) or abs(g.real - g.imag) > 1e-12:
                    raise DomainError(f"bounded gain {g} violates 0 <= Re = Im <= 1/sqrt(2)")
        else:
            if not self.magnitude_grid:
                raise DomainError("magnitude_grid must be non-empty")
            if any(not 0 <= t <= BOUNDED_MAX + 1e-12 for t in self.magnitude_grid):
                raise DomainError("magnitude_grid entries must lie in [0, 1/sqrt(2)]")


@dataclass(frozen=True)
class ChannelModel:
    kind: FadingModel | BoundedModel
    noise: CircularGaussianSpec
    n: int
    good_indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("channel needs at least one sub-channel")
        good = tuple(sorted(set(self.good_indices))) if self.good_indices else tuple(range(self.n))
        if len(good) != len(self.good_indices or good):
            raise DomainError("good_indices contains duplicates")
        if any(i < 0 or i >= self.n for i in good):
            raise DomainError(f"good_indices must lie in [0, {self.n})")
        object.__setattr__(self, "good_indices", good)
        if isinstance(self.kind, BoundedModel) and self.kind.gains is not None and len(self.kind.gains) != self.n:
            raise DomainError(f"bounded gain list has {len(self.kind.gains)} entries, expected n={self.n}")

    @property
    def l(self) -> int:
        return len(self.good_indices)


@dataclass(frozen=True)
class AveragedGain:
    value: complex
    constituents: int


def draw_gain_matrix(model: ChannelModel, rng, trials: int) -> np.ndarray:
    """(trials, n) gain draws; one row per independent trial."""
    gen = as_generator(rng)
    kind = model.kind
    if isinstance(kind, FadingModel):
        return sample_circular_gaussian(CircularGaussianSpec(kind.gain_variance), gen, size=(trials, model.n))
    if kind.gains is not None:
        return np.broadcast_to(np.asarray(kind.gains, dtype=complex), (trials, model.n)).copy()
    grid = np.asarray(kind.magnitude_grid, dtype=float)
    t = grid[gen.integers(0, grid.size, size=(trials, model.n))]
    return t + 1j * t


def draw_gains(model: ChannelModel, rng) -> np.ndarray:
    return draw_gain_matrix(model, rng, 1)[0]


def transmit(gain: complex, input: complex, noise: CircularGaussianSpec, rng) -> complex:
    """p' = F(T) p + F(Delta), F(Delta) ~ CN(0, noise.complex_variance)."""
    out = gain * input
    if noise.complex_variance > 0:
        out += sample_circular_gaussian(noise, rng)
    return complex(out)


def transmit_block(gains, d, noise: CircularGaussianSpec, rng) -> np.ndarray:
    """Elementwise transmit with independent noise per position.

    Works on a single block (shape (n,)) or a batch of trials (shape (..., n)).
    """
    gains = np.asarray(gains, dtype=complex)
    d = np.asarray(d, dtype=complex)
    if gains.shape[-1:] != d.shape[-1:]:
        raise DomainError(f"gain/input length mismatch: {gains.shape[-1:]} vs {d.shape[-1:]}")
    out = gains * d
    if noise.complex_variance > 0:
        out = out + sample_circular_gaussian(noise, rng, size=out.shape)
    return out


def average_gain(gains, good_indices) -> AveragedGain:
    idx = list(good_indices)
    if not idx:
        raise DomainError("cannot average over an empty index set")
    selected = np.asarray(gains, dtype=complex)[idx]
    return AveragedGain(value=complex(selected.mean()), constituents=len(idx))


def amqd_encode(z) -> np.ndarray:
    """Alice maps single carriers to subcarriers with the inverse transform."""
    return unitary_idft(z)


def amqd_decode(y) -> np.ndarray:
    return unitary_dft(y)


def amqd_block(z, gains, noise: CircularGaussianSpec, rng) -> np.ndarray:
    """y = F(T) F(d) + F(Delta), with d the subcarrier block of the single carriers z.

    The gains act in the Fourier domain, so the decoded output is
    elementwise gain * z plus noise.
    """
    d = amqd_encode(z)
    return transmit_block(gains, amqd_decode(d), noise, rng)
