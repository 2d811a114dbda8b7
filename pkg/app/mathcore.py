"""Shared numerics: Gaussian sampling, unitary DFT, Q-function, chi-square law.

Every variance that crosses an API boundary is a *complex* variance
E[|z|^2] = 2 sigma^2; the per-quadrature variance is always derived as half.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from app.errors import DomainError

# Python complex / numpy complex128 carry the phase-space amplitude x + ip.
ComplexAmplitude = complex


@dataclass(frozen=True)
class CircularGaussianSpec:
    complex_variance: float

    def __post_init__(self):
        if not math.isfinite(self.complex_variance) or self.complex_variance < 0:
            raise DomainError(f"complex variance must be finite and >= 0, got {self.complex_variance}")

    @property
    def quadrature_variance(self) -> float:
        return self.complex_variance / 2.0


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of an independent random stream.

    The sample sequence is a pure function of (master_seed, stream_id, path):
    a Philox counter-based generator keyed through numpy's SeedSequence.
    """

    master_seed: int
    stream_id: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise DomainError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.stream_id < 0 or any(p < 0 for p in self.path):
            raise DomainError("stream ids must be non-negative")

    def child(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, self.path + (index,))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def magnitude_sq(z) -> float:
    return float(z.real**2 + z.imag**2)


def q_function(x):
    """Gaussian tail P(G > x), G ~ N(0, 1).

    Evaluated as erfc(x / sqrt 2) / 2, accurate to ~1e-16 absolute on the
    whole real line (documented bound: 1e-12).
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("q_function requires finite input")
    result = 0.5 * special.erfc(arr / math.sqrt(2.0))
    return float(result) if result.ndim == 0 else result


def _check_chi2_args(x, l):
    if int(l) != l or l < 1:
        raise DomainError(f"l must be a positive integer, got {l}")
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("chi-square argument must be >= 0")
    return arr


def chi2_2l_density(x, l: int):
    """x^(l-1) e^(-x) / (l-1)!, the law of a sum of l unit-mean exponentials."""
    arr = _check_chi2_args(x, l)
    result = stats.gamma.pdf(arr, a=int(l))
    return float(result) if np.ndim(result) == 0 else result


def chi2_2l_cdf(x, l: int):
    """Regularised lower incomplete gamma P(l, x), the integral of chi2_2l_density."""
    arr = _check_chi2_args(x, l)
    result = special.gammainc(int(l), arr)
    return float(result) if np.ndim(result) == 0 else result


def unitary_dft(v) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.size == 0:
        raise DomainError("DFT of an empty vector")
    return np.fft.fft(arr, norm="ortho", axis=-1)


def unitary_idft(v) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.size == 0:
        raise DomainError("inverse DFT of an empty vector")
    return np.fft.ifft(arr, norm="ortho", axis=-1)


def sample_circular_gaussian(spec: CircularGaussianSpec, rng, size=None):
    """Draw from CN(0, spec.complex_variance); re and im are i.i.d. N(0, variance/2)."""
    gen = as_generator(rng)
    sigma = math.sqrt(spec.quadrature_variance)
    shape = () if size is None else size
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    sample = sigma * (re + 1j * im)
    return complex(sample) if size is None else sample


def log_binomial(n: int, k: int) -> float:
    if k < 0 or k > n:
        raise DomainError(f"invalid binomial C({n}, {k})")
    return float(special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1))


def snr_to_db(snr: float) -> float:
    if snr <= 0:
        raise DomainError("SNR must be positive to express in dB")
    return 10.0 * math.log10(snr)


def db_to_snr(db: float) -> float:
    return 10.0 ** (db / 10.0)
