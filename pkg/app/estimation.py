"""Pilot-based sub-channel estimation and its closed-form error probabilities.

SNR bookkeeping: the complex SNR is |p_x|^2 / (2 sigma_N^2) and the scaled
SNR used by the pilot-detection formulas is half of it. Every function below
names which of the two it takes. Note that the law-of-large-numbers chain
that ends in Q(sqrt SNR) only closes as Q(sqrt(2 * scaled SNR)) = Q(sqrt SNR).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.channel import ChannelModel, FadingModel, draw_gain_matrix, transmit_block
from app.errors import DomainError
from app.mathcore import (
    CircularGaussianSpec,
    as_generator,
    chi2_2l_cdf,
    log_binomial,
    q_function,
    unitary_dft,
)


class QuadratureSelector(str, Enum):
    POSITION = "x"
    MOMENTUM = "p"

    def take(self, values):
        arr = np.asarray(values)
        return np.real(arr) if self is QuadratureSelector.POSITION else np.imag(arr)


@dataclass(frozen=True)
class PilotSymbol:
    value: complex

    def __post_init__(self):
        if self.value == 0:
            raise DomainError("pilot symbol must be non-zero")

    @property
    def energy(self) -> float:
        return abs(self.value) ** 2


@dataclass(frozen=True)
class PilotVector:
    values: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(complex(v) for v in self.values))
        if not self.values or self.energy <= 0:
            raise DomainError("pilot vector must have positive energy")

    @classmethod
    def uniform(cls, value: complex, l: int) -> "PilotVector":
        return cls((value,) * l)

    @property
    def energy(self) -> float:
        return float(sum(abs(v) ** 2 for v in self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Statistic:
    value: complex | float | np.ndarray
    residual_noise_variance: float


@dataclass(frozen=True)
class Estimate:
    value: complex | np.ndarray
    mmse: float
    prior_variance: float


def _as_value(arr):
    return complex(arr) if np.ndim(arr) == 0 else arr


def scalar_statistic(pilot: PilotSymbol, observed, noise_var: float) -> Statistic:
    """S = conj(p) p' / |p|^2 = F(T) + F'(Delta); `observed` may be a batch of outputs."""
    if noise_var < 0:
        raise DomainError("noise variance must be >= 0")
    energy = pilot.energy
    return Statistic(
        value=_as_value(pilot.value.conjugate() * np.asarray(observed, dtype=complex) / energy),
        residual_noise_variance=noise_var / energy,
    )


def vector_statistic(pilots: PilotVector, observed, noise_var: float) -> Statistic:
    """S = q^H q' / |q|^2 = A_j + F'(Delta)."""
    observed = np.asarray(observed, dtype=complex)
    if observed.shape != (len(pilots),):
        raise DomainError(f"expected {len(pilots)} observations, got shape {observed.shape}")
    if noise_var < 0:
        raise DomainError("noise variance must be >= 0")
    q = pilots.as_array()
    energy = pilots.energy
    return Statistic(value=complex(np.vdot(q, observed) / energy), residual_noise_variance=noise_var / energy)


def mmse_estimate(stat: Statistic, prior_variance: float, pilot_energy: float, noise_var: float) -> Estimate:
    """Wiener shrinkage of the pilot-normalised statistic."""
    if prior_variance < 0 or noise_var < 0 or pilot_energy < 0:
        raise DomainError("variances and pilot energy must be >= 0")
    signal = prior_variance * pilot_energy
    denom = signal + noise_var
    if denom == 0:
        # deterministic zero prior with a noiseless channel
        return Estimate(value=_as_value(np.zeros_like(np.asarray(stat.value, dtype=complex))), mmse=0.0, prior_variance=prior_variance)
    shrink = signal / denom
    return Estimate(
        value=_as_value(shrink * np.asarray(stat.value, dtype=complex)),
        mmse=prior_variance * noise_var / denom,
        prior_variance=prior_variance,
    )


def mmse_coefficients(pilots: PilotVector, prior_variance: float, noise_var: float) -> np.ndarray:
    """The C vector with C^H q' equal to the MMSE estimate of A_j."""
    if prior_variance < 0 or noise_var < 0:
        raise DomainError("variances must be >= 0")
    denom = prior_variance * pilots.energy + noise_var
    if denom == 0:
        return np.zeros(len(pilots), dtype=complex)
    return prior_variance / denom * pilots.as_array()


def linear_estimate(c_vector, observed) -> complex:
    return complex(np.vdot(np.asarray(c_vector, dtype=complex), np.asarray(observed, dtype=complex)))


def quadrature_noise_ratio(
    c_vector,
    pilots: PilotVector,
    prior_quadrature_variance: float,
    noise_quadrature_variance: float,
    which: QuadratureSelector = QuadratureSelector.POSITION,
) -> float:
    """((chi(C))^T chi(q))^2 E[chi(A)^2] / (|chi(C)|^2 sigma_N^2) on one quadrature."""
    c = np.asarray(c_vector, dtype=complex)
    if c.shape != (len(pilots),):
        raise DomainError("C vector and pilot vector lengths differ")
    if noise_quadrature_variance <= 0:
        raise DomainError("quadrature noise variance must be > 0")
    chi_c = which.take(c)
    chi_q = which.take(pilots.as_array())
    norm_sq = float(chi_c @ chi_c)
    if norm_sq == 0:
        raise DomainError("selected quadrature of C is zero")
    return float((chi_c @ chi_q) ** 2 * prior_quadrature_variance / (norm_sq * noise_quadrature_variance))


def single_carrier_pilot(subcarrier_pilots) -> np.ndarray:
    """p_j = F(p_i): the single-carrier view of the subcarrier pilots."""
    return unitary_dft(subcarrier_pilots)


def complex_snr(pilot_energy: float, noise_var: float) -> float:
    """|p_x|^2 / (2 sigma_N^2); noise_var is the complex variance 2 sigma_N^2."""
    if noise_var <= 0:
        raise DomainError("noise variance must be > 0")
    return pilot_energy / noise_var


def scaled_snr(snr: float) -> float:
    return snr / 2.0


def _check_l_snr(l: int, snr: float):
    if int(l) != l or l < 1:
        raise DomainError(f"l must be a positive integer, got {l}")
    if not snr > 0:
        raise DomainError(f"scaled SNR must be > 0, got {snr}")


def pilot_error_probability(l: int, snr: float) -> float:
    """Antipodal detection error over l Rayleigh branches at scaled SNR `snr`.

    ((1-mu)/2)^l sum_i C(l-1+i, i) ((1+mu)/2)^i with mu = sqrt(snr/(1+snr));
    binomials are taken in log space.
    """
    _check_l_snr(l, snr)
    mu = math.sqrt(snr / (1.0 + snr))
    # 1 - mu = 1 / ((1 + snr)(1 + mu)), free of cancellation at high SNR
    log_low = -l * (math.log1p(snr) + math.log1p(mu) + math.log(2.0))
    log_high = math.log((1.0 + mu) / 2.0)
    total = 0.0
    for i in range(l):
        total += math.exp(log_binomial(l - 1 + i, i) + i * log_high + log_low)
    return min(1.0, max(0.0, total))


def pilot_error_high_snr(l: int, snr: float) -> float:
    """(1/(4 snr))^l C(2l-1, l); only meaningful above unit scaled SNR."""
    _check_l_snr(l, snr)
    if snr <= 1:
        raise DomainError("high-SNR approximation requires scaled SNR > 1")
    return math.exp(l * -math.log(4.0 * snr) + log_binomial(2 * l - 1, l))


def deep_fade_probability(l: int, snr: float) -> float:
    """Small-x approximation 1/(l! snr^l) of Pr(|zeta|^2 < 1/snr), clamped to [0, 1]."""
    _check_l_snr(l, snr)
    return min(1.0, math.exp(-math.lgamma(l + 1) - l * math.log(snr)))


def deep_fade_exact(l: int, snr: float) -> float:
    _check_l_snr(l, snr)
    return chi2_2l_cdf(1.0 / snr, l)


def conditional_error(combined_gain_sq, snr):
    """Q(sqrt(2 |zeta|^2 snr)) for a known combined gain."""
    g = np.asarray(combined_gain_sq, dtype=float)
    if np.any(g < 0) or not snr > 0:
        raise DomainError("combined gain must be >= 0 and scaled SNR > 0")
    return q_function(np.sqrt(2.0 * g * snr))


@dataclass(frozen=True)
class PilotDetectionCounts:
    trials: int
    errors: int
    deep_fades: int


def simulate_pilot_detection(l: int, snr: float, trials: int, rng, gain_variance: float = 1.0) -> PilotDetectionCounts:
    """Monte Carlo antipodal detection of p'_x over l fading branches.

    The transmitted symbol is b p_x / sqrt 2 (the 0.5 energy factor of the
    scaled SNR), the gains are CN(0, gain_variance) and known at the receiver,
    and the decision is the sign of the real part of the combined statistic.
    The error rate matches pilot_error_probability(l, snr * gain_variance).
    A deep fade is counted when the normalised combined gain falls below 1/snr.
    """
    _check_l_snr(l, snr)
    if gain_variance <= 0:
        raise DomainError("gain variance must be > 0")
    gen = as_generator(rng)
    noise = CircularGaussianSpec(1.0)
    pilot = math.sqrt(2.0 * snr * noise.complex_variance)  # |p_x|
    gains = draw_gain_matrix(ChannelModel(FadingModel(gain_variance), noise, n=l), gen, trials)
    bits = np.where(gen.integers(0, 2, size=trials) == 1, 1.0, -1.0)
    symbols = bits[:, None] * (pilot / math.sqrt(2.0))
    received = transmit_block(gains, np.broadcast_to(symbols, gains.shape), noise, gen)
    combined = np.sum(np.conj(gains) * received, axis=1)
    errors = int(np.count_nonzero(np.where(combined.real > 0, 1.0, -1.0) != bits))
    combined_gain_sq = np.sum(np.abs(gains) ** 2, axis=1) / gain_variance
    fades = int(np.count_nonzero(combined_gain_sq < 1.0 / snr))
    return PilotDetectionCounts(trials=trials, errors=errors, deep_fades=fades)
