"""Adaptive quadrature detection: single-symbol statistics and collective codeword decisions.

Codewords are diagonal, so the channel acts componentwise: the noiseless
output for codeword z is A * z (A_j the averaged gain of component j), and
a codeword difference matrix has singular values |z_a,j - z_b,j|.
Noise variances are complex variances 2 sigma_N^2 throughout.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from app.channel import AveragedGain, transmit_block
from app.errors import AmbiguousPairError, DegenerateGainError, DomainError
from app.estimation import QuadratureSelector, Statistic
from app.mathcore import CircularGaussianSpec, as_generator, q_function, sample_circular_gaussian


@dataclass(frozen=True)
class GainVector:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.entries, dtype=complex))
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("gain vector must be a non-empty 1-d array")
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_averaged(cls, gains: list[AveragedGain]) -> "GainVector":
        return cls(np.array([g.value for g in gains], dtype=complex))

    @property
    def d(self) -> int:
        return self.entries.size

    @property
    def magnitude_sum(self) -> float:
        return float(np.sum(np.abs(self.entries)))

    def scaled(self, c: float) -> "GainVector":
        return GainVector(self.entries * c)


@dataclass(frozen=True)
class Codeword:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.entries, dtype=complex))
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("codeword must be a non-empty 1-d array")
        object.__setattr__(self, "entries", arr)

    @property
    def d(self) -> int:
        return self.entries.size

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.entries)


@dataclass(frozen=True)
class Codebook:
    codewords: tuple[Codeword, ...]

    def __post_init__(self):
        words = tuple(self.codewords)
        if len(words) < 2:
            raise DomainError("a codebook needs at least two codewords")
        if len({w.d for w in words}) != 1:
            raise DomainError("codewords must share one dimension")
        for a, b in itertools.combinations(range(len(words)), 2):
            if np.array_equal(words[a].entries, words[b].entries):
                raise DomainError(f"codewords {a} and {b} are identical")
        object.__setattr__(self, "codewords", words)

    @property
    def N(self) -> int:
        return len(self.codewords)

    @property
    def d(self) -> int:
        return self.codewords[0].d

    def matrix(self) -> np.ndarray:
        """(N, d) array of codeword entries."""
        return np.stack([w.entries for w in self.codewords])


@dataclass(frozen=True)
class DifferenceMatrix:
    pair: tuple[int, int]
    diff_entries: np.ndarray

    @property
    def singular_values_sq(self) -> np.ndarray:
        return np.abs(self.diff_entries) ** 2

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diff_entries)


@dataclass(frozen=True)
class DecisionOutcome:
    decided_index: int
    gamma: complex
    s: float
    threshold: np.ndarray


@dataclass(frozen=True)
class Homodyne:
    quadrature: QuadratureSelector = QuadratureSelector.POSITION
    # x' and p' identically distributed; the real-valued statistic is only valid then
    assume_symmetric: bool = True


@dataclass(frozen=True)
class Heterodyne:
    c: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError("heterodyne noise scale c must be > 0")


def parse_measurement(text: str) -> Homodyne | Heterodyne:
    """hom-x, hom-p, het or het:c."""
    text = text.strip().lower()
    if text == "hom-x":
        return Homodyne(QuadratureSelector.POSITION)
    if text == "hom-p":
        return Homodyne(QuadratureSelector.MOMENTUM)
    if text == "het":
        return Heterodyne()
    if text.startswith("het:"):
        try:
            return Heterodyne(float(text[4:]))
        except ValueError as e:
            raise DomainError(f"invalid heterodyne scale in {text!r}") from e
    raise DomainError(f"unknown measurement {text!r}; expected hom-x, hom-p, het or het:c")


def single_statistic(observed: complex, gains, measurement: Homodyne | Heterodyne, noise_var: float = 0.0) -> Statistic:
    """Matched-filter statistic for one symbol received over l averaged sub-channels.

    Homodyne: real statistic chi(nu) chi(z') with nu = chi(A)/|chi(A)|,
    residual variance sigma_N^2. Heterodyne: complex statistic nu^* z' with
    nu = A/|A|, residual variance c * 2 sigma_N^2 (c = 1 is the plain
    complex statistic).
    """
    gains = np.atleast_1d(np.asarray(gains, dtype=complex))
    if gains.size == 0:
        raise DegenerateGainError("no sub-channel gains given")
    a = complex(gains.mean())
    if isinstance(measurement, Homodyne):
        if not measurement.assume_symmetric:
            raise DomainError("homodyne statistic requires identically distributed quadratures")
        chi_a = float(measurement.quadrature.take(a))
        if chi_a == 0:
            raise DegenerateGainError(f"averaged gain has zero {measurement.quadrature.value}-quadrature")
        chi_z = float(measurement.quadrature.take(observed))
        return Statistic(value=math.copysign(1.0, chi_a) * chi_z, residual_noise_variance=noise_var / 2.0)
    if a == 0:
        raise DegenerateGainError("averaged gain is zero")
    nu = a / abs(a)
    return Statistic(value=complex(nu.conjugate() * observed), residual_noise_variance=measurement.c * noise_var)


def single_error_probability(gain: complex, measurement: Homodyne | Heterodyne, amplitude: float, noise_var: float) -> float:
    """Antipodal +-amplitude (real) symbol error for a fixed averaged gain."""
    if noise_var <= 0:
        raise DomainError("noise variance must be > 0")
    sigma = math.sqrt(noise_var / 2.0)
    if isinstance(measurement, Homodyne):
        return q_function(abs(float(measurement.quadrature.take(gain))) * amplitude / sigma)
    return q_function(abs(gain) * amplitude / (math.sqrt(measurement.c) * sigma))


def simulate_single_detection(
    gains,
    measurement: Homodyne | Heterodyne,
    amplitude: float,
    noise_var: float,
    trials: int,
    rng,
) -> int:
    """Error count for antipodal real symbols +-amplitude through a fixed averaged gain.

    For a real symbol the measured quadrature of A z is chi(A) z, so the
    homodyne statistic carries |chi(A)| z plus N(0, sigma_N^2) noise;
    heterodyne adds its c-scaled complex noise.
    """
    gen = as_generator(rng)
    a = complex(np.mean(np.atleast_1d(np.asarray(gains, dtype=complex))))
    bits = np.where(gen.integers(0, 2, size=trials) == 1, 1.0, -1.0)
    if isinstance(measurement, Homodyne):
        chi_a = float(measurement.quadrature.take(a))
        if chi_a == 0:
            raise DegenerateGainError("averaged gain has zero measured quadrature")
        observed = transmit_block(np.full(trials, a), bits * amplitude, CircularGaussianSpec(noise_var), gen)
        stat = math.copysign(1.0, chi_a) * measurement.quadrature.take(observed)
        decided = np.where(stat > 0, 1.0, -1.0)
    else:
        if a == 0:
            raise DegenerateGainError("averaged gain is zero")
        noise = CircularGaussianSpec(measurement.c * noise_var)
        observed = transmit_block(np.full(trials, a), bits * amplitude, noise, gen)
        stat = (np.conj(a) / abs(a)) * observed
        decided = np.where(stat.real > 0, 1.0, -1.0)
    return int(np.count_nonzero(decided != bits))


def _pair_direction(gains: GainVector, z_a: Codeword, z_b: Codeword) -> tuple[np.ndarray, float]:
    if not gains.d == z_a.d == z_b.d:
        raise DomainError(f"dimension mismatch: gains {gains.d}, codewords {z_a.d}/{z_b.d}")
    u = gains.entries * (z_a.entries - z_b.entries)
    norm = float(np.linalg.norm(u))
    if norm == 0:
        raise AmbiguousPairError("codewords coincide under the given gains")
    return u, norm


def collective_statistic(observed, gains: GainVector, pair: tuple[Codeword, Codeword]) -> DecisionOutcome:
    """Project z' - midpoint onto nu = A(z_A - z_B)/|A(z_A - z_B)|.

    gamma = s |A M| + noise with s = +0.5 for z_A; the decision is the sign
    of Re(gamma), i.e. the ML hyperplane between the two hypotheses.
    """
    z_a, z_b = pair
    u, norm = _pair_direction(gains, z_a, z_b)
    observed = np.asarray(observed, dtype=complex)
    if observed.shape != (gains.d,):
        raise DomainError(f"observation must have length {gains.d}")
    threshold = 0.5 * (gains.entries * z_a.entries + gains.entries * z_b.entries)
    gamma = complex(np.vdot(u / norm, observed - threshold))
    s = 0.5 if gamma.real >= 0 else -0.5
    return DecisionOutcome(decided_index=0 if s > 0 else 1, gamma=gamma, s=s, threshold=threshold)


def ml_decide(observed, gains: GainVector, codebook: Codebook) -> int:
    """Nearest noiseless output A z_k; ties go to the lowest index."""
    observed = np.asarray(observed, dtype=complex)
    means = gains.entries[None, :] * codebook.matrix()
    distances = np.sum(np.abs(observed[None, :] - means) ** 2, axis=1)
    return int(np.argmin(distances))


def ml_decide_batch(observed: np.ndarray, gains: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Vectorised ml_decide over trials: observed and gains are (trials, d)."""
    means = gains[:, None, :] * codebook.matrix()[None, :, :]
    distances = np.sum(np.abs(observed[:, None, :] - means) ** 2, axis=2)
    return np.argmin(distances, axis=1)


def pairwise_elimination_decide(observed, gains: GainVector, codebook: Codebook) -> int:
    """N-ary decision by successive pairwise projections, survivor against challenger."""
    survivor = 0
    for challenger in range(1, codebook.N):
        pair = (codebook.codewords[survivor], codebook.codewords[challenger])
        try:
            outcome = collective_statistic(observed, gains, pair)
        except AmbiguousPairError:
            continue
        if outcome.decided_index == 1:
            survivor = challenger
    return survivor


def difference_matrix(z_a: Codeword, z_b: Codeword, pair: tuple[int, int] = (0, 1)) -> DifferenceMatrix:
    if z_a.d != z_b.d:
        raise DomainError(f"codeword dimensions differ: {z_a.d} vs {z_b.d}")
    return DifferenceMatrix(pair=pair, diff_entries=z_a.entries - z_b.entries)


def pairwise_error(gains: GainVector, z_a: Codeword, z_b: Codeword, noise_var: float, space: str = "real") -> float:
    """Q(|A z_A - A z_B| / (2 sigma_N)) in the real subspace, Q(... / (2 sqrt2 sigma_N)) in C^d."""
    if noise_var <= 0:
        raise DomainError("noise variance must be > 0")
    if gains.d != z_a.d or z_a.d != z_b.d:
        raise DomainError("dimension mismatch")
    separation = float(np.linalg.norm(gains.entries * (z_a.entries - z_b.entries)))
    sigma = math.sqrt(noise_var / 2.0)
    if space == "real":
        return q_function(separation / (2.0 * sigma))
    if space == "complex":
        return q_function(separation / (2.0 * math.sqrt(2.0) * sigma))
    raise DomainError(f"space must be 'real' or 'complex', got {space!r}")


def conditional_pair_error(gains: GainVector, diff: DifferenceMatrix, noise_var: float) -> float:
    """Q(|A M| / (2 sigma_N)) for a fixed gain vector."""
    if noise_var <= 0:
        raise DomainError("noise variance must be > 0")
    if gains.d != diff.diff_entries.size:
        raise DomainError("dimension mismatch")
    separation = float(np.linalg.norm(gains.entries * diff.diff_entries))
    return q_function(separation / (2.0 * math.sqrt(noise_var / 2.0)))


def diversity_bound(diff: DifferenceMatrix, snr: float, component_variance: float = 1.0) -> float:
    """prod_j 1 / (1 + SNR v lambda_j^2 / 4) for CN(0, v) gain components.

    The default v = 1 is the unit-variance prior of the closed form; any
    other per-component variance enters only through the product SNR v.
    """
    if snr <= 0 or component_variance <= 0:
        raise DomainError("SNR and component variance must be > 0")
    return float(np.prod(1.0 / (1.0 + snr * component_variance * diff.singular_values_sq / 4.0)))


def success_bound(diff: DifferenceMatrix, snr: float, d: int | None = None) -> float:
    """max(0, 1 - 4^d / (SNR^d prod lambda_j^2)); needs every lambda_j^2 > 0."""
    lam = diff.singular_values_sq
    d = lam.size if d is None else d
    if snr <= 0:
        raise DomainError("SNR must be > 0")
    if np.any(lam <= 0):
        raise DomainError("success bound requires every singular value to be positive")
    log_ratio = d * math.log(4.0) - d * math.log(snr) - float(np.sum(np.log(lam)))
    return max(0.0, 1.0 - math.exp(log_ratio))


def sample_codebook(d: int, N: int, rng, complex_variance: float = 1.0) -> Codebook:
    if d < 1 or N < 2:
        raise DomainError("need d >= 1 and N >= 2")
    gen = as_generator(rng)
    words = sample_circular_gaussian(CircularGaussianSpec(complex_variance), gen, size=(N, d))
    return Codebook(tuple(Codeword(w) for w in words))


def union_bound(codebook: Codebook, noise_var: float | None = None, gains: GainVector | None = None, snr: float | None = None) -> float:
    """Average over transmitted codewords of the summed pairwise terms, clamped to 1.

    With `gains` the terms are the fixed-gain pairwise errors; without them
    they are the diversity bounds at `snr`.
    """
    N = codebook.N
    total = 0.0
    for a, b in itertools.permutations(range(N), 2):
        z_a, z_b = codebook.codewords[a], codebook.codewords[b]
        if gains is not None:
            total += pairwise_error(gains, z_a, z_b, noise_var)
        else:
            total += diversity_bound(difference_matrix(z_a, z_b, (a, b)), snr)
    return min(1.0, total / N)


def count_ml_errors(
    gains: GainVector | None,
    codebook: Codebook,
    noise_var: float,
    trial_count: int,
    rng,
    gain_variance: float | None = None,
) -> int:
    """Monte Carlo ML detection; returns the number of wrong decisions.

    Either a fixed gain vector or, with gains=None, CN(0, gain_variance)
    effective gains redrawn per trial and known to the receiver.
    """
    if trial_count < 1:
        raise DomainError("trial_count must be >= 1")
    gen = as_generator(rng)
    d = codebook.d
    if gains is not None:
        if gains.d != d:
            raise DomainError("gain vector and codebook dimensions differ")
        a = np.broadcast_to(gains.entries, (trial_count, d))
    else:
        if gain_variance is None or gain_variance <= 0:
            raise DomainError("random-gain mode needs gain_variance > 0")
        a = sample_circular_gaussian(CircularGaussianSpec(gain_variance), gen, size=(trial_count, d))
    sent = gen.integers(0, codebook.N, size=trial_count)
    observed = transmit_block(a, codebook.matrix()[sent], CircularGaussianSpec(noise_var), gen)
    decided = ml_decide_batch(observed, a, codebook)
    return int(np.count_nonzero(decided != sent))


def exhaustive_error_rate(
    gains: GainVector | None,
    codebook: Codebook,
    noise_var: float | None,
    snr: float | None,
    trial_count: int,
    rng,
    gain_variance: float | None = None,
) -> float:
    """Empirical ML error probability over `trial_count` trials.

    Give either `noise_var` or `snr`; an SNR is taken per unit codeword
    component energy, so noise_var = 1 / snr.
    """
    if (noise_var is None) == (snr is None):
        raise DomainError("pass exactly one of noise_var or snr")
    if snr is not None:
        if snr <= 0:
            raise DomainError("SNR must be > 0")
        noise_var = 1.0 / snr
    return count_ml_errors(gains, codebook, noise_var, trial_count, rng, gain_variance) / trial_count
