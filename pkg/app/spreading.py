"""Subcarrier-spreading estimation.

Iteration i sends an n-dimensional frame whose g pilots sit in the window
[i, i + g) with vacuum (exact zeros) around it, so g + (l - 1) = n. Because
the good indices are sorted and distinct, the i-th good sub-channel always
lies inside window i; only that sub-channel's output feeds the statistic.
"""

import math
from dataclasses import dataclass

import numpy as np

from app.channel import BoundedModel, ChannelModel, FadingModel, draw_gain_matrix, draw_gains, transmit_block
from app.errors import DomainError
from app.estimation import Estimate, Statistic, mmse_estimate, pilot_error_probability
from app.mathcore import CircularGaussianSpec, as_generator, q_function


@dataclass(frozen=True)
class SpreadPlan:
    n: int
    l: int
    g: int
    k: int = 1
    good_indices: tuple[int, ...] = ()

    def __post_init__(self):
        if not 1 <= self.l <= self.n:
            raise DomainError(f"need 1 <= l <= n, got l={self.l}, n={self.n}")
        if self.g < 1 or self.g + (self.l - 1) != self.n:
            raise DomainError(f"frame geometry requires g + (l - 1) = n, got g={self.g}, l={self.l}, n={self.n}")
        if self.k < 1:
            raise DomainError("repetition count k must be >= 1")
        good = tuple(sorted(self.good_indices)) if self.good_indices else tuple(range(self.l))
        if len(good) != self.l or len(set(good)) != self.l or any(not 0 <= i < self.n for i in good):
            raise DomainError(f"good_indices must be {self.l} distinct indices in [0, {self.n})")
        object.__setattr__(self, "good_indices", good)

    @classmethod
    def for_channel(cls, channel: ChannelModel, k: int = 1) -> "SpreadPlan":
        return cls(n=channel.n, l=channel.l, g=channel.n - channel.l + 1, k=k, good_indices=channel.good_indices)


@dataclass(frozen=True)
class SpreadFrame:
    entries: np.ndarray
    pilot_window_start: int
    pilot_values: np.ndarray

    @property
    def energy(self) -> float:
        return float(np.vdot(self.entries, self.entries).real)


@dataclass(frozen=True)
class ChannelScan:
    index: int
    statistic: Statistic
    estimate: Estimate


@dataclass(frozen=True)
class SpreadScanResult:
    per_channel: list[ChannelScan]
    aggregate_output: np.ndarray


def build_frame(plan: SpreadPlan, iteration: int, q_x) -> SpreadFrame:
    q = np.asarray(q_x, dtype=complex)
    if q.shape != (plan.g,):
        raise DomainError(f"q_x must have length g={plan.g}, got shape {q.shape}")
    if not 0 <= iteration <= plan.l - 1:
        raise DomainError(f"iteration must lie in [0, {plan.l - 1}], got {iteration}")
    entries = np.zeros(plan.n, dtype=complex)
    entries[iteration : iteration + plan.g] = q
    return SpreadFrame(entries=entries, pilot_window_start=iteration, pilot_values=q.copy())


def frame_inner_product(f1: SpreadFrame, f2: SpreadFrame) -> complex:
    if f1.entries.shape != f2.entries.shape:
        raise DomainError("frames have different lengths")
    return complex(np.vdot(f1.entries, f2.entries))


def channel_prior_variance(channel: ChannelModel) -> float:
    """E|F(T)|^2 over the good sub-channels, the prior used for shrinkage."""
    kind = channel.kind
    if isinstance(kind, FadingModel):
        return kind.gain_variance
    if isinstance(kind, BoundedModel) and kind.gains is not None:
        return float(np.mean([abs(kind.gains[i]) ** 2 for i in channel.good_indices]))
    return float(np.mean([2.0 * t * t for t in kind.magnitude_grid]))


def _check_plan_channel(plan: SpreadPlan, channel: ChannelModel):
    if plan.n != channel.n or plan.good_indices != channel.good_indices:
        raise DomainError("spread plan does not match the channel's n / good_indices")


def frame_statistic(frame: SpreadFrame, output, noise_var: float) -> Statistic:
    """Projection of the output onto the unit frame direction: F(T_i)|P| + F(Delta).

    `output` is one length-n frame output or a (..., n) batch of them.
    """
    norm = math.sqrt(frame.energy)
    value = np.asarray(output, dtype=complex) @ (np.conj(frame.entries) / norm)
    return Statistic(value=complex(value) if np.ndim(value) == 0 else value, residual_noise_variance=noise_var)


def scan(
    plan: SpreadPlan,
    q_x,
    channel: ChannelModel,
    rng,
    gains=None,
    prior_variance: float | None = None,
) -> SpreadScanResult:
    """Run the l scan iterations once.

    Each frame passes through the gain of the i-th good sub-channel, the
    output is projected onto the unit frame direction (statistic
    F(T_i)|P| + F(Delta)) and shrunk to the linear estimate of F(T_i).
    `gains` overrides the channel draw with a fixed length-n realisation.
    """
    _check_plan_channel(plan, channel)
    gen = as_generator(rng)
    gains = draw_gains(channel, gen) if gains is None else np.asarray(gains, dtype=complex)
    if gains.shape != (plan.n,):
        raise DomainError(f"expected {plan.n} gains, got shape {gains.shape}")
    prior = channel_prior_variance(channel) if prior_variance is None else prior_variance
    noise_var = channel.noise.complex_variance

    per_channel = []
    aggregate = np.zeros(plan.n, dtype=complex)
    for i, index in enumerate(plan.good_indices):
        frame = build_frame(plan, i, q_x)
        output = transmit_block(np.full(plan.n, gains[index]), frame.entries, channel.noise, gen)
        aggregate += output

        norm = math.sqrt(frame.energy)
        statistic = frame_statistic(frame, output, noise_var)
        s = statistic.value
        estimate = mmse_estimate(
            Statistic(value=s / norm, residual_noise_variance=noise_var / frame.energy),
            prior,
            frame.energy,
            noise_var,
        )
        per_channel.append(ChannelScan(index=index, statistic=statistic, estimate=estimate))
    return SpreadScanResult(per_channel=per_channel, aggregate_output=aggregate)


def repeated_estimate(
    plan: SpreadPlan,
    stats: list[Statistic],
    frame_energy: float,
    noise_var: float,
    prior_variance: float = 1.0,
) -> Estimate:
    """k-fold combiner |P| / (k |P|^2 + 2 sigma_N^2) * sum S at unit prior.

    Its MSE is that of a single shot with k times the frame energy.
    """
    if len(stats) != plan.k:
        raise DomainError(f"expected k={plan.k} statistics, got {len(stats)}")
    if frame_energy <= 0:
        raise DomainError("frame energy must be > 0")
    norm = math.sqrt(frame_energy)
    total = np.sum([np.asarray(s.value, dtype=complex) for s in stats], axis=0)
    energy = plan.k * frame_energy
    return mmse_estimate(
        Statistic(value=total / (plan.k * norm), residual_noise_variance=noise_var / energy),
        prior_variance,
        energy,
        noise_var,
    )


def upsilon(q_x) -> float:
    """|q_x|^2 / g; equals |p_x|^2 when all pilots are equal."""
    q = np.asarray(q_x, dtype=complex)
    return float(np.vdot(q, q).real / q.size)


def effective_snr_hat(plan: SpreadPlan, frame_energy: float, noise_var: float) -> float:
    """0.5 k |P|^2 / (g * 2 sigma_N^2), the scaled SNR after k repetitions."""
    if noise_var <= 0:
        raise DomainError("noise variance must be > 0")
    return 0.5 * plan.k * frame_energy / (plan.g * noise_var)


def minimized_error_probability(q_x, noise_var: float) -> float:
    if noise_var <= 0:
        raise DomainError("noise variance must be > 0")
    return q_function(math.sqrt(upsilon(q_x) / noise_var))


def spread_error_probability(k: int, snr: float) -> float:
    """Q(sqrt(k SNR)), SNR being the complex |p_x|^2 / (2 sigma_N^2)."""
    if k < 1 or snr < 0:
        raise DomainError("need k >= 1 and SNR >= 0")
    return q_function(math.sqrt(k * snr))


def spread_error_probability_fading(l: int, k: int, snr: float, gain_variance: float = 1.0) -> float:
    """Average of Q(sqrt(k SNR sum|F(T_i)|^2)) over CN(0, gain_variance) gains."""
    if k < 1:
        raise DomainError("repetition count k must be >= 1")
    return pilot_error_probability(l, k * snr * gain_variance / 2.0)


def simulate_spread_detection(
    plan: SpreadPlan,
    snr: float,
    trials: int,
    rng,
    gains=None,
    gain_variance: float | None = None,
) -> int:
    """Monte Carlo antipodal detection after spreading; returns the error count.

    Every trial sends the bit b on equal pilots of total frame energy SNR / 2
    over unit complex noise. Each of the l scan frames passes k times through
    the gain of its good sub-channel, the outputs are projected onto the frame
    direction and merged by the k-fold combiner, and the per-iteration
    estimates are combined with the known gains before the sign decision.
    Pass either fixed good-channel `gains` (length l) or a `gain_variance`
    for CN gains redrawn per trial.
    """
    if (gains is None) == (gain_variance is None):
        raise DomainError("pass exactly one of gains or gain_variance")
    if snr <= 0:
        raise DomainError("SNR must be > 0")
    gen = as_generator(rng)
    noise = CircularGaussianSpec(1.0)
    if gains is not None:
        h = np.asarray(gains, dtype=complex)
        if h.shape != (plan.l,):
            raise DomainError(f"expected {plan.l} good-channel gains, got shape {h.shape}")
        prior = float(np.mean(np.abs(h) ** 2)) or 1.0
        h = np.broadcast_to(h, (trials, plan.l))
    else:
        h = draw_gain_matrix(ChannelModel(FadingModel(gain_variance), noise, n=plan.l), gen, trials)
        prior = gain_variance

    bits = np.where(gen.integers(0, 2, size=trials) == 1, 1.0, -1.0)
    q = np.full(plan.g, math.sqrt(snr / (2.0 * plan.g)))
    combined = np.zeros(trials, dtype=complex)
    for i in range(plan.l):
        frame = build_frame(plan, i, q)
        sent = bits[:, None] * frame.entries
        channel_rows = np.broadcast_to(h[:, i : i + 1], sent.shape)
        stats = [
            frame_statistic(frame, transmit_block(channel_rows, sent, noise, gen), noise.complex_variance)
            for _ in range(plan.k)
        ]
        estimate = repeated_estimate(plan, stats, frame.energy, noise.complex_variance, prior)
        combined += np.conj(h[:, i]) * estimate.value
    return int(np.count_nonzero(np.where(combined.real > 0, 1.0, -1.0) != bits))
