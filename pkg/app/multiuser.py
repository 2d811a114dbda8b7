"""Multiuser detection: K_out users share the d output dimensions in disjoint blocks.

User k owns r_k consecutive components; blocks never interfere, so each user
is detected exactly like the single-user collective case with d -> r_k.
Per-user SNR is the per-component codeword complex variance over
2 sigma_N^2, which makes the per-user bound collapse to the single-user one
at K_out = 1.
"""

from dataclasses import dataclass

import numpy as np

from app.channel import transmit_block
from app.config import settings
from app.detection import (
    Codeword,
    DifferenceMatrix,
    GainVector,
    collective_statistic,
    diversity_bound,
)
from app.errors import AmbiguousPairError, DomainError, NearSingularGainError
from app.mathcore import CircularGaussianSpec, as_generator, sample_circular_gaussian


@dataclass(frozen=True)
class UserAllocation:
    k_in: int
    k_out: int
    dims: tuple[int, ...]
    d: int

    def __post_init__(self):
        dims = tuple(int(r) for r in self.dims)
        object.__setattr__(self, "dims", dims)
        if self.k_in < 1 or self.k_out < 1:
            raise DomainError("K_in and K_out must be >= 1")
        if len(dims) != self.k_out:
            raise DomainError(f"expected {self.k_out} dimensions, got {len(dims)}")
        if any(not 1 <= r <= self.d for r in dims) or sum(dims) != self.d:
            raise DomainError(f"dims {dims} must be in [1, d] and sum to d={self.d}")

    @classmethod
    def from_dims(cls, dims, k_in: int | None = None) -> "UserAllocation":
        dims = tuple(dims)
        return cls(k_in=k_in or len(dims), k_out=len(dims), dims=dims, d=sum(dims))

    def offsets(self) -> list[tuple[int, int]]:
        bounds = np.concatenate([[0], np.cumsum(self.dims)])
        return [(int(bounds[k]), int(bounds[k + 1])) for k in range(self.k_out)]


@dataclass(frozen=True)
class UserChannel:
    user: int
    gains: GainVector
    snr: float
    noise_var: float


@dataclass(frozen=True)
class UserDecision:
    user: int
    gamma: complex
    s: float
    decided_index: int


def compose_output(allocation: UserAllocation, per_user_inputs, per_user_channels: list[UserChannel], rng) -> np.ndarray:
    """Concatenate each user's block A_k z_k + noise in allocation order."""
    if len(per_user_inputs) != allocation.k_out or len(per_user_channels) != allocation.k_out:
        raise DomainError(f"expected {allocation.k_out} user inputs and channels")
    gen = as_generator(rng)
    blocks = []
    for r_k, z_k, channel in zip(allocation.dims, per_user_inputs, per_user_channels):
        z_k = np.atleast_1d(np.asarray(z_k.entries if isinstance(z_k, Codeword) else z_k, dtype=complex))
        if z_k.shape != (r_k,) or channel.gains.d != r_k:
            raise DomainError(f"user {channel.user}: expected {r_k} components")
        blocks.append(transmit_block(channel.gains.entries, z_k, CircularGaussianSpec(channel.noise_var), gen))
    return np.concatenate(blocks)


def slice_blocks(allocation: UserAllocation, observed) -> list[np.ndarray]:
    observed = np.asarray(observed)
    if observed.shape[-1] != allocation.d:
        raise DomainError(f"output has {observed.shape[-1]} components, allocation expects {allocation.d}")
    return [observed[..., lo:hi] for lo, hi in allocation.offsets()]


def user_statistic(block, channel: UserChannel, pair: tuple[Codeword, Codeword]) -> UserDecision:
    outcome = collective_statistic(block, channel.gains, pair)
    return UserDecision(user=channel.user, gamma=outcome.gamma, s=outcome.s, decided_index=outcome.decided_index)


def user_error_bound(diff: DifferenceMatrix, snr_k: float, r_k: int) -> float:
    if diff.diff_entries.size != r_k:
        raise DomainError(f"difference matrix has {diff.diff_entries.size} components, user owns {r_k}")
    return diversity_bound(diff, snr_k)


def kappa_decode(observed, gains: GainVector | np.ndarray, eps: float | None = None) -> np.ndarray:
    """Channel inversion z'_j / A_j; residual noise on component j is CN(0, 2 sigma_N^2 / |A_j|^2).

    `gains` is one user's GainVector or a (trials, r_k) array matching a
    batch of observations.
    """
    eps = settings.KAPPA_EPSILON if eps is None else eps
    observed = np.asarray(observed, dtype=complex)
    entries = gains.entries if isinstance(gains, GainVector) else np.asarray(gains, dtype=complex)
    if observed.shape[-1] != entries.shape[-1]:
        raise DomainError("observation and gain dimensions differ")
    if np.any(np.abs(entries) <= eps):
        raise NearSingularGainError(f"a gain component has magnitude <= {eps}")
    return observed / entries


def kappa_detect(block, channel: UserChannel, pair: tuple[Codeword, Codeword], eps: float | None = None) -> UserDecision:
    """Invert the channel, then project onto the user's codeword-difference direction."""
    z_a, z_b = pair
    inverted = kappa_decode(block, channel.gains, eps)
    diff = z_a.entries - z_b.entries
    norm = float(np.linalg.norm(diff))
    if norm == 0:
        raise AmbiguousPairError("codewords coincide")
    gamma = complex(np.vdot(diff / norm, inverted - 0.5 * (z_a.entries + z_b.entries)))
    s = 0.5 if gamma.real >= 0 else -0.5
    return UserDecision(user=channel.user, gamma=gamma, s=s, decided_index=0 if s > 0 else 1)


def simulate_user_detection(
    pair: tuple[Codeword, Codeword],
    noise_var: float,
    trials: int,
    rng,
    gain_variance: float = 1.0,
    decoder: str = "projection",
    eps: float | None = None,
) -> int:
    """Error count for one user's binary pair over CN(0, gain_variance) component gains.

    `decoder` is "projection" (matched projection, optimal) or "kappa"
    (channel inversion then projection). Trials whose gains cannot be
    inverted (some |A_j| <= eps) count as errors on the kappa path.
    """
    if decoder not in ("projection", "kappa"):
        raise DomainError(f"unknown decoder {decoder!r}")
    gen = as_generator(rng)
    z_a, z_b = pair
    r_k = z_a.d
    gains = sample_circular_gaussian(CircularGaussianSpec(gain_variance), gen, size=(trials, r_k))
    sent_b = gen.integers(0, 2, size=trials).astype(bool)
    words = np.where(sent_b[:, None], z_b.entries[None, :], z_a.entries[None, :])
    observed = transmit_block(gains, words, CircularGaussianSpec(noise_var), gen)
    midpoint = 0.5 * (z_a.entries + z_b.entries)
    diff = z_a.entries - z_b.entries
    if decoder == "projection":
        proj = np.sum(np.conj(gains * diff) * (observed - gains * midpoint), axis=1)
        return int(np.count_nonzero((proj.real < 0) != sent_b))

    eps = settings.KAPPA_EPSILON if eps is None else eps
    usable = np.all(np.abs(gains) > eps, axis=1)
    inverted = kappa_decode(observed[usable], gains[usable], eps)
    proj = np.sum(np.conj(diff) * (inverted - midpoint), axis=1)
    wrong = int(np.count_nonzero((proj.real < 0) != sent_b[usable]))
    return wrong + int(np.count_nonzero(~usable))
