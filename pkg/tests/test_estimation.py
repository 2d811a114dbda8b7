import math

import numpy as np
import pytest

from app.channel import ChannelModel, FadingModel, draw_gain_matrix, transmit_block
from app.errors import DomainError
from app.estimation import (
    PilotSymbol,
    PilotVector,
    QuadratureSelector,
    Statistic,
    complex_snr,
    conditional_error,
    deep_fade_exact,
    deep_fade_probability,
    linear_estimate,
    mmse_coefficients,
    mmse_estimate,
    pilot_error_high_snr,
    pilot_error_probability,
    quadrature_noise_ratio,
    scalar_statistic,
    scaled_snr,
    simulate_pilot_detection,
    single_carrier_pilot,
    vector_statistic,
)
from app.mathcore import CircularGaussianSpec, RngStream, chi2_2l_cdf, q_function, unitary_dft


class TestStatistics:
    def test_scalar_statistic_noiseless_returns_gain(self):
        pilot = PilotSymbol(1 + 1j)
        gain = 0.3 - 0.2j
        stat = scalar_statistic(pilot, gain * pilot.value, noise_var=0.5)
        assert stat.value == pytest.approx(gain)
        assert stat.residual_noise_variance == pytest.approx(0.25)

    def test_vector_statistic_noiseless_returns_gain(self):
        pilots = PilotVector((1.0, 1j, -0.5))
        gain = 0.4 + 0.1j
        stat = vector_statistic(pilots, gain * pilots.as_array(), noise_var=1.0)
        assert stat.value == pytest.approx(gain)
        assert stat.residual_noise_variance == pytest.approx(1.0 / pilots.energy)

    def test_vector_statistic_shape_check(self):
        with pytest.raises(DomainError):
            vector_statistic(PilotVector.uniform(1.0, 3), np.ones(2), 1.0)

    def test_zero_pilot_rejected(self):
        with pytest.raises(DomainError):
            PilotSymbol(0j)
        with pytest.raises(DomainError):
            PilotVector((0.0, 0.0))


class TestMmse:
    def test_shrinkage_and_error(self):
        est = mmse_estimate(Statistic(1.0 + 0j, 0.5), prior_variance=1.0, pilot_energy=2.0, noise_var=1.0)
        assert est.value == pytest.approx(2.0 / 3.0)
        assert est.mmse == pytest.approx(1.0 / 3.0)

    def test_noiseless_is_identity(self):
        est = mmse_estimate(Statistic(0.7 - 0.1j, 0.0), prior_variance=1.0, pilot_energy=4.0, noise_var=0.0)
        assert est.value == pytest.approx(0.7 - 0.1j)
        assert est.mmse == 0.0

    def test_degenerate_prior(self):
        est = mmse_estimate(Statistic(1.0, 0.0), prior_variance=0.0, pilot_energy=1.0, noise_var=0.0)
        assert est.value == 0j

    def test_coefficients_match_statistic_path(self):
        pilots = PilotVector((1 + 1j, 0.5, -1j))
        observed = np.array([0.2 + 0.3j, -0.1j, 0.5])
        c = mmse_coefficients(pilots, prior_variance=1.5, noise_var=0.8)
        via_statistic = mmse_estimate(vector_statistic(pilots, observed, 0.8), 1.5, pilots.energy, 0.8)
        assert linear_estimate(c, observed) == pytest.approx(via_statistic.value)

    def test_quadrature_noise_ratio(self):
        pilots = PilotVector((1.0, 1.0))
        ratio = quadrature_noise_ratio(pilots.as_array(), pilots, 0.5, 0.25)
        assert ratio == pytest.approx(4.0)
        with pytest.raises(DomainError):
            quadrature_noise_ratio([1j, 1j], pilots, 0.5, 0.25, QuadratureSelector.POSITION)


def _pilot_trials(prior, pilot, noise_var, trials, seed):
    """Fading gains, their pilot outputs and the scalar statistics of one batch."""
    gen = RngStream(seed, 0).generator()
    channel = ChannelModel(FadingModel(prior), CircularGaussianSpec(noise_var), n=1)
    gains = draw_gain_matrix(channel, gen, trials)[:, 0]
    observed = transmit_block(gains, np.full(trials, pilot.value), channel.noise, gen)
    return gains, scalar_statistic(pilot, observed, noise_var)


class TestMmseStatistics:
    def test_error_is_orthogonal_to_statistic(self):
        pilot = PilotSymbol(1 + 1j)
        gains, stat = _pilot_trials(1.0, pilot, 1.0, 400_000, seed=71)
        est = mmse_estimate(stat, 1.0, pilot.energy, 1.0)
        product = (est.value - gains) * np.conj(stat.value)
        se = np.std(product) / math.sqrt(product.size)
        assert abs(np.mean(product)) <= 4.5 * se

    def test_unshrunk_statistic_is_not_orthogonal(self):
        pilot = PilotSymbol(1 + 1j)
        gains, stat = _pilot_trials(1.0, pilot, 1.0, 400_000, seed=72)
        product = (stat.value - gains) * np.conj(stat.value)
        # E|F'(Delta)|^2 = noise_var / |p|^2
        assert np.mean(product).real == pytest.approx(0.5, rel=0.02)

    @pytest.mark.parametrize("prior", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("noise_var", [2.0, 1.0, 0.25])
    def test_empirical_mse_matches_mmse(self, prior, noise_var):
        pilot = PilotSymbol(1.0)
        gains, stat = _pilot_trials(prior, pilot, noise_var, 200_000, seed=73)
        est = mmse_estimate(stat, prior, pilot.energy, noise_var)
        assert np.mean(np.abs(est.value - gains) ** 2) == pytest.approx(est.mmse, rel=0.02)


def test_snr_helpers():
    assert complex_snr(4.0, 2.0) == 2.0
    assert scaled_snr(2.0) == 1.0
    with pytest.raises(DomainError):
        complex_snr(1.0, 0.0)


def test_single_carrier_pilot_is_dft():
    p = np.array([1.0, 1j, -1.0, 0.5])
    np.testing.assert_allclose(single_carrier_pilot(p), unitary_dft(p))


def test_quadrature_selector():
    assert QuadratureSelector.POSITION.take(1 + 2j) == 1.0
    assert QuadratureSelector.MOMENTUM.take(1 + 2j) == 2.0
    assert QuadratureSelector("p") is QuadratureSelector.MOMENTUM


class TestPilotErrorProbability:
    @pytest.mark.parametrize("snr", [0.1, 1.0, 10.0, 1e4])
    def test_single_branch_closed_form(self, snr):
        expected = 0.5 * (1.0 - math.sqrt(snr / (1.0 + snr)))
        assert pilot_error_probability(1, snr) == pytest.approx(expected, rel=1e-9)

    def test_decreases_with_diversity(self):
        values = [pilot_error_probability(l, 2.0) for l in range(1, 9)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_decreases_with_snr(self):
        values = [pilot_error_probability(3, s) for s in (0.5, 1.0, 4.0, 16.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_no_underflow_at_high_snr(self):
        p = pilot_error_probability(4, 1e8)
        assert 0.0 < p < 1e-20

    @pytest.mark.parametrize("l", [1, 2, 3, 5])
    def test_high_snr_asymptote(self, l):
        snr = 1e4
        assert pilot_error_high_snr(l, snr) == pytest.approx(pilot_error_probability(l, snr), rel=1e-2)

    def test_high_snr_needs_snr_above_one(self):
        with pytest.raises(DomainError):
            pilot_error_high_snr(2, 1.0)

    @pytest.mark.parametrize("l,snr", [(0, 1.0), (2, 0.0), (2, -1.0)])
    def test_domain(self, l, snr):
        with pytest.raises(DomainError):
            pilot_error_probability(l, snr)

    def test_conditional_error(self):
        assert conditional_error(2.0, 0.5) == pytest.approx(q_function(math.sqrt(2.0)))
        with pytest.raises(DomainError):
            conditional_error(-1.0, 1.0)


class TestDeepFade:
    def test_exact_is_chi_square_cdf(self):
        assert deep_fade_exact(3, 5.0) == pytest.approx(chi2_2l_cdf(0.2, 3))

    def test_single_branch_gap_within_six_percent(self):
        exact = deep_fade_exact(1, 10.0)
        assert abs(deep_fade_probability(1, 10.0) - exact) / exact < 0.06

    @pytest.mark.parametrize("l", [1, 2, 3, 4])
    def test_approximation_gap_is_leading_order(self, l):
        # relative gap of x^l/l! against P(l, x) is l x/(l + 1) to first order
        snr = 10.0
        exact = deep_fade_exact(l, snr)
        approx = deep_fade_probability(l, snr)
        assert approx > exact
        assert (approx - exact) / exact <= 1.1 * l / ((l + 1) * snr)

    def test_gap_shrinks_with_snr(self):
        gaps = [abs(deep_fade_probability(2, s) - deep_fade_exact(2, s)) / deep_fade_exact(2, s) for s in (10, 100, 1000)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_clamped(self):
        assert deep_fade_probability(1, 0.5) == 1.0


class TestSimulation:
    @pytest.mark.parametrize("l,snr", [(1, 4.0), (2, 2.0), (4, 0.5)])
    def test_matches_closed_form(self, l, snr, within_se):
        trials = 200_000
        counts = simulate_pilot_detection(l, snr, trials, RngStream(101, 0, (l,)))
        assert counts.trials == trials
        assert within_se(counts.errors, trials, pilot_error_probability(l, snr))
        assert within_se(counts.deep_fades, trials, deep_fade_exact(l, snr))

    def test_gain_variance_scales_snr(self, within_se):
        trials = 200_000
        counts = simulate_pilot_detection(2, 1.0, trials, RngStream(102, 0), gain_variance=3.0)
        assert within_se(counts.errors, trials, pilot_error_probability(2, 3.0))

    def test_reproducible(self):
        a = simulate_pilot_detection(2, 1.0, 1000, RngStream(5, 0))
        b = simulate_pilot_detection(2, 1.0, 1000, RngStream(5, 0))
        assert a == b

    def test_bad_gain_variance(self):
        with pytest.raises(DomainError):
            simulate_pilot_detection(2, 1.0, 10, RngStream(5, 0), gain_variance=0.0)
