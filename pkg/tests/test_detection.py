import math

import numpy as np
import pytest

from app.channel import AveragedGain
from app.detection import (
    Codebook,
    Codeword,
    GainVector,
    Heterodyne,
    Homodyne,
    collective_statistic,
    conditional_pair_error,
    count_ml_errors,
    difference_matrix,
    diversity_bound,
    exhaustive_error_rate,
    ml_decide,
    pairwise_elimination_decide,
    pairwise_error,
    parse_measurement,
    sample_codebook,
    simulate_single_detection,
    single_error_probability,
    single_statistic,
    success_bound,
    union_bound,
)
from app.errors import AmbiguousPairError, DegenerateGainError, DomainError
from app.estimation import QuadratureSelector
from app.mathcore import CircularGaussianSpec, RngStream, q_function, sample_circular_gaussian


class TestMeasurement:
    def test_parse(self):
        assert parse_measurement("hom-x") == Homodyne(QuadratureSelector.POSITION)
        assert parse_measurement("HOM-P") == Homodyne(QuadratureSelector.MOMENTUM)
        assert parse_measurement("het") == Heterodyne(1.0)
        assert parse_measurement("het:2.5") == Heterodyne(2.5)

    @pytest.mark.parametrize("text", ["hom", "het:abc", "het:0", "xyz"])
    def test_parse_invalid(self, text):
        with pytest.raises(DomainError):
            parse_measurement(text)


class TestSingleStatistic:
    def test_homodyne_sign_correction(self):
        gains = [-0.4 - 0.4j, -0.2 - 0.2j]
        a = complex(np.mean(gains))
        stat = single_statistic(a * 1.5, gains, Homodyne())
        assert stat.value == pytest.approx(abs(a.real) * 1.5)

    def test_homodyne_residual_is_quadrature_variance(self):
        stat = single_statistic(0.1, [0.5 + 0.5j], Homodyne(), noise_var=0.4)
        assert stat.residual_noise_variance == pytest.approx(0.2)

    def test_heterodyne_rotates_to_real_axis(self):
        gains = [0.3 + 0.3j]
        stat = single_statistic((0.3 + 0.3j) * 2.0, gains, Heterodyne(2.0), noise_var=0.5)
        assert stat.value == pytest.approx(abs(0.3 + 0.3j) * 2.0)
        assert stat.residual_noise_variance == pytest.approx(1.0)

    def test_degenerate_gains(self):
        with pytest.raises(DegenerateGainError):
            single_statistic(1.0, [0.5j], Homodyne(QuadratureSelector.POSITION))
        with pytest.raises(DegenerateGainError):
            single_statistic(1.0, [0.0], Heterodyne())
        with pytest.raises(DegenerateGainError):
            single_statistic(1.0, [], Heterodyne())

    def test_asymmetric_quadratures_rejected(self):
        with pytest.raises(DomainError):
            single_statistic(1.0, [0.5 + 0.5j], Homodyne(assume_symmetric=False))


class TestSingleDetection:
    GAINS = [0.5 + 0.5j, 0.3 + 0.3j]

    def test_closed_forms(self):
        sigma = math.sqrt(0.05)
        assert single_error_probability(0.4 + 0.4j, Homodyne(), 1.0, 0.1) == pytest.approx(q_function(0.4 / sigma))
        het = single_error_probability(0.4 + 0.4j, Heterodyne(2.0), 1.0, 0.1)
        assert het == pytest.approx(q_function(abs(0.4 + 0.4j) / (math.sqrt(2.0) * sigma)))

    @pytest.mark.parametrize("measurement", [Homodyne(), Homodyne(QuadratureSelector.MOMENTUM), Heterodyne(), Heterodyne(1.5)])
    def test_simulation_matches_closed_form(self, measurement, within_se):
        trials = 200_000
        errors = simulate_single_detection(self.GAINS, measurement, 1.0, 0.1, trials, RngStream(31, 0))
        analytic = single_error_probability(complex(np.mean(self.GAINS)), measurement, 1.0, 0.1)
        assert within_se(errors, trials, analytic)

    def test_heterodyne_beats_homodyne_on_diagonal_gain(self):
        a = 0.4 + 0.4j
        assert single_error_probability(a, Heterodyne(), 1.0, 0.1) < single_error_probability(a, Homodyne(), 1.0, 0.1)


@pytest.fixture
def pair():
    return Codeword(np.array([1.0 + 0.5j, -0.3j])), Codeword(np.array([-0.2 + 0.1j, 0.8]))


class TestCollectiveStatistic:
    def test_noiseless_decisions(self, pair):
        gains = GainVector(np.array([0.6 - 0.2j, 0.3 + 0.9j]))
        z_a, z_b = pair
        out_a = collective_statistic(gains.entries * z_a.entries, gains, pair)
        out_b = collective_statistic(gains.entries * z_b.entries, gains, pair)
        separation = np.linalg.norm(gains.entries * (z_a.entries - z_b.entries))
        assert out_a.decided_index == 0 and out_a.s == 0.5
        assert out_b.decided_index == 1 and out_b.s == -0.5
        assert out_a.gamma == pytest.approx(0.5 * separation)
        assert out_b.gamma == pytest.approx(-0.5 * separation)

    @pytest.mark.parametrize("d", [1, 2, 4])
    def test_agrees_with_ml_on_random_draws(self, d):
        trials = 35_000
        gen = RngStream(61, d).generator()
        gains = sample_circular_gaussian(CircularGaussianSpec(1.0), gen, size=(trials, d))
        words = sample_circular_gaussian(CircularGaussianSpec(1.0), gen, size=(trials, 2, d))
        sent = gen.integers(0, 2, size=trials)
        scale = np.sqrt(gen.exponential(1.0, size=trials))
        noise = scale[:, None] * sample_circular_gaussian(CircularGaussianSpec(1.0), gen, size=(trials, d))
        mismatches = 0
        for t in range(trials):
            gain = GainVector(gains[t])
            pair = (Codeword(words[t, 0]), Codeword(words[t, 1]))
            observed = gain.entries * pair[sent[t]].entries + noise[t]
            if collective_statistic(observed, gain, pair).decided_index != ml_decide(observed, gain, Codebook(pair)):
                mismatches += 1
        assert mismatches == 0

    @pytest.mark.parametrize("c", [0.1, 3.0])
    def test_scale_covariance(self, pair, c):
        gains = GainVector(np.array([0.6 - 0.2j, 0.3 + 0.9j]))
        scaled = gains.scaled(c)
        z_a, z_b = pair
        base = collective_statistic(gains.entries * z_a.entries, gains, pair)
        moved = collective_statistic(scaled.entries * z_a.entries, scaled, pair)
        assert moved.gamma == pytest.approx(c * base.gamma)
        assert np.linalg.norm(scaled.entries * (z_a.entries - z_b.entries)) == pytest.approx(
            c * np.linalg.norm(gains.entries * (z_a.entries - z_b.entries))
        )
        codebook = Codebook(pair)
        for index, word in enumerate(pair):
            assert ml_decide(scaled.entries * word.entries, scaled, codebook) == index

    def test_ambiguous_pair(self, pair):
        z_a, _ = pair
        with pytest.raises(AmbiguousPairError):
            collective_statistic(np.zeros(2), GainVector(np.ones(2)), (z_a, z_a))
        with pytest.raises(AmbiguousPairError):
            collective_statistic(np.zeros(2), GainVector(np.zeros(2)), pair)

    def test_gain_vector_from_averaged(self):
        gains = GainVector.from_averaged([AveragedGain(0.5 + 0.5j, 2), AveragedGain(0.1j, 3)])
        np.testing.assert_array_equal(gains.entries, [0.5 + 0.5j, 0.1j])
        assert gains.magnitude_sum == pytest.approx(abs(0.5 + 0.5j) + 0.1)


class TestMlDecision:
    def test_noiseless_recovers_sent(self):
        codebook = sample_codebook(3, 6, RngStream(2, 0))
        gains = GainVector(np.array([0.7, 0.2 + 0.5j, -0.4j]))
        for index, word in enumerate(codebook.codewords):
            observed = gains.entries * word.entries
            assert ml_decide(observed, gains, codebook) == index
            assert pairwise_elimination_decide(observed, gains, codebook) == index

    def test_tie_goes_to_lowest_index(self):
        codebook = Codebook((Codeword(np.array([1.0])), Codeword(np.array([-1.0]))))
        assert ml_decide(np.array([0.0]), GainVector(np.array([1.0])), codebook) == 0

    def test_codebook_validation(self):
        with pytest.raises(DomainError):
            Codebook((Codeword(np.ones(2)),))
        with pytest.raises(DomainError):
            Codebook((Codeword(np.ones(2)), Codeword(np.ones(2))))
        with pytest.raises(DomainError):
            Codebook((Codeword(np.ones(2)), Codeword(np.ones(3))))


class TestPairwiseError:
    def test_real_and_complex_subspaces(self, pair):
        gains = GainVector(np.array([0.5, 0.5j]))
        z_a, z_b = pair
        separation = np.linalg.norm(gains.entries * (z_a.entries - z_b.entries))
        sigma = math.sqrt(0.2 / 2)
        assert pairwise_error(gains, z_a, z_b, 0.2) == pytest.approx(q_function(separation / (2 * sigma)))
        assert pairwise_error(gains, z_a, z_b, 0.2, space="complex") == pytest.approx(
            q_function(separation / (2 * math.sqrt(2) * sigma))
        )
        with pytest.raises(DomainError):
            pairwise_error(gains, z_a, z_b, 0.2, space="other")

    def test_conditional_matches_pairwise(self, pair):
        gains = GainVector(np.array([0.5, 0.5j]))
        diff = difference_matrix(*pair)
        assert conditional_pair_error(gains, diff, 0.3) == pytest.approx(pairwise_error(gains, *pair, 0.3))

    def test_difference_matrix_singular_values(self, pair):
        diff = difference_matrix(*pair)
        z_a, z_b = pair
        np.testing.assert_allclose(
            np.linalg.svd(diff.as_matrix(), compute_uv=False) ** 2,
            np.sort(np.abs(z_a.entries - z_b.entries) ** 2)[::-1],
        )

    def test_fixed_gain_simulation(self, within_se):
        pair = (Codeword(np.array([1.0, 1.0])), Codeword(np.array([-1.0, -1.0])))
        gains = GainVector(np.array([0.5, 0.5]))
        trials = 200_000
        errors = count_ml_errors(gains, Codebook(pair), 0.5, trials, RngStream(17, 0))
        assert within_se(errors, trials, pairwise_error(gains, *pair, 0.5))


class TestDiversityBounds:
    def test_product_form(self):
        diff = difference_matrix(Codeword(np.array([1.0, 2.0])), Codeword(np.array([0.0, 0.0])))
        assert diversity_bound(diff, 4.0) == pytest.approx(1 / (1 + 1.0) * 1 / (1 + 4.0))

    def test_bound_holds_under_fading(self):
        pair = (Codeword(np.array([1.0, 1.0])), Codeword(np.array([-1.0, -1.0])))
        trials = 200_000
        errors = count_ml_errors(None, Codebook(pair), 0.25, trials, RngStream(18, 0), gain_variance=1.0)
        bound = diversity_bound(difference_matrix(*pair), 4.0)
        assert errors / trials <= bound

    @pytest.mark.parametrize("d", [1, 2, 4])
    def test_log_log_slope_is_minus_d(self, d):
        gen = RngStream(62, d).generator()
        entries = gen.uniform(0.5, 2.0, size=d) * np.exp(2j * np.pi * gen.uniform(size=d))
        diff = difference_matrix(Codeword(entries), Codeword(np.zeros(d)))
        slope = (math.log(diversity_bound(diff, 1e4)) - math.log(diversity_bound(diff, 1e3))) / math.log(10.0)
        assert slope == pytest.approx(-d, abs=0.15)

    def test_component_variance_enters_through_snr(self):
        diff = difference_matrix(Codeword(np.array([1.0, 0.5j])), Codeword(np.array([-1.0, 0.0])))
        assert diversity_bound(diff, 2.0, component_variance=3.0) == pytest.approx(diversity_bound(diff, 6.0))
        with pytest.raises(DomainError):
            diversity_bound(diff, 2.0, component_variance=0.0)

    def test_success_bound(self):
        diff = difference_matrix(Codeword(np.array([2.0, 2.0])), Codeword(np.array([0.0, 0.0])))
        assert success_bound(diff, 10.0) == pytest.approx(1 - 16 / (100 * 16))
        assert success_bound(diff, 0.5) == 0.0
        with pytest.raises(DomainError):
            success_bound(difference_matrix(Codeword(np.array([1.0, 0.0])), Codeword(np.array([0.0, 0.0]))), 1.0)

    def test_union_bound_two_codewords_is_pairwise(self, pair):
        gains = GainVector(np.array([0.5, 0.5j]))
        codebook = Codebook(pair)
        assert union_bound(codebook, noise_var=0.2, gains=gains) == pytest.approx(pairwise_error(gains, *pair, 0.2))
        assert union_bound(codebook, snr=3.0) == pytest.approx(diversity_bound(difference_matrix(*pair), 3.0))

    def test_union_bound_dominates_ml(self):
        codebook = sample_codebook(2, 4, RngStream(19, 0))
        gains = GainVector(np.array([0.6, 0.6]))
        trials = 100_000
        errors = count_ml_errors(gains, codebook, 0.2, trials, RngStream(19, 1))
        bound = union_bound(codebook, noise_var=0.2, gains=gains)
        assert errors / trials <= bound + 4.5 * math.sqrt(bound * (1 - bound) / trials)


def test_sample_codebook():
    codebook = sample_codebook(4, 3, RngStream(1, 0))
    assert (codebook.N, codebook.d) == (3, 4)
    assert codebook.matrix().shape == (3, 4)
    with pytest.raises(DomainError):
        sample_codebook(2, 1, RngStream(1, 0))


class TestExhaustiveErrorRate:
    GAINS = GainVector(np.array([0.5, 0.5j]))

    def test_rate_is_count_over_trials(self, pair):
        codebook = Codebook(pair)
        rate = exhaustive_error_rate(self.GAINS, codebook, 0.4, None, 5000, RngStream(3, 0))
        assert rate == count_ml_errors(self.GAINS, codebook, 0.4, 5000, RngStream(3, 0)) / 5000
        assert 0.0 <= rate <= 1.0

    def test_snr_sets_noise_variance(self, pair):
        codebook = Codebook(pair)
        by_snr = exhaustive_error_rate(self.GAINS, codebook, None, 2.5, 5000, RngStream(3, 1))
        by_noise = exhaustive_error_rate(self.GAINS, codebook, 0.4, None, 5000, RngStream(3, 1))
        assert by_snr == by_noise

    def test_exactly_one_noise_source(self, pair):
        codebook = Codebook(pair)
        with pytest.raises(DomainError):
            exhaustive_error_rate(self.GAINS, codebook, None, None, 10, RngStream(0, 0))
        with pytest.raises(DomainError):
            exhaustive_error_rate(self.GAINS, codebook, 0.4, 2.5, 10, RngStream(0, 0))
