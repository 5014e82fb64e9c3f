import numpy as np
import pytest

from driftkit.stats import (
    BandwidthError,
    BinMismatch,
    PermutationCountError,
    TooFewSamples,
    _center,
    _hsic_exceedances,
    _hsic_grams,
    hellinger,
    hsic,
    hsic_from_grams,
    hsic_test,
    median_bandwidth,
    mmd2_test,
    mutual_information,
    rbf_gram,
    time_dependency_score,
)


class TestRbfGram:
    def test_identical_rows_give_all_ones(self):
        x = np.ones((5, 3))
        assert np.allclose(rbf_gram(x, 2.0), 1.0)

    def test_closed_form_off_diagonal(self):
        bw = 1.7
        x = np.array([[0.0], [bw * np.sqrt(2.0)]])
        gram = rbf_gram(x, bw)
        assert gram[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert gram[0, 0] == 1.0

    def test_median_heuristic_on_three_points(self):
        # pairwise distances {1, 1, 2}: median 1
        assert median_bandwidth(np.array([0.0, 1.0, 2.0])) == 1.0

    def test_constant_data_falls_back_to_unit_bandwidth(self):
        assert median_bandwidth(np.zeros(10)) == 1.0

    def test_nonpositive_bandwidth_rejected(self):
        with pytest.raises(BandwidthError):
            rbf_gram(np.zeros((3, 1)), 0.0)


class TestHsic:
    def test_constant_samples_give_zero(self):
        assert abs(hsic(np.zeros(20), np.arange(20.0))) <= 1e-12

    def test_equal_series_give_positive_statistic(self):
        t = np.arange(8.0)
        assert hsic(t, t) > 1e-3

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            hsic(np.zeros(3), np.zeros(3))

    def test_independent_data_stays_inside_permutation_band(self):
        rng = np.random.default_rng(99)
        in_band = 0
        trials = 100
        for _ in range(trials):
            x = rng.normal(size=(200, 1))
            t = np.arange(200) / 200
            k, l = _hsic_grams(x, t)
            kc, lc = _center(k), _center(l)
            observed = float(np.sum(kc * lc)) / 200**2
            perms = np.array([rng.permutation(200) for _ in range(40)])
            null = np.array(
                [np.sum(kc * lc[np.ix_(p, p)]) / 200**2 for p in perms]
            )
            lo, hi = np.quantile(null, [0.025, 0.975])
            in_band += lo <= observed <= hi
        assert in_band >= 0.90 * trials

    def test_gram_argument_order_is_symmetric(self):
        rng = np.random.default_rng(3)
        k = rbf_gram(rng.normal(size=(30, 2)), 1.0)
        l = rbf_gram(rng.normal(size=(30, 1)), 0.7)
        assert hsic_from_grams(k, l) == pytest.approx(
            hsic_from_grams(l, k), abs=1e-10
        )

    def test_invariant_under_joint_row_permutation(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(40, 2))
        t = np.sort(rng.uniform(size=40))
        perm = rng.permutation(40)
        assert hsic(x, t) == pytest.approx(hsic(x[perm], t[perm]), abs=1e-10)


class TestHsicTest:
    def test_perfect_dependence_rejects(self):
        t = np.arange(50.0)
        result = hsic_test(t, t, n_perm=200, seed=0)
        assert result.p_value <= 0.01

    def test_constant_samples_tie_all_permutations(self):
        t = np.arange(20.0)
        result = hsic_test(np.zeros(20), t, n_perm=100, seed=0)
        assert result.p_value >= 0.5

    def test_null_rejection_rate_is_calibrated(self):
        rng = np.random.default_rng(12)
        alpha = 0.05
        rejections = 0
        trials = 500
        for trial in range(trials):
            x = rng.normal(size=(24, 1))
            t = np.arange(24) / 24
            result = hsic_test(x, t, n_perm=199, seed=trial)
            rejections += result.p_value < alpha
        rate = rejections / trials
        assert rate == pytest.approx(alpha, abs=0.02)
        # stochastically >= uniform under the null
        assert rate <= alpha + 3 * np.sqrt(alpha * (1 - alpha) / trials)

    def test_preconditions(self):
        with pytest.raises(TooFewSamples):
            hsic_test(np.zeros(5), np.arange(5.0))
        with pytest.raises(PermutationCountError):
            hsic_test(np.zeros(20), np.arange(20.0), n_perm=10)


class TestMmd2:
    def test_identical_samples_give_zero(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(20, 2))
        result = mmd2_test(x, x, n_perm=50, seed=0)
        assert abs(result.statistic) <= 1e-12

    def test_separated_means_reject(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0.0, 1.0, size=(100, 1))
        y = rng.normal(3.0, 1.0, size=(100, 1))
        assert mmd2_test(x, y, n_perm=200, seed=0).p_value <= 0.01

    def test_statistic_invariant_under_swap(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 2))
        y = rng.normal(0.5, 1.0, size=(30, 2))
        a = mmd2_test(x, y, n_perm=50, seed=0).statistic
        b = mmd2_test(y, x, n_perm=50, seed=0).statistic
        assert a == pytest.approx(b, abs=1e-12)

    def test_null_rejection_rate_is_calibrated(self):
        rng = np.random.default_rng(1013)
        alpha = 0.05
        rejections = 0
        trials = 1000
        for trial in range(trials):
            x = rng.normal(size=(30, 1))
            y = rng.normal(size=(30, 1))
            rejections += (
                mmd2_test(x, y, n_perm=199, seed=1000 + trial).p_value < alpha
            )
        rate = rejections / trials
        assert rate == pytest.approx(alpha, abs=0.02)
        assert rate <= alpha + 3 * np.sqrt(alpha * (1 - alpha) / trials)

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            mmd2_test(np.zeros((3, 1)), np.zeros((10, 1)))


class TestHellinger:
    def test_equal_histograms_give_zero(self):
        h = np.array([0.2, 0.3, 0.5])
        assert hellinger(h, h) == 0.0

    def test_disjoint_supports_give_one(self):
        assert hellinger([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-12)

    def test_hand_evaluated_value(self):
        # sqrt(0.5 * ((sqrt(0.5) - 1)^2 + 0.5)) = 0.5411961...
        expected = np.sqrt(0.5 * ((np.sqrt(0.5) - 1.0) ** 2 + 0.5))
        assert hellinger([0.5, 0.5], [1.0, 0.0]) == pytest.approx(
            expected, abs=1e-12
        )
        assert expected == pytest.approx(0.5411961, abs=1e-6)

    def test_bin_mismatch(self):
        with pytest.raises(BinMismatch):
            hellinger([1.0], [0.5, 0.5])

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            h1, h2, h3 = rng.dirichlet(np.ones(6), size=3)
            d12 = hellinger(h1, h2)
            d13 = hellinger(h1, h3)
            d23 = hellinger(h2, h3)
            assert d12 == pytest.approx(hellinger(h2, h1), abs=1e-12)
            assert d12 <= d13 + d23 + 1e-10


class TestMutualInformation:
    def test_independent_series_scores_low(self):
        for seed in range(3):
            rng = np.random.default_rng(seed)
            s = rng.normal(size=1000)
            t = np.arange(1000) / 1000
            assert mutual_information(s, t) <= 0.1

    def test_identity_series_scores_high(self):
        t = np.arange(1000) / 1000
        assert mutual_information(t, t) >= 1.5

    def test_constant_series_scores_zero(self):
        t = np.arange(100) / 100
        assert mutual_information(np.zeros(100), t) == 0.0

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            mutual_information(np.zeros(10), np.zeros(10))


class TestTimeDependencyScore:
    def test_time_as_feature_scores_high(self):
        t = np.arange(300) / 300
        assert time_dependency_score(t[:, None], t) >= 0.95

    def test_pure_noise_scores_low(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(1000, 2))
        t = np.arange(1000) / 1000
        assert time_dependency_score(x, t) <= 0.1

    def test_invariant_under_affine_time_rescaling(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(200, 2))
        x[:, 0] += np.linspace(0, 2, 200)
        t = np.arange(200) / 200
        a = time_dependency_score(x, t)
        b = time_dependency_score(x, 1000.0 + 50.0 * t)
        assert a == pytest.approx(b, abs=1e-10)

    def test_constant_time_scores_zero(self):
        assert time_dependency_score(np.arange(30.0)[:, None], np.ones(30)) == 0.0

    def test_preconditions(self):
        with pytest.raises(TooFewSamples):
            time_dependency_score(np.zeros((5, 1)), np.zeros(5), k=5)


class TestEarlyStopDecision:
    def test_matches_full_test_decision(self):
        # early-stopped exceedance counting must agree with the full count
        rng = np.random.default_rng(55)
        for trial in range(30):
            x = rng.normal(size=(40, 1))
            t = np.arange(40) / 40
            if trial % 3 == 0:
                x[:, 0] += 3.0 * t  # dependent cases too
            k, l = _hsic_grams(x, t)
            kc, lc = _center(k), _center(l)
            observed = float(np.sum(kc * lc))
            full = _hsic_exceedances(
                kc, lc, observed, 99, np.random.default_rng(trial)
            )
            stopped = _hsic_exceedances(
                kc, lc, observed, 99, np.random.default_rng(trial), stop_after=0
            )
            assert (full <= 0) == (stopped <= 0)
