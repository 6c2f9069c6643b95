"""Evaluation metrics: PSNR, matching, tuple posteriors, TV, MMD, reports."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from basis_sep.core import (
    NoiseSchedule,
    Signal,
    UnsupportedSizeError,
    geometric_schedule,
    signal_from_array,
)
from basis_sep.metrics import (
    PSNR_CAP_DB,
    MetricReport,
    TuplePosterior,
    empirical_tuple_distribution,
    grad_proportionality_experiment,
    log_density_report,
    match_components,
    mmd_rbf,
    psnr,
    reconstruction_error,
    snap_components,
    summarize_separation,
    tuple_posterior_oracle,
    tv_distance,
)
from basis_sep.priors import EmpiricalDiracPrior, GmmPrior, IsotropicGaussianPrior
from basis_sep.sampler import ComponentSet
from basis_sep.tasks import MixtureCase, linear_sum, mix


def signals(*rows):
    return [signal_from_array(np.asarray(r, dtype=float)) for r in rows]


def component_set(*rows):
    return ComponentSet.from_signals(signals(*rows))


class TestPsnr:
    def test_hand_computed_value(self):
        # MSE = 0.25 against a unit peak: 10*log10(1/0.25)
        assert psnr(np.zeros(4), np.full(4, 0.5)) == pytest.approx(
            10 * np.log10(4.0), rel=1e-12
        )

    def test_peak_parameter(self):
        a, b = np.zeros(4), np.full(4, 0.5)
        assert psnr(a, b, peak=2.0) == pytest.approx(psnr(a, b) + 20 * np.log10(2.0))

    def test_identical_inputs_hit_cap(self):
        x = np.random.default_rng(0).random(16)
        assert psnr(x, x.copy()) == PSNR_CAP_DB

    def test_monotone_in_error(self):
        truth = np.zeros(8)
        assert psnr(truth, np.full(8, 0.1)) > psnr(truth, np.full(8, 0.2))

    def test_accepts_signals(self):
        a, b = signals([0.0, 0.0], [0.5, 0.5])
        assert psnr(a, b) == psnr(a.data, b.data)

    def test_validation(self):
        with pytest.raises(ValueError, match="size"):
            psnr(np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError, match="peak"):
            psnr(np.zeros(3), np.zeros(3), peak=0.0)


class TestMatchComponents:
    def test_recovers_permutation(self):
        truth = component_set([0.0, 0.0], [1.0, 1.0], [2.0, 2.0])
        est = component_set([2.1, 1.9], [0.05, -0.05], [1.0, 1.1])
        perm = match_components(est, truth)
        # est[perm[i]] pairs with truth[i]: truth 0 -> est 1, 1 -> est 2, 2 -> est 0
        assert perm == (1, 2, 0)

    def test_swapped_estimates(self):
        truth = component_set([0.0, 0.0], [1.0, 1.0])
        est = component_set([1.0, 1.0], [0.0, 0.0])
        assert match_components(est, truth) == (1, 0)

    def test_tie_keeps_lexicographic_first(self):
        truth = component_set([0.0], [1.0])
        est = component_set([0.5], [0.5])
        assert match_components(est, truth) == (0, 1)

    def test_size_limit(self):
        many = component_set(*[[float(i)] for i in range(5)])
        with pytest.raises(UnsupportedSizeError):
            match_components(many, many)

    def test_k_mismatch(self):
        with pytest.raises(ValueError, match="agree"):
            match_components(component_set([0.0]), component_set([0.0], [1.0]))


class TestReconstructionError:
    def test_values(self):
        op = linear_sum([1.0, 1.0], (2,))
        comps = component_set([1.0, 2.0], [3.0, 4.0])
        m = signal_from_array([4.0, 6.5])
        max_abs, mean_sq = reconstruction_error(m, comps, op)
        assert max_abs == pytest.approx(0.5)
        assert mean_sq == pytest.approx(0.125)

    def test_exact_mixture_is_zero(self):
        op = linear_sum([0.5, 0.5], (3,))
        comps = component_set([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
        m = mix(comps, op)
        assert reconstruction_error(m, comps, op) == (0.0, 0.0)

    def test_shape_validation(self):
        op = linear_sum([1.0, 1.0], (2,))
        comps = component_set([1.0, 2.0], [3.0, 4.0])
        with pytest.raises(ValueError, match="shape"):
            reconstruction_error(signal_from_array([1.0, 2.0, 3.0]), comps, op)


class TestTuplePosteriorOracle:
    def brute_force(self, dataset, m, alpha, gamma2, sigma2):
        rows = [np.asarray(s.data, dtype=float) for s in dataset]
        n, k = len(rows), len(alpha)
        var = gamma2 + sigma2 * float(np.sum(np.square(alpha)))
        logs = []
        for tup in itertools.product(range(n), repeat=k):
            mixed = sum(a * rows[i] for a, i in zip(alpha, tup))
            logs.append(-float(np.sum((mixed - m.data) ** 2)) / (2 * var))
        logs = np.array(logs)
        w = np.exp(logs - logs.max())
        return w / w.sum()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        dataset = signals(*[rng.normal(size=3) for _ in range(4)])
        m = signal_from_array(rng.normal(size=3))
        alpha = np.array([0.6, 0.4])
        post = tuple_posterior_oracle(dataset, m, alpha, gamma2=0.01, sigma2=0.05)
        assert post.probs.shape == (16,)
        assert post.tuples.shape == (16, 2)
        assert_allclose(post.probs,
                        self.brute_force(dataset, m, alpha, 0.01, 0.05),
                        rtol=1e-12)
        assert post.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_tuple_order_is_row_major(self):
        # All mass on the pair (row 2, row 0): flat index 2 * n + 0.
        dataset = signals([0.0], [5.0], [1.0])
        m = signal_from_array([1.0])  # alpha = (1, 0.5): 1*1.0 + 0.5*0.0
        alpha = np.array([1.0, 0.5])
        post = tuple_posterior_oracle(dataset, m, alpha, gamma2=1e-8, sigma2=0.0)
        assert tuple(post.tuples[6]) == (2, 0)
        assert int(np.argmax(post.probs)) == 6
        assert post.probs[6] > 0.999

    def test_collision_ties_are_exact_at_any_noise(self):
        """Pairs summing to the same mixture stay exactly tied as noise grows."""
        dataset = signals([0.0, 1.0], [1.0, 0.0])
        m = signal_from_array([1.0, 1.0])
        alpha = np.array([1.0, 1.0])
        for sigma2 in (0.0, 0.01, 1.0):
            post = tuple_posterior_oracle(dataset, m, alpha, 1e-6, sigma2)
            # (0,1) and (1,0) both hit m exactly; (0,0) and (1,1) do not
            assert post.probs[1] == pytest.approx(post.probs[2], rel=1e-12)
            assert post.probs[0] == pytest.approx(post.probs[3], rel=1e-12)
            assert post.probs[1] > post.probs[0]
        tight = tuple_posterior_oracle(dataset, m, alpha, 1e-6, 0.0)
        assert tight.probs[1] == pytest.approx(0.5, abs=1e-9)

    def test_variance_combines_gamma2_and_sigma2(self):
        dataset = signals([0.0], [1.0])
        m = signal_from_array([0.3])
        alpha = np.array([1.0, 1.0])
        # gamma2=a alone must equal gamma2=a/2 plus sigma2=a/4 (sum alpha^2 = 2)
        a = 0.08
        p1 = tuple_posterior_oracle(dataset, m, alpha, a, 0.0).probs
        p2 = tuple_posterior_oracle(dataset, m, alpha, a / 2, a / 4).probs
        assert_allclose(p1, p2, rtol=1e-12)

    def test_size_cap(self):
        dataset = signals(*[[float(i)] for i in range(101)])
        with pytest.raises(UnsupportedSizeError, match="limit"):
            tuple_posterior_oracle(dataset, signal_from_array([0.0]),
                                   np.array([1.0] * 3), 0.01, 0.0)

    def test_parameter_validation(self):
        dataset = signals([0.0], [1.0])
        with pytest.raises(ValueError, match="gamma2"):
            tuple_posterior_oracle(dataset, signal_from_array([0.0]),
                                   np.array([1.0, 1.0]), 0.0, 0.0)


class TestTuplePosterior:
    def test_probability_validation(self):
        universe = np.array([[0], [1]])
        with pytest.raises(ValueError, match="sum"):
            TuplePosterior(universe, np.array([0.5, 0.4]))
        with pytest.raises(ValueError, match="length"):
            TuplePosterior(universe, np.array([0.5, 0.25, 0.25]))
        with pytest.raises(ValueError, match="non-negative"):
            TuplePosterior(universe, np.array([1.5, -0.5]))


class TestSnapAndEmpiricalDistribution:
    def test_snap_to_nearest_rows(self):
        dataset = signals([0.0, 0.0], [1.0, 1.0])
        comps = component_set([0.1, -0.1], [0.8, 1.2])
        assert snap_components(comps, dataset) == (0, 1)

    def test_snap_tie_goes_to_lowest_index(self):
        dataset = signals([0.0], [1.0])
        comps = component_set([0.5])
        assert snap_components(comps, dataset) == (0,)

    def test_empirical_distribution_counts(self):
        snapped = [(0, 1), (0, 1), (1, 0)]
        dist = empirical_tuple_distribution(snapped, n=2, k=2)
        assert_allclose(dist.probs, [0.0, 2 / 3, 1 / 3, 0.0])
        assert tuple(dist.tuples[1]) == (0, 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            empirical_tuple_distribution([], n=2, k=2)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="universe"):
            empirical_tuple_distribution([(0, 2)], n=2, k=2)


class TestTvDistance:
    def universe(self):
        return np.array([[0, 0], [0, 1], [1, 0], [1, 1]])

    def test_axioms(self):
        p = TuplePosterior(self.universe(), np.array([0.7, 0.3, 0.0, 0.0]))
        q = TuplePosterior(self.universe(), np.array([0.0, 0.0, 0.3, 0.7]))
        assert tv_distance(p, p) == 0.0
        assert tv_distance(p, q) == pytest.approx(1.0)
        assert tv_distance(p, q) == tv_distance(q, p)

    def test_hand_value(self):
        p = TuplePosterior(self.universe(), np.array([0.5, 0.5, 0.0, 0.0]))
        q = TuplePosterior(self.universe(), np.full(4, 0.25))
        assert tv_distance(p, q) == pytest.approx(0.5)

    def test_mismatched_universes(self):
        p = TuplePosterior(self.universe(), np.full(4, 0.25))
        r = TuplePosterior(np.arange(9).reshape(9, 1) % 3, np.full(9, 1 / 9))
        with pytest.raises(ValueError, match="universes"):
            tv_distance(p, r)

    def test_oracle_agrees_with_itself(self):
        rng = np.random.default_rng(1)
        dataset = signals(*[rng.normal(size=2) for _ in range(3)])
        m = signal_from_array(rng.normal(size=2))
        post = tuple_posterior_oracle(dataset, m, np.array([1.0, 1.0]), 0.05, 0.01)
        assert tv_distance(post, post) == 0.0


class TestMmd:
    def test_same_distribution_is_near_zero(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(400, 2))
        b = rng.normal(size=(400, 2))
        assert abs(mmd_rbf(a, b)) < 0.01

    def test_separated_distributions_score_higher(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(300, 2))
        near = rng.normal(size=(300, 2)) + 0.3
        far = rng.normal(size=(300, 2)) + 3.0
        assert mmd_rbf(a, far) > mmd_rbf(a, near) > abs(mmd_rbf(a, a.copy()))

    def test_unbiased_estimate_can_be_negative(self):
        rng = np.random.default_rng(7)
        vals = [mmd_rbf(rng.normal(size=(20, 1)), rng.normal(size=(20, 1)))
                for _ in range(200)]
        assert min(vals) < 0.0

    def test_bandwidth_override(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(50, 2)), rng.normal(size=(50, 2)) + 1.0
        assert mmd_rbf(a, b, bandwidth=0.5) != mmd_rbf(a, b, bandwidth=5.0)

    def test_validation(self):
        with pytest.raises(ValueError, match="two"):
            mmd_rbf(np.zeros((1, 2)), np.zeros((5, 2)))
        with pytest.raises(ValueError, match="dimension"):
            mmd_rbf(np.zeros((5, 2)), np.zeros((5, 3)))
        with pytest.raises(ValueError, match="bandwidth"):
            mmd_rbf(np.zeros((5, 2)), np.ones((5, 2)), bandwidth=-1.0)


class TestGradProportionality:
    def test_gaussian_prior_matches_analytic_curve(self):
        """Isotropic Gaussian: sigma * RMS score = sqrt(d) * sigma / sqrt(v + sigma^2)."""
        v, d = 0.25, 16
        prior = IsotropicGaussianPrior(0.0, v, (d,))
        schedule = geometric_schedule(1.0, 0.05, 6)
        values = grad_proportionality_experiment(prior, schedule, 4000,
                                                 np.random.default_rng(0))
        assert values.shape == (6,)
        expected = np.sqrt(d) * schedule.sigmas / np.sqrt(v + schedule.sigmas**2)
        assert_allclose(values, expected, rtol=0.05)

    def test_dirac_prior_plateaus_at_sqrt_d(self):
        d = 9
        rows = np.random.default_rng(3).normal(size=(12, d))
        prior = EmpiricalDiracPrior(rows)
        schedule = NoiseSchedule(np.geomspace(1.0, 0.02, 6))
        values = grad_proportionality_experiment(prior, schedule, 2000,
                                                 np.random.default_rng(1),
                                                 dataset=rows)
        # at small sigma each perturbed point sees one spike: ratio -> sqrt(d)
        assert values[-1] == pytest.approx(np.sqrt(d), rel=0.05)

    def test_dataset_required_without_sampling(self):
        from basis_sep.scorenet import ScoreNet, ScoreNetPrior

        schedule = geometric_schedule(1.0, 0.1, 2)
        prior = ScoreNetPrior(ScoreNet.initialize(2, 2, seed=0), schedule)
        with pytest.raises(ValueError, match="dataset"):
            grad_proportionality_experiment(prior, schedule, 10,
                                            np.random.default_rng(0))

    def test_sample_count_validation(self):
        prior = IsotropicGaussianPrior(0.0, 1.0, (2,))
        with pytest.raises(ValueError, match="samples_per_level"):
            grad_proportionality_experiment(prior, geometric_schedule(1.0, 0.1, 2),
                                            0, np.random.default_rng(0))


class TestLogDensityReport:
    def test_posterior_samples_beat_distant_points(self):
        prior = GmmPrior(np.array([0.5, 0.5]),
                         np.array([[-1.0, 0.0], [1.0, 0.0]]),
                         np.array([0.01, 0.01]), (2,))
        rng = np.random.default_rng(0)
        good = [ComponentSet.from_signals(
                    [signal_from_array(prior.sample(0.05, 1, rng)[0])])
                for _ in range(40)]
        test_set = [signal_from_array(prior.sample(0.0, 1, rng)[0])
                    for _ in range(40)]
        mean_out, mean_test = log_density_report(prior, good, test_set, 0.05)
        assert mean_out == pytest.approx(mean_test, abs=3.0)
        bad = [ComponentSet.from_signals([signal_from_array([8.0, 8.0])])
               for _ in range(40)]
        mean_bad, _ = log_density_report(prior, bad, test_set, 0.05)
        assert mean_bad < mean_out - 100

    def test_empty_outputs_rejected(self):
        prior = IsotropicGaussianPrior(0.0, 1.0, (2,))
        with pytest.raises(ValueError, match="non-empty"):
            log_density_report(prior, [], np.zeros((3, 2)), 0.1)


class TestSummarizeSeparation:
    def make_case(self, rng, op):
        truth = ComponentSet.from_signals(signals(rng.random(4), rng.random(4)))
        return MixtureCase(mixture=mix(truth, op), ground_truth=truth,
                           pairing="class-agnostic", source_indices=(0, 1))

    def test_report_fields_and_histogram(self):
        rng = np.random.default_rng(0)
        op = linear_sum([0.5, 0.5], (4,))
        cases = [self.make_case(rng, op) for _ in range(5)]
        estimates = []
        for case in cases:
            noisy = case.ground_truth.components + 0.01 * rng.normal(size=(2, 4))
            estimates.append(ComponentSet.from_signals(
                [signal_from_array(row) for row in noisy]))
        report = summarize_separation(cases, estimates, op)
        assert report.case_count == 5
        assert report.per_case_psnr.shape == (5,)
        assert report.psnr_bin_counts.sum() == 5
        assert report.psnr_per_component_mean == pytest.approx(
            float(np.mean(report.per_case_psnr)))
        assert report.recon_max_abs.shape == (5,)
        assert float(report.recon_max_abs.max()) < 0.2
        assert report.oracle_tv is None and report.mmd is None

    def test_matching_is_applied_before_scoring(self):
        op = linear_sum([0.5, 0.5], (4,))
        truth = component_set([0.0] * 4, [1.0] * 4)
        case = MixtureCase(mixture=mix(truth, op), ground_truth=truth,
                           pairing="class-agnostic", source_indices=(0, 1))
        swapped = component_set([1.0] * 4, [0.0] * 4)
        report = summarize_separation([case], [swapped], op)
        assert report.per_case_psnr[0] == PSNR_CAP_DB

    def test_zero_cases_gives_zero_count_report(self):
        op = linear_sum([0.5, 0.5], (4,))
        report = summarize_separation([], [], op)
        assert report.case_count == 0
        assert report.per_case_psnr.size == 0
        assert report.psnr_per_component_mean == 0.0
        assert report.psnr_bin_counts.sum() == 0

    def test_optional_fields_pass_through(self):
        op = linear_sum([0.5, 0.5], (4,))
        report = summarize_separation([], [], op, oracle_tv=0.25, mmd=0.1,
                                      mmd_average=0.4,
                                      log_density_outputs=-3.0,
                                      log_density_test=-2.5)
        assert report.oracle_tv == 0.25
        assert report.mmd == 0.1
        assert report.mmd_average == 0.4
        assert report.log_density_outputs == -3.0
        assert report.log_density_test == -2.5

    def test_count_mismatch(self):
        op = linear_sum([0.5, 0.5], (4,))
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="equally many"):
            summarize_separation([self.make_case(rng, op)], [], op)

    def test_field_order_keeps_mmd_pair_adjacent(self):
        import dataclasses

        names = [f.name for f in dataclasses.fields(MetricReport)]
        assert names.index("mmd_average") == names.index("mmd") + 1
