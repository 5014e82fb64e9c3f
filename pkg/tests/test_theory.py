import numpy as np
import pytest

from driftkit.theory import (
    ATOL,
    FiniteDriftProcess,
    NullSetError,
    TimeSubset,
    change_point,
    constant_part,
    find_alternating_pair,
    has_dependency_drift,
    has_drift,
    has_proper_drift,
    joint_of,
    model_over,
    random_process,
    verify_equivalences,
)


def proc(kernel, time_dist):
    return FiniteDriftProcess(kernel=np.array(kernel, dtype=float),
                              time_dist=np.array(time_dist, dtype=float))


SWITCHING = proc([[1, 0], [0, 1]], [0.5, 0.5])
CONSTANT = proc([[0.4, 0.6], [0.4, 0.6]], [0.25, 0.75])
NULL_SECOND = proc([[1, 0], [0, 1]], [1.0, 0.0])


class TestInvariantValidation:
    def test_rows_must_be_stochastic(self):
        with pytest.raises(ValueError):
            proc([[0.5, 0.4], [0.5, 0.5]], [0.5, 0.5])

    def test_time_dist_must_sum_to_one(self):
        with pytest.raises(ValueError):
            proc([[1, 0], [0, 1]], [0.6, 0.6])

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            proc([[1.2, -0.2], [0, 1]], [0.5, 0.5])

    def test_json_round_trip(self):
        restored = FiniteDriftProcess.from_json(SWITCHING.to_json())
        assert np.array_equal(restored.kernel, SWITCHING.kernel)
        assert np.array_equal(restored.time_dist, SWITCHING.time_dist)


class TestJointOf:
    def test_switching_kernel_gives_diagonal_joint(self):
        assert np.allclose(
            joint_of(SWITCHING).table, [[0.5, 0], [0, 0.5]], atol=ATOL
        )

    def test_null_time_point_gives_zero_row(self):
        joint = joint_of(NULL_SECOND)
        assert np.all(joint.table[1] == 0)

    def test_constant_kernel_factorizes(self):
        joint = joint_of(CONSTANT)
        assert np.allclose(joint.table, [[0.1, 0.15], [0.3, 0.45]], atol=ATOL)

    def test_time_marginal_recovers_time_dist(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = random_process(rng)
            assert np.allclose(
                joint_of(p).time_marginal(), p.time_dist, atol=ATOL
            )


class TestHasDrift:
    def test_constant_rows_do_not_drift(self):
        assert not has_drift(CONSTANT)

    def test_distinct_nonnull_rows_drift(self):
        assert has_drift(SWITCHING)

    def test_difference_on_null_set_is_ignored(self):
        assert not has_drift(NULL_SECOND)


class TestConstantPart:
    def test_constant_kernel_returns_mixture(self):
        assert np.allclose(constant_part(CONSTANT), [0.4, 0.6], atol=ATOL)

    def test_changing_kernel_returns_none(self):
        assert constant_part(SWITCHING) is None

    def test_expectation_over_nonnull_support_only(self):
        p = proc([[0.4, 0.6], [0, 1]], [1.0, 0.0])
        assert np.allclose(constant_part(p), [0.4, 0.6], atol=ATOL)


class TestModelOver:
    def test_full_window_is_total_mixture(self):
        p = proc([[1, 0], [0.2, 0.8]], [0.3, 0.7])
        full = TimeSubset.of([0, 1], p)
        expected = 0.3 * np.array([1, 0]) + 0.7 * np.array([0.2, 0.8])
        assert np.allclose(model_over(p, full), expected, atol=ATOL)

    def test_singleton_window_is_the_row(self):
        p = proc([[1, 0], [0.2, 0.8]], [0.3, 0.7])
        assert np.allclose(model_over(p, TimeSubset.of([1], p)), [0.2, 0.8])

    def test_null_window_raises(self):
        with pytest.raises(NullSetError):
            model_over(NULL_SECOND, TimeSubset.of([1], NULL_SECOND))

    def test_disjoint_windows_merge_by_mass(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = random_process(rng)
            support = p.support()
            if support.size < 2:
                continue
            half = support.size // 2
            a = TimeSubset.of(support[:half] if half else support[:1], p)
            b = TimeSubset.of(support[half:] if half else support[1:], p)
            merged = TimeSubset.of(a.members | b.members, p)
            mixed = (
                a.mass * model_over(p, a) + b.mass * model_over(p, b)
            ) / (a.mass + b.mass)
            assert np.allclose(model_over(p, merged), mixed, atol=ATOL)


class TestProperDrift:
    def test_constant_kernel_has_none(self):
        assert not has_proper_drift(CONSTANT)

    def test_switching_kernel_has_proper_drift(self):
        # oracle: joint vs outer product of marginals, computed directly
        joint = joint_of(SWITCHING).table
        outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
        assert np.max(np.abs(joint - outer)) > 0.2
        assert has_proper_drift(SWITCHING)

    def test_null_row_difference_is_invisible(self):
        p = proc([[0.4, 0.6], [0, 1], [0.4, 0.6]], [0.5, 0.0, 0.5])
        assert not has_proper_drift(p)


class TestAlternatingPair:
    def test_constant_kernel_has_no_pair(self):
        assert find_alternating_pair(CONSTANT) is None

    def test_switching_kernel_pair_is_complementary(self):
        a, b = find_alternating_pair(SWITCHING)
        assert a.members | b.members == {0, 1}
        assert not a.members & b.members
        gap = np.abs(model_over(SWITCHING, a) - model_over(SWITCHING, b))
        assert np.max(gap) > ATOL

    def test_single_deviating_point_is_found(self):
        p = proc([[1, 0], [1, 0], [0, 1]], [1 / 3, 1 / 3, 1 / 3])
        deviating = TimeSubset.of([2], p)
        rest = deviating.complement(p)
        assert np.max(np.abs(model_over(p, deviating) - model_over(p, rest))) > 0.5
        assert find_alternating_pair(p) is not None


class TestChangePoint:
    def test_constant_kernel_has_none(self):
        assert change_point(CONSTANT) is None

    def test_abrupt_switch_is_located(self):
        p = proc([[1, 0], [1, 0], [0, 1], [0, 1]], [0.25] * 4)
        assert change_point(p) == 2

    def test_oscillating_kernel_yields_some_threshold(self):
        p = proc([[1, 0], [0, 1], [1, 0]], [1 / 3, 1 / 3, 1 / 3])
        assert change_point(p) in (1, 2)


class TestDependencyDrift:
    def test_constant_kernel_is_independent(self):
        assert not has_dependency_drift(CONSTANT)

    def test_switching_kernel_is_dependent(self):
        # oracle: mutual information of the diagonal joint is log 2
        joint = joint_of(SWITCHING).table
        mask = joint > 0
        outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
        mi = np.sum(joint[mask] * np.log(joint[mask] / outer[mask]))
        assert mi == pytest.approx(np.log(2), abs=1e-12)
        assert has_dependency_drift(SWITCHING)


class TestEquivalences:
    def test_randomized_suite_has_no_violations(self):
        results = verify_equivalences(1500, seed=2024)
        for name, (violations, checked) in results.items():
            assert violations == 0, f"{name}: {violations}/{checked}"
            assert checked > 0

    def test_generator_covers_both_branches(self):
        rng = np.random.default_rng(5)
        outcomes = {True: 0, False: 0}
        for _ in range(300):
            outcomes[has_proper_drift(random_process(rng))] += 1
        assert outcomes[True] > 30
        assert outcomes[False] > 30

    def test_model_covering_on_balanced_construction(self):
        # windows built to share one mixture model while their rows differ
        rng = np.random.default_rng(31)
        for _ in range(50):
            base = rng.dirichlet(np.ones(4))
            delta = rng.normal(scale=0.05, size=4)
            delta -= delta.mean()
            lo = np.minimum(base + delta, base - delta)
            if np.any(lo < 0):
                continue
            kernel = np.array(
                [base + delta, base - delta, base, base + delta, base - delta,
                 base]
            )
            p = proc(kernel, [1 / 6] * 6)
            a = TimeSubset.of([0, 1], p)
            b = TimeSubset.of([2], p)
            c = TimeSubset.of([3, 4], p)
            p_a = model_over(p, a)
            p_b = model_over(p, b)
            p_c = model_over(p, c)
            bc = TimeSubset.of(b.members | c.members, p)
            ac = TimeSubset.of(a.members | c.members, p)
            # premises hold by construction
            assert np.allclose(p_a, model_over(p, bc), atol=1e-10)
            assert np.allclose(p_b, model_over(p, ac), atol=1e-10)
            assert np.allclose(p_a, p_b, atol=1e-10)
            assert np.allclose(p_b, p_c, atol=1e-10)

    def test_model_covering_premise_search_on_random_instances(self):
        # any triple satisfying the premises must have equal models
        rng = np.random.default_rng(17)
        for _ in range(200):
            p = random_process(rng, max_times=5)
            support = list(p.support())
            if len(support) < 3:
                continue
            a = TimeSubset.of([support[0]], p)
            b = TimeSubset.of([support[1]], p)
            c = TimeSubset.of([support[2]], p)
            bc = TimeSubset.of(b.members | c.members, p)
            ac = TimeSubset.of(a.members | c.members, p)
            premises = np.allclose(
                model_over(p, a), model_over(p, bc), atol=1e-10
            ) and np.allclose(model_over(p, b), model_over(p, ac), atol=1e-10)
            if premises:
                assert np.allclose(model_over(p, a), model_over(p, b), atol=1e-10)
                assert np.allclose(model_over(p, b), model_over(p, c), atol=1e-10)
