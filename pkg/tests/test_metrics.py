"""Rank metrics and Pareto utilities vs brute-force oracles."""
import numpy as np
import pytest

from ihasearch import metrics as mx

from oracles import (
    brute_hypervolume_2d,
    brute_k_at_x,
    brute_kendall_tau_b,
    brute_mae_at_top,
    brute_pareto_front,
    brute_spearman_rho,
)


def random_vector_pairs(rng, n_draws=60):
    for _ in range(n_draws):
        n = int(rng.integers(2, 51))
        if rng.random() < 0.5:
            # integer draws to force ties
            yield rng.integers(0, 8, n).astype(float), rng.integers(0, 8, n).astype(float)
        else:
            yield rng.normal(size=n), rng.normal(size=n)


class TestRankStats:
    def test_tau_frozen_example(self):
        assert abs(mx.kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) - 2 / 3) < 1e-12

    def test_rho_frozen_example(self):
        assert abs(mx.spearman_rho([1, 2, 3], [1, 3, 2]) - 0.5) < 1e-12

    def test_tau_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for p, t in random_vector_pairs(rng):
            assert abs(mx.kendall_tau(p, t) - brute_kendall_tau_b(p, t)) < 1e-12

    def test_rho_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for p, t in random_vector_pairs(rng):
            assert abs(mx.spearman_rho(p, t) - brute_spearman_rho(p, t)) < 1e-12

    def test_perfect_and_reversed_ranking(self):
        v = np.arange(10.0)
        assert abs(mx.kendall_tau(v, v) - 1.0) < 1e-12
        assert abs(mx.kendall_tau(v, -v) + 1.0) < 1e-12
        assert abs(mx.spearman_rho(v, v) - 1.0) < 1e-12

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        t = rng.normal(size=30)
        p = rng.normal(size=30)
        warped = np.exp(2.0 * p)
        assert abs(mx.kendall_tau(p, t) - mx.kendall_tau(warped, t)) < 1e-12
        assert abs(mx.spearman_rho(p, t) - mx.spearman_rho(warped, t)) < 1e-12

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            mx.kendall_tau([1, 2], [1, 2, 3])


class TestTopK:
    def test_identical_ordering(self):
        v = np.arange(100.0)
        assert mx.k_at_x(v, v, 0.05) == 5

    def test_reversed_ordering_needs_everything(self):
        v = np.arange(100.0)
        assert mx.k_at_x(-v, v, 0.01) == 100

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for p, t in random_vector_pairs(rng):
            for x in (0.01, 0.05, 0.5, 1.0):
                assert mx.k_at_x(p, t, x) == brute_k_at_x(p, t, x)

    def test_prediction_ties_break_by_index(self):
        pred = [1.0, 1.0, 1.0, 1.0]
        truth = [5.0, 1.0, 2.0, 3.0]
        # true top-1 is index 1; it sits second in the index-ordered tie block
        assert mx.k_at_x(pred, truth, 0.25) == 2

    def test_mae_at_top_frozen_example(self):
        assert abs(mx.mae_at_top([1.0, 2, 3, 4], [1.2, 2, 3, 4], 0.25) - 0.2) < 1e-15

    def test_mae_matches_brute_force(self):
        rng = np.random.default_rng(4)
        for p, t in random_vector_pairs(rng):
            for x in (0.05, 0.3, 1.0):
                assert mx.mae_at_top(p, t, x) == brute_mae_at_top(p, t, x)

    def test_bad_fraction_raises(self):
        with pytest.raises(ValueError):
            mx.k_at_x([1, 2], [1, 2], 0.0)
        with pytest.raises(ValueError):
            mx.mae_at_top([1, 2], [1, 2], 1.5)


class TestReports:
    def test_report_fields(self):
        rng = np.random.default_rng(5)
        r = mx.rank_report(rng.normal(size=40), rng.normal(size=40))
        assert set(r) == {"tau", "rho", "mae", "mae_at_5pct", "k_at_1pct", "k_at_5pct"}

    def test_aggregate_mean_std(self):
        agg = mx.aggregate_reports([{"tau": 0.5}, {"tau": 0.7}])
        assert abs(agg["tau"]["mean"] - 0.6) < 1e-15
        assert abs(agg["tau"]["std"] - 0.1) < 1e-15


class TestPareto:
    def test_simple_front(self):
        pts = [(1.0, 2.0), (2.0, 1.0), (2.0, 2.0), (0.5, 3.0)]
        assert mx.pareto_front(pts) == [0, 1, 3]

    def test_matches_brute_force_4d(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            pts = [tuple(rng.normal(size=4)) for _ in range(50)]
            assert mx.pareto_front(pts) == sorted(brute_pareto_front(pts))

    def test_duplicates_both_kept(self):
        pts = [(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]
        assert mx.pareto_front(pts) == [0, 1]

    def test_feasible_shields_infeasible(self):
        pts = [
            mx.ObjectiveVector((5.0, 5.0), feasible=True),
            mx.ObjectiveVector((0.0, 0.0), feasible=False, violation=1.0),
        ]
        assert mx.pareto_front(pts) == [0]

    def test_all_infeasible_min_violation_wins(self):
        pts = [
            mx.ObjectiveVector((1.0, 1.0), feasible=False, violation=2.0),
            mx.ObjectiveVector((9.0, 9.0), feasible=False, violation=0.5),
        ]
        assert mx.pareto_front(pts) == [1]

    def test_constrained_dominates_rules(self):
        feas = mx.ObjectiveVector((2.0, 2.0))
        infeas = mx.ObjectiveVector((0.0, 0.0), feasible=False, violation=3.0)
        worse_infeas = mx.ObjectiveVector((0.0, 0.0), feasible=False, violation=4.0)
        assert mx.constrained_dominates(feas, infeas)
        assert not mx.constrained_dominates(infeas, feas)
        assert mx.constrained_dominates(infeas, worse_infeas)
        assert not mx.constrained_dominates(feas, mx.ObjectiveVector((1.0, 3.0)))


class TestHypervolume:
    def test_frozen_examples(self):
        assert abs(mx.hypervolume_2d([(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0)) - 3.0) < 1e-12
        assert abs(mx.hypervolume_2d([(1.0, 1.0)], (2.0, 2.0)) - 1.0) < 1e-12

    def test_matches_inclusion_exclusion(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            n = int(rng.integers(1, 11))
            pts = [tuple(rng.uniform(0, 1, 2)) for _ in range(n)]
            ours = mx.hypervolume_2d(pts, (1.0, 1.0))
            assert abs(ours - brute_hypervolume_2d(pts, (1.0, 1.0))) < 1e-10

    def test_adding_point_never_decreases(self):
        rng = np.random.default_rng(8)
        pts = [tuple(rng.uniform(0, 1, 2)) for _ in range(6)]
        base = mx.hypervolume_2d(pts, (1.0, 1.0))
        more = mx.hypervolume_2d(pts + [tuple(rng.uniform(0, 1, 2))], (1.0, 1.0))
        assert more >= base - 1e-15

    def test_non_dominating_point_excluded_with_warning(self):
        with pytest.warns(UserWarning, match="excluded 1"):
            hv = mx.hypervolume_2d([(1.0, 1.0), (5.0, 0.5)], (3.0, 3.0))
        assert abs(hv - 4.0) < 1e-12

    def test_dominated_and_duplicate_points_are_harmless(self):
        ref = (3.0, 3.0)
        base = mx.hypervolume_2d([(1.0, 2.0), (2.0, 1.0)], ref)
        padded = mx.hypervolume_2d([(1.0, 2.0), (2.0, 1.0), (2.5, 2.5), (1.0, 2.0)], ref)
        assert abs(base - padded) < 1e-12
