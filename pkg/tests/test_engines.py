import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spmclust.core import CenterSet, Partition, RngSpec, validate_matrix
from spmclust.datagen import SimDesign, sample
from spmclust.engines import (
    AllExcluded,
    CenterRule,
    EngineConfig,
    InitRule,
    active_set,
    assign,
    fit_baseline,
    fit_engine,
    fit_sm_sscm,
    fit_sparse_sm,
    max_min_seed,
    separation_scores,
    update_centers,
)
from spmclust.metrics import score_all


def two_blobs(n0=20, p=4, gap=20.0, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n0, p)) + np.array([gap / 2] + [0.0] * (p - 1))
    b = rng.normal(size=(n0, p)) - np.array([gap / 2] + [0.0] * (p - 1))
    X = validate_matrix(np.vstack([a, b]))
    truth = Partition(np.repeat([1, 2], n0), 2)
    return X, truth


class TestSeparationScores:
    def test_equal_centers_score_zero(self):
        centers = CenterSet(np.full((3, 2), 4.2))
        np.testing.assert_array_equal(separation_scores(centers), [0.0, 0.0])

    def test_three_center_column_by_hand(self):
        centers = CenterSet(np.array([[0.0], [3.0], [-3.0]]))
        assert separation_scores(centers)[0] == pytest.approx(6.0)

    def test_translation_invariant(self):
        rng = np.random.default_rng(0)
        centers = rng.normal(size=(4, 3))
        shifted = centers + np.array([5.0, -2.0, 0.3])
        np.testing.assert_allclose(
            separation_scores(centers), separation_scores(shifted), atol=1e-12
        )

    def test_needs_two_centers(self):
        with pytest.raises(ValueError):
            separation_scores(CenterSet(np.ones((1, 2))))


class TestActiveSet:
    def test_threshold_by_hand(self):
        np.testing.assert_array_equal(active_set(np.array([6.0, 0.1, 0.0]), 1.0), [0])

    def test_zero_keeps_everything(self):
        np.testing.assert_array_equal(active_set(np.array([6.0, 0.1, 0.0]), 0.0), [0, 1, 2])

    def test_exact_tie_included(self):
        np.testing.assert_array_equal(active_set(np.array([2.0, 1.0]), 2.0), [0])

    def test_all_excluded_raises(self):
        with pytest.raises(AllExcluded):
            active_set(np.array([0.5, 0.4]), 1.0)


class TestAssign:
    def test_points_at_centers(self):
        X = validate_matrix(np.array([[0.0], [10.0]]))
        centers = CenterSet(np.array([[0.0], [10.0]]))
        np.testing.assert_array_equal(assign(X, centers).assignments, [1, 2])

    def test_equidistant_point_takes_lowest_index(self):
        X = validate_matrix(np.array([[5.0]]))
        centers = CenterSet(np.array([[0.0], [10.0]]))
        assert assign(X, centers).assignments[0] == 1

    def test_restricted_assignment_recovers_planted_labels(self):
        design = SimDesign(n0=15, p=30, n_clusters=3, s_p=3, delta=30.0)
        sim = sample(design, RngSpec(1))
        true_means = np.zeros((3, 30))
        true_means[1, :3] = 30.0
        true_means[2, :3] = -30.0
        part = assign(sim.X, CenterSet(true_means), active=sim.informative)
        np.testing.assert_array_equal(part.assignments, sim.truth.assignments)
        # brute-check every assignment against a plain loop
        for i, row in enumerate(sim.X.values):
            dists = [((row[:3] - true_means[k, :3]) ** 2).sum() for k in range(3)]
            assert part.assignments[i] == int(np.argmin(dists)) + 1


class TestUpdateCenters:
    def test_mean_rule(self):
        X = validate_matrix(np.array([[0.0, 0.0], [2.0, 2.0]]))
        part = Partition(np.array([1, 1]), 1)
        out = update_centers(X, part, CenterRule("mean"))
        np.testing.assert_allclose(out.centers, [[1.0, 1.0]])

    def test_coordinate_median_rule(self):
        X = validate_matrix(np.array([[0.0], [1.0], [10.0]]))
        part = Partition(np.array([1, 1, 1]), 1)
        out = update_centers(X, part, CenterRule("coordinate-median"))
        np.testing.assert_allclose(out.centers, [[1.0]])

    def test_spatial_median_singleton(self):
        X = validate_matrix(np.array([[3.0, -1.0], [9.0, 9.0]]))
        part = Partition(np.array([1, 2]), 2)
        out = update_centers(X, part, CenterRule("spatial-median"))
        np.testing.assert_allclose(out.centers, X.values)

    def test_empty_cluster_repaired_from_previous_center(self):
        X = validate_matrix(np.array([[0.0], [1.0], [50.0]]))
        part = Partition(np.array([1, 1, 1]), 2)  # cluster 2 empty
        prev = CenterSet(np.array([[0.0], [49.0]]))
        out = update_centers(X, part, CenterRule("mean"), prev_centers=prev)
        # the point farthest from cluster 2's previous center is x=0, but the
        # repair is measured from that cluster's own previous center (49)
        np.testing.assert_allclose(out.centers[1], [0.0])


class TestMaxMinSeed:
    def test_exhaustive_when_k_equals_n(self):
        X = validate_matrix(np.array([[0.0], [1.0], [10.0]]))
        seeds = max_min_seed(X, 3)
        assert sorted(seeds.centers[:, 0]) == [0.0, 1.0, 10.0]

    def test_one_dimensional_example(self):
        X = validate_matrix(np.array([[0.0], [1.0], [10.0]]))
        seeds = max_min_seed(X, 2)
        np.testing.assert_array_equal(seeds.centers[:, 0], [10.0, 0.0])

    def test_two_blobs_one_seed_each(self):
        X, truth = two_blobs(seed=3)
        seeds = max_min_seed(X, 2)
        sides = np.sign(seeds.centers[:, 0])
        assert set(sides) == {-1.0, 1.0}


class TestFitSmSscm:
    def test_separated_blobs_recovered(self):
        X, truth = two_blobs(seed=4)
        fit = fit_sm_sscm(X, 2, init=InitRule(restarts=5), rng=RngSpec(10))
        assert score_all(fit.partition, truth)["ari"] == 1.0
        assert fit.metric is not None

    def test_single_cluster_degenerate(self):
        X, _ = two_blobs(n0=5, seed=5)
        fit = fit_sm_sscm(X, 1)
        assert fit.partition.n_clusters == 1
        assert np.all(fit.partition.assignments == 1)

    def test_duplicate_rows_do_not_crash(self):
        values = np.array([[1.0, 2.0]] * 6 + [[5.0, 5.0]] * 6)
        fit = fit_sm_sscm(validate_matrix(values), 2, init=InitRule(restarts=3), rng=RngSpec(2))
        assert fit.partition.sizes().sum() == 12

    def test_max_min_init_supported(self):
        X, truth = two_blobs(seed=6)
        fit = fit_sm_sscm(X, 2, init=InitRule("max-min-seeding"))
        assert score_all(fit.partition, truth)["ari"] == 1.0


class TestFitSparseSm:
    def test_tau_zero_equals_plain_spatial_median(self):
        rng = np.random.default_rng(12)
        for seed in range(5):
            X = validate_matrix(rng.normal(size=(24, 5)))
            init = InitRule(restarts=4)
            sparse = fit_sparse_sm(X, 3, tau=0.0, init=init, rng=RngSpec(seed))
            plain = fit_baseline(X, 3, CenterRule("spatial-median"), init=init, rng=RngSpec(seed))
            np.testing.assert_array_equal(
                sparse.partition.assignments, plain.partition.assignments
            )
            assert sparse.objective == plain.objective

    def test_support_recovery_at_huge_shift(self):
        design = SimDesign(n0=25, p=40, n_clusters=3, s_p=2, delta=30.0)
        sim = sample(design, RngSpec(3))
        fit = fit_sparse_sm(sim.X, 3, tau=30.0, init=InitRule(restarts=10), rng=RngSpec(4))
        np.testing.assert_array_equal(fit.sparse.active, sim.informative)
        assert score_all(fit.partition, sim.truth)["ari"] == 1.0

    def test_overlarge_tau_falls_back_to_one_coordinate(self):
        X, _ = two_blobs(seed=7)
        fit = fit_sparse_sm(X, 2, tau=1e9, init=InitRule(restarts=3), rng=RngSpec(5))
        assert fit.sparse.fallback
        assert fit.sparse.active.size == 1
        assert fit.diagnostics.converged

    def test_reset_excluded_pins_centers_to_common_baseline(self):
        X, _ = two_blobs(seed=8)
        fit = fit_sparse_sm(
            X, 2, tau=5.0, init=InitRule(restarts=3), rng=RngSpec(6), reset_excluded=True
        )
        excluded = np.setdiff1d(np.arange(X.p), fit.sparse.active)
        if excluded.size:
            col = fit.centers.centers[:, excluded]
            np.testing.assert_allclose(col[0], col[1], atol=1e-12)

    def test_fixed_point_property(self):
        X, _ = two_blobs(seed=9)
        fit = fit_sparse_sm(X, 2, tau=1.0, init=InitRule(restarts=5), rng=RngSpec(7))
        again = fit_sparse_sm(X, 2, tau=1.0, init_labels=fit.partition.assignments)
        np.testing.assert_array_equal(
            again.partition.assignments, fit.partition.assignments
        )
        np.testing.assert_allclose(again.centers.centers, fit.centers.centers, atol=1e-12)
        assert again.diagnostics.iterations_used == 1


class TestFitBaseline:
    def test_kmeans_on_blobs(self):
        X, truth = two_blobs(seed=10)
        fit = fit_baseline(X, 2, CenterRule("mean"), init=InitRule(restarts=5), rng=RngSpec(8))
        assert score_all(fit.partition, truth)["ari"] == 1.0

    def test_kmedians_center(self):
        X = validate_matrix(np.array([[0.0], [1.0], [10.0]]))
        fit = fit_baseline(X, 1, CenterRule("coordinate-median"))
        np.testing.assert_allclose(fit.centers.centers, [[1.0]])

    def test_kmeans_objective_non_increasing(self):
        rng = np.random.default_rng(13)
        X = validate_matrix(rng.normal(size=(40, 3)))
        fit = fit_baseline(X, 3, CenterRule("mean"), init=InitRule(restarts=1), rng=RngSpec(9))
        trace = np.array(fit.diagnostics.objective_trace)
        assert (np.diff(trace) <= 1e-9).all()

    def test_sparse_kmedian_composition(self):
        design = SimDesign(n0=20, p=20, n_clusters=3, s_p=2, delta=20.0)
        sim = sample(design, RngSpec(5))
        fit = fit_baseline(
            sim.X, 3, CenterRule("coordinate-median"), tau=10.0,
            init=InitRule(restarts=5), rng=RngSpec(11),
        )
        np.testing.assert_array_equal(fit.sparse.active, sim.informative)
        assert score_all(fit.partition, sim.truth)["ari"] == 1.0


class TestEngineProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32))
    def test_score_perturbation_bound(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 6))
        p = int(rng.integers(1, 8))
        b = float(rng.uniform(0, 2))
        centers = rng.normal(size=(k, p))
        shifted = centers + rng.uniform(-b, b, size=(k, p))
        gap = np.abs(separation_scores(centers) - separation_scores(shifted))
        assert gap.max() <= 2 * k * b + 1e-9

    def test_label_permutation_of_init_preserves_partition(self):
        rng = np.random.default_rng(14)
        X = validate_matrix(rng.normal(size=(30, 4)))
        labels = rng.integers(1, 4, size=30)
        perm = np.array([3, 1, 2])  # relabeling 1->3, 2->1, 3->2
        fit_a = fit_sparse_sm(X, 3, tau=0.5, init_labels=labels)
        fit_b = fit_sparse_sm(X, 3, tau=0.5, init_labels=perm[labels - 1])
        assert score_all(fit_a.partition, fit_b.partition)["ari"] == 1.0

    def test_determinism_across_runs(self):
        X, _ = two_blobs(seed=15)
        a = fit_sparse_sm(X, 2, tau=1.0, init=InitRule(restarts=6), rng=RngSpec(33))
        b = fit_sparse_sm(X, 2, tau=1.0, init=InitRule(restarts=6), rng=RngSpec(33))
        np.testing.assert_array_equal(a.partition.assignments, b.partition.assignments)
        np.testing.assert_array_equal(a.centers.centers, b.centers.centers)

    def test_fit_engine_dispatch(self):
        X, truth = two_blobs(seed=16)
        for engine, tau in (
            ("sm-sscm", None),
            ("sparse-sm", 1.0),
            ("kmeans", None),
            ("kmedians", None),
            ("kspatial", None),
            ("sparse-kmeans", 1.0),
            ("sparse-kmedians", 1.0),
        ):
            config = EngineConfig(engine=engine, restarts=3)
            fit = fit_engine(X, 2, config, RngSpec(17), tau=tau)
            assert score_all(fit.partition, truth)["ari"] == 1.0, engine

    def test_sparse_engine_requires_tau(self):
        X, _ = two_blobs(seed=17)
        with pytest.raises(ValueError):
            fit_engine(X, 2, EngineConfig(engine="sparse-sm"), RngSpec(0))

    def test_invalid_cluster_count_rejected(self):
        X, _ = two_blobs(n0=3, seed=18)
        with pytest.raises(ValueError):
            fit_sparse_sm(X, 7, tau=0.0)
