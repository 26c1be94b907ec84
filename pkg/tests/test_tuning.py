import numpy as np
import pytest

from spmclust.core import CenterSet, FitDiagnostics, Partition, RngSpec, validate_matrix
from spmclust.geometry import WeiszfeldConfig
from spmclust.datagen import SimDesign, sample
from spmclust.engines import EngineConfig, FitResult, fit_baseline, CenterRule, fit_sparse_sm, InitRule
from spmclust.tuning import (
    between_separation,
    bwdm_components,
    default_tau_grid,
    gap_scores,
    permute_columns,
    select_k,
    select_tau,
)


def hand_fit(values, labels, centers, n_clusters):
    """FitResult stub for formula-level checks."""
    return FitResult(
        partition=Partition(np.asarray(labels), n_clusters),
        centers=CenterSet(np.asarray(centers, dtype=float)),
        diagnostics=FitDiagnostics(iterations_used=1, converged=True),
        objective=0.0,
    )


class TestBetweenSeparation:
    def test_single_cluster_is_zero(self):
        rng = np.random.default_rng(0)
        X = validate_matrix(rng.normal(size=(15, 3)))
        fit = fit_baseline(X, 1, CenterRule("spatial-median"))
        assert between_separation(X, fit) == pytest.approx(0.0, abs=1e-10)

    def test_one_dimensional_hand_value(self):
        # clusters {-1, 1} and {9, 11}: centers 0 and 10, overall median 5
        X = validate_matrix(np.array([[-1.0], [1.0], [9.0], [11.0]]))
        fit = hand_fit(X.values, [1, 1, 2, 2], [[0.0], [10.0]], 2)
        assert between_separation(X, fit) == pytest.approx(100.0, abs=1e-6)

    def test_translation_invariant(self):
        # exact at the optimum; numerically limited by the Weiszfeld tolerance
        rng = np.random.default_rng(1)
        values = rng.normal(size=(20, 3))
        labels = rng.integers(1, 3, size=20)
        centers = np.stack([values[labels == k].mean(axis=0) for k in (1, 2)])
        tight = WeiszfeldConfig(max_iter=1000, tol=1e-13)
        X1 = validate_matrix(values)
        X2 = validate_matrix(values + np.array([10.0, -5.0, 2.0]))
        fit1 = hand_fit(values, labels, centers, 2)
        fit2 = hand_fit(values, labels, centers + np.array([10.0, -5.0, 2.0]), 2)
        assert between_separation(X1, fit1, weiszfeld=tight) == pytest.approx(
            between_separation(X2, fit2, weiszfeld=tight), rel=1e-7
        )

    def test_restricted_variant_uses_active_set_only(self):
        design = SimDesign(n0=15, p=8, n_clusters=2, s_p=2, delta=8.0)
        sim = sample(design, RngSpec(0))
        fit = fit_sparse_sm(sim.X, 2, tau=4.0, init=InitRule(restarts=4), rng=RngSpec(1))
        full = between_separation(sim.X, fit, restricted=False)
        restricted = between_separation(sim.X, fit, restricted=True)
        assert restricted <= full + 1e-9


class TestPermuteColumns:
    def test_single_row_unchanged(self):
        X = validate_matrix(np.array([[1.0, 2.0, 3.0]]))
        out = permute_columns(X, RngSpec(0))
        np.testing.assert_array_equal(out.values, X.values)

    def test_column_multisets_preserved(self):
        rng = np.random.default_rng(2)
        X = validate_matrix(rng.normal(size=(20, 5)))
        out = permute_columns(X, RngSpec(1))
        np.testing.assert_allclose(
            np.sort(out.values, axis=0), np.sort(X.values, axis=0), atol=0
        )
        assert not np.array_equal(out.values, X.values)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X = validate_matrix(rng.normal(size=(10, 4)))
        a = permute_columns(X, RngSpec(7))
        b = permute_columns(X, RngSpec(7))
        np.testing.assert_array_equal(a.values, b.values)


class TestGapScores:
    def test_translation_property_exact(self):
        observed = np.array([1.0, 2.0, 3.0])
        reference = np.array([[0.5, 1.5, 2.5], [1.5, 2.5, 3.5]])
        gap, _ = gap_scores(observed, reference)
        scaled, _ = gap_scores(4.0 * observed, 4.0 * reference)
        np.testing.assert_array_equal(gap, scaled)

    def test_log_ratio_of_e(self):
        observed = np.array([np.e * 2.0])
        reference = np.array([[2.0], [2.0], [2.0]])
        gap, degenerate = gap_scores(observed, reference)
        assert gap[0] == pytest.approx(1.0, abs=1e-9)
        assert not degenerate

    def test_degenerate_flagged(self):
        gap, degenerate = gap_scores(np.array([0.0]), np.array([[1.0]]))
        assert degenerate
        assert np.isfinite(gap[0])


class TestSelectTau:
    def test_identity_references_give_zero_gap_and_smallest_tau(self):
        design = SimDesign(n0=10, p=6, n_clusters=2, s_p=2, delta=6.0)
        sim = sample(design, RngSpec(4))
        config = EngineConfig(engine="sparse-sm", restarts=2)
        report = select_tau(
            sim.X,
            2,
            np.array([0.0, 0.5, 2.0]),
            3,
            config,
            RngSpec(5),
            reference_transform=lambda X, rng: X,
        )
        np.testing.assert_allclose(report.gap, np.zeros(3), atol=1e-12)
        assert report.selected_tau == 0.0

    def test_report_shapes_and_grid_sorted(self):
        design = SimDesign(n0=10, p=6, n_clusters=2, s_p=2, delta=6.0)
        sim = sample(design, RngSpec(6))
        config = EngineConfig(engine="sparse-sm", restarts=2)
        report = select_tau(sim.X, 2, np.array([2.0, 0.0, 1.0]), 2, config, RngSpec(7))
        np.testing.assert_array_equal(report.tau_grid, [0.0, 1.0, 2.0])
        assert report.observed.shape == (3,)
        assert report.reference.shape == (2, 3)
        assert report.selected_tau in report.tau_grid

    def test_excludes_most_noise_coordinates_on_planted_design(self):
        # scaled-down sparse-shift design: the tuned threshold should keep an
        # active set not much larger than the planted support
        hits = 0
        for rep in range(10):
            design = SimDesign(n0=40, p=60, n_clusters=3, s_p=3, delta=3.0)
            sim = sample(design, RngSpec(100).child(rep))
            config = EngineConfig(engine="sparse-sm", restarts=4)
            rng = RngSpec(200).child(rep)
            grid = default_tau_grid(sim.X, 3, config, rng.child(0))
            report = select_tau(sim.X, 3, grid, 10, config, rng.child(1))
            fit = fit_sparse_sm(
                sim.X, 3, tau=report.selected_tau, init=InitRule(restarts=10), rng=rng.child(2)
            )
            hits += fit.sparse.active.size <= 2 * design.s_p
        assert hits >= 8

    def test_empty_grid_rejected(self):
        design = SimDesign(n0=5, p=4, n_clusters=2, s_p=1)
        sim = sample(design, RngSpec(8))
        with pytest.raises(ValueError):
            select_tau(sim.X, 2, np.array([]), 2, EngineConfig(engine="sparse-sm"), RngSpec(9))


class TestBwdm:
    def test_one_dimensional_hand_value(self):
        # clusters {-1, 1} and {9, 11}: medians 0, 10; ABDM = 10, AWDM = 1,
        # BWDM = (10 / 1) / (1 / 2) = 20
        X = validate_matrix(np.array([[-1.0], [1.0], [9.0], [11.0]]))
        fit = hand_fit(X.values, [1, 1, 2, 2], [[0.0], [10.0]], 2)
        abdm, awdm, bwdm = bwdm_components(X, fit)
        assert abdm == pytest.approx(10.0, abs=1e-6)
        assert awdm == pytest.approx(1.0, abs=1e-6)
        assert bwdm == pytest.approx(20.0, abs=1e-4)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(10)
        X = validate_matrix(rng.normal(size=(30, 3)))
        labels = rng.integers(1, 4, size=30)
        fit_a = hand_fit(X.values, labels, np.zeros((3, 3)), 3)
        perm = np.array([3, 1, 2])
        fit_b = hand_fit(X.values, perm[labels - 1], np.zeros((3, 3)), 3)
        assert bwdm_components(X, fit_a)[2] == pytest.approx(
            bwdm_components(X, fit_b)[2], rel=1e-9
        )


class TestSelectK:
    def test_singleton_grid_returned(self):
        design = SimDesign(n0=12, p=8, n_clusters=3, s_p=2, delta=8.0)
        sim = sample(design, RngSpec(11))
        config = EngineConfig(engine="sparse-sm", restarts=2)
        report = select_k(sim.X, np.array([3]), 3, config, RngSpec(12))
        assert report.selected_k == 3
        assert report.k_grid.tolist() == [3]

    def test_three_blobs_selects_three(self):
        config = EngineConfig(engine="sparse-sm", restarts=3)
        hits = 0
        for rep in range(3):
            design = SimDesign(n0=30, p=20, n_clusters=3, s_p=2, delta=10.0)
            sim = sample(design, RngSpec(300).child(rep))
            report = select_k(
                sim.X, np.array([2, 3, 4]), 6, config, RngSpec(400).child(rep),
                refit_restarts=10,
            )
            hits += report.selected_k == 3
        assert hits >= 2

    def test_grid_outside_range_rejected(self):
        design = SimDesign(n0=3, p=4, n_clusters=2, s_p=1)
        sim = sample(design, RngSpec(13))
        with pytest.raises(ValueError):
            select_k(sim.X, np.array([1, 2]), 2, EngineConfig(engine="sparse-sm"), RngSpec(14))
