"""Data-driven selection of the exclusion threshold and the cluster count.

The threshold is tuned by a permutation Gap criterion: the log of a
between-cluster separation functional on the observed data, minus its average
over column-permuted reference datasets (which keep each feature's marginal
distribution but destroy the joint cluster structure). The cluster count is
chosen by maximizing a degree-of-freedom-normalized ratio of average
between-median to average within-median distances (BWDM), evaluated in the
retained coordinate subspace of each candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, RngSpec
from .engines import EngineConfig, FitResult, fit_engine
from .geometry import DEFAULT_WEISZFELD, WeiszfeldConfig, spatial_median

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class GapReport:
    """Per-threshold observed and reference separations and the gap curve.

    ``reference`` has one row per permutation replicate and one column per
    grid point. ``degenerate`` flags that some separation was <= 0 and the
    log floor kicked in.
    """

    tau_grid: np.ndarray
    observed: np.ndarray
    reference: np.ndarray
    gap: np.ndarray
    selected_tau: float
    degenerate: bool = False


@dataclass(frozen=True)
class KSelectionReport:
    k_grid: np.ndarray
    tau_per_k: np.ndarray
    abdm: np.ndarray
    awdm: np.ndarray
    bwdm: np.ndarray
    selected_k: int


def between_separation(
    X: DataMatrix,
    fit: FitResult,
    restricted: bool = False,
    weiszfeld: WeiszfeldConfig = DEFAULT_WEISZFELD,
) -> float:
    """Size-weighted squared distances of fitted centers from the overall
    spatial median of the full sample.

    By default everything is evaluated over the full coordinate space,
    matching center updates; ``restricted=True`` confines both the overall
    median and the norms to the fit's active coordinate set.
    """
    centers = fit.centers.centers
    sizes = fit.partition.sizes()
    values = X.values
    if restricted and fit.sparse is not None:
        active = fit.sparse.active
        values = values[:, active]
        centers = centers[:, active]
    overall = spatial_median(values, weiszfeld)
    return float((sizes * ((centers - overall) ** 2).sum(axis=1)).sum())


def permute_columns(X: DataMatrix, rng: RngSpec) -> DataMatrix:
    """Shuffle each column independently; per-column value multisets are
    preserved exactly."""
    gen = rng.generator()
    values = X.values.copy()
    for j in range(X.p):
        values[:, j] = values[gen.permutation(X.n), j]
    return DataMatrix(values)


def gap_scores(observed: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, bool]:
    """log observed minus mean log reference, column-wise.

    Evaluated as the mean log ratio, which is the same quantity but exactly
    invariant to rescaling both sides by a common power of two. Nonpositive
    separations are floored before the log and flagged."""
    observed = np.asarray(observed, dtype=float)
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    degenerate = bool((observed <= 0).any() or (reference <= 0).any())
    if degenerate:
        gap = np.log(np.maximum(observed, 0.0) + LOG_FLOOR) - np.log(
            np.maximum(reference, 0.0) + LOG_FLOOR
        ).mean(axis=0)
    else:
        gap = np.log(observed[None, :] / reference).mean(axis=0)
    return gap, degenerate


def default_tau_grid(
    X: DataMatrix,
    n_clusters: int,
    config: EngineConfig,
    rng: RngSpec,
    size: int = 12,
    floor_ratio: float = 1e-2,
) -> np.ndarray:
    """Zero plus geometrically spaced thresholds up to the largest separation
    score of an unthresholded pre-fit."""
    if size < 2:
        raise ValueError("grid size must be >= 2")
    pre = fit_engine(X, n_clusters, config, rng, tau=0.0)
    top = float(pre.sparse.scores.max())
    if top <= 0:
        return np.zeros(size)
    return np.concatenate([[0.0], np.geomspace(top * floor_ratio, top, size - 1)])


def select_tau(
    X: DataMatrix,
    n_clusters: int,
    tau_grid: np.ndarray,
    n_permutations: int,
    config: EngineConfig,
    rng: RngSpec = RngSpec(0),
    reference_transform=permute_columns,
    restricted: bool = False,
) -> GapReport:
    """Maximize the permutation Gap over a threshold grid.

    Every fit (observed and reference) reuses the same init stream so the gap
    reflects the data, not initialization luck. The reference datasets are
    generated once per replicate and shared across the grid. Ties select the
    smallest threshold. ``reference_transform`` exists as a test hook; the
    default is column permutation.
    """
    grid = np.sort(np.asarray(tau_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("tau grid must be nonempty")
    if n_permutations < 1:
        raise ValueError("need at least one permutation replicate")
    fit_rng = rng.child(0)
    references = [
        reference_transform(X, rng.child(1 + b)) for b in range(n_permutations)
    ]
    observed = np.empty(grid.size)
    reference = np.empty((n_permutations, grid.size))
    for ell, tau in enumerate(grid):
        fit = fit_engine(X, n_clusters, config, fit_rng, tau=float(tau))
        observed[ell] = between_separation(X, fit, restricted)
        for b, Xb in enumerate(references):
            fit_b = fit_engine(Xb, n_clusters, config, fit_rng, tau=float(tau))
            reference[b, ell] = between_separation(Xb, fit_b, restricted)
    gap, degenerate = gap_scores(observed, reference)
    selected = float(grid[int(gap.argmax())])
    return GapReport(grid, observed, reference, gap, selected, degenerate)


def bwdm_components(
    X: DataMatrix,
    fit: FitResult,
    weiszfeld: WeiszfeldConfig = DEFAULT_WEISZFELD,
) -> tuple[float, float, float]:
    """(ABDM, AWDM, BWDM) for a fitted partition.

    Cluster spatial medians are recomputed inside the retained coordinate
    subspace when the fit carries an active set. ABDM averages pairwise
    distances between those medians, AWDM averages each observation's
    distance to its cluster median, and BWDM is their ratio after dividing
    by K - 1 and n - K degrees of freedom.
    """
    labels = fit.partition.assignments
    n_clusters = fit.partition.n_clusters
    n = fit.partition.n
    values = X.values
    if fit.sparse is not None:
        values = values[:, fit.sparse.active]
    medians = np.stack(
        [spatial_median(values[labels == k], weiszfeld) for k in range(1, n_clusters + 1)]
    )
    pair_sum = 0.0
    for k in range(n_clusters):
        for m in range(k + 1, n_clusters):
            pair_sum += float(np.linalg.norm(medians[k] - medians[m]))
    abdm = pair_sum / (n_clusters * (n_clusters - 1) / 2)
    within = np.linalg.norm(values - medians[labels - 1], axis=1)
    awdm = float(within.sum() / n)
    numer = abdm / (n_clusters - 1)
    denom = awdm / (n - n_clusters)
    bwdm = float("inf") if denom == 0 else numer / denom
    return abdm, awdm, bwdm


def select_k(
    X: DataMatrix,
    k_grid: np.ndarray,
    n_permutations: int,
    config: EngineConfig,
    rng: RngSpec = RngSpec(0),
    tau_grid: np.ndarray | None = None,
    grid_size: int = 12,
    refit_restarts: int | None = None,
) -> KSelectionReport:
    """Pick the cluster count maximizing BWDM, re-tuning the threshold for
    each candidate.

    When no explicit threshold grid is given, a default grid is rebuilt per
    candidate (the score scale depends on the number of centers). Ties select
    the smallest candidate.
    """
    k_grid = np.sort(np.asarray(k_grid, dtype=int))
    if k_grid.size == 0:
        raise ValueError("k grid must be nonempty")
    if k_grid[0] < 2 or k_grid[-1] > X.n - 1:
        raise ValueError("k grid must lie within {2..n-1}")
    taus = np.empty(k_grid.size)
    abdm = np.empty(k_grid.size)
    awdm = np.empty(k_grid.size)
    bwdm = np.empty(k_grid.size)
    refit_config = (
        config if refit_restarts is None else config.with_restarts(refit_restarts)
    )
    for i, k in enumerate(k_grid):
        k_rng = rng.child(int(k))
        grid = (
            np.asarray(tau_grid, dtype=float)
            if tau_grid is not None
            else default_tau_grid(X, int(k), config, k_rng.child(0), size=grid_size)
        )
        report = select_tau(X, int(k), grid, n_permutations, config, k_rng.child(1))
        taus[i] = report.selected_tau
        fit = fit_engine(X, int(k), refit_config, k_rng.child(2), tau=report.selected_tau)
        abdm[i], awdm[i], bwdm[i] = bwdm_components(X, fit, config.weiszfeld)
    selected = int(k_grid[int(bwdm.argmax())])
    return KSelectionReport(k_grid, taus, abdm, awdm, bwdm, selected)
