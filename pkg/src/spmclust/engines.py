"""Clustering fixed-point iterations under one pluggable framework.

Four engines share the same alternation skeleton:

* ``fit_sm_sscm`` - spatial-median centers with a common inverse
  sign-covariance (Mahalanobis-type) assignment metric.
* ``fit_sparse_sm`` - spatial-median centers with hard-threshold feature
  exclusion in the assignment step.
* ``fit_baseline`` - Lloyd-style K-means / K-medians / K-spatial-median,
  optionally composed with the same hard-threshold exclusion.
* ``max_min_seed`` - deterministic farthest-point seeding, available as an
  alternative to uniform random assignment.

All ties (nearest center, farthest point, best restart) break toward the
lowest index, so identical inputs always produce identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CenterSet,
    DataMatrix,
    FitDiagnostics,
    Partition,
    RngSpec,
    SpmclustError,
)
from .geometry import (
    DEFAULT_WEISZFELD,
    EUCLIDEAN,
    MetricSpec,
    WeiszfeldConfig,
    l1_distances,
    pairwise_distances,
    spatial_median,
)
from .sscm import SscmEstimate, estimate_sscm, inverse_metric

CENTER_RULES = ("mean", "coordinate-median", "spatial-median")
INIT_RULES = ("random-assignment", "max-min-seeding")


class AllExcluded(SpmclustError):
    """Signals that a threshold excluded every coordinate."""


@dataclass(frozen=True)
class CenterRule:
    """Which per-cluster center to compute."""

    kind: str = "spatial-median"

    def __post_init__(self):
        if self.kind not in CENTER_RULES:
            raise ValueError(f"unknown center rule: {self.kind!r}")


@dataclass(frozen=True)
class InitRule:
    """Initialization scheme and restart count.

    Max-min seeding is deterministic, so restarts collapse to a single run.
    """

    kind: str = "random-assignment"
    restarts: int = 20

    def __post_init__(self):
        if self.kind not in INIT_RULES:
            raise ValueError(f"unknown init rule: {self.kind!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class SparseState:
    """Final separation scores, active coordinate set, and threshold.

    ``active`` holds 0-based coordinate indices. Normally it equals
    ``{j: scores[j] >= tau}``; when that set would be empty the engine falls
    back to the single best-scoring coordinate and sets ``fallback``.
    """

    scores: np.ndarray
    active: np.ndarray
    tau: float
    fallback: bool = False


@dataclass(frozen=True)
class FitResult:
    partition: Partition
    centers: CenterSet
    diagnostics: FitDiagnostics
    objective: float
    sparse: SparseState | None = None
    metric: SscmEstimate | None = None


def separation_scores(centers: CenterSet | np.ndarray) -> np.ndarray:
    """Per-coordinate score: sum over clusters of |center - across-center mean|.

    Zero when all centers agree on a coordinate; translation invariant.
    """
    arr = centers.centers if isinstance(centers, CenterSet) else np.asarray(centers, dtype=float)
    if arr.shape[0] < 2:
        raise ValueError("separation scores need at least two centers")
    return np.abs(arr - arr.mean(axis=0)).sum(axis=0)


def active_set(scores: np.ndarray, tau: float) -> np.ndarray:
    """Coordinates whose score meets the threshold (>=, so tau=0 keeps all)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    scores = np.asarray(scores, dtype=float)
    active = np.flatnonzero(scores >= tau)
    if active.size == 0:
        raise AllExcluded(f"threshold {tau} excludes all {scores.size} coordinates")
    return active


def assign(
    X: DataMatrix,
    centers: CenterSet,
    metric: MetricSpec = EUCLIDEAN,
    active: np.ndarray | None = None,
) -> Partition:
    """Nearest-center assignment; equidistant points go to the lowest index."""
    if active is not None:
        d = pairwise_distances(X.values, centers.centers, EUCLIDEAN, active=active)
    else:
        d = pairwise_distances(X.values, centers.centers, metric)
    return Partition.from_zero_based(d.argmin(axis=1), centers.n_clusters)


def update_centers(
    X: DataMatrix,
    partition: Partition,
    rule: CenterRule,
    cfg: WeiszfeldConfig = DEFAULT_WEISZFELD,
    prev_centers: CenterSet | None = None,
) -> CenterSet:
    """Per-cluster centers under ``rule`` with safe degeneracy handling.

    An empty cluster is repaired by first reassigning a representative point:
    the observation farthest from the cluster's previous center when one is
    known, otherwise the observation farthest from the overall coordinate
    mean. The repair never drains a singleton donor cluster.
    """
    prev = prev_centers.centers if prev_centers is not None else None
    centers, _, _ = _centers_with_repair(
        X.values, partition.assignments - 1, partition.n_clusters, rule.kind, cfg, prev
    )
    return CenterSet(centers)


def max_min_seed(
    X: DataMatrix, n_clusters: int, metric: MetricSpec = EUCLIDEAN
) -> CenterSet:
    """Farthest-point seeding: start from the point farthest from the overall
    spatial median, then repeatedly take the point maximizing the minimum
    distance to the seeds already chosen."""
    if not 1 <= n_clusters <= X.n:
        raise ValueError("need 1 <= n_clusters <= n")
    values = X.values
    overall = spatial_median(values)
    d = pairwise_distances(values, overall[None, :], metric)[:, 0]
    chosen = [int(d.argmax())]
    min_d = pairwise_distances(values, values[chosen[-1]][None, :], metric)[:, 0]
    while len(chosen) < n_clusters:
        min_d[chosen] = -np.inf
        chosen.append(int(min_d.argmax()))
        new_d = pairwise_distances(values, values[chosen[-1]][None, :], metric)[:, 0]
        min_d = np.minimum(min_d, new_d)
    return CenterSet(values[chosen])


def fit_sm_sscm(
    X: DataMatrix,
    n_clusters: int,
    ridge: float = 0.1,
    banding: int | None = None,
    max_iter: int = 100,
    init: InitRule = InitRule(),
    rng: RngSpec = RngSpec(0),
    weiszfeld: WeiszfeldConfig = DEFAULT_WEISZFELD,
    init_labels: np.ndarray | None = None,
) -> FitResult:
    """Spatial-median clustering with a common sign-covariance metric.

    Alternates spatial-median center updates, re-estimation of the
    regularized sign covariance from current residuals, and Mahalanobis
    assignment under its inverse, until assignments stop changing or
    ``max_iter`` is reached. Among restarts, returns the fit with the
    smallest total assignment distance under its own final metric.
    """

    def run(labels: np.ndarray) -> _RunState:
        return _lloyd_run(
            X.values,
            labels,
            n_clusters,
            max_iter,
            weiszfeld,
            center_kind="spatial-median",
            sscm_ridge=ridge,
            sscm_banding=banding,
        )

    return _fit_with_restarts(X, n_clusters, "spatial-median", weiszfeld, init, rng, init_labels, run)


def fit_sparse_sm(
    X: DataMatrix,
    n_clusters: int,
    tau: float,
    max_iter: int = 100,
    init: InitRule = InitRule(),
    rng: RngSpec = RngSpec(0),
    weiszfeld: WeiszfeldConfig = DEFAULT_WEISZFELD,
    reset_excluded: bool = False,
    init_labels: np.ndarray | None = None,
) -> FitResult:
    """Sparse spatial-median clustering by hard dimension exclusion.

    Each iteration updates full-space spatial-median centers, recomputes the
    per-coordinate separation scores, keeps coordinates scoring at least
    ``tau``, and reassigns by squared Euclidean distance over the kept
    coordinates. If the threshold would exclude everything the single
    best-scoring coordinate is kept instead. With ``reset_excluded`` the
    excluded coordinates of every center are pinned to the overall
    spatial median, making the exclusion explicit in the centers.
    At ``tau=0`` the procedure is plain K-spatial-median clustering.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")

    def run(labels: np.ndarray) -> _RunState:
        return _lloyd_run(
            X.values,
            labels,
            n_clusters,
            max_iter,
            weiszfeld,
            center_kind="spatial-median",
            tau=tau,
            reset_excluded=reset_excluded,
        )

    return _fit_with_restarts(X, n_clusters, "spatial-median", weiszfeld, init, rng, init_labels, run, tau=tau)


def fit_baseline(
    X: DataMatrix,
    n_clusters: int,
    rule: CenterRule,
    tau: float | None = None,
    max_iter: int = 100,
    init: InitRule = InitRule(),
    rng: RngSpec = RngSpec(0),
    weiszfeld: WeiszfeldConfig = DEFAULT_WEISZFELD,
    init_labels: np.ndarray | None = None,
) -> FitResult:
    """Lloyd-style baselines under a pluggable center rule.

    ``mean`` gives K-means (squared Euclidean assignment), ``coordinate-median``
    gives K-medians (l1 assignment), ``spatial-median`` gives plain
    K-spatial-median. Passing ``tau`` composes any of them with the same
    hard-threshold dimension exclusion used by the sparse engine.
    """
    if tau is not None and tau < 0:
        raise ValueError("tau must be >= 0")

    def run(labels: np.ndarray) -> _RunState:
        return _lloyd_run(
            X.values,
            labels,
            n_clusters,
            max_iter,
            weiszfeld,
            center_kind=rule.kind,
            tau=tau,
        )

    return _fit_with_restarts(X, n_clusters, rule.kind, weiszfeld, init, rng, init_labels, run, tau=tau)


# ---------------------------------------------------------------------------
# shared machinery


@dataclass
class _RunState:
    labels: np.ndarray
    centers: np.ndarray
    diagnostics: FitDiagnostics
    objective: float
    sparse: SparseState | None = None
    metric: SscmEstimate | None = None


def _fit_with_restarts(X, n_clusters, center_kind, weiszfeld, init, rng, init_labels, run, tau=None):
    if not 1 <= n_clusters <= X.n:
        raise ValueError("need 1 <= n_clusters <= n")
    if n_clusters == 1:
        return _fit_single_cluster(X, center_kind, weiszfeld, tau)

    if init_labels is not None:
        start = np.asarray(init_labels, dtype=int) - 1
        if start.shape != (X.n,) or start.min() < 0 or start.max() >= n_clusters:
            raise ValueError("init_labels must be n labels in 1..n_clusters")
        schedules = [start]
    elif init.kind == "max-min-seeding":
        seeds = max_min_seed(X, n_clusters)
        d = pairwise_distances(X.values, seeds.centers, EUCLIDEAN)
        schedules = [d.argmin(axis=1)]
    else:
        schedules = [
            rng.child(s).generator().integers(0, n_clusters, size=X.n)
            for s in range(init.restarts)
        ]

    best: _RunState | None = None
    for labels0 in schedules:
        state = run(labels0.copy())
        if best is None or state.objective < best.objective:
            best = state
    return FitResult(
        partition=Partition.from_zero_based(best.labels, n_clusters),
        centers=CenterSet(best.centers),
        diagnostics=best.diagnostics,
        objective=best.objective,
        sparse=best.sparse,
        metric=best.metric,
    )


def _fit_single_cluster(X, center_kind, weiszfeld, tau):
    center = _single_center(X.values, center_kind, weiszfeld)
    if center_kind == "coordinate-median":
        obj = float(np.abs(X.values - center).sum())
    else:
        obj = float(((X.values - center) ** 2).sum())
    diag = FitDiagnostics(iterations_used=1, converged=True, objective_trace=[obj])
    sparse = None
    if tau is not None:
        sparse = SparseState(np.zeros(X.p), np.arange(X.p), float(tau))
    return FitResult(
        partition=Partition(np.ones(X.n, dtype=int), 1),
        centers=CenterSet(center[None, :]),
        diagnostics=diag,
        objective=obj,
        sparse=sparse,
    )


def _single_center(values, kind, cfg):
    if kind == "mean":
        return values.mean(axis=0)
    if kind == "coordinate-median":
        return np.median(values, axis=0)
    return spatial_median(values, cfg)


def _lloyd_run(
    values,
    labels,
    n_clusters,
    max_iter,
    weiszfeld,
    center_kind,
    tau=None,
    reset_excluded=False,
    sscm_ridge=None,
    sscm_banding=None,
):
    """One init-to-convergence run shared by every engine."""
    n, p = values.shape
    diag = FitDiagnostics()
    centers = None
    est = None
    sparse = None
    baseline = None
    use_l1 = center_kind == "coordinate-median"

    for iteration in range(1, max_iter + 1):
        centers, labels, repairs = _centers_with_repair(
            values, labels, n_clusters, center_kind, weiszfeld, centers
        )
        diag.empty_cluster_repairs += repairs

        active = None
        if tau is not None:
            scores = separation_scores(centers)
            try:
                active = active_set(scores, tau)
                fallback = False
            except AllExcluded:
                active = np.array([int(scores.argmax())])
                fallback = True
            sparse = SparseState(scores, active, float(tau), fallback)
            if reset_excluded and active.size < p:
                if baseline is None:
                    baseline = _single_center(values, center_kind, weiszfeld)
                excluded = np.setdiff1d(np.arange(p), active, assume_unique=True)
                centers = centers.copy()
                centers[:, excluded] = baseline[excluded]

        if sscm_ridge is not None:
            est = estimate_sscm(
                DataMatrix(values),
                CenterSet(centers),
                Partition.from_zero_based(labels, n_clusters),
                sscm_ridge,
                sscm_banding,
            )
            d = pairwise_distances(values, centers, inverse_metric(est))
        elif use_l1:
            d = l1_distances(values, centers, active=active)
        else:
            d = pairwise_distances(values, centers, EUCLIDEAN, active=active)

        new_labels = d.argmin(axis=1)
        new_labels, repairs = _fix_empty_after_assign(new_labels, n_clusters, d)
        diag.empty_cluster_repairs += repairs
        objective = float(d[np.arange(n), new_labels].sum())
        diag.objective_trace.append(objective)
        diag.iterations_used = iteration
        if np.array_equal(new_labels, labels):
            diag.converged = True
            break
        labels = new_labels

    # Restart-selection objective. Restricted objectives of runs with
    # different final active sets are not comparable (a run collapsed onto
    # one coordinate sums over one coordinate), so sparse engines are
    # compared on the full coordinate space; the SSCM engine keeps its
    # own-metric objective.
    if sscm_ridge is not None:
        selection = diag.objective_trace[-1]
    else:
        residual = values - centers[labels]
        if use_l1:
            selection = float(np.abs(residual).sum())
        else:
            selection = float((residual * residual).sum())
    return _RunState(labels, centers, diag, selection, sparse, est)


def _centers_with_repair(values, labels, n_clusters, kind, cfg, prev_centers):
    """Centers for every cluster, reassigning a representative point into
    each empty cluster first. Returns (centers, possibly-updated labels,
    repair count)."""
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=n_clusters)
    repairs = 0
    for k in np.flatnonzero(sizes == 0):
        if prev_centers is not None:
            ref = prev_centers[k]
        else:
            ref = values.mean(axis=0)
        dist = ((values - ref) ** 2).sum(axis=1)
        dist[sizes[labels] <= 1] = -np.inf  # never drain a singleton donor
        donor = int(dist.argmax())
        sizes[labels[donor]] -= 1
        labels[donor] = k
        sizes[k] += 1
        repairs += 1

    centers = np.empty((n_clusters, values.shape[1]))
    for k in range(n_clusters):
        members = values[labels == k]
        if kind == "mean":
            centers[k] = members.mean(axis=0)
        elif kind == "coordinate-median":
            centers[k] = np.median(members, axis=0)
        else:
            centers[k] = spatial_median(members, cfg)
        if not np.all(np.isfinite(centers[k])):
            # degenerate cluster: fall back to the member closest to the
            # previous center (or the first member)
            if prev_centers is not None:
                closest = ((members - prev_centers[k]) ** 2).sum(axis=1).argmin()
            else:
                closest = 0
            centers[k] = members[closest]
            repairs += 1
    return centers, labels, repairs


def _fix_empty_after_assign(labels, n_clusters, d):
    """Post-assignment empty-cluster fix: move the observation farthest from
    its own center (under the engine's current distances) into each empty
    cluster, lowest cluster index first."""
    sizes = np.bincount(labels, minlength=n_clusters)
    empties = np.flatnonzero(sizes == 0)
    if empties.size == 0:
        return labels, 0
    labels = labels.copy()
    repairs = 0
    for k in empties:
        own = d[np.arange(labels.size), labels].copy()
        own[sizes[labels] <= 1] = -np.inf
        donor = int(own.argmax())
        sizes[labels[donor]] -= 1
        labels[donor] = k
        sizes[k] += 1
        repairs += 1
    return labels, repairs


# ---------------------------------------------------------------------------
# engine registry used by tuning, benchmarks, and the CLI

ENGINES = (
    "sm-sscm",
    "sparse-sm",
    "kmeans",
    "kmedians",
    "kspatial",
    "sparse-kmeans",
    "sparse-kmedians",
)

SPARSE_ENGINES = ("sparse-sm", "sparse-kmeans", "sparse-kmedians")

_BASELINE_RULES = {
    "kmeans": "mean",
    "kmedians": "coordinate-median",
    "kspatial": "spatial-median",
    "sparse-kmeans": "mean",
    "sparse-kmedians": "coordinate-median",
}


@dataclass(frozen=True)
class EngineConfig:
    """Everything needed to run one engine apart from the data, K and tau."""

    engine: str = "sparse-sm"
    restarts: int = 20
    max_iter: int = 100
    init: str = "random-assignment"
    ridge: float = 0.1
    banding: int | None = None
    reset_excluded: bool = False
    weiszfeld: WeiszfeldConfig = DEFAULT_WEISZFELD

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine: {self.engine!r}")

    @property
    def needs_tau(self) -> bool:
        return self.engine in SPARSE_ENGINES

    def with_restarts(self, restarts: int) -> "EngineConfig":
        return replace(self, restarts=restarts)


def fit_engine(
    X: DataMatrix,
    n_clusters: int,
    config: EngineConfig,
    rng: RngSpec,
    tau: float | None = None,
) -> FitResult:
    """Dispatch to the engine named in ``config``."""
    init = InitRule(config.init, config.restarts)
    common = dict(max_iter=config.max_iter, init=init, rng=rng, weiszfeld=config.weiszfeld)
    if config.engine == "sm-sscm":
        return fit_sm_sscm(X, n_clusters, ridge=config.ridge, banding=config.banding, **common)
    if config.engine == "sparse-sm":
        if tau is None:
            raise ValueError("sparse-sm requires tau")
        return fit_sparse_sm(X, n_clusters, tau, reset_excluded=config.reset_excluded, **common)
    rule = CenterRule(_BASELINE_RULES[config.engine])
    if config.needs_tau and tau is None:
        raise ValueError(f"{config.engine} requires tau")
    return fit_baseline(X, n_clusters, rule, tau=tau if config.needs_tau else None, **common)
