"""Spatial-median solver and the distance kernels used by every assignment rule.

The spatial median (geometric median) minimizes the sum of Euclidean
distances to a point set. It is computed with a Weiszfeld fixed-point
iteration using the Vardi-Zhang modified step, which stays well defined when
an iterate lands on a data point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, SpmclustError


class EmptyActiveSet(SpmclustError):
    """Raised when a restricted distance is requested over no coordinates."""


@dataclass(frozen=True)
class WeiszfeldConfig:
    """Controls for the spatial-median iteration.

    ``tol`` is relative center movement; ``anchor_epsilon`` is the radius
    within which an iterate is treated as coinciding with a data point.
    """

    max_iter: int = 200
    tol: float = 1e-8
    anchor_epsilon: float = 1e-12

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.anchor_epsilon < 0:
            raise ValueError("anchor_epsilon must be >= 0")


DEFAULT_WEISZFELD = WeiszfeldConfig()


@dataclass(frozen=True)
class MetricSpec:
    """Assignment metric: plain squared Euclidean or a quadratic form x'Ax.

    For ``kind="quadratic-form"`` the weight matrix must be symmetric
    (within 1e-10) and strictly positive definite.
    """

    kind: str = "euclidean-squared"
    weight: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean-squared", "quadratic-form"):
            raise ValueError(f"unknown metric kind: {self.kind!r}")
        if self.kind == "quadratic-form":
            if self.weight is None:
                raise ValueError("quadratic-form metric requires a weight matrix")
            w = np.asarray(self.weight, dtype=float)
            object.__setattr__(self, "weight", w)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError("weight must be a square matrix")
            if not np.allclose(w, w.T, atol=1e-10):
                raise ValueError("weight matrix must be symmetric")
            if np.linalg.eigvalsh(w)[0] <= 0:
                raise ValueError("weight matrix must be positive definite")
            w.setflags(write=False)


EUCLIDEAN = MetricSpec()


@dataclass(frozen=True)
class WeiszfeldResult:
    point: np.ndarray
    iterations: int
    converged: bool
    objective_trace: tuple[float, ...]


def spatial_sign(r: np.ndarray) -> np.ndarray:
    """Unit vector r/||r||, with the zero vector mapped to itself."""
    r = np.asarray(r, dtype=float)
    norm = np.linalg.norm(r)
    if norm == 0:
        return np.zeros_like(r)
    return r / norm


def spatial_signs(rows: np.ndarray) -> np.ndarray:
    """Row-wise spatial signs of a matrix; zero rows stay zero."""
    rows = np.asarray(rows, dtype=float)
    norms = np.linalg.norm(rows, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms[:, None] > 0, rows / safe[:, None], 0.0)


def spatial_median_full(
    points: np.ndarray, cfg: WeiszfeldConfig = DEFAULT_WEISZFELD
) -> WeiszfeldResult:
    """Spatial median with diagnostics (iteration count, objective trace).

    Non-convergence within ``cfg.max_iter`` is not an error: the best iterate
    is returned with ``converged=False``. The iteration starts from the
    coordinate-wise mean, so the limit is a fixed deterministic function of
    the input (that matters for point sets with non-unique medians).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("spatial_median requires at least one point")
    if pts.shape[0] == 1:
        return WeiszfeldResult(pts[0].copy(), 0, True, ())

    y = pts.mean(axis=0)
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        diff = pts - y
        dist = np.linalg.norm(diff, axis=1)
        trace.append(float(dist.sum()))
        anchored = dist <= cfg.anchor_epsilon
        n_anchor = int(anchored.sum())
        if n_anchor == pts.shape[0]:
            converged = True  # every point coincides with the iterate
            break
        inv = 1.0 / dist[~anchored]
        t_step = (pts[~anchored] * inv[:, None]).sum(axis=0) / inv.sum()
        if n_anchor == 0:
            y_next = t_step
        else:
            # Vardi-Zhang step at a data point: pull toward the point unless
            # the residual direction sum already certifies optimality.
            r_vec = (diff[~anchored] * inv[:, None]).sum(axis=0)
            r_norm = np.linalg.norm(r_vec)
            if r_norm <= n_anchor:
                converged = True
                break
            ratio = n_anchor / r_norm
            y_next = (1.0 - ratio) * t_step + ratio * y
        move = np.linalg.norm(y_next - y)
        y = y_next
        if move <= cfg.tol * max(1.0, np.linalg.norm(y)):
            converged = True
            break
    return WeiszfeldResult(y, iterations, converged, tuple(trace))


def spatial_median(
    points: np.ndarray, cfg: WeiszfeldConfig = DEFAULT_WEISZFELD
) -> np.ndarray:
    """Minimizer of the summed Euclidean distances to ``points``."""
    return spatial_median_full(points, cfg).point


def distance(x: np.ndarray, m: np.ndarray, spec: MetricSpec = EUCLIDEAN) -> float:
    """Squared distance between two vectors under the given metric."""
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    if x.shape != m.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {m.shape} differ")
    d = x - m
    if spec.kind == "euclidean-squared":
        return float(d @ d)
    if spec.weight.shape[0] != d.shape[0]:
        raise DimensionMismatch(
            f"weight is {spec.weight.shape[0]}-dimensional, vectors are {d.shape[0]}"
        )
    return float(d @ spec.weight @ d)


def restricted_distance(x: np.ndarray, m: np.ndarray, active: np.ndarray) -> float:
    """Squared Euclidean distance over the coordinates in ``active`` only."""
    active = np.asarray(active, dtype=int)
    if active.size == 0:
        raise EmptyActiveSet("restricted distance needs a nonempty active set")
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    if x.shape != m.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {m.shape} differ")
    d = x[active] - m[active]
    return float(d @ d)


def pairwise_distances(
    X: np.ndarray,
    centers: np.ndarray,
    spec: MetricSpec = EUCLIDEAN,
    active: np.ndarray | None = None,
) -> np.ndarray:
    """n x K matrix of squared distances from each row of X to each center.

    ``active`` restricts the computation to a coordinate subset (Euclidean
    metric only, matching the hard-exclusion assignment rule).
    """
    X = np.asarray(X, dtype=float)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if active is not None:
        active = np.asarray(active, dtype=int)
        if active.size == 0:
            raise EmptyActiveSet("restricted distances need a nonempty active set")
        X = X[:, active]
        centers = centers[:, active]
    if spec.kind == "euclidean-squared":
        # ||x||^2 - 2 x.m + ||m||^2, clipped against rounding
        sq = (
            (X * X).sum(axis=1)[:, None]
            - 2.0 * X @ centers.T
            + (centers * centers).sum(axis=1)[None, :]
        )
        return np.maximum(sq, 0.0)
    out = np.empty((X.shape[0], centers.shape[0]))
    for k, m in enumerate(centers):
        diff = X - m
        out[:, k] = ((diff @ spec.weight) * diff).sum(axis=1)
    return np.maximum(out, 0.0)


def l1_distances(X: np.ndarray, centers: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """n x K matrix of l1 distances (coordinate-median engines)."""
    X = np.asarray(X, dtype=float)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if active is not None:
        active = np.asarray(active, dtype=int)
        if active.size == 0:
            raise EmptyActiveSet("restricted distances need a nonempty active set")
        X = X[:, active]
        centers = centers[:, active]
    return np.abs(X[:, None, :] - centers[None, :, :]).sum(axis=2)
