"""Shared data model: validated matrices, partitions, centers, RNG streams.

Everything here is immutable after construction and safe to share across
worker processes. Cluster labels are 1-based (values in ``1..K``); feature
indices elsewhere in the package are 0-based numpy indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SpmclustError(Exception):
    """Base class for all library errors."""


class EmptyInput(SpmclustError):
    """Raised when an input matrix has no rows or no columns."""


class NonFiniteEntry(SpmclustError):
    """Raised when a matrix contains NaN or infinity.

    ``row`` and ``col`` are 1-based, matching all user-facing diagnostics.
    """

    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite entry at row {row}, column {col}")


class DimensionMismatch(SpmclustError):
    """Raised when vector/matrix dimensions do not agree."""


class LengthMismatch(SpmclustError):
    """Raised when two label vectors have different lengths."""


@dataclass(frozen=True)
class DataMatrix:
    """An n x p observation matrix with all entries finite.

    Rows are observations, columns are features. Construct via
    :func:`validate_matrix`, which enforces finiteness.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got ndim={self.values.ndim}")
        self.values.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Partition:
    """Cluster assignments of n observations into clusters 1..K."""

    assignments: np.ndarray
    n_clusters: int

    def __post_init__(self):
        labels = np.asarray(self.assignments, dtype=int)
        object.__setattr__(self, "assignments", labels)
        if labels.ndim != 1:
            raise ValueError("assignments must be a 1-d vector")
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if labels.size and (labels.min() < 1 or labels.max() > self.n_clusters):
            raise ValueError(f"labels must lie in 1..{self.n_clusters}")
        labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.assignments.size

    def indices(self, k: int) -> np.ndarray:
        """Row indices of cluster k (1-based cluster label)."""
        return np.flatnonzero(self.assignments == k)

    def sizes(self) -> np.ndarray:
        """Cluster sizes as a length-K vector."""
        return np.bincount(self.assignments, minlength=self.n_clusters + 1)[1:]

    @staticmethod
    def from_zero_based(labels: np.ndarray, n_clusters: int) -> "Partition":
        return Partition(np.asarray(labels, dtype=int) + 1, n_clusters)


@dataclass(frozen=True)
class CenterSet:
    """K center vectors in R^p, one row per cluster."""

    centers: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "centers", arr)
        if arr.ndim != 2:
            raise ValueError("centers must be a K x p matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("centers must be finite")
        arr.setflags(write=False)

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    @property
    def p(self) -> int:
        return self.centers.shape[1]


@dataclass(frozen=True)
class RngSpec:
    """Deterministic random stream identified by (seed, stream).

    The same (seed, stream) pair always yields the same sequence, regardless
    of execution order or thread count. Child streams derived with
    :meth:`child` never collide: the stream id is extended injectively
    (Python ints are unbounded, so no wraparound).
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise ValueError("seed and stream must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        )

    def child(self, index: int) -> "RngSpec":
        """Derive an independent substream; injective for index < 2**32."""
        if not 0 <= index < 2**32:
            raise ValueError("child index must lie in [0, 2**32)")
        return RngSpec(self.seed, self.stream * 2**32 + index + 1)


@dataclass
class FitDiagnostics:
    """Run diagnostics attached to every clustering fit."""

    iterations_used: int = 0
    converged: bool = False
    objective_trace: list[float] = field(default_factory=list)
    empty_cluster_repairs: int = 0


def validate_matrix(raw) -> DataMatrix:
    """Validate a raw matrix: 2-d, nonempty, all entries finite.

    Accepts anything array-like, including an existing :class:`DataMatrix`
    (idempotent). Raises :class:`EmptyInput` or :class:`NonFiniteEntry`;
    the error coordinates are 1-based.
    """
    if isinstance(raw, DataMatrix):
        values = raw.values
    else:
        values = np.asarray(raw, dtype=float)
    if values.ndim == 1:
        values = values.reshape(1, -1) if values.size else values.reshape(0, 0)
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise EmptyInput("matrix must have at least one row and one column")
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise NonFiniteEntry(int(row) + 1, int(col) + 1)
    return DataMatrix(values)


def standardize_columns(X: DataMatrix, method: str = "median-mad") -> DataMatrix:
    """Center and scale each column.

    ``median-mad`` (default) centers by the column median and scales by the
    median absolute deviation; columns with zero MAD (constant columns in
    particular) are centered but left unscaled. ``zscore`` uses mean and
    standard deviation with the same zero-scale convention.
    """
    values = X.values
    if method == "median-mad":
        center = np.median(values, axis=0)
        scale = np.median(np.abs(values - center), axis=0)
    elif method == "zscore":
        center = values.mean(axis=0)
        scale = values.std(axis=0)
    else:
        raise ValueError(f"unknown standardization method: {method!r}")
    scale = np.where(scale > 0, scale, 1.0)
    return DataMatrix((values - center) / scale)
