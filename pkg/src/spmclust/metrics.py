"""External clustering evaluation: ARI, purity, NMI, FMI, V-measure.

All five are computed from the contingency table between a predicted and a
true partition. Pair-based indices (ARI, FMI) count observation pairs placed
together or apart; information-based indices (NMI, V-measure) use Shannon
entropies with natural logs. Degenerate conventions: two zero-entropy
partitions count as perfect agreement, and zero denominators in FMI give 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LengthMismatch, Partition


@dataclass(frozen=True)
class ContingencyTable:
    """counts[k, j] = number of observations in predicted cluster k+1 and
    true class j+1."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", arr)
        if arr.ndim != 2 or (arr < 0).any():
            raise ValueError("counts must be a nonnegative 2-d matrix")
        arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def contingency(pred: Partition, truth: Partition) -> ContingencyTable:
    if pred.n != truth.n:
        raise LengthMismatch(f"partitions have lengths {pred.n} and {truth.n}")
    counts = np.zeros((pred.n_clusters, truth.n_clusters), dtype=np.int64)
    np.add.at(counts, (pred.assignments - 1, truth.assignments - 1), 1)
    return ContingencyTable(counts)


def _pair_counts(t: ContingencyTable):
    def comb2(v):
        return v * (v - 1) // 2

    counts = t.counts
    together_both = int(comb2(counts).sum())
    together_pred = int(comb2(counts.sum(axis=1)).sum())
    together_true = int(comb2(counts.sum(axis=0)).sum())
    total = int(comb2(np.int64(t.n)))
    return together_both, together_pred, together_true, total


def ari(t: ContingencyTable) -> float:
    """Hubert-Arabie adjusted Rand index; 1 iff the partitions agree up to
    relabeling, 0 in expectation under independent labelings."""
    if t.n < 2:
        raise ValueError("ARI needs at least two observations")
    tp, pred_pairs, true_pairs, total = _pair_counts(t)
    expected = pred_pairs * true_pairs / total
    denom = (pred_pairs + true_pairs) / 2.0 - expected
    if denom == 0:
        # both partitions trivial in the same way (e.g. all singletons)
        return 1.0
    return float((tp - expected) / denom)


def purity(t: ContingencyTable) -> float:
    """Fraction of observations in the majority true class of their cluster."""
    if t.n < 1:
        raise ValueError("purity needs at least one observation")
    return float(t.counts.max(axis=1).sum() / t.n)


def _entropy(freq: np.ndarray, n: int) -> float:
    pos = freq[freq > 0] / n
    return float(-(pos * np.log(pos)).sum())


def nmi(t: ContingencyTable) -> float:
    """Normalized mutual information, 2 I(C;L) / (H(C) + H(L))."""
    if t.n < 1:
        raise ValueError("NMI needs at least one observation")
    n = t.n
    counts = t.counts
    a = counts.sum(axis=1)
    b = counts.sum(axis=0)
    h_pred = _entropy(a, n)
    h_true = _entropy(b, n)
    if h_pred == 0 and h_true == 0:
        return 1.0
    nz = counts > 0
    pij = counts[nz] / n
    outer = np.outer(a, b)[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    value = 2.0 * mi / (h_pred + h_true)
    return float(min(max(value, 0.0), 1.0))


def fmi(t: ContingencyTable) -> float:
    """Fowlkes-Mallows index TP / sqrt((TP+FP)(TP+FN)) over observation pairs."""
    if t.n < 2:
        raise ValueError("FMI needs at least two observations")
    tp, pred_pairs, true_pairs, _ = _pair_counts(t)
    if pred_pairs == 0 or true_pairs == 0:
        return 0.0
    return float(tp / np.sqrt(pred_pairs * true_pairs))


def v_measure(t: ContingencyTable) -> float:
    """Harmonic mean of homogeneity and completeness."""
    if t.n < 1:
        raise ValueError("V-measure needs at least one observation")
    n = t.n
    counts = t.counts
    a = counts.sum(axis=1)
    b = counts.sum(axis=0)
    h_true = _entropy(b, n)
    h_pred = _entropy(a, n)
    nz = counts > 0
    pij = counts[nz] / n
    row = np.broadcast_to(a[:, None], counts.shape)[nz]
    col = np.broadcast_to(b[None, :], counts.shape)[nz]
    h_true_given_pred = float(-(pij * np.log(counts[nz] / row)).sum())
    h_pred_given_true = float(-(pij * np.log(counts[nz] / col)).sum())
    homogeneity = 1.0 if h_true == 0 else 1.0 - h_true_given_pred / h_true
    completeness = 1.0 if h_pred == 0 else 1.0 - h_pred_given_true / h_pred
    if homogeneity + completeness == 0:
        return 0.0
    return float(2.0 * homogeneity * completeness / (homogeneity + completeness))


METRIC_FUNCTIONS = {
    "ari": ari,
    "purity": purity,
    "nmi": nmi,
    "fmi": fmi,
    "v_measure": v_measure,
}


def score_all(pred: Partition, truth: Partition, names=None) -> dict[str, float]:
    """Evaluate the requested metrics (default: all five) in one pass."""
    table = contingency(pred, truth)
    names = list(METRIC_FUNCTIONS) if names is None else list(names)
    return {name: METRIC_FUNCTIONS[name](table) for name in names}
