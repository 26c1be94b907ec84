"""Independent oracles shared by the unit and acceptance suites.

Everything here deliberately avoids the library's own computation paths:
medians come from zooming grid search, pair-based indices from explicit
O(n^2) pair loops, and entropies from direct summation over label vectors.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def grid_median_objective(points: np.ndarray, rounds: int = 7, grid: int = 15) -> float:
    """Best objective sum ||x - m|| found by a zooming dense grid search."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim = points.shape[1]
    lo = points.min(axis=0) - 1e-6
    hi = points.max(axis=0) + 1e-6

    def objective(m):
        return float(np.linalg.norm(points - m, axis=1).sum())

    best_point = (lo + hi) / 2
    best_val = objective(best_point)
    for _ in range(rounds):
        axes = [np.linspace(lo[d], hi[d], grid) for d in range(dim)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        dists = np.linalg.norm(points[None, :, :] - mesh[:, None, :], axis=2).sum(axis=1)
        idx = int(dists.argmin())
        if dists[idx] < best_val:
            best_val = float(dists[idx])
            best_point = mesh[idx]
        span = (hi - lo) / (grid - 1)
        lo = best_point - 2 * span
        hi = best_point + 2 * span
    return best_val


def in_convex_hull(points: np.ndarray, x: np.ndarray, tol: float = 1e-7) -> bool:
    """LP feasibility: does x lie in the convex hull of the rows of points?"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    a_eq = np.vstack([points.T, np.ones(m)])
    b_eq = np.concatenate([np.asarray(x, dtype=float), [1.0]])
    res = linprog(
        c=np.zeros(m),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * m,
        method="highs",
        options={"primal_feasibility_tolerance": tol},
    )
    return bool(res.success)


# ---------------------------------------------------------------------------
# pair-counting and entropy oracles over raw label vectors


def _pair_stats(a, b):
    n = len(a)
    tp = both_a = both_b = 0
    for i, j in itertools.combinations(range(n), 2):
        same_a = a[i] == a[j]
        same_b = b[i] == b[j]
        tp += same_a and same_b
        both_a += same_a
        both_b += same_b
    total = n * (n - 1) // 2
    return tp, both_a, both_b, total


def ari_oracle(a, b) -> float:
    tp, both_a, both_b, total = _pair_stats(a, b)
    expected = both_a * both_b / total
    denom = (both_a + both_b) / 2 - expected
    if denom == 0:
        return 1.0
    return (tp - expected) / denom


def fmi_oracle(a, b) -> float:
    tp, both_a, both_b, _ = _pair_stats(a, b)
    if both_a == 0 or both_b == 0:
        return 0.0
    return tp / math.sqrt(both_a * both_b)


def purity_oracle(pred, truth) -> float:
    n = len(pred)
    total = 0
    for cluster in set(pred):
        members = [truth[i] for i in range(n) if pred[i] == cluster]
        total += max(members.count(c) for c in set(members))
    return total / n


def _entropy_oracle(labels) -> float:
    n = len(labels)
    out = 0.0
    for value in set(labels):
        p = sum(1 for v in labels if v == value) / n
        out -= p * math.log(p)
    return out


def _mutual_information_oracle(a, b) -> float:
    n = len(a)
    out = 0.0
    for va in set(a):
        for vb in set(b):
            joint = sum(1 for i in range(n) if a[i] == va and b[i] == vb) / n
            if joint > 0:
                pa = sum(1 for v in a if v == va) / n
                pb = sum(1 for v in b if v == vb) / n
                out += joint * math.log(joint / (pa * pb))
    return out


def nmi_oracle(a, b) -> float:
    ha = _entropy_oracle(a)
    hb = _entropy_oracle(b)
    if ha == 0 and hb == 0:
        return 1.0
    return 2 * _mutual_information_oracle(a, b) / (ha + hb)


def v_measure_oracle(pred, truth) -> float:
    h_truth = _entropy_oracle(truth)
    h_pred = _entropy_oracle(pred)
    mi = _mutual_information_oracle(pred, truth)
    homogeneity = 1.0 if h_truth == 0 else mi / h_truth
    completeness = 1.0 if h_pred == 0 else mi / h_pred
    if homogeneity + completeness == 0:
        return 0.0
    return 2 * homogeneity * completeness / (homogeneity + completeness)


def all_partitions(n: int):
    """Every set partition of n items as a canonical 1-based label vector."""
    if n == 0:
        return
    labels = [0] * n

    def recurse(i, used):
        if i == n:
            yield np.array(labels) + 1
            return
        for k in range(used + 1):
            labels[i] = k
            yield from recurse(i + 1, max(used, k + 1))

    yield from recurse(0, 0)
