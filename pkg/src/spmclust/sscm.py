"""Regularized spatial-sign covariance estimation and its inverse metric.

The estimate averages outer products of spatial signs of within-cluster
residuals and adds a ridge, so its eigenvalues always lie in
[ridge, 1 + ridge] (banding off). Inverting it yields the common
Mahalanobis-type assignment metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import CenterSet, DataMatrix, Partition, SpmclustError
from .geometry import MetricSpec, spatial_signs


class SingularMatrix(SpmclustError):
    """Raised when the sign covariance cannot be inverted even after re-ridging."""


@dataclass(frozen=True)
class SscmEstimate:
    """Sign covariance plus ridge: sigma = S_hat + ridge * I."""

    sigma: np.ndarray
    ridge: float
    banding: int | None = None

    def __post_init__(self):
        sig = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", sig)
        if self.ridge <= 0:
            raise ValueError("ridge must be > 0")
        if sig.ndim != 2 or sig.shape[0] != sig.shape[1]:
            raise ValueError("sigma must be square")
        if not np.allclose(sig, sig.T, atol=1e-10):
            raise ValueError("sigma must be symmetric")
        sig.setflags(write=False)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def estimate_sscm(
    X: DataMatrix,
    centers: CenterSet,
    partition: Partition,
    ridge: float = 0.1,
    banding: int | None = None,
) -> SscmEstimate:
    """Average of sign outer-products of residuals, banded if asked, plus ridge.

    Residuals are taken against each observation's own cluster center; exact
    zeros (duplicate points sitting on a center) contribute zero sign vectors.
    Banding zeroes entries more than ``banding`` off the diagonal before the
    ridge is added, so the ridge restores definiteness when possible.
    """
    if ridge <= 0:
        raise ValueError("ridge must be > 0")
    if partition.n != X.n:
        raise ValueError("partition length does not match the data")
    residuals = X.values - centers.centers[partition.assignments - 1]
    signs = spatial_signs(residuals)
    s_hat = signs.T @ signs / X.n
    if banding is not None:
        idx = np.arange(X.p)
        s_hat = np.where(np.abs(idx[:, None] - idx[None, :]) <= banding, s_hat, 0.0)
    sigma = s_hat + ridge * np.eye(X.p)
    sigma = (sigma + sigma.T) / 2.0
    return SscmEstimate(sigma, ridge, banding)


def inverse_metric(est: SscmEstimate) -> MetricSpec:
    """Quadratic-form metric weighted by the inverse sign covariance.

    Banding can destroy positive definiteness; in that case one extra ridge
    is added and the factorization retried before giving up.
    """
    weight = _spd_inverse(est.sigma)
    if weight is None:
        weight = _spd_inverse(est.sigma + est.ridge * np.eye(est.p))
        if weight is None:
            raise SingularMatrix("sign covariance is singular even after extra ridge")
    return MetricSpec(kind="quadratic-form", weight=weight)


def _spd_inverse(sigma: np.ndarray) -> np.ndarray | None:
    try:
        factor = linalg.cho_factor(sigma, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    inv = linalg.cho_solve(factor, np.eye(sigma.shape[0]), check_finite=False)
    return (inv + inv.T) / 2.0
