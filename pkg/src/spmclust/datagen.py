"""Simulation designs: sparse mean shifts, AR(1) dependence, heavy tails,
and row- or cell-wise contamination, with planted labels and planted
informative coordinates.

Sampling is a pure function of (design, rng): the same pair always yields a
bit-identical dataset. Contamination draws are mask-independent, so designs
differing only in a contamination rate share the same clean data and have
nested corruption masks under a common stream, which keeps robustness sweeps
tightly coupled across contamination levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CenterSet, DataMatrix, Partition, RngSpec

FAMILIES = ("gaussian", "student-t", "scale-mixture")


@dataclass(frozen=True)
class CovarianceSpec:
    """Within-cluster covariance: AR(1) decay, optionally with block scales.

    ``ar1`` gives entries rho^|i-j|. ``heteroscedastic-ar1`` rescales an
    AR(1) correlation by block standard deviations: variances 1, 4, 9 over
    the first, middle, and last third of the coordinates.
    """

    kind: str = "ar1"
    rho: float = 0.9
    scale_blocks: tuple[float, float, float] = (1.0, 4.0, 9.0)

    def __post_init__(self):
        if self.kind not in ("ar1", "heteroscedastic-ar1"):
            raise ValueError(f"unknown covariance kind: {self.kind!r}")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")


@dataclass(frozen=True)
class ContaminationSpec:
    """Outlier mechanism applied after clean sampling.

    ``row-wise`` replaces whole observations with N(0, sigma^2 I) noise at
    rate ``epsilon``. ``cell-wise`` replaces individual entries with
    N(0, sd^2) noise, at rate ``epsilon`` on informative coordinates and
    ``epsilon_noise`` on the remaining ones.
    """

    kind: str
    epsilon: float
    sigma: float = 5.0
    epsilon_noise: float = 0.10
    sd: float = 3.0

    def __post_init__(self):
        if self.kind not in ("row-wise", "cell-wise"):
            raise ValueError(f"unknown contamination kind: {self.kind!r}")
        for name in ("epsilon", "epsilon_noise"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class SimDesign:
    """A planted-cluster design: K blocks of n0 observations in R^p whose
    means differ only on the first ``s_p`` coordinates (shift ``delta``)."""

    n0: int
    p: int
    n_clusters: int = 3
    s_p: int | None = None
    delta: float = 3.0
    family: str = "gaussian"
    df: float = 3.0
    mix_prob: float = 0.9
    mix_factor: float = 3.0
    covariance: CovarianceSpec = CovarianceSpec()
    contamination: ContaminationSpec | None = None

    def __post_init__(self):
        if self.s_p is None:
            object.__setattr__(self, "s_p", max(1, self.p // 20))
        if not 1 <= self.s_p <= self.p:
            raise ValueError("need 1 <= s_p <= p")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family: {self.family!r}")
        if self.family == "student-t" and self.df <= 0:
            raise ValueError("df must be > 0")
        if not 0 <= self.mix_prob <= 1:
            raise ValueError("mix_prob must lie in [0, 1]")
        if self.mix_factor <= 0:
            raise ValueError("mix_factor must be > 0")

    @property
    def n(self) -> int:
        return self.n0 * self.n_clusters


@dataclass(frozen=True)
class SimOutput:
    X: DataMatrix
    truth: Partition
    informative: np.ndarray  # 0-based coordinate indices


def make_means(design: SimDesign) -> CenterSet:
    """Cluster means: zeros except alternating shifts on the informative
    coordinates, following the pattern (0, +delta, -delta, +2 delta, ...)."""
    means = np.zeros((design.n_clusters, design.p))
    for k in range(1, design.n_clusters):
        magnitude = (k + 1) // 2
        sign = 1.0 if k % 2 == 1 else -1.0
        means[k, : design.s_p] = sign * magnitude * design.delta
    return CenterSet(means)


def make_covariance(spec: CovarianceSpec, p: int) -> np.ndarray:
    idx = np.arange(p)
    corr = spec.rho ** np.abs(idx[:, None] - idx[None, :])
    if spec.kind == "ar1":
        return corr
    variances = np.empty(p)
    lo, hi = p // 3, 2 * p // 3
    variances[:lo] = spec.scale_blocks[0]
    variances[lo:hi] = spec.scale_blocks[1]
    variances[hi:] = spec.scale_blocks[2]
    root = np.sqrt(variances)
    return corr * np.outer(root, root)


def sample(design: SimDesign, rng: RngSpec) -> SimOutput:
    """Draw one dataset from the design with planted labels.

    Gaussian draws are mu + L z with L the Cholesky factor of the covariance;
    the Student-t family divides each row by sqrt(chi2(df)/df), and the
    scale-mixture family inflates each row by ``mix_factor`` with probability
    1 - ``mix_prob``. Contamination, when present, is applied afterwards from
    an independent substream.
    """
    gen = rng.child(0).generator()
    n, p = design.n, design.p
    sigma = make_covariance(design.covariance, p)
    chol = np.linalg.cholesky(sigma)
    noise = gen.standard_normal((n, p)) @ chol.T
    if design.family == "student-t":
        w = gen.chisquare(design.df, size=n)
        noise /= np.sqrt(w / design.df)[:, None]
    elif design.family == "scale-mixture":
        inflate = gen.random(n) >= design.mix_prob
        noise[inflate] *= design.mix_factor
    means = make_means(design).centers
    labels = np.repeat(np.arange(1, design.n_clusters + 1), design.n0)
    X = means[labels - 1] + noise
    informative = np.arange(design.s_p)
    if design.contamination is not None:
        X = contaminate(DataMatrix(X), design.contamination, informative, rng.child(1)).values
    return SimOutput(
        X=DataMatrix(X),
        truth=Partition(labels, design.n_clusters),
        informative=informative,
    )


def contaminate(
    X: DataMatrix,
    spec: ContaminationSpec,
    informative: np.ndarray,
    rng: RngSpec,
) -> DataMatrix:
    """Replace rows or cells with pure noise at the specified rates.

    All uniforms and replacement noise are drawn regardless of which rows or
    cells end up replaced, so the corruption masks for two rates on the same
    stream are nested.
    """
    gen = rng.generator()
    values = X.values.copy()
    if spec.kind == "row-wise":
        u = gen.random(X.n)
        replacement = gen.normal(0.0, spec.sigma, size=values.shape)
        mask = u < spec.epsilon
        values[mask] = replacement[mask]
    else:
        rates = np.full(X.p, spec.epsilon_noise)
        rates[np.asarray(informative, dtype=int)] = spec.epsilon
        u = gen.random(values.shape)
        replacement = gen.normal(0.0, spec.sd, size=values.shape)
        mask = u < rates[None, :]
        values[mask] = replacement[mask]
    return DataMatrix(values)
