"""Distribution and representation statistics for trained models.

Logit columns are compared against method-of-moments Logistic and Gumbel fits
through the exact one-sample KS distance.  Features are summarised by their
within/between-class covariances and the NC1 variability measure.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EULER_GAMMA = 0.5772156649015329
GATE_EPS = 1e-7
PINV_RTOL = 1e-10


class DegenerateDistributionError(ValueError):
    pass


class UndefinedCollapseError(ValueError):
    pass


class Family(str, enum.Enum):
    LOGISTIC = "logistic"
    GUMBEL = "gumbel"


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray
    n: int
    mean: float
    std: float
    skewness: float

    @classmethod
    def from_samples(cls, x) -> "EmpiricalDistribution":
        x = np.sort(np.asarray(x, dtype=np.float64).ravel())
        if x.size < 2:
            raise ValueError("need at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        mean = float(x.mean())
        std = float(x.std())
        skew = float(np.mean(((x - mean) / std) ** 3)) if std > 0 else 0.0
        x.setflags(write=False)
        return cls(x, int(x.size), mean, std, skew)


@dataclass(frozen=True)
class FittedCDF:
    family: Family
    loc: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    def cdf(self, x):
        y = (np.asarray(x, dtype=np.float64) - self.loc) / self.scale
        with np.errstate(over="ignore"):
            if self.family is Family.LOGISTIC:
                return np.exp(-np.logaddexp(0.0, -y))
            return np.exp(-np.exp(-y))

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.family is Family.LOGISTIC:
            return self.loc + self.scale * np.log(u / (1.0 - u))
        return self.loc - self.scale * np.log(-np.log(u))


def fit_cdf(dist: EmpiricalDistribution, family: Family) -> FittedCDF:
    """Method-of-moments fit of a Logistic or Gumbel location/scale."""
    family = Family(family)
    if not dist.std > 0:
        raise DegenerateDistributionError("zero-variance samples cannot be fitted")
    if family is Family.LOGISTIC:
        return FittedCDF(family, dist.mean, dist.std * math.sqrt(3.0) / math.pi)
    scale = dist.std * math.sqrt(6.0) / math.pi
    return FittedCDF(family, dist.mean - EULER_GAMMA * scale, scale)


def ks_distance(dist: EmpiricalDistribution, cdf: FittedCDF) -> float:
    """Exact one-sample Kolmogorov-Smirnov statistic sup |ECDF - F|."""
    f = cdf.cdf(dist.samples)
    i = np.arange(1, dist.n + 1)
    upper = np.abs(i / dist.n - f)
    lower = np.abs(f - (i - 1) / dist.n)
    return float(max(upper.max(), lower.max()))


# --------------------------------------------------------------------------
# Per-class logit alignment

GROUPS = ("many", "medium", "few")


@dataclass
class ClassLogitTable:
    """Per-class logit samples; ``None`` marks a class with fewer than 2 samples."""

    distributions: list[EmpiricalDistribution | None]
    groups: list[str]

    def __post_init__(self):
        if len(self.distributions) < 2:
            raise ValueError("need at least 2 classes")
        if len(self.groups) != len(self.distributions):
            raise ValueError("one group tag per class")

    @property
    def num_classes(self) -> int:
        return len(self.distributions)

    @classmethod
    def from_samples(cls, per_class: Sequence[Sequence[float]], groups: Sequence[str] | None = None):
        dists = []
        for x in per_class:
            x = np.asarray(x, dtype=np.float64)
            dists.append(EmpiricalDistribution.from_samples(x) if x.size >= 2 else None)
        if groups is None:
            groups = frequency_groups([len(x) for x in per_class])
        return cls(dists, list(groups))


def frequency_groups(counts: Sequence[int]) -> list[str]:
    """Many = largest third of classes by count, few = smallest third, rest medium.

    Ties are broken by class index (lower index ranks as more frequent).
    """
    k = len(counts)
    third = k // 3
    order = sorted(range(k), key=lambda c: (-counts[c], c))
    groups = ["medium"] * k
    for rank, c in enumerate(order):
        if rank < third:
            groups[c] = "many"
        elif rank >= k - third:
            groups[c] = "few"
    return groups


@dataclass
class ClassAlignment:
    cls: int
    group: str
    skipped: bool
    n: int = 0
    mean: float = math.nan
    std: float = math.nan
    skewness: float = math.nan
    logistic_loc: float = math.nan
    logistic_scale: float = math.nan
    gumbel_loc: float = math.nan
    gumbel_scale: float = math.nan
    ks_logistic: float = math.nan
    ks_gumbel: float = math.nan
    winner: str | None = None


@dataclass
class AlignmentReport:
    classes: list[ClassAlignment] = field(default_factory=list)

    @property
    def evaluated(self) -> list[ClassAlignment]:
        return [c for c in self.classes if not c.skipped]

    @property
    def gumbel_fraction(self) -> float:
        ev = self.evaluated
        if not ev:
            return math.nan
        return sum(c.winner == Family.GUMBEL.value for c in ev) / len(ev)

    @property
    def logistic_fraction(self) -> float:
        ev = self.evaluated
        if not ev:
            return math.nan
        return 1.0 - self.gumbel_fraction

    @property
    def skipped(self) -> list[int]:
        return [c.cls for c in self.classes if c.skipped]


def align_class(k: int, dist: EmpiricalDistribution | None, group: str) -> ClassAlignment:
    if dist is None or not dist.std > 0:
        return ClassAlignment(k, group, skipped=True, n=0 if dist is None else dist.n)
    lo = fit_cdf(dist, Family.LOGISTIC)
    gu = fit_cdf(dist, Family.GUMBEL)
    ks_lo = ks_distance(dist, lo)
    ks_gu = ks_distance(dist, gu)
    return ClassAlignment(
        k, group, False, dist.n, dist.mean, dist.std, dist.skewness,
        lo.loc, lo.scale, gu.loc, gu.scale, ks_lo, ks_gu,
        Family.GUMBEL.value if ks_gu < ks_lo else Family.LOGISTIC.value,
    )


def logit_alignment_report(table: ClassLogitTable, workers: int = 1) -> AlignmentReport:
    """Fit both families per class and record which one is KS-closer.

    Classes are independent; with ``workers > 1`` they are evaluated on a
    thread pool and merged back in class order.
    """
    jobs = list(zip(range(table.num_classes), table.distributions, table.groups))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda j: align_class(*j), jobs))
    else:
        rows = [align_class(*j) for j in jobs]
    return AlignmentReport(rows)


# --------------------------------------------------------------------------
# Channel attention

def attention_entropy(attn, base2: bool = True) -> float:
    """Mean binary entropy of the gate values (all channels, all rows)."""
    a = np.asarray(attn, dtype=np.float64)
    if a.size == 0:
        raise ValueError("empty attention tensor")
    a = np.clip(a, GATE_EPS, 1.0 - GATE_EPS)
    h = -(a * np.log(a) + (1.0 - a) * np.log1p(-a))
    if base2:
        h = h / math.log(2.0)
    return float(h.mean())


def attention_variance(attn_per_layer: Sequence) -> list[float]:
    """Population variance of the gate values in each layer."""
    if len(attn_per_layer) == 0:
        raise ValueError("need at least one layer")
    return [float(np.var(np.asarray(a, dtype=np.float64))) for a in attn_per_layer]


# --------------------------------------------------------------------------
# Neural collapse

@dataclass(frozen=True)
class CovariancePair:
    sigma_w: np.ndarray
    sigma_b: np.ndarray
    num_classes: int

    @property
    def dim(self) -> int:
        return self.sigma_w.shape[0]


def covariances(features, labels, num_classes: int | None = None) -> CovariancePair:
    """Within-class (1/n-normalised) and between-class (1/K-normalised) covariances."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    y = np.asarray(labels).astype(np.int64)
    if f.shape[0] != y.shape[0] or f.shape[0] == 0:
        raise ValueError("features and labels must be non-empty and aligned")
    k = int(y.max()) + 1 if num_classes is None else num_classes
    counts = np.bincount(y, minlength=k)
    if counts.size > k or np.any(counts == 0):
        raise ValueError(f"every class in [0, {k}) needs at least one sample")
    means = np.zeros((k, f.shape[1]))
    np.add.at(means, y, f)
    means /= counts[:, None]
    centered = f - means[y]
    sigma_w = centered.T @ centered / f.shape[0]
    dm = means - f.mean(axis=0)
    sigma_b = dm.T @ dm / k
    return CovariancePair(sigma_w, sigma_b, k)


def pinv_sym(m: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix via eigendecomposition."""
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    top = np.max(np.abs(w)) if w.size else 0.0
    inv = np.zeros_like(w)
    keep = w > rtol * top
    inv[keep] = 1.0 / w[keep]
    return (v * inv) @ v.T


def nc1(pair: CovariancePair) -> float:
    """(1/K) trace(Sigma_W pinv(Sigma_B))."""
    if not np.any(pair.sigma_b):
        raise UndefinedCollapseError("between-class covariance is identically zero")
    value = float(np.trace(pair.sigma_w @ pinv_sym(pair.sigma_b))) / pair.num_classes
    return max(value, 0.0)


def table_from_logits(logits, labels, rows: str = "all") -> ClassLogitTable:
    """Build per-class logit samples from an (n, K) logit matrix.

    ``rows="all"`` takes column k over every sample; ``rows="labelled"`` only
    over samples whose label is k.  Group tags come from the label counts.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k = logits.shape[1]
    if rows == "all":
        per_class = [logits[:, c] for c in range(k)]
    elif rows == "labelled":
        per_class = [logits[labels == c, c] for c in range(k)]
    else:
        raise ValueError(f"rows must be 'all' or 'labelled', got {rows!r}")
    counts = np.bincount(labels, minlength=k).tolist()
    return ClassLogitTable.from_samples(per_class, frequency_groups(counts))
