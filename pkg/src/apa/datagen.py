"""Seeded synthetic data: long-tailed Gaussian clusters and theoretical logit samples.

All randomness comes from numpy's PCG64 generator (``numpy.random.default_rng``)
seeded through a ``SeedSequence``; independent streams are spawned by appending
a stream id to the seed, so e.g. the test split never perturbs the train split.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .stats import EmpiricalDistribution, Family, FittedCDF, frequency_groups

# Stream ids appended to the user seed.
CENTERS, TRAIN, TEST = 0, 1, 2


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *stream])


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class LongTailSpec:
    num_classes: int = 20
    dim: int = 16
    n_max: int = 500
    imbalance: float = 100.0
    spread: float = 0.35
    n_test: int = 100
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def class_sizes(spec: LongTailSpec) -> list[int]:
    """``round(n_max * IF^(-k/(K-1)))`` for k = 0..K-1, rounding half up."""
    if spec.num_classes < 2:
        raise SpecError("need at least 2 classes")
    if spec.imbalance < 1:
        raise SpecError("imbalance factor must be >= 1")
    k1 = spec.num_classes - 1
    sizes = [int(math.floor(spec.n_max * spec.imbalance ** (-k / k1) + 0.5)) for k in range(spec.num_classes)]
    if min(sizes) <= 0:
        raise SpecError(f"class sizes {sizes} contain an empty class")
    return sizes


@dataclass
class SampledDataset:
    features: np.ndarray
    labels: np.ndarray
    groups: list[str]
    class_counts: list[int]

    @property
    def num_classes(self) -> int:
        return len(self.groups)

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def class_centers(spec: LongTailSpec) -> np.ndarray:
    c = rng_for(spec.seed, CENTERS).standard_normal((spec.num_classes, spec.dim))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def make_longtail(spec: LongTailSpec, split: str = "train") -> SampledDataset:
    """Isotropic Gaussian clusters around unit-norm centres.

    The train split follows the exponential size profile; the test split is
    balanced (``n_test`` per class).  Group tags (many/medium/few) always come
    from the train sizes.
    """
    sizes = class_sizes(spec)
    if split == "train":
        counts, stream = sizes, TRAIN
    elif split == "test":
        counts, stream = [spec.n_test] * spec.num_classes, TEST
    else:
        raise SpecError(f"unknown split {split!r}")
    centers = class_centers(spec)
    rng = rng_for(spec.seed, stream)
    labels = np.repeat(np.arange(spec.num_classes), counts)
    noise = rng.standard_normal((labels.size, spec.dim))
    features = centers[labels] + spec.spread * noise
    return SampledDataset(features, labels, frequency_groups(sizes), list(counts))


def sample_theoretical(family: Family, loc: float, scale: float, n: int, seed: int) -> EmpiricalDistribution:
    """Inverse-CDF draws from a Logistic or Gumbel distribution."""
    if not scale > 0 or n < 2:
        raise ValueError("need scale > 0 and n >= 2")
    u = rng_for(seed).random(n)
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    return EmpiricalDistribution.from_samples(FittedCDF(Family(family), loc, scale).ppf(u))


def theoretical_logit_table(family: Family, num_classes: int, n: int, seed: int) -> np.ndarray:
    """An ``n x K`` logit matrix; column k is drawn from ``family`` with a per-class location/scale."""
    rng = rng_for(seed)
    locs = rng.uniform(-3.0, 1.0, num_classes)
    scales = rng.uniform(0.5, 2.0, num_classes)
    u = rng.random((n, num_classes))
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    cols = [FittedCDF(Family(family), locs[k], scales[k]).ppf(u[:, k]) for k in range(num_classes)]
    return np.column_stack(cols)
