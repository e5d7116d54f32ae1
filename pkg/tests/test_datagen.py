import math

import numpy as np
import pytest

from apa.datagen import (
    LongTailSpec,
    SpecError,
    class_sizes,
    make_longtail,
    sample_theoretical,
    theoretical_logit_table,
)
from apa.stats import EULER_GAMMA, Family, FittedCDF


def test_balanced_sizes():
    assert set(class_sizes(LongTailSpec(num_classes=7, n_max=40, imbalance=1.0))) == {40}


def test_two_class_endpoints():
    assert class_sizes(LongTailSpec(num_classes=2, n_max=100, imbalance=100.0)) == [100, 1]


def test_profile_formula():
    sizes = class_sizes(LongTailSpec(num_classes=10, n_max=500, imbalance=10.0))
    expected = [math.floor(500 * 10 ** (-k / 9) + 0.5) for k in range(10)]
    assert sizes == expected
    assert sizes[0] / sizes[-1] == pytest.approx(10.0, rel=0.02)
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_empty_class_rejected():
    with pytest.raises(SpecError):
        class_sizes(LongTailSpec(num_classes=5, n_max=10, imbalance=1000.0))
    with pytest.raises(SpecError):
        class_sizes(LongTailSpec(num_classes=1))


def test_counts_and_groups():
    spec = LongTailSpec(num_classes=9, dim=4, n_max=90, imbalance=30.0, seed=3)
    ds = make_longtail(spec)
    assert np.bincount(ds.labels).tolist() == class_sizes(spec) == ds.class_counts
    assert ds.features.shape == (len(ds), 4)
    assert ds.groups == ["many"] * 3 + ["medium"] * 3 + ["few"] * 3
    assert ds.labels.min() >= 0 and ds.labels.max() < 9


def test_test_split_balanced_and_independent():
    spec = LongTailSpec(num_classes=6, dim=3, n_max=50, imbalance=10.0, n_test=7, seed=1)
    test = make_longtail(spec, "test")
    assert np.bincount(test.labels).tolist() == [7] * 6
    assert test.groups == make_longtail(spec).groups
    with pytest.raises(SpecError):
        make_longtail(spec, "val")


def test_same_seed_byte_identical():
    spec = LongTailSpec(num_classes=5, dim=3, n_max=30, imbalance=5.0, seed=9)
    a, b = make_longtail(spec), make_longtail(spec)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    c = make_longtail(LongTailSpec(num_classes=5, dim=3, n_max=30, imbalance=5.0, seed=10))
    assert a.features.tobytes() != c.features.tobytes()


def test_cluster_means_near_unit_centres():
    spec = LongTailSpec(num_classes=3, dim=5, n_max=4000, imbalance=1.0, spread=0.2, seed=0)
    ds = make_longtail(spec)
    means = np.stack([ds.features[ds.labels == k].mean(0) for k in range(3)])
    np.testing.assert_allclose(np.linalg.norm(means, axis=1), 1.0, atol=0.02)


def test_inverse_cdf_fixed_points():
    assert FittedCDF(Family.LOGISTIC, 1.5, 2.0).ppf(0.5) == 1.5
    assert FittedCDF(Family.GUMBEL, -0.7, 3.0).ppf(math.exp(-1)) == pytest.approx(-0.7, abs=1e-15)


def test_gumbel_sample_mean():
    d = sample_theoretical(Family.GUMBEL, 0.0, 1.0, 100_000, seed=0)
    assert abs(d.mean - EULER_GAMMA) < 0.02


def test_sampling_deterministic():
    a = sample_theoretical(Family.LOGISTIC, 0.0, 1.0, 1000, seed=4)
    b = sample_theoretical(Family.LOGISTIC, 0.0, 1.0, 1000, seed=4)
    assert a.samples.tobytes() == b.samples.tobytes()
    with pytest.raises(ValueError):
        sample_theoretical(Family.LOGISTIC, 0.0, 0.0, 10, seed=0)


def test_logit_table_shape():
    t = theoretical_logit_table(Family.GUMBEL, 4, 50, seed=2)
    assert t.shape == (50, 4) and np.all(np.isfinite(t))
