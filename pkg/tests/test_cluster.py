import itertools

import numpy as np
import pytest

from tarifflens.cluster import (
    AdaptiveProfileKMeans,
    ClusterModel,
    ProfileKMeans,
    adaptive_fit,
    assign,
    fit_dataset,
    kmeans_fit,
    partition_by_profile,
)
from tarifflens.errors import KTooLarge, SchemaMismatch
from tarifflens.synth import SynthSpec, default_archetypes, generate

from conftest import DAY, make_dataset


def agreement(pred, truth):
    """Best label agreement over all relabelings of ``pred``."""
    ks = sorted(set(pred))
    best = 0.0
    for perm in itertools.permutations(sorted(set(truth)), len(ks)):
        m = dict(zip(ks, perm))
        best = max(best, np.mean([m[p] == t for p, t in zip(pred, truth)]))
    return best


def synthetic_points(jitter=0.01, n=34, seed=0):
    archetypes = [a.with_jitter(jitter) for a in default_archetypes()[:3]]
    d, gt = generate(SynthSpec(archetypes, consumers_per_archetype=n, days=1, rng_seed=seed))
    keys, X = d.matrix()
    truth = [gt.labels[c] for c, _ in keys]
    return X / X.sum(axis=1, keepdims=True), truth, d, gt


def test_identical_points_k1():
    X = np.tile(np.linspace(1, 2, 24) / 36, (10, 1))
    m = kmeans_fit(X, 1)
    np.testing.assert_array_equal(m.kernels[0], X[0])
    assert m.inertia == 0.0


def test_two_separated_groups():
    a, b = np.ones(24) / 24, np.linspace(1, 5, 24)
    b = b / b.sum()
    X = np.vstack([np.tile(a, (5, 1)), np.tile(b, (7, 1))])
    m = kmeans_fit(X, 2, seed=3)
    got = sorted(map(tuple, m.kernels))
    assert got == sorted([tuple(a), tuple(b)])
    assert m.inertia == 0.0


def test_k_too_large():
    with pytest.raises(KTooLarge):
        kmeans_fit(np.tile(np.ones(24) / 24, (4, 1)), 2)


def test_kmeans_recovers_archetypes():
    X, truth, _, _ = synthetic_points(n=34)
    m = kmeans_fit(X[:100], 3)
    assert agreement(m.predict(X[:100]), truth[:100]) >= 0.99


def test_adaptive_identical_points_gives_k_min():
    X = np.tile(np.ones(24) / 24, (6, 1))
    m = adaptive_fit(X, k_min=2)
    assert m.k == 2 and m.inertia == 0.0 and not m.radius_unmet


def test_adaptive_selects_three():
    X, truth, _, _ = synthetic_points()
    m = adaptive_fit(X, k_max=10)
    assert m.k == 3 and not m.radius_unmet
    assert agreement(m.predict(X), truth) >= 0.99


def test_adaptive_k_is_minimal():
    X, _, _, _ = synthetic_points(jitter=0.03)
    m = adaptive_fit(X, k_min=1, k_max=10)
    prev = ProfileKMeans(m.k - 1).fit(X)
    dist = np.linalg.norm(X - prev.cluster_centers_[prev.labels_], axis=1)
    assert np.any(dist >= 0.05 * np.linalg.norm(prev.cluster_centers_[prev.labels_], axis=1))


def test_radius_holds_for_every_point():
    X, _, _, _ = synthetic_points()
    est = AdaptiveProfileKMeans(k_max=10).fit(X)
    c = est.cluster_centers_[est.labels_]
    assert np.all(np.linalg.norm(X - c, axis=1) < 0.05 * np.linalg.norm(c, axis=1))


def test_zero_radius_unmet_at_k_max():
    X, _, _, _ = synthetic_points(n=5)
    m = adaptive_fit(X, radius_fraction=0.0, k_max=4)
    assert m.radius_unmet and m.k == 4
    assert [k for k, _ in m.inertia_curve] == [2, 3, 4]


def test_seed_determinism():
    X, _, _, _ = synthetic_points(jitter=0.05)
    a = adaptive_fit(X, seed=5)
    b = adaptive_fit(X, seed=5)
    assert a.to_json() == b.to_json()


def test_assign_exact_and_tie():
    kernels = np.zeros((4, 24))
    for j in range(4):
        kernels[j, j] = 1.0
    m = ClusterModel(kernels, 0, 0.0)
    assert assign(m, kernels[2]) == 2
    p = np.zeros(24)
    p[1] = p[3] = 0.5
    assert assign(m, p) == 1


def test_assign_synthetic_label():
    X, truth, _, _ = synthetic_points()
    m = adaptive_fit(X)
    label_of = {truth[i]: m.predict(X[i])[0] for i in range(len(X))}
    assert assign(m, X[-1]) == label_of[truth[-1]]


def test_model_json_round_trip():
    X, _, _, _ = synthetic_points(n=5)
    m = adaptive_fit(X)
    back = ClusterModel.from_json(m.to_json())
    np.testing.assert_array_equal(back.kernels, m.kernels)
    assert back.k == m.k and back.seed == m.seed
    with pytest.raises(SchemaMismatch):
        ClusterModel.from_json('{"k": 1}')


def test_partition_single_and_identical():
    d = make_dataset({"only": np.ones(24)})
    m = ClusterModel(np.ones((1, 24)) / 24, 0, 0.0)
    assert partition_by_profile(d, m, DAY).labels == {"only": 0}
    base = np.linspace(1, 3, 24)
    d = make_dataset({"a": base, "b": 2 * base, "c": np.ones(24)})
    m = fit_dataset(d, k_min=2)
    labels = partition_by_profile(d, m, DAY).labels
    assert labels["a"] == labels["b"]


def test_partition_matches_generator():
    _, _, d, gt = synthetic_points()
    m = fit_dataset(d)
    labels = partition_by_profile(d, m, d.days[0]).labels
    ids = sorted(labels)
    assert agreement([labels[c] for c in ids], [gt.labels[c] for c in ids]) >= 0.99


def test_estimator_params():
    est = AdaptiveProfileKMeans(radius_fraction=0.1, k_max=5)
    assert est.get_params()["radius_fraction"] == 0.1
    assert ProfileKMeans(3).get_params()["n_clusters"] == 3
