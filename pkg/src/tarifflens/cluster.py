"""Adaptive k-means over normalized daily profiles.

The estimators expect rows that are already l1-normalized; chain them after
:class:`~tarifflens.core.ProfileNormalizer` in a pipeline when starting from
raw kWh profiles.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import HOURS, Partition, normalize
from .errors import KTooLarge, SchemaMismatch, ValidationError


def _sq_distances(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("nkh,nkh->nk", diff, diff)


def _kmeans_plusplus(X, k, rng):
    """Greedy k-means++ seeding (several candidates per step, best kept)."""
    n = X.shape[0]
    n_trials = 2 + int(math.log(k))
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_distances(X, centers[:1])[:, 0]
    for c in range(1, k):
        pot = closest.sum()
        if pot <= 0:
            # every point already coincides with a center
            centers[c] = X[rng.integers(n)]
            continue
        cands = np.searchsorted(np.cumsum(closest), rng.random(n_trials) * pot)
        cands = np.minimum(cands, n - 1)
        cand_d = np.minimum(closest[None, :], _sq_distances(X, X[cands]).T)
        best = int(np.argmin(cand_d.sum(axis=1)))
        centers[c] = X[cands[best]]
        closest = cand_d[best]
    return centers


def _lloyd(X, centers, max_iter):
    k = centers.shape[0]
    labels = None
    trace = []
    for it in range(1, max_iter + 1):
        d2 = _sq_distances(X, centers)
        new_labels = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        point_d2 = d2[np.arange(len(X)), labels]
        centers = centers.copy()
        taken = set()
        for j in range(k):
            members = labels == j
            if members.any():
                pts = X[members]
                # a group of identical points keeps that exact point
                centers[j] = pts[0] if np.all(pts == pts[0]) else pts.mean(axis=0)
            else:
                # re-seed at the point farthest from its own kernel
                order = np.argsort(-point_d2, kind="stable")
                pick = next(int(i) for i in order if int(i) not in taken)
                taken.add(pick)
                centers[j] = X[pick]
                point_d2[pick] = 0.0
    labels = np.argmin(_sq_distances(X, centers), axis=1)
    inertia = float(_sq_distances(X, centers)[np.arange(len(X)), labels].sum())
    return centers, labels, inertia, it, trace


def _n_distinct(X):
    return np.unique(X, axis=0).shape[0]


def _radius_ok(X, centers, labels, radius_fraction):
    dist = np.linalg.norm(X - centers[labels], axis=1)
    limit = radius_fraction * np.linalg.norm(centers[labels], axis=1)
    return bool(np.all(dist < limit))


class ProfileKMeans(ClusterMixin, BaseEstimator):
    """Lloyd k-means with greedy k-means++ seeding and deterministic restarts.

    Parameters
    ----------
    n_clusters : int
        Number of kernels.
    random_state : int
        Seed; restarts draw from one generator so the fit is a pure function
        of ``(X, n_clusters, random_state)``.
    max_iter : int
        Lloyd iterations per restart; a restart stops early once the label
        assignment no longer changes.
    n_init : int
        Restarts; the lowest-inertia run is kept.
    """

    def __init__(self, n_clusters=8, random_state=0, max_iter=300, n_init=4):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.max_iter = max_iter
        self.n_init = n_init

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        k = int(self.n_clusters)
        if k < 1:
            raise ValidationError("n_clusters must be >= 1")
        n_distinct = _n_distinct(X)
        if k > n_distinct:
            raise KTooLarge(f"k={k} exceeds the {n_distinct} distinct points", k=k, distinct=n_distinct)
        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(max(1, int(self.n_init))):
            init = _kmeans_plusplus(X, k, rng)
            run = _lloyd(X, init, int(self.max_iter))
            if best is None or run[2] < best[2]:
                best = run
        self.cluster_centers_, self.labels_, self.inertia_, self.n_iter_, self.inertia_trace_ = best
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        return np.argmin(_sq_distances(X, self.cluster_centers_), axis=1)

    def transform(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        return np.sqrt(_sq_distances(X, self.cluster_centers_))


def _fixed_kernels(X, k):
    uniq = np.unique(X, axis=0)
    centers = np.vstack([uniq, np.repeat(uniq[:1], k - len(uniq), axis=0)])
    est = ProfileKMeans(n_clusters=k)
    est.cluster_centers_ = centers
    est.labels_ = np.argmin(_sq_distances(X, centers), axis=1)
    est.inertia_ = 0.0
    est.n_iter_ = 0
    est.inertia_trace_ = [0.0]
    est.n_features_in_ = X.shape[1]
    return est


class AdaptiveProfileKMeans(ClusterMixin, BaseEstimator):
    """Smallest k whose clusters all fit inside a relative radius.

    For k = k_min, k_min + 1, ... a :class:`ProfileKMeans` is fitted and the
    first model where every point lies strictly closer to its kernel than
    ``radius_fraction`` times the kernel's l2 norm is kept. When no k up to
    ``k_max`` qualifies the ``k_max`` model is kept and ``radius_unmet_`` is
    set. ``k_max`` is capped at the number of distinct points; with fewer
    distinct points than ``k_min`` the k_min model repeats kernels.
    """

    def __init__(self, radius_fraction=0.05, k_min=2, k_max=40, random_state=0, max_iter=300, n_init=4):
        self.radius_fraction = radius_fraction
        self.k_min = k_min
        self.k_max = k_max
        self.random_state = random_state
        self.max_iter = max_iter
        self.n_init = n_init

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if self.k_min < 1 or self.k_min > self.k_max:
            raise ValidationError(f"need 1 <= k_min <= k_max, got {self.k_min}, {self.k_max}")
        n_distinct = _n_distinct(X)
        self.inertia_curve_ = []
        if self.k_min > n_distinct:
            # fewer distinct points than k_min: every distinct point is its own
            # kernel and the remaining kernels repeat the first one
            est = _fixed_kernels(X, int(self.k_min))
            self.inertia_curve_.append((est.n_clusters, est.inertia_))
            self.radius_unmet_ = not _radius_ok(X, est.cluster_centers_, est.labels_, self.radius_fraction)
            return self._adopt(est, X)
        k_max = min(int(self.k_max), n_distinct)
        est = None
        for k in range(int(self.k_min), k_max + 1):
            est = ProfileKMeans(k, self.random_state, self.max_iter, self.n_init).fit(X)
            self.inertia_curve_.append((k, est.inertia_))
            if _radius_ok(X, est.cluster_centers_, est.labels_, self.radius_fraction):
                self.radius_unmet_ = False
                break
        else:
            self.radius_unmet_ = True
        return self._adopt(est, X)

    def _adopt(self, est, X):
        self.best_estimator_ = est
        self.n_clusters_ = est.n_clusters
        self.cluster_centers_ = est.cluster_centers_
        self.labels_ = est.labels_
        self.inertia_ = est.inertia_
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return self.best_estimator_.predict(X)


@dataclass
class ClusterModel:
    kernels: np.ndarray
    seed: int
    inertia: float
    radius_fraction: float | None = None
    radius_unmet: bool = False
    inertia_curve: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return int(self.kernels.shape[0])

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.argmin(_sq_distances(X, self.kernels), axis=1)

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.seed,
            "radius_fraction": self.radius_fraction,
            "kernels": [[float(v) for v in row] for row in self.kernels],
            "inertia": self.inertia,
            "radius_unmet": self.radius_unmet,
        }

    @classmethod
    def from_dict(cls, data) -> "ClusterModel":
        try:
            kernels = np.asarray(data["kernels"], dtype=np.float64)
            if kernels.ndim != 2 or kernels.shape[1] != HOURS or kernels.shape[0] != int(data["k"]):
                raise ValueError("kernels must be k rows of 24 numbers")
            if not np.all(np.isfinite(kernels)):
                raise ValueError("non-finite kernel entry")
            return cls(
                kernels=kernels,
                seed=int(data["seed"]),
                inertia=float(data["inertia"]),
                radius_fraction=data.get("radius_fraction"),
                radius_unmet=bool(data.get("radius_unmet", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatch(f"invalid cluster model: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "ClusterModel":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"invalid model JSON: {exc}") from None
        return cls.from_dict(data)

    def inertia_curve_csv(self) -> str:
        lines = ["k,inertia"] + [f"{k},{inertia!r}" for k, inertia in self.inertia_curve]
        return "\n".join(lines) + "\n"


def _points(points) -> np.ndarray:
    rows = [getattr(p, "weights", p) for p in points]
    if not rows:
        raise ValidationError("no points to cluster")
    return np.asarray(np.stack(rows), dtype=np.float64)


def kmeans_fit(points, k: int, seed: int = 0, **kwargs) -> ClusterModel:
    est = ProfileKMeans(n_clusters=k, random_state=seed, **kwargs).fit(_points(points))
    return ClusterModel(est.cluster_centers_, seed, est.inertia_, inertia_curve=[(k, est.inertia_)])


def adaptive_fit(
    points, radius_fraction: float = 0.05, k_min: int = 2, k_max: int = 40, seed: int = 0, **kwargs
) -> ClusterModel:
    est = AdaptiveProfileKMeans(
        radius_fraction=radius_fraction, k_min=k_min, k_max=k_max, random_state=seed, **kwargs
    ).fit(_points(points))
    return ClusterModel(
        est.cluster_centers_,
        seed,
        est.inertia_,
        radius_fraction=radius_fraction,
        radius_unmet=est.radius_unmet_,
        inertia_curve=list(est.inertia_curve_),
    )


def assign(model: ClusterModel, p) -> int:
    """Nearest kernel; ties go to the lowest index."""
    return int(model.predict(getattr(p, "weights", p))[0])


def fit_dataset(d, **kwargs) -> ClusterModel:
    """Adaptive fit over every consumer-day of a dataset."""
    _, X = d.matrix()
    return adaptive_fit(X / X.sum(axis=1, keepdims=True), **kwargs)


def partition_by_profile(d, model: ClusterModel, day) -> Partition:
    profiles = d.day(day)
    X = np.stack([normalize(p).weights for p in profiles.values()])
    labels = model.predict(X)
    return Partition(day, dict(zip(profiles, labels.tolist())), model.k)
