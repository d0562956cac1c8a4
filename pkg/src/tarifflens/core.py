"""Shared domain types: daily profiles, normalization and aggregation.

Hours are numbered 1..24 in every user-facing place (errors, CSV columns,
windows); arrays are 0-based internally.
"""
from __future__ import annotations

import datetime as dt
import math
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .errors import EmptyCollection, NonFinite, NonPositiveDemand, ValidationError, WrongLength

HOURS = 24

ConsumerId = str
DayDate = dt.date


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class DailyProfile:
    """24 strictly positive hourly demands (kWh) for one consumer-day.

    Build through :func:`validate_profile`; the constructor trusts its input.
    """

    __slots__ = ("hours", "total")

    def __init__(self, hours):
        self.hours = _frozen(hours)
        self.total = float(self.hours.sum())

    def scaled(self, alpha: float) -> "DailyProfile":
        return validate_profile(self.hours * alpha)

    def __eq__(self, other):
        if not isinstance(other, DailyProfile):
            return NotImplemented
        return np.array_equal(self.hours, other.hours)

    def __hash__(self):
        return hash(self.hours.tobytes())

    def __repr__(self):
        return f"DailyProfile(total={self.total:.6g})"


class NormalizedProfile:
    """l1-normalized profile: 24 non-negative weights summing to one."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        self.weights = _frozen(weights)

    def __eq__(self, other):
        if not isinstance(other, NormalizedProfile):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"NormalizedProfile(peak_hour={int(np.argmax(self.weights)) + 1})"


class AggregateProfile:
    """Hour-wise system demand summed over ``consumer_count`` consumers."""

    __slots__ = ("hours", "consumer_count")

    def __init__(self, hours, consumer_count: int):
        self.hours = _frozen(hours)
        self.consumer_count = int(consumer_count)

    @property
    def total(self) -> float:
        return float(self.hours.sum())

    def __repr__(self):
        return f"AggregateProfile(total={self.total:.6g}, consumers={self.consumer_count})"


def validate_profile(raw: Sequence[float]) -> DailyProfile:
    """Check length, finiteness and strict positivity of 24 hourly values."""
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise NonFinite(f"non-numeric demand values: {exc}") from None
    if arr.ndim != 1 or arr.shape[0] != HOURS:
        raise WrongLength(f"expected {HOURS} hourly values, got {arr.size}")
    bad = ~np.isfinite(arr)
    if bad.any():
        raise NonFinite(f"non-finite demand at hour {int(np.argmax(bad)) + 1}")
    nonpos = arr <= 0
    if nonpos.any():
        idx = int(np.argmax(nonpos))
        raise NonPositiveDemand(hour=idx + 1, value=float(arr[idx]))
    return DailyProfile(arr)


def normalize(p: DailyProfile) -> NormalizedProfile:
    return NormalizedProfile(p.hours / p.hours.sum())


def aggregate(profiles: Iterable[DailyProfile]) -> AggregateProfile:
    profiles = list(profiles)
    if not profiles:
        raise EmptyCollection("cannot aggregate an empty collection of profiles")
    # math.fsum per hour keeps the result independent of input order
    stacked = np.stack([p.hours for p in profiles])
    hours = [math.fsum(col) for col in stacked.T]
    return AggregateProfile(hours, len(profiles))


def check_profiles(X) -> np.ndarray:
    """Validate a 2-D array of daily profiles (rows) for estimator input."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != HOURS:
        raise WrongLength(f"expected {HOURS} columns, got {X.shape[1]}")
    if (X <= 0).any():
        row, col = np.argwhere(X <= 0)[0]
        raise NonPositiveDemand(hour=int(col) + 1, value=float(X[row, col]))
    return X


class ProfileNormalizer(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping daily profiles to l1-normalized weights.

    Rows must be strictly positive 24-hour vectors. Output rows sum to one
    and are unchanged by any positive rescaling of the input row.
    """

    def fit(self, X, y=None):
        X = check_profiles(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_profiles(X)
        return X / X.sum(axis=1, keepdims=True)


class Partition:
    """Assignment of each consumer present on ``day`` to a cluster in ``[0, k)``."""

    __slots__ = ("day", "labels", "k")

    def __init__(self, day, labels: dict, k: int):
        labels = dict(sorted(labels.items()))
        if k < 1:
            raise ValidationError("a partition needs at least one cluster")
        bad = [c for c, lab in labels.items() if not 0 <= lab < k]
        if bad:
            raise ValidationError(f"labels outside [0, {k}) for {bad[:3]}")
        self.day = day
        self.labels = {c: int(lab) for c, lab in labels.items()}
        self.k = int(k)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (self.day, self.labels, self.k) == (other.day, other.labels, other.k)

    def __repr__(self):
        return f"Partition(day={self.day}, consumers={len(self.labels)}, k={self.k})"
