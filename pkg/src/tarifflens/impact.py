"""Aggregate-profile features and per-consumer marginal impacts.

Three features of the system aggregate are tracked: the morning ramp range,
the evening ramp range, and the peak demand. A ramp range is the largest rise
``L[h2] - L[h1]`` over hour pairs ``h1 <= h2`` inside a window, so every
feature is a maximum of linear functions of the aggregate. The marginal
feature impact (MFI) of a consumer is the one-sided directional derivative
of a feature along the consumer's l1-normalized profile, which for such a
maximum is the largest directional slope over the currently active terms.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import HOURS, AggregateProfile, aggregate, check_profiles
from .errors import NonFiniteRate, ValidationError, WrongLength

FEATURES = ("mr", "er", "pd")
# values within this fraction of the aggregate's peak count as tied
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class FeatureSpec:
    """Feature windows (inclusive, hours 1..24) and the cost weights mu."""

    morning_window: tuple[int, int] = (5, 12)
    evening_window: tuple[int, int] = (16, 22)
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("morning_window", "evening_window"):
            lo, hi = getattr(self, name)
            if not (1 <= lo <= hi <= HOURS):
                raise ValidationError(f"{name} must satisfy 1 <= start <= end <= 24, got {(lo, hi)}")
            object.__setattr__(self, name, (int(lo), int(hi)))
        w = tuple(float(x) for x in self.weights)
        if len(w) != 3 or not all(np.isfinite(x) and x > 0 for x in w):
            raise ValidationError(f"weights must be three positive numbers, got {self.weights}")
        object.__setattr__(self, "weights", w)

    def pairs(self, window):
        lo, hi = window
        return list(combinations_with_replacement(range(lo - 1, hi), 2))


@dataclass(frozen=True)
class FeatureValues:
    mr: float
    er: float
    pd: float


@dataclass
class ImpactRecord:
    consumer: str
    day: object
    mfi_mr: float
    mfi_er: float
    mfi_pd: float
    phi: float
    mci: float | None = None


def _hours(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "hours", getattr(x, "weights", x)), dtype=np.float64)
    if arr.shape[-1] != HOURS:
        raise WrongLength(f"expected {HOURS} hourly values, got {arr.shape[-1]}")
    return arr


def _ramp(L, window):
    lo, hi = window
    seg = L[lo - 1 : hi]
    return float(np.max(seg - np.minimum.accumulate(seg)))


def features(L, spec: FeatureSpec = FeatureSpec()) -> FeatureValues:
    L = _hours(L)
    return FeatureValues(
        mr=_ramp(L, spec.morning_window),
        er=_ramp(L, spec.evening_window),
        pd=float(L.max()),
    )


def _feature_vector(L, spec):
    f = features(L, spec)
    return np.array([f.mr, f.er, f.pd])


class _ActiveSets:
    """Active hours/pairs of each feature at L, plus the margin to the runner-up."""

    def __init__(self, L, spec):
        L = _hours(L)
        tol = TIE_RTOL * float(np.max(np.abs(L)))
        self.ramps = []
        self.margins = []
        for window in (spec.morning_window, spec.evening_window):
            pairs = np.array(spec.pairs(window))
            vals = L[pairs[:, 1]] - L[pairs[:, 0]]
            best = vals.max()
            active = vals >= best - tol
            self.ramps.append((pairs[active, 0], pairs[active, 1]))
            rest = vals[~active]
            self.margins.append(float(best - rest.max()) if rest.size else np.inf)
        top = L.max()
        active = L >= top - tol
        self.peak_hours = np.flatnonzero(active)
        rest = L[~active]
        self.margins.append(float(top - rest.max()) if rest.size else np.inf)

    def directional(self, U):
        """One-sided directional derivatives for each row of ``U``; shape (n, 3)."""
        U = np.atleast_2d(U)
        out = np.empty((U.shape[0], 3))
        for j, (h1, h2) in enumerate(self.ramps):
            out[:, j] = (U[:, h2] - U[:, h1]).max(axis=1)
        out[:, 2] = U[:, self.peak_hours].max(axis=1)
        return out


def feature_margins(L, spec: FeatureSpec = FeatureSpec()) -> tuple[float, float, float]:
    """Gap between each feature's active value and the best inactive term.

    A finite-difference step smaller than half the margin cannot change the
    active set, so the difference quotient is exact up to rounding.
    """
    return tuple(_ActiveSets(L, spec).margins)


def _directions(profiles) -> np.ndarray:
    U = np.atleast_2d(_hours(profiles))
    return U / U.sum(axis=1, keepdims=True)


def mfi(L, Li, spec: FeatureSpec = FeatureSpec()) -> tuple[float, float, float]:
    """Analytic (mfi_mr, mfi_er, mfi_pd) of profile ``Li`` against aggregate ``L``."""
    row = _ActiveSets(L, spec).directional(_directions(Li))[0]
    return tuple(float(v) for v in row)


def mfi_fd(L, Li, spec: FeatureSpec = FeatureSpec(), delta: float | None = None):
    """Forward difference quotient of each feature along ``Li``'s direction."""
    L = _hours(L)
    if delta is None:
        delta = 1e-6 * float(np.abs(L).sum())
    if not delta > 0:
        raise ValidationError("delta must be positive")
    u = _directions(Li)[0]
    base = _feature_vector(L, spec)
    bumped = _feature_vector(L + delta * u, spec)
    return tuple(float(v) for v in (bumped - base) / delta)


def _check_prices(prices) -> np.ndarray:
    lam = np.asarray(prices, dtype=np.float64)
    if lam.shape != (HOURS,):
        raise WrongLength(f"expected {HOURS} prices, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise NonFiniteRate("prices must be finite")
    return lam


def mci_from_rtp(Li, prices) -> float:
    """Demand-weighted average of hourly prices.

    Evaluated relative to the cheapest hour, so constant prices come back
    exactly and the result never leaves ``[min(prices), max(prices)]``.
    """
    lam = _check_prices(prices)
    l = _hours(Li)
    lo = lam.min()
    value = lo + float(np.dot(l, lam - lo)) / float(l.sum())
    return float(min(max(value, lo), lam.max()))


def mci_index(mfis, spec: FeatureSpec = FeatureSpec()) -> float:
    mr, er, pd = (getattr(mfis, f"mfi_{n}") for n in FEATURES) if hasattr(mfis, "mfi_mr") else mfis
    w = spec.weights
    return float(w[0] * mr + w[1] * er + w[2] * pd)


def _mci_index_rows(M, spec):
    w = spec.weights
    return w[0] * M[:, 0] + w[1] * M[:, 1] + w[2] * M[:, 2]


def impact_table(d, day, spec: FeatureSpec = FeatureSpec(), prices=None, model=None) -> list[ImpactRecord]:
    """MFIs, MCI index and (optionally) MCI for every consumer on ``day``.

    With a cluster ``model`` the MFIs are computed once per profile type from
    its kernel; otherwise each consumer's own direction is used.
    """
    profiles = d.day(day)
    L = aggregate(profiles.values())
    active = _ActiveSets(L, spec)
    ids = list(profiles)
    X = np.stack([p.hours for p in profiles.values()])
    U = X / X.sum(axis=1, keepdims=True)
    if model is None:
        M = active.directional(U)
    else:
        labels = model.predict(U)
        kernels = np.asarray(model.kernels, dtype=np.float64)
        per_type = active.directional(kernels / kernels.sum(axis=1, keepdims=True))
        M = per_type[labels]
    phi = _mci_index_rows(M, spec)
    mcis = [None] * len(ids)
    if prices is not None:
        mcis = [mci_from_rtp(p, prices) for p in profiles.values()]
    return [
        ImpactRecord(c, day, float(m[0]), float(m[1]), float(m[2]), float(f), mci)
        for c, m, f, mci in zip(ids, M, phi, mcis)
    ]


def impact_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["consumer_id", "date", "mfi_mr", "mfi_er", "mfi_pd", "phi", "mci"])
    for r in records:
        day = r.day.isoformat() if hasattr(r.day, "isoformat") else str(r.day)
        w.writerow(
            [r.consumer, day, repr(r.mfi_mr), repr(r.mfi_er), repr(r.mfi_pd), repr(r.phi),
             "" if r.mci is None else repr(r.mci)]
        )
    return buf.getvalue()


class MarginalImpactTransformer(TransformerMixin, BaseEstimator):
    """Map daily profiles to their (mr, er, pd) marginal feature impacts.

    ``fit`` takes the population of one day (raw kWh rows) and records their
    aggregate; ``transform`` returns the MFI triple of each row against it.
    Rows may be any positive multiple of a profile; only the direction
    matters.
    """

    def __init__(self, morning_window=(5, 12), evening_window=(16, 22), weights=(1.0, 1.0, 1.0)):
        self.morning_window = morning_window
        self.evening_window = evening_window
        self.weights = weights

    def _spec(self):
        return FeatureSpec(tuple(self.morning_window), tuple(self.evening_window), tuple(self.weights))

    def fit(self, X, y=None):
        X = check_profiles(X)
        self.aggregate_ = AggregateProfile(X.sum(axis=0), X.shape[0])
        self.features_ = features(self.aggregate_, self._spec())
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "aggregate_")
        X = check_profiles(X)
        return _ActiveSets(self.aggregate_, self._spec()).directional(X / X.sum(axis=1, keepdims=True))

    def phi(self, X):
        """MCI index of each row."""
        return _mci_index_rows(self.transform(X), self._spec())

    def get_feature_names_out(self, input_features=None):
        return np.array([f"mfi_{n}" for n in FEATURES], dtype=object)
