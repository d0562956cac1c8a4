"""Retail price schemes, daily bills and rate binning."""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import io
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .core import HOURS, Partition
from .errors import NonFiniteRate, SchemaMismatch, UnknownDay, ValidationError
from .impact import _check_prices, mci_from_rtp


def _rate(x, name="rate"):
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteRate(f"{name} must be finite")
    if x < 0:
        raise ValidationError(f"{name} must be >= 0, got {x}")
    return x


@dataclass(frozen=True)
class Flat:
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "rate", _rate(self.rate))


@dataclass(frozen=True)
class TimeOfUse:
    """Hour bands ``((start, end), rate)`` with inclusive 1-based hours."""

    bands: tuple

    def __post_init__(self):
        bands = tuple(((int(lo), int(hi)), _rate(r)) for (lo, hi), r in self.bands)
        covered = []
        for (lo, hi), _ in bands:
            if not 1 <= lo <= hi <= HOURS:
                raise ValidationError(f"bad TOU band {(lo, hi)}")
            covered.extend(range(lo, hi + 1))
        if sorted(covered) != list(range(1, HOURS + 1)):
            raise ValidationError("TOU bands must cover hours 1..24 exactly once")
        object.__setattr__(self, "bands", bands)

    def hourly_rates(self) -> np.ndarray:
        out = np.empty(HOURS)
        for (lo, hi), r in self.bands:
            out[lo - 1 : hi] = r
        return out


@dataclass(frozen=True)
class Tiered:
    """Marginal tiers on the daily total: ``rates[k]`` applies between
    ``thresholds[k-1]`` and ``thresholds[k]`` kWh."""

    thresholds: tuple
    rates: tuple

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        rates = tuple(_rate(r) for r in self.rates)
        if any(not math.isfinite(t) or t <= 0 for t in th):
            raise ValidationError("tier thresholds must be positive and finite")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValidationError("tier thresholds must be strictly ascending")
        if len(rates) != len(th) + 1:
            raise ValidationError("need exactly one more rate than thresholds")
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "rates", rates)


@dataclass(frozen=True)
class RealTime:
    prices: tuple

    def __post_init__(self):
        lam = _check_prices(self.prices)
        if (lam < 0).any():
            raise ValidationError("prices must be >= 0")
        object.__setattr__(self, "prices", tuple(float(x) for x in lam))


@dataclass(frozen=True)
class ProfileMenu:
    """Each consumer pays a flat daily rate equal to their MCI under ``prices``."""

    prices: tuple

    def __post_init__(self):
        lam = _check_prices(self.prices)
        if (lam < 0).any():
            raise ValidationError("prices must be >= 0")
        object.__setattr__(self, "prices", tuple(float(x) for x in lam))


PriceScheme = Flat | TimeOfUse | Tiered | RealTime | ProfileMenu


@dataclass(frozen=True)
class DailyBill:
    consumer: str | None
    day: dt.date | None
    amount: float
    avg_rate: float


def bill(scheme: PriceScheme, p, consumer=None, day=None) -> DailyBill:
    l = np.asarray(getattr(p, "hours", p), dtype=np.float64)
    total = float(l.sum())
    if isinstance(scheme, Flat):
        avg = scheme.rate
        amount = avg * total
    elif isinstance(scheme, (RealTime, ProfileMenu)):
        # the average rate of an hourly-price bill is the demand-weighted
        # mean price, i.e. the MCI; both schemes therefore charge it
        avg = mci_from_rtp(l, scheme.prices)
        amount = avg * total
    elif isinstance(scheme, TimeOfUse):
        amount = math.fsum(float(r) * float(l[lo - 1 : hi].sum()) for (lo, hi), r in scheme.bands)
        avg = amount / total
    elif isinstance(scheme, Tiered):
        amount, lower = 0.0, 0.0
        for upper, r in zip(scheme.thresholds + (math.inf,), scheme.rates):
            if total <= lower:
                break
            amount += r * (min(total, upper) - lower)
            lower = upper
        avg = amount / total
    else:
        raise TypeError(f"unknown price scheme {scheme!r}")
    return DailyBill(consumer, day, float(amount), float(avg))


def scheme_for(scheme, day):
    """Resolve a per-day scheme mapping, or return a single scheme unchanged."""
    if isinstance(scheme, Mapping):
        if day not in scheme:
            raise UnknownDay(f"no price scheme for day {day}", day=str(day))
        return scheme[day]
    return scheme


def avg_rate_table(d, day, scheme) -> dict[str, float]:
    scheme = scheme_for(scheme, day)
    return {c: bill(scheme, p, c, day).avg_rate for c, p in d.day(day).items()}


def partition_by_rate(rates: Mapping[str, float], bins: int, rate_range=None, day=None) -> Partition:
    """Equal-width binning of average rates.

    A rate on an interior edge goes to the upper bin; the top of the range
    goes to the last bin; rates outside an explicit range are clamped to the
    end bins. Without ``rate_range`` the observed [min, max] is used, and when all
    rates coincide a single-bin partition is returned.
    """
    bins = int(bins)
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    values = np.asarray(list(rates.values()), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteRate("rates must be finite")
    if rate_range is None:
        if values.size == 0:
            return Partition(day, {}, 1)
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            return Partition(day, {c: 0 for c in rates}, 1)
    else:
        lo, hi = (float(x) for x in rate_range)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError(f"rate range must satisfy lo < hi, got {(lo, hi)}")
    width = hi - lo
    edges = [lo + width * k / bins for k in range(1, bins)]
    # absorb rounding in the edge positions so on-edge rates go up
    tol = 1e-12 * width
    labels = {}
    for c, r in rates.items():
        labels[c] = min(bisect.bisect_right(edges, float(r) + tol), bins - 1)
    return Partition(day, labels, bins)


def rates_csv(day, rates: Mapping[str, float], partition: Partition) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["consumer_id", "date", "avg_rate", "bin"])
    for c, r in sorted(rates.items()):
        w.writerow([c, day.isoformat(), repr(float(r)), partition.labels[c]])
    return buf.getvalue()


def _prices_field(data):
    prices = data["prices"]
    if isinstance(prices, Mapping):
        return {dt.date.fromisoformat(k): v for k, v in prices.items()}
    return prices


def scheme_from_dict(data):
    """Build a scheme from its JSON form.

    ``rtp``/``ppm`` accept ``prices`` either as 24 numbers or as an object
    keyed by ISO date, in which case a per-day mapping of schemes is returned.
    """
    try:
        kind = data["type"]
        if kind == "flat":
            return Flat(data["rate"])
        if kind == "tou":
            return TimeOfUse(tuple(((b["start"], b["end"]), b["rate"]) for b in data["bands"]))
        if kind == "tiered":
            return Tiered(tuple(data["thresholds"]), tuple(data["rates"]))
        if kind in ("rtp", "ppm"):
            cls = RealTime if kind == "rtp" else ProfileMenu
            prices = _prices_field(data)
            if isinstance(prices, Mapping):
                return {day: cls(tuple(v)) for day, v in sorted(prices.items())}
            return cls(tuple(prices))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise SchemaMismatch(f"invalid scheme: {exc!r}") from None
    raise SchemaMismatch(f"unknown scheme type {data.get('type')!r}")


def scheme_to_dict(scheme) -> dict:
    if isinstance(scheme, Mapping):
        first = next(iter(scheme.values()))
        kind = "rtp" if isinstance(first, RealTime) else "ppm"
        return {"type": kind, "prices": {d.isoformat(): list(s.prices) for d, s in sorted(scheme.items())}}
    if isinstance(scheme, Flat):
        return {"type": "flat", "rate": scheme.rate}
    if isinstance(scheme, TimeOfUse):
        return {"type": "tou", "bands": [{"start": lo, "end": hi, "rate": r} for (lo, hi), r in scheme.bands]}
    if isinstance(scheme, Tiered):
        return {"type": "tiered", "thresholds": list(scheme.thresholds), "rates": list(scheme.rates)}
    if isinstance(scheme, RealTime):
        return {"type": "rtp", "prices": list(scheme.prices)}
    if isinstance(scheme, ProfileMenu):
        return {"type": "ppm", "prices": list(scheme.prices)}
    raise TypeError(f"unknown price scheme {scheme!r}")


def scheme_name(scheme) -> str:
    return scheme_to_dict(scheme)["type"]


def load_scheme(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from None
    return scheme_from_dict(data)
