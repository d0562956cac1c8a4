"""Synthetic consumer populations with known profile types and MCIs."""
from __future__ import annotations

import datetime as dt
import json
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .core import HOURS, aggregate, validate_profile
from .errors import UnknownDay, ValidationError
from .impact import FeatureSpec, _ActiveSets, mci_from_rtp
from .ingest import Dataset
from .tariff import ProfileMenu

_H = np.arange(1, HOURS + 1, dtype=np.float64)


def _bump(center, width, amp):
    # circular distance so shapes wrap around midnight
    d = np.abs(_H - center)
    d = np.minimum(d, HOURS - d)
    return amp * np.exp(-0.5 * (d / width) ** 2)


def _shift(hours_on, level_on, level_off):
    out = np.full(HOURS, level_off)
    for lo, hi in hours_on:
        out[lo - 1 : hi] = level_on
    return out


@dataclass(frozen=True)
class Archetype:
    name: str
    base: np.ndarray
    jitter: float = 0.02
    level_range: tuple = (10.0, 100.0)

    def __post_init__(self):
        base = np.asarray(self.base, dtype=np.float64)
        if base.shape != (HOURS,) or not np.all(base > 0):
            raise ValidationError(f"archetype {self.name!r}: base needs 24 positive values")
        if not 0 <= self.jitter <= 0.05:
            raise ValidationError(f"archetype {self.name!r}: jitter must be in [0, 0.05]")
        lo, hi = self.level_range
        if not 0 < lo <= hi:
            raise ValidationError(f"archetype {self.name!r}: bad level range {self.level_range}")
        object.__setattr__(self, "base", base / base.sum())

    def with_jitter(self, jitter):
        return Archetype(self.name, self.base, jitter, self.level_range)


def default_archetypes(jitter: float = 0.02) -> list[Archetype]:
    """Six household/business shapes with clearly different timing."""
    shapes = {
        "flat": np.ones(HOURS),
        "morning-peaked": 0.3 + _bump(8, 1.0, 3.3),
        "evening-peaked": 0.3 + _bump(19, 1.0, 3.0),
        "double-peaked": 0.4 + _bump(8, 1.0, 2.0) + _bump(19, 1.0, 2.0),
        # heavy overnight use tapering off through the morning
        "night-valley": 0.3 + _bump(4.5, 2.0, 3.0),
        "industrial-two-shift": _shift([(7, 22)], 1.6, 0.15),
    }
    return [Archetype(name, base, jitter) for name, base in shapes.items()]


@dataclass
class PriceRule:
    """Hourly prices equal to the marginal cost of a feature-driven system cost.

    The system cost is ``base * sum(L) + scale * (mu . features(L))``, so the
    hourly price is ``base + scale * gradient``. Each day draws its own
    ``base`` and ``scale`` within ``1 +/- daily_spread``.
    """

    base: float = 0.6
    scale: float = 0.2
    daily_spread: float = 0.1

    def prices(self, L, spec, rng):
        active = _ActiveSets(L, spec)
        w = spec.weights
        grad = np.zeros(HOURS)
        for j, (h1, h2) in enumerate(active.ramps):
            grad[h2[0]] += w[j]
            grad[h1[0]] -= w[j]
        grad[active.peak_hours[0]] += w[2]
        f = rng.uniform(1 - self.daily_spread, 1 + self.daily_spread, 2)
        lam = self.base * f[0] + self.scale * f[1] * grad
        return np.maximum(lam, 0.0)


@dataclass
class SynthSpec:
    archetypes: list = field(default_factory=default_archetypes)
    consumers_per_archetype: int = 50
    days: int = 30
    rng_seed: int = 0
    rtp_prices: object = field(default_factory=PriceRule)
    start: dt.date = dt.date(2014, 1, 1)
    feature_spec: FeatureSpec = field(default_factory=FeatureSpec)

    def __post_init__(self):
        if not self.archetypes:
            raise ValidationError("need at least one archetype")
        if self.consumers_per_archetype < 1 or self.days < 1:
            raise ValidationError("consumers_per_archetype and days must be >= 1")


@dataclass
class GroundTruth:
    labels: dict
    archetypes: list
    mcis: dict
    prices: dict

    def to_dict(self):
        return {
            "archetypes": self.archetypes,
            "labels": dict(sorted(self.labels.items())),
            "mcis": {
                day.isoformat(): {c: m for (c, d), m in sorted(self.mcis.items()) if d == day}
                for day in sorted(self.prices)
            },
            "prices": {day.isoformat(): [float(x) for x in p] for day, p in sorted(self.prices.items())},
        }


def _consumer_ids(spec):
    width = len(str(spec.consumers_per_archetype))
    return [
        (f"{a.name}-{k:0{width}d}", idx, a)
        for idx, a in enumerate(spec.archetypes)
        for k in range(1, spec.consumers_per_archetype + 1)
    ]


def generate(spec: SynthSpec) -> tuple[Dataset, GroundTruth]:
    """Draw every consumer-day, then the day's prices, then the true MCIs.

    Consumer ``k`` uses its own generator seeded by ``(rng_seed, k)`` so the
    output does not depend on generation order.
    """
    consumers = _consumer_ids(spec)
    days = [spec.start + dt.timedelta(days=i) for i in range(spec.days)]
    profiles = {}
    for k, (cid, _, arch) in enumerate(consumers):
        rng = np.random.default_rng([spec.rng_seed, k])
        lo, hi = arch.level_range
        for day in days:
            noise = 1.0 + arch.jitter * rng.uniform(-1.0, 1.0, HOURS)
            shape = arch.base * noise
            level = rng.uniform(lo, hi)
            profiles[(cid, day)] = validate_profile(level * shape / shape.sum())
    price_rng = np.random.default_rng([spec.rng_seed, len(consumers)])
    prices = {}
    mcis = {}
    for day in days:
        day_profiles = [profiles[(cid, day)] for cid, _, _ in consumers]
        rule = spec.rtp_prices
        if isinstance(rule, PriceRule):
            lam = rule.prices(aggregate(day_profiles), spec.feature_spec, price_rng)
        elif isinstance(rule, Mapping):
            lam = np.asarray(rule[day], dtype=np.float64)
        else:
            lam = np.asarray(rule, dtype=np.float64)
        prices[day] = lam
        for (cid, _, _), p in zip(consumers, day_profiles):
            mcis[(cid, day)] = mci_from_rtp(p, lam)
    labels = {cid: idx for cid, idx, _ in consumers}
    gt = GroundTruth(labels, [a.name for a in spec.archetypes], mcis, prices)
    return Dataset(profiles), gt


def optimal_scheme(gt: GroundTruth, day) -> ProfileMenu:
    if day not in gt.prices:
        raise UnknownDay(f"day {day} not in ground truth", day=str(day))
    return ProfileMenu(tuple(gt.prices[day]))


def optimal_schemes(gt: GroundTruth) -> dict:
    return {day: optimal_scheme(gt, day) for day in sorted(gt.prices)}


def spec_from_dict(data) -> SynthSpec:
    """Build a spec from JSON: archetype names from the default library (or
    explicit ``base`` vectors), counts, seed and an optional price rule."""
    jitter = float(data.get("jitter", 0.02))
    library = {a.name: a for a in default_archetypes(jitter)}
    archetypes = []
    for item in data.get("archetypes", list(library)):
        if isinstance(item, str):
            if item not in library:
                raise ValidationError(f"unknown archetype {item!r}")
            archetypes.append(library[item])
        else:
            archetypes.append(
                Archetype(item["name"], item["base"], float(item.get("jitter", jitter)),
                          tuple(item.get("level_range", (10.0, 100.0))))
            )
    prices = data.get("rtp_prices")
    if prices is None or isinstance(prices, Mapping) and "base" in prices:
        rule = PriceRule(**(prices or {}))
    else:
        rule = prices
    return SynthSpec(
        archetypes=archetypes,
        consumers_per_archetype=int(data.get("consumers_per_archetype", 50)),
        days=int(data.get("days", 30)),
        rng_seed=int(data.get("rng_seed", 0)),
        rtp_prices=rule,
        start=dt.date.fromisoformat(data.get("start", "2014-01-01")),
    )


def ground_truth_json(gt: GroundTruth) -> str:
    return json.dumps(gt.to_dict(), indent=2, sort_keys=True)
