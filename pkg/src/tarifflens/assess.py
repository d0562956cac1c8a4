"""Efficiency scores for an implemented price scheme.

DOC is the normalized mutual information (in bits) between the partition of
consumers by demand profile and the partition by binned daily average rate.
Dt is the percentage of consumer pairs whose MCI-index order and rate order
are strictly reversed. The subsidy ledger prices each consumer's gap between
their marginal cost impact and the rate they actually paid.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .cluster import partition_by_profile
from .core import Partition
from .errors import ConsumerSetMismatch, TooFewConsumers, ValidationError
from .impact import FeatureSpec, impact_table, mci_from_rtp
from .tariff import avg_rate_table, bill, partition_by_rate, scheme_for, scheme_name

NEUTRAL_TOL = 1e-12


@dataclass(frozen=True)
class DocResult:
    day: object
    doc: float
    h_profile: float
    h_rate: float
    mutual_info: float


@dataclass(frozen=True)
class DtResult:
    day: object
    dt_percent: float
    discordant_pairs: int
    comparable_pairs: int
    total_pairs: int
    epsilon: float


@dataclass(frozen=True)
class LedgerEntry:
    consumer: str
    mci: float
    paid_rate: float
    total_kwh: float
    amount: float
    flag: str


@dataclass
class SubsidyLedger:
    day: object
    entries: list
    rtp_cost: float
    revenue: float

    @property
    def total_amount(self) -> float:
        return math.fsum(e.amount for e in self.entries)

    def flags(self) -> Counter:
        return Counter(e.flag for e in self.entries)


def _check_same_consumers(a, b):
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise ConsumerSetMismatch(f"consumer sets differ, e.g. {missing[:3]}", count=len(missing))


def _entropy(counts, n):
    return math.fsum(-(c / n) * math.log2(c / n) for c in counts)


def doc(profile_partition: Partition, rate_partition: Partition) -> DocResult:
    """Degree of consistency between a profile partition and a rate partition."""
    p, r = profile_partition.labels, rate_partition.labels
    _check_same_consumers(p, r)
    if profile_partition.day != rate_partition.day:
        raise ValidationError(f"partitions are for different days: {profile_partition.day}, {rate_partition.day}")
    n = len(p)
    if n == 0:
        raise TooFewConsumers("no consumers in partition")
    n_t = Counter(p.values())
    n_s = Counter(r.values())
    n_ts = Counter((p[c], r[c]) for c in p)
    log_t = {t: math.log2(k / n) for t, k in n_t.items()}
    log_s = {s: math.log2(k / n) for s, k in n_s.items()}
    # each term is written so that it coincides bit-for-bit with the entropy
    # term when a cell fills its whole row and column; fsum is order-free
    mi = math.fsum(
        (k / n) * (math.log2(k / n) - (log_t[t] + log_s[s])) for (t, s), k in n_ts.items()
    )
    h_p = _entropy(n_t.values(), n)
    h_r = _entropy(n_s.values(), n)
    denom = h_p + h_r
    if denom > 0:
        value = min(max(2.0 * mi / denom, 0.0), 1.0)
    else:
        value = 1.0
    return DocResult(profile_partition.day, value, h_p, h_r, mi)


class _Fenwick:
    def __init__(self, n):
        self.tree = [0] * (n + 1)

    def add(self, i):
        i += 1
        while i < len(self.tree):
            self.tree[i] += 1
            i += i & -i

    def prefix(self, i):
        """Count of inserted positions <= i."""
        i += 1
        s = 0
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s


def _first_true(lo, hi, pred):
    """Smallest index in [lo, hi) where monotone ``pred`` holds, else ``hi``."""
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _pair_counts(x, y, eps):
    """(discordant, concordant) pair counts in O(N log N).

    A pair is concordant when both differences exceed ``eps`` with the same
    sign, discordant when they exceed it with opposite signs. Sweeping points
    in ascending x, every earlier point with ``x_j - x_i > eps`` is inserted
    into a Fenwick tree over y-ranks; the two counts are then range queries
    whose bounds are found by bisection on the sorted y values.
    """
    n = len(x)
    order = sorted(range(n), key=lambda i: (x[i], i))
    ys = sorted(set(y))
    rank = {v: k for k, v in enumerate(ys)}
    tree = _Fenwick(len(ys))
    inserted = 0
    ptr = 0
    disc = conc = 0
    for j in order:
        xj, yj = x[j], y[j]
        while ptr < n and xj - x[order[ptr]] > eps:
            tree.add(rank[y[order[ptr]]])
            inserted += 1
            ptr += 1
        if not inserted:
            continue
        hi_start = _first_true(0, len(ys), lambda q: ys[q] - yj > eps)
        disc += inserted - tree.prefix(hi_start - 1)
        lo_end = _first_true(0, len(ys), lambda q: not (yj - ys[q] > eps))
        conc += tree.prefix(lo_end - 1)
    return disc, conc


def _aligned(phi, rates):
    _check_same_consumers(phi, rates)
    ids = sorted(phi)
    if len(ids) < 2:
        raise TooFewConsumers("Dt needs at least two consumers")
    x = [float(phi[c]) for c in ids]
    y = [float(rates[c]) for c in ids]
    if not all(math.isfinite(v) for v in x + y):
        raise ValidationError("MCI indices and rates must be finite")
    return x, y


def dt(phi: Mapping[str, float], rates: Mapping[str, float], epsilon: float = 1e-12, day=None) -> DtResult:
    """Distortion: share of pairs ordered one way by MCI index and the other by rate."""
    if not epsilon >= 0:
        raise ValidationError("epsilon must be >= 0")
    x, y = _aligned(phi, rates)
    disc, conc = _pair_counts(x, y, epsilon)
    n = len(x)
    total = n * (n - 1) // 2
    return DtResult(day, 100.0 * disc / total, disc, disc + conc, total, epsilon)


def dt_bruteforce(phi, rates, epsilon: float = 1e-12, day=None) -> DtResult:
    """O(N^2) reference for :func:`dt`."""
    x, y = _aligned(phi, rates)
    n = len(x)
    disc = comp = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if abs(dx) > epsilon and abs(dy) > epsilon:
                comp += 1
                if (dx > epsilon and -dy > epsilon) or (-dx > epsilon and dy > epsilon):
                    disc += 1
    total = n * (n - 1) // 2
    return DtResult(day, 100.0 * disc / total, disc, comp, total, epsilon)


def _prices_for(prices, day):
    if isinstance(prices, Mapping):
        if day not in prices:
            raise ValidationError(f"no prices for day {day}")
        return prices[day]
    return prices


def subsidy_ledger(d, day, prices, scheme) -> SubsidyLedger:
    lam = np.asarray(_prices_for(prices, day), dtype=np.float64)
    scheme = scheme_for(scheme, day)
    entries = []
    revenue = []
    for c, p in d.day(day).items():
        mci = mci_from_rtp(p, lam)
        b = bill(scheme, p, c, day)
        gap = mci - b.avg_rate
        if gap > NEUTRAL_TOL:
            flag = "subsidized"
        elif gap < -NEUTRAL_TOL:
            flag = "taxed"
        else:
            flag = "neutral"
        entries.append(LedgerEntry(c, mci, b.avg_rate, p.total, gap * p.total, flag))
        revenue.append(b.amount)
    profiles = list(d.day(day).values())
    rtp_cost = math.fsum(float(np.dot(lam, p.hours)) for p in profiles)
    return SubsidyLedger(day, entries, rtp_cost, math.fsum(revenue))


@dataclass
class DayAssessment:
    day: object
    doc: DocResult
    dt: DtResult
    ledger: SubsidyLedger | None = None
    profile_partition: Partition | None = None
    rate_partition: Partition | None = None
    rates: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)


@dataclass
class AssessmentReport:
    scheme: str
    bins: int
    days: list

    def to_dict(self, ledger_path=None, digits=12):
        out = {
            "scheme": self.scheme,
            "bins": self.bins,
            "days": [
                {
                    "date": a.day.isoformat(),
                    "doc": round(a.doc.doc, digits),
                    "h_profile": round(a.doc.h_profile, digits),
                    "h_rate": round(a.doc.h_rate, digits),
                    "dt_percent": round(a.dt.dt_percent, digits),
                    "discordant": a.dt.discordant_pairs,
                    "comparable": a.dt.comparable_pairs,
                }
                for a in self.days
            ],
            "bin_edge_rule": "upper",
            "dt_epsilon": self.days[0].dt.epsilon if self.days else None,
        }
        if ledger_path is not None:
            out["ledger_path"] = str(ledger_path)
        return out

    def plot_csv(self, digits=12) -> str:
        lines = ["date,doc,dt_percent"]
        for a in self.days:
            lines.append(f"{a.day.isoformat()},{round(a.doc.doc, digits)!r},{round(a.dt.dt_percent, digits)!r}")
        return "\n".join(lines) + "\n"

    def ledger_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["consumer_id", "date", "mci", "paid_rate", "total_kwh", "amount", "flag"])
        for a in self.days:
            if a.ledger is None:
                continue
            for e in a.ledger.entries:
                w.writerow([e.consumer, a.day.isoformat(), repr(e.mci), repr(e.paid_rate),
                            repr(e.total_kwh), repr(e.amount), e.flag])
        return buf.getvalue()


def assess_scheme(
    d,
    model,
    scheme,
    spec: FeatureSpec = FeatureSpec(),
    days=None,
    bins=None,
    prices=None,
    rate_range=None,
    epsilon: float = 1e-12,
    memoize: bool = False,
) -> AssessmentReport:
    """DOC, Dt and (with ``prices``) the subsidy ledger for each day.

    ``bins`` defaults to the number of profile types. ``rate_range`` is None
    for each day's observed [min, max], ``"global"`` for the range over all
    assessed days, or an explicit ``(lo, hi)``.
    """
    days = sorted(d.days if days is None else days)
    bins = model.k if bins is None else int(bins)
    rate_tables = {day: avg_rate_table(d, day, scheme) for day in days}
    if rate_range == "global":
        allr = [r for t in rate_tables.values() for r in t.values()]
        rate_range = (min(allr), max(allr)) if allr and min(allr) < max(allr) else None
    results = []
    for day in days:
        rates = rate_tables[day]
        pp = partition_by_profile(d, model, day)
        rp = partition_by_rate(rates, bins, rate_range, day=day)
        records = impact_table(d, day, spec, model=model if memoize else None)
        phi = {r.consumer: r.phi for r in records}
        ledger = subsidy_ledger(d, day, prices, scheme) if prices is not None else None
        results.append(
            DayAssessment(day, doc(pp, rp), dt(phi, rates, epsilon, day=day), ledger, pp, rp, rates, phi)
        )
    first = scheme_for(scheme, days[0]) if days else scheme
    return AssessmentReport(scheme_name(first) if days else "none", bins, results)
