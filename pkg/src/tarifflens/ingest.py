"""Smart-meter CSV ingestion and the canonical wide dataset file."""
from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import math
import os
import tempfile
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import IO, Iterable, Mapping

import numpy as np

from .core import HOURS, DailyProfile, validate_profile
from .errors import (
    DuplicateConflict,
    IoFailure,
    MalformedRow,
    MissingHeader,
    SchemaMismatch,
    UnknownDay,
    ValidationError,
)

READING_HEADER = ["consumer_id", "timestamp", "kwh"]
DATASET_HEADER = ["consumer_id", "date"] + [f"h{h:02d}" for h in range(1, HOURS + 1)]
DUPLICATE_TOL = 1e-9


@dataclass(frozen=True)
class MeterReading:
    consumer_id: str
    timestamp: dt.datetime
    kwh: float

    @property
    def day(self) -> dt.date:
        return self.timestamp.date()

    @property
    def hour(self) -> int:
        """Hour index 1..24; the reading stamped HH:00 covers [HH, HH+1)."""
        return self.timestamp.hour + 1


class GapPolicy(enum.Enum):
    DROP_INCOMPLETE = "drop"
    INTERPOLATE_UP_TO_2 = "interpolate"

    @classmethod
    def parse(cls, value) -> "GapPolicy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "drop": cls.DROP_INCOMPLETE,
            "dropincomplete": cls.DROP_INCOMPLETE,
            "drop_incomplete": cls.DROP_INCOMPLETE,
            "interpolate": cls.INTERPOLATE_UP_TO_2,
            "interpolateupto2": cls.INTERPOLATE_UP_TO_2,
            "interpolate_up_to_2": cls.INTERPOLATE_UP_TO_2,
        }
        if key not in aliases:
            raise ValidationError(f"unknown gap policy {value!r}")
        return aliases[key]


@dataclass
class IngestReport:
    rows: int = 0
    readings: int = 0
    accepted_days: int = 0
    dropped_days: int = 0
    repaired_hours: int = 0
    duplicates_merged: int = 0

    def to_dict(self):
        return asdict(self)


class Dataset:
    """Validated daily profiles keyed by ``(consumer_id, date)``."""

    def __init__(self, profiles: Mapping[tuple[str, dt.date], DailyProfile] | None = None):
        self.profiles: dict[tuple[str, dt.date], DailyProfile] = dict(
            sorted((profiles or {}).items(), key=lambda kv: (kv[0][1], kv[0][0]))
        )
        self._by_day: dict[dt.date, dict[str, DailyProfile]] = defaultdict(dict)
        for (c, d), p in self.profiles.items():
            self._by_day[d][c] = p
        self.days = sorted(self._by_day)
        self.consumers = sorted({c for c, _ in self.profiles})

    def __len__(self):
        return len(self.profiles)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.profiles.keys() == other.profiles.keys() and all(
            self.profiles[k] == other.profiles[k] for k in self.profiles
        )

    def __repr__(self):
        return f"Dataset(profiles={len(self)}, consumers={len(self.consumers)}, days={len(self.days)})"

    def day(self, day: dt.date) -> dict[str, DailyProfile]:
        """Profiles present on ``day``, ordered by consumer id."""
        if day not in self._by_day:
            raise UnknownDay(f"day {day} not in dataset", day=str(day))
        return dict(sorted(self._by_day[day].items()))

    def matrix(self):
        """All consumer-days as an ``(n, 24)`` array plus their keys."""
        keys = list(self.profiles)
        if not keys:
            return keys, np.empty((0, HOURS))
        return keys, np.stack([self.profiles[k].hours for k in keys])

    def to_readings(self) -> list[MeterReading]:
        out = []
        for (c, d), p in self.profiles.items():
            base = dt.datetime.combine(d, dt.time())
            for h, v in enumerate(p.hours):
                out.append(MeterReading(c, base + dt.timedelta(hours=h), float(v)))
        return out


def _parse_timestamp(text: str) -> dt.datetime:
    ts = dt.datetime.fromisoformat(text.strip())
    if ts.tzinfo is not None:
        raise ValueError("timestamps must be local (no UTC offset)")
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError("timestamp must be at hour granularity")
    return ts


def parse_readings(source: IO[bytes] | IO[str] | bytes | str) -> list[MeterReading]:
    """Parse ``consumer_id,timestamp,kwh`` CSV rows in file order."""
    if isinstance(source, bytes):
        text = io.StringIO(source.decode("utf-8-sig"))
    elif isinstance(source, str):
        text = io.StringIO(source)
    else:
        raw = source.read()
        text = io.StringIO(raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw)
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != READING_HEADER:
        raise MissingHeader(f"expected header {','.join(READING_HEADER)}, got {header!r}")
    out = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise MalformedRow(line, f"expected 3 fields, got {len(row)}")
        cid, ts, kwh = (cell.strip() for cell in row)
        if not cid:
            raise MalformedRow(line, "empty consumer_id")
        try:
            stamp = _parse_timestamp(ts)
        except ValueError as exc:
            raise MalformedRow(line, f"bad timestamp {ts!r}: {exc}") from None
        try:
            value = float(kwh)
        except ValueError:
            raise MalformedRow(line, f"bad kwh {kwh!r}") from None
        if not math.isfinite(value):
            raise MalformedRow(line, f"non-finite kwh {kwh!r}")
        out.append(MeterReading(cid, stamp, value))
    return out


def _interpolate(values: list, max_gap: int = 2):
    """Fill runs of at most ``max_gap`` missing hours linearly; None if impossible."""
    filled = list(values)
    repaired = 0
    h = 0
    while h < HOURS:
        if filled[h] is not None:
            h += 1
            continue
        start = h
        while h < HOURS and filled[h] is None:
            h += 1
        run = h - start
        if start == 0 or h == HOURS or run > max_gap:
            return None, 0
        left, right = filled[start - 1], filled[h]
        for k in range(run):
            filled[start + k] = (left * (run - k) + right * (k + 1)) / (run + 1)
        repaired += run
    return filled, repaired


def build_dataset(
    readings: Iterable[MeterReading], policy: GapPolicy | str = GapPolicy.DROP_INCOMPLETE
) -> tuple[Dataset, IngestReport]:
    policy = GapPolicy.parse(policy)
    report = IngestReport()
    slots: dict[tuple[str, dt.date], list] = defaultdict(lambda: [None] * HOURS)
    for r in readings:
        report.rows += 1
        day = slots[(r.consumer_id, r.day)]
        h = r.hour - 1
        if day[h] is not None:
            if abs(day[h] - r.kwh) > DUPLICATE_TOL:
                raise DuplicateConflict(
                    f"conflicting readings for {r.consumer_id} at {r.timestamp.isoformat()}",
                    consumer_id=r.consumer_id,
                    timestamp=r.timestamp.isoformat(),
                )
            report.duplicates_merged += 1
            continue
        day[h] = r.kwh
        report.readings += 1

    profiles = {}
    for key, values in slots.items():
        # readings <= 0 violate strict positivity; they count as missing
        values = [v if v is not None and v > 0 else None for v in values]
        repaired = 0
        if any(v is None for v in values):
            if policy is GapPolicy.DROP_INCOMPLETE:
                report.dropped_days += 1
                continue
            values, repaired = _interpolate(values)
            if values is None:
                report.dropped_days += 1
                continue
        profiles[key] = validate_profile(values)
        report.accepted_days += 1
        report.repaired_hours += repaired
    return Dataset(profiles), report


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def format_float(x: float) -> str:
    # shortest repr round-trips exactly
    return repr(float(x))


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_HEADER)
    for (c, day), p in d.profiles.items():
        w.writerow([c, day.isoformat()] + [format_float(v) for v in p.hours])
    return buf.getvalue()


def write_dataset(d: Dataset, path):
    atomic_write_text(path, dataset_to_csv(d))


def read_dataset(path) -> Dataset:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    if not rows or [h.strip() for h in rows[0]] != DATASET_HEADER:
        raise SchemaMismatch(f"{path}: expected header consumer_id,date,h01..h24")
    profiles = {}
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(DATASET_HEADER):
            raise SchemaMismatch(f"{path}:{n}: expected {len(DATASET_HEADER)} fields")
        try:
            day = dt.date.fromisoformat(row[1])
            values = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise SchemaMismatch(f"{path}:{n}: {exc}") from None
        key = (row[0], day)
        if key in profiles:
            raise SchemaMismatch(f"{path}:{n}: duplicate consumer-day {row[0]} {day}")
        profiles[key] = validate_profile(values)
    return Dataset(profiles)
