import datetime as dt

import numpy as np
import pytest

from tarifflens.errors import DuplicateConflict, MalformedRow, MissingHeader, SchemaMismatch
from tarifflens.ingest import (
    Dataset,
    GapPolicy,
    build_dataset,
    dataset_to_csv,
    parse_readings,
    read_dataset,
    write_dataset,
)
from tarifflens.synth import SynthSpec, default_archetypes, generate

HEADER = "consumer_id,timestamp,kwh\n"


def readings_csv(cid="c1", day="2014-01-01", values=None, skip=()):
    values = values if values is not None else [1.0] * 24
    rows = [f"{cid},{day}T{h:02d}:00,{v!r}" for h, v in enumerate(values) if h + 1 not in skip]
    return HEADER + "\n".join(rows) + "\n"


def test_single_row():
    assert len(parse_readings((HEADER + "a,2014-01-01T00:00,1.5\n").encode())) == 1


def test_malformed_kwh_line_number():
    with pytest.raises(MalformedRow) as info:
        parse_readings(HEADER + "a,2014-01-01T00:00,abc\n")
    assert info.value.details["line"] == 2


def test_missing_header():
    with pytest.raises(MissingHeader):
        parse_readings("a,2014-01-01T00:00,1.0\n")


def test_count_preserved_over_two_days():
    text = readings_csv(day="2014-01-01") + readings_csv(day="2014-01-02")[len(HEADER):]
    assert len(parse_readings(text)) == 48


def test_complete_day_accepted():
    d, report = build_dataset(parse_readings(readings_csv()), GapPolicy.DROP_INCOMPLETE)
    assert len(d) == 1 and report.accepted_days == 1 and report.dropped_days == 0


def test_incomplete_day_dropped():
    d, report = build_dataset(parse_readings(readings_csv(skip={13})), "drop")
    assert len(d) == 0 and report.dropped_days == 1


def test_interpolate_single_gap_is_mean_of_neighbours():
    values = [float(h) for h in range(1, 25)]
    values[11], values[13] = 3.7, 9.1
    d, report = build_dataset(parse_readings(readings_csv(values=values, skip={13})), "interpolate")
    p = d.profiles[("c1", dt.date(2014, 1, 1))]
    assert p.hours[12] == (3.7 + 9.1) / 2
    assert report.repaired_hours == 1


def test_interpolate_two_gap_linear():
    values = [1.0] * 24
    values[9], values[12] = 1.0, 4.0
    d, _ = build_dataset(parse_readings(readings_csv(values=values, skip={11, 12})), "interpolate")
    p = next(iter(d.profiles.values()))
    np.testing.assert_allclose(p.hours[10:12], [2.0, 3.0], rtol=1e-15)


def test_interpolate_refuses_long_and_edge_gaps():
    for skip in ({5, 6, 7}, {1}, {24}):
        d, report = build_dataset(parse_readings(readings_csv(skip=skip)), "interpolate")
        assert len(d) == 0 and report.dropped_days == 1


def test_zero_reading_is_missing():
    values = [1.0] * 24
    values[4] = 0.0
    d, report = build_dataset(parse_readings(readings_csv(values=values)), "drop")
    assert len(d) == 0 and report.dropped_days == 1


def test_duplicates():
    text = readings_csv() + "c1,2014-01-01T05:00,1.0\n"
    _, report = build_dataset(parse_readings(text))
    assert report.duplicates_merged == 1
    with pytest.raises(DuplicateConflict):
        build_dataset(parse_readings(readings_csv() + "c1,2014-01-01T05:00,2.0\n"))


def test_gap_policy_aliases():
    assert GapPolicy.parse("DropIncomplete") is GapPolicy.DROP_INCOMPLETE
    assert GapPolicy.parse("interpolate-up-to-2") is GapPolicy.INTERPOLATE_UP_TO_2


def test_round_trip(tmp_path, rng):
    d, _ = generate(SynthSpec(default_archetypes()[:3], consumers_per_archetype=4, days=3, rng_seed=7))
    path = tmp_path / "d.csv"
    write_dataset(d, path)
    back = read_dataset(path)
    assert back == d
    assert dataset_to_csv(back) == path.read_text()


def test_empty_dataset_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_dataset(Dataset(), path)
    assert path.read_text().count("\n") == 1
    assert len(read_dataset(path)) == 0


def test_three_consumers_three_rows_per_day():
    d, _ = generate(SynthSpec(default_archetypes()[:3], consumers_per_archetype=1, days=2))
    lines = dataset_to_csv(d).splitlines()[1:]
    for day in d.days:
        assert sum(day.isoformat() in ln for ln in lines) == 3


def test_read_dataset_rejects_bad_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n")
    with pytest.raises(SchemaMismatch):
        read_dataset(path)


def test_readings_round_trip():
    d, _ = build_dataset(parse_readings(readings_csv(values=[float(v) for v in np.linspace(0.5, 3.0, 24)])))
    d2, _ = build_dataset(d.to_readings())
    assert d2 == d
