import json

import numpy as np
import pytest

from tarifflens.errors import NonFiniteRate, SchemaMismatch, ValidationError
from tarifflens.impact import mci_from_rtp
from tarifflens.tariff import (
    Flat,
    ProfileMenu,
    RealTime,
    Tiered,
    TimeOfUse,
    avg_rate_table,
    bill,
    load_scheme,
    partition_by_rate,
    scheme_from_dict,
    scheme_to_dict,
)

from conftest import DAY, make_dataset, padded

TOU = TimeOfUse((((1, 12), 0.3), ((13, 24), 0.6)))


def test_flat_bill():
    b = bill(Flat(0.5), np.ones(24))
    assert b.amount == 12.0 and b.avg_rate == 0.5


def test_constant_rtp_equals_flat(rng):
    for _ in range(20):
        p = rng.uniform(0.1, 5, 24)
        assert bill(RealTime([0.4] * 24), p).avg_rate == bill(Flat(0.4), p).avg_rate


def test_tou_hand_band_sum():
    b = bill(TOU, np.ones(24))
    assert b.amount == pytest.approx(10.8, abs=1e-12)
    assert b.avg_rate == pytest.approx(0.45, abs=1e-12)


def test_tou_must_cover_all_hours():
    with pytest.raises(ValidationError):
        TimeOfUse((((1, 12), 0.3),))
    with pytest.raises(ValidationError):
        TimeOfUse((((1, 12), 0.3), ((12, 24), 0.6)))


def test_tiered_marginal():
    scheme = Tiered((10.0, 20.0), (0.1, 0.2, 0.4))
    b = bill(scheme, np.full(24, 1.0))  # 24 kWh
    assert b.amount == pytest.approx(10 * 0.1 + 10 * 0.2 + 4 * 0.4)
    with pytest.raises(ValidationError):
        Tiered((10.0,), (0.1,))


def test_rate_validation():
    with pytest.raises(NonFiniteRate):
        Flat(float("nan"))
    with pytest.raises(ValidationError):
        Flat(-1.0)


def test_menu_table_is_mci():
    lam = np.linspace(0.2, 0.9, 24)
    d = make_dataset({"a": np.ones(24), "b": padded([4.0, 2.0]), "c": np.linspace(1, 3, 24)})
    table = avg_rate_table(d, DAY, ProfileMenu(lam))
    for c, p in d.day(DAY).items():
        assert table[c] == mci_from_rtp(p, lam)
    flat = avg_rate_table(d, DAY, Flat(0.3))
    assert set(flat.values()) == {0.3}


def test_tou_table_matches_hand_bills():
    rows = {"a": np.ones(24), "b": padded([3.0] * 12), "c": padded([], 2.0)}
    d = make_dataset(rows)
    table = avg_rate_table(d, DAY, TOU)
    assert table["a"] == pytest.approx(0.45)
    assert table["b"] == pytest.approx((36 * 0.3 + 12 * 0.6) / 48)
    assert table["c"] == pytest.approx(0.45)


def test_bin_endpoints():
    p = partition_by_rate({"A": 0.35, "B": 0.87}, 36, (0.35, 0.87))
    assert p.labels == {"A": 0, "B": 35}


def test_all_equal_single_bin():
    p = partition_by_rate({"A": 0.5, "B": 0.5, "C": 0.5}, 5)
    assert p.k == 1 and set(p.labels.values()) == {0}


def test_edge_goes_up():
    p = partition_by_rate({"x": 0.1, "y": 0.2, "z": 0.3}, 2, (0.1, 0.3))
    assert [p.labels[c] for c in "xyz"] == [0, 1, 1]


def test_out_of_range_clamped():
    p = partition_by_rate({"lo": -1.0, "hi": 9.0}, 4, (0.0, 1.0))
    assert p.labels == {"lo": 0, "hi": 3}


def test_binning_non_finite():
    with pytest.raises(NonFiniteRate):
        partition_by_rate({"a": float("inf")}, 2)


@pytest.mark.parametrize(
    "scheme",
    [Flat(0.5), TOU, Tiered((10.0,), (0.1, 0.3)), RealTime([0.5] * 24), ProfileMenu(list(np.linspace(0, 1, 24)))],
)
def test_scheme_json_round_trip(scheme, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scheme_to_dict(scheme)))
    assert load_scheme(path) == scheme


def test_per_day_prices_scheme():
    data = {"type": "ppm", "prices": {"2014-03-01": [0.5] * 24}}
    scheme = scheme_from_dict(data)
    assert scheme[DAY] == ProfileMenu([0.5] * 24)
    assert scheme_to_dict(scheme) == data


def test_bad_scheme():
    with pytest.raises(SchemaMismatch):
        scheme_from_dict({"type": "mystery"})
    with pytest.raises(SchemaMismatch):
        scheme_from_dict({"type": "flat"})
