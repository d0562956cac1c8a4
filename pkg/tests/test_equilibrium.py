import numpy as np
import pytest

from tarifflens.equilibrium import (
    QuadraticConsumer,
    SupplyCurve,
    market_equilibrium,
    ppm_demand,
    ppm_residual,
    random_scenario,
    rtp_demand,
    scenario_from_dict,
    scenario_to_dict,
    simulate,
    verify_bill_matches_mci,
)
from tarifflens.errors import InteriorityViolated, ValidationError

from conftest import padded


def test_rtp_closed_form_unit():
    u = QuadraticConsumer(np.full(24, 2.0), np.ones(24))
    assert np.all(rtp_demand(u, np.ones(24)) == 1.0)


def test_rtp_boundary_violation():
    u = QuadraticConsumer(np.full(24, 2.0), np.ones(24))
    with pytest.raises(InteriorityViolated) as info:
        rtp_demand(u, np.full(24, 2.0))
    assert info.value.details["hour"] == 1


def test_rtp_two_hour_toy():
    u = QuadraticConsumer(padded([3.0, 5.0], 2.0), padded([1.0, 2.0], 1.0))
    l = rtp_demand(u, np.ones(24))
    assert tuple(l[:2]) == (2.0, 2.0)


def test_ppm_constant_prices_equals_rtp():
    u = QuadraticConsumer(np.linspace(3, 4, 24), np.linspace(0.5, 2, 24))
    lam = np.full(24, 0.7)
    np.testing.assert_allclose(ppm_demand(u, lam), rtp_demand(u, lam), rtol=0, atol=1e-12)


def test_ppm_matches_rtp_and_residual(rng):
    for _ in range(10):
        u = QuadraticConsumer(rng.uniform(3, 4, 24), rng.uniform(0.5, 2, 24))
        lam = rng.uniform(0.2, 1.5, 24)
        ref = rtp_demand(u, lam)
        got = ppm_demand(u, lam, x0=1.5 * ref)
        assert np.max(np.abs(got - ref)) < 1e-8
        assert np.max(np.abs(ppm_residual(u, got, lam))) < 1e-10


def test_ppm_residual_vanishes_at_rtp_demand(rng):
    u = QuadraticConsumer(rng.uniform(3, 4, 24), rng.uniform(0.5, 2, 24))
    lam = rng.uniform(0.2, 1.5, 24)
    assert np.max(np.abs(ppm_residual(u, rtp_demand(u, lam), lam))) < 1e-12


def test_market_algebraic_oracle():
    u = QuadraticConsumer(np.full(24, 3.0), np.ones(24))
    supply = SupplyCurve(np.zeros(24), np.ones(24))
    for pricing in ("rtp", "ppm"):
        res = market_equilibrium([u], supply, pricing)
        np.testing.assert_allclose(res.demands[0], 1.5, atol=1e-9)
        np.testing.assert_allclose(res.prices, 1.5, atol=1e-9)


def test_fixed_prices_reduce_to_rtp(rng):
    consumers, supply = random_scenario(rng, 4)
    fixed = SupplyCurve(supply.c, np.zeros(24))
    for pricing in ("rtp", "ppm"):
        res = market_equilibrium(consumers, fixed, pricing)
        for i, u in enumerate(consumers):
            np.testing.assert_allclose(res.demands[i], rtp_demand(u, supply.c), atol=1e-9)


def test_rtp_ppm_same_equilibrium(rng):
    consumers, supply = random_scenario(rng, 6)
    a = market_equilibrium(consumers, supply, "rtp")
    b = market_equilibrium(consumers, supply, "ppm")
    assert np.max(np.abs(a.demands - b.demands)) < 1e-8
    assert np.max(np.abs(a.prices - b.prices)) < 1e-8
    assert b.iterations <= 500


def test_bill_check_passes_and_detects_fault(rng):
    consumers, supply = random_scenario(rng, 3)
    assert all(r.passed for r in verify_bill_matches_mci(consumers, supply))
    rows = verify_bill_matches_mci(consumers, supply, rate_offsets={1: 0.01})
    assert [r.passed for r in rows] == [True, False, True]


def test_shared_direction_equal_rates():
    base = QuadraticConsumer(np.full(24, 3.0), np.ones(24))
    twin = QuadraticConsumer(np.full(24, 3.0), np.ones(24))
    supply = SupplyCurve(np.linspace(0.2, 0.8, 24), np.full(24, 0.1))
    rows = verify_bill_matches_mci([base, twin], supply)
    assert rows[0].mci == rows[1].mci


def test_simulate_report_and_scenario_round_trip(rng):
    consumers, supply = random_scenario(rng, 3)
    c2, s2, pricing, tol = scenario_from_dict(scenario_to_dict(consumers, supply))
    assert pricing == "both" and np.array_equal(s2.d, supply.d)
    rep = simulate(c2, s2, "both")
    assert rep["equivalence"]["passed"] and rep["bill_check"]["passed"]
    assert rep["equivalence"]["max_demand_deviation"] < 1e-8


def test_input_validation():
    with pytest.raises(ValidationError):
        QuadraticConsumer(np.ones(24), np.zeros(24))
    with pytest.raises(ValidationError):
        SupplyCurve(np.ones(23), np.ones(23))
    with pytest.raises(ValidationError):
        market_equilibrium([], SupplyCurve(np.ones(24), np.ones(24)))
