"""Desk-scale market simulator: quadratic consumers against a linear supply.

Consumer ``i`` has separable utility ``sum_h a_h l_h - b_h l_h**2 / 2``. Under
hourly prices the optimal demand is ``(a_h - price_h) / b_h``. Under a
profile price menu the consumer pays one daily rate equal to the
demand-weighted mean price, which makes the rate depend on the consumer's own
demand; the resulting first-order system is solved numerically here so it can
be compared against the hourly-price closed form.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import HOURS
from .errors import InteriorityViolated, NoConvergence, SchemaMismatch, ValidationError
from .impact import mci_from_rtp


def _vec(x, name, positive=False, nonneg=False):
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (HOURS,):
        raise ValidationError(f"{name} must have {HOURS} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    if positive and not np.all(arr > 0):
        raise ValidationError(f"{name} must be > 0")
    if nonneg and not np.all(arr >= 0):
        raise ValidationError(f"{name} must be >= 0")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuadraticConsumer:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, "a", positive=True))
        object.__setattr__(self, "b", _vec(self.b, "b", positive=True))

    def marginal_utility(self, l):
        return self.a - self.b * l


@dataclass(frozen=True)
class SupplyCurve:
    """Hourly price ``c_h + d_h * L_h`` as a function of aggregate demand."""

    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c, "c", nonneg=True))
        object.__setattr__(self, "d", _vec(self.d, "d", nonneg=True))

    def price(self, L):
        return self.c + self.d * L


@dataclass
class EquilibriumResult:
    demands: np.ndarray
    prices: np.ndarray
    iterations: int
    residual: float
    pricing: str = "rtp"
    trace: list = field(default_factory=list)


def _check_interior(l, consumer=None):
    bad = ~(l > 0)
    if bad.any():
        raise InteriorityViolated(hour=int(np.argmax(bad)) + 1, consumer=consumer)
    return l


def rtp_demand(u: QuadraticConsumer, prices, consumer=None) -> np.ndarray:
    lam = _vec(prices, "prices")
    return _check_interior((u.a - lam) / u.b, consumer)


def ppm_rate_terms(l, prices):
    """Marginal cost of demand in each hour under the profile price menu.

    Returns ``(rate_effect, rate)``: per hour, the change in the whole bill
    caused by the daily rate moving, and the daily rate itself. Their sum is
    the hourly price.
    """
    l = np.asarray(l, dtype=np.float64)
    lam = np.asarray(prices, dtype=np.float64)
    S = l.sum()
    weighted = float(np.dot(lam, l))
    mci = weighted / S
    others = S - l
    others_weighted = weighted - lam * l
    rate_effect = (lam * others - others_weighted) / S
    return rate_effect, mci


def ppm_residual(u: QuadraticConsumer, l, prices) -> np.ndarray:
    """First-order condition residual of the profile-price-menu consumer problem."""
    rate_effect, mci = ppm_rate_terms(l, prices)
    return u.marginal_utility(np.asarray(l, dtype=np.float64)) - (rate_effect + mci)


def rtp_residual(u: QuadraticConsumer, l, prices) -> np.ndarray:
    return u.marginal_utility(np.asarray(l, dtype=np.float64)) - np.asarray(prices, dtype=np.float64)


def _fd_jacobian(fun, x, f0, rel_step):
    J = np.empty((x.size, x.size))
    for k in range(x.size):
        h = rel_step * max(abs(x[k]), 1.0)
        xk = x.copy()
        xk[k] += h
        J[:, k] = (fun(xk) - f0) / h
    return J


def ppm_demand(
    u: QuadraticConsumer,
    prices,
    tol: float = 1e-10,
    max_iter: int = 200,
    x0=None,
    rel_step: float = 1e-7,
    consumer=None,
) -> np.ndarray:
    """Solve the menu consumer's first-order system by damped Newton.

    Starts from the hourly-price demand unless ``x0`` is given; the Jacobian
    is a forward-difference approximation. Steps are halved until demands
    stay positive and the residual max-norm decreases.
    """
    lam = _vec(prices, "prices")
    start = rtp_demand(u, lam, consumer) if x0 is None else _vec(x0, "x0", positive=True)
    x = np.array(start, dtype=np.float64)

    def fun(v):
        return ppm_residual(u, v, lam)

    f = fun(x)
    norm = float(np.max(np.abs(f)))
    trace = [norm]
    for _ in range(max_iter):
        if norm < tol:
            return _check_interior(x, consumer)
        J = _fd_jacobian(fun, x, f, rel_step)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -f, rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            cand = x + t * step
            if np.all(cand > 0):
                fc = fun(cand)
                nc = float(np.max(np.abs(fc)))
                if nc < norm:
                    break
            t *= 0.5
        else:
            raise NoConvergence(len(trace), norm, trace)
        x, f, norm = cand, fc, nc
        trace.append(norm)
    if norm < tol:
        return _check_interior(x, consumer)
    raise NoConvergence(max_iter, norm, trace)


def _closed_form_rtp(consumers, supply):
    A = sum(u.a / u.b for u in consumers)
    B = sum(1.0 / u.b for u in consumers)
    return (supply.c + supply.d * A) / (1.0 + supply.d * B)


def market_equilibrium(
    consumers,
    supply: SupplyCurve,
    pricing: str = "rtp",
    tol: float = 1e-10,
    max_iter: int = 500,
    damping: float = 0.5,
) -> EquilibriumResult:
    """Price-taking equilibrium under hourly prices or the profile price menu.

    ``rtp`` is solved in closed form hour by hour. ``ppm`` alternates the menu
    demand solve with a damped price update, starting from the supply
    intercepts, until the price change max-norm drops below ``tol``.
    """
    consumers = list(consumers)
    if not consumers:
        raise ValidationError("need at least one consumer")
    if pricing == "rtp":
        lam = _closed_form_rtp(consumers, supply)
        demands = np.stack([rtp_demand(u, lam, i) for i, u in enumerate(consumers)])
        residual = float(np.max(np.abs(supply.price(demands.sum(axis=0)) - lam)))
        return EquilibriumResult(demands, lam, 0, residual, "rtp")
    if pricing != "ppm":
        raise ValidationError(f"pricing must be 'rtp' or 'ppm', got {pricing!r}")
    lam = np.array(supply.c, dtype=np.float64)
    # menu demands are solved on their own first-order system, never seeded
    # with the hourly-price closed form: half the satiation level to begin
    # with, then the previous iterate
    demands = np.stack([u.a / (2.0 * u.b) for u in consumers])
    trace = []

    def solve(prices, starts):
        return np.stack([ppm_demand(u, prices, x0=x, consumer=i) for i, (u, x) in enumerate(zip(consumers, starts))])

    for it in range(1, max_iter + 1):
        demands = solve(lam, demands)
        target = supply.price(demands.sum(axis=0))
        new = (1.0 - damping) * lam + damping * target
        change = float(np.max(np.abs(new - lam)))
        trace.append(change)
        lam = new
        if change < tol:
            demands = solve(lam, demands)
            return EquilibriumResult(demands, lam, it, change, "ppm", trace)
    raise NoConvergence(max_iter, trace[-1], trace)


@dataclass
class BillCheckRow:
    consumer: int
    avg_rate: float
    mci: float
    deviation: float
    passed: bool


def verify_bill_matches_mci(consumers, supply: SupplyCurve, rate_offsets=None, tol: float = 1e-10):
    """Check that hourly-price billing charges every consumer their MCI.

    The hourly-price bill ``sum_h price_h * l_h`` is divided by the daily total
    and compared with the weighted-average MCI. ``rate_offsets`` (consumer
    index -> extra rate) injects billing faults for testing the check itself.
    """
    eq = market_equilibrium(consumers, supply, "rtp")
    offsets = rate_offsets or {}
    rows = []
    for i, l in enumerate(eq.demands):
        total = float(l.sum())
        amount = math.fsum(eq.prices * l) + offsets.get(i, 0.0) * total
        avg = amount / total
        mci = mci_from_rtp(l, eq.prices)
        dev = abs(avg - mci)
        rows.append(BillCheckRow(i, avg, mci, dev, dev <= tol))
    return rows


def random_scenario(rng, n_consumers: int = 5, max_dB: float = 1.0):
    """Random interior scenario: ``a`` in [3, 4], ``b`` in [0.5, 2], ``c`` in
    [0.2, 0.8] and slopes scaled so ``d_h * sum_i 1/b_ih`` stays below ``max_dB``.
    """
    consumers = [
        QuadraticConsumer(rng.uniform(3.0, 4.0, HOURS), rng.uniform(0.5, 2.0, HOURS))
        for _ in range(n_consumers)
    ]
    B = sum(1.0 / u.b for u in consumers)
    d = rng.uniform(0.05, max_dB, HOURS) / B
    supply = SupplyCurve(rng.uniform(0.2, 0.8, HOURS), d)
    return consumers, supply


def scenario_from_dict(data):
    try:
        consumers = [QuadraticConsumer(c["a"], c["b"]) for c in data["consumers"]]
        supply = SupplyCurve(data["supply"]["c"], data["supply"]["d"])
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"invalid scenario: {exc!r}") from None
    pricing = data.get("pricing", "both")
    tol = float(data.get("tol", 1e-10))
    return consumers, supply, pricing, tol


def scenario_to_dict(consumers, supply, pricing="both", tol=1e-10):
    return {
        "consumers": [{"a": u.a.tolist(), "b": u.b.tolist()} for u in consumers],
        "supply": {"c": supply.c.tolist(), "d": supply.d.tolist()},
        "pricing": pricing,
        "tol": tol,
    }


def load_scenario(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return scenario_from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from None


def simulate(consumers, supply, mode: str = "both", tol: float = 1e-10) -> dict:
    """Run one scenario and report equilibria plus the equivalence checks."""
    if mode not in ("rtp", "ppm", "both"):
        raise ValidationError(f"mode must be rtp, ppm or both, got {mode!r}")
    out = {"mode": mode}
    results = {}
    for pricing in ("rtp", "ppm"):
        if mode in (pricing, "both"):
            results[pricing] = market_equilibrium(consumers, supply, pricing, tol=tol)
    for name, res in results.items():
        out[name] = {
            "prices": res.prices.tolist(),
            "demands": res.demands.tolist(),
            "iterations": res.iterations,
            "residual": res.residual,
        }
    # fixed-price check: menu demand, solved from a start away from the
    # answer, against the closed form at the rtp prices
    lam = results["rtp"].prices if "rtp" in results else _closed_form_rtp(consumers, supply)
    fixed_dev = 0.0
    for i, u in enumerate(consumers):
        ref = rtp_demand(u, lam, i)
        got = ppm_demand(u, lam, tol=tol, x0=1.5 * ref, consumer=i)
        fixed_dev = max(fixed_dev, float(np.max(np.abs(got - ref))))
    equivalence = {"fixed_price_max_demand_deviation": fixed_dev}
    if mode == "both":
        equivalence["max_demand_deviation"] = float(np.max(np.abs(results["rtp"].demands - results["ppm"].demands)))
        equivalence["max_price_deviation"] = float(np.max(np.abs(results["rtp"].prices - results["ppm"].prices)))
    equivalence["passed"] = all(v < 1e-8 for k, v in equivalence.items() if k != "passed")
    out["equivalence"] = equivalence
    rows = verify_bill_matches_mci(consumers, supply)
    out["bill_check"] = {
        "rows": [
            {"consumer": r.consumer, "avg_rate": r.avg_rate, "mci": r.mci, "deviation": r.deviation, "passed": r.passed}
            for r in rows
        ],
        "passed": all(r.passed for r in rows),
    }
    return out
