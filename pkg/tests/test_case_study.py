import math
import os

import pytest

from flexmarket.agents import Strategy
from flexmarket.flexibility import case_curves
from flexmarket.game import sweep
from flexmarket.market import Mechanism
from flexmarket.offer_curve import AssetClass
from flexmarket.scenario import BUNDLED_SCENARIOS, load_scenarios

pytestmark = pytest.mark.slow

JOBS = os.cpu_count() or 1
STRATEGIC = (Strategy.OVERPRICING, Strategy.UNDERSTATEMENT, Strategy.UNDERBIDDING)
AGENT_COUNTS = (3, 6, 9, 12)
# published true prices of the flexible scenarios, £/MW/h
PUBLISHED_TRUE_PRICES = {"lw": 8.0, "ct": 9.0, "nze": 10.0}


@pytest.fixture(scope="module")
def curve_sets():
    return case_curves(load_scenarios(list(BUNDLED_SCENARIOS)), jobs=JOBS)


@pytest.fixture(scope="module")
def true_prices(curve_sets):
    return {c.scenario: c.true_price for c in curve_sets}


@pytest.fixture(scope="module")
def ct_curves(curve_sets):
    return next(c for c in curve_sets if c.scenario == "ct")


@pytest.fixture(scope="module")
def ct_games(ct_curves):
    table = sweep([ct_curves], list(Mechanism), STRATEGIC, AGENT_COUNTS, jobs=JOBS)
    assert not table.failed
    return {(r["mechanism"], r["strategy"], r["agents"]): r for r in table.rows}


@pytest.fixture(scope="module")
def all_games(curve_sets):
    table = sweep(curve_sets, list(Mechanism), STRATEGIC, AGENT_COUNTS, jobs=JOBS)
    assert not table.failed
    return table.rows


def test_status_quo_needs_reinforcement(true_prices):
    assert true_prices["st"] == 50.0


@pytest.mark.parametrize("scenario", ["lw", "ct", "nze"])
def test_flexible_scenarios_clear_below_ceiling(true_prices, scenario):
    assert true_prices[scenario] < 50.0


@pytest.mark.parametrize("scenario", sorted(PUBLISHED_TRUE_PRICES))
def test_true_prices_near_published(true_prices, scenario):
    assert abs(true_prices[scenario] - PUBLISHED_TRUE_PRICES[scenario]) <= 2.0


def test_true_prices_follow_flexibility(true_prices):
    assert true_prices["lw"] <= true_prices["ct"] <= true_prices["nze"]


def test_curves_are_nondecreasing(curve_sets):
    for curves in curve_sets:
        for asset in AssetClass:
            capacities = curves.curves[asset].capacities
            assert all(b >= a for a, b in zip(capacities, capacities[1:]))


def test_curves_independent_of_jobs(ct_curves):
    (serial,) = case_curves(load_scenarios(["ct"]), jobs=1)

    for asset in AssetClass:
        assert list(serial.curves[asset].capacities) == list(ct_curves.curves[asset].capacities)


@pytest.mark.parametrize("agents", AGENT_COUNTS)
def test_overpricing_dominates_under_pay_as_bid(ct_games, agents):
    op = ct_games["pab", "op", agents]["price"]

    assert op >= ct_games["pab", "us", agents]["price"]
    assert op >= ct_games["pab", "ub", agents]["price"]


@pytest.mark.parametrize("agents", AGENT_COUNTS)
def test_understatement_never_clears_below_true_price(ct_games, ct_curves, agents):
    assert ct_games["pac", "us", agents]["price"] >= ct_curves.true_price


@pytest.mark.parametrize("strategy", [s.value for s in STRATEGIC])
@pytest.mark.parametrize("agents", AGENT_COUNTS)
def test_pab_and_dra_cells_identical(ct_games, strategy, agents):
    pab = ct_games["pab", strategy, agents]
    dra = ct_games["dra", strategy, agents]

    assert {**pab, "mechanism": None} == {**dra, "mechanism": None}


@pytest.mark.parametrize("strategy", [s.value for s in STRATEGIC])
@pytest.mark.parametrize("agents", AGENT_COUNTS)
def test_vcg_clears_near_true_price(ct_games, ct_curves, strategy, agents):
    price = ct_games["vcg", strategy, agents]["price"]

    # one step of the integer fee grid
    assert abs(price - ct_curves.true_price) <= 1.0 + 1e-9


def _profit_share(rows, mechanism, strategy=None):
    cells = [
        r
        for r in rows
        if r["mechanism"] == mechanism and (strategy is None or r["strategy"] == strategy)
    ]
    revenue = math.fsum(r["dso_payment"] for r in cells)
    cost = math.fsum(r["provider_cost"] for r in cells)
    return (revenue - cost) / revenue


def test_profit_share_ordering(all_games):
    shares = [
        _profit_share(all_games, "pab", "op"),
        _profit_share(all_games, "pac", "us"),
        _profit_share(all_games, "dra", "ub"),
        _profit_share(all_games, "vcg"),
    ]

    assert shares == sorted(shares, reverse=True)
