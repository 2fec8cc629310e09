import json

import numpy as np
import pytest

from flexmarket.errors import ConfigurationError, ParseError
from flexmarket.market import (
    BALANCE,
    UNMET,
    Mechanism,
    OfferBook,
    ServiceRequirement,
    _clearing_program,
    clear,
    demand_met_schedule,
    settle,
    vcg_payments,
)
from flexmarket.offer_curve import PriceGrid
from flexmarket.simplex import solve_lp

from .conftest import book_of


@pytest.fixture()
def three_offers(prices):
    return book_of(prices, {"a": [(5, 1.0)], "b": [(8, 2.0)], "c": [(12, 2.0)]})


def test_clear_merit_order(three_offers, requirement):
    result = clear(three_offers, requirement)

    assert result.price == 8
    assert result.unmet == 0
    assert result.accepted_of("a").sum() == pytest.approx(1.0, abs=1e-9)
    assert result.accepted_of("b").sum() == pytest.approx(1.5, abs=1e-9)
    assert result.accepted_of("c").sum() == pytest.approx(0.0, abs=1e-9)
    assert result.cost == pytest.approx(5 * 1.0 + 8 * 1.5)


@pytest.mark.parametrize(
    "mechanism, rates",
    [
        (Mechanism.PAC, (8.0, 8.0, 0.0)),
        (Mechanism.PAB, (5.0, 8.0, 0.0)),
        (Mechanism.DRA, (5.0, 8.0, 0.0)),
    ],
)
def test_settlement_rates(three_offers, requirement, mechanism, rates):
    settlement = settle(clear(three_offers, requirement), three_offers, mechanism)

    assert settlement.rates == pytest.approx(rates)


def test_pac_dso_payment(three_offers, requirement):
    settlement = settle(clear(three_offers, requirement), three_offers, Mechanism.PAC)

    # (8 * 1 + 8 * 1.5) £/h over a 2 h window
    assert settlement.dso_payment == pytest.approx(40.0)


def test_vcg_single_agent_paid_ceiling(prices, requirement):
    book = book_of(prices, {"solo": [(10, 3.0)]})
    settlement = vcg_payments(book, requirement)

    assert settlement.rates[0] == pytest.approx(50.0)


def test_vcg_symmetric_agents(prices, requirement):
    book = book_of(prices, {"a": [(10, 2.5)], "b": [(10, 2.5)]})
    settlement = vcg_payments(book, requirement)

    assert settlement.paid_capacity == pytest.approx((1.25, 1.25))
    assert settlement.rates == pytest.approx((10.0, 10.0))


def test_settle_vcg_matches_vcg_payments(three_offers, requirement):
    settled = settle(clear(three_offers, requirement), three_offers, Mechanism.VCG)

    assert settled.payments == pytest.approx(vcg_payments(three_offers, requirement).payments)


def test_unmet_demand_sets_ceiling(prices, window):
    requirement = ServiceRequirement(demand=5.0, ceiling=50.0, window=window)
    book = book_of(prices, {"a": [(5, 1.0)], "b": [(8, 2.0)]})
    result = clear(book, requirement)

    assert result.unmet == pytest.approx(2.0)
    assert result.price == 50.0
    assert result.cost == pytest.approx(5 + 16 + 2 * 50)


def test_offer_at_ceiling_preferred_over_unmet(prices, window):
    requirement = ServiceRequirement(demand=2.0, ceiling=50.0, window=window)
    result = clear(book_of(prices, {"a": [(50, 3.0)]}), requirement)

    assert result.unmet == 0
    assert result.accepted_of("a").sum() == pytest.approx(2.0)
    assert result.price == 50.0


def test_offers_above_ceiling_ignored(prices, requirement):
    book = book_of(prices, {"a": [(60, 3.0)], "b": [(7, 1.0)]})
    result = clear(book, requirement)

    assert result.accepted_of("a").sum() == 0
    assert result.unmet == pytest.approx(1.5)


def test_zero_demand(prices, window):
    requirement = ServiceRequirement(demand=0.0, ceiling=50.0, window=window)
    result = clear(book_of(prices, {"a": [(5, 1.0)], "b": [(8, 2.0)]}), requirement)

    assert result.accepted_total == 0
    assert result.price == 5.0


def test_equal_prices_share_pro_rata(prices, window):
    requirement = ServiceRequirement(demand=2.0, ceiling=50.0, window=window)
    result = clear(book_of(prices, {"a": [(8, 1.0)], "b": [(8, 3.0)]}), requirement)

    assert result.accepted_of("a").sum() == pytest.approx(0.5)
    assert result.accepted_of("b").sum() == pytest.approx(1.5)


def test_demand_met_schedule(three_offers, requirement):
    schedule = demand_met_schedule(clear(three_offers, requirement), three_offers)

    assert schedule.met[4] == pytest.approx(1.0)
    assert schedule.met[7] == pytest.approx(2.5)
    assert schedule.marginal_level() == 7
    assert schedule.before(7) == pytest.approx((1.0, 7.0))
    assert schedule.before(0) == (0.0, 50.0)


def test_demand_met_nothing_accepted(prices, window):
    requirement = ServiceRequirement(demand=0.0, ceiling=50.0, window=window)
    book = book_of(prices, {"a": [(5, 1.0)]})
    schedule = demand_met_schedule(clear(book, requirement), book)

    assert schedule.marginal_level() is None


def _profit(book, requirement, agent, true_price):
    settlement = vcg_payments(book, requirement)
    accepted = settlement.accepted_of(agent).sum()
    return settlement.payment_of(agent) - accepted * true_price


def test_vcg_truthful_offers_are_best(prices, requirement):
    truth = {"a": (5.0, 1.0), "b": (8.0, 2.0)}
    for agent, (true_price, true_capacity) in truth.items():
        other = next(name for name in truth if name != agent)
        truthful = _profit(
            book_of(prices, {agent: [truth[agent]], other: [truth[other]]}),
            requirement,
            agent,
            true_price,
        )
        for offered_price in range(1, 21):
            for capacity in (0.25, 0.5, 0.75, true_capacity):
                deviation = book_of(
                    prices, {agent: [(offered_price, capacity)], other: [truth[other]]}
                )
                assert _profit(deviation, requirement, agent, true_price) <= truthful + 1e-7


def _merit_order(book: OfferBook, requirement: ServiceRequirement):
    """Sort-and-fill reference clearing: accepted per offer, and the clearing price"""
    valid = book.valid(requirement.ceiling)
    accepted = np.zeros_like(book.capacities)
    remaining = requirement.demand
    price = None
    for level in np.unique(book.prices[valid]):
        at_level = valid & (book.prices == level)
        offered = book.capacities[at_level].sum()
        taken = min(remaining, offered)
        if taken > 0:
            accepted[at_level] = book.capacities[at_level] * taken / offered
            price = level
        remaining -= taken
    if remaining > 1e-12:
        price = requirement.ceiling
    return accepted, price


def _random_book(rng, window):
    """Up to 10 agents offering on up to 50 integer price levels"""
    count = int(rng.integers(1, 11))
    levels = int(rng.integers(1, 51))
    grid = PriceGrid.integer(levels)
    agents = [f"agent-{i}" for i in range(count)]
    offered = rng.random((count, levels)) < 0.3
    capacities = np.where(offered, rng.random((count, levels)) * 2, 0.0)
    offer_prices = rng.integers(1, levels + 1, size=(count, levels)).astype(float)
    book = OfferBook(grid, agents, capacities, offer_prices)
    ceiling = float(rng.integers(1, levels + 1))
    requirement = ServiceRequirement(
        demand=float(rng.uniform(0.5, 8)), ceiling=ceiling, window=window
    )
    return book, requirement


def _check_merit_order(seed, window):
    book, requirement = _random_book(np.random.default_rng(seed), window)

    result = clear(book, requirement)
    expected, price = _merit_order(book, requirement)

    assert result.accepted == pytest.approx(expected, abs=1e-9)
    assert result.price == price


@pytest.mark.parametrize("seed", range(20))
def test_clear_matches_merit_order(seed, window):
    _check_merit_order(seed, window)


@pytest.mark.slow
def test_clear_matches_merit_order_on_many_books(window):
    for seed in range(1000):
        _check_merit_order(seed, window)


@pytest.mark.parametrize("seed", range(20))
def test_clearing_duals_complementary(seed, window):
    book, requirement = _random_book(np.random.default_rng(seed), window)
    valid = book.valid(requirement.ceiling)
    levels, inverse = np.unique(book.prices[valid], return_inverse=True)
    quantities = np.bincount(inverse, weights=book.capacities[valid], minlength=len(levels))
    lp = _clearing_program(levels, quantities, requirement)

    solution = solve_lp(lp)
    dual = solution.duals[BALANCE]

    bounds = [(f"q[{k}]", float(q)) for k, q in enumerate(quantities)]
    bounds.append((UNMET, requirement.demand))
    for name, upper in bounds:
        reduced = lp.cost_of(name) - dual
        value = solution[name]
        if value > 1e-9:
            assert reduced <= 1e-7
        if value < upper - 1e-9:
            assert reduced >= -1e-7

@pytest.mark.parametrize(
    "tag, mechanism",
    [
        ("pab", Mechanism.PAB),
        ("PAC", Mechanism.PAC),
        (" dra ", Mechanism.DRA),
        ("vcg", Mechanism.VCG),
    ],
)
def test_mechanism_parse(tag, mechanism):
    assert Mechanism.parse(tag) is mechanism


def test_mechanism_parse_unknown():
    with pytest.raises(ParseError):
        Mechanism.parse("auction")


def test_mechanism_kinds():
    assert [m for m in Mechanism if m.is_uniform] == [Mechanism.PAC]
    assert [m for m in Mechanism if m.is_discriminatory] == [Mechanism.PAB, Mechanism.DRA]


@pytest.mark.parametrize(
    "agents, capacities, offer_prices",
    [
        (["a", "a"], [[1.0], [1.0]], [[1.0], [1.0]]),
        (["a"], [[-1.0]], [[1.0]]),
        (["a"], [[1.0]], [[float("nan")]]),
    ],
)
def test_invalid_offer_book(agents, capacities, offer_prices):
    grid = PriceGrid(levels=(1.0,), ceiling=50.0)
    with pytest.raises(ConfigurationError):
        OfferBook(grid, agents, capacities, offer_prices)


def test_settle_rejects_other_book(three_offers, requirement, prices):
    result = clear(three_offers, requirement)
    with pytest.raises(ConfigurationError):
        settle(result, book_of(prices, {"x": [(5, 1.0)]}), Mechanism.PAC)


def test_requirement_validation(window):
    with pytest.raises(ConfigurationError):
        ServiceRequirement(demand=-1.0, ceiling=50.0, window=window)
    with pytest.raises(ConfigurationError):
        ServiceRequirement(demand=1.0, ceiling=0.0, window=window)


def test_reinforcement_cost(requirement):
    assert requirement.reinforcement_cost == pytest.approx(250.0)


def test_records_are_json_ready(three_offers, requirement):
    result = clear(three_offers, requirement)
    settlement = settle(result, three_offers, Mechanism.PAB)
    records = json.loads(json.dumps([result.to_record(), settlement.to_record()]))

    assert records[0]["price"] == 8.0
    assert sum(records[0]["accepted"]["b"]) == pytest.approx(1.5)
    assert records[1]["mechanism"] == "pab"
    assert records[1]["agents"]["a"]["rate"] == pytest.approx(5.0)
    assert records[1]["dso_payment"] == pytest.approx((5 + 8 * 1.5) * 2)
