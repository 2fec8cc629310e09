import logging
from typing import Dict, Sequence, Tuple

import numpy as np
import pytest

from flexmarket.flexibility import CurveSet
from flexmarket.market import OfferBook, ServiceRequirement
from flexmarket.offer_curve import AssetClass, OfferCurve, PriceGrid
from flexmarket.timegrid import TimeGrid, Window


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="run the case-study tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def package_logs_reach_caplog(monkeypatch):
    # click_log detaches the package logger from the root logger caplog listens on
    monkeypatch.setattr(logging.getLogger("flexmarket"), "propagate", True)


@pytest.fixture()
def grid():
    return TimeGrid()


@pytest.fixture()
def window(grid):
    return grid.window("16:30", "18:30")


@pytest.fixture()
def requirement(window):
    return ServiceRequirement(demand=2.5, ceiling=50.0, window=window)


@pytest.fixture()
def prices():
    return PriceGrid.integer(50)


def book_of(grid: PriceGrid, offers: Dict[str, Sequence[Tuple[float, float]]]) -> OfferBook:
    """Offer book from ``{agent: [(price, capacity), ...]}``, one offer per column"""
    agents = list(offers)
    capacities = np.zeros((len(agents), len(grid)))
    offer_prices = np.tile(grid.array, (len(agents), 1))
    for a, agent in enumerate(agents):
        for column, (price, capacity) in enumerate(offers[agent]):
            offer_prices[a, column] = price
            capacities[a, column] = capacity
    return OfferBook(grid, agents, capacities, offer_prices)


def step_curve(grid: PriceGrid, steps: Dict[float, float]) -> OfferCurve:
    """Offer curve adding ``steps[price]`` MW at each listed price"""
    capacities = np.zeros(len(grid))
    for price, capacity in steps.items():
        capacities[grid.array >= price] += capacity
    return OfferCurve.of(grid, capacities)


@pytest.fixture()
def small_curves():
    """HP 1 MW from 2, EV 1 MW from 4, no storage, I&C 1 MW from 6; 2 MW demanded"""
    levels = PriceGrid.integer(10)
    requirement = ServiceRequirement(
        demand=2.0, ceiling=10.0, window=Window(start_index=33, end_index=36, step_hours=0.5)
    )
    return CurveSet(
        scenario="small",
        requirement=requirement,
        curves={
            AssetClass.HEAT_PUMP: step_curve(levels, {2: 1.0}),
            AssetClass.EV_CHARGING: step_curve(levels, {4: 1.0}),
            AssetClass.STORAGE: OfferCurve.zero(levels),
            AssetClass.INDUSTRIAL: step_curve(levels, {6: 1.0}),
        },
    )
