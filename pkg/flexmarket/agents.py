# flexmarket
# Copyright (C) 2026 flexmarket contributors
#
# This file is part of flexmarket.
#
# flexmarket is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# flexmarket is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with flexmarket.  If not, see <http://www.gnu.org/licenses/>.

"""Flexibility providers and their bidding strategies.

Agents own shares of the asset-class offer curves and revise their offers
after every market round.  A strategy step is a pure function of the agent's
state and the published round outcome; it returns the agent's next state.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ParseError
from .market import ClearingResult, DemandMet, ServiceRequirement, Settlement
from .offer_curve import AssetClass, OfferCurve, ProviderType, aggregate_curves

INITIAL_PRICE_STEP = 1.0  # £/MW/h
INITIAL_CAPACITY_SHARE = 0.1
PRICE_TOLERANCE = 1e-9


class Strategy(Enum):
    OVERPRICING = "op"
    UNDERSTATEMENT = "us"
    UNDERBIDDING = "ub"
    TRUTHFUL = "truthful"

    @staticmethod
    def parse(tag: str) -> "Strategy":
        try:
            return Strategy(tag.strip().lower())
        except ValueError as e:
            choices = ", ".join(s.value for s in Strategy)
            raise ParseError(f"expected one of {choices}", text=tag, what="strategy") from e


@dataclass(frozen=True)
class Portfolio:
    agent: str
    provider: ProviderType
    shares: Tuple[Tuple[AssetClass, float], ...]
    curve: OfferCurve  # truthful supply curve of the whole portfolio

    def share_of(self, asset: AssetClass) -> float:
        return dict(self.shares).get(asset, 0.0)


def parse_agent_counts(text: str) -> Tuple[int, ...]:
    """Parse a comma-separated list of total agent counts, e.g. ``3,6,9,12``"""
    try:
        counts = tuple(int(item) for item in text.split(","))
    except ValueError as e:
        raise ParseError(
            "expected integers separated by commas", text=text, what="agent counts"
        ) from e
    if any(c < 1 for c in counts):
        raise ParseError("agent counts must be positive", text=text, what="agent counts")
    return counts


def harmonic_shares(count: int) -> Tuple[float, ...]:
    """Capacity shares of `count` agents of one type: the a-th agent gets ``1/(a·H_count)``"""
    if count < 1:
        raise ConfigurationError(f"Need at least one agent, got {count}")
    harmonic = math.fsum(1.0 / j for j in range(1, count + 1))
    return tuple(1.0 / (a * harmonic) for a in range(1, count + 1))


def split_agents(total: int, providers: Sequence[ProviderType]) -> Dict[ProviderType, int]:
    """Split `total` agents evenly over `providers`, the remainder going to the first ones"""
    if not providers:
        raise ConfigurationError("No provider types to distribute agents over")
    if total < len(providers):
        raise ConfigurationError(
            f"{total} agents cannot represent {len(providers)} provider types"
        )
    base, remainder = divmod(total, len(providers))
    return {p: base + (1 if i < remainder else 0) for i, p in enumerate(providers)}


def represented_providers(class_curves: Mapping[AssetClass, OfferCurve]) -> List[ProviderType]:
    """Provider types whose asset classes offer any capacity, in declaration order"""
    return [
        provider
        for provider in ProviderType
        if any(
            asset in class_curves and class_curves[asset].max_capacity > 0
            for asset in provider.asset_classes
        )
    ]


def distribute(
    agent_counts: Mapping[ProviderType, int],
    class_curves: Mapping[AssetClass, OfferCurve],
) -> List[Portfolio]:
    """Hand out the asset-class curves to agents with harmonic shares"""
    if not class_curves:
        raise ConfigurationError("No offer curves to distribute")
    grid = next(iter(class_curves.values())).grid

    portfolios: List[Portfolio] = []
    for provider in ProviderType:
        assets = [a for a in provider.asset_classes if a in class_curves]
        offered = any(class_curves[a].max_capacity > 0 for a in assets)
        count = agent_counts.get(provider, 0)
        if count == 0:
            if offered:
                raise ConfigurationError(
                    f"No {provider.value} agents for asset classes offering capacity"
                )
            continue

        for index, share in enumerate(harmonic_shares(count), start=1):
            curve = aggregate_curves([class_curves[a].scaled(share) for a in assets], grid)
            portfolios.append(
                Portfolio(
                    agent=f"{provider.value}-{index}",
                    provider=provider,
                    shares=tuple((a, share) for a in assets),
                    curve=curve,
                )
            )
    return portfolios


@dataclass(frozen=True)
class RoundOutcome:
    """What the market publishes after a round"""

    result: ClearingResult
    settlement: Settlement
    demand_met: DemandMet

    @property
    def requirement(self) -> ServiceRequirement:
        return self.result.requirement

    @property
    def price(self) -> float:
        return self.result.price


@dataclass(frozen=True)
class AgentState:
    agent: str
    provider: ProviderType
    strategy: Strategy
    true_capacities: Tuple[float, ...]
    true_prices: Tuple[float, ...]
    capacities: Tuple[float, ...]
    prices: Tuple[float, ...]
    offer_price: Optional[float] = None  # uniform price of the qualifying levels
    price_step: float = INITIAL_PRICE_STEP
    capacity_step: float = 0.0
    previous_profit: float = 0.0
    profits: Tuple[float, ...] = ()
    initialized: bool = False
    price_change: float = 0.0
    capacity_change: float = 0.0

    @property
    def true_capacity_array(self) -> np.ndarray:
        return np.asarray(self.true_capacities, dtype=float)

    @property
    def true_price_array(self) -> np.ndarray:
        return np.asarray(self.true_prices, dtype=float)

    @property
    def offered(self) -> np.ndarray:
        return np.asarray(self.true_capacities) > 0

    def with_offers(
        self,
        *,
        capacities: Optional[Iterable[float]] = None,
        prices: Optional[Iterable[float]] = None,
        **changes,
    ) -> "AgentState":
        """Next state with new offers; records the applied changes"""
        new_capacities = (
            self.capacities if capacities is None else tuple(float(c) for c in capacities)
        )
        new_prices = self.prices if prices is None else tuple(float(p) for p in prices)
        offered = self.offered
        price_change = float(
            np.max(np.abs(np.subtract(new_prices, self.prices))[offered], initial=0.0)
        )
        capacity_change = float(
            np.max(np.abs(np.subtract(new_capacities, self.capacities)), initial=0.0)
        )
        return replace(
            self,
            capacities=new_capacities,
            prices=new_prices,
            price_change=price_change,
            capacity_change=capacity_change,
            **changes,
        )


def initial_state(portfolio: Portfolio, strategy: Strategy, ceiling: float) -> AgentState:
    """Offers of the first round: the truthful curve, or the ceiling for underbidding"""
    capacities = tuple(float(c) for c in portfolio.curve.increments())
    true_prices = tuple(portfolio.curve.grid.levels)
    prices = true_prices
    offer_price = None
    if strategy is Strategy.UNDERBIDDING:
        prices = tuple(ceiling if p <= ceiling else p for p in true_prices)
        offer_price = ceiling
    return AgentState(
        agent=portfolio.agent,
        provider=portfolio.provider,
        strategy=strategy,
        true_capacities=capacities,
        true_prices=true_prices,
        capacities=capacities,
        prices=prices,
        offer_price=offer_price,
        initialized=strategy in (Strategy.UNDERBIDDING, Strategy.TRUTHFUL),
    )


def true_cost(state: AgentState, accepted: np.ndarray) -> float:
    """Cost rate (£/h) of `accepted` capacity at the agent's true prices"""
    return math.fsum(np.asarray(accepted) * state.true_price_array)


def profit(state: AgentState, settlement: Settlement) -> float:
    """Profit rate (£/h) of one round.

    The payment is λ per accepted MW under uniform pricing, the own offer
    price under discriminatory pricing and the pivot payment under VCG; the
    true cost of the accepted capacity is subtracted in every case.
    """
    accepted = settlement.accepted_of(state.agent)
    return settlement.payment_of(state.agent) - true_cost(state, accepted)


def _set_uniform_price(state: AgentState, price: float) -> Tuple[float, ...]:
    """Offer `price` on every level whose true price does not exceed it"""
    true_prices = state.true_price_array
    prices = np.asarray(state.prices, dtype=float).copy()
    qualifying = true_prices <= price + PRICE_TOLERANCE
    prices[qualifying] = price
    return tuple(prices)


def _cheapest_offered_price(state: AgentState) -> float:
    offered = state.true_price_array[state.offered]
    return float(offered.min()) if offered.size else state.true_prices[0]


def op_step(state: AgentState, outcome: RoundOutcome) -> AgentState:
    """Overpricing: move all qualifying offer prices by a step that follows profit"""
    ceiling = outcome.requirement.ceiling
    current = profit(state, outcome.settlement)
    profits = state.profits + (current,)

    if not state.initialized:
        price = min(outcome.price, ceiling)
        return state.with_offers(
            prices=_set_uniform_price(state, price),
            offer_price=price,
            price_step=INITIAL_PRICE_STEP,
            previous_profit=0.0,
            profits=profits,
            initialized=True,
        )

    step = state.price_step
    if current >= state.previous_profit:
        step = step if step >= 0 else abs(step) / 2
    else:
        step = -step if step >= 0 else step

    price = min(max(state.offer_price + step, _cheapest_offered_price(state)), ceiling)
    return state.with_offers(
        prices=_set_uniform_price(state, price),
        offer_price=price,
        price_step=step,
        previous_profit=current,
        profits=profits,
    )


def us_step(state: AgentState, outcome: RoundOutcome) -> AgentState:
    """Understatement: withhold capacity priced at λ while profit does not fall"""
    current = profit(state, outcome.settlement)
    profits = state.profits + (current,)
    at_price = np.abs(np.asarray(state.prices) - outcome.price) <= PRICE_TOLERANCE
    at_price &= state.offered

    step = state.capacity_step
    if not state.initialized:
        marginal = state.true_capacity_array[at_price]
        base = marginal.max() if marginal.size else state.true_capacity_array.max(initial=0.0)
        step = INITIAL_CAPACITY_SHARE * float(base)

    capacities = np.asarray(state.capacities, dtype=float).copy()
    if current >= state.previous_profit:
        capacities[at_price] = np.maximum(capacities[at_price] - step, 0.0)
    else:
        step = step / 2
        capacities[at_price] = np.minimum(
            capacities[at_price] + step, state.true_capacity_array[at_price]
        )

    return state.with_offers(
        capacities=capacities,
        capacity_step=step,
        previous_profit=current,
        profits=profits,
        initialized=True,
    )


def underbidding_profit(state: AgentState, outcome: RoundOutcome) -> Tuple[float, float]:
    """Expected profit of undercutting the marginal accepted level, and the undercut price.

    The residual demand left below the marginal level is taken at the price
    of the level below it, filled from the agent's cheapest qualifying offers:
    the sum over own levels g of ``min(P^D - P^DM, P^O_g) · (π^DM - π^True_g)``
    where P^DM grows by what the cheaper levels already took.
    """
    schedule = outcome.demand_met
    marginal = schedule.marginal_level()
    if marginal is None:
        met, price = 0.0, schedule.ceiling
    else:
        met, price = schedule.before(marginal)

    residual = max(0.0, outcome.requirement.demand - met)
    expected = 0.0
    for g in np.argsort(state.true_prices, kind="stable"):
        if residual <= 0:
            break
        true_price = state.true_prices[g]
        if true_price > price + PRICE_TOLERANCE:
            continue
        taken = min(residual, state.capacities[g])
        expected += taken * (price - true_price)
        residual -= taken
    return expected, price


def ub_step(state: AgentState, outcome: RoundOutcome) -> AgentState:
    """Underbidding: reprice just below the marginal accepted level when that pays more"""
    current = profit(state, outcome.settlement)
    profits = state.profits + (current,)
    expected, price = underbidding_profit(state, outcome)

    if expected > current:
        return state.with_offers(
            prices=_set_uniform_price(state, price),
            offer_price=price,
            previous_profit=current,
            profits=profits,
        )
    return state.with_offers(previous_profit=current, profits=profits)


def truthful_step(state: AgentState, outcome: RoundOutcome) -> AgentState:
    current = profit(state, outcome.settlement)
    return state.with_offers(previous_profit=current, profits=state.profits + (current,))


_STEPS = {
    Strategy.OVERPRICING: op_step,
    Strategy.UNDERSTATEMENT: us_step,
    Strategy.UNDERBIDDING: ub_step,
    Strategy.TRUTHFUL: truthful_step,
}


def step(state: AgentState, outcome: RoundOutcome) -> AgentState:
    return _STEPS[state.strategy](state, outcome)


def offer_book_rows(states: Sequence[AgentState]) -> Tuple[List[str], np.ndarray, np.ndarray]:
    agents = [s.agent for s in states]
    capacities = np.array([s.capacities for s in states], dtype=float)
    prices = np.array([s.prices for s in states], dtype=float)
    return agents, capacities, prices

