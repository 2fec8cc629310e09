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

"""DSO flexibility market: clearing, settlement and the demand-met schedule.

Offers are capacity/price pairs per agent and price level.  Clearing
minimizes the cost of the accepted capacity plus unmet demand valued at the
ceiling price; the marginal clearing price λ is the shadow price of the
demand balance.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ParseError, SolverError
from .logging import get_logger
from .lp import LinearProgram, Relation, Sense
from .offer_curve import PriceGrid
from .simplex import solve_lp
from .timegrid import Window

logger = get_logger(__name__)

BALANCE = "balance"
UNMET = "unmet"
CAPACITY_TOLERANCE = 1e-9


class Mechanism(Enum):
    PAB = "pab"
    PAC = "pac"
    DRA = "dra"
    VCG = "vcg"

    @property
    def is_uniform(self) -> bool:
        return self is Mechanism.PAC

    @property
    def is_discriminatory(self) -> bool:
        return self in (Mechanism.PAB, Mechanism.DRA)

    @staticmethod
    def parse(tag: str) -> "Mechanism":
        try:
            return Mechanism(tag.strip().lower())
        except ValueError as e:
            choices = ", ".join(m.value for m in Mechanism)
            raise ParseError(f"expected one of {choices}", text=tag, what="mechanism") from e


@dataclass(frozen=True)
class ServiceRequirement:
    demand: float  # MW
    ceiling: float  # £/MW/h
    window: Window

    def __post_init__(self):
        if not self.demand >= 0:
            raise ConfigurationError(f"Flexibility demand must be nonnegative, got {self.demand}")
        if not self.ceiling > 0:
            raise ConfigurationError(f"Ceiling price must be positive, got {self.ceiling}")

    @property
    def duration_hours(self) -> float:
        return self.window.duration_hours

    @property
    def reinforcement_cost(self) -> float:
        """Daily cost (£) of buying the whole demand at the ceiling price"""
        return self.ceiling * self.demand * self.duration_hours


class OfferBook:
    """Offers of all agents on a common price grid.

    ``capacities[a, g]`` is the capacity agent `a` offers at its price
    ``prices[a, g]``; column `g` corresponds to level `g` of `grid`.
    """

    def __init__(
        self,
        grid: PriceGrid,
        agents: Sequence[str],
        capacities: Sequence[Sequence[float]],
        prices: Sequence[Sequence[float]],
    ):
        self.grid = grid
        self.agents: Tuple[str, ...] = tuple(agents)
        shape = (len(self.agents), len(grid))
        self.capacities = np.array(capacities, dtype=float).reshape(shape)
        self.prices = np.array(prices, dtype=float).reshape(shape)
        self.capacities.flags.writeable = False
        self.prices.flags.writeable = False

        if len(set(self.agents)) != len(self.agents):
            raise ConfigurationError("Agent names in an offer book must be unique")
        if np.any(self.capacities < 0) or not np.all(np.isfinite(self.capacities)):
            raise ConfigurationError("Offered capacities must be finite and nonnegative")
        if not np.all(np.isfinite(self.prices)):
            raise ConfigurationError("Offer prices must be finite")

    @staticmethod
    def empty(grid: PriceGrid) -> "OfferBook":
        return OfferBook(grid, (), np.zeros((0, len(grid))), np.zeros((0, len(grid))))

    def __len__(self) -> int:
        return len(self.agents)

    def index(self, agent: str) -> int:
        try:
            return self.agents.index(agent)
        except ValueError as e:
            raise ConfigurationError(f"Unknown agent {agent!r}") from e

    def valid(self, ceiling: float) -> np.ndarray:
        """Mask of offers that can be accepted: positive capacity, price within (0, ceiling]"""
        return (self.capacities > 0) & (self.prices > 0) & (self.prices <= ceiling)

    def without(self, agent: str) -> "OfferBook":
        keep = [i for i, name in enumerate(self.agents) if name != agent]
        return OfferBook(
            self.grid,
            [self.agents[i] for i in keep],
            self.capacities[keep],
            self.prices[keep],
        )


@dataclass(frozen=True)
class ClearingResult:
    requirement: ServiceRequirement
    agents: Tuple[str, ...]
    accepted: np.ndarray  # MW per agent and level
    price: float  # λ, £/MW/h
    unmet: float  # MW
    cost: float  # £/h including unmet demand at the ceiling

    def accepted_of(self, agent: str) -> np.ndarray:
        return self.accepted[self.agents.index(agent)]

    @property
    def accepted_total(self) -> float:
        return math.fsum(self.accepted.ravel())

    def to_record(self) -> Dict[str, Any]:
        return {
            "demand": self.requirement.demand,
            "ceiling": self.requirement.ceiling,
            "price": self.price,
            "unmet": self.unmet,
            "cost": self.cost,
            "accepted": {
                agent: [float(v) for v in row] for agent, row in zip(self.agents, self.accepted)
            },
        }


@dataclass(frozen=True)
class Settlement:
    mechanism: Mechanism
    duration_hours: float
    agents: Tuple[str, ...]
    accepted: np.ndarray  # MW per agent and level
    payments: Tuple[float, ...]  # £/h per agent

    @property
    def paid_capacity(self) -> Tuple[float, ...]:
        return tuple(math.fsum(row) for row in self.accepted)

    @property
    def rates(self) -> Tuple[float, ...]:
        """Average payment rate (£/MW/h) of each agent's accepted capacity"""
        return tuple(
            payment / capacity if capacity > CAPACITY_TOLERANCE else 0.0
            for payment, capacity in zip(self.payments, self.paid_capacity)
        )

    @property
    def revenues(self) -> Tuple[float, ...]:
        """Revenue (£ per day) of each agent"""
        return tuple(p * self.duration_hours for p in self.payments)

    @property
    def dso_payment(self) -> float:
        return math.fsum(self.revenues)

    def payment_of(self, agent: str) -> float:
        return self.payments[self.agents.index(agent)]

    def accepted_of(self, agent: str) -> np.ndarray:
        return self.accepted[self.agents.index(agent)]

    def to_record(self) -> Dict[str, Any]:
        return {
            "mechanism": self.mechanism.value,
            "dso_payment": self.dso_payment,
            "agents": {
                agent: {"capacity": capacity, "rate": rate, "revenue": revenue}
                for agent, capacity, rate, revenue in zip(
                    self.agents, self.paid_capacity, self.rates, self.revenues
                )
            },
        }


def _clearing_program(
    prices: np.ndarray, quantities: np.ndarray, requirement: ServiceRequirement
) -> LinearProgram:
    lp = LinearProgram(name="market", sense=Sense.MINIMIZE)
    balance = {}
    for k, (price, quantity) in enumerate(zip(prices, quantities)):
        balance[lp.add_variable(f"q[{k}]", 0.0, float(quantity), cost=float(price))] = 1.0
    balance[lp.add_variable(UNMET, 0.0, requirement.demand, cost=requirement.ceiling)] = 1.0
    lp.add_constraint(BALANCE, balance, Relation.EQ, requirement.demand)
    return lp


def _check_dual(dual: float, prices: np.ndarray, taken: np.ndarray, quantities, ceiling) -> None:
    """The balance dual must lie between the last accepted and the next free price"""
    accepted = prices[taken > CAPACITY_TOLERANCE]
    free = prices[taken < quantities - CAPACITY_TOLERANCE]
    low = accepted.max() if accepted.size else -math.inf
    high = min(free.min() if free.size else math.inf, ceiling)
    tolerance = 1e-6 * max(1.0, ceiling)
    if not low - tolerance <= dual <= high + tolerance:
        logger.warning(
            f"Market dual {dual:.6g} outside its supporting interval [{low:.6g}, {high:.6g}]"
        )


def clear(book: OfferBook, requirement: ServiceRequirement) -> ClearingResult:
    """Accept the cheapest offers until the demand is met.

    Equal-price offers share acceptance pro rata to their capacity.  The
    reported price is the price of the most expensive accepted offer, the
    ceiling if demand remains unmet, and the cheapest valid offer price (or
    the ceiling) when nothing is demanded.
    """
    demand, ceiling = requirement.demand, requirement.ceiling
    valid = book.valid(ceiling)
    shape = book.capacities.shape
    offer_prices = book.prices[valid]
    offer_capacities = book.capacities[valid]

    levels, inverse = np.unique(offer_prices, return_inverse=True)
    quantities = np.bincount(inverse, weights=offer_capacities, minlength=len(levels))

    lp = _clearing_program(levels, quantities, requirement)
    solution = solve_lp(lp)
    if not solution.is_optimal:
        raise SolverError(f"market clearing ended {solution.status.value}")

    taken = np.clip([solution[f"q[{k}]"] for k in range(len(levels))], 0.0, quantities)
    unmet = max(0.0, demand - math.fsum(taken))
    # the demand-side slack and offers exactly at the ceiling cost the same; prefer offers
    at_ceiling = np.flatnonzero(levels >= ceiling)
    for k in at_ceiling:
        shift = min(unmet, quantities[k] - taken[k])
        taken[k] += shift
        unmet -= shift
    if unmet <= CAPACITY_TOLERANCE:
        unmet = 0.0

    if levels.size:
        _check_dual(solution.duals[BALANCE], levels, taken, quantities, ceiling)

    accepted = np.zeros(shape)
    if levels.size:
        share = np.divide(taken, quantities, out=np.zeros_like(taken), where=quantities > 0)
        accepted[valid] = offer_capacities * share[inverse]

    if unmet > 0:
        price = ceiling
    elif np.any(taken > CAPACITY_TOLERANCE):
        price = float(levels[taken > CAPACITY_TOLERANCE].max())
    else:
        price = float(levels[0]) if levels.size else ceiling

    cost = math.fsum((accepted * np.where(valid, book.prices, 0.0)).ravel()) + unmet * ceiling
    result = ClearingResult(
        requirement=requirement,
        agents=book.agents,
        accepted=accepted,
        price=price,
        unmet=unmet,
        cost=cost,
    )
    logger.debug(
        f"Cleared {len(book)} agents: price {price:g}, accepted "
        f"{result.accepted_total:.6g} MW, unmet {unmet:.6g} MW"
    )
    return result


def _accepted_cost(result: ClearingResult, book: OfferBook, index: int) -> float:
    return math.fsum(result.accepted[index] * book.prices[index])


def vcg_payments(book: OfferBook, requirement: ServiceRequirement) -> Settlement:
    """Clarke pivot payments.

    Each accepted agent is paid the clearing cost of the market without it,
    minus what the others cost in the actual clearing.
    """
    result = clear(book, requirement)
    return _vcg_settlement(result, book)


def _vcg_settlement(result: ClearingResult, book: OfferBook) -> Settlement:
    requirement = result.requirement
    payments: List[float] = []
    for index, agent in enumerate(book.agents):
        if math.fsum(result.accepted[index]) <= CAPACITY_TOLERANCE:
            payments.append(0.0)
            continue
        without = clear(book.without(agent), requirement)
        others = result.cost - _accepted_cost(result, book, index)
        payments.append(without.cost - others)
    return Settlement(
        mechanism=Mechanism.VCG,
        duration_hours=requirement.duration_hours,
        agents=book.agents,
        accepted=result.accepted,
        payments=tuple(payments),
    )


def settle(result: ClearingResult, book: OfferBook, mechanism: Mechanism) -> Settlement:
    if not isinstance(mechanism, Mechanism):
        raise ConfigurationError(f"Unknown market mechanism {mechanism!r}")
    if result.agents != book.agents:
        raise ConfigurationError("Clearing result and offer book list different agents")

    if mechanism is Mechanism.VCG:
        return _vcg_settlement(result, book)

    if mechanism.is_uniform:
        payments = [result.price * math.fsum(row) for row in result.accepted]
    else:
        payments = [
            math.fsum(row * prices) for row, prices in zip(result.accepted, book.prices)
        ]
    return Settlement(
        mechanism=mechanism,
        duration_hours=result.requirement.duration_hours,
        agents=book.agents,
        accepted=result.accepted,
        payments=tuple(payments),
    )


@dataclass(frozen=True)
class DemandMet:
    """Cumulative accepted capacity at or below each price level"""

    prices: Tuple[float, ...]
    met: Tuple[float, ...]
    ceiling: float

    def before(self, level: int) -> Tuple[float, float]:
        """``(P^DM, π^DM)`` of the level below `level`; the ceiling below the first one"""
        if level <= 0:
            return 0.0, self.ceiling
        return self.met[level - 1], self.prices[level - 1]

    def marginal_level(self) -> Optional[int]:
        """First level whose cumulative acceptance reaches the total, None if nothing is accepted"""
        if not self.met or self.met[-1] <= CAPACITY_TOLERANCE:
            return None
        total = self.met[-1]
        for g, met in enumerate(self.met):
            if met >= total - CAPACITY_TOLERANCE:
                return g
        return len(self.met) - 1  # pragma: no cover


def demand_met_schedule(result: ClearingResult, book: OfferBook) -> DemandMet:
    levels = book.grid.array
    accepted = result.accepted.ravel()
    prices = book.prices.ravel()
    met = [math.fsum(accepted[prices <= level + 1e-9]) for level in levels]
    return DemandMet(
        prices=tuple(float(p) for p in levels),
        met=tuple(met),
        ceiling=result.requirement.ceiling,
    )
