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

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ParseError
from .logging import get_logger

logger = get_logger(__name__)

MONOTONE_TOLERANCE = 1e-9


class AssetClass(Enum):
    HEAT_PUMP = "heat_pump"
    EV_CHARGING = "ev_charging"
    STORAGE = "storage"
    INDUSTRIAL = "industrial"


class ProviderType(Enum):
    """Kind of agent owning a portfolio; domestic agents hold heat pumps and EVs"""

    DOMESTIC = "domestic"
    STORAGE = "storage"
    INDUSTRIAL = "industrial"

    @property
    def asset_classes(self) -> Tuple[AssetClass, ...]:
        return _PROVIDER_ASSETS[self]

    @staticmethod
    def of(asset: AssetClass) -> "ProviderType":
        for provider, assets in _PROVIDER_ASSETS.items():
            if asset in assets:
                return provider
        raise AssertionError(f"Asset class {asset} has no provider type")  # pragma: no cover


_PROVIDER_ASSETS = {
    ProviderType.DOMESTIC: (AssetClass.HEAT_PUMP, AssetClass.EV_CHARGING),
    ProviderType.STORAGE: (AssetClass.STORAGE,),
    ProviderType.INDUSTRIAL: (AssetClass.INDUSTRIAL,),
}


@dataclass(frozen=True)
class PriceGrid:
    """Availability fees (£/MW/h) at which offer curves are evaluated"""

    levels: Tuple[float, ...]
    ceiling: float

    def __post_init__(self):
        if len(self.levels) == 0:
            raise ConfigurationError("A price grid needs at least one level")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigurationError("Price levels must be strictly increasing")
        if self.levels[0] < 1 or self.levels[-1] > self.ceiling:
            raise ConfigurationError(
                f"Price levels must lie within [1, {self.ceiling}], "
                f"got [{self.levels[0]}, {self.levels[-1]}]"
            )

    @staticmethod
    def integer(ceiling: float) -> "PriceGrid":
        top = int(math.floor(ceiling))
        return PriceGrid(levels=tuple(float(p) for p in range(1, top + 1)), ceiling=ceiling)

    @staticmethod
    def parse(text: str, ceiling: Optional[float] = None) -> "PriceGrid":
        """Parse ``LO..HI`` or ``LO..HI:STEP``; the ceiling defaults to ``HI``"""
        range_part, _, step_part = text.partition(":")
        low_text, sep, high_text = range_part.partition("..")
        if not sep:
            raise ParseError("expected LO..HI[:STEP]", text=text, what="price grid")
        try:
            low, high = float(low_text), float(high_text)
            step = float(step_part) if step_part else 1.0
        except ValueError as e:
            raise ParseError("bounds and step must be numbers", text=text, what="price grid") from e

        if step <= 0 or high < low:
            raise ParseError("expected LO <= HI and STEP > 0", text=text, what="price grid")
        count = (high - low) / step
        if abs(count - round(count)) > 1e-9:
            raise ParseError("range is not a whole number of steps", text=text, what="price grid")

        levels = tuple(round(low + k * step, 9) for k in range(int(round(count)) + 1))
        try:
            return PriceGrid(levels=levels, ceiling=high if ceiling is None else ceiling)
        except ConfigurationError as e:
            raise ParseError(str(e), text=text, what="price grid") from e

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float)

    def index_at_or_below(self, price: float) -> int:
        """Index of the highest level not above `price`, or -1"""
        return int(np.searchsorted(self.array, price + 1e-9, side="right")) - 1

    def __str__(self):
        return f"{self.levels[0]:g}..{self.levels[-1]:g} (ceiling {self.ceiling:g})"


@dataclass(frozen=True)
class OfferCurve:
    """Flexible capacity (MW) available at each level of a price grid"""

    grid: PriceGrid
    capacities: Tuple[float, ...]

    def __post_init__(self):
        if len(self.capacities) != len(self.grid):
            raise ConfigurationError(
                f"Offer curve has {len(self.capacities)} capacities "
                f"for {len(self.grid)} price levels"
            )
        if any(c < 0 for c in self.capacities):
            raise ConfigurationError("Offer curve capacities must be nonnegative")
        if any(b < a - MONOTONE_TOLERANCE for a, b in zip(self.capacities, self.capacities[1:])):
            raise ConfigurationError("Offer curve capacities must be nondecreasing in price")

    @staticmethod
    def zero(grid: PriceGrid) -> "OfferCurve":
        return OfferCurve(grid=grid, capacities=(0.0,) * len(grid))

    @staticmethod
    def of(grid: PriceGrid, capacities: Iterable[float]) -> "OfferCurve":
        return OfferCurve(grid=grid, capacities=tuple(float(c) for c in capacities))

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.grid.levels, self.capacities))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.capacities, dtype=float)

    @property
    def max_capacity(self) -> float:
        return self.capacities[-1]

    def capacity_at(self, price: float) -> float:
        index = self.grid.index_at_or_below(price)
        return 0.0 if index < 0 else self.capacities[index]

    def scaled(self, share: float) -> "OfferCurve":
        if share < 0:
            raise ConfigurationError(f"Capacity share must be nonnegative, got {share}")
        return OfferCurve.of(self.grid, (share * c for c in self.capacities))

    def increments(self) -> np.ndarray:
        """Capacity added at each level: the truthful offer quantity per price"""
        increments = np.diff(self.array, prepend=0.0)
        return np.clip(increments, 0.0, None)


def aggregate_curves(
    curves: Sequence[OfferCurve], grid: Optional[PriceGrid] = None
) -> OfferCurve:
    """Pointwise sum of offer curves sharing one price grid.

    An empty list sums to the zero curve on `grid` (1..50 £/MW/h if omitted).
    """
    if grid is None:
        grid = curves[0].grid if curves else PriceGrid.integer(50)

    for curve in curves:
        if curve.grid != grid:
            raise ConfigurationError(
                f"Cannot aggregate offer curves on different price grids: "
                f"{curve.grid} vs. {grid}"
            )

    if not curves:
        return OfferCurve.zero(grid)

    # math.fsum keeps the result independent of summation order
    totals = [math.fsum(values) for values in zip(*(c.capacities for c in curves))]
    return OfferCurve.of(grid, totals)


def true_equilibrium(aggregate: OfferCurve, demand: float, ceiling: float) -> float:
    """Smallest grid price at which the aggregate curve covers `demand`"""
    if demand < 0:
        raise ConfigurationError(f"Flexibility demand must be nonnegative, got {demand}")

    for price, capacity in aggregate.points:
        if capacity >= demand - MONOTONE_TOLERANCE:
            return price
    return ceiling
