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

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .branch_bound import solve_milp
from .errors import ModelInfeasibleError, SolverError
from .logging import get_logger
from .lp import Basis, LinearProgram, Solution, SolveStatus
from .offer_curve import AssetClass
from .piecewise import PiecewiseSpec
from .simplex import solve_lp
from .timegrid import TimeGrid, Window

logger = get_logger(__name__)

FLEX = "flex"


@dataclass(frozen=True)
class FlexibilityResult:
    """Solution of one asset model at one availability fee"""

    asset: AssetClass
    price: float
    flexible_capacity: float
    objective: float
    schedule: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    details: Dict[str, float] = field(default_factory=dict)


class AssetModel(ABC):
    """Step-I optimization problem of one asset class.

    Subclasses build a maximization whose reward term is ``π · ΔT^FW · P^F``
    on the variable named `FLEX`; the fee is changed in place between solves
    so a price sweep can reuse the previous basis.
    """

    asset: AssetClass

    def __init__(self, scenario, window: Window, spec: Optional[PiecewiseSpec] = None):
        self.scenario = scenario
        self.grid: TimeGrid = scenario.grid
        self.window = window
        self.spec = spec if spec is not None else PiecewiseSpec()
        self._program: Optional[LinearProgram] = None
        self._flex_cost = 0.0

    @property
    def name(self) -> str:
        return self.asset.value

    @abstractmethod
    def build(self) -> LinearProgram:
        raise NotImplementedError

    @abstractmethod
    def installed_capability(self) -> float:
        """Upper bound (MW) on the flexibility this asset can ever offer"""
        raise NotImplementedError

    @abstractmethod
    def extract(self, price: float, solution: Solution) -> FlexibilityResult:
        raise NotImplementedError

    def check_feasible(self) -> None:
        """Raise ModelInfeasibleError for inputs no schedule can satisfy"""

    @property
    def program(self) -> LinearProgram:
        if self._program is None:
            self.check_feasible()
            self._program = self.build()
            # the fee reward adds to whatever cost the model puts on P^F
            self._flex_cost = self._program.cost_of(FLEX)
        return self._program

    def solve(
        self, price: float, warm_start: Optional[Basis] = None
    ) -> Tuple[FlexibilityResult, Solution]:
        lp = self.program
        lp.set_cost(FLEX, self._flex_cost + price * self.window.duration_hours)

        try:
            if lp.is_mixed_integer:
                solution = solve_milp(lp)
            else:
                solution = solve_lp(lp, warm_start=warm_start)
        except SolverError as e:
            raise SolverError(f"{self.name}: solve failed at fee {price:g}") from e

        if solution.status is SolveStatus.INFEASIBLE:
            raise ModelInfeasibleError(
                f"no feasible schedule at fee {price:g} £/MW/h", asset=self.name
            )
        if solution.status is SolveStatus.UNBOUNDED:
            raise SolverError(f"{self.name}: unbounded model at fee {price:g}")

        return self.extract(price, solution), solution
