"""Industrial and commercial demand response with load recovery.

The opportunity cost of curtailing ``P`` MW for the whole window is
``a·P² + b·P`` (£ per event).  A share `energy_recovery` of the curtailed
energy is consumed again during the recovery window, never faster than
`power_recovery` times the curtailed power.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

from .asset import FLEX, AssetModel, FlexibilityResult
from .errors import ConfigurationError, ModelInfeasibleError
from .lp import LinearProgram, Relation, Sense, Solution
from .offer_curve import AssetClass
from .piecewise import PiecewiseSpec, add_quadratic_epigraph
from .timegrid import Profile, TimeGrid, Window

# Table-level defaults: the quadratic coefficient is quoted relative to capacity
DEFAULT_QUADRATIC_PER_CAPACITY = 17.65
DEFAULT_LINEAR_COST = 23.52


@dataclass(frozen=True)
class IcScenario:
    capacity: float  # MW
    quadratic_cost: float  # £/MW²
    linear_cost: float  # £/MW
    recovery: Window
    tariff: Profile
    grid: TimeGrid = field(default_factory=TimeGrid)
    energy_recovery: float = 1.0
    power_recovery: float = 0.5

    def __post_init__(self):
        if self.capacity < 0:
            raise ConfigurationError("industrial.capacity must be nonnegative")
        if self.quadratic_cost < 0 or self.linear_cost < 0:
            raise ConfigurationError("industrial cost coefficients must be nonnegative")
        if not 0 <= self.energy_recovery <= 1.5:
            raise ConfigurationError(
                f"industrial.energy_recovery {self.energy_recovery} outside [0, 1.5]"
            )
        if self.power_recovery < 0:
            raise ConfigurationError("industrial.power_recovery must be nonnegative")
        if self.recovery.end_index >= self.grid.count:
            raise ConfigurationError("industrial.recovery window outside the time grid")
        self.tariff.check_aligned(self.grid, name="industrial.tariff")

    @staticmethod
    def quadratic_for(
        capacity: float, per_capacity: float = DEFAULT_QUADRATIC_PER_CAPACITY
    ) -> float:
        """Quadratic coefficient ``per_capacity / P̄`` (zero for zero capacity)"""
        return per_capacity / capacity if capacity > 0 else 0.0


class IndustrialModel(AssetModel):
    asset = AssetClass.INDUSTRIAL
    scenario: IcScenario

    def installed_capability(self) -> float:
        return self.scenario.capacity

    def check_feasible(self) -> None:
        s = self.scenario
        if s.recovery.overlaps(self.window) or s.recovery.start_index <= self.window.end_index:
            raise ModelInfeasibleError(
                "recovery window must follow the flexibility window", asset=self.name
            )
        recoverable = s.power_recovery * s.recovery.duration_hours
        required = s.energy_recovery * self.window.duration_hours
        if recoverable < required - 1e-9:
            raise ModelInfeasibleError(
                f"recovery window too short: {recoverable:.4g} MWh per MW curtailed "
                f"can be recovered, {required:.4g} MWh required",
                asset=self.name,
            )

    def build(self) -> LinearProgram:
        s = self.scenario
        dt = self.grid.step_hours
        duration = self.window.duration_hours

        lp = LinearProgram(name=self.name, sense=Sense.MAXIMIZE)
        flex = lp.add_variable(FLEX, 0.0, s.capacity)
        lp.add_objective({flex: -s.linear_cost})

        if s.quadratic_cost > 0 and s.capacity > 0:
            cost = add_quadratic_epigraph(
                lp, "curtailed", s.quadratic_cost, self.spec.over(0.0, s.capacity)
            )
            lp.add_objective(cost.cost_terms(-1.0))
            lp.add_constraint(
                "curtailed", {flex: 1.0, **cost.argument_terms(-1.0)}, Relation.EQ, 0.0
            )

        recovered = {flex: -s.energy_recovery * duration}
        for t in s.recovery.indices:
            load = lp.add_variable(f"rec[{t}]", 0.0, math.inf, cost=-s.tariff[t] * dt)
            recovered[load] = dt
            lp.add_constraint(
                f"recovery_rate[{t}]", {load: 1.0, flex: -s.power_recovery}, Relation.LE, 0.0
            )
        lp.add_constraint("recovery", recovered, Relation.EQ, 0.0)
        return lp

    def extract(self, price: float, solution: Solution) -> FlexibilityResult:
        s = self.scenario
        recovery = tuple(solution[f"rec[{t}]"] for t in s.recovery.indices)
        flex = max(0.0, solution[FLEX])
        return FlexibilityResult(
            asset=self.asset,
            price=price,
            flexible_capacity=flex,
            objective=solution.objective,
            schedule={"recovery": recovery},
            details={
                "recovered_energy": math.fsum(recovery) * self.grid.step_hours,
                "event_cost": s.quadratic_cost * flex**2 + s.linear_cost * flex,
            },
        )


def ic_flexibility(
    scenario: IcScenario,
    price: float,
    window: Window,
    spec: Optional[PiecewiseSpec] = None,
) -> FlexibilityResult:
    result, _ = IndustrialModel(scenario, window, spec).solve(price)
    return result
