"""Aggregated EV charging with a relaxed internal-resistance loss model.

Energy is counted from midnight: the fleet starts the day with nothing
charged and must have taken up its daily demand `daily_energy` by the end of
the horizon, which is the energy the vehicles use while driving.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .asset import FLEX, AssetModel, FlexibilityResult
from .errors import ConfigurationError, ModelInfeasibleError
from .lp import LinearProgram, Relation, Sense, Solution
from .offer_curve import AssetClass
from .piecewise import PiecewiseSpec, add_quadratic_epigraph
from .timegrid import Profile, TimeGrid, Window

DEFAULT_CHARGER_KW = 6.0
DEFAULT_DAILY_KWH = 4.8


@dataclass(frozen=True)
class EvScenario:
    n_ev: int
    charger_capacity: float  # MW, all chargers together
    plug_share: Profile
    daily_energy: float  # MWh, whole fleet
    uncontrolled_demand: Profile  # MW
    tariff: Profile
    departure_window: Window
    grid: TimeGrid = field(default_factory=TimeGrid)
    internal_resistance: float = 0.1  # Ohm
    open_circuit_voltage: float = 360.0  # V
    penalty: float = 1000.0  # £/MWh²/h

    def __post_init__(self):
        if self.n_ev < 0:
            raise ConfigurationError(f"Number of EVs must be nonnegative: {self.n_ev}")
        if self.charger_capacity < 0 or self.daily_energy < 0:
            raise ConfigurationError("Charger capacity and daily energy must be nonnegative")
        if self.internal_resistance < 0 or self.open_circuit_voltage <= 0:
            raise ConfigurationError("Invalid battery internal resistance or voltage")
        for name, profile in (
            ("plug_share", self.plug_share),
            ("uncontrolled_demand", self.uncontrolled_demand),
            ("tariff", self.tariff),
        ):
            profile.check_aligned(self.grid, name=f"ev_charging.{name}")
        if any(not 0.0 <= v <= 1.0 for v in self.plug_share.values):
            raise ConfigurationError("ev_charging.plug_share: values must lie within [0, 1]")
        for t, (share, demand) in enumerate(
            zip(self.plug_share.values, self.uncontrolled_demand.values)
        ):
            if demand < 0 or demand > share * self.charger_capacity + 1e-9:
                raise ConfigurationError(
                    f"ev_charging.uncontrolled_demand[{t}]: {demand} MW exceeds the "
                    f"capacity of plugged-in chargers"
                )
        if self.departure_window.end_index >= self.grid.count:
            raise ConfigurationError("ev_charging.departure_window outside the time grid")

    @property
    def loss_coefficient(self) -> float:
        """Battery loss (MW) per MW² of aggregate charging power"""
        if self.n_ev == 0:
            return 0.0
        return self.internal_resistance * 1e6 / (self.n_ev * self.open_circuit_voltage**2)

    def deliverable_energy(self) -> float:
        return self.charger_capacity * self.grid.step_hours * math.fsum(self.plug_share.values)


class EvChargingModel(AssetModel):
    asset = AssetClass.EV_CHARGING
    scenario: EvScenario

    def installed_capability(self) -> float:
        demand = self.scenario.uncontrolled_demand.array[list(self.window.indices)]
        return max(0.0, float(np.min(demand)))

    def check_feasible(self) -> None:
        s = self.scenario
        if s.daily_energy > s.deliverable_energy() + 1e-9:
            raise ModelInfeasibleError(
                f"daily demand of {s.daily_energy:.4g} MWh exceeds the "
                f"{s.deliverable_energy():.4g} MWh plugged-in chargers can deliver",
                asset=self.name,
            )

    def build(self) -> LinearProgram:
        s = self.scenario
        dt = self.grid.step_hours
        T = self.grid.count

        lp = LinearProgram(name=self.name, sense=Sense.MAXIMIZE)
        lp.add_variable(FLEX)

        energy = [lp.add_variable(f"e[{t}]", 0.0, math.inf) for t in range(T + 1)]
        lp.add_constraint("energy_start", {energy[0]: 1.0}, Relation.EQ, 0.0)
        lp.add_constraint("energy_end", {energy[T]: 1.0}, Relation.EQ, s.daily_energy)

        for t in range(T):
            limit = s.plug_share[t] * s.charger_capacity
            terminal = lp.add_variable(f"pt[{t}]", 0.0, limit, cost=-s.tariff[t] * dt)

            if limit > 0:
                battery = add_quadratic_epigraph(
                    lp, f"pb[{t}]", s.loss_coefficient, self.spec.over(0.0, limit)
                )
                loss_terms = {
                    seg: -(1.0 + slope) for seg, slope in zip(battery.segments, battery.slopes)
                }
                lp.add_constraint(
                    f"losses[{t}]", {terminal: 1.0, **loss_terms}, Relation.GE, 0.0
                )
                charged = battery.argument_terms(-dt)
            else:
                charged = {}

            lp.add_constraint(
                f"continuity[{t}]",
                {energy[t + 1]: 1.0, energy[t]: -1.0, **charged},
                Relation.EQ,
                0.0,
            )

            if t in s.departure_window:
                unmet = add_quadratic_epigraph(
                    lp, f"unmet[{t}]", 1.0, self.spec.over(0.0, max(s.daily_energy, 1e-6))
                )
                lp.add_objective(unmet.cost_terms(-s.penalty / 2 * dt))
                lp.add_constraint(
                    f"departure[{t}]",
                    {energy[t]: 1.0, **unmet.argument_terms(1.0)},
                    Relation.GE,
                    s.daily_energy * (1.0 - s.plug_share[t]),
                )

            if t in self.window:
                lp.add_constraint(
                    f"flexibility[{t}]",
                    {FLEX: 1.0, terminal: 1.0},
                    Relation.LE,
                    s.uncontrolled_demand[t],
                )
        return lp

    def extract(self, price: float, solution: Solution) -> FlexibilityResult:
        T = self.grid.count
        terminal = tuple(solution[f"pt[{t}]"] for t in range(T))
        energy = tuple(solution[f"e[{t}]"] for t in range(T + 1))
        battery = tuple(
            (energy[t + 1] - energy[t]) / self.grid.step_hours for t in range(T)
        )
        return FlexibilityResult(
            asset=self.asset,
            price=price,
            flexible_capacity=max(0.0, solution[FLEX]),
            objective=solution.objective,
            schedule={"terminal_power": terminal, "battery_power": battery, "energy": energy},
            details={"losses": math.fsum(terminal) - math.fsum(battery)},
        )


def ev_flexibility(
    scenario: EvScenario,
    price: float,
    window: Window,
    spec: Optional[PiecewiseSpec] = None,
) -> FlexibilityResult:
    result, _ = EvChargingModel(scenario, window, spec).solve(price)
    return result
