"""Heat pump flexibility with a first-order thermal model per dwelling type.

All dwellings of a type are represented by one household whose schedule is
scaled by ``N^HP · μ_d``.
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
from .simplex import solve_lp
from .timegrid import Profile, TimeGrid, Window

# ambient temperature (°C) at which the default rating still holds the comfort band
DESIGN_AMBIENT = -5.0
MAX_COMFORT_DEVIATION = 2.0


@dataclass(frozen=True)
class DwellingParams:
    name: str
    share: float
    conductance: float  # MW/°C
    capacitance: float  # MWh/°C

    def __post_init__(self):
        if not (self.share > 0 and self.conductance > 0 and self.capacitance > 0):
            raise ConfigurationError(
                f"Dwelling {self.name!r}: share, conductance and capacitance "
                f"must be positive"
            )


@dataclass(frozen=True)
class HpScenario:
    n_hp: int
    dwellings: Tuple[DwellingParams, ...]
    tariff: Profile
    ambient: Profile
    grid: TimeGrid = field(default_factory=TimeGrid)
    ratings: Optional[Tuple[float, ...]] = None  # MW per household, per dwelling type
    conversion: float = 3.0
    peak_factor: float = 2.0
    comfort_band: Tuple[float, float] = (18.0, 22.0)
    penalty: float = 1000.0  # £/°C²/h

    def __post_init__(self):
        if self.n_hp < 0:
            raise ConfigurationError(f"Number of heat pumps must be nonnegative: {self.n_hp}")
        if not self.dwellings:
            raise ConfigurationError("At least one dwelling type is required")
        total = math.fsum(d.share for d in self.dwellings)
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"Dwelling shares sum to {total}, not 1")
        low, high = self.comfort_band
        if not low < high:
            raise ConfigurationError(f"Empty comfort band [{low}, {high}]")
        if not 1.0 <= self.conversion <= 4.0:
            raise ConfigurationError(
                f"Heat pump conversion factor {self.conversion} outside [1, 4]"
            )
        if self.peak_factor < 1.0:
            raise ConfigurationError(f"Peak factor {self.peak_factor} below 1")
        if self.penalty < 0:
            raise ConfigurationError(f"Negative comfort penalty {self.penalty}")
        if self.ratings is not None and len(self.ratings) != len(self.dwellings):
            raise ConfigurationError("One heat pump rating per dwelling type required")
        self.tariff.check_aligned(self.grid, name="heat_pumps.tariff")
        self.ambient.check_aligned(self.grid, name="heat_pumps.ambient")

    def rating(self, index: int) -> float:
        if self.ratings is not None:
            return self.ratings[index]
        d = self.dwellings[index]
        return d.conductance * (self.comfort_band[1] - DESIGN_AMBIENT) / self.conversion

    @property
    def comfort_midpoint(self) -> float:
        return sum(self.comfort_band) / 2


class HeatPumpModel(AssetModel):
    asset = AssetClass.HEAT_PUMP
    scenario: HpScenario

    def expected_demand(self) -> np.ndarray:
        """Aggregate demand (MW) holding the comfort midpoint at each interval"""
        s = self.scenario
        ambient = s.ambient.array
        per_interval = sum(
            d.share * d.conductance / s.conversion * (s.comfort_midpoint - ambient)
            for d in s.dwellings
        )
        return s.n_hp * per_interval

    def installed_capability(self) -> float:
        expected = self.expected_demand()[list(self.window.indices)]
        return max(0.0, float(np.min(expected)))

    def check_feasible(self) -> None:
        s = self.scenario
        mean_ambient = float(np.mean(s.ambient.array))
        for index, d in enumerate(s.dwellings):
            reachable = mean_ambient + s.conversion * s.rating(index) / d.conductance
            if reachable < s.comfort_band[0]:
                raise ModelInfeasibleError(
                    f"rating of {d.name!r} dwellings reaches at most "
                    f"{reachable:.2f} °C on average, below the comfort band",
                    asset=self.name,
                )

    def build(self) -> LinearProgram:
        s = self.scenario
        grid = self.grid
        dt = grid.step_hours
        T = grid.count
        tau_min, tau_max = s.comfort_band
        deviation = self.spec.over(0.0, MAX_COMFORT_DEVIATION)

        lp = LinearProgram(name=self.name, sense=Sense.MAXIMIZE)
        lp.add_variable(FLEX, 0.0, self.installed_capability())

        load = {t: {} for t in self.window.indices}
        for index, d in enumerate(s.dwellings):
            households = s.n_hp * d.share
            decay = 1 - d.conductance * dt / d.capacitance
            gain = s.conversion * dt / d.capacitance
            leak = d.conductance * dt / d.capacitance

            power = [
                lp.add_variable(
                    f"p[{d.name},{t}]", 0.0, s.rating(index), cost=-households * s.tariff[t] * dt
                )
                for t in range(T)
            ]
            temperature = [
                lp.add_variable(f"tau[{d.name},{t}]", -math.inf, math.inf) for t in range(T)
            ]

            for t in range(T):
                nxt = (t + 1) % T
                lp.add_constraint(
                    f"thermal[{d.name},{t}]",
                    {temperature[nxt]: 1.0, temperature[t]: -decay, power[t]: -gain},
                    Relation.EQ,
                    leak * s.ambient[t],
                )

                peak = {p: -s.peak_factor / T for p in power}
                peak[power[t]] = peak.get(power[t], 0.0) + 1.0
                lp.add_constraint(f"peak[{d.name},{t}]", peak, Relation.LE, 0.0)

                weight = households * s.penalty / 2 * dt
                above = add_quadratic_epigraph(lp, f"above[{d.name},{t}]", 1.0, deviation)
                below = add_quadratic_epigraph(lp, f"below[{d.name},{t}]", 1.0, deviation)
                lp.add_objective(above.cost_terms(-weight))
                lp.add_objective(below.cost_terms(-weight))
                lp.add_constraint(
                    f"comfort_max[{d.name},{t}]",
                    {temperature[t]: 1.0, **above.argument_terms(-1.0)},
                    Relation.LE,
                    tau_max,
                )
                lp.add_constraint(
                    f"comfort_min[{d.name},{t}]",
                    {temperature[t]: 1.0, **below.argument_terms(1.0)},
                    Relation.GE,
                    tau_min,
                )

                if t in self.window:
                    load[t][power[t]] = households

        expected = self.expected_demand()
        for t, terms in load.items():
            lp.add_constraint(
                f"flexibility[{t}]", {FLEX: 1.0, **terms}, Relation.LE, float(expected[t])
            )

        # P^Org: the window load the households schedule when flexibility earns nothing
        no_fee = solve_lp(lp.with_bounds({FLEX: (0.0, 0.0)}))
        if not no_fee.is_optimal:
            raise ModelInfeasibleError("no schedule without availability fee", asset=self.name)
        self._reference = {t: no_fee.value_of(terms) for t, terms in load.items()}
        for t, terms in load.items():
            lp.add_constraint(
                f"reference[{t}]", {FLEX: 1.0, **terms}, Relation.LE, self._reference[t]
            )
        return lp

    def reference_load(self) -> np.ndarray:
        """Aggregate window demand (MW) of the schedule followed without a fee"""
        self.program  # the reference is found while building
        return np.array([self._reference[t] for t in self.window.indices])

    def extract(self, price: float, solution: Solution) -> FlexibilityResult:
        s = self.scenario
        T = self.grid.count
        schedule = {}
        deviations = {}
        for d in s.dwellings:
            schedule[f"power[{d.name}]"] = tuple(solution[f"p[{d.name},{t}]"] for t in range(T))
            temperatures = tuple(solution[f"tau[{d.name},{t}]"] for t in range(T))
            schedule[f"temperature[{d.name}]"] = temperatures
            deviations[f"max_deviation[{d.name}]"] = max(
                max(s.comfort_band[0] - x, x - s.comfort_band[1], 0.0) for x in temperatures
            )
        return FlexibilityResult(
            asset=self.asset,
            price=price,
            flexible_capacity=max(0.0, solution[FLEX]),
            objective=solution.objective,
            schedule=schedule,
            details=deviations,
        )


def hp_flexibility(
    scenario: HpScenario,
    price: float,
    window: Window,
    spec: Optional[PiecewiseSpec] = None,
) -> FlexibilityResult:
    result, _ = HeatPumpModel(scenario, window, spec).solve(price)
    return result
