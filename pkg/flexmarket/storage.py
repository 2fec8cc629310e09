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

from dataclasses import dataclass, field
from typing import Optional, Tuple

from .asset import FLEX, AssetModel, FlexibilityResult
from .errors import ConfigurationError, ModelInfeasibleError
from .lp import LinearProgram, Relation, Sense, Solution
from .offer_curve import AssetClass
from .piecewise import PiecewiseSpec
from .timegrid import Profile, TimeGrid, Window

# cycle lifetime against depth of discharge for lithium-ion storage
DEFAULT_CYCLE_TABLE: Tuple[Tuple[float, float, int], ...] = tuple(
    (round(0.1 * i, 10), round(0.1 * (i + 1), 10), cycles)
    for i, cycles in enumerate(
        (13660, 12200, 10800, 9480, 8230, 7090, 6030, 5080, 4230, 3490)
    )
)


@dataclass(frozen=True)
class CycleSegment:
    dod_low: float
    dod_high: float
    cycles: int


def default_cycle_table() -> Tuple[CycleSegment, ...]:
    return tuple(CycleSegment(lo, hi, n) for lo, hi, n in DEFAULT_CYCLE_TABLE)


@dataclass(frozen=True)
class EesScenario:
    power: float  # MW
    energy: float  # MWh
    tariff: Profile
    grid: TimeGrid = field(default_factory=TimeGrid)
    charge_efficiency: float = 0.975
    discharge_efficiency: float = 0.975
    capex: float = 100_000.0  # £/MWh
    cycle_table: Tuple[CycleSegment, ...] = field(default_factory=default_cycle_table)

    def __post_init__(self):
        if self.power < 0 or self.energy < 0:
            raise ConfigurationError("Storage power and energy must be nonnegative")
        for name, eta in (
            ("charge_efficiency", self.charge_efficiency),
            ("discharge_efficiency", self.discharge_efficiency),
        ):
            if not 0 < eta <= 1:
                raise ConfigurationError(f"storage.{name}: {eta} outside (0, 1]")
        if self.capex < 0:
            raise ConfigurationError("storage.capex must be nonnegative")
        self.tariff.check_aligned(self.grid, name="storage.tariff")
        self._check_cycle_table()

    def _check_cycle_table(self) -> None:
        table = self.cycle_table
        if not table:
            raise ConfigurationError("storage.cycle_table must not be empty")
        if table[0].dod_low != 0.0 or abs(table[-1].dod_high - 1.0) > 1e-9:
            raise ConfigurationError("storage.cycle_table must cover depths of discharge 0 to 1")
        for prev, cur in zip(table, table[1:]):
            if abs(prev.dod_high - cur.dod_low) > 1e-9:
                raise ConfigurationError(
                    f"storage.cycle_table: gap or overlap at DoD {prev.dod_high}"
                )
            if not cur.cycles < prev.cycles:
                raise ConfigurationError(
                    "storage.cycle_table: cycles must strictly decrease with DoD"
                )
        if any(seg.dod_low >= seg.dod_high or seg.cycles <= 0 for seg in table):
            raise ConfigurationError("storage.cycle_table: invalid segment")

    def cycle_cost(self, segment: CycleSegment) -> float:
        """Degradation cost (£) of one daily cycle within `segment`"""
        return self.energy * self.capex / segment.cycles


class StorageModel(AssetModel):
    asset = AssetClass.STORAGE
    scenario: EesScenario

    def installed_capability(self) -> float:
        return self.scenario.power

    def check_feasible(self) -> None:
        if self.scenario.energy <= 0 and self.scenario.power > 0:
            raise ModelInfeasibleError(
                "storage with power but no energy capacity has no defined DoD",
                asset=self.name,
            )

    def build(self) -> LinearProgram:
        s = self.scenario
        dt = self.grid.step_hours
        T = self.grid.count
        eta_ch, eta_dis = s.charge_efficiency, s.discharge_efficiency

        lp = LinearProgram(name=self.name, sense=Sense.MAXIMIZE)
        lp.add_variable(FLEX)

        level = [lp.add_variable(f"soe[{t}]", 0.0, s.energy) for t in range(T + 1)]
        charge = [
            lp.add_variable(f"ch[{t}]", 0.0, s.power, cost=-s.tariff[t] * dt) for t in range(T)
        ]
        discharge = [
            lp.add_variable(f"dis[{t}]", -s.power, 0.0, cost=-s.tariff[t] * dt) for t in range(T)
        ]

        for t in range(T):
            lp.add_constraint(
                f"continuity[{t}]",
                {
                    level[t + 1]: 1.0,
                    level[t]: -1.0,
                    charge[t]: -eta_ch * dt,
                    discharge[t]: -dt / eta_dis,
                },
                Relation.EQ,
                0.0,
            )
            if t in self.window:
                lp.add_constraint(
                    f"flexibility[{t}]",
                    {FLEX: 1.0, charge[t]: 1.0, discharge[t]: 1.0},
                    Relation.LE,
                    0.0,
                )
        lp.add_constraint("net_zero", {level[T]: 1.0, level[0]: -1.0}, Relation.EQ, 0.0)

        dod = lp.add_variable("dod", 0.0, 1.0)
        scale = 1.0 / (2.0 * s.energy) if s.energy > 0 else 0.0
        throughput = {dod: 1.0}
        for t in range(T):
            throughput[charge[t]] = -scale * eta_ch * dt
            throughput[discharge[t]] = scale * dt / eta_dis
        lp.add_constraint("dod", throughput, Relation.EQ, 0.0)

        select = [
            lp.add_binary(f"alpha[{i}]", cost=-s.cycle_cost(seg))
            for i, seg in enumerate(s.cycle_table)
        ]
        # an idle day selects no segment and pays no degradation
        lp.add_constraint("one_segment", {a: 1.0 for a in select}, Relation.LE, 1.0)
        lp.add_constraint(
            "dod_low",
            {dod: 1.0, **{a: -seg.dod_low for a, seg in zip(select, s.cycle_table)}},
            Relation.GE,
            0.0,
        )
        lp.add_constraint(
            "dod_high",
            {dod: 1.0, **{a: -seg.dod_high for a, seg in zip(select, s.cycle_table)}},
            Relation.LE,
            0.0,
        )
        return lp

    def extract(self, price: float, solution: Solution) -> FlexibilityResult:
        s = self.scenario
        T = self.grid.count
        chosen = [i for i in range(len(s.cycle_table)) if solution[f"alpha[{i}]"] > 0.5]
        segment = chosen[0] if chosen else -1
        return FlexibilityResult(
            asset=self.asset,
            price=price,
            flexible_capacity=max(0.0, solution[FLEX]),
            objective=solution.objective,
            schedule={
                "charge": tuple(solution[f"ch[{t}]"] for t in range(T)),
                "discharge": tuple(solution[f"dis[{t}]"] for t in range(T)),
                "energy": tuple(solution[f"soe[{t}]"] for t in range(T + 1)),
            },
            details={
                "dod": solution["dod"],
                "segment": float(segment),
                "cycle_cost": s.cycle_cost(s.cycle_table[segment]) if chosen else 0.0,
            },
        )


def ees_flexibility(
    scenario: EesScenario,
    price: float,
    window: Window,
    spec: Optional[PiecewiseSpec] = None,
) -> FlexibilityResult:
    result, _ = StorageModel(scenario, window, spec).solve(price)
    return result
