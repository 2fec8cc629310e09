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

"""Case-study scenario documents.

A scenario document is JSON with the quantities of the published scenario
tables in kW/kWh; everything is converted to MW/MWh while loading.  Documents
are also composed into a YAML node graph so that validation errors can name
the line of the offending field.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, TypeVar, Union

import yaml

from .errors import ConfigurationError, ScenarioError
from .ev_charging import DEFAULT_CHARGER_KW, DEFAULT_DAILY_KWH, EvScenario
from .heat_pump import DwellingParams, HpScenario
from .industrial import DEFAULT_LINEAR_COST, DEFAULT_QUADRATIC_PER_CAPACITY, IcScenario
from .logging import get_logger
from .market import ServiceRequirement
from .offer_curve import AssetClass
from .profiles import (
    EV_SHIFT_PREMIUM,
    PEAK_TARIFF_FACTOR,
    ambient_temperature,
    ev_tariff,
    plug_share,
    tou_tariff,
    uncontrolled_demand,
)
from .storage import CycleSegment, EesScenario, default_cycle_table
from .timegrid import Profile, TimeGrid, Unit

logger = get_logger(__name__)

T = TypeVar("T")

SCHEMA_VERSION = 1
SCENARIO_DIR_ENV = "FLEXMARKET_SCENARIO_DIR"
BUNDLED_SCENARIO_DIR = Path(__file__).parent / "scenarios"
BUNDLED_SCENARIOS = ("st", "ct", "lw", "nze")

KILO = 1e-3  # kW -> MW, kWh -> MWh, W -> kW

_Path = Tuple[Union[str, int], ...]


@dataclass(frozen=True)
class CaseScenario:
    name: str
    grid: TimeGrid
    requirement: ServiceRequirement
    heat_pumps: HpScenario
    ev_charging: EvScenario
    storage: EesScenario
    industrial: IcScenario
    description: str = ""
    source: Optional[str] = None

    @property
    def assets(self) -> Dict[AssetClass, Any]:
        return {
            AssetClass.HEAT_PUMP: self.heat_pumps,
            AssetClass.EV_CHARGING: self.ev_charging,
            AssetClass.STORAGE: self.storage,
            AssetClass.INDUSTRIAL: self.industrial,
        }

    def asset(self, asset: AssetClass):
        return self.assets[asset]


def _line_index(node: yaml.Node, path: _Path = ()) -> Dict[_Path, int]:
    lines = {path: node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            lines.update(_line_index(value, path + (key.value,)))
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            lines.update(_line_index(item, path + (i,)))
    return lines


class _Document:
    def __init__(self, data: Any, lines: Dict[_Path, int], source: Optional[str]):
        self.data = data
        self.lines = lines
        self.source = source

    def error(self, reason: str, path: _Path) -> ScenarioError:
        line = None
        for depth in range(len(path), -1, -1):
            line = self.lines.get(path[:depth])
            if line is not None:
                break
        return ScenarioError(
            reason,
            path=self.source,
            line=line,
            field=".".join(str(p) for p in path) or None,
        )

    def section(self, *path: str) -> "_Section":
        return _Section(self, self.data, ()).section(*path)


class _Section:
    def __init__(self, document: _Document, data: Any, path: _Path):
        self.document = document
        self.data = data
        self.path = path
        if not isinstance(data, dict):
            raise document.error("expected an object", path)

    def error(self, reason: str, key: Optional[str] = None) -> ScenarioError:
        return self.document.error(reason, self.path + ((key,) if key else ()))

    def section(self, *keys: str, optional: bool = False) -> "_Section":
        data, path = self.data, self.path
        for key in keys:
            if key not in data:
                if optional:
                    return _Section(self.document, {}, path + (key,))
                raise self.document.error("missing section", path + (key,))
            data, path = data[key], path + (key,)
            if not isinstance(data, dict):
                raise self.document.error("expected an object", path)
        return _Section(self.document, data, path)

    def config_get(
        self, key: str, *, default: T, convert_with: Optional[Callable[[Any], T]] = None
    ) -> T:
        value = self.data.get(key)
        if value is None:
            return default
        return self._convert(key, value, convert_with)

    def require(self, key: str, *, convert_with: Optional[Callable[[Any], T]] = None) -> T:
        value = self.data.get(key)
        if value is None:
            raise self.error("required field is missing", key)
        return self._convert(key, value, convert_with)

    def _convert(self, key: str, value: Any, convert_with):
        try:
            return value if convert_with is None else convert_with(value)
        except (TypeError, ValueError) as e:
            raise self.error(f"invalid value {value!r}: {e}", key) from e

    def check(self, key: str, build: Callable[[], T]) -> T:
        """Run `build`, reporting configuration errors against `key`"""
        try:
            return build()
        except ScenarioError:
            raise
        except ConfigurationError as e:
            raise self.error(str(e), key) from e


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("expected a number")
    return float(value)


def _count(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ValueError("expected a nonnegative integer")
    return value


def _number_pair(value: Any) -> Tuple[float, float]:
    values = _numbers(value)
    if len(values) != 2:
        raise ValueError("expected [low, high]")
    return values[0], values[1]


def _clock_pair(value: Any) -> Tuple[str, str]:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, str) for v in value)):
        raise ValueError('expected ["HH:MM", "HH:MM"]')
    return value[0], value[1]


def _numbers(value: Any) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise ValueError("expected a list of numbers")
    return tuple(_number(v) for v in value)


def _profile(section: _Section, key: str, grid: TimeGrid, unit: Unit, scale: float = 1.0):
    values = section.config_get(key, default=None, convert_with=_numbers)
    if values is None:
        return None
    if len(values) != grid.count:
        raise section.error(f"expected {grid.count} values, got {len(values)}", key)
    return Profile.of((scale * v for v in values), unit)


def _dwellings(section: _Section) -> Tuple[DwellingParams, ...]:
    items = section.require("dwellings")
    if not isinstance(items, list) or not items:
        raise section.error("expected a nonempty list of dwelling types", "dwellings")

    dwellings = []
    for i, item in enumerate(items):
        entry = _Section(section.document, item, section.path + ("dwellings", i))
        dwellings.append(
            entry.check(
                "share_pct",
                lambda entry=entry: DwellingParams(
                    name=entry.require("name", convert_with=str),
                    share=entry.require("share_pct", convert_with=_number) / 100.0,
                    conductance=entry.require("conductance_w_per_c", convert_with=_number)
                    * KILO**2,
                    capacitance=entry.require("capacitance_kwh_per_c", convert_with=_number) * KILO,
                ),
            )
        )
    return tuple(dwellings)


def _cycle_table(section: _Section) -> Tuple[CycleSegment, ...]:
    rows = section.config_get("cycle_table", default=None)
    if rows is None:
        return default_cycle_table()
    if not isinstance(rows, list):
        raise section.error("expected a list of [dod_low, dod_high, cycles]", "cycle_table")
    table = []
    for i, row in enumerate(rows):
        if not (isinstance(row, list) and len(row) == 3):
            raise section.document.error(
                "expected [dod_low, dod_high, cycles]", section.path + ("cycle_table", i)
            )
        low, high, cycles = row
        table.append(CycleSegment(_number(low), _number(high), _count(cycles)))
    return tuple(table)


def parse_scenario(
    text: str, *, name: Optional[str] = None, source: Optional[str] = None
) -> CaseScenario:
    if not text.strip():
        raise ScenarioError("empty document", path=source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"not a valid document: {e.msg}", path=source, line=e.lineno) from e
    # values come from the JSON parser, the YAML node graph only locates them
    try:
        lines = _line_index(yaml.compose(text, Loader=yaml.SafeLoader))
    except yaml.YAMLError:
        lines = {}

    document = _Document(data, lines, source)
    root = document.section()

    version = root.config_get("schema_version", default=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise root.error(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})", "schema_version"
        )

    grid_section = root.section("time_grid", optional=True)
    grid = grid_section.check(
        "step_hours",
        lambda: TimeGrid(
            step_hours=grid_section.config_get("step_hours", default=0.5, convert_with=_number),
            horizon_hours=grid_section.config_get(
                "horizon_hours", default=24.0, convert_with=_number
            ),
        ),
    )

    service = root.section("service")
    window = service.check(
        "window", lambda: grid.window(*service.require("window", convert_with=_clock_pair))
    )
    requirement = service.check(
        "demand_kw",
        lambda: ServiceRequirement(
            demand=service.require("demand_kw", convert_with=_number) * KILO,
            ceiling=service.config_get("ceiling", default=50.0, convert_with=_number),
            window=window,
        ),
    )

    profiles = root.section("profiles", optional=True)
    tariff = _profile(profiles, "tariff", grid, Unit.GBP_PER_MWH)
    if tariff is None:
        tariff = tou_tariff(
            grid,
            peak_factor=profiles.config_get(
                "tariff_peak_factor", default=PEAK_TARIFF_FACTOR, convert_with=_number
            ),
        )
    ambient = _profile(profiles, "ambient", grid, Unit.CELSIUS)
    if ambient is None:
        ambient = ambient_temperature(grid)
    share = _profile(profiles, "plug_share", grid, Unit.PU)
    if share is None:
        share = plug_share(grid)

    hp = root.section("heat_pumps")
    heat_pumps = hp.check(
        "count",
        lambda: HpScenario(
            n_hp=hp.require("count", convert_with=_count),
            dwellings=_dwellings(hp),
            tariff=tariff,
            ambient=ambient,
            grid=grid,
            ratings=hp.config_get(
                "ratings_kw",
                default=None,
                convert_with=lambda v: tuple(x * KILO for x in _numbers(v)),
            ),
            conversion=hp.config_get("conversion", default=3.0, convert_with=_number),
            peak_factor=hp.config_get("peak_factor", default=2.0, convert_with=_number),
            comfort_band=hp.config_get(
                "comfort_band", default=(18.0, 22.0), convert_with=_number_pair
            ),
            penalty=hp.config_get("penalty", default=1000.0, convert_with=_number),
        ),
    )

    ev = root.section("ev_charging")
    n_ev = ev.require("count", convert_with=_count)
    charger_kw = ev.config_get("charger_kw", default=DEFAULT_CHARGER_KW, convert_with=_number)
    daily_kwh = ev.config_get("daily_kwh_per_ev", default=DEFAULT_DAILY_KWH, convert_with=_number)
    charger = n_ev * charger_kw * KILO
    daily = n_ev * daily_kwh * KILO
    uncontrolled = _profile(profiles, "ev_uncontrolled_kw", grid, Unit.MW, scale=KILO)
    if uncontrolled is None:
        uncontrolled = uncontrolled_demand(grid, daily, charger, share)
    departure = ev.check(
        "departure_window",
        lambda: grid.window(
            *ev.config_get("departure_window", default=("02:00", "14:00"), convert_with=_clock_pair)
        ),
    )
    ev_charging = ev.check(
        "count",
        lambda: EvScenario(
            n_ev=n_ev,
            charger_capacity=charger,
            plug_share=share,
            daily_energy=daily,
            uncontrolled_demand=uncontrolled,
            tariff=ev_tariff(
                tariff,
                window,
                ev.config_get(
                    "shift_premium", default=EV_SHIFT_PREMIUM, convert_with=_number
                ),
            ),
            departure_window=departure,
            grid=grid,
            internal_resistance=ev.config_get(
                "internal_resistance_ohm", default=0.1, convert_with=_number
            ),
            open_circuit_voltage=ev.config_get(
                "open_circuit_voltage", default=360.0, convert_with=_number
            ),
            penalty=ev.config_get("penalty", default=1000.0, convert_with=_number),
        ),
    )

    es = root.section("storage")
    power = es.require("power_kw", convert_with=_number) * KILO
    storage = es.check(
        "power_kw",
        lambda: EesScenario(
            power=power,
            energy=power * es.config_get("hours", default=2.0, convert_with=_number),
            tariff=tariff,
            grid=grid,
            charge_efficiency=es.config_get(
                "charge_efficiency", default=0.975, convert_with=_number
            ),
            discharge_efficiency=es.config_get(
                "discharge_efficiency", default=0.975, convert_with=_number
            ),
            capex=es.config_get("capex_per_kwh", default=100.0, convert_with=_number) / KILO,
            cycle_table=_cycle_table(es),
        ),
    )

    ic = root.section("industrial")
    capacity = ic.require("capacity_kw", convert_with=_number) * KILO
    recovery = ic.check(
        "recovery_window",
        lambda: grid.window(
            *ic.config_get("recovery_window", default=("18:30", "22:30"), convert_with=_clock_pair)
        ),
    )
    # recovered energy replaces energy not used during the window, so it is free by default
    ic_tariff = Profile.constant(0.0, grid, Unit.GBP_PER_MWH)
    if ic.config_get("recovery_tariff", default=False, convert_with=bool):
        ic_tariff = tariff
    industrial = ic.check(
        "capacity_kw",
        lambda: IcScenario(
            capacity=capacity,
            quadratic_cost=IcScenario.quadratic_for(
                capacity,
                ic.config_get(
                    "quadratic_per_capacity",
                    default=DEFAULT_QUADRATIC_PER_CAPACITY,
                    convert_with=_number,
                ),
            ),
            linear_cost=ic.config_get("linear", default=DEFAULT_LINEAR_COST, convert_with=_number),
            recovery=recovery,
            tariff=ic_tariff,
            grid=grid,
            energy_recovery=ic.config_get("energy_recovery", default=1.0, convert_with=_number),
            power_recovery=ic.config_get("power_recovery", default=0.5, convert_with=_number),
        ),
    )

    return CaseScenario(
        name=root.config_get("name", default=name or "scenario", convert_with=str),
        description=root.config_get("description", default="", convert_with=str),
        grid=grid,
        requirement=requirement,
        heat_pumps=heat_pumps,
        ev_charging=ev_charging,
        storage=storage,
        industrial=industrial,
        source=source,
    )


def scenario_dir() -> Path:
    configured = os.environ.get(SCENARIO_DIR_ENV)
    return Path(configured) if configured else BUNDLED_SCENARIO_DIR


def resolve_scenario(name_or_path: str) -> Path:
    """A path to a scenario document, or the document named `name_or_path`
    in the scenario directory"""
    path = Path(name_or_path)
    if path.suffix and path.is_file():
        return path
    candidate = scenario_dir() / f"{name_or_path}.json"
    if candidate.is_file():
        return candidate
    if path.is_file():
        return path
    raise ConfigurationError(
        f"No scenario {name_or_path!r}: not a file and not found in {scenario_dir()}"
    )


def load_scenario(name_or_path: str) -> CaseScenario:
    path = resolve_scenario(name_or_path)
    logger.debug(f"Loading scenario from {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", path=str(path)) from e
    return parse_scenario(text, name=path.stem, source=str(path))


def load_scenarios(names: List[str]) -> List[CaseScenario]:
    scenarios = [load_scenario(n) for n in names]
    seen: Dict[str, str] = {}
    for s in scenarios:
        if s.name in seen:
            raise ConfigurationError(
                f"Scenario name {s.name!r} used by both {seen[s.name]} and {s.source}"
            )
        seen[s.name] = s.source or s.name
    return scenarios


def scenario_summary(scenario: CaseScenario) -> Mapping[str, Any]:
    """Headline quantities of a scenario, in the units of the scenario tables"""
    return {
        "name": scenario.name,
        "heat_pumps": scenario.heat_pumps.n_hp,
        "electric_vehicles": scenario.ev_charging.n_ev,
        "storage_kw": scenario.storage.power / KILO,
        "industrial_kw": scenario.industrial.capacity / KILO,
        "demand_kw": scenario.requirement.demand / KILO,
        "ceiling": scenario.requirement.ceiling,
    }

