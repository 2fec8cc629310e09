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

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Type, Union

import numpy as np

from .asset import AssetModel, FlexibilityResult
from .errors import ConfigurationError, SchemaVersionError
from .ev_charging import EvChargingModel
from .heat_pump import HeatPumpModel
from .industrial import IndustrialModel
from .logging import get_logger
from .lp import Basis
from .market import ServiceRequirement
from .offer_curve import (
    AssetClass,
    OfferCurve,
    PriceGrid,
    aggregate_curves,
    true_equilibrium,
)
from .piecewise import PiecewiseSpec
from .scenario import CaseScenario
from .storage import StorageModel
from .timegrid import Window

logger = get_logger(__name__)

CURVES_SCHEMA_VERSION = 1
REPAIR_TOLERANCE = 1e-6
OBJECTIVE_TOLERANCE = 1e-6

MODELS: Dict[AssetClass, Type[AssetModel]] = {
    AssetClass.HEAT_PUMP: HeatPumpModel,
    AssetClass.EV_CHARGING: EvChargingModel,
    AssetClass.STORAGE: StorageModel,
    AssetClass.INDUSTRIAL: IndustrialModel,
}


def model_for(
    asset: AssetClass, case: CaseScenario, spec: Optional[PiecewiseSpec] = None
) -> AssetModel:
    return MODELS[asset](case.asset(asset), case.requirement.window, spec)


def _repair(model: AssetModel, raw: np.ndarray) -> np.ndarray:
    repaired = np.maximum.accumulate(raw)
    dip = float(np.max(repaired - raw)) if len(raw) else 0.0
    if dip > REPAIR_TOLERANCE:
        logger.warning(
            f"{model.name}: offer curve decreases by {dip:.3g} MW, "
            f"clamped to nondecreasing"
        )
    elif dip > 0:
        logger.debug(f"{model.name}: monotone repair of {dip:.3g} MW")
    return np.clip(repaired, 0.0, model.installed_capability())


def offer_curve(model: AssetModel, prices: PriceGrid) -> OfferCurve:
    """Solve `model` at every level of `prices`, cheapest first.

    The chain of warm starts begins at the no-fee schedule, whose objective
    is also the floor every priced solve must reach. Dips caused by solver
    noise are repaired so the curve is nondecreasing; capacities are clamped
    to the installed capability of the asset.
    """
    reference, basis = reference_schedule(model)
    capacities = []
    for price in prices.levels:
        result, solution = model.solve(price, warm_start=basis)
        basis = solution.basis
        floor = reference.objective - OBJECTIVE_TOLERANCE * max(1.0, abs(reference.objective))
        if result.objective < floor:
            logger.warning(
                f"{model.name} @ {price:g}: objective {result.objective:.6g} below the "
                f"no-fee schedule's {reference.objective:.6g}"
            )
        capacities.append(result.flexible_capacity)
        logger.debug(f"{model.name} @ {price:g}: {result.flexible_capacity:.6f} MW")

    return OfferCurve.of(prices, _repair(model, np.asarray(capacities, dtype=float)))


def reference_schedule(model: AssetModel) -> Tuple[FlexibilityResult, Optional[Basis]]:
    """Schedule the asset would follow without an availability fee, and its basis"""
    result, solution = model.solve(0.0)
    return result, solution.basis


@dataclass(frozen=True)
class CurveTask:
    case: CaseScenario
    asset: AssetClass
    prices: PriceGrid
    segments: int = PiecewiseSpec.segment_count

    def run(self) -> OfferCurve:
        model = model_for(self.asset, self.case, PiecewiseSpec(segment_count=self.segments))
        curve = offer_curve(model, self.prices)
        logger.info(
            f"{self.case.name}/{self.asset.value}: "
            f"{curve.max_capacity:.3f} MW at {self.prices.levels[-1]:g} £/MW/h"
        )
        return curve


def _run(task: CurveTask) -> OfferCurve:
    return task.run()


def generate_curves(tasks: Sequence[CurveTask], jobs: int = 1) -> List[OfferCurve]:
    """Run curve tasks, in a process pool if `jobs` > 1; results keep task order"""
    if jobs < 1:
        raise ConfigurationError(f"Number of jobs must be positive, got {jobs}")
    if jobs == 1 or len(tasks) <= 1:
        return [task.run() for task in tasks]

    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(_run, tasks))


@dataclass(frozen=True)
class CurveSet:
    """Offer curves of all asset classes of one scenario"""

    scenario: str
    requirement: ServiceRequirement
    curves: Dict[AssetClass, OfferCurve] = field(default_factory=dict)

    @property
    def prices(self) -> PriceGrid:
        return next(iter(self.curves.values())).grid

    @property
    def aggregate(self) -> OfferCurve:
        return aggregate_curves(list(self.curves.values()), self.prices)

    @property
    def true_price(self) -> float:
        return true_equilibrium(
            self.aggregate, self.requirement.demand, self.requirement.ceiling
        )

    def to_dict(self) -> Dict[str, Any]:
        window = self.requirement.window
        return {
            "schema_version": CURVES_SCHEMA_VERSION,
            "scenario": self.scenario,
            "requirement": {
                "demand": self.requirement.demand,
                "ceiling": self.requirement.ceiling,
                "window": {
                    "start_index": window.start_index,
                    "end_index": window.end_index,
                    "step_hours": window.step_hours,
                },
            },
            "prices": list(self.prices.levels),
            "curves": {
                asset.value: list(curve.capacities) for asset, curve in self.curves.items()
            },
        }

    @staticmethod
    def from_dict(data: Mapping[str, Any], source: Optional[str] = None) -> "CurveSet":
        version = data.get("schema_version")
        if version != CURVES_SCHEMA_VERSION:
            raise SchemaVersionError(
                found=version, expected=CURVES_SCHEMA_VERSION, path=source
            )
        try:
            req = data["requirement"]
            requirement = ServiceRequirement(
                demand=float(req["demand"]),
                ceiling=float(req["ceiling"]),
                window=Window(**req["window"]),
            )
            prices = PriceGrid(
                levels=tuple(float(p) for p in data["prices"]),
                ceiling=requirement.ceiling,
            )
            listed = {AssetClass(name): values for name, values in data["curves"].items()}
            curves = {
                asset: OfferCurve.of(prices, listed[asset])
                for asset in AssetClass
                if asset in listed
            }
            return CurveSet(scenario=str(data["scenario"]), requirement=requirement, curves=curves)
        except (KeyError, TypeError, ValueError) as e:
            where = source if source is not None else "<curves>"
            raise ConfigurationError(f"{where}: malformed curve file: {e}") from e

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @staticmethod
    def load(path: Path) -> "CurveSet":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Failed to read curve file {path}: {e}") from e
        return CurveSet.from_dict(data, source=str(path))


def price_grid(case: CaseScenario, prices: Optional[str] = None) -> PriceGrid:
    ceiling = case.requirement.ceiling
    if prices is None:
        return PriceGrid.integer(ceiling)
    return PriceGrid.parse(prices, ceiling=ceiling)


def case_curves(
    cases: Iterable[CaseScenario],
    prices: Optional[str] = None,
    segments: int = PiecewiseSpec.segment_count,
    jobs: int = 1,
) -> List[CurveSet]:
    """Offer curves of every asset class of every case, one task per pair.

    `prices` is a ``LO..HI[:STEP]`` range; by default every case uses the
    integer fees up to its ceiling.
    """
    cases = list(cases)
    tasks = [
        CurveTask(case=case, asset=asset, prices=price_grid(case, prices), segments=segments)
        for case in cases
        for asset in AssetClass
    ]
    curves = iter(generate_curves(tasks, jobs))

    sets = []
    for case in cases:
        curve_set = CurveSet(
            scenario=case.name,
            requirement=case.requirement,
            curves={asset: next(curves) for asset in AssetClass},
        )
        logger.info(f"{case.name}: true equilibrium price {curve_set.true_price:g} £/MW/h")
        sets.append(curve_set)
    return sets


def load_curve_sets(paths: Iterable[Union[str, Path]]) -> List[CurveSet]:
    """Load curve files; a directory contributes every ``*.json`` in it, sorted"""
    files: List[Path] = []
    for path in map(Path, paths):
        if path.is_dir():
            files.extend(sorted(path.glob("*.json")))
        else:
            files.append(path)
    if not files:
        raise ConfigurationError("No curve files found")

    sets = [CurveSet.load(f) for f in files]
    names = [s.scenario for s in sets]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigurationError(f"Duplicate scenarios in curve files: {', '.join(duplicates)}")
    return sets
