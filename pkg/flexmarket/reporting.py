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
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ConfigurationError, FlexMarketError
from .flexibility import CurveSet
from .game import EquilibriumTable
from .logging import get_logger
from .market import Mechanism, OfferBook, ServiceRequirement, clear
from .offer_curve import AssetClass, OfferCurve, PriceGrid, ProviderType, aggregate_curves

logger = get_logger(__name__)

SUMMARY_SCHEMA_VERSION = 1
SATURATION_TOLERANCE = 1e-6

SUPPLY_CURVES = "supply_curves.csv"
AGGREGATE_CURVES = "aggregate_curves.csv"
EQUILIBRIA_CSV = "equilibria.csv"
EQUILIBRIA_JSON = "equilibria.json"
PRICE_STATS = "price_stats.csv"
COST_BENEFIT = "cost_benefit.csv"
PROVIDERS = "providers.csv"
COMPARISON = "published_comparison.csv"
SUMMARY = "summary.json"

PUBLISHED_TRUE_PRICES = {"lw": 8.0, "ct": 9.0, "nze": 10.0, "st": 50.0}
PUBLISHED_SATURATION = {
    AssetClass.HEAT_PUMP: (8.0, ""),
    AssetClass.EV_CHARGING: (11.0, ""),
    AssetClass.INDUSTRIAL: (30.0, ""),
    AssetClass.STORAGE: (50.0, ">"),
}
PUBLISHED_SATURATION_SCENARIO = "ct"
PUBLISHED_MEAN_PRICES = {"pab(op)": 12.4, "pac(us)": 9.6, "dra(ub)": 9.3, "vcg": 9.0}
PUBLISHED_BENEFITS = {"pab(op)": 188.0, "pac(us)": 202.0, "dra(ub)": 203.5, "vcg": 205.0}
PUBLISHED_PROFIT_SHARES = {"pab(op)": 0.533, "pac(us)": 0.433, "dra(ub)": 0.414, "vcg": 0.395}


@dataclass(frozen=True)
class PriceStats:
    series: str
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float

    @staticmethod
    def of(series: str, prices: Sequence[float]) -> "PriceStats":
        values = np.asarray(prices, dtype=float)
        # linear interpolation between order statistics, min and max as whiskers
        q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
        return PriceStats(
            series=series,
            count=len(values),
            min=float(values.min()),
            q1=float(q1),
            median=float(median),
            q3=float(q3),
            max=float(values.max()),
            mean=float(values.mean()),
        )


def _valid_rows(table: EquilibriumTable) -> List[Dict[str, Any]]:
    return [r for r in table.rows if not r["error"] and r["price"] is not None]


def series_prices(table: EquilibriumTable) -> Dict[str, List[float]]:
    """Equilibrium prices per series, pooled uniformly over scenarios and agent counts.

    A mechanism's own series holds, per (scenario, agents) cell, the highest
    price any strategy reaches; ``mechanism(strategy)`` series hold the cells
    of a single strategy.
    """
    dominant: Dict[Tuple[str, str, int], float] = {}
    series: Dict[str, List[float]] = {}
    for row in _valid_rows(table):
        key = (row["mechanism"], row["scenario"], row["agents"])
        dominant[key] = max(dominant.get(key, -math.inf), row["price"])
        label = f"{row['mechanism']}({row['strategy']})"
        series.setdefault(label, []).append(row["price"])

    for (mechanism, _, _), price in dominant.items():
        series.setdefault(mechanism, []).append(price)
    return series


def price_stats(table: EquilibriumTable) -> List[PriceStats]:
    series = series_prices(table)
    played = {r["mechanism"] for r in table.rows}
    for mechanism in sorted(played - set(series)):
        logger.warning(f"No successful games for mechanism {mechanism}, omitted from statistics")

    order = [m.value for m in Mechanism] + sorted(
        label for label in series if label not in {m.value for m in Mechanism}
    )
    return [PriceStats.of(label, series[label]) for label in order if label in series]


@dataclass(frozen=True)
class CostBenefit:
    """Daily cost and benefit (£) of buying the service at `price`.

    `revenue` and `provider_cost` are the providers' side as settled in the
    games of a series; they stay None for a plain price.
    """

    series: str
    price: float
    dso_cost: float
    dso_benefit: float
    revenue: Optional[float] = None
    provider_cost: Optional[float] = None

    @property
    def provider_profit(self) -> Optional[float]:
        if self.revenue is None or self.provider_cost is None:
            return None
        return self.revenue - self.provider_cost

    @property
    def profit_share(self) -> Optional[float]:
        profit = self.provider_profit
        if profit is None or self.revenue <= 0:
            return None
        return profit / self.revenue

    def to_record(self) -> Dict[str, Any]:
        record = asdict(self)
        record.update(provider_profit=self.provider_profit, profit_share=self.profit_share)
        return record


def cost_benefit(
    price: float,
    requirement: ServiceRequirement,
    *,
    series: str = "",
    revenue: Optional[float] = None,
    provider_cost: Optional[float] = None,
) -> CostBenefit:
    volume = requirement.demand * requirement.duration_hours
    return CostBenefit(
        series=series,
        price=price,
        dso_cost=price * volume,
        dso_benefit=(requirement.ceiling - price) * volume,
        revenue=revenue,
        provider_cost=provider_cost,
    )


def series_cost_benefit(
    table: EquilibriumTable, stats: Sequence[PriceStats], requirement: ServiceRequirement
) -> List[CostBenefit]:
    """Cost-benefit at the mean price of every strategy series.

    Revenue and provider cost are averaged over the series' games.
    """
    rows = _valid_rows(table)
    results = []
    for s in stats:
        cells = [r for r in rows if f"{r['mechanism']}({r['strategy']})" == s.series]
        revenue = provider_cost = None
        if cells:
            revenue = math.fsum(r["dso_payment"] for r in cells) / len(cells)
            provider_cost = math.fsum(r["provider_cost"] for r in cells) / len(cells)
        results.append(
            cost_benefit(
                s.mean,
                requirement,
                series=s.series,
                revenue=revenue,
                provider_cost=provider_cost,
            )
        )
    return results


@dataclass(frozen=True)
class ProviderShare:
    provider: str
    capacity: float  # MW
    revenue: float  # £ per day
    cost: float
    profit: float


def provider_breakdown(curves: CurveSet, price: Optional[float] = None) -> List[ProviderShare]:
    """Who supplies the service, and at what cost, under a uniform price.

    Providers offer their truthful curves; the accepted capacity is paid
    `price` (the true equilibrium price if omitted).  Demand nobody covers is
    listed as network reinforcement bought at the ceiling.
    """
    requirement = curves.requirement
    grid = curves.prices
    providers = [
        p for p in ProviderType if any(a in curves.curves for a in p.asset_classes)
    ]
    provider_curves = [
        aggregate_curves([curves.curves[a] for a in p.asset_classes if a in curves.curves], grid)
        for p in providers
    ]
    book = OfferBook(
        grid,
        [p.value for p in providers],
        [c.increments() for c in provider_curves],
        [grid.array] * len(providers),
    )
    result = clear(book, requirement)
    if price is None:
        price = result.price

    hours = requirement.duration_hours
    shares = []
    for provider, accepted in zip(providers, result.accepted):
        capacity = math.fsum(accepted)
        revenue = price * capacity * hours
        cost = math.fsum(accepted * grid.array) * hours
        shares.append(ProviderShare(provider.value, capacity, revenue, cost, revenue - cost))

    reinforcement = result.unmet * requirement.ceiling * hours
    shares.append(ProviderShare("reinforcement", result.unmet, reinforcement, reinforcement, 0.0))
    return shares


def saturation_price(curve: OfferCurve) -> Optional[float]:
    """Lowest price at which the curve offers all it ever offers, None for an empty curve"""
    if curve.max_capacity <= SATURATION_TOLERANCE:
        return None
    for price, capacity in curve.points:
        if capacity >= curve.max_capacity - SATURATION_TOLERANCE:
            return price
    return None  # pragma: no cover


@dataclass(frozen=True)
class Comparison:
    quantity: str
    published: float
    bound: str  # "" or ">" if the published value is a lower bound
    model: Optional[float]

    @property
    def deviation(self) -> Optional[float]:
        if self.model is None:
            return None
        return self.model - self.published

    @property
    def relative_deviation(self) -> Optional[float]:
        if self.deviation is None or self.published == 0:
            return None
        return self.deviation / self.published

    def to_record(self) -> Dict[str, Any]:
        return {
            "quantity": self.quantity,
            "published": self.published,
            "bound": self.bound,
            "model": self.model,
            "deviation": self.deviation,
            "relative_deviation": self.relative_deviation,
        }


def comparison_table(
    curve_sets: Sequence[CurveSet],
    stats: Sequence[PriceStats],
    costs: Sequence[CostBenefit],
) -> List[Comparison]:
    """Model values next to the published case-study results"""
    by_name = {c.scenario: c for c in curve_sets}
    rows = []
    for name, published in PUBLISHED_TRUE_PRICES.items():
        model = by_name[name].true_price if name in by_name else None
        rows.append(Comparison(f"true_price[{name}]", published, "", model))

    if PUBLISHED_SATURATION_SCENARIO in by_name:
        curves = by_name[PUBLISHED_SATURATION_SCENARIO].curves
        for asset, (published, bound) in PUBLISHED_SATURATION.items():
            model = saturation_price(curves[asset]) if asset in curves else None
            rows.append(
                Comparison(
                    f"saturation_price[{PUBLISHED_SATURATION_SCENARIO},{asset.value}]",
                    published,
                    bound,
                    model,
                )
            )

    means = {s.series: s.mean for s in stats}
    for series, published in PUBLISHED_MEAN_PRICES.items():
        rows.append(Comparison(f"mean_price[{series}]", published, "", means.get(series)))

    by_series = {c.series: c for c in costs}
    for series, published in PUBLISHED_BENEFITS.items():
        cb = by_series.get(_strategy_series(series, by_series))
        rows.append(
            Comparison(f"dso_benefit[{series}]", published, "", cb.dso_benefit if cb else None)
        )
    for series, published in PUBLISHED_PROFIT_SHARES.items():
        cb = by_series.get(_strategy_series(series, by_series))
        rows.append(
            Comparison(f"profit_share[{series}]", published, "", cb.profit_share if cb else None)
        )
    return rows


def _strategy_series(series: str, available: Mapping[str, Any]) -> str:
    """A bare mechanism stands for its best-paying strategy series"""
    if "(" in series:
        return series
    candidates = [s for s in available if s.startswith(f"{series}(")]
    if not candidates:
        return series
    return max(candidates, key=lambda s: (available[s].price, s))


@dataclass(frozen=True)
class Report:
    stats: Tuple[PriceStats, ...]
    costs: Tuple[CostBenefit, ...]
    providers: Tuple[Tuple[str, ProviderShare], ...]  # (scenario, share)
    comparison: Tuple[Comparison, ...]
    table: EquilibriumTable
    curve_sets: Tuple[CurveSet, ...]


def common_requirement(curve_sets: Sequence[CurveSet]) -> ServiceRequirement:
    if not curve_sets:
        raise ConfigurationError("Reporting needs the offer curves of at least one scenario")
    requirement = curve_sets[0].requirement
    if any(c.requirement != requirement for c in curve_sets[1:]):
        logger.warning(
            f"Scenarios differ in their service requirement; "
            f"cost-benefit figures use the one of {curve_sets[0].scenario}"
        )
    return requirement


def build_report(table: EquilibriumTable, curve_sets: Sequence[CurveSet]) -> Report:
    requirement = common_requirement(curve_sets)
    stats = price_stats(table)
    costs = series_cost_benefit(table, stats, requirement)
    providers = [
        (curves.scenario, share)
        for curves in curve_sets
        for share in provider_breakdown(curves)
    ]

    return Report(
        stats=tuple(stats),
        costs=tuple(costs),
        providers=tuple(providers),
        comparison=tuple(comparison_table(curve_sets, stats, costs)),
        table=table,
        curve_sets=tuple(curve_sets),
    )


def _write(path: Path, write) -> Path:
    try:
        write(path)
    except OSError as e:
        raise FlexMarketError(f"Failed to write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return path


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    return _write(path, lambda p: frame.to_csv(p, index=False, lineterminator="\n"))


def _write_json(data: Any, path: Path) -> Path:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    return _write(path, lambda p: p.write_text(text))


def curve_frames(curve_sets: Iterable[CurveSet]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Long tables of the per-asset and the aggregate supply curves"""
    supply, aggregate = [], []
    for curves in curve_sets:
        ceiling = curves.requirement.ceiling
        for asset, curve in curves.curves.items():
            supply.extend(
                (curves.scenario, asset.value, ceiling, price, capacity)
                for price, capacity in curve.points
            )
        aggregate.extend(
            (curves.scenario, ceiling, price, capacity)
            for price, capacity in curves.aggregate.points
        )
    return (
        pd.DataFrame(supply, columns=["scenario", "asset", "ceiling", "price", "capacity"]),
        pd.DataFrame(aggregate, columns=["scenario", "ceiling", "price", "capacity"]),
    )


def write_curves(curve_sets: Sequence[CurveSet], out: Path) -> List[Path]:
    directory = out / "curves"
    directory.mkdir(parents=True, exist_ok=True)
    written = [_write(directory / f"{c.scenario}.json", c.save) for c in curve_sets]

    supply, aggregate = curve_frames(curve_sets)
    written.append(_write_csv(supply, out / SUPPLY_CURVES))
    written.append(_write_csv(aggregate, out / AGGREGATE_CURVES))
    return written


def read_supply_curves(path: Path) -> Dict[Tuple[str, AssetClass], OfferCurve]:
    """Offer curves of a supply-curve table, keyed by scenario and asset class"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise ConfigurationError(f"Failed to read supply curves {path}: {e}") from e

    curves = {}
    for (scenario, asset), rows in frame.groupby(["scenario", "asset"], sort=False):
        grid = PriceGrid(
            levels=tuple(float(p) for p in rows["price"]),
            ceiling=float(rows["ceiling"].iloc[0]),
        )
        curves[(scenario, AssetClass(asset))] = OfferCurve.of(grid, rows["capacity"])
    return curves


def write_equilibria(table: EquilibriumTable, out: Path) -> List[Path]:
    out.mkdir(parents=True, exist_ok=True)
    return [
        _write_csv(table.to_frame(), out / EQUILIBRIA_CSV),
        _write(out / EQUILIBRIA_JSON, table.save),
    ]


def summary(report: Report) -> Dict[str, Any]:
    rows = report.table.rows
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "games": len(rows),
        "failed": sum(1 for r in rows if r["error"]),
        "converged": sum(1 for r in rows if r["converged"]),
        "true_prices": {c.scenario: c.true_price for c in report.curve_sets},
        "mean_prices": {s.series: s.mean for s in report.stats},
        "dso_benefit": {c.series: c.dso_benefit for c in report.costs},
    }


def emit(report: Report, out: Path) -> List[Path]:
    """Write the report tables and the summary to `out`"""
    out.mkdir(parents=True, exist_ok=True)
    providers = pd.DataFrame(
        [{"scenario": scenario, **asdict(share)} for scenario, share in report.providers],
        columns=["scenario", "provider", "capacity", "revenue", "cost", "profit"],
    )
    return [
        _write_csv(pd.DataFrame([asdict(s) for s in report.stats]), out / PRICE_STATS),
        _write_csv(pd.DataFrame([c.to_record() for c in report.costs]), out / COST_BENEFIT),
        _write_csv(providers, out / PROVIDERS),
        _write_csv(pd.DataFrame([c.to_record() for c in report.comparison]), out / COMPARISON),
        _write_json(summary(report), out / SUMMARY),
    ]
