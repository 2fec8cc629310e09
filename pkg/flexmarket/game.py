"""Iterative multi-agent bidding game.

Every round the agents' offers are cleared and settled, the outcome is
published and each agent revises its offers with its strategy.  The game
ends when the applied offer changes vanish, when a strategy state repeats,
or after a fixed number of rounds.
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .agents import (
    AgentState,
    Portfolio,
    RoundOutcome,
    Strategy,
    distribute,
    initial_state,
    offer_book_rows,
    represented_providers,
    split_agents,
    step,
    true_cost,
)
from .errors import ConfigurationError, SchemaVersionError, describe_exception
from .flexibility import CurveSet
from .logging import get_logger
from .market import (
    CAPACITY_TOLERANCE,
    ClearingResult,
    Mechanism,
    OfferBook,
    ServiceRequirement,
    Settlement,
    clear,
    demand_met_schedule,
    settle,
)
from .offer_curve import PriceGrid
from .timegrid import Window

logger = get_logger(__name__)

DEFAULT_EPSILON = 1e-3
DEFAULT_MAX_ITERATIONS = 500
DEFAULT_CYCLE_WINDOW = 50
TABLE_SCHEMA_VERSION = 1

ROW_FIELDS = (
    "scenario",
    "mechanism",
    "strategy",
    "agents",
    "price",
    "true_price",
    "lmp",
    "iterations",
    "converged",
    "cycle",
    "unmet",
    "dso_payment",
    "provider_cost",
    "error",
)


@dataclass(frozen=True)
class GameConfig:
    mechanism: Mechanism
    strategy: Strategy
    agents: int
    requirement: ServiceRequirement
    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    cycle_window: int = DEFAULT_CYCLE_WINDOW

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"Convergence tolerance must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ConfigurationError(
                f"Need at least one iteration, got max_iterations={self.max_iterations}"
            )
        if self.agents < 1:
            raise ConfigurationError(f"Need at least one agent, got {self.agents}")

    def portfolios(self, curves: CurveSet) -> List[Portfolio]:
        providers = represented_providers(curves.curves)
        if not providers:
            raise ConfigurationError(f"{curves.scenario}: no asset class offers any capacity")
        return distribute(split_agents(self.agents, providers), curves.curves)


@dataclass(frozen=True)
class Equilibrium:
    config: GameConfig
    states: Tuple[AgentState, ...]  # after the final round; its cleared offers are in `book`
    book: OfferBook
    result: ClearingResult
    settlement: Settlement
    iterations: int
    converged: bool
    cycle: bool = False

    @property
    def lmp(self) -> float:
        return self.result.price

    @property
    def price(self) -> float:
        """λ under uniform pricing and VCG, the highest accepted offer price otherwise"""
        if not self.config.mechanism.is_discriminatory:
            return self.result.price
        taken = self.result.accepted > CAPACITY_TOLERANCE
        if not np.any(taken):
            return self.result.price
        return float(self.book.prices[taken].max())

    @property
    def provider_cost(self) -> float:
        """True cost (£ per day) of all accepted capacity"""
        hours = self.config.requirement.duration_hours
        return math.fsum(
            true_cost(state, self.result.accepted_of(state.agent)) * hours
            for state in self.states
        )

    def profits(self) -> Dict[str, float]:
        return {s.agent: s.profits[-1] if s.profits else 0.0 for s in self.states}


def _state_key(states: Sequence[AgentState]) -> Tuple:
    return tuple(
        (
            tuple(round(p, 9) for p in s.prices),
            tuple(round(c, 9) for c in s.capacities),
            round(s.price_step, 12),
            round(s.capacity_step, 12),
            round(s.previous_profit, 9),
            s.initialized,
        )
        for s in states
    )


def _change_norm(states: Sequence[AgentState]) -> float:
    prices = np.array([s.price_change for s in states])
    capacities = np.array([s.capacity_change for s in states])
    return float(np.linalg.norm(prices) + np.linalg.norm(capacities))


class ReplayLog:
    """Per-round record of a game, written as JSON lines.

    The first line describes the game (requirement, price grid and the true
    prices of every agent); each following line holds one agent in one round.
    """

    def __init__(self):
        self.records: List[Dict[str, Any]] = []

    def header(self, config: GameConfig, grid: PriceGrid, states: Sequence[AgentState]):
        window = config.requirement.window
        self.records.append(
            {
                "mechanism": config.mechanism.value,
                "strategy": config.strategy.value,
                "demand": config.requirement.demand,
                "ceiling": config.requirement.ceiling,
                "window": [window.start_index, window.end_index, window.step_hours],
                "levels": list(grid.levels),
                "true_prices": {s.agent: list(s.true_prices) for s in states},
            }
        )

    def round(
        self,
        iteration: int,
        outcome: RoundOutcome,
        states: Sequence[AgentState],
        next_states: Sequence[AgentState],
    ):
        for state, after in zip(states, next_states):
            self.records.append(
                {
                    "iteration": iteration,
                    "agent": state.agent,
                    "prices": list(state.prices),
                    "capacities": list(state.capacities),
                    "accepted": outcome.result.accepted_of(state.agent).tolist(),
                    "payment": outcome.settlement.payment_of(state.agent),
                    "lmp": outcome.price,
                    "profit": after.profits[-1],
                }
            )

    def lines(self) -> List[str]:
        return [json.dumps(r, sort_keys=True) for r in self.records]

    def write(self, path: Path) -> None:
        path.write_text("".join(f"{line}\n" for line in self.lines()))


def replay_profits(lines: Iterable[str]) -> List[Dict[str, float]]:
    """Re-clear and re-settle every logged round; profits per round and agent"""
    records = [json.loads(line) for line in lines if line.strip()]
    if not records:
        raise ConfigurationError("Empty replay log")
    header, rounds = records[0], records[1:]

    grid = PriceGrid(levels=tuple(header["levels"]), ceiling=header["ceiling"])
    start, end, step_hours = header["window"]
    requirement = ServiceRequirement(
        demand=header["demand"],
        ceiling=header["ceiling"],
        window=Window(start_index=start, end_index=end, step_hours=step_hours),
    )
    mechanism = Mechanism.parse(header["mechanism"])
    true_prices = {a: np.asarray(p) for a, p in header["true_prices"].items()}

    by_iteration: Dict[int, List[Dict[str, Any]]] = {}
    for record in rounds:
        by_iteration.setdefault(record["iteration"], []).append(record)

    profits = []
    for iteration in sorted(by_iteration):
        entries = by_iteration[iteration]
        book = OfferBook(
            grid,
            [e["agent"] for e in entries],
            [e["capacities"] for e in entries],
            [e["prices"] for e in entries],
        )
        settlement = settle(clear(book, requirement), book, mechanism)
        profits.append(
            {
                agent: settlement.payment_of(agent)
                - math.fsum(settlement.accepted_of(agent) * true_prices[agent])
                for agent in book.agents
            }
        )
    return profits


def run_game(
    config: GameConfig,
    portfolios: Sequence[Portfolio],
    replay: Optional[ReplayLog] = None,
) -> Equilibrium:
    if not portfolios:
        raise ConfigurationError("A game needs at least one agent")
    grid = portfolios[0].curve.grid
    requirement = config.requirement

    states = [initial_state(p, config.strategy, requirement.ceiling) for p in portfolios]
    if replay is not None:
        replay.header(config, grid, states)
    seen: Dict[Tuple, int] = {}

    converged = cycle = False
    iteration = 0
    while True:
        iteration += 1
        book = OfferBook(grid, *offer_book_rows(states))
        result = clear(book, requirement)
        settlement = settle(result, book, config.mechanism)
        outcome = RoundOutcome(result, settlement, demand_met_schedule(result, book))

        next_states = [step(s, outcome) for s in states]
        if replay is not None:
            replay.round(iteration, outcome, states, next_states)

        change = _change_norm(next_states)
        logger.debug(
            f"{config.mechanism.value}/{config.strategy.value} round {iteration}: "
            f"λ={result.price:g}, change {change:.3g}"
        )
        if change <= config.epsilon:
            converged = True
            break

        key = _state_key(next_states)
        if key in seen and iteration - seen[key] <= config.cycle_window:
            logger.warning(
                f"{config.mechanism.value}/{config.strategy.value} with {config.agents} agents: "
                f"offers repeat the state of round {seen[key]} in round {iteration}"
            )
            cycle = True
            break
        seen[key] = iteration

        if iteration >= config.max_iterations:
            break
        states = next_states

    return Equilibrium(
        config=config,
        states=tuple(next_states),
        book=book,
        result=result,
        settlement=settlement,
        iterations=iteration,
        converged=converged,
        cycle=cycle,
    )


@dataclass(frozen=True)
class SweepCell:
    curves: CurveSet
    mechanism: Mechanism
    strategy: Strategy
    agents: int
    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    replay_dir: Optional[Path] = None

    @property
    def label(self) -> str:
        return f"{self.curves.scenario}-{self.mechanism.value}-{self.strategy.value}-{self.agents}"

    def run(self) -> Dict[str, Any]:
        row: Dict[str, Any] = dict.fromkeys(ROW_FIELDS)
        row.update(
            scenario=self.curves.scenario,
            mechanism=self.mechanism.value,
            strategy=self.strategy.value,
            agents=self.agents,
            true_price=self.curves.true_price,
            converged=False,
            cycle=False,
            error="",
        )
        try:
            config = GameConfig(
                mechanism=self.mechanism,
                strategy=self.strategy,
                agents=self.agents,
                requirement=self.curves.requirement,
                epsilon=self.epsilon,
                max_iterations=self.max_iterations,
            )
            replay = ReplayLog() if self.replay_dir is not None else None
            equilibrium = run_game(config, config.portfolios(self.curves), replay)
            if replay is not None:
                replay.write(self.replay_dir / f"{self.label}.jsonl")
        except Exception as e:
            row["error"] = describe_exception(e)
            return row

        row.update(
            price=equilibrium.price,
            lmp=equilibrium.lmp,
            iterations=equilibrium.iterations,
            converged=equilibrium.converged,
            cycle=equilibrium.cycle,
            unmet=equilibrium.result.unmet,
            dso_payment=equilibrium.settlement.dso_payment,
            provider_cost=equilibrium.provider_cost,
        )
        return row


def _run_cell(cell: SweepCell) -> Dict[str, Any]:
    return cell.run()


@dataclass(frozen=True)
class EquilibriumTable:
    rows: Tuple[Dict[str, Any], ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def failed(self) -> List[Dict[str, Any]]:
        return [r for r in self.rows if r["error"]]

    @property
    def all_converged(self) -> bool:
        return all(r["converged"] for r in self.rows if not r["error"])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=list(ROW_FIELDS))

    def to_dict(self) -> Dict[str, Any]:
        return {"schema_version": TABLE_SCHEMA_VERSION, "rows": list(self.rows)}

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @staticmethod
    def from_dict(data: Mapping[str, Any], source: Optional[str] = None) -> "EquilibriumTable":
        version = data.get("schema_version")
        if version != TABLE_SCHEMA_VERSION:
            raise SchemaVersionError(found=version, expected=TABLE_SCHEMA_VERSION, path=source)
        rows = data.get("rows")
        if not isinstance(rows, list) or any(set(ROW_FIELDS) - set(r) for r in rows):
            where = source if source is not None else "<table>"
            raise ConfigurationError(f"{where}: malformed equilibrium table")
        return EquilibriumTable(rows=tuple({k: r[k] for k in ROW_FIELDS} for r in rows))

    @staticmethod
    def load(path: Path) -> "EquilibriumTable":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Failed to read equilibrium table {path}: {e}") from e
        return EquilibriumTable.from_dict(data, source=str(path))


def sweep(
    curve_sets: Sequence[CurveSet],
    mechanisms: Sequence[Mechanism],
    strategies: Sequence[Strategy],
    agent_counts: Sequence[int],
    *,
    epsilon: float = DEFAULT_EPSILON,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    jobs: int = 1,
    replay_dir: Optional[Path] = None,
) -> EquilibriumTable:
    """Play every combination of scenario, mechanism, strategy and agent count.

    Rows follow the order of the cross product. A failing cell keeps its row
    with the error message; the remaining cells still run.
    """
    if jobs < 1:
        raise ConfigurationError(f"Number of jobs must be positive, got {jobs}")
    cells = [
        SweepCell(curves, mechanism, strategy, agents, epsilon, max_iterations, replay_dir)
        for curves in curve_sets
        for mechanism in mechanisms
        for strategy in strategies
        for agents in agent_counts
    ]

    if jobs == 1 or len(cells) <= 1:
        rows = [cell.run() for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(_run_cell, cells))

    for cell, row in zip(cells, rows):
        if row["error"]:
            logger.error(f"Game {cell.label} failed:\n{row['error']}")
        elif not row["converged"]:
            logger.warning(
                f"Game {cell.label} did not converge after {row['iterations']} rounds"
            )
        else:
            logger.debug(f"Game {cell.label}: {row['price']:g} £/MW/h")

    table = EquilibriumTable(rows=tuple(rows))
    logger.info(
        f"Played {len(table)} games, {len(table.failed)} failed, "
        f"{'all' if table.all_converged else 'not all'} converged"
    )
    return table

