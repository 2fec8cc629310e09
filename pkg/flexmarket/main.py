import logging
import os
from functools import wraps
from pathlib import Path
from typing import List, Optional, Sequence

import click
import click_log

from .agents import Strategy, parse_agent_counts
from .errors import ConfigurationError, FlexMarketError
from .flexibility import CurveSet, case_curves, load_curve_sets
from .game import DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS, EquilibriumTable, sweep
from .logging import get_logger
from .market import Mechanism
from .offer_curve import PriceGrid
from .piecewise import PiecewiseSpec
from .reporting import build_report, emit, write_curves, write_equilibria
from .scenario import BUNDLED_SCENARIOS, load_scenarios, scenario_summary

NOT_CONVERGED = 2
SWEEP_STRATEGIES = (Strategy.OVERPRICING, Strategy.UNDERSTATEMENT, Strategy.UNDERBIDDING)
DEFAULT_AGENTS = "3,6,9,12"


def verbosity_option(logger: logging.Logger, *names, **kwargs):
    if not names:
        names = ["-v", "--verbose"]
    syntax_desc = (
        "list of [LOGGER=]LEVEL items, "
        "where LEVEL is one of CRITICAL, ERROR, WARNING, INFO or DEBUG"
    )
    kwargs.setdefault("default", "INFO")
    kwargs.setdefault("metavar", "LEVEL")
    kwargs.setdefault("expose_value", False)
    kwargs.setdefault("help", f"A {syntax_desc}.")
    kwargs.setdefault("is_eager", True)

    def decorator(f):
        def _set_log_levels(_ctx, _param, value: str):
            for item in value.split(","):
                try:
                    name, level = item.split("=", maxsplit=1)
                    target_logger = logger.getChild(name)
                except ValueError:
                    level = item
                    target_logger = logger

                logging_level = getattr(logging, level.upper(), None)
                if logging_level is None:
                    raise click.BadParameter(f"Must be a {syntax_desc}, not {item!r}")

                target_logger.setLevel(logging_level)

        return click.option(*names, callback=_set_log_levels, **kwargs)(f)

    return decorator


root_logger = get_logger()

click_log.basic_config(root_logger)
root_logger.handlers[0].formatter = logging.Formatter(
    fmt="[%(asctime)s] [%(levelname)-5s] [%(name)-20s] %(message)s"
)

CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])


def reports_errors(f):
    """Turn flexmarket errors into a one-line message and exit code 1"""

    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except FlexMarketError as e:
            raise click.ClickException(str(e)) from e

    return wrapper


class BadFlag(click.BadParameter):
    # exit code 2 is reserved for games that did not converge
    exit_code = 1


def _parse_with(parse):
    def callback(_ctx, _param, value):
        if value is None:
            return None
        try:
            return parse(value)
        except FlexMarketError as e:
            raise BadFlag(str(e)) from e

    return callback


jobs_option = click.option(
    "--jobs",
    "-j",
    type=click.IntRange(min=1),
    default=lambda: os.cpu_count() or 1,
    show_default="number of cores",
    help="Number of worker processes.",
)
out_option = click.option(
    "--out",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("out"),
    show_default=True,
    help="Output directory.",
)


@click.group(context_settings=CONTEXT_SETTINGS)
@verbosity_option(root_logger)
def main():
    """Demand-side flexibility markets: offer curves, bidding games and reports."""


def _curves(scenarios: Sequence[str], prices, segments, jobs, out: Path) -> List[CurveSet]:
    cases = load_scenarios(list(scenarios))
    curve_sets = case_curves(cases, prices=prices, segments=segments, jobs=jobs)
    write_curves(curve_sets, out)

    for case, curves in zip(cases, curve_sets):
        summary = scenario_summary(case)
        click.echo(
            f"{curves.scenario}: {summary['heat_pumps']} HPs, "
            f"{summary['electric_vehicles']} EVs, "
            f"{summary['storage_kw']:g} kW EES, {summary['industrial_kw']:g} kW I&C"
        )
        for asset, curve in curves.curves.items():
            click.echo(f"  {asset.value:<12} {curve.max_capacity:8.3f} MW")
        click.echo(
            f"  {'aggregate':<12} {curves.aggregate.max_capacity:8.3f} MW, "
            f"true equilibrium price {curves.true_price:g} £/MW/h"
        )
    return curve_sets


def _price_range(text: str) -> str:
    PriceGrid.parse(text)
    return text


scenario_option = click.option(
    "--scenario",
    "-s",
    "scenarios",
    multiple=True,
    default=BUNDLED_SCENARIOS,
    show_default=True,
    help="Bundled scenario name or path to a scenario document; repeatable.",
)
prices_option = click.option(
    "--prices",
    "-p",
    callback=_parse_with(_price_range),
    help="Availability fees as LO..HI[:STEP] in £/MW/h [default: 1..ceiling].",
)
segments_option = click.option(
    "--segments",
    type=click.IntRange(min=2),
    default=PiecewiseSpec.segment_count,
    show_default=True,
    help="Linearization segments of quadratic costs.",
)


@main.command()
@scenario_option
@prices_option
@segments_option
@jobs_option
@out_option
@reports_errors
def curves(scenarios, prices, segments, jobs, out):
    """Generate the offer curves of every asset class."""
    _curves(scenarios, prices, segments, jobs, out)


def _game(
    curve_sets: Sequence[CurveSet],
    mechanism: Optional[Mechanism],
    strategy: Optional[Strategy],
    agents,
    run_sweep: bool,
    epsilon: float,
    max_iterations: int,
    jobs: int,
    out: Path,
    replay: bool,
) -> EquilibriumTable:
    if run_sweep and (mechanism is not None or strategy is not None):
        raise ConfigurationError(
            "--sweep plays every mechanism and strategy, drop --mechanism and --strategy"
        )
    if not run_sweep and (mechanism is None or strategy is None):
        raise ConfigurationError("Give --mechanism and --strategy, or --sweep")

    mechanisms = list(Mechanism) if run_sweep else [mechanism]
    strategies = list(SWEEP_STRATEGIES) if run_sweep else [strategy]

    replay_dir = None
    if replay:
        replay_dir = out / "replay"
        replay_dir.mkdir(parents=True, exist_ok=True)

    table = sweep(
        curve_sets,
        mechanisms,
        strategies,
        agents,
        epsilon=epsilon,
        max_iterations=max_iterations,
        jobs=jobs,
        replay_dir=replay_dir,
    )
    write_equilibria(table, out)

    for row in table.rows:
        cell = f"{row['scenario']:<4} {row['mechanism']:<4} {row['strategy']:<8} {row['agents']:>3}"
        if row["error"]:
            click.echo(f"{cell}  failed: {row['error'].splitlines()[0]}")
        else:
            mark = "" if row["converged"] else "  (not converged)"
            click.echo(
                f"{cell}  {row['price']:6g} £/MW/h (true {row['true_price']:g}), "
                f"{row['iterations']} rounds{mark}"
            )
    return table


game_options = [
    click.option(
        "--mechanism",
        "-m",
        callback=_parse_with(Mechanism.parse),
        help="Market clearing mechanism: pab, pac, dra or vcg.",
    ),
    click.option(
        "--strategy",
        callback=_parse_with(Strategy.parse),
        help="Bidding strategy of all agents: op, us, ub or truthful.",
    ),
    click.option(
        "--agents",
        "-a",
        default=DEFAULT_AGENTS,
        show_default=True,
        callback=_parse_with(parse_agent_counts),
        help="Total numbers of agents, comma separated.",
    ),
    click.option("--sweep", "run_sweep", is_flag=True, help="Play all mechanisms and strategies."),
    click.option(
        "--epsilon",
        type=click.FloatRange(min=0, min_open=True),
        default=DEFAULT_EPSILON,
        show_default=True,
        help="Convergence tolerance on the offer changes of a round.",
    ),
    click.option(
        "--max-iterations",
        type=click.IntRange(min=1),
        default=DEFAULT_MAX_ITERATIONS,
        show_default=True,
    ),
    click.option("--replay", is_flag=True, help="Write a JSON-lines log of every game."),
]


def with_options(options):
    def decorator(f):
        for option in reversed(options):
            f = option(f)
        return f

    return decorator


@main.command()
@click.option(
    "--curves",
    "-c",
    "curve_paths",
    multiple=True,
    type=click.Path(exists=True, path_type=Path),
    help="Curve file or directory of curve files [default: OUT/curves].",
)
@with_options(game_options)
@jobs_option
@out_option
@click.pass_context
@reports_errors
def game(
    ctx,
    curve_paths,
    mechanism,
    strategy,
    agents,
    run_sweep,
    epsilon,
    max_iterations,
    replay,
    jobs,
    out,
):
    """Play the bidding game on generated offer curves."""
    curve_sets = load_curve_sets(curve_paths or [out / "curves"])
    table = _game(
        curve_sets,
        mechanism,
        strategy,
        agents,
        run_sweep,
        epsilon,
        max_iterations,
        jobs,
        out,
        replay,
    )
    _exit_status(ctx, table)


def _exit_status(ctx: click.Context, table: EquilibriumTable) -> None:
    if table.failed:
        raise click.ClickException(f"{len(table.failed)} of {len(table)} games failed")
    if not table.all_converged:
        ctx.exit(NOT_CONVERGED)


def _report(table: EquilibriumTable, curve_sets: Sequence[CurveSet], out: Path) -> None:
    report = build_report(table, curve_sets)
    emit(report, out)
    for s in report.stats:
        click.echo(
            f"{s.series:<14} mean {s.mean:6.2f}  median {s.median:6.2f}  "
            f"[{s.min:g}, {s.max:g}] £/MW/h"
        )


@main.command()
@click.option(
    "--table",
    "-t",
    "table_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Equilibrium table [default: OUT/equilibria.json].",
)
@click.option(
    "--curves",
    "-c",
    "curve_paths",
    multiple=True,
    type=click.Path(exists=True, path_type=Path),
    help="Curve file or directory of curve files [default: OUT/curves].",
)
@out_option
@reports_errors
def report(table_path, curve_paths, out):
    """Price statistics, cost-benefit figures and the comparison table."""
    table = EquilibriumTable.load(table_path or out / "equilibria.json")
    _report(table, load_curve_sets(curve_paths or [out / "curves"]), out)


@main.command()
@scenario_option
@prices_option
@segments_option
@click.option(
    "--agents",
    "-a",
    default=DEFAULT_AGENTS,
    show_default=True,
    callback=_parse_with(parse_agent_counts),
    help="Total numbers of agents, comma separated.",
)
@click.option("--replay", is_flag=True, help="Write a JSON-lines log of every game.")
@jobs_option
@out_option
@click.pass_context
@reports_errors
def run(ctx, scenarios, prices, segments, agents, replay, jobs, out):
    """Curves, full game sweep and report in one go."""
    curve_sets = _curves(scenarios, prices, segments, jobs, out)
    table = _game(
        curve_sets,
        None,
        None,
        agents,
        True,
        DEFAULT_EPSILON,
        DEFAULT_MAX_ITERATIONS,
        jobs,
        out,
        replay,
    )
    _report(table, curve_sets, out)
    _exit_status(ctx, table)
