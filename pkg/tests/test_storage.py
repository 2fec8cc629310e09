import numpy as np
import pytest

from flexmarket.branch_bound import solve_milp
from flexmarket.errors import ConfigurationError, ModelInfeasibleError
from flexmarket.storage import (
    CycleSegment,
    EesScenario,
    StorageModel,
    default_cycle_table,
    ees_flexibility,
)
from flexmarket.timegrid import Profile, TimeGrid, Unit, Window

HOURLY = TimeGrid(step_hours=1.0, horizon_hours=4.0)
THIRD_HOUR = Window(start_index=2, end_index=2, step_hours=1.0)


@pytest.fixture()
def battery():
    def make(**overrides):
        params = dict(
            power=1.0,
            energy=2.0,
            tariff=Profile.constant(0.0, HOURLY, Unit.GBP_PER_MWH),
            grid=HOURLY,
        )
        params.update(overrides)
        return EesScenario(**params)

    return make


def test_high_fee_offers_full_power(battery):
    result = ees_flexibility(battery(), 1000.0, THIRD_HOUR)

    assert result.flexible_capacity == pytest.approx(1.0)
    assert result.schedule["energy"][0] == pytest.approx(result.schedule["energy"][-1])


def test_dod_within_selected_segment(battery):
    scenario = battery()
    result = ees_flexibility(scenario, 1000.0, THIRD_HOUR)
    segment = scenario.cycle_table[int(result.details["segment"])]

    assert segment.dod_low - 1e-9 <= result.details["dod"] <= segment.dod_high + 1e-9
    assert result.details["cycle_cost"] == pytest.approx(scenario.cycle_cost(segment))


def test_capability_is_power(battery):
    model = StorageModel(battery(power=0.236, energy=0.472), THIRD_HOUR)

    assert model.installed_capability() == 0.236


def test_default_cycle_table():
    table = default_cycle_table()

    assert len(table) == 10
    assert (table[0].dod_low, table[-1].dod_high) == (0.0, 1.0)
    assert (table[0].cycles, table[-1].cycles) == (13660, 3490)


def test_cycle_cost(battery):
    scenario = battery()

    # 2 MWh at 100 £/kWh over 13660 cycles
    assert scenario.cycle_cost(scenario.cycle_table[0]) == pytest.approx(2.0 * 100_000 / 13660)


def test_power_without_energy(battery):
    with pytest.raises(ModelInfeasibleError):
        ees_flexibility(battery(energy=0.0), 10.0, THIRD_HOUR)


@pytest.mark.parametrize(
    "table",
    [
        (),
        (CycleSegment(0.0, 0.5, 100), CycleSegment(0.6, 1.0, 50)),
        (CycleSegment(0.0, 0.5, 100), CycleSegment(0.5, 1.0, 200)),
        (CycleSegment(0.1, 1.0, 100),),
    ],
)
def test_invalid_cycle_table(battery, table):
    with pytest.raises(ConfigurationError):
        battery(cycle_table=table)


@pytest.mark.parametrize(
    "overrides", [{"power": -1.0}, {"charge_efficiency": 0.0}, {"capex": -1.0}]
)
def test_invalid_scenario(battery, overrides):
    with pytest.raises(ConfigurationError):
        battery(**overrides)


@pytest.mark.parametrize("seed", range(20))
def test_milp_matches_segment_enumeration(seed):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(step_hours=1.0, horizon_hours=6.0)
    start = int(rng.integers(0, 5))
    scenario = EesScenario(
        power=float(rng.uniform(0.5, 2.0)),
        energy=float(rng.uniform(0.5, 3.0)),
        tariff=Profile.of(rng.uniform(20.0, 150.0, size=6), Unit.GBP_PER_MWH),
        grid=grid,
    )
    model = StorageModel(scenario, Window.on(grid, start, start + 1))
    result, _ = model.solve(float(rng.uniform(0.0, 100.0)))

    best = -np.inf
    for chosen in [None, *range(len(scenario.cycle_table))]:
        fixed = model.program.with_bounds(
            {
                f"alpha[{i}]": (1.0, 1.0) if i == chosen else (0.0, 0.0)
                for i in range(len(scenario.cycle_table))
            }
        )
        solution = solve_milp(fixed)
        if solution.is_optimal:
            best = max(best, solution.objective)

    assert result.objective == pytest.approx(best, abs=1e-5)


def test_idle_battery_pays_no_degradation(battery):
    result = ees_flexibility(battery(), 0.0, THIRD_HOUR)

    assert result.flexible_capacity == pytest.approx(0.0, abs=1e-9)
    assert result.objective == pytest.approx(0.0, abs=1e-9)
    assert result.details["segment"] == -1.0
    assert result.details["cycle_cost"] == 0.0


def test_shallow_cycle_is_not_free(battery):
    # a 10 % cycle costs 2 MWh * 100 £/kWh / 13660, more than 0.195 MW at 10 £/MW/h earns
    result = ees_flexibility(battery(), 10.0, THIRD_HOUR)

    assert result.flexible_capacity == pytest.approx(0.0, abs=1e-9)
    assert result.details["cycle_cost"] == 0.0
