import numpy as np
import pytest

from flexmarket.asset import FLEX
from flexmarket.errors import ConfigurationError, ModelInfeasibleError
from flexmarket.heat_pump import (
    MAX_COMFORT_DEVIATION,
    DwellingParams,
    HeatPumpModel,
    HpScenario,
    hp_flexibility,
)
from flexmarket.piecewise import PiecewiseSpec, linearize_quadratic
from flexmarket.timegrid import Profile, TimeGrid, Unit, Window

HOURLY = TimeGrid(step_hours=1.0, horizon_hours=4.0)
THIRD_HOUR = Window(start_index=2, end_index=2, step_hours=1.0)
DETACHED = DwellingParams(name="detached", share=1.0, conductance=0.0002, capacitance=0.01)


@pytest.fixture()
def homes():
    def make(**overrides):
        params = dict(
            n_hp=100,
            dwellings=(DETACHED,),
            tariff=Profile.constant(100.0, HOURLY, Unit.GBP_PER_MWH),
            ambient=Profile.constant(5.0, HOURLY, Unit.CELSIUS),
            grid=HOURLY,
        )
        params.update(overrides)
        return HpScenario(**params)

    return make


def test_expected_demand(homes):
    model = HeatPumpModel(homes(), THIRD_HOUR)

    # 100 homes · 0.2 kW/°C / 3 · (20 - 5) °C
    assert list(model.expected_demand()) == pytest.approx([0.1] * 4)
    assert model.installed_capability() == pytest.approx(0.1)


def test_default_rating(homes):
    # sized to hold 22 °C at -5 °C ambient
    assert homes().rating(0) == pytest.approx(0.0002 * 27 / 3)


@pytest.mark.parametrize("price", [1.0, 50.0])
def test_flexibility_bounded_by_expected_demand(homes, price):
    result = hp_flexibility(homes(), price, THIRD_HOUR)

    assert -1e-9 <= result.flexible_capacity <= 0.1 + 1e-9
    assert result.details["max_deviation[detached]"] >= 0.0


def test_thermal_schedule_is_consistent(homes):
    result = hp_flexibility(homes(), 50.0, THIRD_HOUR)
    temperature = result.schedule["temperature[detached]"]
    power = result.schedule["power[detached]"]

    decay, gain, leak = 1 - 0.0002 / 0.01, 3 / 0.01, 0.0002 / 0.01
    for t in range(4):
        expected = decay * temperature[t] + gain * power[t] + leak * 5.0
        assert temperature[(t + 1) % 4] == pytest.approx(expected, abs=1e-7)


def test_undersized_rating(homes):
    with pytest.raises(ModelInfeasibleError, match="below the comfort band"):
        hp_flexibility(homes(ratings=(0.0001,)), 10.0, THIRD_HOUR)


@pytest.mark.parametrize(
    "overrides",
    [
        {"n_hp": -1},
        {"dwellings": ()},
        {"dwellings": (DwellingParams("a", 0.5, 0.0002, 0.01),)},
        {"comfort_band": (22.0, 18.0)},
        {"conversion": 5.0},
        {"peak_factor": 0.5},
        {"ratings": (0.001, 0.002)},
        {"ambient": Profile.constant(5.0, TimeGrid(), Unit.CELSIUS)},
    ],
)
def test_invalid_scenario(homes, overrides):
    with pytest.raises(ConfigurationError):
        homes(**overrides)


def test_invalid_dwelling():
    with pytest.raises(ConfigurationError):
        DwellingParams(name="flat", share=1.0, conductance=0.0, capacitance=0.01)


def test_flexibility_variable_bounded_by_capability(homes):
    model = HeatPumpModel(homes(), THIRD_HOUR)

    assert model.program.variable(FLEX).upper == pytest.approx(0.1)


def test_reference_load(homes):
    model = HeatPumpModel(homes(), THIRD_HOUR)
    reference = model.reference_load()

    assert reference.shape == (1,)
    # a flat tariff keeps the dwellings near the bottom of the comfort band
    assert 0.08 < reference[0] < 0.1


@pytest.mark.parametrize("price", [30.0, 80.0])
def test_flexibility_bounded_by_reference_load(homes, price):
    model = HeatPumpModel(homes(), THIRD_HOUR)
    result, _ = model.solve(price)

    assert result.flexible_capacity == pytest.approx(model.reference_load()[0], abs=1e-7)
    assert result.schedule["power[detached]"][2] == pytest.approx(0.0, abs=1e-9)


def _linearized_square(x, cuts):
    out = np.zeros_like(x)
    for cut in cuts:
        out = np.maximum(out, cut.slope * x + cut.intercept)
    return out


def _best_discrete_schedule(scenario, ceiling, price, levels):
    """Exhaustive search over per-household power levels on the hourly grid"""
    d = scenario.dwellings[0]
    households = scenario.n_hp
    leak = d.conductance / d.capacitance
    decay, gain = 1 - leak, scenario.conversion / d.capacitance
    low, high = scenario.comfort_band

    axes = [np.linspace(0.0, scenario.rating(0), levels)] * 4
    power = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    heat = gain * power + leak * scenario.ambient.array
    tau = np.empty_like(power)
    tau[:, 0] = sum(decay ** (3 - t) * heat[:, t] for t in range(4)) / (1 - decay**4)
    for t in range(3):
        tau[:, t + 1] = decay * tau[:, t] + heat[:, t]

    cuts = linearize_quadratic(1.0, PiecewiseSpec().over(0.0, MAX_COMFORT_DEVIATION))
    deviation = _linearized_square(np.maximum(tau - high, 0.0), cuts) + _linearized_square(
        np.maximum(low - tau, 0.0), cuts
    )
    penalty = households * scenario.penalty / 2 * deviation.sum(axis=1)
    cost = households * power @ scenario.tariff.array
    flex = ceiling - households * power[:, 2]

    peak = scenario.peak_factor / 4 * power.sum(axis=1, keepdims=True)
    feasible = (flex >= -1e-12) & np.all(power <= peak + 1e-12, axis=1)
    objective = np.where(feasible, price * flex - cost - penalty, -np.inf)
    best = int(np.argmax(objective))
    return objective[best], flex[best]


@pytest.mark.parametrize("price", [30.0, 80.0])
def test_matches_exhaustive_search(homes, price):
    levels = 21
    scenario = homes()
    model = HeatPumpModel(scenario, THIRD_HOUR)
    ceiling = min(model.installed_capability(), model.reference_load()[0])

    result, _ = model.solve(price)
    objective, flex = _best_discrete_schedule(scenario, ceiling, price, levels)

    # raising the optimal powers to the next level costs at most one step of energy per hour
    step = scenario.rating(0) / (levels - 1)
    tolerance = scenario.n_hp * 100.0 * step * 4
    assert objective <= result.objective + 1e-7
    assert result.objective <= objective + tolerance
    assert result.flexible_capacity == pytest.approx(flex, abs=scenario.n_hp * step)
