import itertools

import pytest

from flexmarket.errors import ConfigurationError, ModelInfeasibleError
from flexmarket.ev_charging import EvChargingModel, EvScenario, ev_flexibility
from flexmarket.piecewise import PiecewiseSpec, evaluate_cuts, linearize_quadratic
from flexmarket.timegrid import Profile, TimeGrid, Unit, Window

HOURLY = TimeGrid(step_hours=1.0, horizon_hours=4.0)
THIRD_HOUR = Window(start_index=2, end_index=2, step_hours=1.0)


@pytest.fixture()
def fleet():
    def make(share=1.0, uncontrolled=0.012, **overrides):
        params = dict(
            n_ev=10,
            charger_capacity=0.06,
            plug_share=Profile.constant(share, HOURLY, Unit.PU),
            daily_energy=0.048,
            uncontrolled_demand=Profile.constant(uncontrolled, HOURLY, Unit.MW),
            tariff=Profile.constant(0.0, HOURLY, Unit.GBP_PER_MWH),
            departure_window=Window(start_index=0, end_index=0, step_hours=1.0),
            grid=HOURLY,
        )
        params.update(overrides)
        return EvScenario(**params)

    return make


def test_flexibility_limited_by_uncontrolled_demand(fleet):
    result = ev_flexibility(fleet(), 100.0, THIRD_HOUR)

    assert result.flexible_capacity == pytest.approx(0.012, abs=1e-9)
    assert result.schedule["terminal_power"][2] == pytest.approx(0.0, abs=1e-9)


def test_daily_energy_delivered(fleet):
    result = ev_flexibility(fleet(), 100.0, THIRD_HOUR)
    energy = result.schedule["energy"]

    assert energy[0] == pytest.approx(0.0, abs=1e-9)
    assert energy[-1] == pytest.approx(0.048, abs=1e-9)
    assert result.details["losses"] >= -1e-9


def test_loss_coefficient(fleet):
    # R / (N · V²) in MW per MW²
    assert fleet().loss_coefficient == pytest.approx(0.1e6 / (10 * 360.0**2))
    assert fleet(n_ev=0).loss_coefficient == 0.0


def test_capability(fleet):
    assert EvChargingModel(fleet(), THIRD_HOUR).installed_capability() == pytest.approx(0.012)


def test_daily_energy_out_of_reach(fleet):
    with pytest.raises(ModelInfeasibleError):
        ev_flexibility(fleet(share=0.1, uncontrolled=0.005), 10.0, THIRD_HOUR)


def test_deliverable_energy(fleet):
    assert fleet(share=0.5, uncontrolled=0.005).deliverable_energy() == pytest.approx(0.12)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"uncontrolled": 0.1},
        {"share": 1.5},
        {"n_ev": -1},
        {"open_circuit_voltage": 0.0},
        {"departure_window": Window(start_index=2, end_index=5, step_hours=1.0)},
    ],
)
def test_invalid_scenario(fleet, kwargs):
    with pytest.raises(ConfigurationError):
        fleet(**kwargs)


def _lossless_fleet():
    return EvScenario(
        n_ev=4,
        charger_capacity=1.0,
        plug_share=Profile.of([1.0, 0.5, 0.5, 1.0], Unit.PU),
        daily_energy=1.5,
        uncontrolled_demand=Profile.of([0.5, 0.25, 0.5, 0.25], Unit.MW),
        tariff=Profile.of([60.0, 80.0, 70.0, 100.0], Unit.GBP_PER_MWH),
        departure_window=Window(start_index=1, end_index=1, step_hours=1.0),
        grid=HOURLY,
        internal_resistance=0.0,
    )


def _best_quarter_schedule(scenario, price):
    """Exhaustive search over charging powers in steps of 0.25 MW"""
    limits = [share * scenario.charger_capacity for share in scenario.plug_share.values]
    levels = [[0.25 * k for k in range(int(limit / 0.25) + 1)] for limit in limits]
    cuts = linearize_quadratic(1.0, PiecewiseSpec().over(0.0, scenario.daily_energy))
    required = scenario.daily_energy * (1.0 - scenario.plug_share[1])

    best = (-float("inf"), None)
    for power in itertools.product(*levels):
        if abs(sum(power) - scenario.daily_energy) > 1e-9:
            continue
        flex = scenario.uncontrolled_demand[2] - power[2]
        unmet = max(0.0, required - power[0])
        objective = (
            -sum(c * p for c, p in zip(scenario.tariff.values, power))
            - scenario.penalty / 2 * evaluate_cuts(cuts, unmet)
            + price * flex
        )
        best = max(best, (objective, flex))
    return best


@pytest.mark.parametrize("price", [5.0, 15.0, 40.0])
def test_matches_exhaustive_search(price):
    scenario = _lossless_fleet()
    objective, flex = _best_quarter_schedule(scenario, price)

    result = ev_flexibility(scenario, price, THIRD_HOUR)

    assert result.objective == pytest.approx(objective, abs=1e-7)
    assert result.flexible_capacity == pytest.approx(flex, abs=1e-7)


def test_shift_pays_once_fee_covers_tariff_spread():
    # moving the window's 0.5 MWh to the 80 £/MWh hour costs 10 £/MWh more
    below = ev_flexibility(_lossless_fleet(), 5.0, THIRD_HOUR)
    above = ev_flexibility(_lossless_fleet(), 15.0, THIRD_HOUR)

    assert below.flexible_capacity == pytest.approx(0.0, abs=1e-9)
    assert above.flexible_capacity == pytest.approx(0.5)
    assert above.schedule["terminal_power"][1] == pytest.approx(0.5)
