import numpy as np
import pytest

from flexmarket.profiles import (
    EV_SHIFT_PREMIUM,
    PLUG_SHARE_DAY,
    PLUG_SHARE_NIGHT,
    ambient_temperature,
    ev_tariff,
    plug_share,
    tou_tariff,
    uncontrolled_demand,
)
from flexmarket.timegrid import Profile, Unit


@pytest.mark.parametrize(
    "clock, price", [("12:00", 100.0), ("16:00", 125.0), ("18:30", 125.0), ("19:00", 100.0)]
)
def test_tariff_evening_peak(grid, clock, price):
    assert tou_tariff(grid, peak_factor=1.25)[grid.index_of(clock)] == price


def test_default_tariff_is_flat(grid):
    assert set(tou_tariff(grid).values) == {100.0}


def test_ev_tariff_premium_outside_window(grid, window):
    tariff = ev_tariff(tou_tariff(grid), window)

    assert tariff[grid.index_of("16:30")] == 100.0
    assert tariff[grid.index_of("18:00")] == 100.0
    assert tariff[grid.index_of("18:30")] == 100.0 + EV_SHIFT_PREMIUM
    assert tariff[grid.index_of("03:00")] == 100.0 + EV_SHIFT_PREMIUM


def test_ambient_range(grid):
    ambient = ambient_temperature(grid)

    assert len(ambient) == 48
    assert 2.0 <= min(ambient.values) and max(ambient.values) <= 8.0
    assert ambient[grid.index_of("06:00")] < ambient[grid.index_of("15:00")]


def test_plug_share(grid):
    share = plug_share(grid)

    assert share[grid.index_of("12:00")] == pytest.approx(PLUG_SHARE_DAY)
    assert share[grid.index_of("02:00")] == pytest.approx(PLUG_SHARE_NIGHT)


@pytest.mark.parametrize("daily_energy", [10.0, 15.0, 20.0])
def test_uncontrolled_demand_keeps_energy_within_caps(grid, daily_energy):
    share = Profile.constant(1.0, grid, Unit.PU)
    demand = uncontrolled_demand(grid, daily_energy, 1.0, share)

    assert np.sum(demand.array) * grid.step_hours == pytest.approx(daily_energy, rel=1e-9)
    assert max(demand.values) <= 1.0 + 1e-9
    assert min(demand.values) >= 0.0


def test_uncontrolled_demand_follows_plug_share(grid):
    share = plug_share(grid)
    demand = uncontrolled_demand(grid, 20.0, 2.0, share)

    assert np.all(demand.array <= share.array * 2.0 + 1e-9)
