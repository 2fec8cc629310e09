"""Default input profiles of the case study.

Tariff, ambient temperature and EV plug-in behaviour are not part of the
published scenario tables; these winter design-day shapes stand in for them
and every one of them can be overridden from a scenario document.
"""

import numpy as np

from .timegrid import Profile, TimeGrid, Unit, Window, parse_clock

BASE_TARIFF = 100.0  # £/MWh
PEAK_TARIFF_FACTOR = 1.0  # no evening peak unless asked for
PEAK_TARIFF_HOURS = ("16:00", "19:00")
# £/MWh on EV charging outside the service window
EV_SHIFT_PREMIUM = 8.5

AMBIENT_MIN = (6.0, 2.0)  # (hour, °C)
AMBIENT_MAX = (15.0, 8.0)

PLUG_SHARE_DAY = 0.2
PLUG_SHARE_NIGHT = 0.9

# relative uncontrolled charging demand per hour of the day
UNCONTROLLED_SHAPE = (
    0.9, 0.6, 0.4, 0.3, 0.25, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
    0.9, 0.95, 1.0, 1.2, 1.6, 2.0, 2.2, 2.1, 1.8, 1.5, 1.3, 1.1,
)  # fmt: skip


def _midpoints(grid: TimeGrid) -> np.ndarray:
    return grid.hours() + grid.step_hours / 2


def tou_tariff(
    grid: TimeGrid, base: float = BASE_TARIFF, peak_factor: float = PEAK_TARIFF_FACTOR
) -> Profile:
    """Flat tariff with an evening peak of `peak_factor` times the base price"""
    start, end = (parse_clock(c) for c in PEAK_TARIFF_HOURS)
    hours = grid.hours()
    peak = (hours >= start - 1e-9) & (hours < end - 1e-9)
    return Profile.of(np.where(peak, base * peak_factor, base), Unit.GBP_PER_MWH)


def ev_tariff(tariff: Profile, window: Window, premium: float = EV_SHIFT_PREMIUM) -> Profile:
    """`tariff` with `premium` added on every interval outside `window`"""
    outside = np.ones(len(tariff), dtype=bool)
    outside[list(window.indices)] = False
    return Profile.of(tariff.array + np.where(outside, premium, 0.0), Unit.GBP_PER_MWH)


def ambient_temperature(grid: TimeGrid) -> Profile:
    """Cosine day with its minimum in the early morning and its maximum in the afternoon"""
    (t_min, low), (t_max, high) = AMBIENT_MIN, AMBIENT_MAX
    hours = _midpoints(grid) % 24.0
    mean, amplitude = (low + high) / 2, (high - low) / 2

    rising = (hours >= t_min) & (hours < t_max)
    # phase runs 0 -> pi from minimum to maximum and pi -> 2 pi back to the next minimum
    phase = np.where(
        rising,
        np.pi * (hours - t_min) / (t_max - t_min),
        np.pi + np.pi * ((hours - t_max) % 24.0) / (24.0 - (t_max - t_min)),
    )
    return Profile.of(mean - amplitude * np.cos(phase), Unit.CELSIUS)


def plug_share(grid: TimeGrid) -> Profile:
    """Share of vehicles plugged in: high overnight, low during working hours"""
    knots_hours = [0.0, 6.0, 9.0, 15.0, 20.0, 24.0]
    knots_share = [
        PLUG_SHARE_NIGHT,
        PLUG_SHARE_NIGHT,
        PLUG_SHARE_DAY,
        PLUG_SHARE_DAY,
        PLUG_SHARE_NIGHT,
        PLUG_SHARE_NIGHT,
    ]
    return Profile.of(np.interp(_midpoints(grid), knots_hours, knots_share), Unit.PU)


def uncontrolled_demand(
    grid: TimeGrid, daily_energy: float, charger_capacity: float, share: Profile
) -> Profile:
    """Uncontrolled fleet charging (MW) taking up `daily_energy` over the day.

    The hourly shape is scaled to the daily energy and capped by the power of
    the plugged-in chargers; energy cut off by the cap is spread over the
    intervals with headroom.
    """
    shape = np.asarray(UNCONTROLLED_SHAPE)[(grid.hours() % 24.0).astype(int)]
    cap = share.array * charger_capacity
    dt = grid.step_hours

    demand = np.zeros(grid.count)
    target = daily_energy
    free = np.ones(grid.count, dtype=bool)
    for _ in range(grid.count):
        weights = np.where(free, shape, 0.0)
        if weights.sum() <= 0 or target <= 1e-12:
            break
        demand = demand + weights / (weights.sum() * dt) * target
        over = demand > cap
        if not over.any():
            break
        target = float(np.sum(demand[over] - cap[over]) * dt)
        demand = np.minimum(demand, cap)
        free &= demand < cap - 1e-12
    return Profile.of(demand, Unit.MW)
