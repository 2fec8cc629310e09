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

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Tuple

import numpy as np

from .errors import ConfigurationError, ParseError


class Unit(Enum):
    GBP_PER_MWH = "£/MWh"
    CELSIUS = "°C"
    MW = "MW"
    PU = "pu"


def parse_clock(clock: str) -> float:
    """Parse a ``HH:MM`` clock time into hours after midnight.

    ``24:00`` is accepted as the end of the day.
    """
    try:
        hours, minutes = clock.split(":")
        h, m = int(hours), int(minutes)
    except ValueError as e:
        raise ParseError("expected HH:MM", text=clock, what="clock time") from e

    if not (0 <= m < 60 and (0 <= h < 24 or (h == 24 and m == 0))):
        raise ParseError("out of range", text=clock, what="clock time")
    return h + m / 60.0


@dataclass(frozen=True)
class TimeGrid:
    step_hours: float = 0.5
    horizon_hours: float = 24.0

    def __post_init__(self):
        if not (self.step_hours > 0 and self.horizon_hours > 0):
            raise ConfigurationError(
                f"Time step and horizon must be positive: "
                f"step_hours={self.step_hours}, horizon_hours={self.horizon_hours}"
            )
        count = self.horizon_hours / self.step_hours
        if abs(count - round(count)) > 1e-9 or round(count) < 1:
            raise ConfigurationError(
                f"Horizon of {self.horizon_hours} h is not a whole number "
                f"of {self.step_hours} h steps"
            )

    @property
    def count(self) -> int:
        return int(round(self.horizon_hours / self.step_hours))

    def index_of(self, clock: str) -> int:
        """Index of the interval starting at `clock`"""
        position = parse_clock(clock) / self.step_hours
        index = int(round(position))
        if abs(position - index) > 1e-9:
            raise ConfigurationError(
                f"Clock time {clock} is not aligned to the {self.step_hours} h grid"
            )
        if not 0 <= index <= self.count:
            raise ConfigurationError(
                f"Clock time {clock} lies outside the {self.horizon_hours} h horizon"
            )
        return index

    def window(self, start: str, end: str) -> "Window":
        """The window of intervals from `start` (inclusive) to `end` (exclusive)"""
        first, stop = self.index_of(start), self.index_of(end)
        if stop <= first:
            raise ConfigurationError(f"Empty or reversed window {start}-{end}")
        return Window.on(self, first, stop - 1)

    def hours(self) -> np.ndarray:
        """Start time of every interval, in hours after midnight"""
        return np.arange(self.count) * self.step_hours


@dataclass(frozen=True)
class Window:
    start_index: int
    end_index: int
    step_hours: float

    def __post_init__(self):
        if not 0 <= self.start_index <= self.end_index:
            raise ConfigurationError(
                f"Invalid window [{self.start_index}, {self.end_index}]"
            )

    @staticmethod
    def on(grid: TimeGrid, start_index: int, end_index: int) -> "Window":
        if end_index >= grid.count:
            raise ConfigurationError(
                f"Window end {end_index} outside of a grid with {grid.count} intervals"
            )
        return Window(
            start_index=start_index, end_index=end_index, step_hours=grid.step_hours
        )

    @property
    def duration_hours(self) -> float:
        return (self.end_index - self.start_index + 1) * self.step_hours

    @property
    def indices(self) -> range:
        return range(self.start_index, self.end_index + 1)

    def __len__(self) -> int:
        return self.end_index - self.start_index + 1

    def __contains__(self, index: int) -> bool:
        return self.start_index <= index <= self.end_index

    def overlaps(self, other: "Window") -> bool:
        return not (
            self.end_index < other.start_index or other.end_index < self.start_index
        )


@dataclass(frozen=True)
class Profile:
    values: Tuple[float, ...]
    unit: Unit

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ConfigurationError(f"Profile in {self.unit.value} has non-finite values")

    @staticmethod
    def of(values: Iterable[float], unit: Unit) -> "Profile":
        return Profile(values=tuple(float(v) for v in values), unit=unit)

    @staticmethod
    def constant(value: float, grid: TimeGrid, unit: Unit) -> "Profile":
        return Profile(values=(float(value),) * grid.count, unit=unit)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    @property
    def array(self) -> np.ndarray:
        array = np.asarray(self.values, dtype=float)
        array.flags.writeable = False
        return array

    def check_aligned(self, grid: TimeGrid, *, name: str = "profile") -> None:
        if len(self.values) != grid.count:
            raise ConfigurationError(
                f"{name}: expected {grid.count} values, got {len(self.values)}"
            )
