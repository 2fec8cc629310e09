"""Outer linearization of convex quadratic terms ``c * x**2``.

`linearize_quadratic` returns tangent cuts at evenly spaced knots.  Models do
not add the cuts as rows; `add_quadratic_epigraph` expresses the same
max-of-cuts function as a sum of bounded segment variables with increasing
slopes, which keeps large programs narrow.  In a cost-minimizing objective the
segments fill in order, so both forms have the same optimum.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

import numpy as np

from .errors import ConfigurationError, ConvexityError
from .lp import LinearProgram

MIN_SEGMENTS = 4


@dataclass(frozen=True)
class PiecewiseSpec:
    segment_count: int = 16
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.segment_count < MIN_SEGMENTS:
            raise ConfigurationError(
                f"Piecewise linearization needs at least {MIN_SEGMENTS} segments, "
                f"got {self.segment_count}"
            )
        if not self.lower < self.upper:
            raise ConfigurationError(
                f"Empty linearization domain [{self.lower}, {self.upper}]"
            )

    def over(self, lower: float, upper: float) -> "PiecewiseSpec":
        return PiecewiseSpec(segment_count=self.segment_count, lower=lower, upper=upper)

    @property
    def width(self) -> float:
        return (self.upper - self.lower) / self.segment_count

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.segment_count + 1)

    def error_bound(self, coefficient: float) -> float:
        """Largest underestimation of ``coefficient * x**2`` on the domain"""
        return coefficient * self.width**2 / 4


@dataclass(frozen=True)
class TangentCut:
    """The linear function ``slope * x + intercept``"""

    slope: float
    intercept: float

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept


def linearize_quadratic(coefficient: float, spec: PiecewiseSpec) -> List[TangentCut]:
    if coefficient < 0:
        raise ConvexityError(
            f"Cannot outer-linearize a concave term (coefficient {coefficient})"
        )
    if coefficient == 0:
        return []
    return [
        TangentCut(slope=2 * coefficient * x, intercept=-coefficient * x * x)
        for x in spec.knots
    ]


def evaluate_cuts(cuts: List[TangentCut], x: float) -> float:
    return max((cut(x) for cut in cuts), default=0.0)


@dataclass(frozen=True)
class PiecewiseQuadratic:
    """Segment variables of one linearized term, as added to a program.

    The argument is ``origin + sum(segments)``; the linearized value is
    ``base_value + sum(slope * segment)``.
    """

    segments: Tuple[str, ...]
    slopes: Tuple[float, ...]
    origin: float
    base_value: float

    def argument_terms(self, scale: float = 1.0) -> Dict[str, float]:
        return {s: scale for s in self.segments}

    def cost_terms(self, scale: float = 1.0) -> Dict[str, float]:
        return {s: scale * slope for s, slope in zip(self.segments, self.slopes)}

    def argument(self, values: Mapping[str, float]) -> float:
        return self.origin + math.fsum(values[s] for s in self.segments)

    def value(self, values: Mapping[str, float]) -> float:
        return self.base_value + math.fsum(
            slope * values[s] for s, slope in zip(self.segments, self.slopes)
        )


def add_quadratic_epigraph(
    lp: LinearProgram, name: str, coefficient: float, spec: PiecewiseSpec
) -> PiecewiseQuadratic:
    """Add the segment variables of ``coefficient * x**2`` for x >= spec.lower"""
    cuts = linearize_quadratic(coefficient, spec)
    if not cuts:
        segment = lp.add_variable(f"{name}[0]")
        return PiecewiseQuadratic(
            segments=(segment,), slopes=(0.0,), origin=spec.lower, base_value=0.0
        )

    knots = spec.knots
    # consecutive tangents intersect halfway between their knots
    breakpoints = [spec.lower] + [(a + b) / 2 for a, b in zip(knots, knots[1:])]
    segments = []
    for k, cut in enumerate(cuts):
        width = breakpoints[k + 1] - breakpoints[k] if k + 1 < len(breakpoints) else math.inf
        segments.append(lp.add_variable(f"{name}[{k}]", 0.0, width))

    return PiecewiseQuadratic(
        segments=tuple(segments),
        slopes=tuple(cut.slope for cut in cuts),
        origin=spec.lower,
        base_value=coefficient * spec.lower**2,
    )
