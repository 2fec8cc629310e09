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
from typing import Dict, List, Optional, Tuple

from .errors import SolverError
from .logging import get_logger
from .lp import LinearProgram, Sense, Solution, SolveStatus
from .simplex import solve_relaxation

logger = get_logger(__name__)

INTEGRALITY_TOLERANCE = 1e-7
DEFAULT_GAP = 1e-6


@dataclass(frozen=True)
class _Node:
    fixed: Tuple[Tuple[str, float], ...]
    depth: int


def _most_fractional(solution: Solution, binaries: List[str]) -> Optional[str]:
    best, best_distance = None, INTEGRALITY_TOLERANCE
    for name in binaries:
        value = solution.values[name]
        distance = min(value - math.floor(value), math.ceil(value) - value)
        if distance > best_distance:
            best, best_distance = name, distance
    return best


def solve_milp(
    lp: LinearProgram, *, gap: float = DEFAULT_GAP, max_nodes: int = 100_000
) -> Solution:
    """Depth-first branch and bound over the binary variables of `lp`.

    The returned solution is optimal within an absolute objective `gap`.
    Duals are not reported.
    """
    binaries = lp.integer_variables
    maximize = lp.sense is Sense.MAXIMIZE

    def better(candidate: float, incumbent: Optional[float], margin: float = 0.0) -> bool:
        if incumbent is None:
            return True
        if maximize:
            return candidate > incumbent + margin
        return candidate < incumbent - margin

    incumbent: Optional[Solution] = None
    stack: List[_Node] = [_Node(fixed=(), depth=0)]
    nodes = 0
    iterations = 0

    while stack:
        node = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise SolverError(
                f"{lp.name}: branch and bound node limit reached",
                diagnostics={"nodes": nodes, "iterations": iterations},
            )

        relaxation = solve_relaxation(
            lp.with_bounds({name: (value, value) for name, value in node.fixed})
        )
        iterations += relaxation.iterations
        if relaxation.status is SolveStatus.UNBOUNDED:
            return Solution(status=SolveStatus.UNBOUNDED, iterations=iterations)
        if relaxation.status is SolveStatus.INFEASIBLE:
            continue

        bound = relaxation.objective
        if incumbent is not None and not better(bound, incumbent.objective, gap):
            continue

        branch_on = _most_fractional(relaxation, binaries)
        if branch_on is None:
            values: Dict[str, float] = dict(relaxation.values)
            for name in binaries:
                values[name] = float(round(values[name]))
            incumbent = Solution(
                status=SolveStatus.OPTIMAL,
                objective=relaxation.objective,
                values=values,
                duals=None,
                iterations=iterations,
            )
            logger.debug(
                f"{lp.name}: incumbent {relaxation.objective:.6g} at node {nodes} "
                f"(depth {node.depth})"
            )
            continue

        # explore the side the relaxation leans towards first
        first = float(round(relaxation.values[branch_on]))
        for value in (1.0 - first, first):
            stack.append(_Node(fixed=node.fixed + ((branch_on, value),), depth=node.depth + 1))

    if incumbent is None:
        return Solution(status=SolveStatus.INFEASIBLE, iterations=iterations)

    logger.debug(f"{lp.name}: branch and bound finished after {nodes} nodes")
    return Solution(
        status=SolveStatus.OPTIMAL,
        objective=incumbent.objective,
        values=incumbent.values,
        duals=None,
        iterations=iterations,
    )
