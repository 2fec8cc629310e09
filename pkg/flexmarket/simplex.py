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

"""Bounded-variable revised primal simplex.

Every row ``a x (<=|=|>=) b`` gets a slack ``s`` so that ``a x + s = b`` with
``s >= 0`` (``<=``), ``s <= 0`` (``>=``) or ``s = 0`` (``=``).  Rows whose slack
cannot absorb the starting residual get an artificial column, driven to zero
in phase one.  The basis inverse is kept explicitly and refactorized every
`REFACTOR_INTERVAL` pivots.
"""

import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, SolverError
from .logging import get_logger
from .lp import Basis, LinearProgram, Relation, Solution, SolveStatus, StandardForm

logger = get_logger(__name__)

REFACTOR_INTERVAL = 100
DEGENERATE_RUN_BEFORE_BLAND = 50
PIVOT_TOLERANCE = 1e-9
FEASIBILITY_TOLERANCE = 1e-9

# nonbasic positions
_BASIC, _AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2, 3


class _Phase:
    ONE = 1
    TWO = 2


class BoundedSimplex:
    def __init__(self, form: StandardForm, max_iterations: Optional[int] = None):
        self.form = form
        m, n = form.shape
        self.m, self.n = m, n
        self.matrix = form.matrix

        slack_lower = np.empty(m)
        slack_upper = np.empty(m)
        for i, relation in enumerate(form.relations):
            if relation is Relation.LE:
                slack_lower[i], slack_upper[i] = 0.0, math.inf
            elif relation is Relation.GE:
                slack_lower[i], slack_upper[i] = -math.inf, 0.0
            else:
                slack_lower[i], slack_upper[i] = 0.0, 0.0

        self.lower = np.concatenate([form.lower, slack_lower])
        self.upper = np.concatenate([form.upper, slack_upper])
        self.cost = np.concatenate([form.cost, np.zeros(m)])
        self.art_rows = np.zeros(0, dtype=int)
        self.art_signs = np.zeros(0)

        self.max_iterations = (
            max_iterations if max_iterations is not None else 50 * (m + n) + 1000
        )
        self.iterations = 0
        self.primal_tolerance = FEASIBILITY_TOLERANCE * max(
            1.0, float(np.max(np.abs(form.rhs), initial=0.0))
        )

    # column algebra over [structural | slack | artificial]

    @property
    def width(self) -> int:
        return self.n + self.m + len(self.art_rows)

    def _column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.matrix[:, j]
        column = np.zeros(self.m)
        if j < self.n + self.m:
            column[j - self.n] = 1.0
        else:
            k = j - self.n - self.m
            column[self.art_rows[k]] = self.art_signs[k]
        return column

    def _row_activity(self, x: np.ndarray) -> np.ndarray:
        activity = self.matrix @ x[: self.n] + x[self.n : self.n + self.m]
        if len(self.art_rows):
            np.add.at(activity, self.art_rows, self.art_signs * x[self.n + self.m :])
        return activity

    def _reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = np.empty(self.width)
        d[: self.n] = cost[: self.n] - y @ self.matrix
        d[self.n : self.n + self.m] = cost[self.n : self.n + self.m] - y
        if len(self.art_rows):
            d[self.n + self.m :] = cost[self.n + self.m :] - self.art_signs * y[self.art_rows]
        return d

    def _basis_matrix(self) -> np.ndarray:
        return np.column_stack([self._column(j) for j in self.basis])

    def _refactor(self) -> None:
        try:
            self.binv = np.linalg.inv(self._basis_matrix())
        except np.linalg.LinAlgError as e:
            raise SolverError(
                "Singular basis during refactorization",
                diagnostics={"iterations": self.iterations},
            ) from e
        self._recompute_basic_values()

    def _recompute_basic_values(self) -> None:
        x = self.x.copy()
        x[self.basis] = 0.0
        residual = self.form.rhs - self._row_activity(x)
        self.x[self.basis] = self.binv @ residual

    # starting points

    def _nonbasic_start(self, j: int, at_upper: bool = False) -> Tuple[float, int]:
        lo, hi = self.lower[j], self.upper[j]
        if at_upper and math.isfinite(hi):
            return hi, _AT_UPPER
        if math.isfinite(lo):
            return lo, _AT_LOWER
        if math.isfinite(hi):
            return hi, _AT_UPPER
        return 0.0, _FREE

    def _cold_start(self) -> bool:
        """Slack/artificial starting basis; returns whether phase one is needed"""
        n, m = self.n, self.m
        self.x = np.zeros(n + m)
        self.state = np.full(n + m, _AT_LOWER, dtype=int)
        for j in range(n):
            self.x[j], self.state[j] = self._nonbasic_start(j)

        residual = self.form.rhs - self.matrix @ self.x[:n]
        basis: List[int] = []
        art_rows, art_signs, art_values = [], [], []
        for i in range(m):
            s = n + i
            lo, hi = self.lower[s], self.upper[s]
            if lo - self.primal_tolerance <= residual[i] <= hi + self.primal_tolerance:
                self.x[s] = residual[i]
                self.state[s] = _BASIC
                basis.append(s)
            else:
                value = min(max(residual[i], lo), hi)
                self.x[s] = value
                self.state[s] = _AT_LOWER if value == lo else _AT_UPPER
                gap = residual[i] - value
                art_rows.append(i)
                art_signs.append(1.0 if gap > 0 else -1.0)
                art_values.append(abs(gap))
                basis.append(n + m + len(art_rows) - 1)

        k = len(art_rows)
        self.art_rows = np.array(art_rows, dtype=int)
        self.art_signs = np.array(art_signs, dtype=float)
        self.lower = np.concatenate([self.lower[: n + m], np.zeros(k)])
        self.upper = np.concatenate([self.upper[: n + m], np.full(k, math.inf)])
        self.cost = np.concatenate([self.cost[: n + m], np.zeros(k)])
        self.x = np.concatenate([self.x, np.array(art_values, dtype=float)])
        self.state = np.concatenate([self.state, np.full(k, _BASIC, dtype=int)])

        self.basis = np.array(basis, dtype=int)
        diagonal = np.ones(m)
        for r, j in enumerate(self.basis):
            if j >= n + m:
                diagonal[r] = self.art_signs[j - n - m]
        self.binv = np.diag(1.0 / diagonal)
        return k > 0

    def _warm_start(self, basis: Basis) -> bool:
        """Reuse `basis` if it is primal feasible for this program"""
        if basis.shape != (self.m, self.n) or len(basis.basic) != self.m:
            return False
        n, m = self.n, self.m
        self.art_rows = np.zeros(0, dtype=int)
        self.art_signs = np.zeros(0)
        self.x = np.zeros(n + m)
        self.state = np.full(n + m, _AT_LOWER, dtype=int)
        for j in range(n + m):
            self.x[j], self.state[j] = self._nonbasic_start(j, at_upper=j in basis.at_upper)
        self.basis = np.array(basis.basic, dtype=int)
        self.state[self.basis] = _BASIC
        try:
            self.binv = np.linalg.inv(self._basis_matrix())
        except np.linalg.LinAlgError:
            return False
        self._recompute_basic_values()

        xb = self.x[self.basis]
        tolerance = 1e-7 * max(1.0, float(np.max(np.abs(xb), initial=0.0)))
        feasible = np.all(xb >= self.lower[self.basis] - tolerance) and np.all(
            xb <= self.upper[self.basis] + tolerance
        )
        return bool(feasible)

    # iterations

    def _iterate(self, cost: np.ndarray, phase: int) -> SolveStatus:
        degenerate_run = 0
        since_refactor = 0
        bland = False
        dual_tolerance = 1e-9 * max(1.0, float(np.max(np.abs(cost), initial=0.0)))

        while True:
            if self.iterations >= self.max_iterations:
                raise SolverError(
                    "Simplex iteration limit reached",
                    diagnostics={
                        "iterations": self.iterations,
                        "phase": phase,
                        "rows": self.m,
                        "columns": self.n,
                    },
                )
            if since_refactor >= REFACTOR_INTERVAL:
                self._refactor()
                since_refactor = 0

            y = cost[self.basis] @ self.binv
            d = self._reduced_costs(cost, y)
            can_increase = ((self.state == _AT_LOWER) & (self.upper > self.lower)) | (
                self.state == _FREE
            )
            can_decrease = ((self.state == _AT_UPPER) & (self.upper > self.lower)) | (
                self.state == _FREE
            )
            improving = (can_increase & (d < -dual_tolerance)) | (
                can_decrease & (d > dual_tolerance)
            )
            candidates = np.flatnonzero(improving)

            if len(candidates) == 0:
                if since_refactor > 0:
                    # confirm optimality on a fresh factorization
                    self._refactor()
                    since_refactor = 0
                    continue
                return SolveStatus.OPTIMAL

            if bland:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = -1.0 if d[q] > 0 else 1.0

            alpha = self.binv @ self._column(q)
            step, leaving, to_upper = self._ratio_test(q, alpha, direction, bland)

            if step == math.inf:
                if phase == _Phase.ONE:
                    raise SolverError(
                        "Unbounded phase one",
                        diagnostics={"iterations": self.iterations},
                    )
                return SolveStatus.UNBOUNDED

            self.x[q] += direction * step
            self.x[self.basis] -= direction * step * alpha
            self.iterations += 1
            since_refactor += 1

            if leaving is None:
                # bound flip, basis unchanged
                self.state[q] = _AT_UPPER if direction > 0 else _AT_LOWER
                self.x[q] = self.upper[q] if direction > 0 else self.lower[q]
            else:
                out = int(self.basis[leaving])
                self.x[out] = self.upper[out] if to_upper else self.lower[out]
                self.state[out] = _AT_UPPER if to_upper else _AT_LOWER
                self.state[q] = _BASIC
                self.basis[leaving] = q
                self._pivot(leaving, alpha)

            if step <= 1e-12:
                degenerate_run += 1
                if not bland and degenerate_run > DEGENERATE_RUN_BEFORE_BLAND:
                    logger.debug(
                        f"Switching to Bland's rule after {degenerate_run} "
                        f"degenerate pivots (iteration {self.iterations})"
                    )
                    bland = True
            else:
                degenerate_run = 0
                bland = False

    def _ratio_test(
        self, q: int, alpha: np.ndarray, direction: float, bland: bool
    ) -> Tuple[float, Optional[int], bool]:
        """Two-pass Harris ratio test.

        Returns the step length, the basis position of the leaving variable
        (None for a bound flip of the entering variable), and whether the
        leaving variable ends up at its upper bound.
        """
        flip = self.upper[q] - self.lower[q]
        if self.state[q] == _FREE:
            flip = math.inf

        rate = direction * alpha
        xb = self.x[self.basis]
        lb = self.lower[self.basis]
        ub = self.upper[self.basis]

        decreasing = rate > PIVOT_TOLERANCE
        increasing = rate < -PIVOT_TOLERANCE

        exact = np.full(self.m, math.inf)
        relaxed = np.full(self.m, math.inf)
        with np.errstate(invalid="ignore", divide="ignore"):
            room = np.where(decreasing, xb - lb, np.where(increasing, ub - xb, math.inf))
            magnitude = np.abs(rate)
            active = (decreasing | increasing) & np.isfinite(room)
            exact[active] = np.maximum(room[active], 0.0) / magnitude[active]
            relaxed[active] = (
                np.maximum(room[active], 0.0) + self.primal_tolerance
            ) / magnitude[active]

        theta_max = float(np.min(relaxed)) if self.m else math.inf
        if flip <= theta_max:
            return (flip if math.isfinite(flip) else math.inf), None, False
        if theta_max == math.inf:
            return math.inf, None, False

        eligible = np.flatnonzero(exact <= theta_max)
        if bland:
            best = float(np.min(exact[eligible]))
            ties = eligible[exact[eligible] <= best + 1e-12]
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(eligible[np.argmax(np.abs(alpha[eligible]))])
        return float(exact[r]), r, bool(increasing[r])

    def _pivot(self, r: int, alpha: np.ndarray) -> None:
        pivot_row = self.binv[r] / alpha[r]
        self.binv -= np.outer(alpha, pivot_row)
        self.binv[r] = pivot_row

    # driver

    def run(self, warm_start: Optional[Basis] = None) -> "SimplexResult":
        warm = warm_start is not None and self._warm_start(warm_start)
        if warm_start is not None and not warm:
            logger.debug("Warm start basis rejected, starting cold")

        if not warm and self._cold_start():
            phase_one = np.concatenate(
                [np.zeros(self.n + self.m), np.ones(len(self.art_rows))]
            )
            self._iterate(phase_one, _Phase.ONE)
            infeasibility = float(np.sum(self.x[self.n + self.m :]))
            if infeasibility > self.primal_tolerance * max(1, len(self.art_rows)):
                logger.debug(f"Phase one ended with infeasibility {infeasibility:.3g}")
                return SimplexResult(SolveStatus.INFEASIBLE, self)
            # artificials stay in the column set, pinned to zero
            self.upper[self.n + self.m :] = 0.0
            self.x[self.n + self.m :] = np.where(
                self.state[self.n + self.m :] == _BASIC, self.x[self.n + self.m :], 0.0
            )

        status = self._iterate(self.cost, _Phase.TWO)
        return SimplexResult(status, self)


class SimplexResult:
    def __init__(self, status: SolveStatus, solver: BoundedSimplex):
        self.status = status
        self.solver = solver

    def to_solution(self, lp: LinearProgram) -> Solution:
        solver = self.solver
        if self.status is not SolveStatus.OPTIMAL:
            return Solution(status=self.status, iterations=solver.iterations)

        form = solver.form
        x = solver.x[: solver.n]
        names = [v.name for v in lp.variables]
        values: Dict[str, float] = {name: float(v) for name, v in zip(names, x)}

        y = solver.cost[solver.basis] @ solver.binv
        duals = {
            con.name: float(form.sign * y_i) for con, y_i in zip(lp.constraints, y)
        }
        objective = lp.objective_constant + form.sign * float(form.cost @ x)

        basis = None
        if np.all(solver.basis < solver.n + solver.m):
            basis = Basis(
                basic=tuple(int(j) for j in solver.basis),
                at_upper=frozenset(
                    int(j) for j in np.flatnonzero(solver.state[: solver.n + solver.m] == _AT_UPPER)
                ),
                shape=(solver.m, solver.n),
            )
        return Solution(
            status=SolveStatus.OPTIMAL,
            objective=objective,
            values=values,
            duals=duals,
            iterations=solver.iterations,
            basis=basis,
        )


def solve_relaxation(
    lp: LinearProgram,
    *,
    warm_start: Optional[Basis] = None,
    max_iterations: Optional[int] = None,
) -> Solution:
    """Solve `lp` ignoring integrality flags"""
    form = lp.to_standard_form()
    if form.shape[0] == 0:
        return _solve_unconstrained(lp, form)
    result = BoundedSimplex(form, max_iterations=max_iterations).run(warm_start)
    solution = result.to_solution(lp)
    logger.debug(
        f"{lp.name}: {solution.status.value} after {solution.iterations} iterations "
        f"({form.shape[0]} rows, {form.shape[1]} columns)"
    )
    return solution


def solve_lp(
    lp: LinearProgram,
    *,
    warm_start: Optional[Basis] = None,
    max_iterations: Optional[int] = None,
) -> Solution:
    if lp.is_mixed_integer:
        raise ConfigurationError(
            f"{lp.name}: program has integer variables, use solve_milp"
        )
    return solve_relaxation(lp, warm_start=warm_start, max_iterations=max_iterations)


def _solve_unconstrained(lp: LinearProgram, form: StandardForm) -> Solution:
    x = np.empty(form.shape[1])
    for j, c in enumerate(form.cost):
        lo, hi = form.lower[j], form.upper[j]
        if c > 0:
            x[j] = lo
        elif c < 0:
            x[j] = hi
        else:
            x[j] = lo if math.isfinite(lo) else (hi if math.isfinite(hi) else 0.0)
        if not math.isfinite(x[j]):
            return Solution(status=SolveStatus.UNBOUNDED)
    values = {v.name: float(x_j) for v, x_j in zip(lp.variables, x)}
    return Solution(
        status=SolveStatus.OPTIMAL,
        objective=lp.objective_constant + form.sign * float(form.cost @ x),
        values=values,
        duals={},
    )
