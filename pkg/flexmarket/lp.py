"""Linear programs, their solutions, and the LP text dump.

Duals are reported as sensitivities of the optimal objective to the
right-hand side of each constraint, in the program's own sense.  In a
minimization, a binding ``>=`` constraint therefore has a dual ``>= 0`` and a
binding ``<=`` constraint a dual ``<= 0``; for maximizations the signs flip.
"""

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigurationError


class Sense(Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"


class Relation(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    integer: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: Tuple[Tuple[int, float], ...]
    relation: Relation
    rhs: float


@dataclass(frozen=True)
class StandardForm:
    """Dense arrays of a program, costs already negated for maximizations"""

    matrix: np.ndarray
    rhs: np.ndarray
    relations: Tuple[Relation, ...]
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    sign: float

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True)
class Basis:
    """Final basis of a simplex run, reusable as a warm start"""

    basic: Tuple[int, ...]
    at_upper: FrozenSet[int]
    shape: Tuple[int, int]


@dataclass(frozen=True)
class Solution:
    status: SolveStatus
    objective: Optional[float] = None
    values: Dict[str, float] = field(default_factory=dict)
    duals: Optional[Dict[str, float]] = None
    iterations: int = 0
    basis: Optional[Basis] = None

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def value_of(self, terms: Mapping[str, float]) -> float:
        return math.fsum(coef * self.values[name] for name, coef in terms.items())


class LinearProgram:
    def __init__(self, name: str = "lp", sense: Sense = Sense.MINIMIZE):
        self.name = name
        self.sense = sense
        self.objective_constant = 0.0
        self._variables: List[Variable] = []
        self._var_index: Dict[str, int] = {}
        self._constraints: List[Constraint] = []
        self._con_index: Dict[str, int] = {}
        self._cost: Dict[int, float] = {}
        self._structure: Optional[Tuple[np.ndarray, ...]] = None

    # building

    def add_variable(
        self,
        name: str,
        lower: float = 0.0,
        upper: float = math.inf,
        *,
        cost: float = 0.0,
        integer: bool = False,
    ) -> str:
        if name in self._var_index:
            raise ConfigurationError(f"{self.name}: duplicate variable {name!r}")
        if lower > upper:
            raise ConfigurationError(
                f"{self.name}: variable {name!r} has crossing bounds [{lower}, {upper}]"
            )
        if integer and (lower < 0 or upper > 1):
            raise ConfigurationError(
                f"{self.name}: integer variable {name!r} must be binary"
            )
        self._var_index[name] = len(self._variables)
        self._variables.append(
            Variable(name=name, lower=float(lower), upper=float(upper), integer=integer)
        )
        if cost:
            self._cost[self._var_index[name]] = float(cost)
        self._structure = None
        return name

    def add_binary(self, name: str, *, cost: float = 0.0) -> str:
        return self.add_variable(name, 0.0, 1.0, cost=cost, integer=True)

    def add_constraint(
        self, name: str, terms: Mapping[str, float], relation: Relation, rhs: float
    ) -> str:
        if name in self._con_index:
            raise ConfigurationError(f"{self.name}: duplicate constraint {name!r}")
        merged: Dict[int, float] = {}
        for var, coef in terms.items():
            try:
                index = self._var_index[var]
            except KeyError:
                raise ConfigurationError(
                    f"{self.name}: constraint {name!r} references "
                    f"undeclared variable {var!r}"
                ) from None
            merged[index] = merged.get(index, 0.0) + float(coef)

        self._con_index[name] = len(self._constraints)
        self._constraints.append(
            Constraint(
                name=name,
                terms=tuple((i, c) for i, c in merged.items() if c != 0.0),
                relation=relation,
                rhs=float(rhs),
            )
        )
        self._structure = None
        return name

    def add_objective(self, terms: Mapping[str, float], constant: float = 0.0) -> None:
        for var, coef in terms.items():
            try:
                index = self._var_index[var]
            except KeyError:
                raise ConfigurationError(
                    f"{self.name}: objective references undeclared variable {var!r}"
                ) from None
            self._cost[index] = self._cost.get(index, 0.0) + float(coef)
        self.objective_constant += constant

    def set_cost(self, name: str, cost: float) -> None:
        self._cost[self._var_index[name]] = float(cost)

    # inspection

    @property
    def variables(self) -> List[Variable]:
        return list(self._variables)

    @property
    def constraints(self) -> List[Constraint]:
        return list(self._constraints)

    def variable(self, name: str) -> Variable:
        return self._variables[self._var_index[name]]

    def cost_of(self, name: str) -> float:
        return self._cost.get(self._var_index[name], 0.0)

    @property
    def is_mixed_integer(self) -> bool:
        return any(v.integer for v in self._variables)

    @property
    def integer_variables(self) -> List[str]:
        return [v.name for v in self._variables if v.integer]

    def objective_value(self, values: Mapping[str, float]) -> float:
        return self.objective_constant + math.fsum(
            cost * values[self._variables[i].name] for i, cost in self._cost.items()
        )

    def with_bounds(self, overrides: Mapping[str, Tuple[float, float]]) -> "LinearProgram":
        """A copy sharing constraints and costs, with some variable bounds replaced"""
        copy = LinearProgram(name=self.name, sense=self.sense)
        copy.objective_constant = self.objective_constant
        copy._variables = list(self._variables)
        copy._var_index = dict(self._var_index)
        copy._constraints = list(self._constraints)
        copy._con_index = dict(self._con_index)
        copy._cost = dict(self._cost)
        for name, (lower, upper) in overrides.items():
            index = self._var_index[name]
            original = self._variables[index]
            copy._variables[index] = Variable(
                name=name, lower=lower, upper=upper, integer=original.integer
            )
        if self._structure is not None:
            matrix, rhs, _, _ = self._structure
            copy._structure = (matrix, rhs) + copy._bounds()
        return copy

    def _bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.array([v.lower for v in self._variables], dtype=float)
        upper = np.array([v.upper for v in self._variables], dtype=float)
        return lower, upper

    def to_standard_form(self) -> StandardForm:
        if self._structure is None:
            matrix = np.zeros((len(self._constraints), len(self._variables)))
            for row, con in enumerate(self._constraints):
                for index, coef in con.terms:
                    matrix[row, index] = coef
            rhs = np.array([c.rhs for c in self._constraints], dtype=float)
            self._structure = (matrix, rhs) + self._bounds()

        matrix, rhs, lower, upper = self._structure
        sign = 1.0 if self.sense is Sense.MINIMIZE else -1.0
        cost = np.zeros(len(self._variables))
        for index, coef in self._cost.items():
            cost[index] = sign * coef
        return StandardForm(
            matrix=matrix,
            rhs=rhs,
            relations=tuple(c.relation for c in self._constraints),
            lower=lower,
            upper=upper,
            cost=cost,
            sign=sign,
        )

    def to_lp_format(self) -> str:
        """Dump in CPLEX LP text format, for cross-checking with other solvers"""

        def clean(name: str) -> str:
            return re.sub(r"[^A-Za-z0-9_.]", "_", name)

        def expression(terms) -> str:
            parts = []
            for index, coef in terms:
                sign = "-" if coef < 0 else "+"
                parts.append(f"{sign} {abs(coef):.12g} {clean(self._variables[index].name)}")
            text = " ".join(parts) if parts else "0"
            return text[2:] if text.startswith("+ ") else text

        relation = {Relation.LE: "<=", Relation.EQ: "=", Relation.GE: ">="}
        lines = [
            f"\\ {self.name}",
            "Minimize" if self.sense is Sense.MINIMIZE else "Maximize",
            f" obj: {expression(sorted(self._cost.items()))}",
            "Subject To",
        ]
        for con in self._constraints:
            lines.append(
                f" {clean(con.name)}: {expression(con.terms)} "
                f"{relation[con.relation]} {con.rhs:.12g}"
            )

        lines.append("Bounds")
        for var in self._variables:
            lo = "-inf" if var.lower == -math.inf else f"{var.lower:.12g}"
            hi = "+inf" if var.upper == math.inf else f"{var.upper:.12g}"
            lines.append(f" {lo} <= {clean(var.name)} <= {hi}")

        binaries = [clean(v.name) for v in self._variables if v.integer]
        if binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (
            f"LinearProgram(name={self.name!r}, sense={self.sense.value}, "
            f"variables={len(self._variables)}, constraints={len(self._constraints)})"
        )
