import math

import pytest

from flexmarket.errors import ConfigurationError
from flexmarket.lp import LinearProgram, Relation, Sense, SolveStatus
from flexmarket.simplex import solve_lp


@pytest.fixture()
def production():
    """max 3x + 2y  s.t.  x + y <= 4,  x + 3y <= 9,  0 <= x <= 3"""
    lp = LinearProgram(name="production", sense=Sense.MAXIMIZE)
    lp.add_variable("x", 0.0, 3.0, cost=3.0)
    lp.add_variable("y", cost=2.0)
    lp.add_constraint("capacity", {"x": 1.0, "y": 1.0}, Relation.LE, 4.0)
    lp.add_constraint("labour", {"x": 1.0, "y": 3.0}, Relation.LE, 9.0)
    return lp


def test_maximize(production):
    solution = solve_lp(production)

    assert solution.is_optimal
    assert solution["x"] == pytest.approx(3.0)
    assert solution["y"] == pytest.approx(1.0)
    assert solution.objective == pytest.approx(11.0)


def test_duals_are_sensitivities(production):
    solution = solve_lp(production)

    assert solution.duals["capacity"] == pytest.approx(2.0)
    assert solution.duals["labour"] == pytest.approx(0.0, abs=1e-9)


def test_equality_dual():
    lp = LinearProgram(name="blend")
    lp.add_variable("x", 0.0, 2.0, cost=1.0)
    lp.add_variable("y", cost=2.0)
    lp.add_constraint("balance", {"x": 1.0, "y": 1.0}, Relation.EQ, 3.0)
    solution = solve_lp(lp)

    assert solution.objective == pytest.approx(4.0)
    assert solution["y"] == pytest.approx(1.0)
    assert solution.duals["balance"] == pytest.approx(2.0)


def test_objective_constant():
    lp = LinearProgram()
    lp.add_variable("x", 1.0, 5.0)
    lp.add_objective({"x": 2.0}, constant=10.0)
    lp.add_constraint("floor", {"x": 1.0}, Relation.GE, 2.0)

    assert solve_lp(lp).objective == pytest.approx(14.0)


def test_infeasible():
    lp = LinearProgram()
    lp.add_variable("x", 0.0, 1.0, cost=1.0)
    lp.add_constraint("floor", {"x": 1.0}, Relation.GE, 2.0)

    assert solve_lp(lp).status is SolveStatus.INFEASIBLE


def test_unbounded():
    lp = LinearProgram(sense=Sense.MAXIMIZE)
    lp.add_variable("x", cost=1.0)
    lp.add_variable("y")
    lp.add_constraint("gap", {"x": 1.0, "y": -1.0}, Relation.LE, 1.0)

    assert solve_lp(lp).status is SolveStatus.UNBOUNDED


def test_unconstrained():
    lp = LinearProgram()
    lp.add_variable("x", 1.0, 5.0, cost=1.0)
    lp.add_variable("y", -2.0, 3.0, cost=-1.0)
    solution = solve_lp(lp)

    assert solution["x"] == 1.0 and solution["y"] == 3.0
    assert solution.objective == pytest.approx(-2.0)


def test_warm_start_reaches_same_optimum(production):
    cold = solve_lp(production)
    production.set_cost("x", 2.5)
    warm = solve_lp(production, warm_start=cold.basis)

    assert warm.objective == pytest.approx(solve_lp(production).objective)
    assert warm.iterations <= cold.iterations


def test_with_bounds_leaves_original(production):
    tight = production.with_bounds({"x": (0.0, 1.0)})

    assert solve_lp(tight)["x"] == pytest.approx(1.0)
    assert production.variable("x").upper == 3.0
    assert solve_lp(production).objective == pytest.approx(11.0)


def test_rejects_integer_programs():
    lp = LinearProgram()
    lp.add_binary("z", cost=1.0)
    with pytest.raises(ConfigurationError):
        solve_lp(lp)


@pytest.mark.parametrize(
    "build",
    [
        lambda lp: lp.add_variable("x"),
        lambda lp: lp.add_variable("w", 2.0, 1.0),
        lambda lp: lp.add_variable("w", 0.0, 2.0, integer=True),
        lambda lp: lp.add_constraint("c", {"missing": 1.0}, Relation.LE, 1.0),
        lambda lp: lp.add_objective({"missing": 1.0}),
    ],
)
def test_invalid_programs(build):
    lp = LinearProgram()
    lp.add_variable("x")
    with pytest.raises(ConfigurationError):
        build(lp)


def test_lp_format(production):
    text = production.to_lp_format()

    assert text.splitlines()[1] == "Maximize"
    assert " capacity: 1 x + 1 y <= 4" in text
    assert " 0 <= x <= 3" in text
    assert " 0 <= y <= +inf" in text
    assert text.endswith("End\n")


def test_solution_value_of(production):
    solution = solve_lp(production)

    assert math.isclose(solution.value_of({"x": 1.0, "y": 3.0}), 6.0)
