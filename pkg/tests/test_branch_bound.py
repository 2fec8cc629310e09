import itertools

import numpy as np
import pytest

from flexmarket.branch_bound import DEFAULT_GAP, solve_milp
from flexmarket.errors import SolverError
from flexmarket.lp import LinearProgram, Relation, Sense, SolveStatus
from flexmarket.simplex import solve_lp


@pytest.fixture()
def knapsack():
    lp = LinearProgram(name="knapsack", sense=Sense.MAXIMIZE)
    for name, value in (("a", 5.0), ("b", 4.0), ("c", 3.0)):
        lp.add_binary(name, cost=value)
    lp.add_constraint("weight", {"a": 2.0, "b": 3.0, "c": 1.0}, Relation.LE, 5.0)
    return lp


def test_knapsack(knapsack):
    solution = solve_milp(knapsack)

    assert solution.is_optimal
    assert solution.objective == pytest.approx(9.0)
    assert (solution["a"], solution["b"], solution["c"]) == (1.0, 1.0, 0.0)


def test_mixed_integer():
    lp = LinearProgram(name="mixed", sense=Sense.MAXIMIZE)
    lp.add_variable("x", 0.0, 4.0, cost=1.0)
    lp.add_binary("z", cost=10.0)
    lp.add_constraint("limit", {"x": 1.0, "z": 4.0}, Relation.LE, 5.0)
    solution = solve_milp(lp)

    assert solution.objective == pytest.approx(11.0)
    assert solution["z"] == 1.0
    assert solution["x"] == pytest.approx(1.0)


def test_minimize_with_fixed_charge():
    lp = LinearProgram(name="fixed-charge")
    lp.add_variable("x", 0.0, 10.0, cost=1.0)
    lp.add_binary("open", cost=5.0)
    lp.add_constraint("link", {"x": 1.0, "open": -10.0}, Relation.LE, 0.0)
    lp.add_constraint("need", {"x": 1.0}, Relation.GE, 3.0)

    assert solve_milp(lp).objective == pytest.approx(8.0)


def test_infeasible():
    lp = LinearProgram(name="infeasible")
    lp.add_binary("a")
    lp.add_binary("b")
    lp.add_constraint("too-many", {"a": 1.0, "b": 1.0}, Relation.GE, 3.0)

    assert solve_milp(lp).status is SolveStatus.INFEASIBLE


def test_node_limit(knapsack):
    with pytest.raises(SolverError, match="node limit"):
        solve_milp(knapsack, max_nodes=0)


def _random_program(seed, binaries):
    """Knapsack rows over binaries plus two continuous variables linked to them"""
    rng = np.random.default_rng(seed)
    lp = LinearProgram(name=f"random-{seed}", sense=Sense.MAXIMIZE)
    names = [lp.add_binary(f"z[{i}]", cost=float(rng.uniform(-2, 10))) for i in range(binaries)]
    x = lp.add_variable("x", 0.0, 5.0, cost=float(rng.uniform(0, 3)))
    y = lp.add_variable("y", 0.0, 5.0, cost=float(rng.uniform(-1, 2)))
    for row in range(3):
        weights = {z: float(w) for z, w in zip(names, rng.uniform(0, 4, binaries))}
        weights[x] = float(rng.uniform(0, 1))
        lp.add_constraint(f"row[{row}]", weights, Relation.LE, float(rng.uniform(2, 3 * binaries)))
    lp.add_constraint("link", {x: 1.0, y: -1.0, names[0]: -2.0}, Relation.LE, 1.0)
    return lp, names


def _enumerate(lp, names):
    best = None
    for values in itertools.product((0.0, 1.0), repeat=len(names)):
        solution = solve_lp(lp.with_bounds({z: (v, v) for z, v in zip(names, values)}))
        if solution.is_optimal and (best is None or solution.objective > best):
            best = solution.objective
    return best


def _check_against_enumeration(seed, binaries):
    lp, names = _random_program(seed, binaries)

    solution = solve_milp(lp)

    assert solution.is_optimal
    assert solution.objective == pytest.approx(_enumerate(lp, names), abs=DEFAULT_GAP + 1e-7)
    assert all(solution[z] in (0.0, 1.0) for z in names)


@pytest.mark.parametrize("seed", range(10))
def test_matches_enumeration(seed):
    _check_against_enumeration(seed, binaries=2 + seed % 5)


@pytest.mark.slow
@pytest.mark.parametrize("binaries", [8, 10, 12])
def test_matches_enumeration_with_many_binaries(binaries):
    for seed in range(5):
        _check_against_enumeration(100 * binaries + seed, binaries)
