import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mabound.abstraction import Kind, Partition, build_game, initial_partition
from mabound.analysis import (Bound, Objective, discretization_error, discretize_game,
                              find_step_size, lambda_max, solve, value_iteration)
from mabound.model import MarkovAutomaton, make_goals_absorbing
from mabound.modelio import ModelDocument
from mabound.models import (erlang_chain, fast_slow, random_automaton, random_coarsening,
                            two_state_ctmc)
from oracles import bisect_steps, brute_force_values, er_exact


def prepared(doc, partition=None):
    ma = make_goals_absorbing(doc.automaton, doc.goals)
    p = partition(ma) if partition else initial_partition(ma, doc.goals)
    return ma, build_game(ma, p, doc.goals)


def test_er_closed_form_matches_high_precision():
    for lam, tb, n in [(1, 1, 10), (2.5, 0.3, 7), (10, 2, 400), (0.1, 1, 1)]:
        assert discretization_error(lam, tb, n) == pytest.approx(er_exact(lam, tb, n), rel=1e-12)


def test_er_examples():
    er = discretization_error(1.0, 1.0, 10)
    assert er == pytest.approx(0.0458155, abs=1e-7)
    assert er <= 10 * 0.1**2 / 2
    assert discretization_error(1.0, 1.0, 10**7) < 1e-7
    with pytest.raises(ValueError):
        discretization_error(1.0, 1.0, 0)


def test_find_step_size_examples():
    plan = find_step_size(1.0, 1.0, 0.01)
    assert plan.steps == bisect_steps(1.0, 1.0, 0.01) == 50
    assert plan.delta == pytest.approx(0.02)
    at_ten = discretization_error(1.0, 1.0, 10)
    assert find_step_size(1.0, 1.0, at_ten).steps == 10
    assert find_step_size(1.0, 1.0, 0.99).steps >= 1


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 30), st.floats(0.05, 5), st.floats(1e-4, 0.9))
def test_find_step_size_against_bisection(lam, tb, eps_hat):
    plan = find_step_size(lam, tb, eps_hat)
    assert plan.error_bound <= eps_hat
    assert plan.delta * plan.steps == pytest.approx(tb, rel=1e-12)
    assert plan.steps == bisect_steps(lam, tb, eps_hat)
    if plan.steps > 1:
        assert discretization_error(lam, tb, plan.steps - 1) > eps_hat


def test_er_monotone_in_delta():
    grid = np.linspace(1e-3, 2.0, 100)
    ers = [-math.expm1(-2.0 + (1 / d) * math.log1p(2 * d)) for d in grid]
    assert all(b > a for a, b in zip(ers, ers[1:]))


def test_degenerate_plan_without_rates():
    ma = MarkovAutomaton.build(["p", "g"], "p", transitions={"p": [("a", {"g": 1.0})]})
    g = build_game(ma, initial_partition(ma, set()), set())
    assert lambda_max(g) == 0.0
    sol = solve(g, 1.0, 0.1)
    assert sol.plan.steps == 1


def test_discretize_example():
    ma = MarkovAutomaton.build(["a", "b"], "a", rates={"a": {"b": 2.0}})
    _, g = prepared(ModelDocument(ma, frozenset({1})))
    dg = discretize_game(g, 0.1)
    (vc,) = dg.markov_nodes
    dist = dg.step_dist[int(vc)]
    pred = g.predecessor(int(vc))
    assert dist[1] == pytest.approx(1 - math.exp(-0.2), abs=1e-15)
    assert dist[pred] == pytest.approx(math.exp(-0.2), abs=1e-15)
    assert dist[1] == pytest.approx(0.181269, abs=1e-6)
    assert discretize_game(g, 1e-12).step_dist[int(vc)][pred] == pytest.approx(1.0)


def test_self_return_merges_into_one_edge():
    ma = MarkovAutomaton.build(["a", "b"], "a", rates={"a": {"b": 3.0}, "b": {"a": 3.0}})
    g = build_game(ma, Partition.from_blocks([{0, 1}], 2), set())
    dg = discretize_game(g, 0.5)
    for v in dg.markov_nodes:
        assert dg.step_dist[int(v)] == {g.predecessor(int(v)): pytest.approx(1.0)}


def test_two_state_value_inside_interval():
    _, g = prepared(two_state_ctmc(1.0))
    sol = solve(g, 1.0, 0.005)
    exact = 1 - math.exp(-1)
    assert exact - 0.005 <= sol.lb <= exact + 1e-12
    assert sol.ub == pytest.approx(sol.lb, abs=1e-12)


def test_erlang_within_eps():
    _, g = prepared(erlang_chain(2, 2.0))
    sol = solve(g, 1.0, 0.01)
    exact = 1 - 3 * math.exp(-2)
    assert sol.lb <= exact <= sol.ub + 0.01
    assert exact == pytest.approx(0.593994, abs=1e-6)


def test_goal_always_one():
    ma, g = prepared(fast_slow())
    sol = solve(g, 1.0, 0.05)
    for v in g.goal_states:
        assert np.all(sol.values.lb[:, v] == 1.0) and np.all(sol.values.ub[:, v] == 1.0)


def test_fast_slow_abstraction_bounds_match_oracle():
    doc = fast_slow(10.0, 1.0)
    ma, g = prepared(doc)
    sol = solve(g, 1.0, 0.01)
    assert sol.lb < sol.ub
    delta, n = sol.plan.delta, sol.plan.steps
    for rate, got in [(1.0, sol.lb), (10.0, sol.ub)]:
        same = fast_slow(rate, rate)
        ref = brute_force_values(make_goals_absorbing(same.automaton, same.goals),
                                 same.goals, delta, n)
        assert got == pytest.approx(ref[0], abs=1e-12)


def test_min_equals_max_without_nondeterminism():
    _, g = prepared(erlang_chain(3, 1.5))
    hi = solve(g, 1.0, 0.01, Objective.MAX)
    lo = solve(g, 1.0, 0.01, Objective.MIN)
    assert hi.lb == lo.lb and hi.ub == lo.ub


def test_keep_history_off_keeps_last_slice():
    _, g = prepared(erlang_chain(2, 2.0))
    dg = discretize_game(g, 0.05)
    full, _ = value_iteration(dg, 20, Objective.MAX, Bound.UB)
    last, _ = value_iteration(dg, 20, Objective.MAX, Bound.UB, keep_history=False)
    assert last.shape[0] == 1 and np.array_equal(last[0], full[-1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(list(Objective)))
def test_value_table_invariants(seed, objective):
    rng = np.random.default_rng(seed)
    doc = random_automaton(rng)
    ma = make_goals_absorbing(doc.automaton, doc.goals)
    g = build_game(ma, random_coarsening(rng, ma, doc.goals), doc.goals)
    sol = solve(g, float(rng.uniform(0.2, 2)), 0.2, objective)
    lb, ub = sol.values.lb, sol.values.ub
    assert np.all((lb >= -1e-12) & (ub <= 1 + 1e-12))
    assert np.all(lb <= ub + 1e-12)
    assert np.all(np.diff(lb, axis=0) >= -1e-12) and np.all(np.diff(ub, axis=0) >= -1e-12)
    bottom = 0.0 if objective is Objective.MAX else 1.0
    assert np.all(lb[:, g.bottom] == bottom) and np.all(ub[:, g.bottom] == bottom)
    for sched in (sol.lb_scheduler, sol.ub_scheduler):
        for v, st_ in enumerate(g.states):
            chosen = sched.choices[:, v]
            if st_.kind in (Kind.PROB_BLOCK, Kind.ACTION, Kind.MARKOV_BLOCK) and not st_.goal:
                assert all(c in g.outgoing(v) for c in chosen)
            else:
                assert np.all(chosen == -1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_singleton_game_bounds_coincide(seed):
    doc = random_automaton(np.random.default_rng(seed))
    ma = make_goals_absorbing(doc.automaton, doc.goals)
    g = build_game(ma, Partition.singleton(ma.num_states), doc.goals)
    sol = solve(g, 1.0, 0.1)
    assert np.array_equal(sol.values.lb, sol.values.ub)


def test_scheduler_accessors():
    doc = fast_slow()
    _, g = prepared(doc)
    sol = solve(g, 1.0, 0.1)
    s = sol.ub_scheduler
    assert g.automaton.action_names[s.action(g.initial, sol.plan.steps)] == "a"
    with pytest.raises(ValueError):
        s.abstract(g.initial, 0)
