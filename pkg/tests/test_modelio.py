import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mabound.model import StateClass
from mabound.modelio import (TRACE_COLUMNS, IterationRecord, ModelSyntaxError, TraceWriter,
                             parse_model, read_trace, serialize_model, write_trace_row)
from mabound.models import random_automaton

TWO_STATE = """ma
initial: s0
goal: s1
state s0
  rate -> s1 : 1.0
"""

FULL = """ma
initial: s0
goal: s6 s7            # zero or more ids
state s0
  rate -> s1 : 2.0     # Markovian state
  rate -> s2 : 3.5
state s1
state s2
  action alpha
    -> s3 : 0.5
    -> s4 : 0.5
  action beta
    -> s5 : 1.0
state s3
state s4
state s5
state s6
state s7
"""


def test_two_state_document():
    with pytest.raises(ModelSyntaxError, match="undeclared state s1"):
        parse_model(TWO_STATE)
    doc = parse_model(TWO_STATE + "state s1\n")
    ma = doc.automaton
    assert ma.num_states == 2
    assert [ma.classify(s) for s in range(2)].count(StateClass.MARKOVIAN) == 1
    assert doc.goals == {1}


def test_full_example():
    doc = parse_model(FULL)
    ma = doc.automaton
    assert ma.exit_rate(0) == 5.5
    assert [ma.action_names[a] for a, _ in ma.transitions[2]] == ["alpha", "beta"]
    assert doc.goals == {ma.state_id("s6"), ma.state_id("s7")}
    assert doc.positions["s2"] == (8, 7)


def test_bad_sum_reports_location():
    text = "ma\ninitial: a\nstate a\n  action x\n    -> a : 0.5\n    -> b : 0.6\nstate b\n"
    with pytest.raises(ModelSyntaxError, match="distribution sums to 1.1") as err:
        parse_model(text)
    assert err.value.line == 4


def test_goal_duplicates_collapse():
    doc = parse_model("ma\ninitial: s0\ngoal: s1 s1\nstate s0\n  rate -> s1 : 1\nstate s1\n")
    assert doc.goals == {1}


@pytest.mark.parametrize("text,fragment", [
    ("initial: a\n", "header"),
    ("ma\ninitial: a\ninitial: a\nstate a\n", "declared twice"),
    ("ma\ninitial: a\nstate a\nstate a\n", "declared twice"),
    ("ma\ninitial: a\nstate a\n  rate -> a : 1\n  action x\n    -> a : 1\n", "mixes"),
    ("ma\ninitial: a\nstate a\n  rate -> a : 0\n", "positive"),
    ("ma\ninitial: a\nstate a\n  action x\n    -> a : 1.5\n", "outside"),
    ("ma\ninitial: a\nstate a\n  action x\n", "no successors"),
    ("ma\ninitial: a\nstate a\n  action x\n    -> a : 1\n  action x\n    -> a : 1\n", "duplicate"),
    ("ma\nstate a\n", "initial"),
    ("ma\ninitial: a\nstate a\n  bogus\n", "cannot parse"),
    ("ma\ninitial: zz\nstate a\n", "undeclared"),
])
def test_errors_carry_location(text, fragment):
    with pytest.raises(ModelSyntaxError, match=fragment) as err:
        parse_model(text)
    assert err.value.line >= 1 and err.value.column >= 1


def test_serialize_contents():
    doc = parse_model(FULL)
    out = serialize_model(doc)
    assert "alpha" in out and "beta" in out
    empty = parse_model("ma\ninitial: a\nstate a\n")
    assert "\ngoal:\n" in serialize_model(empty)
    three = parse_model("ma\ninitial: a\nstate a\n  action x\n    -> a : 1\n"
                        "  action y\n    -> a : 1\n  action z\n    -> a : 1\n")
    assert all(f"action {a}" in serialize_model(three) for a in "xyz")


@settings(max_examples=60)
@given(st.integers(0, 100_000))
def test_round_trip(seed):
    doc = random_automaton(np.random.default_rng(seed))
    back = parse_model(serialize_model(doc))
    assert back.goals == doc.goals
    a, b = doc.automaton, back.automaton
    assert a.state_names == b.state_names and a.initial == b.initial
    assert a.rates == b.rates
    for s in range(a.num_states):
        assert {(a.action_names[x], tuple(mu.items())) for x, mu in a.transitions[s]} == \
               {(b.action_names[x], tuple(mu.items())) for x, mu in b.transitions[s]}


def test_parse_is_deterministic():
    assert serialize_model(parse_model(FULL)) == serialize_model(parse_model(io.StringIO(FULL)))


def _row(i, lb=0.5, ub=0.5):
    return IterationRecord(i, 2, 4, lb, ub, 0.5, 0.1, 10, 0.0, 1.25)


def test_trace_header_once_and_order():
    buf = io.StringIO()
    sink = TraceWriter(buf)
    write_trace_row(sink, _row(1))
    write_trace_row(sink, _row(2, 0.25, 0.75))
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert lines[0] == "iteration,blocks,game_states,lb,ub,eps_hat,delta,steps,refine_ms,valiter_ms"
    assert len(lines) == 3 and lines[1].startswith("1,") and lines[2].startswith("2,")
    assert read_trace(io.StringIO(buf.getvalue())) == [_row(1), _row(2, 0.25, 0.75)]
