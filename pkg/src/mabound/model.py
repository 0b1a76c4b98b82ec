"""Concrete Markov automata.

A state is either probabilistic (one or more action-labelled distributions,
taken instantly), Markovian (a rate distribution, left after an exponential
delay) or a deadlock (no outgoing behaviour at all).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx

TOLERANCE = 1e-9

Distribution = Mapping[int, float]
RateDistribution = Mapping[int, float]


class StateClass(enum.Enum):
    PROBABILISTIC = "probabilistic"
    MARKOVIAN = "markovian"
    DEADLOCK = "deadlock"


def check_distribution(mu: Distribution, num_states: int) -> dict[int, float]:
    out = {}
    for s, p in sorted(mu.items()):
        if not 0 <= s < num_states:
            raise ValueError(f"unknown state id {s} in distribution")
        if not 0.0 < p <= 1.0 + TOLERANCE:
            raise ValueError(f"probability {p} for state {s} outside (0, 1]")
        out[s] = float(p)
    total = math.fsum(out.values())
    if abs(total - 1.0) > TOLERANCE:
        raise ValueError(f"distribution sums to {total:.12g}")
    return out


def check_rates(rho: RateDistribution, num_states: int) -> dict[int, float]:
    out = {}
    for s, r in sorted(rho.items()):
        if not 0 <= s < num_states:
            raise ValueError(f"unknown state id {s} in rate distribution")
        if not (r > 0.0 and math.isfinite(r)):
            raise ValueError(f"rate {r} for state {s} must be positive and finite")
        out[s] = float(r)
    return out


@dataclass(frozen=True)
class MarkovAutomaton:
    """Immutable Markov automaton.

    ``transitions[s]`` lists the ``(action_id, distribution)`` pairs of a
    probabilistic state, ``rates[s]`` the rate distribution of a Markovian
    state. A state never has both.
    """

    state_names: tuple[str, ...]
    initial: int
    action_names: tuple[str, ...]
    transitions: tuple[tuple[tuple[int, dict[int, float]], ...], ...]
    rates: tuple[dict[int, float], ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.state_names)
        if len(self.transitions) != n or len(self.rates) != n:
            raise ValueError("transitions and rates must have one entry per state")
        if len(set(self.state_names)) != n:
            raise ValueError("duplicate state names")
        if not 0 <= self.initial < n:
            raise ValueError(f"initial state {self.initial} out of range")
        trans = []
        for s in range(n):
            seen = set()
            row = []
            for a, mu in self.transitions[s]:
                if not 0 <= a < len(self.action_names):
                    raise ValueError(f"unknown action id {a} in state {self.state_names[s]}")
                mu = check_distribution(mu, n)
                key = (a, tuple(mu.items()))
                if key in seen:
                    raise ValueError(f"duplicate transition in state {self.state_names[s]}")
                seen.add(key)
                row.append((a, mu))
            if row and self.rates[s]:
                raise ValueError(
                    f"state {self.state_names[s]} has both probabilistic and Markov transitions"
                )
            trans.append(tuple(row))
        object.__setattr__(self, "transitions", tuple(trans))
        object.__setattr__(self, "rates", tuple(check_rates(r, n) for r in self.rates))
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.state_names)})

    @classmethod
    def build(
        cls,
        states: Iterable[str],
        initial: str,
        transitions: Mapping[str, Iterable[tuple[str, Mapping[str, float]]]] = (),
        rates: Mapping[str, Mapping[str, float]] = (),
    ) -> "MarkovAutomaton":
        """Construct from names: ``transitions[s] = [(action, {succ: p})]``."""
        names = tuple(states)
        idx = {name: i for i, name in enumerate(names)}
        actions: list[str] = []
        trans: list[list] = [[] for _ in names]
        for s, choices in dict(transitions).items():
            for a, mu in choices:
                if a not in actions:
                    actions.append(a)
                trans[idx[s]].append((actions.index(a), {idx[t]: p for t, p in mu.items()}))
        rts: list[dict[int, float]] = [{} for _ in names]
        for s, rho in dict(rates).items():
            rts[idx[s]] = {idx[t]: r for t, r in rho.items()}
        return cls(names, idx[initial], tuple(actions),
                   tuple(tuple(t) for t in trans), tuple(rts))

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    def state_id(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValueError(f"unknown state {name!r}") from None

    def _check_state(self, s: int) -> None:
        if not (isinstance(s, int) and 0 <= s < self.num_states):
            raise ValueError(f"unknown state id {s!r}")

    def classify(self, s: int) -> StateClass:
        self._check_state(s)
        if self.transitions[s]:
            return StateClass.PROBABILISTIC
        if self.rates[s]:
            return StateClass.MARKOVIAN
        return StateClass.DEADLOCK

    def exit_rate(self, s: int) -> float:
        if self.classify(s) is not StateClass.MARKOVIAN:
            raise ValueError(f"state {s} is not Markovian")
        return math.fsum(self.rates[s].values())

    def jump_probability(self, s: int, target: int, t: float) -> float:
        """Probability of moving from Markovian ``s`` to ``target`` within time ``t``."""
        if t < 0:
            raise ValueError("time must be non-negative")
        self._check_state(target)
        e = self.exit_rate(s)
        return -math.expm1(-e * t) * self.rates[s].get(target, 0.0) / e

    def enabled_actions(self, s: int) -> frozenset[int]:
        return frozenset(a for a, _ in self.transitions[s])

    def with_transitions(self, transitions, rates) -> "MarkovAutomaton":
        return MarkovAutomaton(self.state_names, self.initial, self.action_names,
                               tuple(transitions), tuple(rates))


classify = MarkovAutomaton.classify
exit_rate = MarkovAutomaton.exit_rate
jump_probability = MarkovAutomaton.jump_probability


def detect_probabilistic_end_components(ma: MarkovAutomaton) -> list[frozenset[int]]:
    """Maximal end components made only of probabilistic states.

    Standard MEC decomposition on the sub-automaton of probabilistic states:
    repeatedly split into SCCs and drop choices that can leave their SCC.
    A nonempty result means the automaton is Zeno.
    """
    prob = [s for s in range(ma.num_states)
            if ma.classify(s) is StateClass.PROBABILISTIC]
    # choices[s] = list of supports still allowed
    choices = {s: [frozenset(mu) for _, mu in ma.transitions[s]] for s in prob}
    candidates = [frozenset(prob)]
    result = []
    while candidates:
        part = candidates.pop()
        # keep only choices staying inside the current candidate set
        for s in part:
            choices[s] = [sup for sup in choices[s] if sup <= part]
        alive = {s for s in part if choices[s]}
        # removing a state can invalidate choices of others; iterate to a fixpoint
        changed = True
        while changed:
            changed = False
            for s in list(alive):
                choices[s] = [sup for sup in choices[s] if sup <= alive]
                if not choices[s]:
                    alive.discard(s)
                    changed = True
        graph = nx.DiGraph()
        graph.add_nodes_from(alive)
        for s in alive:
            for sup in choices[s]:
                graph.add_edges_from((s, t) for t in sup)
        sccs = [frozenset(c) for c in nx.strongly_connected_components(graph)]
        if len(sccs) == 1 and sccs[0] == part:
            result.append(part)
            continue
        for c in sccs:
            if len(c) == 1:
                (s,) = c
                if not any(sup <= c for sup in choices[s]):
                    continue
            candidates.append(c)
    return sorted(result, key=min)


def make_goals_absorbing(ma: MarkovAutomaton, goals: Iterable[int]) -> MarkovAutomaton:
    """Replace the behaviour of every goal state by a rate-1 self-loop."""
    goals = set(goals)
    for g in goals:
        ma._check_state(g)
    if not goals:
        return ma
    trans = [() if s in goals else ma.transitions[s] for s in range(ma.num_states)]
    rates = [{s: 1.0} if s in goals else ma.rates[s] for s in range(ma.num_states)]
    return ma.with_transitions(trans, rates)
