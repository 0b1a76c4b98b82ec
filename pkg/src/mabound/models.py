"""Small benchmark models used by tests and the experiment scripts."""
from __future__ import annotations

from collections import deque

import numpy as np

from .abstraction import Partition
from .model import MarkovAutomaton
from .modelio import ModelDocument


def _doc(ma: MarkovAutomaton, goals) -> ModelDocument:
    return ModelDocument(ma, frozenset(ma.state_id(g) if isinstance(g, str) else g
                                       for g in goals))


def two_state_ctmc(rate: float = 1.0) -> ModelDocument:
    ma = MarkovAutomaton.build(["s0", "s1"], "s0", rates={"s0": {"s1": rate}})
    return _doc(ma, ["s1"])


def erlang_chain(phases: int = 2, rate: float = 2.0) -> ModelDocument:
    names = [f"s{i}" for i in range(phases + 1)]
    rates = {names[i]: {names[i + 1]: rate} for i in range(phases)}
    return _doc(MarkovAutomaton.build(names, "s0", rates=rates), [names[-1]])


def fast_slow(fast: float = 10.0, slow: float = 1.0) -> ModelDocument:
    """A probabilistic coin into one fast and one slow Markovian route to the goal."""
    ma = MarkovAutomaton.build(
        ["s0", "fast", "slow", "goal"], "s0",
        transitions={"s0": [("a", {"fast": 0.5, "slow": 0.5})]},
        rates={"fast": {"goal": fast}, "slow": {"goal": slow}})
    return _doc(ma, ["goal"])


def zeno_cycle() -> ModelDocument:
    """Two probabilistic states that can bounce forever; ``b`` leaves to a Markovian state."""
    ma = MarkovAutomaton.build(
        ["p0", "p1", "m", "goal"], "p0",
        transitions={"p0": [("a", {"p1": 1.0})],
                     "p1": [("a", {"p0": 1.0}), ("b", {"m": 1.0})]},
        rates={"m": {"goal": 1.0}})
    return _doc(ma, ["goal"])


def six_state() -> ModelDocument:
    """Nondeterministic choice between a fast route and a slow two-phase route."""
    ma = MarkovAutomaton.build(
        ["s0", "s1", "s2", "s3", "s4", "s5"], "s0",
        transitions={"s0": [("a", {"s2": 1.0}), ("b", {"s1": 1.0})],
                     "s1": [("a", {"s3": 0.5, "s4": 0.5})]},
        rates={"s2": {"s5": 5.0}, "s3": {"s5": 0.5}, "s4": {"s3": 1.0}})
    return _doc(ma, ["s5"])


def polling_system(queue_size: int = 2, job_types: int = 3, arrival=(1.0, 1.0),
                   service: float = 2.0, switch: float = 4.0) -> ModelDocument:
    """Two stations with bounded queues served by one server.

    Jobs of ``job_types`` indistinguishable kinds arrive at each station; the
    server serves the head of the queue at its current station, then decides
    nondeterministically whether to stay or walk to the other station. With
    an empty local queue it walks over at rate ``switch``. Goal: both queues
    full.
    """
    q = queue_size
    full = lambda queue: len(queue) == q  # noqa: E731
    initial = ((), (), 0, "M")
    index: dict[tuple, int] = {initial: 0}
    order = [initial]
    todo = deque([initial])
    rates: dict[tuple, dict[tuple, float]] = {}
    trans: dict[tuple, list] = {}

    def see(st):
        if st not in index:
            index[st] = len(order)
            order.append(st)
            todo.append(st)
        return st

    while todo:
        st = todo.popleft()
        q1, q2, pos, phase = st
        queues = [q1, q2]
        if phase == "D":
            trans[st] = [("stay", {see((q1, q2, pos, "M")): 1.0}),
                         ("switch", {see((q1, q2, 1 - pos, "M")): 1.0})]
            continue
        if full(q1) and full(q2):
            continue
        out: dict[tuple, float] = {}
        for i in (0, 1):
            if not full(queues[i]):
                for j in range(job_types):
                    nq = list(queues)
                    nq[i] = queues[i] + (j,)
                    tgt = see((nq[0], nq[1], pos, "M"))
                    out[tgt] = out.get(tgt, 0.0) + arrival[i] / job_types
        if queues[pos]:
            nq = list(queues)
            nq[pos] = queues[pos][1:]
            tgt = see((nq[0], nq[1], pos, "D"))
            out[tgt] = out.get(tgt, 0.0) + service
        else:
            tgt = see((q1, q2, 1 - pos, "M"))
            out[tgt] = out.get(tgt, 0.0) + switch
        rates[st] = out

    def name(st):
        q1, q2, pos, phase = st
        enc = lambda queue: "".join(map(str, queue)) or "e"  # noqa: E731
        return f"{phase}_{enc(q1)}_{enc(q2)}_{pos}"

    names = [name(st) for st in order]
    ma = MarkovAutomaton.build(
        names, names[0],
        transitions={name(s): [(a, {name(t): p for t, p in mu.items()}) for a, mu in c]
                     for s, c in trans.items()},
        rates={name(s): {name(t): r for t, r in rho.items()} for s, rho in rates.items()})
    goals = [name(st) for st in order if full(st[0]) and full(st[1])]
    return _doc(ma, goals)


def random_automaton(rng: np.random.Generator, max_states: int = 8, max_actions: int = 3,
                     rate_range=(0.5, 5.0), acyclic_probabilistic: bool = True
                     ) -> ModelDocument:
    """Random MA; probabilistic states only move to higher-indexed probabilistic
    states or to Markovian states when ``acyclic_probabilistic`` (non-Zeno)."""
    n = int(rng.integers(2, max_states + 1))
    names = [f"s{i}" for i in range(n)]
    kinds = rng.choice(["P", "M", "M", "P", "D"], size=n, p=[0.4, 0.25, 0.15, 0.1, 0.1])
    goals = [names[i] for i in range(n) if rng.random() < 0.25]
    if not goals:
        goals = [names[int(rng.integers(1, n))]]
    actions = [f"a{j}" for j in range(max_actions)]
    trans, rates = {}, {}
    for i in range(n):
        if kinds[i] == "P":
            targets = [j for j in range(n) if j != i and (
                not acyclic_probabilistic or kinds[j] != "P" or j > i)]
            if not targets:
                kinds[i] = "M"
            else:
                chosen_actions = rng.choice(actions, size=int(rng.integers(1, max_actions + 1)),
                                            replace=False)
                choices = []
                for a in sorted(chosen_actions):
                    k = int(rng.integers(1, min(3, len(targets)) + 1))
                    support = rng.choice(targets, size=k, replace=False)
                    w = rng.random(k) + 0.1
                    w = w / w.sum()
                    choices.append((str(a), {names[j]: float(x) for j, x in zip(support, w)}))
                trans[names[i]] = choices
        if kinds[i] == "M":
            k = int(rng.integers(1, min(3, n) + 1))
            support = rng.choice(n, size=k, replace=False)
            rates[names[i]] = {names[j]: float(rng.uniform(*rate_range)) for j in support}
    ma = MarkovAutomaton.build(names, names[0], transitions=trans, rates=rates)
    return _doc(ma, goals)


def random_coarsening(rng: np.random.Generator, ma: MarkovAutomaton, goals) -> Partition:
    """Random homogeneous, goal-respecting partition of ``ma``."""
    cells: dict[tuple, list[int]] = {}
    for s in range(ma.num_states):
        key = (s in goals, ma.classify(s))
        cells.setdefault(key, []).append(s)
    blocks = []
    for members in cells.values():
        labels = rng.integers(0, max(1, len(members) // 2 + 1), size=len(members))
        for lab in np.unique(labels):
            blocks.append([m for m, x in zip(members, labels) if x == lab])
    return Partition.from_blocks(blocks, ma.num_states)

