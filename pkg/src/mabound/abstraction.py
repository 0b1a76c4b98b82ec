"""Partitions and the menu-based game abstraction of a Markov automaton.

Player 1 resolves the automaton's own nondeterminism at probabilistic
blocks; player 2 resolves the nondeterminism the abstraction introduces:
which concrete distribution an action stands for, and which concrete
rate distribution a Markovian block behaves like.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .model import MarkovAutomaton, StateClass

INF = math.inf


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of ``range(num_states)``, blocks ordered by their least state."""

    blocks: tuple[frozenset[int], ...]
    block_of: tuple[int, ...] = field(repr=False)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], num_states: int) -> "Partition":
        blocks = sorted((frozenset(b) for b in blocks), key=lambda b: min(b) if b else -1)
        owner = [-1] * num_states
        for i, b in enumerate(blocks):
            if not b:
                raise ValueError("empty block")
            for s in b:
                if not 0 <= s < num_states:
                    raise ValueError(f"state {s} out of range")
                if owner[s] != -1:
                    raise ValueError(f"state {s} occurs in two blocks")
                owner[s] = i
        missing = [s for s, o in enumerate(owner) if o == -1]
        if missing:
            raise ValueError(f"states {missing} not covered by the partition")
        return cls(tuple(blocks), tuple(owner))

    @classmethod
    def singleton(cls, num_states: int) -> "Partition":
        return cls.from_blocks(([s] for s in range(num_states)), num_states)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def num_states(self) -> int:
        return len(self.block_of)

    def refines(self, other: "Partition") -> bool:
        """True if every block of ``self`` lies inside a block of ``other``."""
        return all(len({other.block_of[s] for s in b}) == 1 for b in self.blocks)


def block_of(p: Partition, s: int) -> int:
    if not 0 <= s < p.num_states:
        raise ValueError(f"unknown state {s}")
    return p.block_of[s]


def _round_key(x: float) -> float:
    return float(f"{x:.12g}")


def lift_distribution(mu: Mapping[int, float], p: Partition) -> dict[int, float]:
    out: dict[int, float] = {}
    for s, prob in mu.items():
        b = block_of(p, s)
        out[b] = out.get(b, 0.0) + prob
    return {b: out[b] for b in sorted(out) if out[b] > 0}


lift_rate_distribution = lift_distribution


def dist_key(mu: Mapping[int, float]) -> tuple[tuple[int, float], ...]:
    """Hashable key identifying lifted distributions up to 12 significant digits."""
    return tuple((k, _round_key(v)) for k, v in sorted(mu.items()))


def enabled_actions(ma: MarkovAutomaton, states: Iterable[int]) -> frozenset[int]:
    out: set[int] = set()
    for s in states:
        out.update(a for a, _ in ma.transitions[s])
    return frozenset(out)


def _block_class(ma: MarkovAutomaton, block: frozenset[int]) -> StateClass:
    classes = {ma.classify(s) for s in block}
    if len(classes) != 1:
        names = sorted(c.value for c in classes)
        raise ValueError(f"block {sorted(block)} mixes {names} states")
    return classes.pop()


def initial_partition(ma: MarkovAutomaton, goals: Iterable[int]) -> Partition:
    goals = frozenset(goals)
    cells: dict[tuple[bool, StateClass], set[int]] = {}
    for s in range(ma.num_states):
        cells.setdefault((s in goals, ma.classify(s)), set()).add(s)
    return Partition.from_blocks(cells.values(), ma.num_states)


class Kind(enum.Enum):
    PROB_BLOCK = "V1"          # player-1 state of a probabilistic block
    BOTTOM = "*"               # sink for actions disabled in some block member
    ACTION = "V2act"           # player-2 state (block, action)
    MARKOV_BLOCK = "V2mb"      # player-2 state of a Markovian block
    MARKOV_CONCRETE = "V2mc"   # (block, lifted rate distribution)
    DEADLOCK_BLOCK = "dead"    # block of deadlock states, absorbing


PLAYER1 = (Kind.PROB_BLOCK, Kind.BOTTOM)


@dataclass(frozen=True)
class GameState:
    kind: Kind
    block: int | None = None
    action: int | None = None
    rates: tuple[tuple[int, float], ...] | None = None
    goal: bool = False

    @property
    def player(self) -> int:
        return 1 if self.kind in PLAYER1 else 2


@dataclass(frozen=True, eq=False)
class GameTransition:
    source: int
    action: int | None          # None stands for the silent action
    rate: float                 # math.inf for immediate transitions
    distribution: dict[int, float]
    origin: frozenset[int]

    @property
    def immediate(self) -> bool:
        return self.rate == INF


@dataclass(frozen=True, eq=False)
class AbstractGame:
    """Game states, transitions grouped by source, and the origin map.

    Block-level states occupy indices ``0 .. len(partition) - 1`` (state ``b``
    represents block ``b``); the bottom state comes right after.
    """

    automaton: MarkovAutomaton
    partition: Partition
    states: tuple[GameState, ...]
    transitions: tuple[GameTransition, ...]
    out_start: tuple[int, ...]
    initial: int
    bottom: int

    def outgoing(self, v: int) -> range:
        return range(self.out_start[v], self.out_start[v + 1])

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def goal_states(self) -> frozenset[int]:
        return frozenset(i for i, st in enumerate(self.states) if st.goal)

    def succ(self, v: int) -> frozenset[int]:
        out: set[int] = set()
        for t in self.outgoing(v):
            out.update(w for w, p in self.transitions[t].distribution.items() if p != 0)
        return frozenset(out)

    def predecessor(self, v: int) -> int:
        """Unique immediate predecessor of a MARKOV_CONCRETE state: its block state."""
        st = self.states[v]
        if st.kind is not Kind.MARKOV_CONCRETE:
            raise ValueError(f"state {v} is not a concrete Markovian state")
        return st.block

    def label(self, v: int) -> str:
        st = self.states[v]
        ma = self.automaton
        if st.kind is Kind.BOTTOM:
            return "*"
        names = ",".join(ma.state_names[s] for s in sorted(self.partition.blocks[st.block]))
        base = f"{{{names}}}"
        if st.kind is Kind.ACTION:
            return f"{base}/{ma.action_names[st.action]}"
        if st.kind is Kind.MARKOV_CONCRETE:
            rho = ",".join(f"B{b}:{r:g}" for b, r in st.rates)
            return f"{base}/[{rho}]"
        return base

    def dump(self) -> str:
        """Stable textual graph description, one vertex or edge per line."""
        ma = self.automaton
        lines = []
        for v, st in enumerate(self.states):
            flag = " goal" if st.goal else ""
            init = " initial" if v == self.initial else ""
            lines.append(f"v {v} {st.kind.value} {self.label(v)}{flag}{init}")
        for t in self.transitions:
            act = "_" if t.action is None else ma.action_names[t.action]
            rate = "inf" if t.immediate else repr(t.rate)
            dist = " ".join(f"{w}:{p!r}" for w, p in sorted(t.distribution.items()))
            origin = ",".join(ma.state_names[s] for s in sorted(t.origin))
            lines.append(f"e {t.source} {act} {rate} {dist} origin={origin}")
        return "\n".join(lines) + "\n"


def build_game(ma: MarkovAutomaton, p: Partition, goals: Iterable[int]) -> AbstractGame:
    goals = frozenset(goals)
    nb = len(p)
    klass = [_block_class(ma, b) for b in p.blocks]
    is_goal = []
    for b in p.blocks:
        inside = b & goals
        if inside and inside != b:
            raise ValueError(f"block {sorted(b)} is not goal-respecting")
        is_goal.append(bool(inside))

    kind_of = {StateClass.PROBABILISTIC: Kind.PROB_BLOCK,
               StateClass.MARKOVIAN: Kind.MARKOV_BLOCK,
               StateClass.DEADLOCK: Kind.DEADLOCK_BLOCK}
    states: list[GameState] = [GameState(kind_of[klass[i]], block=i, goal=is_goal[i])
                               for i in range(nb)]
    bottom = nb
    states.append(GameState(Kind.BOTTOM))

    # children[v] = list of (action, rate, distribution, origin)
    children: dict[int, list] = {v: [] for v in range(nb + 1)}

    def add_state(st: GameState) -> int:
        states.append(st)
        children[len(states) - 1] = []
        return len(states) - 1

    for i, block in enumerate(p.blocks):
        if is_goal[i] or klass[i] is StateClass.DEADLOCK:
            continue
        members = sorted(block)
        if klass[i] is StateClass.PROBABILISTIC:
            for a in sorted(enabled_actions(ma, members)):
                v2 = add_state(GameState(Kind.ACTION, block=i, action=a))
                has_a = frozenset(s for s in members if a in ma.enabled_actions(s))
                children[i].append((None, INF, {v2: 1.0}, has_a))
                groups: dict[tuple, list] = {}
                for s in members:
                    for act, mu in ma.transitions[s]:
                        if act != a:
                            continue
                        lifted = lift_distribution(mu, p)
                        key = dist_key(lifted)
                        if key in groups:
                            groups[key][1].add(s)
                        else:
                            groups[key] = [lifted, {s}]
                for lifted, origin in groups.values():
                    children[v2].append((a, INF, lifted, frozenset(origin)))
                missing = frozenset(block - has_a)
                if missing:
                    children[v2].append((None, INF, {bottom: 1.0}, missing))
        else:
            groups = {}
            for s in members:
                lifted = lift_rate_distribution(ma.rates[s], p)
                key = dist_key(lifted)
                if key in groups:
                    groups[key][1].add(s)
                else:
                    groups[key] = [lifted, {s}, ma.exit_rate(s)]
            for lifted, origin, e in groups.values():
                key = dist_key(lifted)
                vc = add_state(GameState(Kind.MARKOV_CONCRETE, block=i, rates=key))
                origin = frozenset(origin)
                children[i].append((None, INF, {vc: 1.0}, origin))
                children[vc].append((None, e, {b: r / e for b, r in lifted.items()}, origin))

    transitions: list[GameTransition] = []
    out_start = []
    for v in range(len(states)):
        out_start.append(len(transitions))
        for act, rate, dist, origin in children[v]:
            transitions.append(GameTransition(v, act, rate, dist, origin))
    out_start.append(len(transitions))

    return AbstractGame(ma, p, tuple(states), tuple(transitions), tuple(out_start),
                        initial=p.block_of[ma.initial], bottom=bottom)


def origin_groups(g: AbstractGame, v: int) -> list[tuple[int, frozenset[int]]]:
    """Outgoing transitions of ``v`` with the concrete states that induced them."""
    return [(t, g.transitions[t].origin) for t in g.outgoing(v)]


def concrete_block(g: AbstractGame, v: int) -> int:
    st = g.states[v]
    if st.block is None:
        raise ValueError("the bottom state has no concrete block")
    return st.block


def is_partition_of(blocks: Sequence[frozenset[int]], universe: frozenset[int]) -> bool:
    seen: set[int] = set()
    for b in blocks:
        if not b or seen & b:
            return False
        seen |= b
    return seen == universe
