"""Text format for Markov automata and CSV traces of the refinement loop.

Model files are line oriented::

    ma
    initial: s0
    goal: s6 s7
    state s0
      rate -> s1 : 2.0
    state s2
      action alpha
        -> s3 : 0.5
        -> s4 : 0.5

``#`` starts a comment. Indentation is not significant.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, fields
from typing import IO, Iterable

from .model import TOLERANCE, MarkovAutomaton

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"

_HEADER = re.compile(r"ma\s*$")
_INITIAL = re.compile(rf"initial\s*:\s*({IDENT})\s*$")
_GOAL = re.compile(rf"goal\s*:((?:\s*{IDENT})*)\s*$")
_STATE = re.compile(rf"state\s+({IDENT})\s*$")
_ACTION = re.compile(rf"action\s+({IDENT})\s*$")
_RATE = re.compile(rf"rate\s*->\s*({IDENT})\s*:\s*({NUMBER})\s*$")
_SUCC = re.compile(rf"->\s*({IDENT})\s*:\s*({NUMBER})\s*$")


class ModelSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ModelDocument:
    automaton: MarkovAutomaton
    goals: frozenset[int]
    positions: dict[str, tuple[int, int]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        for g in self.goals:
            if not 0 <= g < self.automaton.num_states:
                raise ValueError(f"goal state {g} out of range")


@dataclass
class _StateBlock:
    name: str
    line: int
    column: int
    rates: dict[str, float] = field(default_factory=dict)
    rate_refs: list[tuple[str, int, int]] = field(default_factory=list)
    actions: list[list] = field(default_factory=list)  # [name, {succ: p}, line, col, refs]


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_model(text: str | IO[str]) -> ModelDocument:
    if not isinstance(text, str):
        text = text.read()
    initial = None
    goal_refs: list[tuple[str, int, int]] = []
    blocks: dict[str, _StateBlock] = {}
    order: list[str] = []
    current: _StateBlock | None = None
    current_action: list | None = None
    seen_header = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        body = line.strip()
        if not body:
            continue
        col = len(line) - len(line.lstrip()) + 1
        if not seen_header:
            if not _HEADER.match(body):
                raise ModelSyntaxError("expected header 'ma'", lineno, col)
            seen_header = True
            continue
        if m := _INITIAL.match(body):
            if initial is not None:
                raise ModelSyntaxError("initial state declared twice", lineno, col)
            initial = (m.group(1), lineno, col + m.start(1))
        elif m := _GOAL.match(body):
            for g in re.finditer(IDENT, m.group(1)):
                goal_refs.append((g.group(0), lineno, col + m.start(1) + g.start()))
        elif m := _STATE.match(body):
            name = m.group(1)
            if name in blocks:
                raise ModelSyntaxError(f"state {name} declared twice", lineno, col + m.start(1))
            current = _StateBlock(name, lineno, col + m.start(1))
            blocks[name] = current
            order.append(name)
            current_action = None
        elif m := _ACTION.match(body):
            if current is None:
                raise ModelSyntaxError("action outside of a state block", lineno, col)
            if current.rates:
                raise ModelSyntaxError(
                    f"state {current.name} mixes rate lines and action blocks", lineno, col)
            current_action = [m.group(1), {}, lineno, col, []]
            current.actions.append(current_action)
        elif m := _RATE.match(body):
            if current is None:
                raise ModelSyntaxError("rate line outside of a state block", lineno, col)
            if current.actions:
                raise ModelSyntaxError(
                    f"state {current.name} mixes rate lines and action blocks", lineno, col)
            target, value = m.group(1), float(m.group(2))
            if not (value > 0 and math.isfinite(value)):
                raise ModelSyntaxError(f"rate {m.group(2)} must be positive", lineno, col + m.start(2))
            current.rates[target] = current.rates.get(target, 0.0) + value
            current.rate_refs.append((target, lineno, col + m.start(1)))
        elif m := _SUCC.match(body):
            if current_action is None:
                raise ModelSyntaxError("successor line outside of an action block", lineno, col)
            target, value = m.group(1), float(m.group(2))
            if not 0 < value <= 1:
                raise ModelSyntaxError(
                    f"probability {m.group(2)} outside (0, 1]", lineno, col + m.start(2))
            succ = current_action[1]
            succ[target] = succ.get(target, 0.0) + value
            current_action[4].append((target, lineno, col + m.start(1)))
        else:
            raise ModelSyntaxError(f"cannot parse line: {body!r}", lineno, col)

    if not seen_header:
        raise ModelSyntaxError("empty document, expected header 'ma'", 1)
    if initial is None:
        raise ModelSyntaxError("missing 'initial:' declaration", 1)

    index = {name: i for i, name in enumerate(order)}

    def resolve(ref: tuple[str, int, int]) -> int:
        name, line, col = ref
        if name not in index:
            raise ModelSyntaxError(f"undeclared state {name}", line, col)
        return index[name]

    action_names: list[str] = []
    transitions = []
    rates = []
    for name in order:
        block = blocks[name]
        for ref in block.rate_refs:
            resolve(ref)
        rates.append({index[t]: r for t, r in block.rates.items()})
        row = []
        seen = set()
        for aname, succ, line, col, refs in block.actions:
            for ref in refs:
                resolve(ref)
            if not succ:
                raise ModelSyntaxError(f"action {aname} has no successors", line, col)
            total = math.fsum(succ.values())
            if abs(total - 1.0) > TOLERANCE:
                raise ModelSyntaxError(f"distribution sums to {total:.12g}", line, col)
            if aname not in action_names:
                action_names.append(aname)
            mu = {index[t]: p for t, p in sorted(succ.items(), key=lambda kv: index[kv[0]])}
            key = (aname, tuple(mu.items()))
            if key in seen:
                raise ModelSyntaxError(f"duplicate transition for action {aname}", line, col)
            seen.add(key)
            row.append((action_names.index(aname), mu))
        transitions.append(tuple(row))

    init = resolve(initial)
    goals = frozenset(resolve(ref) for ref in goal_refs)
    ma = MarkovAutomaton(tuple(order), init, tuple(action_names), tuple(transitions), tuple(rates))
    positions = {name: (blocks[name].line, blocks[name].column) for name in order}
    return ModelDocument(ma, goals, positions)


def serialize_model(doc: ModelDocument) -> str:
    ma = doc.automaton
    names = ma.state_names
    lines = ["ma", f"initial: {names[ma.initial]}",
             "goal:" + "".join(f" {names[g]}" for g in sorted(doc.goals))]
    for s, name in enumerate(names):
        lines.append(f"state {name}")
        for t, r in ma.rates[s].items():
            lines.append(f"  rate -> {names[t]} : {r!r}")
        for a, mu in ma.transitions[s]:
            lines.append(f"  action {ma.action_names[a]}")
            for t, p in mu.items():
                lines.append(f"    -> {names[t]} : {p!r}")
    return "\n".join(lines) + "\n"


def load_model(path) -> ModelDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    blocks: int
    game_states: int
    lb: float
    ub: float
    eps_hat: float
    delta: float
    steps: int
    refine_ms: float
    valiter_ms: float


TRACE_COLUMNS = tuple(f.name for f in fields(IterationRecord))


class TraceWriter:
    """CSV sink for refinement-loop records; writes the header once."""

    def __init__(self, stream: IO[str]):
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        self._header_done = False

    def write(self, row: IterationRecord) -> None:
        if not self._header_done:
            self._writer.writerow(TRACE_COLUMNS)
            self._header_done = True
        self._writer.writerow([getattr(row, c) for c in TRACE_COLUMNS])
        self._stream.flush()

    def write_all(self, rows: Iterable[IterationRecord]) -> None:
        for row in rows:
            self.write(row)


def write_trace_row(sink: TraceWriter, row: IterationRecord) -> None:
    sink.write(row)


def read_trace(stream: IO[str]) -> list[IterationRecord]:
    out = []
    for rec in csv.DictReader(stream):
        out.append(IterationRecord(
            iteration=int(rec["iteration"]), blocks=int(rec["blocks"]),
            game_states=int(rec["game_states"]), lb=float(rec["lb"]), ub=float(rec["ub"]),
            eps_hat=float(rec["eps_hat"]), delta=float(rec["delta"]), steps=int(rec["steps"]),
            refine_ms=float(rec["refine_ms"]), valiter_ms=float(rec["valiter_ms"])))
    return out
