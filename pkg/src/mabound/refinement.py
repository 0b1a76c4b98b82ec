"""Scheduler-driven refinement of the partition.

Player-2 states where the lower- and upper-bound schedulers disagree (and the
bounds are far apart) get their block split by comparing the distributions
of the competing choices under a value-weighted L1 pseudo-metric.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .abstraction import Kind, Partition
from .analysis import DiscreteGame, Scheduler, ValueTable

SPLITTABLE = (Kind.ACTION, Kind.MARKOV_BLOCK)


@dataclass(frozen=True)
class DivergenceRecord:
    state: int
    step: int
    lb_choice: int
    ub_choice: int
    gap: float


@dataclass(frozen=True)
class Split:
    block: frozenset[int]
    parts: tuple[frozenset[int], ...]
    diameter: float


@dataclass
class RefinementReport:
    divergent: list[DivergenceRecord]
    splits: list[Split]
    new_partition: Partition
    stalled: bool = field(default=False)


def reachable_steps(dg: DiscreteGame, sched: Scheduler) -> np.ndarray:
    """``out[k, v]``: ``v`` is visited with ``k`` steps left under ``sched`` from the initial state."""
    choices = sched.choices
    n = choices.shape[0] - 1
    nv, nt = dg.num_states, len(dg.trans_source)
    out = np.zeros((n + 1, nv), dtype=bool)
    markov_t = dg.markov_matrix.T.tocsr()
    cur = np.zeros(nv, dtype=bool)
    cur[dg.game.initial] = True
    for k in range(n, -1, -1):
        picked = choices[k][choices[k] >= 0]
        chosen = np.zeros(nt, dtype=bool)
        chosen[picked] = True
        while True:
            active = (chosen & cur[dg.trans_source]).astype(float)
            new = cur | ((dg.trans_matrix_t @ active) > 0)
            if np.array_equal(new, cur):
                break
            cur = new
        out[k] = cur
        if k > 0:
            nxt = np.zeros(nv, dtype=bool)
            if len(dg.markov_nodes):
                nxt = (markov_t @ cur[dg.markov_nodes].astype(float)) > 0
            cur = nxt
    return out


def find_divergent_states(dg: DiscreteGame, values: ValueTable, slb: Scheduler,
                          sub: Scheduler, eps: float) -> list[DivergenceRecord]:
    g = dg.game
    candidates = np.array([st.kind in SPLITTABLE and not st.goal for st in g.states])
    reach = reachable_steps(dg, slb) | reachable_steps(dg, sub)
    gap = values.ub - values.lb
    mask = reach & (slb.choices != sub.choices) & (gap > eps) & candidates[None, :]
    records = []
    for v in np.flatnonzero(mask.any(axis=0)):
        k = int(np.flatnonzero(mask[:, v]).max())
        records.append(DivergenceRecord(int(v), k, int(slb.choices[k, v]),
                                        int(sub.choices[k, v]), float(gap[k, v])))
    return records


def pseudo_metric(mu1: Mapping[int, float], mu2: Mapping[int, float],
                  values: ValueTable | np.ndarray) -> float:
    """Sum of ``|mu1(v) - mu2(v)|`` weighted by the bound gap of ``v`` at the full time bound."""
    gap = values.final_gap if isinstance(values, ValueTable) else values
    total = 0.0
    for v in set(mu1) | set(mu2):
        w = gap[v]
        if w > 0:
            total += abs(mu1.get(v, 0.0) - mu2.get(v, 0.0)) * w
    return total


def choice_distribution(dg: DiscreteGame, t: int) -> dict[int, float]:
    """Distribution compared by the metric: the lifted distribution of an action
    choice, or the one-step distribution of the concrete Markovian state chosen."""
    g = dg.game
    tr = g.transitions[t]
    if g.states[tr.source].kind is Kind.MARKOV_BLOCK:
        (target,) = tr.distribution
        return dg.step_dist[target]
    return tr.distribution


def split_block(dg: DiscreteGame, p: Partition, rec: DivergenceRecord,
                values: ValueTable) -> list[frozenset[int]]:
    g = dg.game
    st = g.states[rec.state]
    if st.kind not in SPLITTABLE:
        raise ValueError(f"state {rec.state} cannot be split")
    out = list(g.outgoing(rec.state))
    if len(out) < 2:
        raise RuntimeError(f"state {rec.state} has a single choice and cannot diverge")
    block = p.blocks[st.block]
    gap = values.final_gap
    dists = {t: choice_distribution(dg, t) for t in out}
    mu_lb, mu_ub = dists[rec.lb_choice], dists[rec.ub_choice]
    d = pseudo_metric(mu_lb, mu_ub, gap)
    radius = d / 2 * (1 + 1e-12)

    def ball(mu):
        members: set[int] = set()
        for t in out:
            if pseudo_metric(mu, dists[t], gap) <= radius:
                members |= g.transitions[t].origin
        return members

    parts = []
    if d > 0:
        low = ball(mu_lb) & block
        high = (ball(mu_ub) & block) - low
        parts = [frozenset(x) for x in (low, high, block - low - high) if x]
    if len(parts) < 2:
        # classic split on the two diverging origin groups
        low = g.transitions[rec.lb_choice].origin & block
        high = (g.transitions[rec.ub_choice].origin & block) - low
        parts = [frozenset(x) for x in (low, high, block - low - high) if x]
    return parts if len(parts) >= 2 else [block]


def refine(dg: DiscreteGame, p: Partition, values: ValueTable, slb: Scheduler,
           sub: Scheduler, eps: float) -> RefinementReport:
    records = find_divergent_states(dg, values, slb, sub, eps)
    labels: list[tuple] = [(b,) for b in p.block_of]
    splits = []
    for rec in sorted(records, key=lambda r: r.state):
        parts = split_block(dg, p, rec, values)
        if len(parts) < 2:
            continue
        block = p.blocks[dg.game.states[rec.state].block]
        d = pseudo_metric(choice_distribution(dg, rec.lb_choice),
                          choice_distribution(dg, rec.ub_choice), values)
        splits.append(Split(block, tuple(parts), d))
        for i, part in enumerate(parts):
            for s in part:
                labels[s] = labels[s] + (i,)
    groups: dict[tuple, list[int]] = {}
    for s, lab in enumerate(labels):
        groups.setdefault(lab, []).append(s)
    new = Partition.from_blocks(groups.values(), p.num_states)
    return RefinementReport(records, splits, new, stalled=len(new) == len(p))
