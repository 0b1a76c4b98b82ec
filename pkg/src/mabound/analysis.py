"""Discretisation and value iteration on the abstract game.

Values are indexed by the number ``k`` of remaining discretisation steps.
Within a step, concrete Markovian states read the previous slice; all other
states are resolved by immediate transitions inside the current slice,
layer by layer in reverse topological order of the immediate sub-graph.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .abstraction import AbstractGame, Kind

INNER_TOL = 1e-12
INNER_MAX_SWEEPS = 10_000
CYCLE_TIE_TOL = 1e-10
NEWTON_MAX_ITER = 100


class Objective(enum.Enum):
    MAX = "max"
    MIN = "min"


class Bound(enum.Enum):
    LB = "lb"
    UB = "ub"


def _log1p_minus_x(x: float) -> float:
    if abs(x) < 1e-2:
        # alternating series, avoids cancelling two nearly equal terms
        return math.fsum((-1) ** (k + 1) * x**k / k for k in range(2, 12))
    return math.log1p(x) - x


def _log_survival(lambda_max: float, tb: float, delta: float) -> float:
    # log of e^{-lambda tb} (1 + lambda delta)^{tb/delta}
    return (tb / delta) * _log1p_minus_x(lambda_max * delta)


def discretization_error(lambda_max: float, tb: float, n: int) -> float:
    """Upper bound on the probability mass lost by an ``n``-step discretisation."""
    if n <= 0 or int(n) != n:
        raise ValueError("number of steps must be a positive integer")
    if lambda_max <= 0 or tb <= 0:
        raise ValueError("lambda_max and tb must be positive")
    return -math.expm1(_log_survival(lambda_max, tb, tb / n))


def _error_at(lambda_max: float, tb: float, delta: float) -> float:
    return -math.expm1(_log_survival(lambda_max, tb, delta))


def _error_slope(lambda_max: float, tb: float, delta: float) -> float:
    x = lambda_max * delta
    dh = (tb / delta**2) * (x / (1.0 + x) - math.log1p(x))
    return -math.exp(_log_survival(lambda_max, tb, delta)) * dh


@dataclass(frozen=True)
class DiscretizationPlan:
    delta: float
    steps: int
    lambda_max: float
    error_bound: float
    accuracy: float


def _plan(lambda_max: float, tb: float, eps_hat: float, n: int) -> DiscretizationPlan:
    # the real root is only known to rounding; settle on the smallest admissible n
    n = max(1, n)
    while discretization_error(lambda_max, tb, n) > eps_hat:
        n += 1
    while n > 1 and discretization_error(lambda_max, tb, n - 1) <= eps_hat:
        n -= 1
    return DiscretizationPlan(tb / n, n, lambda_max, discretization_error(lambda_max, tb, n),
                              eps_hat)


def find_step_size(lambda_max: float, tb: float, eps_hat: float) -> DiscretizationPlan:
    """Largest step ``tb / n`` whose discretisation error stays within ``eps_hat``.

    Newton iteration on ``ER(delta) - eps_hat``, started from the root of the
    quadratic over-approximation ``n (lambda delta)^2 / 2``, safeguarded by a
    bracket; bisection takes over if Newton has not converged after 100 steps.
    """
    if not 0 < eps_hat < 1:
        raise ValueError("eps_hat must lie in (0, 1)")
    if tb <= 0:
        raise ValueError("time bound must be positive")
    if lambda_max <= 0:
        return DiscretizationPlan(tb, 1, lambda_max, 0.0, eps_hat)
    if _error_at(lambda_max, tb, tb) <= eps_hat:
        return _plan(lambda_max, tb, eps_hat, 1)

    def f(d):
        return _error_at(lambda_max, tb, d) - eps_hat

    lo, hi = 0.0, tb
    delta = min(2.0 * eps_hat / (lambda_max**2 * tb), tb)
    root = None
    for _ in range(NEWTON_MAX_ITER):
        fd = f(delta)
        if fd <= 0:
            lo = max(lo, delta)
        else:
            hi = min(hi, delta)
        if abs(fd) <= 1e-15:
            root = delta
            break
        if hi - lo <= 1e-15 * hi:
            root = lo
            break
        slope = _error_slope(lambda_max, tb, delta)
        step = delta - fd / slope if slope > 0 else math.nan
        delta = step if lo < step < hi else 0.5 * (lo + hi)
    if root is None:
        lo, hi = 0.0, tb
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) <= 0:
                lo = mid
            else:
                hi = mid
        root = lo
        if root <= 0:
            raise RuntimeError("step-size search failed")
    return _plan(lambda_max, tb, eps_hat, math.ceil(tb / root))


def lambda_max(g: AbstractGame) -> float:
    rates = [t.rate for t in g.transitions if not t.immediate]
    return max(rates, default=0.0)


@dataclass
class _Layer:
    nodes: np.ndarray      # game states evaluated in this layer
    trans: np.ndarray      # their outgoing transitions, grouped by node
    seg: np.ndarray        # start offset of each node inside ``trans``
    matrix: sp.csr_matrix  # rows = trans, columns = game states
    player1: np.ndarray    # bool per node
    cyclic: bool


class DiscreteGame:
    """Game with Markov transitions replaced by their one-step distributions."""

    def __init__(self, game: AbstractGame, delta: float):
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.game = game
        self.delta = delta
        nv = game.num_states
        self.num_states = nv
        self.goal = np.array([st.goal for st in game.states], dtype=bool)

        # one-step distributions of concrete Markovian states
        self.step_dist: dict[int, dict[int, float]] = {}
        for v, st in enumerate(game.states):
            if st.kind is not Kind.MARKOV_CONCRETE:
                continue
            (t,) = [game.transitions[i] for i in game.outgoing(v)]
            move = -math.expm1(-t.rate * delta)
            pred = game.predecessor(v)
            dist = {w: move * p for w, p in t.distribution.items()}
            dist[pred] = dist.get(pred, 0.0) + math.exp(-t.rate * delta)
            self.step_dist[v] = dict(sorted(dist.items()))
        self.markov_nodes = np.array(sorted(self.step_dist), dtype=np.int64)
        self.markov_matrix = _csr([self.step_dist[v] for v in self.markov_nodes], nv)

        self.trans_source = np.array([t.source for t in game.transitions], dtype=np.int64)
        self.trans_matrix = _csr([t.distribution for t in game.transitions], nv)
        self.immediate = np.array([t.immediate for t in game.transitions], dtype=bool)

        choice = [v for v, st in enumerate(game.states)
                  if not st.goal and st.kind in (Kind.PROB_BLOCK, Kind.ACTION, Kind.MARKOV_BLOCK)
                  and len(game.outgoing(v)) > 0]
        self.choice_nodes = np.array(choice, dtype=np.int64)
        self.layers = self._layers(choice)
        self.trans_matrix_t = sp.csr_matrix(self.trans_matrix.T)

    def _layers(self, choice: list[int]) -> list[_Layer]:
        g = self.game
        is_choice = set(choice)
        graph = nx.DiGraph()
        graph.add_nodes_from(choice)
        for v in choice:
            for w in g.succ(v):
                if w in is_choice:
                    graph.add_edge(v, w)
        cond = nx.condensation(graph)
        depth: dict[int, int] = {}
        for c in reversed(list(nx.topological_sort(cond))):
            depth[c] = 1 + max((depth[d] for d in cond.successors(c)), default=-1)
        by_depth: dict[int, list[int]] = {}
        for c, d in depth.items():
            by_depth.setdefault(d, []).append(c)
        layers = []
        for d in sorted(by_depth):
            comps = by_depth[d]
            nodes = sorted(v for c in comps for v in cond.nodes[c]["members"])
            cyclic = any(_is_cyclic(graph, cond.nodes[c]["members"]) for c in comps)
            trans, seg = [], []
            for v in nodes:
                seg.append(len(trans))
                trans.extend(g.outgoing(v))
            trans = np.array(trans, dtype=np.int64)
            player1 = np.array([g.states[v].kind is Kind.PROB_BLOCK for v in nodes], dtype=bool)
            layers.append(_Layer(np.array(nodes, dtype=np.int64), trans,
                                 np.array(seg, dtype=np.int64),
                                 self.trans_matrix[trans], player1, cyclic))
        return layers


def _is_cyclic(graph: nx.DiGraph, members: set[int]) -> bool:
    if len(members) > 1:
        return True
    (v,) = members
    return graph.has_edge(v, v)


def _csr(rows: list[dict[int, float]], ncols: int) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for row in rows:
        for k, val in sorted(row.items()):
            indices.append(k)
            data.append(val)
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                          np.array(indptr, dtype=np.int64)), shape=(len(rows), ncols))


def discretize_game(g: AbstractGame, delta: float) -> DiscreteGame:
    return DiscreteGame(g, delta)


@dataclass
class Scheduler:
    """Step-indexed choices: ``choices[k, v]`` is the transition taken at ``v``
    with ``k`` steps remaining, -1 where ``v`` has no choice."""

    game: AbstractGame
    choices: np.ndarray

    def concrete(self, v: int, k: int) -> int:
        if self.game.states[v].kind is not Kind.PROB_BLOCK:
            raise ValueError(f"state {v} is not a player-1 state")
        return int(self.choices[k, v])

    def abstract(self, v: int, k: int) -> int:
        if self.game.states[v].kind not in (Kind.ACTION, Kind.MARKOV_BLOCK):
            raise ValueError(f"state {v} is not a player-2 choice state")
        return int(self.choices[k, v])

    def action(self, v: int, k: int) -> int | None:
        """Action chosen by player 1 at ``v``: the action of the selected menu entry."""
        t = self.game.transitions[self.concrete(v, k)]
        (target,) = t.distribution
        return self.game.states[target].action


def _signs(dg: DiscreteGame, objective: Objective, bound: Bound) -> list[np.ndarray]:
    s1 = 1.0 if objective is Objective.MAX else -1.0
    s2 = 1.0 if bound is Bound.UB else -1.0
    return [np.where(layer.player1, s1, s2) for layer in dg.layers]


def _eval_layer(layer: _Layer, sign: np.ndarray, p: np.ndarray, choice_out: np.ndarray | None):
    sign_t = np.repeat(sign, np.diff(np.append(layer.seg, len(layer.trans))))
    sweeps = 0
    while True:
        sv = (layer.matrix @ p) * sign_t
        best = np.maximum.reduceat(sv, layer.seg)
        new = best * sign
        change = np.max(np.abs(new - p[layer.nodes])) if layer.cyclic else 0.0
        p[layer.nodes] = new
        sweeps += 1
        if not layer.cyclic or change < INNER_TOL or sweeps >= INNER_MAX_SWEEPS:
            break
    if choice_out is None:
        return
    nt = len(layer.trans)
    counts = np.diff(np.append(layer.seg, nt))
    if not layer.cyclic:
        is_opt = sv == np.repeat(best, counts)
        local = np.where(is_opt, np.arange(nt), nt)
        choice_out[layer.nodes] = layer.trans[np.minimum.reduceat(local, layer.seg)]
        return
    # Inside a cycle an optimal choice may loop forever; prefer optimal choices
    # that move towards states already settled (attractor ranking).
    is_opt = sv >= np.repeat(best, counts) - CYCLE_TIE_TOL
    first_opt = np.minimum.reduceat(np.where(is_opt, np.arange(nt), nt), layer.seg)
    choice = layer.trans[first_opt]
    settled = np.ones(len(p))
    settled[layer.nodes] = 0.0
    done = np.zeros(len(layer.nodes), dtype=bool)
    while True:
        hits = is_opt & ((layer.matrix @ settled) > 0)
        first_hit = np.minimum.reduceat(np.where(hits, np.arange(nt), nt), layer.seg)
        new = (first_hit < nt) & ~done
        if not new.any():
            break
        choice[new] = layer.trans[first_hit[new]]
        done |= new
        settled[layer.nodes[new]] = 1.0
    choice_out[layer.nodes] = choice


def value_iteration(dg: DiscreteGame, n: int, objective: Objective = Objective.MAX,
                    bound: Bound = Bound.UB, keep_history: bool = True
                    ) -> tuple[np.ndarray, Scheduler]:
    """Backward induction over ``n`` steps.

    Returns the values ``(n + 1, |V|)`` and the step-indexed scheduler; with
    ``keep_history=False`` only the slice for ``k = n`` is kept.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    objective, bound = Objective(objective), Bound(bound)
    nv = dg.num_states
    base = dg.goal.astype(float)
    if objective is Objective.MIN:
        # '*' punishes player 1 for picking an action some block member lacks
        base[dg.game.bottom] = 1.0
    signs = _signs(dg, objective, bound)
    rows = n + 1 if keep_history else 1
    values = np.empty((rows, nv))
    choices = np.full((rows, nv), -1, dtype=np.int32)
    prev = None
    for k in range(n + 1):
        p = base.copy()
        if k > 0 and len(dg.markov_nodes):
            p[dg.markov_nodes] = dg.markov_matrix @ prev
        row = k if keep_history else 0
        for layer, sign in zip(dg.layers, signs):
            _eval_layer(layer, sign, p, choices[row])
        values[row] = p
        prev = p
    return values, Scheduler(dg.game, choices)


@dataclass
class ValueTable:
    lb: np.ndarray
    ub: np.ndarray

    @property
    def steps(self) -> int:
        return self.lb.shape[0] - 1

    def final(self, bound: Bound | str) -> np.ndarray:
        return (self.lb if Bound(bound) is Bound.LB else self.ub)[-1]

    @property
    def final_gap(self) -> np.ndarray:
        return self.ub[-1] - self.lb[-1]


@dataclass
class Solution:
    plan: DiscretizationPlan
    values: ValueTable
    lb_scheduler: Scheduler
    ub_scheduler: Scheduler
    discrete: DiscreteGame

    @property
    def lb(self) -> float:
        return float(self.values.lb[-1, self.discrete.game.initial])

    @property
    def ub(self) -> float:
        return float(self.values.ub[-1, self.discrete.game.initial])


def solve(game: AbstractGame, tb: float, eps_hat: float,
          objective: Objective = Objective.MAX, keep_history: bool = True) -> Solution:
    if tb <= 0:
        raise ValueError("time bound must be positive")
    plan = find_step_size(lambda_max(game), tb, eps_hat)
    dg = discretize_game(game, plan.delta)
    lb, slb = value_iteration(dg, plan.steps, objective, Bound.LB, keep_history)
    ub, sub = value_iteration(dg, plan.steps, objective, Bound.UB, keep_history)
    return Solution(plan, ValueTable(lb, ub), slb, sub, dg)
