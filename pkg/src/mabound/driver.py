"""Abstraction-refinement loop with adaptive discretisation accuracy."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

from .abstraction import AbstractGame, Partition, build_game, initial_partition
from .analysis import Objective, solve
from .model import detect_probabilistic_end_components, make_goals_absorbing
from .modelio import IterationRecord, ModelDocument, TraceWriter
from .refinement import refine

log = logging.getLogger(__name__)

FIRST_PASS_ACCURACY = 0.5
MIN_EPS_HAT = 1e-6


class Mode(enum.Enum):
    ABSTRACTION = "abstraction"
    CONCRETE = "concrete"


class Status(enum.Enum):
    SUCCESS = "success"
    STALLED = "stalled"
    BUDGET = "budget"


@dataclass
class CheckRequest:
    model: ModelDocument
    tb: float
    epsilon: float
    objective: Objective = Objective.MAX
    mode: Mode = Mode.ABSTRACTION
    max_refinements: int = 200
    trace: TraceWriter | None = None

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.tb > 0:
            raise ValueError("time bound must be positive")
        self.objective = Objective(self.objective)
        self.mode = Mode(self.mode)


@dataclass
class CheckResult:
    """Bounds at the initial state; the true probability lies in
    ``[lb, ub + eps_hat_final]`` where ``eps_hat_final`` is the discretisation
    error certified by the final pass."""

    lb: float
    ub: float
    eps_hat_final: float
    iterations: int
    final_blocks: int
    game_states: int
    status: Status
    records: list[IterationRecord] = field(default_factory=list)
    partitions: list[Partition] = field(default_factory=list, repr=False)
    game: AbstractGame | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.SUCCESS

    def summary(self) -> str:
        return (f"lb={self.lb:.10g} ub={self.ub:.10g} eps_hat={self.eps_hat_final:.10g} "
                f"iterations={self.iterations} blocks={self.final_blocks} "
                f"game_states={self.game_states}")


def _prepare(req: CheckRequest):
    doc = req.model
    ma = make_goals_absorbing(doc.automaton, doc.goals)
    zeno = detect_probabilistic_end_components(ma)
    if zeno:
        log.warning("model has %d probabilistic end component(s); bounds stay sound", len(zeno))
    return ma, doc.goals


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000.0, 3)


def check(req: CheckRequest) -> CheckResult:
    if req.mode is Mode.CONCRETE:
        return check_concrete(req)
    ma, goals = _prepare(req)
    eps = req.epsilon
    partition = initial_partition(ma, goals)
    eps_hat = min(1.0, FIRST_PASS_ACCURACY)
    records: list[IterationRecord] = []
    partitions = [partition]
    refine_ms = 0.0
    stall_retry_used = False
    iteration = 0
    refinements = 0
    status = Status.BUDGET
    while True:
        iteration += 1
        t0 = time.perf_counter()
        game = build_game(ma, partition, goals)
        sol = solve(game, req.tb, eps_hat, req.objective)
        valiter_ms = _ms(t0)
        lb, ub = sol.lb, sol.ub
        gap = ub - lb
        # error actually certified by this pass; never above eps_hat
        certified = sol.plan.error_bound
        rec = IterationRecord(iteration, len(partition), game.num_states, lb, ub, eps_hat,
                              sol.plan.delta, sol.plan.steps, refine_ms, valiter_ms)
        records.append(rec)
        if req.trace is not None:
            req.trace.write(rec)
        log.info("pass %d: blocks=%d lb=%.6g ub=%.6g eps_hat=%.4g n=%d", iteration,
                 len(partition), lb, ub, eps_hat, sol.plan.steps)
        refine_ms = 0.0
        if gap + certified <= eps:
            status = Status.SUCCESS
            break
        if gap <= eps:
            eps_hat = max(eps_hat / 2, eps_hat - eps)
            if eps_hat < MIN_EPS_HAT:
                break
            continue
        if refinements >= req.max_refinements:
            break
        refinements += 1
        t0 = time.perf_counter()
        report = refine(sol.discrete, partition, sol.values, sol.lb_scheduler,
                        sol.ub_scheduler, eps)
        refine_ms = _ms(t0)
        if report.stalled:
            if stall_retry_used:
                status = Status.STALLED
                break
            log.warning("refinement stalled; halving eps_hat once")
            stall_retry_used = True
            eps_hat = eps_hat / 2
            continue
        stall_retry_used = False
        partition = report.new_partition
        partitions.append(partition)
    return CheckResult(lb, ub, certified, iteration, len(partition), game.num_states, status,
                       records, partitions, game)


def check_concrete(req: CheckRequest) -> CheckResult:
    """Singleton-partition baseline: one pass, lb and ub coincide."""
    ma, goals = _prepare(req)
    partition = Partition.singleton(ma.num_states)
    t0 = time.perf_counter()
    game = build_game(ma, partition, goals)
    sol = solve(game, req.tb, req.epsilon, req.objective, keep_history=False)
    valiter_ms = _ms(t0)
    rec = IterationRecord(1, len(partition), game.num_states, sol.lb, sol.ub, req.epsilon,
                          sol.plan.delta, sol.plan.steps, 0.0, valiter_ms)
    if req.trace is not None:
        req.trace.write(rec)
    return CheckResult(sol.lb, sol.ub, sol.plan.error_bound, 1, len(partition), game.num_states,
                       Status.SUCCESS, [rec], [partition], game)
