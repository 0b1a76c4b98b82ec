#!/usr/bin/env python3
"""Concrete vs. abstraction on polling models of growing size.

Prints one row per instance (states, times, blocks, bounds) and writes the
per-pass lb/ub trace of every abstraction run as CSV for plotting.
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

from mabound.driver import CheckRequest, Mode, check
from mabound.modelio import TraceWriter
from mabound.models import polling_system


@dataclass
class Config:
    sizes: tuple[tuple[int, int], ...] = ((2, 2), (2, 3), (3, 2), (2, 4))
    tb: float = 1.0
    epsilon: float = 0.01
    out_dir: Path = Path("runs")


def run(cfg: Config) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    header = (f"{'model':>10} {'states':>7} {'conc s':>8} {'value':>9} | "
              f"{'blocks':>6} {'game':>5} {'abs s':>7} {'lb':>9} {'ub':>9} {'passes':>6}")
    print(header)
    print("-" * len(header))
    for q, j in cfg.sizes:
        doc = polling_system(q, j)
        name = f"poll-{q}-{j}"
        t0 = time.perf_counter()
        conc = check(CheckRequest(doc, cfg.tb, cfg.epsilon, mode=Mode.CONCRETE))
        t_conc = time.perf_counter() - t0
        with open(cfg.out_dir / f"{name}.csv", "w", encoding="utf-8") as fh:
            t0 = time.perf_counter()
            res = check(CheckRequest(doc, cfg.tb, cfg.epsilon, trace=TraceWriter(fh)))
            t_abs = time.perf_counter() - t0
        print(f"{name:>10} {doc.automaton.num_states:>7} {t_conc:>8.2f} {conc.lb:>9.5f} | "
              f"{res.final_blocks:>6} {res.game_states:>5} {t_abs:>7.2f} {res.lb:>9.5f} "
              f"{res.ub:>9.5f} {res.iterations:>6}  {res.status.value}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tb", type=float, default=Config.tb)
    ap.add_argument("--epsilon", type=float, default=Config.epsilon)
    ap.add_argument("--out-dir", type=Path, default=Config.out_dir)
    ap.add_argument("--size", nargs=2, type=int, action="append", metavar=("QUEUE", "TYPES"),
                    help="polling instance; repeatable")
    args = ap.parse_args()
    sizes = tuple(tuple(s) for s in args.size) if args.size else Config.sizes
    run(Config(sizes, args.tb, args.epsilon, args.out_dir))


if __name__ == "__main__":
    main()
