#!/usr/bin/env python3
"""Run the small benchmark models in both modes and show how the bounds develop."""
from __future__ import annotations

import logging
import math

from mabound.driver import CheckRequest, Mode, check
from mabound.models import erlang_chain, fast_slow, six_state, two_state_ctmc, zeno_cycle

MODELS = {
    "two-state": (two_state_ctmc(), 1 - math.exp(-1)),
    "erlang-2": (erlang_chain(2, 2.0), 1 - 3 * math.exp(-2)),
    "fast-slow": (fast_slow(), None),
    "six-state": (six_state(), None),
    "zeno": (zeno_cycle(), None),
}


def main(tb: float = 1.0, epsilon: float = 0.01) -> None:
    logging.basicConfig(level=logging.ERROR)
    for name, (doc, exact) in MODELS.items():
        conc = check(CheckRequest(doc, tb, epsilon, mode=Mode.CONCRETE))
        res = check(CheckRequest(doc, tb, epsilon))
        ref = f"  exact={exact:.6f}" if exact is not None else ""
        print(f"{name}: concrete={conc.lb:.6f}  abstraction=[{res.lb:.6f}, "
              f"{res.ub + res.eps_hat_final:.6f}] blocks {res.records[0].blocks}->"
              f"{res.final_blocks} in {res.iterations} passes ({res.status.value}){ref}")
        shown = {r.blocks: r for r in res.records}
        for r in shown.values():
            print(f"    blocks={r.blocks:<3} lb={r.lb:.6f} ub={r.ub:.6f} eps_hat={r.eps_hat:.4g}")


if __name__ == "__main__":
    main()
