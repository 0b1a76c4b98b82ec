"""Command line: ``mabound check --model FILE --time-bound T --epsilon E``."""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from .driver import CheckRequest, Mode, Status, check
from .modelio import ModelSyntaxError, TraceWriter, load_model

EXIT_OK, EXIT_USAGE, EXIT_NOT_MET = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    x = float(text)
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return x


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mabound", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    c = sub.add_parser("check", help="bound time-bounded reachability of a model")
    c.add_argument("--model", required=True, help="model file")
    c.add_argument("--time-bound", type=_positive, required=True)
    c.add_argument("--epsilon", type=_probability, required=True)
    c.add_argument("--objective", choices=["max", "min"], default="max")
    c.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.ABSTRACTION.value)
    c.add_argument("--max-refinements", type=int, default=200)
    c.add_argument("--trace", metavar="FILE.csv", help="write one CSV row per loop pass")
    c.add_argument("--dump-game", metavar="FILE", help="write the final game graph")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s: %(message)s")
    try:
        doc = load_model(args.model)
    except ModelSyntaxError as exc:
        print(f"{args.model}:{exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"{args.model}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    with contextlib.ExitStack() as stack:
        trace = None
        if args.trace:
            trace = TraceWriter(stack.enter_context(open(args.trace, "w", encoding="utf-8")))
        req = CheckRequest(doc, args.time_bound, args.epsilon, args.objective, args.mode,
                           args.max_refinements, trace)
        result = check(req)
    if args.dump_game and result.game is not None:
        with open(args.dump_game, "w", encoding="utf-8") as fh:
            fh.write(result.game.dump())
    print(result.summary())
    if result.status is not Status.SUCCESS:
        print(f"bound not met: {result.status.value}", file=sys.stderr)
        return EXIT_NOT_MET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
