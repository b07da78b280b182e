"""Command line front end: ``analyze``, ``verify`` and ``compare``.

Exit status: 0 when every gating check passes, 1 when one fails, 2 for usage
or scenario errors. The default seed can be set with CONFORMAL_ZEROS_SEED.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .report import Report, compare_jets, run, theorem_report, write
from .scenario import ScenarioError, load_scenario
from .theorems import SUITES, verify_theorem

SEED_ENV = "CONFORMAL_ZEROS_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(" ", "").split(",") if t], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed() -> int | None:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"{SEED_ENV} must be an integer, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conformal-zeros", description="Zero sets and jets of conformal fields on flat pseudo-Euclidean space.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="run the tasks of a scenario file")
    a.add_argument("scenario")
    a.add_argument("--out", help="write the report here instead of stdout")
    a.add_argument("--seed", type=int)
    a.add_argument("--tol", type=float)
    a.add_argument("--format", choices=["human", "machine"])

    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("theorem", choices=[*SUITES, "all"])
    v.add_argument("--scenario", help="use this scenario's field instead of the built-in fixture")
    v.add_argument("--out")
    v.add_argument("--seed", type=int)
    v.add_argument("--tol", type=float)
    v.add_argument("--format", choices=["human", "machine"], default="human")

    c = sub.add_parser("compare", help="decide conformal equivalence of the jets of two fields at two zeros")
    c.add_argument("scenario_a")
    c.add_argument("scenario_b")
    c.add_argument("--at", type=_point, action="append", required=True, help="zero of A, then zero of B (comma separated)")
    c.add_argument("--jets", type=int, choices=[1, 2], default=2)
    c.add_argument("--budget", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.add_argument("--format", choices=["human", "machine"], default="human")
    return parser


def _analyze(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    s = load_scenario(args.scenario, {"seed": seed, "tol": args.tol})
    fmt = args.format or s.output["format"]
    report = run(s)
    text = write(report, fmt, args.out or s.output["path"])
    if not (args.out or s.output["path"]):
        sys.stdout.write(text)
    return report.exit_status


def _verify(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    seed = 42 if seed is None else seed
    space = f = None
    tol = args.tol
    if args.scenario:
        s = load_scenario(args.scenario, {"seed": seed, "tol": tol})
        space, f, tol = s.space, s.field, s.defaults["tol"]
    tol = 1e-9 if tol is None else tol
    results = verify_theorem(args.theorem, space, f, seed, tol)
    report = theorem_report(results, seed, tol)
    text = write(report, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    return report.exit_status


def _compare(args) -> int:
    if len(args.at) != 2:
        raise ScenarioError("compare needs exactly two --at points (one per scenario)")
    seed = args.seed if args.seed is not None else _default_seed()
    a = load_scenario(args.scenario_a, {"seed": seed})
    b = load_scenario(args.scenario_b, {"seed": seed})
    for s, x, name in ((a, args.at[0], "first"), (b, args.at[1], "second")):
        if x.shape != (s.space.n,):
            raise ScenarioError(f"{name} --at point has {x.shape[0]} coordinates, the space has dimension {s.space.n}")
    budget = args.budget if args.budget is not None else a.defaults["budget"]
    rec = compare_jets(a.field, a.space, args.at[0], b.field, b.space, args.at[1], args.jets, budget, a.defaults["seed"], a.defaults["tol"])
    report = Report()
    report.add({"record": "comparison", **rec})
    text = write(report, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0 if rec["verdict"]["status"] != "undecided" else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"analyze": _analyze, "verify": _verify, "compare": _compare}
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # point is not a zero, wrong dimension for a jet, ...
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
