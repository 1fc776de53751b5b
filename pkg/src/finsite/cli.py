"""Command-line driver: every engine verdict behind one deterministic CLI.

Exit codes: 0 = PASS, 1 = FAIL (with witness in the report), 2 = input error.
"""

from __future__ import annotations

import argparse
import sys

from . import io, randsuite
from .cosheaf import (Precosheaf, check_cosheaf, cosheafify, costalk,
                      is_smooth)
from .errors import EngineError, InvalidDocument
from .report import CheckReport
from .sheaf import Presheaf, check_sheaf, sheafify
from .spaces import builtin_demos, demo_by_name
from .towers import is_rudimentary_at_depth


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finsite",
                                description="exact (co)sheaf checks on finite sites")
    sub = p.add_subparsers(dest="command")

    q = sub.add_parser("validate", help="site axioms")
    q.add_argument("site")

    q = sub.add_parser("check-cosheaf", help="classify a precosheaf")
    q.add_argument("precosheaf")
    q.add_argument("--depth", type=int, default=6)

    q = sub.add_parser("check-sheaf", help="classify a presheaf")
    q.add_argument("presheaf")

    q = sub.add_parser("cosheafify", help="double plus construction")
    q.add_argument("precosheaf")
    q.add_argument("--depth", type=int, default=6)
    q.add_argument("--out")

    q = sub.add_parser("sheafify", help="double plus construction, presheaf side")
    q.add_argument("presheaf")
    q.add_argument("--out")

    q = sub.add_parser("costalk", help="costalk tower at a declared point")
    q.add_argument("precosheaf")
    q.add_argument("--point", required=True)
    q.add_argument("--depth", type=int, default=6)

    q = sub.add_parser("smooth", help="smoothness verdict")
    q.add_argument("precosheaf")
    q.add_argument("--depth", type=int, default=6)

    q = sub.add_parser("demo", help="run a named demo bundle")
    q.add_argument("name")
    q.add_argument("--depth", type=int, default=6)

    q = sub.add_parser("oracle-suite", help="randomized property suite")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--cases", type=int, default=25)
    return p


def _emit(report: CheckReport) -> int:
    sys.stdout.write(io.dumps(report.to_json()))
    return 0 if report.passed else 1


def _fail_input(message: str) -> int:
    sys.stdout.write(io.dumps({"kind": "report", "verdict": "INPUT-ERROR",
                               "witnesses": [message], "trace": []}))
    return 2


def _tower_profile(t) -> list[str]:
    out = []
    for lv in t.levels:
        if hasattr(lv, "elements"):
            out.append(f"size {len(lv.elements)}")
        else:
            torsion, free = lv.invariants()
            out.append(f"invariants {list(torsion)} free {free}")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command is None:
        parser.print_usage(sys.stdout)
        return 2

    try:
        if args.command == "validate":
            spec = io.load(args.site)
            from .category import validate_site
            return _emit(validate_site(spec))

        if args.command == "check-cosheaf":
            a = io.load(args.precosheaf, depth=args.depth)
            if not isinstance(a, Precosheaf):
                return _fail_input("document is not a precosheaf")
            return _emit(check_cosheaf(a, args.depth))

        if args.command == "check-sheaf":
            a = io.load(args.presheaf)
            if not isinstance(a, Presheaf):
                return _fail_input("document is not a presheaf")
            return _emit(check_sheaf(a))

        if args.command == "cosheafify":
            a = io.load(args.precosheaf, depth=args.depth)
            if not isinstance(a, Precosheaf):
                return _fail_input("document is not a precosheaf")
            result = cosheafify(a, args.depth)
            if args.out:
                io.save(result.precosheaf, args.out)
            return _emit(result.report)

        if args.command == "sheafify":
            a = io.load(args.presheaf)
            if not isinstance(a, Presheaf):
                return _fail_input("document is not a presheaf")
            result = sheafify(a)
            if args.out:
                io.save(result.presheaf, args.out)
            return _emit(result.report)

        if args.command == "costalk":
            a = io.load(args.precosheaf, depth=args.depth)
            if not isinstance(a, Precosheaf):
                return _fail_input("document is not a precosheaf")
            p = a.point_filter(args.point)
            tower = costalk(a, p, args.depth)
            rv = is_rudimentary_at_depth(tower, args.depth)
            report = CheckReport(
                verdict="PASS",
                depth=args.depth if a.site.has_chains() else None,
                classification=rv.verdict,
                witnesses=(),
                trace=tuple(f"level {k}: {line}" for k, line in enumerate(_tower_profile(tower))),
            )
            return _emit(report)

        if args.command == "smooth":
            a = io.load(args.precosheaf, depth=args.depth)
            if not isinstance(a, Precosheaf):
                return _fail_input("document is not a precosheaf")
            return _emit(is_smooth(a, args.depth))

        if args.command == "demo":
            try:
                demo = demo_by_name(args.name)
            except EngineError:
                names = ", ".join(d.name for d in builtin_demos())
                return _fail_input(f"unknown demo {args.name!r}; available: {names}")
            _, data = demo.make(args.depth)
            if demo.kind == "check-cosheaf":
                inner = check_cosheaf(data, args.depth)
            elif demo.kind == "smooth":
                inner = is_smooth(data, args.depth)
            else:
                inner = check_sheaf(data)
            actual = inner.classification
            if demo.expected == "NOT-SHEAF":
                matched = actual in ("SEPARATED", "NOT-SEPARATED")
            elif demo.expected == "NOT-COSHEAF":
                matched = actual in ("COSEPARATED", "NOT-COSEPARATED")
            else:
                matched = actual == demo.expected
            witnesses = ()
            if not matched:
                witnesses = inner.witnesses or (
                    f"verdict mismatch: expected {demo.expected}, got {actual}",)
            report = CheckReport(
                verdict="PASS" if matched else "FAIL",
                depth=inner.depth,
                classification=actual,
                witnesses=witnesses,
                trace=(f"expected: {demo.expected}", f"actual: {actual}", *inner.trace),
            )
            return _emit(report)

        if args.command == "oracle-suite":
            report = randsuite.oracle_suite(args.seed, args.cases)
            return _emit(report)
    except InvalidDocument as exc:
        return _fail_input(str(exc))
    except EngineError as exc:
        return _fail_input(str(exc))
    return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
