"""Command-line interface: check, falsify, simulate, lie, emit-smt, catalog.

Exit codes for `check`: 0 proved, 1 refuted (an obligation falsified with an
exact counterexample), 2 unknown / conditionally proved / rule refused,
3 input error.  All configuration is taken from flags; identical inputs with
identical seeds and budgets produce byte-identical output.
"""

from __future__ import annotations

import argparse
import pathlib
import sys
from fractions import Fraction

from . import arith, sim
from .errors import OdelivError, RuleRefused
from .kernel import PROVED, REFUTED, render_trace
from .rules import CheckConfig, Checker, apply_rule
from .symbolic import higher_lie
from .syntax import parse_poly, parse_problem, print_poly


def _load(path: str):
    try:
        text = pathlib.Path(path).read_text()
    except OSError as e:
        raise OdelivError(f"cannot read {path}: {e}")
    return parse_problem(text)


def _config(args) -> CheckConfig:
    return CheckConfig(
        budget=arith.Budget(max_cells=args.budget_cells, max_seconds=args.budget_secs),
        seed=args.seed,
    )


def cmd_check(args) -> int:
    problem = _load(args.file)
    if not problem.certificate:
        print("input error: no proof block (nothing to check)")
        return 3
    if len(problem.certificate) != 1:
        print("input error: expected exactly one top-level rule step")
        return 3
    checker = Checker(_config(args))
    step = problem.certificate[0]
    print(f"rule {step.name}")
    try:
        root = apply_rule(problem, step, checker)
    except RuleRefused as e:
        proof = getattr(e, "proof", None)
        if proof is not None:
            print(render_trace(proof), end="")
        print(str(e))
        return 2
    print(render_trace(root), end="")
    verdict = root.verdict()
    print(f"verdict: {verdict}")
    if verdict == PROVED:
        return 0
    if verdict == REFUTED:
        return 1
    return 2


def cmd_falsify(args) -> int:
    problem = _load(args.file)
    report = sim.falsify_liveness(problem, samples=args.samples, seed=args.seed, horizon=args.horizon)
    print(report.summary())
    if args.out:
        for path in sim.write_report(report, problem, args.out):
            print(f"wrote {path}")
    bad = report.n(sim.REFUTED) + report.n(sim.BLOWUP)
    if bad:
        return 1
    if report.n(sim.WITNESS):
        return 0
    return 2


def cmd_simulate(args) -> int:
    problem = _load(args.file)
    init = {}
    for part in args.init.split(","):
        k, _, v = part.partition("=")
        init[k.strip()] = float(Fraction(v.strip()))
    traj = sim.integrate(problem.system, init, args.horizon, goal=problem.goal, stop_on_event=False)
    for t, kind in traj.events:
        print(f"event {kind} at t={t!r}")
    if args.out:
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        names = list(problem.system.vars) + sorted(problem.system.params)
        path = out / "trajectory.csv"
        ev = dict((t, k) for t, k in traj.events)
        with open(path, "w") as fh:
            fh.write("t," + ",".join(names) + ",event\n")
            for s in traj.samples:
                fh.write(f"{s.time!r}," + ",".join(repr(s.values[n]) for n in names) + f",{ev.get(s.time, '')}\n")
        print(f"wrote {path}")
    return 0


def cmd_lie(args) -> int:
    problem = _load(args.file)
    p = parse_poly(args.polynomial)
    print(print_poly(higher_lie(p, problem.system, args.order)))
    return 0


def cmd_emit_smt(args) -> int:
    problem = _load(args.file)
    if not problem.certificate:
        print("input error: no proof block")
        return 3
    checker = Checker(_config(args))
    try:
        root = apply_rule(problem, problem.certificate[0], checker)
    except RuleRefused as e:
        root = getattr(e, "proof", None)  # export whatever arithmetic was attempted
    if root is None:
        print("no unknown arithmetic obligations; nothing to export")
        return 0
    out = pathlib.Path(args.out or "smt-out")
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    # indices match the obligation numbering of the printed trace
    from .kernel import ArithOb

    for index, ob in enumerate(root.all_obligations()):
        if (
            isinstance(ob, ArithOb)
            and ob.result is not None
            and ob.result.status == arith.UNKNOWN
        ):
            path = out / arith.smt_filename(index, ob.obligation)
            path.write_text(arith.emit_smtlib(ob.obligation))
            print(f"wrote {path}")
            written += 1
    if not written:
        print("no unknown arithmetic obligations; nothing to export")
    return 0


def cmd_catalog(args) -> int:
    results = sim.run_catalog(samples=args.samples, seed=args.seed, horizon=args.horizon)
    ok = True
    for r in results:
        status = "ok" if r["ok"] else "FAIL"
        refusal = f" refused at {r['refusal']}" if r["refusal"] else ""
        print(f"{r['id']}: {status}{refusal} counts={r['counts']}")
        for err in r["errors"]:
            print(f"  {err}")
        ok = ok and r["ok"]
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="odeliv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, file=True):
        if file:
            p.add_argument("file", help="problem file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--horizon", type=float, default=10.0)
        p.add_argument("--samples", type=int, default=64)
        p.add_argument("--budget-cells", type=int, default=200_000)
        p.add_argument("--budget-secs", type=float, default=10.0)
        p.add_argument("--out", default=None)

    p = sub.add_parser("check", help="verify the certificate in the proof block")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("falsify", help="sample initial states and integrate")
    common(p)
    p.set_defaults(fn=cmd_falsify)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    common(p)
    p.add_argument("--init", required=True, help="comma-separated var=value pairs")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("lie", help="print a higher Lie derivative")
    common(p)
    p.add_argument("-p", "--polynomial", required=True)
    p.add_argument("-k", "--order", type=int, default=1)
    p.set_defaults(fn=cmd_lie)

    p = sub.add_parser("emit-smt", help="export unknown arithmetic obligations as SMT-LIB")
    common(p)
    p.set_defaults(fn=cmd_emit_smt)

    p = sub.add_parser("catalog", help="run the built-in soundness counterexamples")
    common(p, file=False)
    p.set_defaults(fn=cmd_catalog)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OdelivError as e:
        print(f"input error: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
