"""Command line: ``udgfl solve | gen | audit``.

Exit codes: 0 solved and every audit passed, 2 solved but some audit
failed, 1 error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .instance import FLSolution, evaluate, read_instance, write_instance
from .pipeline import FAMILIES, ROUTES, SOLVERS, RunConfig, RunReport, generate_instance, run_pipeline, \
    write_ratio_csv

EXIT_OK, EXIT_ERROR, EXIT_AUDIT = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="udgfl", description="Facility location on unit disk graphs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve an instance file and write a JSON report")
    s.add_argument("--input", required=True)
    s.add_argument("--solver", choices=SOLVERS, default="qptas")
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--eps-prime", type=float, default=0.25)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--L", type=float, default=None, help="side of the bounding box (boxptas)")
    s.add_argument("--grid-trials", type=int, default=32)
    s.add_argument("--route", choices=ROUTES, default="auto")
    s.add_argument("--oracle-cap", type=int, default=14)
    s.add_argument("--vector-cap", type=int, default=10**6)
    s.add_argument("--work-cap", type=int, default=200_000)
    s.add_argument("--memo-cap", type=int, default=50_000)
    s.add_argument("--net-cap", type=int, default=200_000)
    s.add_argument("--merge-coincident", action="store_true",
                   help="collapse coincident points instead of rejecting the file")
    s.add_argument("--no-audit", action="store_true")
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None, help="also write a one-row ratio table here")

    g = sub.add_parser("gen", help="write a seeded random instance")
    g.add_argument("--family", choices=FAMILIES, default="uniform")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--box", type=float, default=3.0)
    g.add_argument("--clusters", type=int, default=3)
    g.add_argument("--client-frac", type=float, default=0.7)
    g.add_argument("--facility-frac", type=float, default=0.3)
    g.add_argument("--n-facilities", type=int, default=None)
    g.add_argument("--keep-all-components", action="store_true")
    g.add_argument("--out", required=True)

    a = sub.add_parser("audit", help="re-check a report (and its instance, when recorded)")
    a.add_argument("--report", required=True)
    return p


def _solve(args) -> int:
    inst = read_instance(args.input, merge=args.merge_coincident)
    cfg = RunConfig(solver=args.solver, eps=args.eps, eps_prime=args.eps_prime, seed=args.seed, L=args.L,
                    grid_trials=args.grid_trials, route=args.route, oracle_cap=args.oracle_cap,
                    vector_cap=args.vector_cap, work_cap=args.work_cap, memo_cap=args.memo_cap,
                    net_cap=args.net_cap)
    report = run_pipeline(cfg, inst, audit=not args.no_audit)
    report.instance["source"] = str(Path(args.input).resolve())
    Path(args.out).write_text(report.to_json())
    if args.csv:
        write_ratio_csv([report], args.csv)
    if report.error:
        print(f"error in stage {report.error['stage']}: {report.error['message']}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{cfg.solver}: cost {report.cost:.6f}" + (f"  (opt {report.oracle['opt']:.6f})" if report.oracle else ""))
    return _print_audits(report.audits)


def _print_audits(audits: dict) -> int:
    bad = 0
    for name, res in sorted(audits.items()):
        status = "PASS" if res["passed"] else "FAIL"
        bad += not res["passed"]
        extra = "" if res["passed"] else f"  witness={json.dumps(res['witness'])}"
        print(f"  {status} {name}{extra}")
    return EXIT_AUDIT if bad else EXIT_OK


def _gen(args) -> int:
    cfg = RunConfig(family=args.family, n=args.n, seed=args.seed, box=args.box, clusters=args.clusters,
                    client_frac=args.client_frac, facility_frac=args.facility_frac,
                    n_facilities=args.n_facilities, largest_component=not args.keep_all_components)
    inst = generate_instance(cfg)
    write_instance(inst, args.out)
    print(f"wrote {args.out}: {inst.graph.n} points, {len(inst.clients)} clients, {len(inst.costs)} facilities")
    return EXIT_OK


def _audit(args) -> int:
    report = RunReport.from_dict(json.loads(Path(args.report).read_text()))
    if report.error:
        print(f"report records an error in stage {report.error['stage']}", file=sys.stderr)
        return EXIT_ERROR
    audits = dict(report.audits or {})
    src = (report.instance or {}).get("source")
    if src and Path(src).exists() and report.solution:
        inst = read_instance(src, merge=True)
        sol = FLSolution.from_dict(report.solution)
        re = evaluate(inst, sol.open)
        ok = abs(re.total_cost - sol.total_cost) <= 1e-9 * max(1.0, sol.total_cost)
        audits["recomputed_cost"] = {"passed": ok, "checked": 1,
                                     "witness": None if ok else {"reported": sol.total_cost,
                                                                 "recomputed": re.total_cost}}
    return _print_audits(audits)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return {"solve": _solve, "gen": _gen, "audit": _audit}[args.cmd](args)
    except Exception as e:  # every failure maps to exit code 1
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
