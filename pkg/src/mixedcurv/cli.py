"""Command-line front end.

    python -m mixedcurv verify (--all | --scenario NAME [NAME ...]) [--grid N]
        [--tol X] [--gate-tol X] [--points K] [--seed S] [--json PATH]
        [--sign-variant {minus,plus}] [--format {human,json}]
    python -m mixedcurv scenarios [--json]

``verify`` exits 0 when every evaluated identity and every expected fact
passes, 1 otherwise, and 2 on a usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import catalog
from .errors import InvalidConfig, UnknownScenario
from .runner import RunConfig, run

log = logging.getLogger("mixedcurv")


def _parser():
    p = argparse.ArgumentParser(prog="mixedcurv", description="Verify almost-product curvature identities on catalog scenarios.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="evaluate scenarios and report residuals")
    which = v.add_mutually_exclusive_group(required=True)
    which.add_argument("--all", action="store_true", help="every registered scenario")
    which.add_argument("--scenario", nargs="+", metavar="NAME")
    v.add_argument("--grid", type=int, default=33, help="nodes per axis (default 33)")
    v.add_argument("--tol", type=float, default=1e-8, help="identity tolerance")
    v.add_argument("--gate-tol", type=float, default=1e-8, help="gate tolerance")
    v.add_argument("--points", type=int, default=100, help="random interior points per scenario")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--json", metavar="PATH", help="write the JSON report here ('-' for stdout)")
    v.add_argument("--sign-variant", choices=("minus", "plus"), help="override the resolved xi_H sign")
    v.add_argument("--format", choices=("human", "json"), default="human", dest="output_format")
    v.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("scenarios", help="list registered scenarios")
    s.add_argument("--json", action="store_true")
    return p


def _fmt(x):
    return "-" if x is None else f"{x:.2e}"


def render(report) -> str:
    conv = report["conventions"]
    lines = [
        f"xi_H sign: {conv['sign_variant']}"
        + (" (forced)" if conv.get("forced") else " (resolved; printed form uses plus)"),
        f"nabla P form: {conv['mixed_lhs']:g} (div_V xi_H + div_H xi_V) = 4 s_mix + 1/2 |nabla P|^2 - {conv['mixed_F']:g} |F|^2",
        f"projective factor k = {conv['projective_k']:g}",
        "",
    ]
    for name, block in report["scenarios"].items():
        lines.append(f"[{'PASS' if block['passed'] else 'FAIL'}] {name}")
        for ident, r in block.get("identities", {}).items():
            gate = "" if r["gate"] is None else f"  gate {r['gate']}: {r['gate_pass_fraction']:.0%}"
            mark = "ok " if r["passed"] else "BAD"
            lines.append(f"    {mark} {ident:<16} max {_fmt(r['max_abs'])}  mean {_fmt(r['mean_abs'])}{gate}")
        bad = [f for f in block.get("facts", []) if not f["passed"]]
        nfacts = len(block.get("facts", []))
        lines.append(f"    facts: {nfacts - len(bad)}/{nfacts} pass")
        for f in bad:
            why = f.get("exception") or f"observed {f['observed']}, error {f['error']}"
            lines.append(f"      failed {f['quantity']}: {why}")
        hyp = block.get("hypothesis")
        if hyp:
            fired = [k for k, v in hyp["verdicts"].items() if v]
            lines.append(f"    verdicts: {', '.join(fired) if fired else 'none'}")
        for e in block.get("errors", []):
            lines.append(f"    error: {e}")
    lines.append("")
    lines.append(f"overall: {'PASS' if report['passed'] else 'FAIL'}  ({report['runtime_s']:.1f} s)")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "scenarios":
        items = catalog.list_scenarios()
        if args.json:
            print(json.dumps([{"name": n, "description": d} for n, d in items], indent=2))
        else:
            for n, d in items:
                print(f"{n:<28} {d}")
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = RunConfig(
        scenarios=tuple(args.scenario or ()),
        grid=args.grid,
        tol=args.tol,
        gate_tol=args.gate_tol,
        points=args.points,
        seed=args.seed,
        json_path=args.json,
        sign_variant=args.sign_variant,
        output_format=args.output_format,
    )
    try:
        report = run(cfg)
    except (InvalidConfig, UnknownScenario) as err:
        print(f"mixedcurv: error: {err}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.json == "-":
        print(text)
    elif args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
        log.info("report written to %s", args.json)
    if args.json != "-":
        print(text if cfg.output_format == "json" else render(report))
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
