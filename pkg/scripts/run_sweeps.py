#!/usr/bin/env python3
"""Run the bundled parameter sweeps and print one table per sweep.

Covers the speed law along v_b, final tension along v_b and d2, the trigger
and terrace amplitude sweeps, and the exploratory d2 / k sweeps on the
enhancing system (no expected answer is asserted for those).

    python scripts/run_sweeps.py --jobs 4 --out runs
    python scripts/run_sweeps.py enhancing_d2 enhancing_k
"""
import argparse
import sys
from pathlib import Path

from unrest.cli import run_sweep
from unrest.scenario import load_scenario, write_sweep

DEFAULT = (
    "inhibiting_vb_sweep",
    "inhibiting_vinf",
    "inhibiting_d2",
    "enhancing",
    "enhancing_trigger",
    "mixed",
    "mixed_trigger",
    "terrace",
    "gap",
    "periodic",
    "enhancing_d2",
    "enhancing_d2_vb",
    "enhancing_k",
)


def fmt(v, spec=".5g"):
    if v is None or v == "":
        return "-"
    return format(float(v), spec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="scenario names (default: all bundled sweeps)")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="runs", help="sweep tables go to OUT/scan_<name>/sweep.csv")
    args = ap.parse_args(argv)

    for name in args.names or DEFAULT:
        scn = load_scenario(name)
        rows = run_sweep(scn, {}, args.jobs)
        out = Path(args.out) / f"scan_{name}"
        out.mkdir(parents=True, exist_ok=True)
        write_sweep(rows, out / "sweep.csv")
        print(f"\n== {name}: {scn.sweep[0]}")
        print(f"{'value':>8} {'verdict':>16} {'c':>9} {'c_b':>9} {'c_1':>9} {'v_inf':>9}")
        for r in rows:
            verdict = r.get("verdict") or r.get("error", "")[:16]
            print(f"{r['value']:>8} {verdict:>16} {fmt(r.get('c')):>9} {fmt(r.get('c_b')):>9} "
                  f"{fmt(r.get('c_1')):>9} {fmt(r.get('v_inf')):>9}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
