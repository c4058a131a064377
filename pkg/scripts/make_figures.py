#!/usr/bin/env python3
"""Render snapshot SVGs for the regime examples (calm, riot, upheaval, terrace, gap).

    python scripts/make_figures.py --out figures
"""
import argparse
import sys
from pathlib import Path

from unrest.cli import execute
from unrest.scenario import load_scenario, snapshot_svg

FIGURES = {
    "calm": ("inhibiting_calm", []),
    "riot": ("inhibiting_riot", []),
    "upheaval": ("enhancing", []),
    "terrace": ("terrace", ["constants.eps=3"]),
    "oscillating": ("oscillating", []),
    "gap_blocked": ("gap", ["constants.L=60"]),
    "gap_passed": ("gap", ["constants.L=40"]),
    "periodic_20": ("periodic", ["constants.L=20"]),
    "periodic_60": ("periodic", ["constants.L=60"]),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    ap.add_argument("only", nargs="*", help=f"subset of {', '.join(FIGURES)}")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tag in args.only or FIGURES:
        name, ov = FIGURES[tag]
        scn = load_scenario(name, ov)
        run, cls, _ = execute(scn)
        for s in run.snapshots:
            (out / f"{tag}_t{s.t:g}.svg").write_text(snapshot_svg(run.grid.x, s))
        print(f"{tag}: {cls.verdict}, {len(run.snapshots)} snapshots")
    return 0


if __name__ == "__main__":
    sys.exit(main())
