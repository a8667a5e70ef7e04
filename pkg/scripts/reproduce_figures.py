"""Regenerate the data behind the phase portraits, spectra and tables.

Runs the CLI for each profile into ``<out>/<profile>/<command>`` and leaves
plain CSV/JSON for any plotting tool:

- simulate: v1_v2.csv and il_v2.csv phase portraits, trajectory.csv
- analyze: spectrum.csv, lyapunov.csv, metrics.json (power, area, lobes)
- smallsignal: impedance_sweep.csv for the emulator
- sweep: r_g comparison (25.9k vs 40.9k) with per-sample v1 differences
- bits: bits.bin and report.json for the chaotic profile

    python3 scripts/reproduce_figures.py --out out/figures
"""

import argparse
import os
import sys

from memchua import cli

PROFILES = ("memristive-chaotic", "paper-default", "pwl-original", "gst-emulator")


def run(command, out, *extra):
    code = cli.main([command, *extra, "--out", out])
    print(f"{command:12s} {' '.join(extra):60s} -> exit {code}", file=sys.stderr)
    return code


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/figures")
    ap.add_argument("--skip-bits", action="store_true", help="skip the 50 s TRNG simulation")
    args = ap.parse_args()

    worst = 0
    for profile in PROFILES:
        base = os.path.join(args.out, profile)
        worst = max(worst, run("simulate", os.path.join(base, "simulate"), "--profile", profile))
        worst = max(worst, run("analyze", os.path.join(base, "analyze"), "--profile", profile))
    worst = max(worst, run("smallsignal", os.path.join(args.out, "smallsignal")))
    worst = max(worst, run("sweep", os.path.join(args.out, "sweep_r_g")))
    if not args.skip_bits:
        worst = max(worst, run("bits", os.path.join(args.out, "bits")))
    sys.exit(worst)


if __name__ == "__main__":
    main()
