"""Grid search over R1 and theta for a double-scroll chaotic operating point.

For each (R1, theta) pair the script integrates the cubic circuit, then
reports the largest Lyapunov exponent, the lobe statistics and whether the
run blew up. The default grid brackets the shipped ``memristive-chaotic``
profile (R1 = 1800, theta = -7e-4).

    python3 scripts/find_chaotic_profile.py --theta=-8e-4,-7e-4 --out out/chaos_grid.csv

Negative lists need the ``--theta=...`` form so argparse does not read them as flags.
"""

import argparse
import csv
import sys

import numpy as np

from memchua import config
from memchua.analysis import lobe_transitions, lyapunov_spectrum
from memchua.dynamics import IntegratorConfig, integrate
from memchua.errors import IntegrationFault


def evaluate_point(base, r1, theta, t_end, dt):
    rc = base.with_override("circuit.r1", r1).with_override("circuit.nonlinearity.theta", theta)
    cfg = IntegratorConfig(dt=dt, t_end=t_end, transient_skip=0.05)
    try:
        traj = integrate(rc.initial_state, rc.circuit, cfg)
        lyap = lyapunov_spectrum(rc.initial_state, rc.circuit, cfg)
    except IntegrationFault:
        return {"r1": r1, "theta": theta, "status": "blow-up"}
    lobes = lobe_transitions(traj) if np.std(traj.v1) > 0 else None
    return {
        "r1": r1,
        "theta": theta,
        "status": "ok",
        "lambda1": lyap.largest,
        "lambda_sum": lyap.sum,
        "lobe_a": lobes.lobe_a if lobes else 0,
        "lobe_b": lobes.lobe_b if lobes else 0,
        "transitions": lobes.transitions if lobes else 0,
        "v1_std": float(np.std(traj.v1)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r1", default="1600,1700,1800,1900,2000", help="comma-separated R1 values (ohm)")
    ap.add_argument("--theta", default="-9e-4,-7e-4,-5e-4,-4e-4", help="comma-separated theta values (S)")
    ap.add_argument("--t-end", type=float, default=0.25)
    ap.add_argument("--dt", type=float, default=1e-6)
    ap.add_argument("--out", help="CSV output path (default: stdout)")
    args = ap.parse_args()

    base = config.load("memristive-chaotic")
    rows = []
    for r1 in (float(v) for v in args.r1.split(",")):
        for theta in (float(v) for v in args.theta.split(",")):
            row = evaluate_point(base, r1, theta, args.t_end, args.dt)
            print(f"R1={r1:g} theta={theta:g}: {row}", file=sys.stderr)
            rows.append(row)

    fields = ["r1", "theta", "status", "lambda1", "lambda_sum", "lobe_a", "lobe_b", "transitions", "v1_std"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.DictWriter(fh, fieldnames=fields, restval="")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
