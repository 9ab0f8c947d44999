"""Baseline vs single-task vs multi-task: latency, prioritization time and compute energy.

Writes one JSON per scenario/accelerator plus latency CDFs, and prints a table.
"""

import argparse

from orbitsched.experiments import HIGH_LOAD, output_dir, variant_comparison, write_json
from orbitsched.scenarios import ACCELERATORS, SCENARIOS

KEYS = ("latency_p50_s", "latency_p90_s", "latency_mean_s", "prioritization_mean_s", "prioritization_std_s",
        "compute_energy_fraction")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", nargs="+", default=list(SCENARIOS))
    ap.add_argument("--accels", nargs="+", default=list(ACCELERATORS))
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--hours", type=float, default=6.0)
    ap.add_argument("--high-load", action="store_true")
    args = ap.parse_args()

    base = dict(HIGH_LOAD) if args.high_load else {}
    base["hours"] = args.hours
    out = output_dir()
    for scen in args.scenarios:
        for accel in args.accels:
            res = variant_comparison(range(args.seeds), scen, base, accel)
            print(f"\n{scen} / {accel}")
            print(f"{'variant':<16}" + "".join(f"{k[:18]:>20}" for k in KEYS))
            for v, r in res.items():
                print(f"{v:<16}" + "".join(f"{r.mean(k):>20.3f}" for k in KEYS))
            write_json({v: r.summaries for v, r in res.items()}, out / f"variants-{scen}-{accel}.json")


if __name__ == "__main__":
    main()
