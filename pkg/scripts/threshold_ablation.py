"""Dynamic threshold against static alpha values on the high-load urban run."""

import argparse

from orbitsched.experiments import output_dir, threshold_ablation, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--scenario", default="urban")
    args = ap.parse_args()
    res = threshold_ablation(range(args.seeds), args.scenario)
    print(f"{'threshold':<14}{'mean (s)':>12}{'P90 (s)':>12}")
    for label, r in res.items():
        print(f"{label:<14}{r.mean('latency_mean_s'):>12.1f}{r.mean('latency_p90_s'):>12.1f}")
    write_json({k: r.summaries for k, r in res.items()}, output_dir() / f"threshold-{args.scenario}.json")


if __name__ == "__main__":
    main()
