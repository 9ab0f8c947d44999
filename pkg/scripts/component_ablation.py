"""Remove one onboard/ground component at a time and compare high-priority latency."""

import argparse

from orbitsched.experiments import component_ablation, output_dir, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--scenario", default="urban")
    args = ap.parse_args()
    res = component_ablation(range(args.seeds), args.scenario)
    print(f"{'configuration':<22}{'P50 (s)':>10}{'P90 (s)':>10}{'P95 (s)':>10}")
    for label, r in res.items():
        print(f"{label:<22}" + "".join(f"{r.mean(k):>10.1f}" for k in ("latency_p50_s", "latency_p90_s", "latency_p95_s")))
    write_json({k: r.summaries for k, r in res.items()}, output_dir() / f"components-{args.scenario}.json")


if __name__ == "__main__":
    main()
