"""Vary filter accuracy at fixed timings; report tail latency and first-pass delivery."""

import argparse

from orbitsched.experiments import accuracy_sweep, output_dir, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--scenario", default="urban")
    args = ap.parse_args()
    res = accuracy_sweep(range(args.seeds), args.scenario)
    print(f"{'accuracy':<10}{'sent first':>12}{'P50 (s)':>10}{'P90 (s)':>10}{'P95 (s)':>10}")
    for acc, r in res.items():
        print(f"{acc:<10}{100 * r.mean('high_priority_sent_first'):>11.1f}%"
              + "".join(f"{r.mean(k):>10.1f}" for k in ("latency_p50_s", "latency_p90_s", "latency_p95_s")))
    write_json({str(k): r.summaries for k, r in res.items()}, output_dir() / f"accuracy-{args.scenario}.json")


if __name__ == "__main__":
    main()
