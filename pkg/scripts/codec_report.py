"""Compression ratio of the schedule codec over synthetic schedules of varying shape."""

import argparse
import random

from orbitsched.codec import encode_schedule, naive_size
from orbitsched.oracles import random_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slots", type=int, nargs="+", default=[1000, 4000, 16200])
    ap.add_argument("--unique", type=int, nargs="+", default=[4, 32, 128, 254])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    print(f"{'slots':>8}{'formulas':>10}{'bytes':>10}{'ratio':>8}")
    for n in args.slots:
        for u in args.unique:
            entries = random_schedule(rng, n_slots=n, n_unique=u)
            blob = encode_schedule(entries)
            print(f"{n:>8}{u:>10}{len(blob):>10}{naive_size(entries) / len(blob):>8.1f}")


if __name__ == "__main__":
    main()
