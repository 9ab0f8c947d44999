"""Command line entry point: ``orbitsched run | bench-sbfe | verify``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, RunConfig
from .experiments import HIGH_LOAD, ephemeris_for, output_dir, sbfe_benchmark, sbfe_report, write_cdf, write_json
from .metrics import latency_samples, summarize
from .sim import run


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must contain a mapping")
    return data


def _deep_merge(base: dict, top: dict) -> dict:
    out = dict(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_args(args) -> RunConfig:
    d: dict = {}
    if args.high_load:
        d = _deep_merge(d, HIGH_LOAD)
    for name, key in (("scenario", "scenario"), ("variant", "variant"), ("accel", "accelerator"),
                      ("constellation", "constellation"), ("hours", "hours"), ("seed", "seed"),
                      ("scenario_seed", "scenario_seed"), ("alpha", "static_alpha"),
                      ("accuracy", "accuracy"), ("bandwidth", "bandwidth")):
        v = getattr(args, name)
        if v is not None:
            d[key] = v
    if args.no_dynamic_threshold:
        d["dynamic_threshold"] = False
    if args.no_filter_ordering:
        d["filter_ordering"] = False
    if args.no_ground_scheduler:
        d["ground_scheduler"] = False
    if args.config:
        d = _deep_merge(d, _load_config_file(args.config))
    return RunConfig.from_dict(d).validate()


def format_summary(cfg: RunConfig, report: dict) -> str:
    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.3f}" if isinstance(v, float) else str(v)

    rows = [
        ("scenario", cfg.scenario), ("variant", cfg.variant), ("accelerator", cfg.accelerator),
        ("constellation", cfg.constellation), ("hours", cfg.hours), ("seed", cfg.seed),
        ("config hash", cfg.config_hash()),
    ]
    rows += [(k, report[k]) for k in report if k != "definition"]
    width = max(len(k) for k, _ in rows)
    lines = [f"# {report.get('definition', '')}"]
    lines += [f"{k:<{width}}  {fmt(v)}" for k, v in rows]
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    log, world = run(cfg, ephemeris=ephemeris_for(cfg), trace=args.trace)
    report = summarize(log)
    out = Path(args.out) if args.out else output_dir()
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"{cfg.scenario}-{cfg.variant}-{cfg.accelerator}-seed{cfg.seed}-{cfg.config_hash()}"

    summary = {"config_hash": cfg.config_hash(), "seed": cfg.seed, "config": cfg.to_dict(), "report": report}
    write_json(summary, f"{stem}.summary.json")
    text = format_summary(cfg, report)
    Path(f"{stem}.summary.txt").write_text(text)
    write_cdf(latency_samples(log.images, log.end_time), f"{stem}.cdf.txt")
    log.write_jsonl(f"{stem}.metrics.jsonl")
    with open(f"{stem}.forecasts.jsonl", "w") as fh:
        for sat, t, fc in log.forecasts:
            fh.write(json.dumps({"sat": sat, "time": t, **fc}, sort_keys=True) + "\n")
    with open(f"{stem}.alpha.txt", "w") as fh:
        for t, sat, a in log.alpha_trace:
            fh.write(f"{t:.3f} {sat} {a:.12f}\n")
    if args.trace:
        with open(f"{stem}.trace.jsonl", "w") as fh:
            for rec in world.trace:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(text, end="")
    print(f"outputs: {stem}.*")
    return 0


def cmd_bench(args) -> int:
    if args.count <= 0 or args.max_filters <= 0:
        print("invalid configuration: count and max-filters must be positive", file=sys.stderr)
        return 2
    if not 0.0 <= args.beta < args.alpha <= 1.0:
        print("invalid configuration: need 0 <= beta < alpha <= 1", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    res = sbfe_benchmark(count=args.count, max_filters=args.max_filters, seed=args.seed, beta=args.beta,
                         alpha=args.alpha, exact_cap=args.exact_cap)
    report = sbfe_report(res)
    report["seed"] = args.seed
    report["count"] = args.count
    print(f"{'policy':<14}{'mean (s)':>12}{'median (s)':>12}")
    for row in report["policies"]:
        print(f"{row['policy']:<14}{row['mean_s']:>12.4f}{row['median_s']:>12.4f}")
    print(f"formulas: {report['n_formulas']}  skipped (over exact cap): {report['skipped']}")
    if report["greedy_vs_exact_relative_error"] is not None:
        print(f"greedy vs exact relative error: {100 * report['greedy_vs_exact_relative_error']:.2f}%")
    print(f"elapsed: {time.perf_counter() - t0:.1f} s")
    out = Path(args.out) if args.out else output_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_json(report, out / f"sbfe-seed{args.seed}-n{args.count}.json")
    return 0


def cmd_verify(args) -> int:
    from .oracles import SUITES

    failed = 0
    for name, suite in SUITES.items():
        t0 = time.perf_counter()
        bad = suite(seed=args.seed)
        status = "PASS" if bad == 0 else f"FAIL ({bad} mismatches)"
        failed += bad > 0
        print(f"{name:<26} {status:<20} {time.perf_counter() - t0:6.1f} s")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitsched", description="Onboard image prioritization simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a constellation and write metrics")
    r.add_argument("--scenario", choices=None)
    r.add_argument("--variant")
    r.add_argument("--accel", help="accelerator profile (tpu, gpu)")
    r.add_argument("--constellation", help="constellation preset (desk, full)")
    r.add_argument("--hours", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--scenario-seed", type=int)
    r.add_argument("--alpha", type=float, help="static threshold used with --no-dynamic-threshold")
    r.add_argument("--accuracy", type=float, help="override every filter's tpr (fpr = 1 - accuracy)")
    r.add_argument("--bandwidth", type=float, help="bytes/s per station link")
    r.add_argument("--high-load", action="store_true", help="contended links and a tight power budget")
    r.add_argument("--no-dynamic-threshold", action="store_true")
    r.add_argument("--no-filter-ordering", action="store_true")
    r.add_argument("--no-ground-scheduler", action="store_true")
    r.add_argument("--config", help="JSON or YAML file; its values override flags")
    r.add_argument("--trace", action="store_true", help="also write per-image filter traces")
    r.add_argument("--out", help="output directory (default: $ORBITSCHED_OUT or ./runs)")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench-sbfe", help="greedy vs exact vs oracle filter ordering on a synthetic suite")
    b.add_argument("--count", type=int, default=2473)
    b.add_argument("--max-filters", type=int, default=15)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--beta", type=float, default=0.0)
    b.add_argument("--alpha", type=float, default=1.0)
    b.add_argument("--exact-cap", type=int, default=20)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="run brute-force oracle suites")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
