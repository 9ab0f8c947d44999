"""Reusable experiment drivers shared by the CLI, scripts and acceptance tests."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .metrics import cdf, latency_samples, summarize
from .orbit import Ephemeris, compute_ephemeris, get_preset
from .sbfe import EXACT_MAX_FILTERS, PolicyBenchResult, bench_suite, generate_suite
from .scenarios import SCENARIOS, build_scenario, formula_pool
from .sim import run

# Contended links and a tight solar budget: the load setting used for the
# threshold and component ablations.
HIGH_LOAD = {"bandwidth": 60_000.0, "power": {"solar_w": 4.1}}

ACCURACY_SWEEP = (1.0, 0.95, 0.9, 0.8, 0.6)
STATIC_ALPHAS = (0.2, 0.3, 0.4, 0.5)

_EPHEMERIS_CACHE: dict = {}


def ephemeris_for(cfg: RunConfig) -> Ephemeris:
    key = (cfg.constellation, cfg.hours, cfg.dt, cfg.min_elevation)
    if key not in _EPHEMERIS_CACHE:
        preset = get_preset(cfg.constellation)
        stations = preset.stations(cfg.min_elevation)
        _EPHEMERIS_CACHE[key] = compute_ephemeris(preset.satellites(), stations, cfg.hours * 3600.0, cfg.dt)
    return _EPHEMERIS_CACHE[key]


def make_config(overrides: dict | None = None, **kw) -> RunConfig:
    d = dict(overrides or {})
    d.update(kw)
    return RunConfig.from_dict(d).validate()


def run_summary(cfg: RunConfig) -> dict:
    log, _ = run(cfg, ephemeris=ephemeris_for(cfg))
    return summarize(log)


@dataclass
class ReplicateResult:
    label: str
    summaries: list = field(default_factory=list)

    def values(self, key: str) -> np.ndarray:
        return np.array([s[key] if s[key] is not None else np.nan for s in self.summaries], dtype=float)

    def mean(self, key: str) -> float:
        return float(np.nanmean(self.values(key)))


def replicate(label: str, base: dict, seeds, **kw) -> ReplicateResult:
    out = ReplicateResult(label)
    for seed in seeds:
        out.summaries.append(run_summary(make_config(base, seed=seed, **kw)))
    return out


def threshold_ablation(seeds=range(3), scenario: str = "urban", base: dict | None = None) -> dict:
    """Dynamic threshold against each static alpha on the high-load run."""
    base = {**(HIGH_LOAD if base is None else base), "scenario": scenario}
    res = {"dynamic": replicate("dynamic", base, seeds)}
    for a in STATIC_ALPHAS:
        res[f"static-{a}"] = replicate(f"static-{a}", base, seeds, dynamic_threshold=False, static_alpha=a)
    return res


def component_ablation(seeds=range(3), scenario: str = "urban", base: dict | None = None) -> dict:
    base = {**(HIGH_LOAD if base is None else base), "scenario": scenario}
    return {
        "full": replicate("full", base, seeds),
        "no-filter-ordering": replicate("no-filter-ordering", base, seeds, filter_ordering=False),
        "no-ground-scheduler": replicate("no-ground-scheduler", base, seeds, ground_scheduler=False),
        "no-dynamic-threshold": replicate("no-dynamic-threshold", base, seeds, dynamic_threshold=False,
                                          static_alpha=make_config(base).alpha0),
    }


def accuracy_sweep(seeds=range(3), scenario: str = "urban", base: dict | None = None) -> dict:
    base = {**(HIGH_LOAD if base is None else base), "scenario": scenario}
    return {acc: replicate(f"acc-{acc}", base, seeds, accuracy=acc) for acc in ACCURACY_SWEEP}


def variant_comparison(seeds=range(5), scenario: str = "urban", base: dict | None = None, accelerator="tpu") -> dict:
    base = {**(base or {}), "scenario": scenario, "accelerator": accelerator}
    return {v: replicate(v, base, seeds, variant=v) for v in ("baseline", "earthsight-st", "earthsight-mt")}


# -- SBFE benchmark -------------------------------------------------------------

def sbfe_inputs(scenario_seed: int = 0, scenarios=SCENARIOS):
    """Formula pools and multi-task catalogs for every scenario."""
    pools, catalogs = {}, {}
    for name in scenarios:
        spec = build_scenario(name, scenario_seed)
        pools[name] = formula_pool(spec.queries)
        catalogs[name] = spec.catalog
    return pools, catalogs


def sbfe_benchmark(count: int = 2473, max_filters: int = 15, seed: int = 0, beta: float = 0.0, alpha: float = 1.0,
                   exact_cap: int = EXACT_MAX_FILTERS, scenarios=SCENARIOS, progress=None) -> PolicyBenchResult:
    pools, catalogs = sbfe_inputs(scenarios=scenarios)
    items = generate_suite(pools, max_filters=max_filters, count=count, seed=seed)
    return bench_suite(items, catalogs, beta=beta, alpha=alpha, seed=seed, exact_cap=exact_cap, progress=progress)


def sbfe_report(res: PolicyBenchResult) -> dict:
    return {
        "beta": res.beta,
        "alpha": res.alpha,
        "n_formulas": res.n_formulas,
        "skipped": res.skipped,
        "policies": res.table(),
        "greedy_vs_exact_relative_error": res.relative_error if res.n_formulas else None,
    }


# -- output helpers -------------------------------------------------------------

def output_dir(default: str | os.PathLike = "runs") -> Path:
    path = Path(os.environ.get("ORBITSCHED_OUT", default))
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_cdf(samples, path) -> None:
    with open(path, "w") as fh:
        for v, frac in cdf(samples):
            fh.write(f"{v:.6f} {frac:.6f}\n")


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def latency_cdf(log) -> list:
    return cdf(latency_samples(log.images, log.end_time))
