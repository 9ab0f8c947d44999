"""Ground-side look-ahead: forecast the next downlink windows of one satellite
and derive the minimum transmittable priority ``p*`` and the target rejection
rate handed to the onboard threshold controller."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .formula import P_COMPUTE, PRIORITY_TIERS, DnfFormula, FilterCatalog

ENUM_MAX_FILTERS = 16
MC_SAMPLES = 20_000
MC_SEED = 12345


@dataclass(frozen=True)
class DownlinkWindow:
    satellite: int
    station: int
    start: float
    end: float
    bandwidth: float  # bytes / s

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"window end {self.end} must exceed start {self.start}")
        if self.bandwidth < 0:
            raise ValueError("negative bandwidth")

    @property
    def capacity(self) -> float:
        return (self.end - self.start) * self.bandwidth


def check_windows(windows: Sequence[DownlinkWindow]) -> None:
    last: dict[int, float] = {}
    for w in windows:
        if w.satellite in last and w.start < last[w.satellite]:
            raise ValueError(f"windows of satellite {w.satellite} overlap or are unsorted")
        last[w.satellite] = w.end


# ---------------------------------------------------------------------------
# Priority distribution of a formula
# ---------------------------------------------------------------------------

_DIST_CACHE: dict = {}


def _pass_probs(formula: DnfFormula, stats) -> list[float]:
    fids = sorted(formula.filter_ids)
    if isinstance(stats, FilterCatalog):
        return [stats[f].pass_prob for f in fids]
    if hasattr(stats, "pass_prob"):
        stats = stats.pass_prob
    return [float(stats[f]) for f in fids]


def priority_distribution(formula: DnfFormula, stats, samples: int = MC_SAMPLES, seed: int = MC_SEED) -> dict:
    """Distribution of the priority an image gets if every filter reports
    independently with its pass probability.

    ``stats`` is a FilterCatalog, a FilterStats or a plain ``{fid: p}`` map.
    Exact enumeration up to 16 filters, seeded Monte Carlo above that.
    """
    probs = _pass_probs(formula, stats)
    key = (formula, tuple(probs), samples, seed)
    hit = _DIST_CACHE.get(key)
    if hit is not None:
        return dict(hit)
    n = len(probs)
    fids = sorted(formula.filter_ids)
    pos = {f: i for i, f in enumerate(fids)}
    term_masks = [sum(1 << pos[f] for f in t.filters) for t in formula.terms]
    p = np.asarray(probs)
    if n <= ENUM_MAX_FILTERS:
        codes = np.arange(1 << n, dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
        weight = np.prod(np.where(bits, p, 1.0 - p), axis=1)
    else:
        rng = np.random.default_rng(seed)
        bits = rng.random((samples, n)) < p
        codes = (bits.astype(np.int64) << np.arange(n)).sum(axis=1)
        weight = np.full(samples, 1.0 / samples)
    assigned = np.zeros(len(codes), dtype=bool)
    out = {}
    for mask, term in zip(term_masks, formula.terms):  # descending priority
        sat = ((codes & mask) == mask) & ~assigned
        out[term.priority] = out.get(term.priority, 0.0) + float(weight[sat].sum())
        assigned |= sat
    out[P_COMPUTE] = float(weight[~assigned].sum())
    total = sum(out.values())
    out = {k: v / total for k, v in out.items()}
    if len(_DIST_CACHE) > 100_000:
        _DIST_CACHE.clear()
    _DIST_CACHE[key] = out
    return dict(out)


# ---------------------------------------------------------------------------
# Ledger and forecast
# ---------------------------------------------------------------------------

@dataclass
class PriorityLedger:
    bins: dict = field(default_factory=lambda: {p: 0.0 for p in PRIORITY_TIERS})

    def add(self, size: float, dist: Mapping) -> None:
        for prio, prob in dist.items():
            if prob < 0:
                raise ValueError("negative probability")
            self.bins[prio] += size * prob

    def add_bytes(self, prio, nbytes: float) -> None:
        if nbytes < 0:
            raise ValueError("negative byte count")
        self.bins[prio] += nbytes

    def total(self) -> float:
        return sum(self.bins.values())

    def cumulative(self) -> list:
        """(priority, bytes at or above it) from the top tier down."""
        acc = 0.0
        out = []
        for p in PRIORITY_TIERS:
            acc += self.bins[p]
            out.append((p, acc))
        return out


@dataclass(frozen=True)
class ForecastCapture:
    time: float
    size: float
    formula: DnfFormula | None


@dataclass
class Forecast:
    p_star: float
    r_reject: float
    capacity: float
    ledger: PriorityLedger
    n_inference: float
    n_downlink: float
    windows: tuple = ()

    @property
    def schedule_p_star(self) -> int:
        """p* clamped to the range schedule generation accepts."""
        return int(max(2, self.p_star))

    def to_dict(self) -> dict:
        return {
            "p_star": "p_compute" if self.p_star == P_COMPUTE else self.p_star,
            "r_reject": self.r_reject,
            "capacity": self.capacity,
            "n_inference": self.n_inference,
            "n_downlink": self.n_downlink,
            "ledger": {("p_compute" if k == P_COMPUTE else str(k)): v for k, v in self.ledger.bins.items()},
            "windows": [[w.station, w.start, w.end] for w in self.windows],
        }


def rejection_rate(n_inference: float, n_downlink: float) -> float:
    if n_inference <= 0:
        return 0.0
    return min(1.0, max(0.0, (n_inference - n_downlink) / n_inference))


def choose_p_star(ledger: PriorityLedger, capacity: float):
    """Lowest tier whose bytes at and above it fit the capacity; the top tier
    when nothing fits."""
    best = PRIORITY_TIERS[0]
    if capacity <= 0:
        return best
    for p, cum in ledger.cumulative():
        if cum <= capacity:
            best = p
        else:
            break
    return best


def forecast_contact(
    captures: Sequence[ForecastCapture],
    windows: Sequence[DownlinkWindow],
    stats,
    backlog: Mapping | None = None,
) -> Forecast:
    """``backlog`` maps tier -> bytes already queued on board; those bytes
    consume capacity ahead of new captures of the same tier."""
    capacity = float(sum(w.capacity for w in windows))
    ledger = PriorityLedger()
    for prio, nbytes in (backlog or {}).items():
        ledger.add_bytes(prio, nbytes)
    dists = []
    for c in captures:
        if c.formula is None:
            ledger.add_bytes(1, c.size)
            continue
        d = priority_distribution(c.formula, stats)
        ledger.add(c.size, d)
        dists.append(d)
    p_star = choose_p_star(ledger, capacity)
    n_inf = float(len(dists))
    fits = capacity > 0 and dict(ledger.cumulative())[p_star] <= capacity
    n_down = 0.0
    for d in dists:
        n_down += sum(v for k, v in d.items() if k >= p_star)
    if not fits:
        top = ledger.bins[p_star]
        n_down *= capacity / top if top > 0 else 0.0
    return Forecast(p_star, rejection_rate(n_inf, n_down), capacity, ledger, n_inf, n_down, tuple(windows))


class LookaheadSimulator:
    """Rolling forecast for one satellite.

    Holds the planned captures and predicted windows over the horizon;
    :meth:`reconcile` drops everything before ``now``, replaces it with the
    observed on-board backlog and re-forecasts the rest.
    """

    def __init__(self, captures: Sequence[ForecastCapture], windows: Sequence[DownlinkWindow], stats,
                 horizon: float = 6 * 3600.0):
        check_windows(windows)
        self.captures = sorted(captures, key=lambda c: c.time)
        self.windows = list(windows)
        self.stats = stats
        self.horizon = horizon
        self.backlog: dict = {}
        self.now = min([c.time for c in self.captures] + [w.start for w in self.windows] + [0.0])
        self.history: list[Forecast] = []

    def _remaining(self):
        end = self.now + self.horizon
        caps = [c for c in self.captures if self.now <= c.time < end]
        wins = []
        for w in self.windows:
            if w.end <= self.now or w.start >= end:
                continue
            lo, hi = max(w.start, self.now), min(w.end, end)
            if hi > lo:
                wins.append(DownlinkWindow(w.satellite, w.station, lo, hi, w.bandwidth))
        return caps, wins

    def forecast(self) -> Forecast:
        caps, wins = self._remaining()
        fc = forecast_contact(caps, wins, self.stats, self.backlog)
        self.history.append(fc)
        return fc

    def reconcile(self, now: float, backlog: Mapping, stats=None) -> Forecast:
        if now < self.now:
            raise ValueError("reconcile cannot move backwards in time")
        self.now = now
        self.backlog = dict(backlog)
        if stats is not None:
            self.stats = stats
        return self.forecast()


def dump_forecasts(records: Sequence[tuple[int, float, Forecast]], path) -> None:
    """One JSON line per (satellite, contact time, forecast)."""
    with open(path, "w") as fh:
        for sat, t, fc in records:
            fh.write(json.dumps({"satellite": sat, "time": t, **fc.to_dict()}, sort_keys=True) + "\n")
