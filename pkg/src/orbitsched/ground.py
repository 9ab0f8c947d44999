"""Ground-station side: queries, AOI matching, schedule generation and filter
statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .formula import DnfFormula, FormulaError, Term
from .geometry import Box, ConvexPolygon, GeometryError, RegionIndex, linear_scan, region_from_spec, region_to_spec


@dataclass(frozen=True)
class Query:
    """A conjunction of filters over an area of interest.

    Queries that are not latency sensitive never contribute onboard work;
    their images go out with the FIFO tier.
    """

    id: str
    filters: tuple
    aoi: tuple  # of Box | ConvexPolygon
    priority: int
    latency_sensitive: bool = True
    name: str = ""

    def __post_init__(self):
        if not self.filters:
            raise FormulaError(f"query {self.id}: empty filter conjunction")
        if len(set(self.filters)) != len(self.filters):
            raise FormulaError(f"query {self.id}: duplicate filters")
        if not self.aoi:
            raise GeometryError(f"query {self.id}: empty AOI")
        if self.priority not in (1, 2, 3, 4, 5):
            raise FormulaError(f"query {self.id}: priority {self.priority} not in 1..5")

    def contains(self, lat: float, lon: float) -> bool:
        return any(r.contains(lat, lon) for r in self.aoi)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "filters": list(self.filters),
            "priority": self.priority,
            "latency_sensitive": self.latency_sensitive,
            "aoi": [region_to_spec(r) for r in self.aoi],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Query":
        return cls(
            id=str(d["id"]),
            filters=tuple(int(f) for f in d["filters"]),
            aoi=tuple(region_from_spec(r) for r in d["aoi"]),
            priority=int(d["priority"]),
            latency_sensitive=bool(d.get("latency_sensitive", True)),
            name=d.get("name", ""),
        )


def load_queries(path) -> list[Query]:
    with open(path) as fh:
        return [Query.from_dict(d) for d in json.load(fh)]


def save_queries(queries: Iterable[Query], path) -> None:
    with open(path, "w") as fh:
        json.dump([q.to_dict() for q in queries], fh, indent=1)


class QueryIndex:
    """Spatial index answering ``loc in AOI(q)`` for a fixed query set."""

    def __init__(self, queries: Sequence[Query]):
        self.queries = list(queries)
        self._by_id = {q.id: q for q in self.queries}
        if len(self._by_id) != len(self.queries):
            raise ValueError("duplicate query ids")
        self._regions = [(q.id, r) for q in self.queries for r in q.aoi]
        self._index = RegionIndex(self._regions)

    def match(self, lat: float, lon: float) -> frozenset:
        return frozenset(self._index.query(lat, lon))

    def match_many(self, lats, lons) -> list[frozenset]:
        return [frozenset(s) for s in self._index.query_many(lats, lons)]

    def match_linear(self, lat: float, lon: float) -> frozenset:
        return frozenset(linear_scan(self._regions, lat, lon))

    def __getitem__(self, qid) -> Query:
        return self._by_id[qid]


def aoi_match(lat: float, lon: float, queries: Sequence[Query] | QueryIndex) -> frozenset:
    """Ids of the queries whose AOI contains the point."""
    index = queries if isinstance(queries, QueryIndex) else QueryIndex(queries)
    return index.match(lat, lon)


# ---------------------------------------------------------------------------
# Schedule generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Capture:
    time: float
    lat: float
    lon: float
    size: int = 50_000
    satellite: int = 0


@dataclass(frozen=True)
class ScheduleEntry:
    locs: tuple  # capture indices within the plan
    formula: DnfFormula


def build_formula(queries: Iterable[Query], p_star: int) -> DnfFormula | None:
    """DNF over latency-sensitive queries with priority >= p_star.  Queries with
    identical filter sets collapse to one term at their highest priority."""
    best: dict[frozenset, int] = {}
    for q in queries:
        if not q.latency_sensitive or q.priority < max(p_star, 2):
            continue
        fs = frozenset(q.filters)
        if q.priority > best.get(fs, 0):
            best[fs] = q.priority
    if not best:
        return None
    return DnfFormula(tuple(Term(fs, p) for fs, p in best.items()))


class FormulaBuilder:
    """Caches formulas per (matched query set, p*)."""

    def __init__(self, index: QueryIndex):
        self.index = index
        self._cache: dict = {}

    def __call__(self, qids: frozenset, p_star: int) -> DnfFormula | None:
        key = (qids, p_star)
        if key not in self._cache:
            self._cache[key] = build_formula((self.index[q] for q in qids), p_star)
        return self._cache[key]


def merge_slots(slots: Sequence[DnfFormula | None]) -> list[ScheduleEntry]:
    """Per-capture formulas to schedule entries: consecutive captures with the
    same formula merge; captures without a formula are skipped and do not
    break a run."""
    runs: list[tuple[DnfFormula, list[int]]] = []
    for i, formula in enumerate(slots):
        if formula is None:
            continue
        if runs and (runs[-1][0] is formula or runs[-1][0] == formula):
            runs[-1][1].append(i)
        else:
            runs.append((formula, [i]))
    return [ScheduleEntry(tuple(locs), formula) for formula, locs in runs]


def expand_entries(entries: Sequence[ScheduleEntry]) -> dict[int, DnfFormula]:
    return {loc: e.formula for e in entries for loc in e.locs}


def generate_schedule(
    plan: Sequence[Capture],
    queries: Sequence[Query] | QueryIndex,
    p_star: int,
    builder: FormulaBuilder | None = None,
) -> list[ScheduleEntry]:
    if not 2 <= p_star <= 5:
        raise ValueError(f"p_star must be in 2..5, got {p_star}")
    if not plan:
        return []
    index = queries if isinstance(queries, QueryIndex) else QueryIndex(queries)
    if not index.queries:
        return []
    builder = builder or FormulaBuilder(index)
    matches = index.match_many([c.lat for c in plan], [c.lon for c in plan])
    return merge_slots([builder(m, p_star) if m else None for m in matches])


def generate_schedule_bruteforce(plan: Sequence[Capture], queries: Sequence[Query], p_star: int) -> dict[int, DnfFormula]:
    """Per-capture formulas from a plain scan over every query (no index, no merging)."""
    out = {}
    for i, c in enumerate(plan):
        qs = [q for q in queries if q.contains(c.lat, c.lon)]
        f = build_formula(qs, p_star)
        if f is not None:
            out[i] = f
    return out


# ---------------------------------------------------------------------------
# Filter statistics
# ---------------------------------------------------------------------------

@dataclass
class FilterStats:
    """Pass probabilities shipped to satellites.

    Downlinked reports update each filter with a Beta posterior whose prior is
    the currently shipped value worth ``prior_weight`` pseudo-observations on
    top of add-one smoothing.
    """

    pass_prob: dict
    tpr: dict = field(default_factory=dict)
    updated_at: float = 0.0
    prior_weight: float = 2.0

    def __post_init__(self):
        for fid, p in self.pass_prob.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"pass_prob for filter {fid} out of [0, 1]")

    def to_dict(self) -> dict:
        return {
            "updated_at": self.updated_at,
            "prior_weight": self.prior_weight,
            "filters": {str(k): {"pass_prob": v, "tpr": self.tpr.get(k)} for k, v in sorted(self.pass_prob.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FilterStats":
        filt = d["filters"]
        return cls(
            pass_prob={int(k): float(v["pass_prob"]) for k, v in filt.items()},
            tpr={int(k): float(v["tpr"]) for k, v in filt.items() if v.get("tpr") is not None},
            updated_at=float(d.get("updated_at", 0.0)),
            prior_weight=float(d.get("prior_weight", 2.0)),
        )


@dataclass(frozen=True)
class FilterReport:
    filter_id: int
    executed: int
    passed: int


def update_filter_stats(stats: FilterStats, reports: Iterable[FilterReport], now: float | None = None) -> FilterStats:
    counts: dict[int, list[int]] = {}
    for r in reports:
        if r.passed < 0 or r.executed < r.passed:
            raise ValueError(f"inconsistent report for filter {r.filter_id}")
        c = counts.setdefault(r.filter_id, [0, 0])
        c[0] += r.executed
        c[1] += r.passed
    new = dict(stats.pass_prob)
    changed = False
    m = stats.prior_weight
    for fid, (n, k) in counts.items():
        if n == 0:
            continue
        prior = stats.pass_prob.get(fid, 0.5)
        new[fid] = (k + 1.0 + m * prior) / (n + 2.0 + m)
        changed = True
    if not changed:
        return stats
    return FilterStats(new, dict(stats.tpr), stats.updated_at if now is None else now, stats.prior_weight)
