"""Synthetic workloads: filter catalogs with backbone groups, query sets with
areas of interest, ground-truth base rates and accelerator timing profiles."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .formula import Backbone, DnfFormula, Filter, FilterCatalog
from .geometry import Box
from .ground import Query, build_formula

SCENARIOS = ("disaster", "intelligence", "urban")


@dataclass(frozen=True)
class AcceleratorProfile:
    name: str
    backbone_scale: float
    head_scale: float
    power: float  # W while executing

    def apply(self, catalog: FilterCatalog) -> FilterCatalog:
        bbs = [Backbone(b.id, b.load_time * self.backbone_scale, b.name) for b in catalog.backbones.values()]
        fs = [Filter(f.id, f.head_time * self.head_scale, f.pass_prob, f.tpr, f.fpr, f.backbone, f.name)
              for f in catalog]
        return FilterCatalog(fs, bbs)


# Catalog times below are TPU-like; the GPU-like board runs the same models
# 3.18x faster at a higher draw.
ACCELERATORS = {
    "tpu": AcceleratorProfile("tpu", 1.0, 1.0, 2.0),
    "gpu": AcceleratorProfile("gpu", 1 / 3.18, 1 / 3.18, 10.0),
}


def get_accelerator(name: str) -> AcceleratorProfile:
    try:
        return ACCELERATORS[name]
    except KeyError:
        raise ValueError(f"unknown accelerator {name!r}; choose from {sorted(ACCELERATORS)}") from None


# name, lat, lon, risk weight
CITIES = [
    ("Tokyo", 35.68, 139.69, 1.0), ("Delhi", 28.61, 77.21, 0.9), ("Shanghai", 31.23, 121.47, 0.9),
    ("Sao Paulo", -23.55, -46.63, 0.8), ("Mexico City", 19.43, -99.13, 0.9), ("Cairo", 30.04, 31.24, 0.7),
    ("Mumbai", 19.08, 72.88, 0.9), ("Beijing", 39.90, 116.41, 0.8), ("Dhaka", 23.81, 90.41, 0.9),
    ("Osaka", 34.69, 135.50, 0.6), ("New York", 40.71, -74.01, 0.8), ("Karachi", 24.86, 67.01, 0.7),
    ("Buenos Aires", -34.60, -58.38, 0.6), ("Istanbul", 41.01, 28.98, 0.8), ("Kolkata", 22.57, 88.36, 0.7),
    ("Manila", 14.60, 120.98, 0.9), ("Lagos", 6.52, 3.38, 0.7), ("Rio de Janeiro", -22.91, -43.17, 0.6),
    ("Los Angeles", 34.05, -118.24, 0.8), ("Moscow", 55.76, 37.62, 0.5), ("Paris", 48.86, 2.35, 0.5),
    ("Jakarta", -6.21, 106.85, 0.9), ("Lima", -12.05, -77.04, 0.6), ("London", 51.51, -0.13, 0.5),
    ("Bangkok", 13.76, 100.50, 0.7), ("Tehran", 35.69, 51.39, 0.7), ("Santiago", -33.45, -70.67, 0.6),
    ("Sydney", -33.87, 151.21, 0.5), ("Johannesburg", -26.20, 28.05, 0.5), ("Chicago", 41.88, -87.63, 0.5),
    ("Nairobi", -1.29, 36.82, 0.5), ("Toronto", 43.65, -79.38, 0.4), ("Madrid", 40.42, -3.70, 0.4),
    ("Houston", 29.76, -95.37, 0.6), ("Riyadh", 24.71, 46.68, 0.4), ("Singapore", 1.35, 103.82, 0.4),
]

# Military ports / bases / border areas (lat, lon, weight); purely synthetic
# placements around well-known regions.
SITES_INTEL = [
    ("Baltic", 57.5, 20.0, 0.8), ("Black Sea", 44.0, 34.0, 1.0), ("Eastern Med", 34.5, 33.5, 0.8),
    ("Persian Gulf", 26.5, 52.0, 1.0), ("Red Sea", 18.0, 40.0, 0.7), ("Korean Peninsula", 38.0, 127.0, 1.0),
    ("Taiwan Strait", 24.5, 119.5, 1.0), ("South China Sea", 12.0, 114.0, 0.9), ("Kashmir", 34.0, 75.5, 0.7),
    ("Sahel", 15.0, 2.0, 0.6), ("Horn of Africa", 10.0, 46.0, 0.6), ("Barents", 69.5, 33.0, 0.7),
    ("Caspian", 41.0, 50.5, 0.5), ("Gulf of Guinea", 3.0, 5.0, 0.5), ("Caribbean", 17.0, -72.0, 0.4),
    ("Sea of Japan", 40.0, 134.0, 0.7), ("Arabian Sea", 20.0, 63.0, 0.6), ("Levant", 33.0, 36.0, 0.8),
]

REGIONS_DISASTER = [
    ("California", 37.0, -120.0, 1.0), ("Amazon", -8.0, -60.0, 0.8), ("Siberia", 62.0, 110.0, 0.7),
    ("Australia SE", -34.0, 147.0, 0.9), ("Mediterranean", 39.0, 18.0, 0.7), ("Bangladesh", 23.5, 90.0, 0.9),
    ("Gulf Coast", 30.0, -90.0, 0.8), ("Philippines", 12.0, 123.0, 0.9), ("Indonesia", -2.0, 115.0, 0.7),
    ("Canada West", 55.0, -120.0, 0.7), ("Pakistan Indus", 28.0, 69.0, 0.7), ("East Africa", 0.0, 37.0, 0.5),
    ("Japan", 36.5, 138.5, 0.8), ("Chile", -33.0, -71.0, 0.6), ("Turkey", 38.5, 35.0, 0.7),
]


@dataclass(frozen=True)
class QueryTemplate:
    name: str
    filters: tuple  # filter names
    priority: int
    latency_sensitive: bool = True
    weight: float = 1.0  # chance a site carries this query, scaled by site risk


@dataclass
class ScenarioSpec:
    name: str
    catalog: FilterCatalog  # multi-task layout (TPU-like times)
    queries: list
    base_rates: dict  # filter id -> ground-truth positive rate
    templates: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "backbones": [{"id": b.id, "name": b.name, "load_time": b.load_time}
                          for b in sorted(self.catalog.backbones.values(), key=lambda b: b.id)],
            "filters": [{"id": f.id, "name": f.name, "head_time": f.head_time, "pass_prob": f.pass_prob,
                         "tpr": f.tpr, "fpr": f.fpr, "backbone": f.backbone} for f in self.catalog],
            "base_rates": {str(k): v for k, v in sorted(self.base_rates.items())},
            "templates": [{"name": t.name, "filters": list(t.filters), "priority": t.priority,
                           "latency_sensitive": t.latency_sensitive, "weight": t.weight} for t in self.templates],
            "queries": [q.to_dict() for q in self.queries],
        }

    @classmethod
    def from_dict(cls, d) -> "ScenarioSpec":
        bbs = [Backbone(int(b["id"]), float(b["load_time"]), b.get("name", "")) for b in d["backbones"]]
        fs = [Filter(int(f["id"]), float(f["head_time"]), float(f["pass_prob"]), float(f["tpr"]), float(f["fpr"]),
                     None if f["backbone"] is None else int(f["backbone"]), f.get("name", "")) for f in d["filters"]]
        catalog = FilterCatalog(fs, bbs)
        queries = [Query.from_dict(q) for q in d["queries"]]
        for q in queries:
            for fid in q.filters:
                if fid not in catalog:
                    raise ValueError(f"query {q.id} references unknown filter {fid}")
        templates = [QueryTemplate(t["name"], tuple(t["filters"]), int(t["priority"]),
                                   bool(t.get("latency_sensitive", True)), float(t.get("weight", 1.0)))
                     for t in d.get("templates", [])]
        return cls(d["name"], catalog, queries, {int(k): float(v) for k, v in d["base_rates"].items()},
                   templates, int(d.get("seed", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def formula_pool(self, p_star: int = 2) -> list[DnfFormula]:
        """Distinct formulas produced by the query sets of overlapping AOIs."""
        return formula_pool(self.queries, p_star)

    def max_formula_filters(self) -> int:
        return max((len(f.filter_ids) for f in self.formula_pool()), default=0)


# backbone name -> load time;  filter name -> (backbone, head time, base rate)
_CATALOGS = {
    "urban": (
        {"optical": 1.55, "activity": 1.95, "hazard": 1.80},
        {
            "cloud_free": ("optical", 0.12, 0.70),
            "built_up": ("optical", 0.10, 0.75),
            "traffic_jam": ("activity", 0.15, 0.20),
            "crowd": ("activity", 0.18, 0.10),
            "construction": ("activity", 0.12, 0.25),
            "vehicles": ("activity", 0.10, 0.50),
            "fire": ("hazard", 0.15, 0.06),
            "smoke": ("hazard", 0.12, 0.10),
            "flood": ("hazard", 0.15, 0.06),
            "collapse": ("hazard", 0.20, 0.04),
        },
    ),
    "intelligence": (
        {"optical": 1.55, "maritime": 2.10, "ground": 2.30},
        {
            "cloud_free": ("optical", 0.12, 0.70),
            "water": ("optical", 0.08, 0.45),
            "ship": ("maritime", 0.15, 0.35),
            "military_ship": ("maritime", 0.20, 0.12),
            "submarine": ("maritime", 0.22, 0.04),
            "wake": ("maritime", 0.10, 0.30),
            "aircraft": ("ground", 0.18, 0.20),
            "military_vehicle": ("ground", 0.20, 0.10),
            "launcher": ("ground", 0.25, 0.03),
            "airfield": ("ground", 0.12, 0.25),
            "earthworks": ("ground", 0.15, 0.15),
        },
    ),
    "disaster": (
        {"optical": 1.20, "hazard": 1.40},
        {
            "cloud_free": ("optical", 0.08, 0.65),
            "fire": ("hazard", 0.08, 0.03),
            "spreading": ("hazard", 0.10, 0.40),
            "flood": ("hazard", 0.08, 0.03),
            "landslide": ("hazard", 0.10, 0.02),
            "smoke": ("hazard", 0.06, 0.05),
        },
    ),
}

_TEMPLATES = {
    "urban": [
        QueryTemplate("structure fire", ("cloud_free", "built_up", "fire", "smoke"), 5, weight=0.7),
        QueryTemplate("building collapse", ("cloud_free", "built_up", "collapse"), 5, weight=0.5),
        QueryTemplate("urban flooding", ("cloud_free", "flood"), 4, weight=0.6),
        QueryTemplate("smoke plume", ("cloud_free", "smoke"), 3, weight=0.5),
        QueryTemplate("mass gathering", ("cloud_free", "crowd", "vehicles"), 3, weight=0.6),
        QueryTemplate("gridlock", ("cloud_free", "traffic_jam", "vehicles"), 2, weight=0.7),
        QueryTemplate("construction", ("cloud_free", "built_up", "construction"), 2, weight=0.6),
        QueryTemplate("land use survey", ("cloud_free", "built_up"), 1, latency_sensitive=False, weight=0.5),
    ],
    "intelligence": [
        QueryTemplate("submarine surfaced", ("cloud_free", "water", "submarine"), 5, weight=0.5),
        QueryTemplate("launcher deployed", ("cloud_free", "military_vehicle", "launcher"), 5, weight=0.5),
        QueryTemplate("warship underway", ("cloud_free", "water", "military_ship", "wake"), 4, weight=0.7),
        QueryTemplate("armor movement", ("cloud_free", "military_vehicle", "earthworks"), 4, weight=0.6),
        QueryTemplate("military airfield", ("cloud_free", "airfield", "aircraft"), 3, weight=0.7),
        QueryTemplate("warship moored", ("cloud_free", "water", "military_ship"), 3, weight=0.6),
        QueryTemplate("shipping traffic", ("cloud_free", "water", "ship"), 2, weight=0.8),
        QueryTemplate("new earthworks", ("cloud_free", "earthworks"), 2, weight=0.5),
        QueryTemplate("area survey", ("cloud_free",), 1, latency_sensitive=False, weight=0.5),
    ],
    "disaster": [
        QueryTemplate("spreading wildfire", ("fire", "spreading"), 5, weight=0.8),
        QueryTemplate("flooding", ("cloud_free", "flood"), 4, weight=0.7),
        QueryTemplate("landslide", ("cloud_free", "landslide"), 4, weight=0.5),
        QueryTemplate("contained fire", ("fire",), 3, weight=0.8),
        QueryTemplate("smoke", ("smoke",), 2, weight=0.6),
    ],
}

# (sites, AOI half-size in degrees latitude, jitter, AOIs per query)
_LAYOUT = {
    "urban": (CITIES, 8.0, 1.2, 1),
    "intelligence": (SITES_INTEL, 10.0, 2.0, 2),
    "disaster": (REGIONS_DISASTER, 13.0, 2.0, 1),
}

# Scales the catalogs so the static baseline averages ~7.8 s per urban image
# on the TPU-like profile.
TIME_SCALE = 1.0


def _box_around(lat, lon, half_lat) -> Box:
    half_lon = min(179.0, half_lat / max(0.2, math.cos(math.radians(lat))))
    return Box.around(lat, lon, half_lat, half_lon)


def build_catalog(name: str, time_scale: float = TIME_SCALE) -> tuple[FilterCatalog, dict]:
    bb_spec, f_spec = _CATALOGS[name]
    bb_ids = {n: k for k, n in enumerate(bb_spec)}
    bbs = [Backbone(bb_ids[n], t * time_scale, n) for n, t in bb_spec.items()]
    filters = []
    rates = {}
    for fid, (fname, (bb, head, rate)) in enumerate(f_spec.items(), start=1):
        filters.append(Filter(fid, head * time_scale, rate, 0.95, 0.05, bb_ids[bb], fname))
        rates[fid] = rate
    return FilterCatalog(filters, bbs), rates


def build_scenario(name: str, seed: int = 0, time_scale: float = TIME_SCALE) -> ScenarioSpec:
    if name not in _CATALOGS:
        raise ValueError(f"unknown scenario {name!r}; choose from {list(SCENARIOS)}")
    rng = random.Random(f"{name}:{seed}")
    catalog, rates = build_catalog(name, time_scale)
    fid = {f.name: f.id for f in catalog}
    sites, half, jitter, per_query = _LAYOUT[name]
    templates = _TEMPLATES[name]
    queries = []
    for site, lat, lon, risk in sites:
        for t in templates:
            if rng.random() > min(1.0, t.weight * (0.5 + risk)):
                continue
            aoi = []
            for _ in range(per_query):
                h = half * rng.uniform(0.5, 1.0) * (0.6 + 0.4 * risk)
                dlat = rng.uniform(-jitter, jitter) * 0.5
                dlon = rng.uniform(-jitter, jitter) * 0.5
                aoi.append(_box_around(max(-85, min(85, lat + dlat)), ((lon + dlon + 180) % 360) - 180, h))
            queries.append(Query(
                id=f"{name[:3]}-{len(queries):04d}",
                filters=tuple(sorted(fid[n] for n in t.filters)),
                aoi=tuple(aoi),
                priority=t.priority,
                latency_sensitive=t.latency_sensitive,
                name=f"{t.name} @ {site}",
            ))
    return ScenarioSpec(name, catalog, queries, rates, list(templates), seed)


def formula_pool(queries: Sequence[Query], p_star: int = 2, grid: float = 0.5) -> list[DnfFormula]:
    """Formulas obtained at grid points covering every AOI, deduplicated and
    in first-seen order."""
    from .ground import QueryIndex

    index = QueryIndex(queries)
    seen: dict = {}
    for q in queries:
        for region in q.aoi:
            for part in region.parts():
                lat0, lat1, lon0, lon1 = part.bounds()
                n_lat = max(2, int((lat1 - lat0) / grid) + 1)
                n_lon = max(2, int((lon1 - lon0) / grid) + 1)
                for i in range(n_lat):
                    la = lat0 + (lat1 - lat0) * i / (n_lat - 1)
                    lats = [la] * n_lon
                    lons = [lon0 + (lon1 - lon0) * j / (n_lon - 1) for j in range(n_lon)]
                    for m in index.match_many(lats, lons):
                        f = build_formula((index[k] for k in m), p_star)
                        if f is not None and f not in seen:
                            seen[f] = None
    return list(seen)


def single_vs_multitask(spec: ScenarioSpec) -> tuple[FilterCatalog, FilterCatalog]:
    """(single-task catalog, multi-task catalog) with identical pass rates and accuracy."""
    return spec.catalog.single_task(), spec.catalog


def catalog_for(spec: ScenarioSpec, variant: str, accelerator: str = "tpu") -> FilterCatalog:
    """Catalog a system variant runs with: the baseline and the ST variant use
    standalone models, MT shares backbones."""
    st, mt = single_vs_multitask(spec)
    base = mt if variant == "earthsight-mt" else st
    return get_accelerator(accelerator).apply(base)
