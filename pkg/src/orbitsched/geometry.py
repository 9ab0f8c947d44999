"""Closed lat/lon regions for areas of interest, and a spatial index over them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from shapely import STRtree, box as shp_box

_EPS = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box.  ``lon_min > lon_max`` means the box crosses
    the antimeridian; use :meth:`parts` to get the two non-wrapping halves."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_min <= self.lat_max <= 90.0):
            raise GeometryError(f"bad latitude range {self.lat_min}..{self.lat_max}")
        for lon in (self.lon_min, self.lon_max):
            if not -180.0 <= lon <= 180.0:
                raise GeometryError(f"longitude {lon} outside [-180, 180]")

    def parts(self) -> list["Box"]:
        if self.lon_min <= self.lon_max:
            return [self]
        return [
            Box(self.lat_min, self.lat_max, self.lon_min, 180.0),
            Box(self.lat_min, self.lat_max, -180.0, self.lon_max),
        ]

    def contains(self, lat: float, lon: float) -> bool:
        return any(
            b.lat_min <= lat <= b.lat_max and b.lon_min <= lon <= b.lon_max for b in self.parts()
        )

    def bounds(self):
        return self.lat_min, self.lat_max, self.lon_min, self.lon_max

    @classmethod
    def around(cls, lat: float, lon: float, half_lat: float, half_lon: float) -> "Box":
        lo = lon - half_lon
        hi = lon + half_lon
        if lo < -180.0:
            lo += 360.0
        if hi > 180.0:
            hi -= 360.0
        return cls(max(-90.0, lat - half_lat), min(90.0, lat + half_lat), lo, hi)


class ConvexPolygon:
    """Closed convex polygon in (lat, lon) degrees; must not cross the antimeridian."""

    def __init__(self, vertices: Sequence[tuple[float, float]]):
        pts = [(float(a), float(b)) for a, b in vertices]
        if len(pts) >= 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        for lat, lon in pts:
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise GeometryError(f"vertex ({lat}, {lon}) out of range")
        sign = 0
        n = len(pts)
        for i in range(n):
            (a0, b0), (a1, b1), (a2, b2) = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
            cross = (a1 - a0) * (b2 - b1) - (b1 - b0) * (a2 - a1)
            if abs(cross) <= _EPS:
                continue
            s = 1 if cross > 0 else -1
            if sign and s != sign:
                raise GeometryError("polygon is not convex")
            sign = s
        if sign == 0:
            raise GeometryError("degenerate polygon")
        self.vertices = tuple(pts)
        self._sign = sign

    def contains(self, lat: float, lon: float) -> bool:
        pts = self.vertices
        n = len(pts)
        for i in range(n):
            (a0, b0), (a1, b1) = pts[i], pts[(i + 1) % n]
            cross = (a1 - a0) * (lon - b0) - (b1 - b0) * (lat - a0)
            if cross * self._sign < -_EPS:
                return False
        return True

    def bounds(self):
        lats = [v[0] for v in self.vertices]
        lons = [v[1] for v in self.vertices]
        return min(lats), max(lats), min(lons), max(lons)

    def parts(self):
        return [self]

    def __eq__(self, other):
        return isinstance(other, ConvexPolygon) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        return f"ConvexPolygon({list(self.vertices)!r})"


def region_from_spec(spec) -> Box | ConvexPolygon:
    """``{"box": [lat_min, lat_max, lon_min, lon_max]}`` or ``{"polygon": [[lat, lon], ...]}``."""
    if "box" in spec:
        return Box(*map(float, spec["box"]))
    if "polygon" in spec:
        return ConvexPolygon([tuple(v) for v in spec["polygon"]])
    raise GeometryError(f"unknown region spec {spec!r}")


def region_to_spec(region) -> dict:
    if isinstance(region, Box):
        return {"box": [region.lat_min, region.lat_max, region.lon_min, region.lon_max]}
    return {"polygon": [list(v) for v in region.vertices]}


class RegionIndex:
    """STR-tree over region bounding boxes with exact containment on top.

    Results are identical to a linear scan; the tree only prunes candidates.
    """

    def __init__(self, regions: Sequence[tuple[object, Box | ConvexPolygon]]):
        self.keys = []
        self.parts = []
        geoms = []
        for key, region in regions:
            for part in region.parts():
                lat0, lat1, lon0, lon1 = part.bounds()
                self.keys.append(key)
                self.parts.append(part)
                # x = lon, y = lat
                geoms.append(shp_box(lon0, lat0, lon1, lat1))
        self._tree = STRtree(geoms) if geoms else None
        self._box_arrays = None

    def query(self, lat: float, lon: float) -> set:
        if self._tree is None:
            return set()
        from shapely import Point

        out = set()
        for k in self._tree.query(Point(lon, lat)):
            if self.parts[k].contains(lat, lon):
                out.add(self.keys[k])
        return out

    def query_many(self, lats, lons) -> list[set]:
        """Vectorised :meth:`query` over arrays of points."""
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        out = [set() for _ in range(len(lats))]
        if self._tree is None or len(lats) == 0:
            return out
        import shapely

        pts = shapely.points(lons, lats)
        pt_idx, geom_idx = self._tree.query(pts)
        for i, k in zip(pt_idx.tolist(), geom_idx.tolist()):
            part = self.parts[k]
            if isinstance(part, Box):
                # the tree's envelope test is exact for boxes
                out[i].add(self.keys[k])
            elif part.contains(lats[i], lons[i]):
                out[i].add(self.keys[k])
        return out


def linear_scan(regions: Sequence[tuple[object, Box | ConvexPolygon]], lat: float, lon: float) -> set:
    return {key for key, region in regions if region.contains(lat, lon)}
