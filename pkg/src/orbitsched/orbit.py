"""Circular Keplerian orbits, ground tracks, station visibility and eclipse."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MU_EARTH = 398600.4418  # km^3 / s^2
R_EARTH = 6371.0  # km, spherical Earth
OMEGA_EARTH = 7.2921159e-5  # rad / s
YEAR_S = 365.25 * 86400.0


@dataclass(frozen=True)
class OrbitModel:
    altitude: float  # km
    inclination: float  # deg
    raan: float  # deg
    phase: float  # deg, argument of latitude at epoch
    epoch: float = 0.0

    def __post_init__(self):
        if not 160.0 < self.altitude < 2000.0:
            raise ValueError(f"altitude {self.altitude} km is not LEO (160-2000 km)")

    @property
    def radius(self) -> float:
        return R_EARTH + self.altitude

    @property
    def period(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.radius ** 3 / MU_EARTH)

    @property
    def mean_motion(self) -> float:
        return math.sqrt(MU_EARTH / self.radius ** 3)


@dataclass(frozen=True)
class GroundStation:
    id: int
    name: str
    lat: float
    lon: float
    min_elevation: float = 10.0

    def ecef(self) -> np.ndarray:
        return R_EARTH * _unit(math.radians(self.lat), math.radians(self.lon))


def _unit(lat, lon):
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1)


def propagate(orbit: OrbitModel, t) -> np.ndarray:
    """ECI position(s) in km; ``t`` scalar or array of seconds."""
    t = np.asarray(t, dtype=float)
    if np.any(t < orbit.epoch):
        raise ValueError("time before orbit epoch")
    u = math.radians(orbit.phase) + orbit.mean_motion * (t - orbit.epoch)
    i = math.radians(orbit.inclination)
    om = math.radians(orbit.raan)
    cu, su = np.cos(u), np.sin(u)
    r = orbit.radius
    x = r * (math.cos(om) * cu - math.sin(om) * math.cos(i) * su)
    y = r * (math.sin(om) * cu + math.cos(om) * math.cos(i) * su)
    z = r * (math.sin(i) * su)
    return np.stack([x, y, z], axis=-1)


def eci_to_ecef(pos, t, gmst0: float = 0.0) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    th = gmst0 + OMEGA_EARTH * t
    c, s = np.cos(th), np.sin(th)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    return np.stack([c * x + s * y, -s * x + c * y, z], axis=-1)


def subsatellite_point(ecef) -> tuple[np.ndarray, np.ndarray]:
    """(lat, lon) in degrees, lon in [-180, 180)."""
    x, y, z = ecef[..., 0], ecef[..., 1], ecef[..., 2]
    lat = np.degrees(np.arctan2(z, np.hypot(x, y)))
    lon = (np.degrees(np.arctan2(y, x)) + 180.0) % 360.0 - 180.0
    return lat, lon


def elevation(sat_ecef, station: GroundStation) -> np.ndarray:
    """Elevation angle in degrees of the satellite above the station's horizon."""
    st = station.ecef()
    d = np.asarray(sat_ecef) - st
    up = st / np.linalg.norm(st)
    s = (d @ up) / np.linalg.norm(d, axis=-1)
    return np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))


def visibility(sat_ecef, station: GroundStation, min_elevation: float | None = None):
    """True where the elevation is at or above the threshold (closed)."""
    thr = station.min_elevation if min_elevation is None else min_elevation
    return elevation(sat_ecef, station) >= thr - 1e-9


def sun_direction(t) -> np.ndarray:
    """Unit sun vector in ECI, in the equatorial plane, one revolution per year."""
    t = np.asarray(t, dtype=float)
    a = 2.0 * math.pi * t / YEAR_S
    return np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=-1)


def sunlit(eci, t) -> np.ndarray:
    """Cylindrical Earth-shadow model."""
    s = sun_direction(t)
    along = np.sum(eci * s, axis=-1)
    perp = np.linalg.norm(eci - along[..., None] * s, axis=-1)
    return (along > 0) | (perp > R_EARTH)


def walker_constellation(n_sats: int, n_planes: int, altitude: float, inclination: float,
                         phasing: int = 1) -> list[OrbitModel]:
    """Walker-delta layout i:t/p/f."""
    if n_sats % n_planes:
        raise ValueError("satellite count must be a multiple of plane count")
    per = n_sats // n_planes
    out = []
    for p in range(n_planes):
        for k in range(per):
            out.append(OrbitModel(
                altitude=altitude,
                inclination=inclination,
                raan=360.0 * p / n_planes,
                phase=360.0 * k / per + 360.0 * phasing * p / n_sats,
            ))
    return out


STATION_SITES = [
    ("Svalbard", 78.23, 15.39),
    ("Fairbanks", 64.86, -147.85),
    ("Awarua", -46.53, 168.38),
    ("Troll", -72.01, 2.53),
    ("Punta Arenas", -53.16, -70.91),
    ("Hartebeesthoek", -25.89, 27.69),
    ("Inuvik", 68.36, -133.72),
    ("Kiruna", 67.86, 20.96),
    ("Hawaii", 19.82, -155.47),
    ("Dubai", 25.20, 55.27),
    ("Singapore", 1.35, 103.82),
    ("Santiago", -33.45, -70.67),
    ("Perth", -31.95, 115.86),
    ("Wallops", 37.94, -75.46),
]


@dataclass(frozen=True)
class ConstellationPreset:
    name: str
    n_sats: int
    n_planes: int
    n_stations: int
    altitude: float = 500.0
    inclination: float = 97.4

    def satellites(self) -> list[OrbitModel]:
        return walker_constellation(self.n_sats, self.n_planes, self.altitude, self.inclination)

    def stations(self, min_elevation: float = 10.0) -> list[GroundStation]:
        return [GroundStation(k, n, lat, lon, min_elevation)
                for k, (n, lat, lon) in enumerate(STATION_SITES[: self.n_stations])]


PRESETS = {
    "desk": ConstellationPreset("desk", 12, 3, 3),
    "full": ConstellationPreset("full", 153, 9, 14),
}


def get_preset(name: str) -> ConstellationPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown constellation preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class Ephemeris:
    """Ground tracks, sunlight and station visibility on a regular time grid."""

    times: np.ndarray  # (T,)
    lat: np.ndarray  # (S, T)
    lon: np.ndarray  # (S, T)
    sunlit: np.ndarray  # (S, T) bool
    visible: np.ndarray  # (S, G, T) bool

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 1.0

    def index(self, t: float) -> int:
        return min(len(self.times) - 1, max(0, int((t - self.times[0]) / self.dt)))

    def position_at(self, sat: int, t):
        """Ground point at arbitrary times, interpolated on the unit sphere."""
        t = np.asarray(t, dtype=float)
        f = (t - self.times[0]) / self.dt
        i0 = np.clip(np.floor(f).astype(int), 0, len(self.times) - 1)
        i1 = np.clip(i0 + 1, 0, len(self.times) - 1)
        w = (f - i0)[..., None]
        la, lo = np.radians(self.lat[sat]), np.radians(self.lon[sat])
        v = (1 - w) * _unit(la[i0], lo[i0]) + w * _unit(la[i1], lo[i1])
        return subsatellite_point(v)

    def contact_windows(self, sat: int) -> list[tuple[float, float]]:
        """Intervals in which the satellite sees at least one station."""
        return _runs(self.visible[sat].any(axis=0), self.times, self.dt)

    def station_windows(self, sat: int, station: int) -> list[tuple[float, float]]:
        return _runs(self.visible[sat, station], self.times, self.dt)


def _runs(mask: np.ndarray, times: np.ndarray, dt: float) -> list[tuple[float, float]]:
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return [(float(times[a]), float(times[b - 1] + dt)) for a, b in zip(starts, ends)]


def compute_ephemeris(sats, stations, duration: float, dt: float = 1.0, chunk: int = 20_000) -> Ephemeris:
    times = np.arange(0.0, duration, dt)
    S, G, T = len(sats), len(stations), len(times)
    lat = np.empty((S, T))
    lon = np.empty((S, T))
    lit = np.empty((S, T), dtype=bool)
    vis = np.empty((S, G, T), dtype=bool)
    for a in range(0, T, chunk):
        tt = times[a:a + chunk]
        for s, orb in enumerate(sats):
            eci = propagate(orb, tt)
            ecef = eci_to_ecef(eci, tt)
            lat[s, a:a + chunk], lon[s, a:a + chunk] = subsatellite_point(ecef)
            lit[s, a:a + chunk] = sunlit(eci, tt)
            for g, st in enumerate(stations):
                vis[s, g, a:a + chunk] = visibility(ecef, st)
    return Ephemeris(times, lat, lon, lit, vis)
