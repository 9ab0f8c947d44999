import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitsched.orbit import (
    PRESETS,
    R_EARTH,
    GroundStation,
    OrbitModel,
    compute_ephemeris,
    eci_to_ecef,
    elevation,
    get_preset,
    propagate,
    subsatellite_point,
    sunlit,
    visibility,
)


def test_period_formula():
    orb = OrbitModel(550.0, 53.0, 0.0, 0.0)
    want = 2 * math.pi * math.sqrt((6371.0 + 550.0) ** 3 / 398600.4418)
    assert orb.period == pytest.approx(want, rel=1e-12)
    assert 5700 < orb.period < 5760


def test_position_at_epoch_and_after_one_period():
    orb = OrbitModel(500.0, 97.4, 30.0, 45.0, epoch=100.0)
    p0 = propagate(orb, 100.0)
    assert np.linalg.norm(p0) == pytest.approx(orb.radius)
    assert np.linalg.norm(propagate(orb, 100.0 + orb.period) - p0) < 1e-6
    with pytest.raises(ValueError):
        propagate(orb, 0.0)


def test_non_leo_rejected():
    with pytest.raises(ValueError):
        OrbitModel(36000.0, 0.0, 0.0, 0.0)


def test_zenith_visible_and_far_side_not():
    gs = GroundStation(0, "x", 10.0, 20.0)
    up = gs.ecef() / R_EARTH
    assert visibility(up * (R_EARTH + 500), gs)
    assert not visibility(-up * (R_EARTH + 500), gs)


def test_grazing_geometry_is_visible():
    gs = GroundStation(0, "x", 0.0, 0.0, min_elevation=10.0)
    # place the satellite exactly 10 degrees above the local horizon, due north
    el = math.radians(10.0)
    st_pos = gs.ecef()
    up = st_pos / np.linalg.norm(st_pos)
    north = np.array([0.0, 0.0, 1.0])
    d = 1000.0 * (math.cos(el) * north + math.sin(el) * up)
    sat = st_pos + d
    assert elevation(sat, gs) == pytest.approx(10.0, abs=1e-9)
    assert visibility(sat, gs)


@settings(max_examples=200, deadline=None)
@given(st.floats(200, 1500), st.floats(0, 180), st.floats(0, 360), st.floats(0, 360), st.floats(0, 1e5))
def test_ground_track_in_range_and_radius_constant(alt, inc, raan, phase, t):
    orb = OrbitModel(alt, inc, raan, phase)
    pos = propagate(orb, t)
    assert np.linalg.norm(pos) == pytest.approx(orb.radius, rel=1e-12)
    lat, lon = subsatellite_point(eci_to_ecef(pos, t))
    assert abs(float(lat)) <= min(inc, 180 - inc) + 1e-6
    assert -180.0 <= float(lon) < 180.0


def test_eclipse_fraction_plausible():
    orb = OrbitModel(500.0, 97.4, 0.0, 0.0)
    t = np.arange(0.0, orb.period, 1.0)
    frac = sunlit(propagate(orb, t), t).mean()
    assert 0.55 < frac <= 1.0


def test_presets():
    desk, full = get_preset("desk"), get_preset("full")
    assert (desk.n_sats, desk.n_stations) == (12, 3)
    assert (full.n_sats, full.n_stations) == (153, 14)
    assert len(full.satellites()) == 153 and len(full.stations()) == 14
    with pytest.raises(ValueError):
        get_preset("nope")
    assert set(PRESETS) >= {"desk", "full"}


def test_ephemeris_contacts_and_interpolation():
    desk = get_preset("desk")
    sats = desk.satellites()[:2]
    eph = compute_ephemeris(sats, desk.stations(), 3 * 3600.0, 1.0)
    wins = eph.contact_windows(0)
    assert wins, "a polar orbit should see a high-latitude station within 3 h"
    for a, b in wins:
        assert b > a
    for (a0, b0), (a1, b1) in zip(wins, wins[1:]):
        assert a1 > b0
    t = np.array([100.5, 2000.25])
    lat, lon = eph.position_at(0, t)
    exact = subsatellite_point(eci_to_ecef(propagate(sats[0], t), t))
    assert np.allclose(lat, exact[0], atol=0.05)
    dlon = (np.asarray(lon) - exact[1] + 180) % 360 - 180
    assert np.all(np.abs(dlon) < 0.1)
