import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from aisroutes.geo import (
    EARTH_RADIUS_M,
    LatLon,
    UndefinedBearing,
    angular_difference,
    barycenter,
    destination_point,
    haversine_distance,
    initial_bearing,
    interpolate,
    normalize_lon,
)
from oracles import azimuth_oracle_deg, slc_distance_m

lat_st = st.floats(min_value=-85.0, max_value=85.0)
lon_st = st.floats(min_value=-180.0, max_value=179.999)
point_st = st.builds(LatLon, lat_st, lon_st)


class TestLatLon:
    def test_lon_normalized(self):
        assert LatLon(0.0, 180.0).lon == -180.0
        assert LatLon(0.0, 270.0).lon == -90.0
        assert LatLon(0.0, -180.0).lon == -180.0

    def test_lat_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            LatLon(90.5, 0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            LatLon(float("nan"), 0.0)

    def test_normalize_lon_range(self):
        for lon in (-540.0, -180.0, 0.0, 179.9, 180.0, 359.0, 720.0):
            assert -180.0 <= normalize_lon(lon) < 180.0


class TestHaversine:
    def test_identity(self):
        assert haversine_distance(LatLon(0, 0), LatLon(0, 0)) == 0.0

    def test_antipodal_poles(self):
        d = haversine_distance(LatLon(90, 0), LatLon(-90, 0))
        assert d == pytest.approx(math.pi * EARTH_RADIUS_M, abs=0.1)

    def test_against_law_of_cosines_oracle(self):
        a, b = LatLon(0, 0), LatLon(0, 1)
        assert haversine_distance(a, b) == pytest.approx(slc_distance_m(a, b), abs=1.0)

    @given(point_st, point_st)
    @settings(max_examples=200)
    def test_symmetry(self, a, b):
        assert haversine_distance(a, b) == pytest.approx(haversine_distance(b, a), abs=1e-9)

    @given(point_st, point_st, point_st)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        ab = haversine_distance(a, b)
        bc = haversine_distance(b, c)
        ac = haversine_distance(a, c)
        assert ac <= ab + bc + 1e-6 * max(1.0, ab + bc)

    @given(point_st, point_st)
    @settings(max_examples=100)
    def test_matches_oracle_everywhere(self, a, b):
        assert haversine_distance(a, b) == pytest.approx(slc_distance_m(a, b), abs=1.0)


class TestBearing:
    def test_due_north(self):
        assert initial_bearing(LatLon(0, 0), LatLon(1, 0)) == pytest.approx(0.0, abs=1e-9)

    def test_due_east_on_equator(self):
        assert initial_bearing(LatLon(0, 0), LatLon(0, 1)) == pytest.approx(90.0, abs=1e-9)

    def test_against_azimuth_oracle(self):
        a, b = LatLon(10, 10), LatLon(20, 20)
        assert initial_bearing(a, b) == pytest.approx(azimuth_oracle_deg(a, b), abs=0.01)

    def test_coincident_points_undefined(self):
        with pytest.raises(UndefinedBearing):
            initial_bearing(LatLon(10, 10), LatLon(10, 10))

    def test_from_pole_undefined(self):
        with pytest.raises(UndefinedBearing):
            initial_bearing(LatLon(90, 0), LatLon(0, 0))

    @given(point_st, point_st)
    @settings(max_examples=150)
    def test_range_and_oracle(self, a, b):
        # below ~1 m separation the oracle's tangent projection is all
        # rounding noise; bearings that close are physically meaningless
        assume(haversine_distance(a, b) > 1.0)
        got = initial_bearing(a, b)
        assert 0.0 <= got < 360.0
        assert angular_difference(got, azimuth_oracle_deg(a, b)) < 0.01


class TestAngularDifference:
    @pytest.mark.parametrize(
        "h1,h2,expected",
        [(10, 10, 0), (350, 10, 20), (0, 180, 180), (270, 90, 180), (359, 1, 2)],
    )
    def test_examples(self, h1, h2, expected):
        assert angular_difference(h1, h2) == pytest.approx(expected)

    @given(st.floats(min_value=0, max_value=359.99), st.floats(min_value=0, max_value=359.99))
    @settings(max_examples=200)
    def test_symmetric_and_bounded(self, h1, h2):
        d = angular_difference(h1, h2)
        assert d == angular_difference(h2, h1)
        assert 0.0 <= d <= 180.0


class TestBarycenter:
    def test_singleton(self):
        assert barycenter([LatLon(10, 20)]) == LatLon(10, 20)

    def test_equator_symmetry(self):
        c = barycenter([LatLon(0, -1), LatLon(0, 1)])
        assert c.lat == pytest.approx(0.0, abs=1e-9)
        assert c.lon == pytest.approx(0.0, abs=1e-9)

    def test_antimeridian_wrap(self):
        c = barycenter([LatLon(0, 179.5), LatLon(0, -179.5)])
        assert c.lat == pytest.approx(0.0, abs=1e-9)
        assert c.lon == pytest.approx(-180.0, abs=1e-9)  # 180 normalizes to -180

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            barycenter([])

    @given(point_st, st.integers(min_value=1, max_value=8))
    @settings(max_examples=100)
    def test_copies_of_point(self, p, n):
        c = barycenter([p] * n)
        assert haversine_distance(c, p) < 0.01


class TestDirectGeodesy:
    @given(point_st, st.floats(min_value=0, max_value=359.9),
           st.floats(min_value=1.0, max_value=2_000_000.0))
    @settings(max_examples=150)
    def test_destination_point_round_trip(self, origin, bearing, dist):
        target = destination_point(origin, bearing, dist)
        assert haversine_distance(origin, target) == pytest.approx(dist, rel=1e-6, abs=0.01)

    def test_interpolate_endpoints_and_midpoint(self):
        a, b = LatLon(50, 0), LatLon(50, 10)
        assert interpolate(a, b, 0.0) == a
        assert interpolate(a, b, 1.0) == b
        mid = interpolate(a, b, 0.5)
        assert haversine_distance(a, mid) == pytest.approx(
            haversine_distance(mid, b), rel=1e-9
        )
