import json

import pytest

from aisroutes.aggregation import GroupKey, RouteGroup, compute_features, snap_endpoints
from aisroutes.clustering import DbscanParams
from aisroutes.geo import LatLon, destination_point, haversine_distance, interpolate
from aisroutes.ports import Port, PortDatabase
from aisroutes.records import AisRecord, VesselClass
from aisroutes.routes import (
    ExtractionParams,
    GroupAudit,
    StandardRoute,
    extract_standard_routes,
    route_to_polyline,
    routes_to_feature_collection,
)
from aisroutes.segmentation import Segment
from oracles import directed_hausdorff_m, sample_polyline

PORT_A = LatLon(55.0, 2.0)
PORT_B = destination_point(PORT_A, 90.0, 200_000.0)
PARAMS = ExtractionParams(eps=3000.0, min_samples=3, r=6000.0)


def corridor_segment(mmsi, waypoints, n_points=101, t0=1000.0):
    """Complete segment sampled every ~2 km along a waypoint polyline."""
    legs = list(zip(waypoints, waypoints[1:]))
    total = sum(haversine_distance(a, b) for a, b in legs)
    points = []
    step = total / (n_points - 1)
    for i in range(n_points):
        target = step * i
        d = target
        for a, b in legs:
            leg_len = haversine_distance(a, b)
            if d <= leg_len or (a, b) == legs[-1]:
                pos = interpolate(a, b, min(1.0, d / leg_len if leg_len else 0.0))
                break
            d -= leg_len
        points.append(
            AisRecord(mmsi=mmsi, ts=t0 + 300.0 * i, pos=pos, sog=12.0,
                      vessel_type=VesselClass.CARGO)
        )
    return Segment.from_points(mmsi, VesselClass.CARGO, points, 0, 1)


def group_of(segments) -> RouteGroup:
    db = PortDatabase(
        ports=[Port(0, PORT_A, 300.0, None, "Derived", 3), Port(1, PORT_B, 300.0, None, "Derived", 3)],
        built_at=0.0,
        params=DbscanParams(1500.0, 3),
    )
    snapped = snap_endpoints(segments, db)
    return RouteGroup(
        key=GroupKey(0, 1, "Cargo"),
        segments=snapped,
        features=compute_features(snapped),
        low_support=len(snapped) < 3,
    )


class TestExtractionParams:
    def test_d_complete_default(self):
        assert ExtractionParams(eps=1000.0, min_samples=3, r=2000.0).d_complete == 5000.0
        assert ExtractionParams(eps=3000.0, min_samples=3, r=6000.0).d_complete == 12_000.0

    def test_r_must_cover_eps(self):
        with pytest.raises(ValueError):
            ExtractionParams(eps=5000.0, min_samples=3, r=2000.0)


class TestStraightCorridor:
    def test_three_identical_voyages_one_completed_route(self):
        group = group_of(
            [corridor_segment(219000001 + i, [PORT_A, PORT_B]) for i in range(3)]
        )
        routes = extract_standard_routes(group, PARAMS, PORT_A, PORT_B)
        assert len(routes) == 1
        route = routes[0]
        assert route.completed
        assert route.label == "0"
        assert route.waypoints[0] == PORT_A
        assert route.support == 3
        corridor = sample_polyline([PORT_A, PORT_B], 250.0)
        assert directed_hausdorff_m(route.waypoints, corridor) < 1000.0

    def test_first_waypoint_is_departure_and_gaps_bounded(self):
        group = group_of(
            [corridor_segment(219000001 + i, [PORT_A, PORT_B]) for i in range(3)]
        )
        audit = GroupAudit(group_key="0-1-Cargo", pool_size=0)
        route = extract_standard_routes(group, PARAMS, PORT_A, PORT_B, audit=audit)[0]
        assert route.waypoints[0] == PORT_A
        assert haversine_distance(route.waypoints[-1], PORT_B) <= PARAMS.d_complete
        if audit.expansions == 0:
            for a, b in zip(route.waypoints, route.waypoints[1:]):
                assert haversine_distance(a, b) <= 2.0 * PARAMS.r + 1.0

    def test_determinism(self):
        group = group_of(
            [corridor_segment(219000001 + i, [PORT_A, PORT_B]) for i in range(3)]
        )
        a = extract_standard_routes(group, PARAMS, PORT_A, PORT_B)
        b = extract_standard_routes(group, PARAMS, PORT_A, PORT_B)
        assert [(r.label, r.waypoints, r.completed) for r in a] == [
            (r.label, r.waypoints, r.completed) for r in b
        ]

    def test_point_conservation_in_audit(self):
        group = group_of(
            [corridor_segment(219000001 + i, [PORT_A, PORT_B]) for i in range(3)]
        )
        audit = GroupAudit(group_key="0-1-Cargo", pool_size=0)
        extract_standard_routes(group, PARAMS, PORT_A, PORT_B, audit=audit)
        assert audit.pool_size == sum(len(s.points) for s in group.segments)
        assert audit.outlier_count <= audit.pool_size


class TestDegenerateGroup:
    def test_single_sparse_segment_yields_length_one_route(self):
        # 11 points over 200 km: ~20 km apart, sparser than the search ball
        group = group_of([corridor_segment(219000001, [PORT_A, PORT_B], n_points=11)])
        routes = extract_standard_routes(group, PARAMS, PORT_A, PORT_B)
        assert len(routes) == 1
        assert not routes[0].completed
        assert routes[0].waypoints == [PORT_A]


class TestForkSplit:
    def fork_group(self):
        lateral = 15_000.0
        v = destination_point(PORT_A, 90.0, 40_000.0)
        up1 = destination_point(destination_point(PORT_A, 90.0, 58_000.0), 0.0, lateral)
        up2 = destination_point(destination_point(PORT_A, 90.0, 185_000.0), 0.0, lateral)
        dn1 = destination_point(destination_point(PORT_A, 90.0, 58_000.0), 180.0, lateral)
        dn2 = destination_point(destination_point(PORT_A, 90.0, 185_000.0), 180.0, lateral)
        north = [PORT_A, v, up1, up2, PORT_B]
        south = [PORT_A, v, dn1, dn2, PORT_B]
        segments = [
            corridor_segment(219000001 + i, north if i % 2 == 0 else south, n_points=151)
            for i in range(6)
        ]
        return group_of(segments), north, south

    def test_two_branches_recovered(self):
        group, north, south = self.fork_group()
        params = ExtractionParams(eps=2000.0, min_samples=3, r=4000.0)
        routes = extract_standard_routes(group, params, PORT_A, PORT_B)
        assert [r.label for r in routes] == ["0.0", "0.1"]
        assert all(r.completed for r in routes)

        corridors = [sample_polyline(north, 250.0), sample_polyline(south, 250.0)]
        assignments = []
        for route in routes:
            scores = [directed_hausdorff_m(route.waypoints, c) for c in corridors]
            assignments.append(scores.index(min(scores)))
            assert min(scores) < 2000.0
        assert sorted(assignments) == [0, 1]


class TestGeojson:
    def test_two_waypoint_linestring(self):
        route = StandardRoute("k:0", GroupKey(0, 1, "Cargo"), "0", [PORT_A, PORT_B], True, 3, 0)
        feature = route_to_polyline(route)
        assert feature["geometry"]["type"] == "LineString"
        assert len(feature["geometry"]["coordinates"]) == 2
        lon, lat = feature["geometry"]["coordinates"][0]
        assert (lat, lon) == (pytest.approx(PORT_A.lat), pytest.approx(PORT_A.lon))

    def test_degenerate_point_feature(self):
        route = StandardRoute("k:0", GroupKey(0, 1, "Cargo"), "0", [PORT_A], False, 1, 0)
        assert route_to_polyline(route)["geometry"]["type"] == "Point"

    def test_feature_collection_validates_against_geojson_schema(self):
        import jsonschema

        group, _, _ = TestForkSplit().fork_group()
        params = ExtractionParams(eps=2000.0, min_samples=3, r=4000.0)
        routes = extract_standard_routes(group, params, PORT_A, PORT_B)
        collection = routes_to_feature_collection(routes)
        jsonschema.validate(json.loads(json.dumps(collection)), GEOJSON_SCHEMA)


# Trimmed copy of the official GeoJSON JSON-Schema, FeatureCollection with
# LineString/Point geometries; an independent structural validator.
GEOJSON_SCHEMA = {
    "type": "object",
    "required": ["type", "features"],
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "geometry", "properties"],
                "properties": {
                    "type": {"const": "Feature"},
                    "properties": {"type": "object"},
                    "geometry": {
                        "oneOf": [
                            {
                                "type": "object",
                                "required": ["type", "coordinates"],
                                "properties": {
                                    "type": {"const": "Point"},
                                    "coordinates": {
                                        "type": "array",
                                        "minItems": 2,
                                        "maxItems": 3,
                                        "items": {"type": "number"},
                                    },
                                },
                            },
                            {
                                "type": "object",
                                "required": ["type", "coordinates"],
                                "properties": {
                                    "type": {"const": "LineString"},
                                    "coordinates": {
                                        "type": "array",
                                        "minItems": 2,
                                        "items": {
                                            "type": "array",
                                            "minItems": 2,
                                            "maxItems": 3,
                                            "items": {"type": "number"},
                                        },
                                    },
                                },
                            },
                        ]
                    },
                },
            },
        },
    },
}
