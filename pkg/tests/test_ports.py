import random

from aisroutes.clustering import DbscanParams
from aisroutes.geo import LatLon, destination_point, haversine_distance
from aisroutes.ports import (
    DetectionConfig,
    Port,
    PortDatabase,
    ReferencePort,
    consolidate_ports,
    detect_candidates,
    load_port_db,
    nearest_port,
    save_port_db,
)
from aisroutes.records import AisRecord, VesselClass, VesselTrack

CFG = DetectionConfig()


def track_from(fixes, mmsi=219000001) -> VesselTrack:
    records = [
        AisRecord(mmsi=mmsi, ts=ts, pos=pos, sog=sog) for ts, pos, sog in fixes
    ]
    return VesselTrack(mmsi=mmsi, vessel_type=VesselClass.CARGO, flag="DK", records=records)


def straight_cruise(start: LatLon, bearing: float, speed_kn: float, n: int, dt: float = 120.0):
    step = speed_kn * 0.514444 * dt
    return [
        (i * dt, destination_point(start, bearing, step * i), speed_kn) for i in range(n)
    ]


class TestDetectCandidates:
    def test_constant_speed_track_yields_nothing(self):
        track = track_from(straight_cruise(LatLon(55, 5), 90.0, 12.0, 60))
        assert detect_candidates(track, CFG) == []

    def test_synthetic_mooring_detected_near_berth(self):
        berth = LatLon(55.0, 5.0)
        fixes = []
        # approach at 10 kn toward the berth from 8 km west
        approach_start = destination_point(berth, 270.0, 8000.0)
        for i in range(12):
            pos = destination_point(approach_start, 90.0, 10 * 0.514444 * 120 * i)
            fixes.append((120.0 * i, pos, 10.0))
        # 45 min at 0.3 kn swinging 120 degrees around the berth
        t0 = 120.0 * 12
        for k in range(22):
            angle = 120.0 * k / 21
            fixes.append((t0 + 120.0 * k, destination_point(berth, angle, 40.0), 0.3))
        candidates = detect_candidates(track_from(fixes), CFG)
        assert len(candidates) == 1
        assert haversine_distance(candidates[0].pos, berth) < 200.0

    def test_straight_drift_without_turn_or_dwell_ignored(self):
        # 10 min at 0.3 kn in a straight line: under both trigger clauses
        track = track_from(straight_cruise(LatLon(55, 5), 90.0, 0.3, 6, dt=100.0))
        assert detect_candidates(track, CFG) == []

    def test_long_dwell_without_heading_change_detected(self):
        # 45 min nearly stationary drift: dwell clause catches offshore slots
        fixes = straight_cruise(LatLon(55, 5), 90.0, 0.2, 28, dt=100.0)
        candidates = detect_candidates(track_from(fixes), CFG)
        assert len(candidates) == 1


def make_db(ports_spec) -> PortDatabase:
    ports = [
        Port(port_id=i, centroid=pos, radius=radius, label=None, source="Derived", support=3)
        for i, (pos, radius) in enumerate(ports_spec)
    ]
    return PortDatabase(ports=ports, built_at=0.0, params=DbscanParams(1500.0, 3))


class TestConsolidatePorts:
    def candidates_blob(self, center: LatLon, n: int, spread_m: float, seed: int = 3):
        from aisroutes.ports import PortCandidate

        rng = random.Random(seed)
        return [
            PortCandidate(
                mmsi=219000001 + i,
                pos=destination_point(center, rng.uniform(0, 360), rng.uniform(0, spread_m)),
                t_start=1000.0 * i,
                t_end=1000.0 * i + 600.0,
                max_heading_change=90.0,
            )
            for i in range(n)
        ]

    def test_no_candidates_keeps_reference_ports(self):
        refs = [
            ReferencePort("SORTLAND", LatLon(68.7, 15.4)),
            ReferencePort("REYKJAVIK", LatLon(64.1, -21.9)),
        ]
        db = consolidate_ports([], refs, DbscanParams(1500.0, 3))
        assert len(db.ports) == 2
        assert {p.label for p in db.ports} == {"SORTLAND", "REYKJAVIK"}
        assert all(p.source == "OSM" and p.support == 0 for p in db.ports)

    def test_blob_becomes_one_derived_port(self):
        center = LatLon(60.0, 5.0)
        db = consolidate_ports(
            self.candidates_blob(center, 10, 500.0), [], DbscanParams(1500.0, 3)
        )
        assert len(db.ports) == 1
        port = db.ports[0]
        assert port.source == "Derived"
        assert port.support == 10
        assert haversine_distance(port.centroid, center) < 100.0
        assert port.radius >= 200.0

    def test_blob_near_reference_adopts_label(self):
        ref = ReferencePort("SORTLAND", LatLon(68.7, 15.4))
        blob_center = destination_point(ref.pos, 45.0, 1000.0)
        db = consolidate_ports(
            self.candidates_blob(blob_center, 10, 400.0), [ref], DbscanParams(1500.0, 3)
        )
        assert len(db.ports) == 1
        assert db.ports[0].label == "SORTLAND"
        assert db.ports[0].source == "Merged"

    def test_noise_candidates_discarded(self):
        lone = self.candidates_blob(LatLon(50.0, 0.0), 1, 10.0)
        db = consolidate_ports(lone, [], DbscanParams(1500.0, 3))
        assert db.ports == []

    def test_min_separation_enforced(self):
        refs = [
            ReferencePort("TWIN-A", LatLon(55.0, 5.0)),
            ReferencePort("TWIN-B", destination_point(LatLon(55.0, 5.0), 90.0, 800.0)),
        ]
        db = consolidate_ports([], refs, DbscanParams(1500.0, 3))
        assert len(db.ports) == 1  # closer than eps_port: merged
        for a in db.ports:
            for b in db.ports:
                if a.port_id != b.port_id:
                    assert haversine_distance(a.centroid, b.centroid) >= 1500.0

    def test_round_trip_json(self, tmp_path):
        db = consolidate_ports(
            self.candidates_blob(LatLon(60.0, 5.0), 5, 300.0),
            [ReferencePort("FAR", LatLon(61.0, 6.0), source="WPI")],
            DbscanParams(1500.0, 3),
        )
        save_port_db(db, tmp_path / "ports.json")
        loaded = load_port_db(tmp_path / "ports.json")
        assert len(loaded.ports) == len(db.ports)
        assert [p.port_id for p in loaded.ports] == [p.port_id for p in db.ports]
        assert [p.label for p in loaded.ports] == [p.label for p in db.ports]


class TestNearestPort:
    def test_exact_centroid(self):
        db = make_db([(LatLon(55, 5), 300.0), (LatLon(56, 5), 300.0)])
        hit = nearest_port(LatLon(55, 5), db)
        assert hit is not None
        port, dist = hit
        assert port.port_id == 0 and dist == 0.0

    def test_far_from_everything(self):
        db = make_db([(LatLon(55, 5), 300.0)])
        assert nearest_port(LatLon(56, 5), db) is None  # ~111 km away

    def test_tie_breaks_to_lower_port_id(self):
        a = LatLon(55.0, 5.0)
        b = destination_point(a, 90.0, 2000.0)
        mid = destination_point(a, 90.0, 1000.0)
        db = make_db([(a, 300.0), (b, 300.0)])
        hit = nearest_port(mid, db)
        assert hit is not None
        assert hit[0].port_id == 0

    def test_slack_respected(self):
        db = make_db([(LatLon(55, 5), 300.0)])
        just_inside = destination_point(LatLon(55, 5), 0.0, 1250.0)
        just_outside = destination_point(LatLon(55, 5), 0.0, 1400.0)
        assert nearest_port(just_inside, db, slack_m=1000.0) is not None
        assert nearest_port(just_outside, db, slack_m=1000.0) is None
