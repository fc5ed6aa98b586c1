import hashlib
import json

import pytest

from aisroutes.geo import LatLon, haversine_distance
from aisroutes.ingest import ColumnMap, build_tracks, parse_records
from aisroutes.records import QualityReport
from aisroutes.scenarios import (
    defect_fixture_scenario,
    fleet_scenario,
    fork_scenario,
    make_preset,
    straight_scenario,
)
from aisroutes.synth import (
    MOOR_ARC_RADIUS_M,
    generate,
    scenario_from_json,
    scenario_to_json,
    write_reference_csv,
)
from oracles import sample_polyline


def sha256(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def parse_csv(path):
    report = QualityReport()
    with path.open(newline="") as fh:
        records = list(parse_records(fh, ColumnMap(), report))
    return records, report


class TestDeterminism:
    def test_same_seed_identical_sha256(self, tmp_path):
        spec = straight_scenario(seed=101)
        generate(spec, tmp_path / "a.csv", tmp_path / "a.json")
        generate(spec, tmp_path / "b.csv", tmp_path / "b.json")
        assert sha256(tmp_path / "a.csv") == sha256(tmp_path / "b.csv")
        assert sha256(tmp_path / "a.json") == sha256(tmp_path / "b.json")

    def test_different_seed_differs(self, tmp_path):
        generate(straight_scenario(seed=1), tmp_path / "a.csv", tmp_path / "a.json")
        generate(straight_scenario(seed=2), tmp_path / "b.csv", tmp_path / "b.json")
        assert sha256(tmp_path / "a.csv") != sha256(tmp_path / "b.csv")


class TestBasicShape:
    def test_single_voyage_truth_and_ordering(self, tmp_path):
        spec = straight_scenario(vessels=1)
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        assert len(truth["voyages"]) == 1
        records, report = parse_csv(tmp_path / "ais.csv")
        assert report.rejected_total == 0
        ts = [r.ts for r in records]
        assert ts == sorted(ts)

    def test_gap_planted_where_declared(self, tmp_path):
        spec = straight_scenario(vessels=2, length_km=400.0)
        spec.defects.gap_rate = 1.0
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        records, _ = parse_csv(tmp_path / "ais.csv")
        t_lost = 21_600.0
        for voyage in truth["voyages"]:
            assert voyage["gap"] is not None
            own = sorted(r.ts for r in records if r.mmsi == voyage["mmsi"])
            holes = [
                (a, b) for a, b in zip(own, own[1:]) if b - a > t_lost
            ]
            assert len(holes) == 1
            t_gap, dur = voyage["gap"]
            assert holes[0][0] == pytest.approx(t_gap, abs=1.0)

    def test_noise_bound_holds_for_unplanted_fixes(self, tmp_path):
        spec = straight_scenario(vessels=2)
        spec.defects.gps_noise_sigma_m = 50.0
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        records, _ = parse_csv(tmp_path / "ais.csv")
        corridor = [LatLon(*p) for p in truth["corridors"][0]["paths"][0]]
        dense = sample_polyline(corridor, 100.0)
        bound = 3.0 * 50.0 + MOOR_ARC_RADIUS_M + 15.0  # noise + mooring swing + sampling
        for r in records:
            d = min(haversine_distance(r.pos, q) for q in dense)
            assert d <= bound

    def test_idealized_tracker_recovers_port_pairs(self, tmp_path):
        spec = make_preset("ports")
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        records, _ = parse_csv(tmp_path / "ais.csv")
        berths = {b["name"]: LatLon(b["lat"], b["lon"]) for b in truth["berths"]}
        by_mmsi: dict[int, list] = {}
        for r in records:
            by_mmsi.setdefault(r.mmsi, []).append(r)
        for voyage in truth["voyages"]:
            own = sorted(by_mmsi[voyage["mmsi"]], key=lambda r: r.ts)
            assert haversine_distance(own[0].pos, berths[voyage["departure"]]) < 500.0
            assert haversine_distance(own[-1].pos, berths[voyage["destination"]]) < 500.0

    def test_reference_csv_lists_flagged_berths(self, tmp_path):
        spec = make_preset("ports")
        count = write_reference_csv(spec, tmp_path / "ref.csv")
        lines = (tmp_path / "ref.csv").read_text().splitlines()
        assert lines[0] == "name,lat,lon"
        assert count == len(lines) - 1 == sum(1 for b in spec.berths if b.in_reference)


class TestDefectPlan:
    def test_out_of_aoi_count_exact(self, tmp_path):
        spec = fleet_scenario()
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        expected = [v["expected_completeness"] for v in truth["voyages"]]
        assert expected.count("Complete") == 190
        assert expected.count("NoDeparture") + expected.count("NoArrival") == 10

    def test_row_limit_exact(self, tmp_path):
        spec = defect_fixture_scenario()
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        body = (tmp_path / "ais.csv").read_text().splitlines()[1:]
        assert len(body) == 1000
        assert sum(truth["defects"]["parse_defects"].values()) == 100

    def test_fixture_defects_reject_under_intended_reasons(self, tmp_path):
        spec = defect_fixture_scenario()
        truth = generate(spec, tmp_path / "ais.csv", tmp_path / "truth.json")
        records, report = parse_csv(tmp_path / "ais.csv")
        build_tracks(records, report)
        assert report.rejected_by_reason == truth["defects"]["parse_defects"]
        assert report.records_out == 900


class TestScenarioJson:
    def test_round_trip(self):
        spec = fork_scenario(seed=77)
        clone = scenario_from_json(scenario_to_json(spec))
        assert clone.seed == spec.seed
        assert len(clone.berths) == len(spec.berths)
        assert clone.corridors[0].paths == [
            [tuple(p) for p in path] for path in spec.corridors[0].paths
        ]

    def test_validation_rejects_bad_berth_index(self):
        spec = straight_scenario()
        spec.corridors[0].destination = 9
        with pytest.raises(ValueError):
            spec.validate()
