"""Ground-truth synthetic fleet generator.

Emits AIS CSV files with planted berths, corridors, mooring maneuvers,
and a configurable defect model (reporting gaps, GPS jitter, off-corridor
noise points, out-of-area voyage endpoints, parse-level bad rows),
together with a ground-truth JSON describing exactly what was planted.
Identical seeds produce byte-identical output.

Kinematics are deliberately simple: constant cruise speed with a
trapezoidal ramp near berths, plus a slow swing around the berth while
moored. That is the minimum that exercises the speed windows of the
segmentation FSM and the heading signature of the port detector.
"""
from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .geo import KNOTS_TO_MPS, LatLon, destination_point, haversine_distance, initial_bearing, interpolate

DWELL_S = 2700.0  # mooring dwell at each berth
ACCEL_S = 600.0  # speed ramp duration leaving/entering a berth
MOOR_ARC_RADIUS_M = 30.0
MOOR_ARC_SWEEP_DEG = 150.0
MOOR_SOG_KN = 0.3


@dataclass
class Berth:
    lat: float
    lon: float
    name: str | None = None
    in_reference: bool = False

    @property
    def pos(self) -> LatLon:
        return LatLon(self.lat, self.lon)


@dataclass
class Corridor:
    departure: int  # berth index
    destination: int
    paths: list[list[tuple[float, float]]] = field(default_factory=lambda: [[]])
    vessels: int = 3
    vessel_type: str = "Cargo"
    speed_kn: float = 12.0
    report_interval_s: float = 120.0


@dataclass
class DefectModel:
    gap_rate: float = 0.0  # fraction of voyages broken by one reporting hole
    gap_duration_s: float = 25_200.0
    gps_noise_sigma_m: float = 0.0
    out_of_aoi_rate: float = 0.0  # fraction of voyages entering/leaving mid-sea
    noise_point_rate: float = 0.0  # fraction of cruise fixes displaced off-corridor
    noise_offset_min_m: float = 4000.0
    noise_offset_max_m: float = 5500.0
    parse_defects: dict[str, int] = field(default_factory=dict)


@dataclass
class ScenarioSpec:
    seed: int
    berths: list[Berth]
    corridors: list[Corridor]
    defects: DefectModel = field(default_factory=DefectModel)
    start_ts: int = 1_577_836_800  # 2020-01-01T00:00:00Z
    mmsi_base: int = 219_000_000
    row_limit: int | None = None  # total CSV rows including planted defects

    def validate(self) -> None:
        for ci, corridor in enumerate(self.corridors):
            for endpoint in (corridor.departure, corridor.destination):
                if not 0 <= endpoint < len(self.berths):
                    raise ValueError(f"corridor {ci}: berth index {endpoint} out of range")
            if not corridor.paths:
                raise ValueError(f"corridor {ci}: needs at least one path variant")
            if corridor.vessels < 1:
                raise ValueError(f"corridor {ci}: needs at least one vessel")


def berth_name(spec: ScenarioSpec, index: int) -> str:
    return spec.berths[index].name or f"P{index:03d}"


class _Polyline:
    """Arc-length parameterization of a corridor variant."""

    def __init__(self, points: list[LatLon]):
        self.points = points
        self.cum = [0.0]
        for a, b in zip(points, points[1:]):
            self.cum.append(self.cum[-1] + haversine_distance(a, b))
        self.length = self.cum[-1]

    def at(self, dist: float) -> LatLon:
        if dist <= 0:
            return self.points[0]
        if dist >= self.length:
            return self.points[-1]
        hi = 1
        while self.cum[hi] < dist:
            hi += 1
        seg_len = self.cum[hi] - self.cum[hi - 1]
        f = (dist - self.cum[hi - 1]) / seg_len if seg_len > 0 else 0.0
        return interpolate(self.points[hi - 1], self.points[hi], f)

    def bearing_at(self, dist: float) -> float:
        a = self.at(max(0.0, dist - 50.0))
        b = self.at(min(self.length, dist + 50.0))
        if haversine_distance(a, b) < 1.0:
            return 0.0
        return initial_bearing(a, b)


@dataclass
class _Fix:
    ts: int
    pos: LatLon
    sog: float
    cog: float
    nav_status: int
    phase: str  # moor | ramp | cruise


def _mooring_fixes(berth: LatLon, t0: float, interval: float, heading0: float) -> list[_Fix]:
    fixes = []
    n = int(DWELL_S // interval)
    for k in range(n):
        angle = heading0 + MOOR_ARC_SWEEP_DEG * k / max(1, n - 1)
        pos = destination_point(berth, angle % 360.0, MOOR_ARC_RADIUS_M)
        fixes.append(
            _Fix(
                ts=int(t0 + k * interval),
                pos=pos,
                sog=MOOR_SOG_KN,
                cog=(angle + 90.0) % 360.0,
                nav_status=5,
                phase="moor",
            )
        )
    return fixes


def _voyage_fixes(
    line: _Polyline,
    corridor: Corridor,
    t_depart: float,
    skip_departure: bool,
    skip_arrival: bool,
    rng: random.Random,
) -> tuple[list[_Fix], float]:
    """Fixes for one voyage; returns (fixes, end timestamp)."""
    interval = corridor.report_interval_s
    cruise_mps = corridor.speed_kn * KNOTS_TO_MPS
    fixes: list[_Fix] = []
    t = t_depart

    if not skip_departure:
        fixes.extend(_mooring_fixes(line.at(0.0), t, interval, rng.uniform(0, 360)))
        t += DWELL_S

    # trapezoidal speed profile: ramp - cruise - ramp
    ramp_steps = max(1, int(ACCEL_S // interval))
    ramp_dist = sum(
        cruise_mps * (k + 1) / (ramp_steps + 1) * interval for k in range(ramp_steps)
    )
    start_dist = line.length * 0.55 if skip_departure else 0.0
    end_dist = line.length * 0.45 if skip_arrival else line.length
    dist = start_dist

    if not skip_departure:
        for k in range(ramp_steps):
            speed = cruise_mps * (k + 1) / (ramp_steps + 1)
            dist += speed * interval
            fixes.append(
                _Fix(int(t), line.at(dist), speed / KNOTS_TO_MPS, line.bearing_at(dist), 0, "ramp")
            )
            t += interval
    decel_start = end_dist - (0.0 if skip_arrival else ramp_dist)
    while dist + cruise_mps * interval < decel_start:
        dist += cruise_mps * interval
        fixes.append(
            _Fix(int(t), line.at(dist), corridor.speed_kn, line.bearing_at(dist), 0, "cruise")
        )
        t += interval
    if not skip_arrival:
        for k in range(ramp_steps):
            speed = cruise_mps * (ramp_steps - k) / (ramp_steps + 1)
            dist = min(end_dist, dist + speed * interval)
            fixes.append(
                _Fix(int(t), line.at(dist), speed / KNOTS_TO_MPS, line.bearing_at(dist), 0, "ramp")
            )
            t += interval
        fixes.extend(_mooring_fixes(line.at(line.length), t, interval, rng.uniform(0, 360)))
        t += DWELL_S
    return fixes, t


def _offset(pos: LatLon, north_m: float, east_m: float) -> LatLon:
    """Displace a position by local-tangent meters (small offsets only)."""
    dlat = north_m / 111_320.0
    dlon = east_m / (111_320.0 * max(0.05, math.cos(math.radians(pos.lat))))
    return LatLon(pos.lat + dlat, pos.lon + dlon)


_TYPE_CODE = {
    "Cargo": 70, "Tanker": 80, "Fishing": 30, "Passenger": 60,
    "Tug": 52, "Pleasure": 36, "Other": 90, "Unknown": None,
}

# Raw AIS extracts carry far more than the selected features; the decoy
# columns below are ignored by ingest, which is what makes the reported
# size reduction meaningful.
CSV_HEADER = [
    "mmsi", "timestamp", "lat", "lon", "sog", "cog", "heading",
    "ship_type", "flag", "destination", "nav_status",
    "imo", "callsign", "ship_name", "draught", "length", "width", "eta",
]


def generate(spec: ScenarioSpec, csv_path: Path, truth_path: Path) -> dict:
    """Write the AIS CSV and ground-truth JSON for a scenario.

    Returns the ground-truth dictionary. The defect plan is applied with
    deterministic counts (round(rate * population)), so expected outcome
    fractions are exact by construction, not binomial.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    defects = spec.defects

    voyages = []
    vessel_index = 0
    for ci, corridor in enumerate(spec.corridors):
        dep = spec.berths[corridor.departure]
        dest = spec.berths[corridor.destination]
        for v in range(corridor.vessels):
            mmsi = spec.mmsi_base + vessel_index + 1
            vessel_index += 1
            path_index = v % len(corridor.paths)
            waypoints = (
                [dep.pos]
                + [LatLon(lat, lon) for lat, lon in corridor.paths[path_index]]
                + [dest.pos]
            )
            voyages.append(
                {
                    "mmsi": mmsi,
                    "corridor": ci,
                    "path_index": path_index,
                    "line": _Polyline(waypoints),
                    "t_depart": spec.start_ts + vessel_index * 600 + rng.randrange(0, 300),
                    "skip_departure": False,
                    "skip_arrival": False,
                    "gap_at": None,
                }
            )

    # deterministic defect assignment, stratified per corridor so no route
    # group draws an outsized share of broken voyages
    by_corridor: dict[int, list[int]] = {}
    for vid, voyage in enumerate(voyages):
        by_corridor.setdefault(voyage["corridor"], []).append(vid)
    out_ids: list[int] = []
    gap_ids: list[int] = []
    for ci in sorted(by_corridor):
        members = by_corridor[ci]
        n_out = round(defects.out_of_aoi_rate * len(members))
        picked_out = sorted(rng.sample(members, n_out)) if n_out else []
        out_ids.extend(picked_out)
        remaining = [vid for vid in members if vid not in picked_out]
        n_gap = min(round(defects.gap_rate * len(members)), len(remaining))
        gap_ids.extend(sorted(rng.sample(remaining, n_gap)) if n_gap else [])
    for i, vid in enumerate(sorted(out_ids)):
        voyages[vid]["skip_departure" if i % 2 == 0 else "skip_arrival"] = True
    out_ids = sorted(out_ids)
    gap_ids = sorted(gap_ids)

    rows: list[dict] = []
    truth_voyages = []
    noise_points: list[list] = []
    for vid, voyage in enumerate(voyages):
        corridor = spec.corridors[voyage["corridor"]]
        fixes, t_end = _voyage_fixes(
            voyage["line"],
            corridor,
            voyage["t_depart"],
            voyage["skip_departure"],
            voyage["skip_arrival"],
            rng,
        )

        if vid in gap_ids:
            cruise_ts = [f.ts for f in fixes if f.phase == "cruise"]
            t_gap = cruise_ts[int(len(cruise_ts) * rng.uniform(0.25, 0.45))]
            voyage["gap_at"] = (t_gap, defects.gap_duration_s)
            fixes = [f for f in fixes if not t_gap < f.ts <= t_gap + defects.gap_duration_s]

        cruise_idx = [i for i, f in enumerate(fixes) if f.phase == "cruise"]
        n_noise = round(defects.noise_point_rate * len(cruise_idx))
        noisy: set[int] = set()
        if n_noise:
            # never displace adjacent fixes: two opposite-side outliers in a
            # row would imply a speed the ingest glitch filter rejects
            order = list(cruise_idx)
            rng.shuffle(order)
            for i in order:
                if len(noisy) == n_noise:
                    break
                if i - 1 not in noisy and i + 1 not in noisy:
                    noisy.add(i)

        dest_name = berth_name(spec, corridor.destination)
        for i, fix in enumerate(fixes):
            pos = fix.pos
            if i in noisy:
                offset = rng.uniform(defects.noise_offset_min_m, defects.noise_offset_max_m)
                side = rng.choice((-90.0, 90.0))
                pos = destination_point(pos, (fix.cog + side) % 360.0, offset)
                noise_points.append([voyage["mmsi"], fix.ts])
            elif defects.gps_noise_sigma_m > 0:
                north = rng.gauss(0.0, defects.gps_noise_sigma_m)
                east = rng.gauss(0.0, defects.gps_noise_sigma_m)
                norm = math.hypot(north, east)
                cap = 3.0 * defects.gps_noise_sigma_m
                if norm > cap:
                    north, east = north * cap / norm, east * cap / norm
                pos = _offset(pos, north, east)
            rows.append(
                {
                    "mmsi": voyage["mmsi"],
                    "timestamp": fix.ts,
                    "lat": pos.lat,
                    "lon": pos.lon,
                    "sog": fix.sog,
                    "cog": fix.cog,
                    "heading": fix.cog,
                    "ship_type": _TYPE_CODE[corridor.vessel_type],
                    "flag": "",
                    "destination": dest_name,
                    "nav_status": fix.nav_status,
                }
            )

        expected = "Complete"
        if voyage["skip_departure"]:
            expected = "NoDeparture"
        elif voyage["skip_arrival"]:
            expected = "NoArrival"
        truth_voyages.append(
            {
                "mmsi": voyage["mmsi"],
                "corridor": voyage["corridor"],
                "path_index": voyage["path_index"],
                "departure": berth_name(spec, corridor.departure),
                "destination": dest_name,
                "departure_berth": corridor.departure,
                "destination_berth": corridor.destination,
                "t_depart": voyage["t_depart"],
                "t_end": t_end,
                "expected_completeness": expected,
                "gap": voyage["gap_at"],
            }
        )

    rows.sort(key=lambda r: (r["timestamp"], r["mmsi"]))
    lines = [_format_row(r) for r in rows]
    if spec.row_limit is not None:
        clean_budget = spec.row_limit - sum(defects.parse_defects.values())
        if clean_budget < 1 or clean_budget > len(lines):
            raise ValueError(
                f"row_limit {spec.row_limit} needs {clean_budget} clean rows, "
                f"have {len(lines)}"
            )
        lines = lines[:clean_budget]
    planted_parse = _inject_parse_defects(lines, defects.parse_defects, rng)

    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for line in lines:
            fh.write(line + "\n")

    truth = {
        "seed": spec.seed,
        "berths": [asdict(b) | {"name": berth_name(spec, i)} for i, b in enumerate(spec.berths)],
        "corridors": [
            {
                "departure": c.departure,
                "destination": c.destination,
                "vessel_type": c.vessel_type,
                "paths": [
                    [[p.lat, p.lon] for p in ([spec.berths[c.departure].pos]
                                              + [LatLon(la, lo) for la, lo in path]
                                              + [spec.berths[c.destination].pos])]
                    for path in c.paths
                ],
            }
            for c in spec.corridors
        ],
        "voyages": truth_voyages,
        "defects": {
            "noise_points": noise_points,
            "parse_defects": planted_parse,
            "gap_voyages": [truth_voyages[i]["mmsi"] for i in gap_ids],
            "out_of_aoi_voyages": [truth_voyages[i]["mmsi"] for i in out_ids],
        },
    }
    truth_path.parent.mkdir(parents=True, exist_ok=True)
    truth_path.write_text(json.dumps(truth, indent=2) + "\n")
    return truth


def _format_row(r: dict) -> str:
    mmsi = r["mmsi"]
    return ",".join(
        [
            str(mmsi),
            str(r["timestamp"]),
            "%.6f" % r["lat"],
            "%.6f" % r["lon"],
            "%.1f" % r["sog"],
            "%.1f" % r["cog"],
            "%.1f" % r["heading"],
            "" if r["ship_type"] is None else str(r["ship_type"]),
            r["flag"],
            r["destination"],
            str(r["nav_status"]),
            str(9_000_000 + mmsi % 1_000_000),
            "CALL%04d" % (mmsi % 10_000),
            "VESSEL %06d" % (mmsi % 1_000_000),
            "%.1f" % (6.0 + mmsi % 7),
            str(90 + mmsi % 120),
            str(14 + mmsi % 18),
            "00000000",
        ]
    )


def _inject_parse_defects(lines: list[str], plan: dict[str, int], rng: random.Random) -> dict:
    """Splice defective rows into the formatted CSV body, in place.

    Each planted row derives from a distinct clean base row and is built
    so the parser (or the track builder) rejects it under exactly the
    intended reason; distinct bases keep planted rows from colliding with
    each other and shifting between rejection buckets.
    """
    planted = {}
    total = sum(plan.get(r, 0) for r in plan)
    if total == 0:
        return {}
    if total > len(lines):
        raise ValueError(f"cannot plant {total} defects into {len(lines)} rows")
    bases = rng.sample(range(len(lines)), total)
    inserts: list[tuple[int, str]] = []
    cursor = 0
    for reason in ("bad_coords", "bad_mmsi", "duplicate", "time_regression", "speed_jump"):
        count = plan.get(reason, 0)
        planted[reason] = count
        for _ in range(count):
            at = bases[cursor]
            cursor += 1
            parts = lines[at].split(",")
            if reason == "bad_coords":
                parts[2] = "91.000000"
            elif reason == "bad_mmsi":
                parts[0] = "12345"
                parts[1] = str(int(parts[1]) + 1)
            elif reason == "duplicate":
                pass  # byte-identical copy
            elif reason == "time_regression":
                # same mmsi and timestamp, nudged position: collapses to
                # the first occurrence at track building
                parts[2] = "%.6f" % (float(parts[2]) + 0.0005)
            elif reason == "speed_jump":
                parts[1] = str(int(parts[1]) + 1)
                parts[2] = "%.6f" % (min(89.0, float(parts[2]) + 0.5))
            inserts.append((at, ",".join(parts)))
    inserts.sort(key=lambda pair: pair[0])
    out: list[str] = []
    ins = 0
    for i, line in enumerate(lines):
        out.append(line)
        while ins < len(inserts) and inserts[ins][0] == i:
            out.append(inserts[ins][1])
            ins += 1
    lines[:] = out
    return planted


def write_reference_csv(spec: ScenarioSpec, path: Path) -> int:
    """Reference-port CSV (name,lat,lon) for the berths flagged as known."""
    count = 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "lat", "lon"])
        for i, berth in enumerate(spec.berths):
            if berth.in_reference:
                writer.writerow([berth_name(spec, i), "%.6f" % berth.lat, "%.6f" % berth.lon])
                count += 1
    return count


def scenario_to_json(spec: ScenarioSpec) -> str:
    return json.dumps(asdict(spec), indent=2)


def scenario_from_json(text: str) -> ScenarioSpec:
    data = json.loads(text)
    return ScenarioSpec(
        seed=data["seed"],
        berths=[Berth(**b) for b in data["berths"]],
        corridors=[
            Corridor(
                departure=c["departure"],
                destination=c["destination"],
                paths=[[tuple(p) for p in path] for path in c.get("paths", [[]])],
                vessels=c.get("vessels", 3),
                vessel_type=c.get("vessel_type", "Cargo"),
                speed_kn=c.get("speed_kn", 12.0),
                report_interval_s=c.get("report_interval_s", 120.0),
            )
            for c in data["corridors"]
        ],
        defects=DefectModel(**data.get("defects", {})),
        start_ts=data.get("start_ts", 1_577_836_800),
        mmsi_base=data.get("mmsi_base", 219_000_000),
        row_limit=data.get("row_limit"),
    )
