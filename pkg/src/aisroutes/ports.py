"""Port discovery from vessel behavior.

A vessel that spends a window below the departure-speed threshold while
swinging its bow (a mooring maneuver) or simply dwelling marks a port
candidate; candidates from the whole fleet are consolidated with DBSCAN
into a port database, labeled against reference ports where one is close
enough, and served to the segmentation FSM via nearest-port lookups.
"""
from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .clustering import NOISE, DbscanParams, dbscan
from .errors import ConfigError
from .geo import (
    KNOTS_TO_MPS,
    LatLon,
    angular_difference,
    barycenter,
    haversine_distance,
    haversine_vec,
    initial_bearing,
)
from .records import AisRecord, VesselTrack

MIN_PORT_RADIUS_M = 200.0
MAX_PORT_RADIUS_M = 10_000.0


@dataclass(frozen=True)
class PortCandidate:
    mmsi: int
    pos: LatLon  # median of the slow-window positions
    t_start: float
    t_end: float
    max_heading_change: float  # cumulative bearing change across the window


class ReferencePort(NamedTuple):
    name: str
    pos: LatLon
    source: str = "OSM"


@dataclass
class Port:
    port_id: int
    centroid: LatLon
    radius: float
    label: str | None
    source: str  # Derived | OSM | WPI | Merged
    support: int


@dataclass
class PortDatabase:
    ports: list[Port]
    built_at: float
    params: DbscanParams
    _lats: np.ndarray = field(init=False, repr=False)
    _lons: np.ndarray = field(init=False, repr=False)
    _radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.ports.sort(key=lambda p: p.port_id)
        self._lats = np.array([p.centroid.lat for p in self.ports])
        self._lons = np.array([p.centroid.lon for p in self.ports])
        self._radii = np.array([p.radius for p in self.ports])

    def __len__(self) -> int:
        return len(self.ports)

    def by_id(self, port_id: int) -> Port | None:
        if 0 <= port_id < len(self.ports):
            return self.ports[port_id]
        return None


def rolling_speeds_kn(records: list[AisRecord], window_s: float) -> list[float]:
    """Per-record rolling average speed over the trailing window, knots.

    The sample for each record is its reported SOG when present, otherwise
    the position-implied speed from the previous record.
    """
    n = len(records)
    samples: list[float] = []
    for i, rec in enumerate(records):
        if rec.sog is not None:
            samples.append(rec.sog)
        elif i > 0:
            dt = rec.ts - records[i - 1].ts
            d = haversine_distance(records[i - 1].pos, rec.pos)
            samples.append(d / dt / KNOTS_TO_MPS if dt > 0 else 0.0)
        else:
            samples.append(0.0)
    if n > 1 and records[0].sog is None:
        samples[0] = samples[1]

    averages: list[float] = []
    start = 0
    acc = 0.0
    for i in range(n):
        acc += samples[i]
        while records[i].ts - records[start].ts > window_s:
            acc -= samples[start]
            start += 1
        averages.append(acc / (i - start + 1))
    return averages


def cumulative_bearing_change(records: list[AisRecord]) -> float:
    """Total change of the position-implied bearing across a record run."""
    bearings: list[float] = []
    for a, b in zip(records, records[1:]):
        if haversine_distance(a.pos, b.pos) < 1.0:
            continue  # bearing undefined at GPS-identical fixes
        bearings.append(initial_bearing(a.pos, b.pos))
    return sum(angular_difference(h1, h2) for h1, h2 in zip(bearings, bearings[1:]))


@dataclass(frozen=True)
class DetectionConfig:
    window_s: float = 600.0
    min_speed_departure_kn: float = 2.0
    heading_change_min_deg: float = 60.0
    dwell_min_s: float = 1800.0
    min_window_fixes: int = 3


def detect_candidates(track: VesselTrack, cfg: DetectionConfig) -> list[PortCandidate]:
    """Port candidates from one track: maximal slow windows with either a
    mooring-style heading swing or a long dwell.

    The dual trigger matters offshore: a ship on a mooring buoy
    weathervanes too slowly for the heading clause, but the dwell clause
    still catches the slot.
    """
    records = track.records
    if len(records) < 2:
        return []
    avg = rolling_speeds_kn(records, cfg.window_s)
    slow = [v < cfg.min_speed_departure_kn for v in avg]

    candidates: list[PortCandidate] = []
    i = 0
    n = len(records)
    while i < n:
        if not slow[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and slow[j + 1]:
            j += 1
        window = records[i : j + 1]
        duration = window[-1].ts - window[0].ts
        if len(window) >= cfg.min_window_fixes:
            swing = cumulative_bearing_change(window)
            if swing >= cfg.heading_change_min_deg or duration >= cfg.dwell_min_s:
                pos = LatLon(
                    statistics.median(r.pos.lat for r in window),
                    statistics.median(r.pos.lon for r in window),
                )
                candidates.append(
                    PortCandidate(
                        mmsi=track.mmsi,
                        pos=pos,
                        t_start=window[0].ts,
                        t_end=window[-1].ts,
                        max_heading_change=swing,
                    )
                )
        i = j + 1
    return candidates


def _derived_radius(members: list[LatLon], centroid: LatLon) -> float:
    dists = sorted(haversine_distance(p, centroid) for p in members)
    p95 = float(np.percentile(dists, 95)) if dists else 0.0
    return min(MAX_PORT_RADIUS_M, max(MIN_PORT_RADIUS_M, p95))


def _merge_close_ports(ports: list[Port], min_separation_m: float) -> list[Port]:
    """Collapse port pairs closer than the consolidation eps.

    DBSCAN guarantees separated clusters, not separated barycenters, and
    appended reference ports can land near a derived one; this pass
    restores the database-level minimum separation.
    """
    ports = list(ports)
    while True:
        best: tuple[float, int, int] | None = None
        for i in range(len(ports)):
            for j in range(i + 1, len(ports)):
                d = haversine_distance(ports[i].centroid, ports[j].centroid)
                if d < min_separation_m and (best is None or (d, i, j) < best):
                    best = (d, i, j)
        if best is None:
            return ports
        _, i, j = best
        a, b = ports[i], ports[j]
        wa, wb = max(a.support, 1), max(b.support, 1)
        centroid = barycenter([a.centroid] * wa + [b.centroid] * wb)
        label = a.label if a.label else b.label
        merged = Port(
            port_id=-1,
            centroid=centroid,
            radius=max(a.radius, b.radius),
            label=label,
            source="Merged" if label else "Derived",
            support=a.support + b.support,
        )
        ports = [p for k, p in enumerate(ports) if k not in (i, j)] + [merged]


def consolidate_ports(
    candidates: list[PortCandidate],
    reference: list[ReferencePort],
    params: DbscanParams,
    label_match_dist_m: float = 3000.0,
    ref_port_radius_m: float = 500.0,
) -> PortDatabase:
    """Cluster fleet-wide candidates into a port database.

    Each DBSCAN cluster becomes a Derived port at its barycenter; noise
    candidates are discarded. A derived port adopts the name of a
    reference port within the label-match distance (source Merged);
    reference ports that label nothing are appended as-is.
    """
    ports: list[Port] = []
    if candidates:
        clustering = dbscan([c.pos for c in candidates], params)
        members: dict[int, list[LatLon]] = {}
        for cand, label in zip(candidates, clustering.labels):
            if label != NOISE:
                members.setdefault(label, []).append(cand.pos)
        for cid in range(clustering.n_clusters):
            pts = members[cid]
            centroid = barycenter(pts)
            ports.append(
                Port(
                    port_id=-1,
                    centroid=centroid,
                    radius=_derived_radius(pts, centroid),
                    label=None,
                    source="Derived",
                    support=len(pts),
                )
            )

    matched: set[int] = set()
    for port in ports:
        best: tuple[float, int] | None = None
        for ri, ref in enumerate(reference):
            d = haversine_distance(port.centroid, ref.pos)
            if d <= label_match_dist_m and (best is None or d < best[0]):
                best = (d, ri)
        if best is not None:
            ref = reference[best[1]]
            port.label = ref.name
            port.source = "Merged"
            matched.add(best[1])
    for ri, ref in enumerate(reference):
        if ri not in matched:
            ports.append(
                Port(
                    port_id=-1,
                    centroid=ref.pos,
                    radius=ref_port_radius_m,
                    label=ref.name,
                    source=ref.source,
                    support=0,
                )
            )

    ports = _merge_close_ports(ports, params.eps)
    ports.sort(key=lambda p: (p.centroid.lat, p.centroid.lon, p.label or ""))
    for pid, port in enumerate(ports):
        port.port_id = pid
    built_at = max((c.t_end for c in candidates), default=0.0)
    return PortDatabase(ports=ports, built_at=built_at, params=params)


def nearest_port(
    pos: LatLon, db: PortDatabase, slack_m: float = 1000.0
) -> tuple[Port, float] | None:
    """The closest port iff the position is within its radius plus slack.

    Distance ties resolve to the smaller port_id (ports are stored in id
    order, so the first minimum wins).
    """
    if not db.ports:
        return None
    d = haversine_vec(pos.lat, pos.lon, db._lats, db._lons)
    idx = int(np.argmin(d))
    dist = float(d[idx])
    if dist <= db._radii[idx] + slack_m:
        return db.ports[idx], dist
    return None


def save_port_db(db: PortDatabase, path: Path) -> None:
    payload = {
        "ports": [
            {
                "port_id": p.port_id,
                "lat": round(p.centroid.lat, 6),
                "lon": round(p.centroid.lon, 6),
                "radius_m": round(p.radius, 1),
                "label": p.label,
                "source": p.source,
                "support": p.support,
            }
            for p in db.ports
        ],
        "params": {"eps_m": db.params.eps, "min_samples": db.params.min_samples},
        "built_at": db.built_at,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")


def load_port_db(path: Path) -> PortDatabase:
    payload = json.loads(path.read_text())
    ports = [
        Port(
            port_id=p["port_id"],
            centroid=LatLon(p["lat"], p["lon"]),
            radius=p["radius_m"],
            label=p["label"],
            source=p["source"],
            support=p["support"],
        )
        for p in payload["ports"]
    ]
    params = DbscanParams(payload["params"]["eps_m"], payload["params"]["min_samples"])
    return PortDatabase(ports=ports, built_at=payload["built_at"], params=params)


def load_reference_ports(path: Path, source: str = "OSM") -> list[ReferencePort]:
    """Reference ports from a name,lat,lon CSV (the convert-ref output shape)."""
    import csv

    refs: list[ReferencePort] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"name", "lat", "lon"} <= set(reader.fieldnames):
            raise ConfigError(f"reference port file {path} must have name,lat,lon columns")
        for row in reader:
            refs.append(
                ReferencePort(
                    name=row["name"].strip(),
                    pos=LatLon(float(row["lat"]), float(row["lon"])),
                    source=source,
                )
            )
    return refs
