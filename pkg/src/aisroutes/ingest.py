"""Parse raw AIS CSV extracts into per-MMSI, time-ordered vessel tracks.

Quality policy is rejection over repair: a row that fails a check is
dropped and counted under one reason, never patched, so the QualityReport
always reconciles exactly against the input row count.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .errors import ConfigError
from .geo import KNOTS_TO_MPS, LatLon, haversine_distance
from .records import (
    AisRecord,
    QualityReport,
    VesselClass,
    VesselTrack,
    classify_vessel,
    flag_from_mmsi,
)

REQUIRED_COLUMNS = ("mmsi", "ts", "lat", "lon")

# AIS "not available" sentinels
SOG_MAX_KN = 102.2
HEADING_NOT_AVAILABLE = 511.0


@dataclass
class ColumnMap:
    """Input column names for each selected feature; unmapped optional
    features are simply absent."""

    mmsi: str = "mmsi"
    ts: str = "timestamp"
    lat: str = "lat"
    lon: str = "lon"
    sog: str = "sog"
    cog: str = "cog"
    heading: str = "heading"
    ship_type: str = "ship_type"
    flag: str = "flag"
    destination: str = "destination"
    nav_status: str = "nav_status"


def parse_timestamp(raw: str) -> float:
    """Epoch seconds from either an integer/float epoch or ISO-8601 UTC."""
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_float(raw: str | None) -> float | None:
    if raw is None or raw.strip() == "":
        return None
    return float(raw)


def parse_records(
    stream: TextIO | Iterable[str],
    schema: ColumnMap,
    report: QualityReport,
) -> Iterator[AisRecord]:
    """Yield valid AisRecords from a CSV stream, counting rejected rows.

    Malformed rows are counted, not fatal; a missing mandatory column
    (mmsi, ts, lat, lon) is a fatal configuration error. Byte-identical
    repeats of an earlier row are rejected as duplicates.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise ConfigError("input CSV has no header row")
    missing = [
        col for col in REQUIRED_COLUMNS if getattr(schema, col) not in reader.fieldnames
    ]
    if missing:
        raise ConfigError(
            f"input CSV is missing mandatory columns: "
            f"{', '.join(getattr(schema, c) for c in missing)}"
        )
    have = {f.name: getattr(schema, f.name) in reader.fieldnames for f in fields(schema)}

    seen: set[bytes] = set()
    for row in reader:
        report.records_in += 1
        digest = hashlib.blake2b(
            ("\x1f".join("" if v is None else str(v) for v in row.values())).encode(),
            digest_size=16,
        ).digest()

        if None in row.values() or None in row:
            report.reject("malformed")
            continue
        try:
            mmsi = int(row[schema.mmsi])
        except ValueError:
            report.reject("bad_mmsi")
            continue
        if not 100_000_000 <= mmsi <= 999_999_999:
            report.reject("bad_mmsi")
            continue
        try:
            ts = parse_timestamp(row[schema.ts])
        except ValueError:
            report.reject("malformed")
            continue
        if ts <= 0:
            report.reject("malformed")
            continue
        try:
            lat = float(row[schema.lat])
            lon = float(row[schema.lon])
        except ValueError:
            report.reject("bad_coords")
            continue
        # lat 91 / lon 181 are the AIS no-position sentinels
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            report.reject("bad_coords")
            continue
        if digest in seen:
            report.reject("duplicate")
            continue

        try:
            sog = _parse_float(row[schema.sog]) if have["sog"] else None
            cog = _parse_float(row[schema.cog]) if have["cog"] else None
            heading = _parse_float(row[schema.heading]) if have["heading"] else None
            type_raw = row[schema.ship_type].strip() if have["ship_type"] else ""
            type_code = int(float(type_raw)) if type_raw else None
            nav_raw = row[schema.nav_status].strip() if have["nav_status"] else ""
            nav_status = int(float(nav_raw)) if nav_raw else None
        except ValueError:
            report.reject("malformed")
            continue
        if sog is not None and not 0.0 <= sog <= SOG_MAX_KN:
            sog = None
        if cog is not None:
            cog = cog % 360.0
        if heading is not None and (heading >= HEADING_NOT_AVAILABLE or heading < 0):
            heading = None
        if nav_status is not None and not 0 <= nav_status <= 15:
            nav_status = None

        flag = None
        if have["flag"]:
            flag = row[schema.flag].strip() or None
        if flag is None:
            flag = flag_from_mmsi(mmsi)
        destination = row[schema.destination].strip() or None if have["destination"] else None

        seen.add(digest)
        report.records_out += 1
        yield AisRecord(
            mmsi=mmsi,
            ts=ts,
            pos=LatLon(lat, lon),
            sog=sog,
            cog=cog,
            heading=heading,
            vessel_type=classify_vessel(type_code),
            flag=flag,
            destination=destination,
            nav_status=nav_status,
        )


def implied_speed_kn(a: AisRecord, b: AisRecord) -> float:
    """Position-implied speed between two reports, in knots."""
    dt = b.ts - a.ts
    if dt <= 0:
        return float("inf")
    return haversine_distance(a.pos, b.pos) / dt / KNOTS_TO_MPS


def build_tracks(
    records: Iterable[AisRecord],
    report: QualityReport | None = None,
    max_speed_kn: float = 60.0,
) -> list[VesselTrack]:
    """Partition records by MMSI into time-sorted tracks.

    Repeated timestamps collapse to the first occurrence (time_regression);
    a record implying more than max_speed_kn relative to the last kept
    report is a GPS glitch and is dropped (speed_jump). Dropping those
    rows moves them out of records_out so the report still reconciles.
    """
    by_mmsi: dict[int, list[AisRecord]] = {}
    for rec in records:
        by_mmsi.setdefault(rec.mmsi, []).append(rec)

    tracks = []
    for mmsi in sorted(by_mmsi):
        recs = sorted(by_mmsi[mmsi], key=lambda r: r.ts)  # stable: input order on ties
        kept: list[AisRecord] = []
        for rec in recs:
            if kept and rec.ts == kept[-1].ts:
                if report is not None:
                    report.reject("time_regression")
                    report.records_out -= 1
                continue
            if kept and implied_speed_kn(kept[-1], rec) > max_speed_kn:
                if report is not None:
                    report.reject("speed_jump")
                    report.records_out -= 1
                continue
            kept.append(rec)
        if not kept:
            continue
        vessel_type = next(
            (r.vessel_type for r in kept if r.vessel_type != VesselClass.UNKNOWN),
            VesselClass.UNKNOWN,
        )
        flag = next((r.flag for r in kept if r.flag), None)
        tracks.append(VesselTrack(mmsi=mmsi, vessel_type=vessel_type, flag=flag, records=kept))
    return tracks


TRACK_HEADER = [
    "mmsi", "timestamp", "lat", "lon", "sog", "cog", "heading",
    "ship_type", "flag", "destination", "nav_status",
]

_CLASS_TO_CODE = {
    VesselClass.CARGO: "70", VesselClass.TANKER: "80", VesselClass.FISHING: "30",
    VesselClass.PASSENGER: "60", VesselClass.TUG: "52", VesselClass.PLEASURE: "36",
    VesselClass.OTHER: "90", VesselClass.UNKNOWN: "",
}


def _fmt(value: float | None, pattern: str) -> str:
    return "" if value is None else pattern % value


def track_to_csv(track: VesselTrack) -> str:
    """Serialize one track in the same CSV schema the parser accepts, so a
    parse -> serialize -> parse round trip is lossless."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACK_HEADER)
    for r in track.records:
        writer.writerow(
            [
                r.mmsi,
                "%d" % r.ts if float(r.ts).is_integer() else repr(r.ts),
                "%.6f" % r.pos.lat,
                "%.6f" % r.pos.lon,
                _fmt(r.sog, "%.2f"),
                _fmt(r.cog, "%.1f"),
                _fmt(r.heading, "%.1f"),
                _CLASS_TO_CODE[r.vessel_type],
                r.flag or "",
                r.destination or "",
                "" if r.nav_status is None else str(r.nav_status),
            ]
        )
    return buf.getvalue()


def write_tracks(tracks: list[VesselTrack], out_dir: Path) -> int:
    """Write one <mmsi>.track CSV per vessel; returns total bytes written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    total = 0
    for track in tracks:
        data = track_to_csv(track).encode()
        (out_dir / f"{track.mmsi}.track").write_bytes(data)
        total += len(data)
    return total


def read_track(path: Path) -> VesselTrack:
    report = QualityReport()
    with path.open(newline="") as fh:
        records = list(parse_records(fh, ColumnMap(), report))
    tracks = build_tracks(records, report)
    if len(tracks) != 1:
        raise ConfigError(f"track file {path} holds {len(tracks)} vessels, expected 1")
    return tracks[0]
