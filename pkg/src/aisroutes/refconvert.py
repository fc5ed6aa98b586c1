"""Convert raw reference-port extracts to the pipeline's name,lat,lon CSV.

Supports the two open databases the labeler consumes (OSM overpass JSON
exports and World Port Index CSV dumps) plus a generic CSV mode with
explicit column names.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ConfigError

_WPI_NAME_COLS = ("Main Port Name", "PORT_NAME", "portname", "name")
_WPI_LAT_COLS = ("Latitude", "LAT", "latitude", "lat")
_WPI_LON_COLS = ("Longitude", "LON", "longitude", "lon")


def _pick(fieldnames: list[str], candidates: tuple[str, ...], what: str, path: Path) -> str:
    for cand in candidates:
        if cand in fieldnames:
            return cand
    raise ConfigError(f"{path}: no {what} column among {candidates}")


def convert_osm(path: Path) -> list[tuple[str, float, float]]:
    """Rows from an overpass-style JSON export; unnamed nodes are skipped."""
    data = json.loads(path.read_text())
    rows = []
    for element in data.get("elements", []):
        tags = element.get("tags", {})
        name = tags.get("name")
        lat = element.get("lat", element.get("center", {}).get("lat"))
        lon = element.get("lon", element.get("center", {}).get("lon"))
        if name and lat is not None and lon is not None:
            rows.append((name.strip().upper(), float(lat), float(lon)))
    return rows


def convert_wpi(path: Path) -> list[tuple[str, float, float]]:
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        name_col = _pick(fieldnames, _WPI_NAME_COLS, "port name", path)
        lat_col = _pick(fieldnames, _WPI_LAT_COLS, "latitude", path)
        lon_col = _pick(fieldnames, _WPI_LON_COLS, "longitude", path)
        rows = []
        for row in reader:
            name = (row[name_col] or "").strip()
            if not name:
                continue
            try:
                rows.append((name.upper(), float(row[lat_col]), float(row[lon_col])))
            except (TypeError, ValueError):
                continue
        return rows


def convert_csv(path: Path, name_col: str, lat_col: str, lon_col: str) -> list[tuple[str, float, float]]:
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        for col in (name_col, lat_col, lon_col):
            if col not in fieldnames:
                raise ConfigError(f"{path}: missing column {col!r}")
        return [
            ((row[name_col] or "").strip().upper(), float(row[lat_col]), float(row[lon_col]))
            for row in reader
            if (row[name_col] or "").strip()
        ]


def write_reference(rows: list[tuple[str, float, float]], out_path: Path) -> int:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "lat", "lon"])
        for name, lat, lon in rows:
            writer.writerow([name, "%.6f" % lat, "%.6f" % lon])
    return len(rows)
