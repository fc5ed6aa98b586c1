"""Geodesic primitives shared by every stage of the pipeline.

All positions are WGS84-style latitude/longitude degrees on a spherical
earth (R = 6,371,000 m). Bearings are degrees clockwise from true north
in [0, 360). Distances are meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

# Fixed-unit scalar aliases; suffix conventions (_m, _kn, _s, _deg) carry
# the unit through call sites.
Meters = float
Degrees = float
Knots = float
Seconds = float

KNOTS_TO_MPS = 1852.0 / 3600.0


class UndefinedBearing(ValueError):
    """Raised when the forward azimuth between two points is ambiguous."""


def normalize_lon(lon: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    return (lon + 180.0) % 360.0 - 180.0


@dataclass(frozen=True, slots=True)
class LatLon:
    """A geographic position; lat in [-90, 90], lon normalized to [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        object.__setattr__(self, "lon", normalize_lon(self.lon))


def haversine_distance(a: LatLon, b: LatLon) -> Meters:
    """Great-circle distance between two positions in meters."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    s = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return EARTH_RADIUS_M * 2.0 * math.asin(min(1.0, math.sqrt(s)))


def haversine_vec(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Distances in meters from one point to many; inputs in degrees."""
    phi1 = math.radians(lat)
    phi2 = np.radians(lats)
    dphi = np.radians(lats - lat)
    dlam = np.radians(lons - lon)
    s = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return EARTH_RADIUS_M * 2.0 * np.arcsin(np.minimum(1.0, np.sqrt(s)))


def initial_bearing(a: LatLon, b: LatLon) -> Degrees:
    """Forward azimuth from a to b, degrees clockwise from north in [0, 360).

    Undefined when the two points coincide or when starting at a pole.
    """
    if a == b:
        raise UndefinedBearing(f"bearing undefined for coincident points {a}")
    if abs(a.lat) == 90.0:
        raise UndefinedBearing(f"bearing undefined from a pole (lat={a.lat})")
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    bearing = math.degrees(math.atan2(y, x)) % 360.0
    # a hair-negative atan2 result wraps to exactly 360.0 under fp modulo
    return 0.0 if bearing == 360.0 else bearing


def angular_difference(h1: Degrees, h2: Degrees) -> Degrees:
    """Minimal absolute circular difference between two headings, in [0, 180]."""
    d = abs(h1 - h2) % 360.0
    return min(d, 360.0 - d)


def _to_unit_vectors(points: list[LatLon]) -> np.ndarray:
    lats = np.radians([p.lat for p in points])
    lons = np.radians([p.lon for p in points])
    return np.column_stack(
        (np.cos(lats) * np.cos(lons), np.cos(lats) * np.sin(lons), np.sin(lats))
    )


def barycenter(points: list[LatLon]) -> LatLon:
    """Spherical mean of a point set via the 3-D unit-vector embedding.

    The embedding keeps the mean correct across the antimeridian, where a
    naive component-wise longitude average lands on the wrong side of the
    globe.
    """
    if not points:
        raise ValueError("barycenter of an empty point set")
    if len(points) == 1:
        return points[0]
    v = _to_unit_vectors(points).mean(axis=0)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ValueError("barycenter undefined: points balance to the sphere center")
    x, y, z = (v / norm).tolist()
    return LatLon(math.degrees(math.atan2(z, math.hypot(x, y))), math.degrees(math.atan2(y, x)))


def destination_point(origin: LatLon, bearing_deg: Degrees, distance_m: Meters) -> LatLon:
    """Position reached from origin along an initial bearing for a distance."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    phi1 = math.radians(origin.lat)
    lam1 = math.radians(origin.lon)
    phi2 = math.asin(
        math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    )
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    return LatLon(math.degrees(phi2), math.degrees(lam2))


def interpolate(a: LatLon, b: LatLon, fraction: float) -> LatLon:
    """Point a given fraction of the way from a to b along the great circle."""
    if fraction <= 0.0:
        return a
    if fraction >= 1.0:
        return b
    va, vb = _to_unit_vectors([a, b])
    omega = math.acos(max(-1.0, min(1.0, float(np.dot(va, vb)))))
    if omega < 1e-12:
        return a
    s = math.sin(omega)
    v = (math.sin((1.0 - fraction) * omega) / s) * va + (math.sin(fraction * omega) / s) * vb
    x, y, z = v.tolist()
    return LatLon(math.degrees(math.atan2(z, math.hypot(x, y))), math.degrees(math.atan2(y, x)))
