"""Standard route extraction: the iterative density-clustering walk.

Each route group pools every fix of its member segments. Starting at the
departure port centroid, the walk repeatedly selects the unvisited points
within a search radius of the current front, clusters them with DBSCAN,
and appends cluster barycenters as waypoints. One cluster advances the
route; several clusters split it into labeled branches, one per cluster.
Noise points are never deleted, only recorded in the outlier ledger.

Branches own their visited flags: siblings share everything marked before
the split but not after, so one fork cannot starve the other of points.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import GroupKey, RouteGroup
from .clustering import NOISE, DbscanParams, dbscan
from .geo import LatLon, barycenter, haversine_distance, haversine_vec


@dataclass(frozen=True)
class ExtractionParams:
    eps: float  # meters, DBSCAN radius
    min_samples: int
    r: float  # meters, search radius around the route front
    expansion_factor: float = 1.5
    max_expansions: int = 3
    d_complete: float | None = None  # defaults to max(2r, 5 km)
    max_iterations: int = 10000

    def __post_init__(self) -> None:
        if self.eps <= 0 or self.r <= 0:
            raise ValueError("eps and r must be positive")
        if self.r < self.eps:
            raise ValueError(f"search radius r={self.r} must be >= eps={self.eps}")
        if self.d_complete is None:
            object.__setattr__(self, "d_complete", max(2.0 * self.r, 5000.0))


@dataclass
class StandardRoute:
    route_id: str
    group_key: GroupKey
    label: str  # branch path, e.g. "0" or "0.1"
    waypoints: list[LatLon]
    completed: bool
    support: int  # distinct segments that contributed clustered points
    outlier_points: int


@dataclass
class GroupAudit:
    """Per-group audit trail of the walk, persisted next to the routes."""

    group_key: str
    pool_size: int
    iterations: int = 0
    expansions: int = 0
    clusters_per_step: list[int] = field(default_factory=list)
    outlier_keys: list[tuple[int, float]] = field(default_factory=list)  # (mmsi, ts)

    @property
    def outlier_count(self) -> int:
        return len(self.outlier_keys)


@dataclass
class _Branch:
    label: str
    front: LatLon
    waypoints: list[LatLon]
    visited: np.ndarray  # bool per pool point, branch-local
    iterations: int
    support_segments: set[int]
    outliers: set[int]  # pool indices marked noise in this lineage


def _finalize(branch: _Branch, completed: bool, group: RouteGroup, routes: list[StandardRoute]) -> None:
    routes.append(
        StandardRoute(
            route_id=f"{group.key}:{branch.label}",
            group_key=group.key,
            label=branch.label,
            waypoints=branch.waypoints,
            completed=completed,
            support=len(branch.support_segments),
            outlier_points=len(branch.outliers),
        )
    )


def extract_standard_routes(
    group: RouteGroup,
    params: ExtractionParams,
    departure: LatLon,
    destination: LatLon,
    audit: GroupAudit | None = None,
) -> list[StandardRoute]:
    """Walk one route group into one or more standard routes.

    The walk is breadth-first over active branches. A branch finalizes
    when its front reaches the destination (completed), when even the
    expanded search ball cannot gather min_samples unvisited points, when
    DBSCAN finds only noise, or when it runs out of iterations.
    """
    pool_lats: list[float] = []
    pool_lons: list[float] = []
    pool_seg: list[int] = []
    pool_key: list[tuple[int, float]] = []
    for si, seg in enumerate(group.segments):
        for rec in seg.points:
            pool_lats.append(rec.pos.lat)
            pool_lons.append(rec.pos.lon)
            pool_seg.append(si)
            pool_key.append((rec.mmsi, rec.ts))
    lats = np.array(pool_lats)
    lons = np.array(pool_lons)
    n = len(lats)
    if audit is not None:
        audit.pool_size = n

    routes: list[StandardRoute] = []
    group_outliers: set[int] = set()
    worklist: deque[_Branch] = deque(
        [
            _Branch(
                label="0",
                front=departure,
                waypoints=[departure],
                visited=np.zeros(n, dtype=bool),
                iterations=0,
                support_segments=set(),
                outliers=set(),
            )
        ]
    )

    while worklist:
        branch = worklist.popleft()

        d = haversine_vec(branch.front.lat, branch.front.lon, lats, lons)
        radius = params.r
        expansions = 0
        while True:
            selected = np.flatnonzero(~branch.visited & (d <= radius))
            if len(selected) >= params.min_samples:
                break
            if expansions >= params.max_expansions:
                selected = None
                break
            radius *= params.expansion_factor
            expansions += 1
            if audit is not None:
                audit.expansions += 1
        if selected is None:
            done = haversine_distance(branch.front, destination) <= params.d_complete
            _finalize(branch, done, group, routes)
            continue

        points = [LatLon(lats[i], lons[i]) for i in selected]
        clustering = dbscan(points, DbscanParams(params.eps, params.min_samples))
        branch.visited[selected] = True
        if audit is not None:
            audit.iterations += 1
            audit.clusters_per_step.append(clustering.n_clusters)

        clusters: list[list[int]] = [[] for _ in range(clustering.n_clusters)]
        for local, label in enumerate(clustering.labels):
            pool_idx = int(selected[local])
            if label == NOISE:
                branch.outliers.add(pool_idx)
                group_outliers.add(pool_idx)
            else:
                clusters[label].append(pool_idx)
                branch.support_segments.add(pool_seg[pool_idx])

        if not clusters:
            done = haversine_distance(branch.front, destination) <= params.d_complete
            _finalize(branch, done, group, routes)
            continue

        barycenters = [
            barycenter([LatLon(lats[i], lons[i]) for i in members]) for members in clusters
        ]

        if len(clusters) == 1:
            branch.front = barycenters[0]
            branch.waypoints.append(barycenters[0])
            branch.iterations += 1
            if haversine_distance(branch.front, destination) <= params.d_complete:
                _finalize(branch, True, group, routes)
            elif branch.iterations >= params.max_iterations:
                _finalize(branch, False, group, routes)
            else:
                worklist.append(branch)
        else:
            for j, bc in enumerate(barycenters):
                child = _Branch(
                    label=f"{branch.label}.{j}",
                    front=bc,
                    waypoints=branch.waypoints + [bc],
                    visited=branch.visited.copy(),
                    iterations=branch.iterations + 1,
                    support_segments=set(branch.support_segments),
                    outliers=set(branch.outliers),
                )
                if haversine_distance(bc, destination) <= params.d_complete:
                    _finalize(child, True, group, routes)
                elif child.iterations >= params.max_iterations:
                    _finalize(child, False, group, routes)
                else:
                    worklist.append(child)

    if audit is not None:
        audit.outlier_keys = sorted(pool_key[i] for i in group_outliers)
    routes.sort(key=lambda r: r.label)
    return routes


def route_to_polyline(route: StandardRoute, extra_properties: dict | None = None) -> dict:
    """GeoJSON feature for one route: LineString of waypoints, or a Point
    for a degenerate single-waypoint route."""
    coords = [[round(p.lon, 6), round(p.lat, 6)] for p in route.waypoints]
    geometry = (
        {"type": "LineString", "coordinates": coords}
        if len(coords) >= 2
        else {"type": "Point", "coordinates": coords[0]}
    )
    properties = {
        "route_id": route.route_id,
        "label": route.label,
        "departure_port": route.group_key.departure,
        "destination_port": route.group_key.destination,
        "vessel_type": route.group_key.vessel_type,
        "support": route.support,
        "completed": route.completed,
        "outlier_points": route.outlier_points,
    }
    if extra_properties:
        properties.update(extra_properties)
    return {"type": "Feature", "geometry": geometry, "properties": properties}


def routes_to_feature_collection(routes: list[StandardRoute]) -> dict:
    ordered = sorted(routes, key=lambda r: (str(r.group_key), r.label))
    return {"type": "FeatureCollection", "features": [route_to_polyline(r) for r in ordered]}


def write_routes_geojson(routes: list[StandardRoute], path: Path) -> None:
    path.write_text(json.dumps(routes_to_feature_collection(routes), indent=2) + "\n")


def write_audits(audits: list[GroupAudit], path: Path) -> None:
    payload = [
        {
            "group": a.group_key,
            "pool_size": a.pool_size,
            "iterations": a.iterations,
            "expansions": a.expansions,
            "clusters_per_step": a.clusters_per_step,
            "outliers": a.outlier_count,
            "outlier_points": [[mmsi, ts] for mmsi, ts in a.outlier_keys],
        }
        for a in audits
    ]
    path.write_text(json.dumps(payload) + "\n")
