"""Group complete segments by (departure, destination, vessel class).

Endpoints are snapped to port centroids first so that voyages into the
same basin aggregate exactly, then each group gets the feature vector the
parameter regression trains on. Vessel class stays in the key: fishing
traffic and cargo traffic between the same two ports are different
patterns and must not blend.
"""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

from .errors import ConsistencyError
from .geo import haversine_distance
from .ports import PortDatabase
from .segmentation import Completeness, Segment, segment_from_dict, segment_to_dict


class GroupKey(NamedTuple):
    departure: int
    destination: int
    vessel_type: str

    def __str__(self) -> str:
        return f"{self.departure}-{self.destination}-{self.vessel_type}"

    @classmethod
    def parse(cls, text: str) -> "GroupKey":
        dep, dest, vtype = text.split("-", 2)
        return cls(int(dep), int(dest), vtype)


@dataclass
class AggregateFeatures:
    n_routes: int
    n_points: int
    median_spatial_sampling_m: float  # median gap between consecutive fixes
    median_temporal_sampling_s: float
    median_duration_s: float
    mean_distance_m: float

    def as_vector(self) -> list[float]:
        return [
            float(self.n_routes),
            float(self.n_points),
            self.median_spatial_sampling_m,
            self.median_temporal_sampling_s,
            self.median_duration_s,
            self.mean_distance_m,
        ]


FEATURE_NAMES = [
    "n_routes",
    "n_points",
    "median_spatial_sampling_m",
    "median_temporal_sampling_s",
    "median_duration_s",
    "mean_distance_m",
]


@dataclass
class RouteGroup:
    key: GroupKey
    segments: list[Segment]
    features: AggregateFeatures
    low_support: bool


def snap_endpoints(segments: list[Segment], db: PortDatabase) -> list[Segment]:
    """Re-anchor the first and last fix of every complete segment to its
    port centroid; interior points are untouched."""
    snapped = []
    for seg in segments:
        if seg.completeness is not Completeness.COMPLETE:
            snapped.append(seg)
            continue
        dep = db.by_id(seg.departure_port)
        arr = db.by_id(seg.arrival_port)
        if dep is None or arr is None:
            raise ConsistencyError(
                f"segment mmsi={seg.mmsi} references unknown port "
                f"{seg.departure_port if dep is None else seg.arrival_port}"
            )
        points = list(seg.points)
        points[0] = replace(points[0], pos=dep.centroid)
        points[-1] = replace(points[-1], pos=arr.centroid)
        snapped.append(
            replace(
                seg,
                points=points,
                distance=sum(
                    haversine_distance(a.pos, b.pos) for a, b in zip(points, points[1:])
                ),
            )
        )
    return snapped


def compute_features(segments: list[Segment]) -> AggregateFeatures:
    spatial_gaps: list[float] = []
    temporal_gaps: list[float] = []
    for seg in segments:
        for a, b in zip(seg.points, seg.points[1:]):
            spatial_gaps.append(haversine_distance(a.pos, b.pos))
            temporal_gaps.append(b.ts - a.ts)
    return AggregateFeatures(
        n_routes=len(segments),
        n_points=sum(len(s.points) for s in segments),
        median_spatial_sampling_m=statistics.median(spatial_gaps) if spatial_gaps else 0.0,
        median_temporal_sampling_s=statistics.median(temporal_gaps) if temporal_gaps else 0.0,
        median_duration_s=statistics.median(s.t_end - s.t_start for s in segments),
        mean_distance_m=statistics.fmean(s.distance for s in segments),
    )


def group_routes(segments: list[Segment], min_group_routes: int = 3) -> list[RouteGroup]:
    """Exact-key grouping of complete, snapped segments.

    Groups below the support threshold are kept and flagged, not dropped:
    thin groups are where route extraction fails, so they are worth
    watching, just not worth trusting.
    """
    by_key: dict[GroupKey, list[Segment]] = {}
    for seg in segments:
        if seg.completeness is not Completeness.COMPLETE:
            continue
        key = GroupKey(seg.departure_port, seg.arrival_port, seg.vessel_type.value)
        by_key.setdefault(key, []).append(seg)

    groups = []
    for key in sorted(by_key):
        members = sorted(by_key[key], key=lambda s: (s.mmsi, s.t_start))
        groups.append(
            RouteGroup(
                key=key,
                segments=members,
                features=compute_features(members),
                low_support=len(members) < min_group_routes,
            )
        )
    return groups


def write_groups(groups: list[RouteGroup], path: Path) -> None:
    payload = [
        {
            "key": str(g.key),
            "departure_port": g.key.departure,
            "destination_port": g.key.destination,
            "vessel_type": g.key.vessel_type,
            "low_support": g.low_support,
            "features": vars(g.features),
            "segments": [segment_to_dict(s) for s in g.segments],
        }
        for g in groups
    ]
    path.write_text(json.dumps(payload) + "\n")


def read_groups(path: Path) -> list[RouteGroup]:
    groups = []
    for item in json.loads(path.read_text()):
        features = AggregateFeatures(**item["features"])
        groups.append(
            RouteGroup(
                key=GroupKey.parse(item["key"]),
                segments=[segment_from_dict(s) for s in item["segments"]],
                features=features,
                low_support=item["low_support"],
            )
        )
    return groups


def write_feature_csv(groups: list[RouteGroup], path: Path) -> None:
    """One row per group for the manual parameter-labeling workflow."""
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group_key", "departure_port", "destination_port", "vessel_type"]
                        + FEATURE_NAMES + ["low_support"])
        for g in groups:
            writer.writerow(
                [str(g.key), g.key.departure, g.key.destination, g.key.vessel_type]
                + ["%.6g" % v for v in g.features.as_vector()]
                + [int(g.low_support)]
            )
