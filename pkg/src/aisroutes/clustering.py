"""Deterministic DBSCAN over geographic points.

Used twice in the pipeline: consolidating port candidates across the
fleet, and clustering the points selected at each step of the standard
route walk. Distances are great-circle meters; no planar projection, so
the same eps works from the Arctic to the equator.

Determinism contract: points are scanned in input order, cluster ids are
assigned in discovery order, and a border point joins the cluster of the
lowest-index core point that reaches it. Permuting the input may renumber
clusters but never changes the induced partition of core points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import EARTH_RADIUS_M, LatLon, haversine_vec

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float  # meters
    min_samples: int

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1, got {self.min_samples}")


@dataclass
class Clustering:
    labels: list[int]  # cluster id >= 0 per point, or NOISE
    n_clusters: int


def _neighbor_lists(lats: np.ndarray, lons: np.ndarray, eps: float) -> list[np.ndarray]:
    """eps-neighborhoods (self included) for every point.

    A latitude band prefilter bounds the candidate set: the great-circle
    distance between two points is at least the meridional separation, so
    any neighbor within eps meters lies within eps/R radians of latitude.
    The filter is exact (no false negatives) and keeps the search near
    O(n*k) for spatially spread inputs.
    """
    n = len(lats)
    eps_deg = math.degrees(eps / EARTH_RADIUS_M)
    order = np.argsort(lats, kind="stable")
    sorted_lats = lats[order]
    neighbors: list[np.ndarray] = []
    for i in range(n):
        lo = np.searchsorted(sorted_lats, lats[i] - eps_deg, side="left")
        hi = np.searchsorted(sorted_lats, lats[i] + eps_deg, side="right")
        cand = order[lo:hi]
        d = haversine_vec(lats[i], lons[i], lats[cand], lons[cand])
        hits = cand[d <= eps]
        hits.sort()
        neighbors.append(hits)
    return neighbors


def dbscan(points: list[LatLon], params: DbscanParams) -> Clustering:
    """Cluster geographic points with standard DBSCAN semantics.

    A point is core iff at least min_samples points (itself included) lie
    within eps of it. Clusters are the maximal density-connected sets of
    core points; each non-core point joins the cluster of the lowest-index
    core point within eps of it, or NOISE if there is none.
    """
    n = len(points)
    if n == 0:
        return Clustering([], 0)
    lats = np.array([p.lat for p in points], dtype=np.float64)
    lons = np.array([p.lon for p in points], dtype=np.float64)
    neighbors = _neighbor_lists(lats, lons, params.eps)
    core = np.array([len(nb) >= params.min_samples for nb in neighbors], dtype=bool)

    labels = [NOISE] * n
    n_clusters = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        cid = n_clusters
        n_clusters += 1
        labels[i] = cid
        queue = [i]
        while queue:
            j = queue.pop(0)
            for k in neighbors[j]:
                if core[k] and labels[k] == NOISE:
                    labels[k] = cid
                    queue.append(int(k))

    for i in range(n):
        if core[i]:
            continue
        for k in neighbors[i]:  # ascending index order: first core wins
            if core[k]:
                labels[i] = labels[k]
                break
    return Clustering(labels, n_clusters)
