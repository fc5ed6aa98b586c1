"""Port-to-port segmentation of vessel tracks.

A six-state machine walks each track record by record and cuts segments
at port calls and transmission losses. Partial segments that declare the
same destination are then merged back together, repairing voyages broken
by mid-sea reporting gaps.

Navigational status is deliberately never consulted for transitions: the
moored/anchored codes are unreliable in real AIS feeds.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .geo import KNOTS_TO_MPS, LatLon, haversine_distance
from .ports import PortDatabase, nearest_port
from .records import AisRecord, VesselClass, VesselTrack


class FsmState(Enum):
    INIT = "INIT"
    DEPARTURE = "DEPARTURE"
    SAILING = "SAILING"
    STATIONARY = "STATIONARY"
    ARRIVED = "ARRIVED"
    LOST = "LOST"


class Completeness(str, Enum):
    COMPLETE = "Complete"
    NO_DEPARTURE = "NoDeparture"
    NO_ARRIVAL = "NoArrival"
    ORPHAN = "Orphan"


def normalize_destination(raw: str | None) -> str:
    """Uppercase, trim, collapse internal whitespace; no fuzzy matching."""
    if raw is None:
        return ""
    return " ".join(raw.split()).upper()


def _completeness(departure: int | None, arrival: int | None) -> Completeness:
    if departure is not None and arrival is not None:
        return Completeness.COMPLETE
    if departure is not None:
        return Completeness.NO_ARRIVAL
    if arrival is not None:
        return Completeness.NO_DEPARTURE
    return Completeness.ORPHAN


def path_distance_m(points: list[AisRecord]) -> float:
    return sum(haversine_distance(a.pos, b.pos) for a, b in zip(points, points[1:]))


@dataclass
class Segment:
    mmsi: int
    vessel_type: VesselClass
    departure_port: int | None
    arrival_port: int | None
    points: list[AisRecord]
    t_start: float
    t_end: float
    distance: float
    declared_destination: str
    completeness: Completeness

    @classmethod
    def from_points(
        cls,
        mmsi: int,
        vessel_type: VesselClass,
        points: list[AisRecord],
        departure_port: int | None,
        arrival_port: int | None,
    ) -> "Segment":
        destination = ""
        for rec in points:
            norm = normalize_destination(rec.destination)
            if norm:
                destination = norm
        return cls(
            mmsi=mmsi,
            vessel_type=vessel_type,
            departure_port=departure_port,
            arrival_port=arrival_port,
            points=points,
            t_start=points[0].ts,
            t_end=points[-1].ts,
            distance=path_distance_m(points),
            declared_destination=destination,
            completeness=_completeness(departure_port, arrival_port),
        )


@dataclass
class SegmentOpened:
    departure_port: int | None


@dataclass
class SegmentClosed:
    segment: Segment


FsmEvent = SegmentOpened | SegmentClosed


@dataclass
class FsmConfig:
    min_speed_departure_kn: float = 2.0
    v_stop_kn: float = 0.5
    t_lost_s: float = 21600.0
    window_s: float = 600.0
    d_port_slack_m: float = 1000.0


@dataclass
class FsmContext:
    """Running context threaded through fsm_step for one track."""

    db: PortDatabase
    cfg: FsmConfig
    mmsi: int = 0
    vessel_type: VesselClass = VesselClass.UNKNOWN
    prev: AisRecord | None = None
    speed_window: deque = field(default_factory=deque)  # (ts, knots)
    speed_sum: float = 0.0
    open_points: list[AisRecord] | None = None
    open_departure: int | None = None
    stationary_pos: LatLon | None = None  # where the vessel last dwelt off-segment

    def _sample_speed(self, rec: AisRecord) -> float:
        if rec.sog is not None:
            return rec.sog
        if self.prev is not None and rec.ts > self.prev.ts:
            d = haversine_distance(self.prev.pos, rec.pos)
            return d / (rec.ts - self.prev.ts) / KNOTS_TO_MPS
        return 0.0

    def push_speed(self, rec: AisRecord) -> float:
        """Update the rolling window and return the current average (knots)."""
        self.speed_window.append((rec.ts, self._sample_speed(rec)))
        self.speed_sum += self.speed_window[-1][1]
        while rec.ts - self.speed_window[0][0] > self.cfg.window_s:
            _, old = self.speed_window.popleft()
            self.speed_sum -= old
        return self.speed_sum / len(self.speed_window)

    def reset_speed(self) -> None:
        self.speed_window.clear()
        self.speed_sum = 0.0

    def open_segment(self, rec: AisRecord, departure: int | None) -> SegmentOpened:
        self.open_points = [rec]
        self.open_departure = departure
        return SegmentOpened(departure)

    def close_segment(self, arrival: int | None) -> SegmentClosed | None:
        if not self.open_points:
            self.open_points = None
            self.open_departure = None
            return None
        seg = Segment.from_points(
            self.mmsi, self.vessel_type, self.open_points, self.open_departure, arrival
        )
        self.open_points = None
        self.open_departure = None
        return SegmentClosed(seg)


def fsm_step(state: FsmState, rec: AisRecord, ctx: FsmContext) -> tuple[FsmState, list[FsmEvent]]:
    """Advance the segmentation FSM by one record.

    A reporting gap longer than t_lost closes any open segment without an
    arrival and consumes the triggering record in LOST; the record after
    the gap re-enters through the INIT dispatch (opening a no-departure
    segment if the vessel is underway).
    """
    if ctx.prev is not None and rec.ts < ctx.prev.ts:
        raise ValueError(f"records out of time order at mmsi={rec.mmsi} ts={rec.ts}")
    events: list[FsmEvent] = []
    cfg = ctx.cfg

    if state is not FsmState.LOST and ctx.prev is not None and rec.ts - ctx.prev.ts > cfg.t_lost_s:
        closed = ctx.close_segment(arrival=None)
        if closed:
            events.append(closed)
        ctx.reset_speed()
        ctx.push_speed(rec)
        ctx.prev = rec
        return FsmState.LOST, events

    avg = ctx.push_speed(rec)
    near = None

    if state in (FsmState.INIT, FsmState.LOST):
        near = nearest_port(rec.pos, ctx.db, cfg.d_port_slack_m)
        if near is not None and avg < cfg.min_speed_departure_kn:
            ctx.stationary_pos = rec.pos
            new_state = FsmState.STATIONARY
        else:
            events.append(ctx.open_segment(rec, departure=None))
            new_state = FsmState.SAILING

    elif state is FsmState.ARRIVED:
        ctx.stationary_pos = rec.pos
        new_state = FsmState.STATIONARY

    elif state is FsmState.STATIONARY:
        if avg >= cfg.min_speed_departure_kn:
            if ctx.open_points is not None:
                ctx.open_points.append(rec)
                new_state = FsmState.SAILING
            else:
                # the departure port is where the vessel dwelt, not where
                # the speed average finally crossed the threshold
                anchor = ctx.stationary_pos or rec.pos
                near = nearest_port(anchor, ctx.db, cfg.d_port_slack_m)
                departure = near[0].port_id if near else None
                events.append(ctx.open_segment(rec, departure))
                new_state = FsmState.DEPARTURE
        else:
            if ctx.open_points is not None:
                ctx.open_points.append(rec)
            else:
                ctx.stationary_pos = rec.pos
            new_state = FsmState.STATIONARY

    elif state is FsmState.DEPARTURE:
        if ctx.open_points is not None:
            ctx.open_points.append(rec)
        dep_port = ctx.db.by_id(ctx.open_departure) if ctx.open_departure is not None else None
        if dep_port is None:
            new_state = FsmState.SAILING
        else:
            d = haversine_distance(rec.pos, dep_port.centroid)
            new_state = (
                FsmState.SAILING if d > dep_port.radius + cfg.d_port_slack_m else FsmState.DEPARTURE
            )

    elif state is FsmState.SAILING:
        if ctx.open_points is not None:
            ctx.open_points.append(rec)
        if avg < cfg.min_speed_departure_kn:
            near = nearest_port(rec.pos, ctx.db, cfg.d_port_slack_m)
            if near is not None:
                closed = ctx.close_segment(arrival=near[0].port_id)
                if closed:
                    events.append(closed)
                new_state = FsmState.ARRIVED
            elif avg < cfg.v_stop_kn:
                new_state = FsmState.STATIONARY
            else:
                new_state = FsmState.SAILING
        else:
            new_state = FsmState.SAILING

    else:  # pragma: no cover - enum is exhaustive
        raise AssertionError(f"unhandled state {state}")

    ctx.prev = rec
    return new_state, events


def extract_segments(
    track: VesselTrack,
    db: PortDatabase,
    cfg: FsmConfig,
    min_segment_points: int = 10,
    min_segment_distance_m: float = 5000.0,
) -> list[Segment]:
    """Fold the FSM over a track; the trailing open segment closes without
    an arrival, and segments too short to be voyages are dropped as
    maneuvering noise."""
    ctx = FsmContext(db=db, cfg=cfg, mmsi=track.mmsi, vessel_type=track.vessel_type)
    state = FsmState.INIT
    segments: list[Segment] = []
    for rec in track.records:
        state, events = fsm_step(state, rec, ctx)
        for ev in events:
            if isinstance(ev, SegmentClosed):
                segments.append(ev.segment)
    closed = ctx.close_segment(arrival=None)
    if closed:
        segments.append(closed.segment)
    return [
        s
        for s in segments
        if len(s.points) >= min_segment_points and s.distance >= min_segment_distance_m
    ]


def reduce_by_destination(segments: list[Segment], t_merge_max_s: float = 172800.0) -> list[Segment]:
    """Merge consecutive partial segments that declare the same destination.

    A run merges while the earlier segment has no arrival port, the later
    one has no departure port, both share a non-empty normalized
    destination, and the transmission hole between them is short enough.
    Completeness re-derives from the run's outer endpoints.
    """
    merged: list[Segment] = []
    for seg in segments:
        if merged:
            prev = merged[-1]
            if (
                prev.arrival_port is None
                and seg.departure_port is None
                and prev.declared_destination
                and prev.declared_destination == seg.declared_destination
                and seg.t_start - prev.t_end <= t_merge_max_s
            ):
                points = prev.points + seg.points
                merged[-1] = replace(
                    prev,
                    arrival_port=seg.arrival_port,
                    points=points,
                    t_end=seg.t_end,
                    distance=path_distance_m(points),
                    completeness=_completeness(prev.departure_port, seg.arrival_port),
                )
                continue
        merged.append(seg)
    return merged


def segment_to_dict(seg: Segment) -> dict:
    return {
        "mmsi": seg.mmsi,
        "vessel_type": seg.vessel_type.value,
        "departure_port": seg.departure_port,
        "arrival_port": seg.arrival_port,
        "completeness": seg.completeness.value,
        "destination": seg.declared_destination,
        "t_start": seg.t_start,
        "t_end": seg.t_end,
        "distance_m": round(seg.distance, 1),
        "points": [
            [r.ts, round(r.pos.lat, 6), round(r.pos.lon, 6), r.sog] for r in seg.points
        ],
    }


def segment_from_dict(data: dict) -> Segment:
    points = [
        AisRecord(
            mmsi=data["mmsi"],
            ts=ts,
            pos=LatLon(lat, lon),
            sog=sog,
            vessel_type=VesselClass(data["vessel_type"]),
        )
        for ts, lat, lon, sog in data["points"]
    ]
    return Segment(
        mmsi=data["mmsi"],
        vessel_type=VesselClass(data["vessel_type"]),
        departure_port=data["departure_port"],
        arrival_port=data["arrival_port"],
        points=points,
        t_start=data["t_start"],
        t_end=data["t_end"],
        distance=data["distance_m"],
        declared_destination=data["destination"],
        completeness=Completeness(data["completeness"]),
    )


def write_segments(segments: Iterable[Segment], path: Path) -> None:
    with path.open("w") as fh:
        for seg in segments:
            fh.write(json.dumps(segment_to_dict(seg)) + "\n")


def read_segments(path: Path) -> list[Segment]:
    segments = []
    with path.open() as fh:
        for line in fh:
            if line.strip():
                segments.append(segment_from_dict(json.loads(line)))
    return segments
