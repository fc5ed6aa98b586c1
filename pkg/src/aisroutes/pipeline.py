"""Stage orchestration: on-disk handoff, parallel fan-out, run manifest.

Each stage reads the previous stage's files and writes its own outputs
atomically (temp file + rename), so a killed run never leaves a torn
artifact. Per-MMSI and per-group work fans out across a worker pool;
inputs are sorted before dispatch and outputs written in key order, so
the worker count can change wall-clock time but never an output byte.
"""
from __future__ import annotations

import functools
import json
import multiprocessing
import os
import time
from pathlib import Path

from . import aggregation, ingest, ports, regression, routes, segmentation, synth
from .clustering import DbscanParams
from .config import PipelineConfig
from .errors import ConsistencyError, MissingInputError
from .records import QualityReport
from .routes import ExtractionParams

STAGES = (
    "synth", "ingest", "ports", "segments", "aggregate", "fit-params", "routes", "export",
)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingInputError(f"stage {stage} needs missing input: {path}")
    return path


def update_manifest(cfg: PipelineConfig, stage: str, fragment: dict) -> None:
    manifest_path = cfg.path("manifest.json")
    manifest = {"stages": {}}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    manifest["stages"][stage] = fragment
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2) + "\n")


def parallel_map(fn, items: list, workers: int) -> list:
    """Order-preserving map over a process pool; inline when serial."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (workers * 4))
    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(fn, items, chunksize=chunksize)


# ---------------------------------------------------------------- stages


def stage_synth(
    cfg: PipelineConfig, spec: synth.ScenarioSpec, write_reference: bool = True
) -> dict:
    out = Path(cfg.data_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = synth.generate(spec, out / "ais.csv", out / "truth.json")
    ref_count = 0
    if write_reference:
        ref_count = synth.write_reference_csv(spec, out / "reference.csv")
    return {
        "rows": sum(1 for _ in (out / "ais.csv").open()) - 1,
        "voyages": len(truth["voyages"]),
        "berths": len(truth["berths"]),
        "reference_ports": ref_count,
    }


def _parse_one_file(path_str: str, column_map: ingest.ColumnMap) -> tuple[list, QualityReport]:
    report = QualityReport()
    path = Path(path_str)
    report.bytes_in = path.stat().st_size
    with path.open(newline="") as fh:
        records = list(ingest.parse_records(fh, column_map, report))
    return records, report


def stage_ingest(
    cfg: PipelineConfig,
    input_path: Path | None = None,
    column_map: ingest.ColumnMap | None = None,
) -> dict:
    source = input_path or cfg.path("ais.csv")
    _require(source, "ingest")
    files = sorted(source.glob("*.csv")) if source.is_dir() else [source]
    if not files:
        raise MissingInputError(f"stage ingest found no CSV files under {source}")

    parsed = parallel_map(
        functools.partial(_parse_one_file, column_map=column_map or ingest.ColumnMap()),
        [str(p) for p in files],
        cfg.workers,
    )
    report = QualityReport()
    records = []
    for recs, partial in parsed:
        records.extend(recs)
        report.merge(partial)

    tracks = ingest.build_tracks(records, report, max_speed_kn=cfg.speed_jump_kn)
    tracks_dir = cfg.path("tracks")
    tracks_dir.mkdir(parents=True, exist_ok=True)
    for stale in tracks_dir.glob("*.track"):
        stale.unlink()
    report.bytes_out = ingest.write_tracks(tracks, tracks_dir)
    atomic_write_text(cfg.path("quality.json"), json.dumps(report.to_dict(), indent=2) + "\n")
    stats = report.to_dict()
    stats["tracks"] = len(tracks)
    return stats


def _detect_one(path_str: str, cfg: PipelineConfig) -> list:
    track = ingest.read_track(Path(path_str))
    detection = ports.DetectionConfig(
        window_s=cfg.window_s,
        min_speed_departure_kn=cfg.min_speed_departure_kn,
        heading_change_min_deg=cfg.heading_change_min_deg,
        dwell_min_s=cfg.dwell_min_s,
        min_window_fixes=cfg.min_window_fixes,
    )
    return ports.detect_candidates(track, detection)


def _track_files(cfg: PipelineConfig, stage: str) -> list[str]:
    tracks_dir = _require(cfg.path("tracks"), stage)
    files = sorted(tracks_dir.glob("*.track"))
    if not files:
        raise MissingInputError(f"stage {stage} found no .track files under {tracks_dir}")
    return [str(p) for p in files]


def stage_ports(cfg: PipelineConfig, reference_path: Path | None = None) -> dict:
    files = _track_files(cfg, "ports")
    per_track = parallel_map(functools.partial(_detect_one, cfg=cfg), files, cfg.workers)
    candidates = [c for group in per_track for c in group]
    candidates.sort(key=lambda c: (c.mmsi, c.t_start))

    reference = []
    ref_file = reference_path or cfg.path("reference.csv")
    if ref_file.exists():
        reference = ports.load_reference_ports(ref_file)
    db = ports.consolidate_ports(
        candidates,
        reference,
        DbscanParams(cfg.eps_port_m, cfg.min_samples_port),
        label_match_dist_m=cfg.label_match_dist_m,
        ref_port_radius_m=cfg.ref_port_radius_m,
    )
    tmp = cfg.path("ports.json.tmp")
    ports.save_port_db(db, tmp)
    os.replace(tmp, cfg.path("ports.json"))

    derived = sum(1 for p in db.ports if p.source == "Derived")
    merged = sum(1 for p in db.ports if p.source == "Merged")
    from_candidates = derived + merged
    return {
        "candidates": len(candidates),
        "ports": len(db.ports),
        "derived": derived,
        "merged_labeled": merged,
        "reference_only": len(db.ports) - from_candidates,
        "labeled_fraction": round(merged / from_candidates, 4) if from_candidates else 0.0,
    }


def _segment_one(path_str: str, db: ports.PortDatabase, cfg: PipelineConfig) -> list[dict]:
    track = ingest.read_track(Path(path_str))
    fsm_cfg = segmentation.FsmConfig(
        min_speed_departure_kn=cfg.min_speed_departure_kn,
        v_stop_kn=cfg.v_stop_kn,
        t_lost_s=cfg.t_lost_s,
        window_s=cfg.window_s,
        d_port_slack_m=cfg.d_port_slack_m,
    )
    segments = segmentation.extract_segments(
        track, db, fsm_cfg,
        min_segment_points=cfg.min_segment_points,
        min_segment_distance_m=cfg.min_segment_distance_m,
    )
    segments = segmentation.reduce_by_destination(segments, t_merge_max_s=cfg.t_merge_max_s)
    return [segmentation.segment_to_dict(s) for s in segments]


def stage_segments(cfg: PipelineConfig) -> dict:
    files = _track_files(cfg, "segments")
    db = ports.load_port_db(_require(cfg.path("ports.json"), "segments"))
    per_track = parallel_map(
        functools.partial(_segment_one, db=db, cfg=cfg), files, cfg.workers
    )
    lines = [json.dumps(d) for group in per_track for d in group]
    atomic_write_text(cfg.path("segments.jsonl"), "\n".join(lines) + ("\n" if lines else ""))

    by_kind: dict[str, int] = {}
    for group in per_track:
        for d in group:
            by_kind[d["completeness"]] = by_kind.get(d["completeness"], 0) + 1
    total = sum(by_kind.values())
    complete = by_kind.get("Complete", 0)
    return {
        "segments": total,
        "by_completeness": dict(sorted(by_kind.items())),
        "complete_fraction": round(complete / total, 4) if total else 0.0,
    }


def stage_aggregate(cfg: PipelineConfig) -> dict:
    segs = segmentation.read_segments(_require(cfg.path("segments.jsonl"), "aggregate"))
    db = ports.load_port_db(_require(cfg.path("ports.json"), "aggregate"))
    snapped = aggregation.snap_endpoints(segs, db)
    groups = aggregation.group_routes(snapped, min_group_routes=cfg.min_group_routes)

    tmp = cfg.path("groups.json.tmp")
    aggregation.write_groups(groups, tmp)
    os.replace(tmp, cfg.path("groups.json"))
    tmp_csv = cfg.path("groups.csv.tmp")
    aggregation.write_feature_csv(groups, tmp_csv)
    os.replace(tmp_csv, cfg.path("groups.csv"))
    return {
        "groups": len(groups),
        "low_support_groups": sum(1 for g in groups if g.low_support),
        "complete_segments": sum(g.features.n_routes for g in groups),
    }


def stage_fit_params(cfg: PipelineConfig, labels_path: Path | None = None) -> dict:
    labels_file = _require(labels_path or cfg.path("labels.csv"), "fit-params")
    groups = aggregation.read_groups(_require(cfg.path("groups.json"), "fit-params"))
    by_key = {g.key: g for g in groups}
    labeled = []
    for key, eps_m, min_samples, r_m in regression.load_labels(labels_file):
        if key not in by_key:
            raise MissingInputError(f"label references unknown group {key}")
        labeled.append(
            regression.LabeledGroup(
                key=key, features=by_key[key].features,
                eps_m=eps_m, min_samples=min_samples, r_m=r_m,
            )
        )
    model = regression.fit(labeled)
    atomic_write_text(cfg.path("params_model.json"), model.to_json() + "\n")
    return {
        "labeled_groups": len(labeled),
        "residual_rms": {k: round(v, 6) for k, v in model.residual_rms.items()},
    }


def _extract_one(
    group: aggregation.RouteGroup,
    db: ports.PortDatabase,
    params: ExtractionParams,
) -> tuple[list[routes.StandardRoute], routes.GroupAudit]:
    dep = db.by_id(group.key.departure)
    dest = db.by_id(group.key.destination)
    if dep is None or dest is None:
        raise ConsistencyError(f"group {group.key} references a port missing from the database")
    audit = routes.GroupAudit(group_key=str(group.key), pool_size=0)
    extracted = routes.extract_standard_routes(
        group, params, departure=dep.centroid, destination=dest.centroid, audit=audit
    )
    return extracted, audit


def _route_params_for(cfg: PipelineConfig, model, group: aggregation.RouteGroup) -> ExtractionParams:
    if model is not None:
        return regression.predict(
            model, group.features,
            expansion_factor=cfg.expansion_factor,
            max_expansions=cfg.max_expansions,
            max_iterations=cfg.max_iterations,
        )
    return ExtractionParams(
        eps=cfg.route_eps_m,
        min_samples=cfg.route_min_samples,
        r=cfg.route_search_radius_m,
        expansion_factor=cfg.expansion_factor,
        max_expansions=cfg.max_expansions,
        max_iterations=cfg.max_iterations,
    )


def _extract_task(item: tuple) -> tuple[list, routes.GroupAudit]:
    group, db, params = item
    return _extract_one(group, db, params)


def stage_routes(cfg: PipelineConfig, model_path: Path | None = None) -> dict:
    groups = aggregation.read_groups(_require(cfg.path("groups.json"), "routes"))
    db = ports.load_port_db(_require(cfg.path("ports.json"), "routes"))
    model = None
    model_file = model_path or cfg.path("params_model.json")
    if model_path is not None:
        _require(model_file, "routes")
    if model_file.exists():
        model = regression.load_model(model_file)

    tasks = [(g, db, _route_params_for(cfg, model, g)) for g in groups]
    results = parallel_map(_extract_task, tasks, cfg.workers)

    all_routes = [r for extracted, _ in results for r in extracted]
    audits = [audit for _, audit in results]
    tmp = cfg.path("routes.geojson.tmp")
    routes.write_routes_geojson(all_routes, tmp)
    os.replace(tmp, cfg.path("routes.geojson"))
    tmp_audit = cfg.path("route_audit.json.tmp")
    routes.write_audits(audits, tmp_audit)
    os.replace(tmp_audit, cfg.path("route_audit.json"))

    completed = sum(1 for r in all_routes if r.completed)
    pool_points = sum(a.pool_size for a in audits)
    outliers = sum(a.outlier_count for a in audits)
    return {
        "groups": len(groups),
        "routes": len(all_routes),
        "completed": completed,
        "completed_fraction": round(completed / len(all_routes), 4) if all_routes else 0.0,
        "split_groups": sum(1 for extracted, _ in results if len(extracted) > 1),
        "params_source": "model" if model is not None else "config",
        "pool_points": pool_points,
        "outlier_points": outliers,
        "outlier_fraction": round(outliers / pool_points, 4) if pool_points else 0.0,
    }


def stage_export(cfg: PipelineConfig) -> dict:
    export_dir = cfg.path("export")
    export_dir.mkdir(parents=True, exist_ok=True)
    copied = []
    for name in ("routes.geojson", "groups.csv", "quality.json"):
        src = cfg.path(name)
        if name == "routes.geojson":
            _require(src, "export")
        if src.exists():
            atomic_write_text(export_dir / name, src.read_text())
            copied.append(name)

    db = ports.load_port_db(_require(cfg.path("ports.json"), "export"))
    features = [
        {
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [round(p.centroid.lon, 6), round(p.centroid.lat, 6)],
            },
            "properties": {
                "port_id": p.port_id,
                "label": p.label,
                "source": p.source,
                "radius_m": round(p.radius, 1),
                "support": p.support,
            },
        }
        for p in db.ports
    ]
    atomic_write_text(
        export_dir / "ports.geojson",
        json.dumps({"type": "FeatureCollection", "features": features}, indent=2) + "\n",
    )
    copied.append("ports.geojson")
    return {"exported": sorted(copied), "export_dir": str(export_dir)}


def run_stage(stage: str, cfg: PipelineConfig, **kwargs) -> dict:
    """Dispatch one pipeline stage, time it, and append its RunStats
    fragment to the run manifest."""
    runners = {
        "synth": stage_synth,
        "ingest": stage_ingest,
        "ports": stage_ports,
        "segments": stage_segments,
        "aggregate": stage_aggregate,
        "fit-params": stage_fit_params,
        "routes": stage_routes,
        "export": stage_export,
    }
    if stage not in runners:
        raise KeyError(f"unknown stage {stage!r}")
    start = time.perf_counter()
    fragment = runners[stage](cfg, **kwargs)
    fragment["wall_clock_s"] = round(time.perf_counter() - start, 3)
    update_manifest(cfg, stage, fragment)
    return fragment
