"""Run statistics reporting: text table, delimited stats, and figures.

The report reads the run manifest accumulated by the stages and emits a
human-readable table, a schema-stable stats.json, a flat stats.csv, and
a small set of matplotlib charts next to them. Charts summarize counts
and fractions only; drawing the routes themselves on a map is out of
scope (the GeoJSON opens in any map viewer).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

STATS_SCHEMA_VERSION = 1


def load_manifest(path: Path) -> dict:
    if not path.exists():
        return {"stages": {}}
    return json.loads(path.read_text())


def _flatten(stage: str, fragment: dict) -> list[tuple[str, str, str]]:
    rows = []
    for key, value in sorted(fragment.items()):
        if isinstance(value, dict):
            for sub, v in sorted(value.items()):
                rows.append((stage, f"{key}.{sub}", str(v)))
        elif isinstance(value, list):
            rows.append((stage, key, ";".join(str(v) for v in value)))
        else:
            rows.append((stage, key, str(value)))
    return rows


def render_table(manifest: dict) -> str:
    rows = []
    for stage in manifest.get("stages", {}):
        rows.extend(_flatten(stage, manifest["stages"][stage]))
    if not rows:
        return "(no completed stages)\n"
    widths = [max(len(r[i]) for r in rows + [("stage", "metric", "value")]) for i in range(3)]
    lines = [
        f"{'stage':<{widths[0]}}  {'metric':<{widths[1]}}  value",
        f"{'-' * widths[0]}  {'-' * widths[1]}  {'-' * widths[2]}",
    ]
    lines += [f"{s:<{widths[0]}}  {k:<{widths[1]}}  {v}" for s, k, v in rows]
    return "\n".join(lines) + "\n"


def write_stats(manifest: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": STATS_SCHEMA_VERSION, "stages": manifest.get("stages", {})}
    (out_dir / "stats.json").write_text(json.dumps(payload, indent=2) + "\n")
    with (out_dir / "stats.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stage", "metric", "value"])
        for stage in manifest.get("stages", {}):
            writer.writerows(_flatten(stage, manifest["stages"][stage]))


def _bar_chart(path: Path, title: str, labels: list[str], values: list[float], ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(len(values)), values, color="#33658a")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(manifest: dict, out_dir: Path) -> list[str]:
    """Render one chart per stage that has something worth charting."""
    figures_dir = out_dir / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)
    stages = manifest.get("stages", {})
    written = []

    ingest_stats = stages.get("ingest", {})
    rejected = ingest_stats.get("rejected_by_reason", {})
    if rejected:
        _bar_chart(
            figures_dir / "rejections.png",
            "Rows rejected at ingest",
            list(rejected.keys()),
            list(rejected.values()),
            "rows",
        )
        written.append("figures/rejections.png")

    seg_stats = stages.get("segments", {})
    by_completeness = seg_stats.get("by_completeness", {})
    if by_completeness:
        _bar_chart(
            figures_dir / "completeness.png",
            "Segments by completeness",
            list(by_completeness.keys()),
            list(by_completeness.values()),
            "segments",
        )
        written.append("figures/completeness.png")

    route_stats = stages.get("routes", {})
    if route_stats.get("routes"):
        completed = route_stats.get("completed", 0)
        _bar_chart(
            figures_dir / "routes.png",
            "Standard routes",
            ["completed", "not completed"],
            [completed, route_stats["routes"] - completed],
            "routes",
        )
        written.append("figures/routes.png")

    timed = [(s, f["wall_clock_s"]) for s, f in stages.items() if "wall_clock_s" in f]
    if timed:
        _bar_chart(
            figures_dir / "stage_time.png",
            "Wall clock per stage",
            [s for s, _ in timed],
            [t for _, t in timed],
            "seconds",
        )
        written.append("figures/stage_time.png")
    return written


def report(manifest_path: Path, out_dir: Path) -> str:
    """Produce table + stats files + figures; returns the table text."""
    manifest = load_manifest(manifest_path)
    table = render_table(manifest)
    write_stats(manifest, out_dir)
    render_figures(manifest, out_dir)
    return table
