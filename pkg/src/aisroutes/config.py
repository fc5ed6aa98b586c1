"""Pipeline configuration: every named threshold in one place.

Config files are flat key=value text; every key can also be overridden
with a --key value CLI flag. Unknown keys are rejected rather than
ignored, so a typo cannot silently fall back to a default.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class PipelineConfig:
    # port detection
    min_speed_departure_kn: float = 2.0
    v_stop_kn: float = 0.5
    window_s: float = 600.0
    heading_change_min_deg: float = 60.0
    dwell_min_s: float = 1800.0
    min_window_fixes: int = 3
    # port consolidation
    eps_port_m: float = 1500.0
    min_samples_port: int = 3
    label_match_dist_m: float = 3000.0
    ref_port_radius_m: float = 500.0
    d_port_slack_m: float = 1000.0
    # ingest
    speed_jump_kn: float = 60.0
    # segmentation
    t_lost_s: float = 21600.0
    min_segment_points: int = 10
    min_segment_distance_m: float = 5000.0
    t_merge_max_s: float = 172800.0
    # aggregation
    min_group_routes: int = 3
    # standard-route extraction (defaults when no fitted model is supplied)
    route_eps_m: float = 3000.0
    route_min_samples: int = 3
    route_search_radius_m: float = 6000.0
    expansion_factor: float = 1.5
    max_expansions: int = 3
    max_iterations: int = 10000
    # parameter regression clamps
    eps_clamp_min_m: float = 100.0
    eps_clamp_max_m: float = 20000.0
    r_clamp_min_m: float = 500.0
    r_clamp_max_m: float = 50000.0
    min_samples_clamp_lo: int = 2
    min_samples_clamp_hi: int = 20
    # execution
    workers: int = 1
    data_dir: str = "work"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type in ("float", "int") and not isinstance(value, bool):
                if value <= 0:
                    raise ConfigError(f"config key {f.name} must be positive, got {value}")
        if self.route_search_radius_m < self.route_eps_m:
            raise ConfigError("route_search_radius_m must be >= route_eps_m")
        if self.min_samples_clamp_hi < self.min_samples_clamp_lo:
            raise ConfigError("min_samples clamp range is inverted")

    def path(self, name: str) -> Path:
        return Path(self.data_dir) / name


def _coerce(f, raw: str):
    try:
        if f.type == "int":
            return int(raw)
        if f.type == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {f.name}: cannot parse {raw!r} as {f.type}") from exc


def load_config(path: Path | None = None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Build a config from defaults, an optional key=value file, then
    CLI overrides, in that precedence order."""
    by_name = {f.name: f for f in fields(PipelineConfig)}
    values: dict = {}
    if path is not None:
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in by_name:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(by_name[key], raw.strip())
    for key, raw in (overrides or {}).items():
        if key not in by_name:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(by_name[key], raw) if isinstance(raw, str) else raw
    return PipelineConfig(**values)
