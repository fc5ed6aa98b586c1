import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aisroutes import pipeline, scenarios
from aisroutes.config import PipelineConfig

FULL_STAGES = ("synth", "ingest", "ports", "segments", "aggregate", "routes")


def run_pipeline(data_dir: Path, spec, stages=FULL_STAGES, **cfg_overrides) -> dict:
    """Run pipeline stages in-process and return {stage: stats}."""
    cfg = PipelineConfig(data_dir=str(data_dir), **cfg_overrides)
    results = {}
    for stage in stages:
        kwargs = {"spec": spec} if stage == "synth" else {}
        results[stage] = pipeline.run_stage(stage, cfg, **kwargs)
    return results


@pytest.fixture(scope="session")
def straight_run(tmp_path_factory):
    """One clean three-vessel corridor, run end to end once per session."""
    data_dir = tmp_path_factory.mktemp("straight")
    stats = run_pipeline(data_dir, scenarios.straight_scenario())
    return data_dir, stats
