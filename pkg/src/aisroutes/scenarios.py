"""Built-in synthetic scenarios.

Each preset returns a ScenarioSpec with geometry chosen so the planted
outcome is exact by construction: defect counts are rounded onto the
voyage population, corridors are spaced far enough apart that ports and
route walks cannot interfere, and fork arms diverge steeply enough that
the two branches separate within one walk step.
"""
from __future__ import annotations

from .geo import LatLon, destination_point
from .synth import Berth, Corridor, DefectModel, ScenarioSpec


def _east(origin: LatLon, km: float) -> LatLon:
    return destination_point(origin, 90.0, km * 1000.0)


def _north_offset(origin: LatLon, along_km: float, lateral_km: float) -> tuple[float, float]:
    p = destination_point(_east(origin, along_km), 0.0, lateral_km * 1000.0)
    return (p.lat, p.lon)


def straight_scenario(seed: int = 7, vessels: int = 3, length_km: float = 200.0) -> ScenarioSpec:
    """One clean corridor, the smallest end-to-end smoke scenario."""
    a = LatLon(55.0, 1.0)
    b = _east(a, length_km)
    return ScenarioSpec(
        seed=seed,
        berths=[Berth(a.lat, a.lon, "ALFA"), Berth(b.lat, b.lon, "BRAVO")],
        corridors=[Corridor(0, 1, vessels=vessels)],
    )


def fleet_scenario(seed: int = 11, out_of_aoi_rate: float = 0.05) -> ScenarioSpec:
    """200 voyages over 10 corridors; a fixed fraction of voyages enter or
    leave the area mid-sea and therefore miss one port call."""
    berths = []
    corridors = []
    for i in range(10):
        a = LatLon(50.0 + 0.9 * i, 1.0)
        b = _east(a, 200.0)
        berths.append(Berth(a.lat, a.lon, f"DEP{i:02d}"))
        berths.append(Berth(b.lat, b.lon, f"ARR{i:02d}"))
        corridors.append(Corridor(2 * i, 2 * i + 1, vessels=20))
    return ScenarioSpec(
        seed=seed,
        berths=berths,
        corridors=corridors,
        defects=DefectModel(out_of_aoi_rate=out_of_aoi_rate),
    )


def groups_scenario(seed: int = 13, n_groups: int = 50, with_defects: bool = True) -> ScenarioSpec:
    """Many single-corridor route groups for destination-reaching checks.

    The defect variant plants reporting gaps (repaired downstream by the
    destination merge) and a 10% rate of off-corridor noise fixes.
    """
    berths = []
    corridors = []
    for i in range(n_groups):
        a = LatLon(30.0 + 0.7 * i, 2.0)
        b = _east(a, 320.0)
        berths.append(Berth(a.lat, a.lon, f"G{i:02d}A"))
        berths.append(Berth(b.lat, b.lon, f"G{i:02d}B"))
        corridors.append(Corridor(2 * i, 2 * i + 1, vessels=6, report_interval_s=240.0))
    defects = DefectModel(
        gap_rate=0.3,
        gps_noise_sigma_m=30.0,
        noise_point_rate=0.10,
        noise_offset_min_m=4000.0,
        noise_offset_max_m=5000.0,
    ) if with_defects else DefectModel()
    return ScenarioSpec(seed=seed, berths=berths, corridors=corridors, defects=defects)


def fork_scenario(seed: int = 17, lateral_km: float = 15.0) -> ScenarioSpec:
    """A corridor that forks around an obstacle into two arms.

    Arms leave the trunk at roughly 40 degrees and rejoin the destination
    just as steeply, so the inter-arm gap crosses the walk's search radius
    within a single step in both directions; half the fleet takes each arm.
    """
    a = LatLon(55.0, 2.0)
    b = _east(a, 250.0)
    path_n = [
        _north_offset(a, 40.0, 0.0),
        _north_offset(a, 58.0, lateral_km),
        _north_offset(a, 235.0, lateral_km),
    ]
    path_s = [
        _north_offset(a, 40.0, 0.0),
        _north_offset(a, 58.0, -lateral_km),
        _north_offset(a, 235.0, -lateral_km),
    ]
    return ScenarioSpec(
        seed=seed,
        berths=[Berth(a.lat, a.lon, "FORKA"), Berth(b.lat, b.lon, "FORKB")],
        corridors=[Corridor(0, 1, paths=[path_n, path_s], vessels=8)],
    )


def noise_scenario(seed: int = 19, noise_point_rate: float = 0.03, n_groups: int = 5) -> ScenarioSpec:
    """A few corridors with planted off-corridor noise fixes, displaced
    far enough to be density noise but gently enough to survive the
    ingest speed filter at the 240 s reporting interval."""
    berths = []
    corridors = []
    for i in range(n_groups):
        a = LatLon(40.0 + 0.8 * i, 3.0)
        b = _east(a, 320.0)
        berths.append(Berth(a.lat, a.lon, f"N{i:02d}A"))
        berths.append(Berth(b.lat, b.lon, f"N{i:02d}B"))
        corridors.append(Corridor(2 * i, 2 * i + 1, vessels=6, report_interval_s=240.0))
    return ScenarioSpec(
        seed=seed,
        berths=berths,
        corridors=corridors,
        defects=DefectModel(
            noise_point_rate=noise_point_rate,
            noise_offset_min_m=4000.0,
            noise_offset_max_m=5000.0,
        ),
    )


def ports_scenario(seed: int = 23) -> ScenarioSpec:
    """Twelve berths on six corridors, half of the berths present in the
    reference file, for port recovery and labeling-fraction checks."""
    berths = []
    corridors = []
    for i in range(6):
        a = LatLon(52.0 + 1.0 * i, 4.0)
        b = _east(a, 150.0)
        berths.append(Berth(a.lat, a.lon, f"REF{i:02d}", in_reference=True))
        berths.append(Berth(b.lat, b.lon, f"DRV{i:02d}", in_reference=False))
        corridors.append(Corridor(2 * i, 2 * i + 1, vessels=4))
    return ScenarioSpec(seed=seed, berths=berths, corridors=corridors)


def defect_fixture_scenario(seed: int = 29) -> ScenarioSpec:
    """Exactly 1,000 CSV rows of which 100 are planted parse defects.

    Only the ingest accounting is meaningful here; the row limit truncates
    voyages mid-sea, so downstream completeness is undefined.
    """
    a = LatLon(57.0, 5.0)
    b = _east(a, 400.0)
    return ScenarioSpec(
        seed=seed,
        berths=[Berth(a.lat, a.lon, "QRA"), Berth(b.lat, b.lon, "QRB")],
        corridors=[Corridor(0, 1, vessels=4)],
        defects=DefectModel(
            parse_defects={
                "bad_coords": 30,
                "bad_mmsi": 20,
                "duplicate": 20,
                "time_regression": 15,
                "speed_jump": 15,
            }
        ),
        row_limit=1000,
    )


PRESETS = {
    "straight": straight_scenario,
    "fleet": fleet_scenario,
    "groups": groups_scenario,
    "fork": fork_scenario,
    "noise": noise_scenario,
    "ports": ports_scenario,
    "defects": defect_fixture_scenario,
}


def make_preset(name: str, seed: int | None = None) -> ScenarioSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]() if seed is None else PRESETS[name](seed=seed)
