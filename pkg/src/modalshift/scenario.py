"""Transport development scenarios: apply a plan to a city, update rents in
ring buffers around the new line, re-run the pipeline on the identical agent
population, and report modal shift and relocation deltas.

Scenario runs reuse the baseline master seed, so every per-agent draw
replays; observed deltas are attributable to the city change alone.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

from .city import (
    SERVICE_RANGE_DEFAULTS,
    CityModel,
    ModeNetwork,
    TransportService,
    ring_coverage,
)
from .generate import rebuild_connectors
from .modechoice import MODE_PRECEDENCE
from .pipeline import PipelineParams, RunResult, run_pipeline
from .population import HouseholdAgent, WorkerAgent

SCENARIO_KINDS = ("highway", "subway", "brt")
_KIND_TO_MODE = {"highway": "car", "subway": "subway", "brt": "brt"}
_KIND_TO_SERVICE = {"highway": "highway", "subway": "subway_station", "brt": "brt_stop"}
_DEFAULT_LINE_SPEED = {"highway": 85.0, "subway": 38.0, "brt": 20.0}
_DEFAULT_LINK_SPEED = {"highway": 28.0, "subway": 38.0, "brt": 20.0}

DISTANCE_CLASSES = ("<5", "5-15", ">15")


class ScenarioError(ValueError):
    pass


class PopulationMismatchError(ValueError):
    pass


@dataclass
class RentRing:
    r: float
    r_prime: float
    g: float


@dataclass
class ScenarioSpec:
    kind: str
    geometry: tuple[tuple[float, float], ...] = ()
    stations: tuple[tuple[float, float], ...] = ()
    rent_rings: tuple[RentRing, ...] = ()
    line_speed_kmh: float | None = None
    link_km: float = 1.1
    seed_policy: str = "reuse"

    def validate(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind '{self.kind}'")
        if self.seed_policy != "reuse":
            raise ScenarioError(f"unsupported seed policy '{self.seed_policy}'")
        rings = sorted(self.rent_rings, key=lambda x: x.r)
        prev_end = None
        for ring in rings:
            if ring.r >= ring.r_prime:
                raise ScenarioError(f"ring r {ring.r} must be < r' {ring.r_prime}")
            if ring.g <= 0:
                raise ScenarioError("ring multiplier must be positive")
            if prev_end is not None and ring.r < prev_end:
                raise ScenarioError("ring overlap")
            prev_end = ring.r_prime
        if self.kind in ("subway", "brt") and self.geometry and not self.stations:
            raise ScenarioError(f"{self.kind} scenario needs stations")

    @property
    def empty(self) -> bool:
        return not self.geometry and not self.stations


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise ScenarioError(f"unsupported schema_version {doc.get('schema_version')!r}")
    spec = ScenarioSpec(
        kind=str(doc.get("kind", "")),
        geometry=tuple(tuple(float(x) for x in p) for p in doc.get("geometry", [])),
        stations=tuple(tuple(float(x) for x in p) for p in doc.get("stations", [])),
        rent_rings=tuple(
            RentRing(float(r["r"]), float(r["r_prime"]), float(r["g"])) for r in doc.get("rent_rings", [])
        ),
        line_speed_kmh=(None if doc.get("line_speed_kmh") is None else float(doc["line_speed_kmh"])),
        link_km=float(doc.get("link_km", 1.1)),
        seed_policy=str(doc.get("seed_policy", "reuse")),
    )
    spec.validate()
    return spec


def _check_bounds(city: CityModel, spec: ScenarioSpec) -> None:
    xlo, ylo, xhi, yhi = city.bounds()
    for px, py in tuple(spec.geometry) + tuple(spec.stations):
        if not (xlo - 1e-9 <= px <= xhi + 1e-9 and ylo - 1e-9 <= py <= yhi + 1e-9):
            raise ScenarioError(f"geometry outside city bounds: ({px}, {py})")


def apply_tdp(city: CityModel, spec: ScenarioSpec) -> CityModel:
    """Append the plan's services and extend the relevant mode network.

    Pure transformation: the input city is never modified.
    """
    spec.validate()
    new_city = copy.deepcopy(city)
    if spec.empty:
        return new_city
    _check_bounds(city, spec)
    mode = _KIND_TO_MODE[spec.kind]
    service_kind = _KIND_TO_SERVICE[spec.kind]
    next_service_id = max((s.id for s in new_city.services), default=0) + 1
    if spec.kind == "highway":
        new_city.services.append(
            TransportService(
                id=next_service_id,
                kind=service_kind,
                geometry=tuple(spec.geometry),
                service_range_km=SERVICE_RANGE_DEFAULTS[service_kind],
            )
        )
    else:
        for p in spec.stations:
            new_city.services.append(
                TransportService(
                    id=next_service_id,
                    kind=service_kind,
                    geometry=(p,),
                    service_range_km=SERVICE_RANGE_DEFAULTS[service_kind],
                )
            )
            next_service_id += 1

    net = new_city.networks.get(mode)
    if net is None:
        net = ModeNetwork(
            mode=mode,
            nodes={},
            edges=[],
            zone_connectors={},
            access_speed_kmh=4.8,
            access_cutoff_km=2.5,
            taxi_fallback_cost_per_km=0.30,
            taxi_fallback_threshold_km=0.8,
        )
        new_city.networks[mode] = net
    line_speed = spec.line_speed_kmh or _DEFAULT_LINE_SPEED[spec.kind]
    chain = spec.stations if spec.kind in ("subway", "brt") else spec.geometry
    _extend_network(net, chain, line_speed, _DEFAULT_LINK_SPEED[spec.kind], spec.link_km)
    rebuild_connectors(net, new_city.zones)
    return new_city


def _extend_network(net: ModeNetwork, chain, line_speed: float, link_speed: float, link_km: float) -> None:
    import math

    existing = sorted(net.nodes.items())
    next_node = max(net.nodes, default=0) + 1
    chain_ids = []
    for p in chain:
        reuse = None
        for nid, xy in existing:
            if math.hypot(xy[0] - p[0], xy[1] - p[1]) < 1e-9:
                reuse = nid
                break
        if reuse is None:
            net.nodes[next_node] = (float(p[0]), float(p[1]))
            chain_ids.append(next_node)
            next_node += 1
        else:
            chain_ids.append(reuse)
    for a, b in zip(chain_ids, chain_ids[1:]):
        if a == b:
            continue
        pa, pb = net.nodes[a], net.nodes[b]
        length = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
        if length > 0:
            net.edges.append((a, b, length, line_speed, "tdp"))
    # link new stops into the existing network so transfers are possible
    for nid in chain_ids:
        if any(nid == e for e, _xy in existing):
            continue
        p = net.nodes[nid]
        best, best_d = None, None
        for onid, xy in existing:
            d = math.hypot(xy[0] - p[0], xy[1] - p[1])
            if best_d is None or d < best_d:
                best, best_d = onid, d
        if best is not None and 0 < best_d <= link_km:
            net.edges.append((nid, best, best_d, link_speed, "tdp-link"))


def update_rents(city: CityModel, spec: ScenarioSpec) -> CityModel:
    """Blend each zone's rent over the ring-buffer multipliers.

    new_rent = ((area - sum(bands)) * rent + sum(band * g * rent)) / area,
    evaluated in the equivalent delta form rent + sum(band * (g - 1) * rent) / area
    so zones untouched by every ring (and unit multipliers) keep rents
    bit-exactly.
    """
    spec.validate()
    new_city = copy.deepcopy(city)
    if not spec.rent_rings or not spec.geometry:
        return new_city
    _check_bounds(city, spec)
    for z in new_city.zones:
        bands = [ring_coverage(z, spec.geometry, ring.r, ring.r_prime) for ring in spec.rent_rings]
        s = sum(bands)
        if s <= 0.0:
            continue
        if s > z.area:
            scale = z.area / s
            bands = [b * scale for b in bands]
        r = z.rent_per_m2
        delta = sum(b * (ring.g - 1.0) * r for b, ring in zip(bands, spec.rent_rings))
        if delta != 0.0:
            z.rent_per_m2 = r + delta / z.area
    return new_city


def scenario_city(city: CityModel, spec: ScenarioSpec) -> CityModel:
    return update_rents(apply_tdp(city, spec), spec)


def run_scenario(
    city: CityModel,
    households: list[HouseholdAgent],
    workers: list[WorkerAgent],
    spec: ScenarioSpec,
    params: PipelineParams,
    baseline: RunResult | None = None,
) -> tuple[RunResult, RunResult, CityModel]:
    """Baseline and scenario pipeline runs on the identical agent population."""
    if baseline is None:
        baseline = run_pipeline(city, households, workers, params)
    modified = scenario_city(city, spec)
    scenario_result = run_pipeline(modified, households, workers, params)
    return baseline, scenario_result, modified


# ---------------------------------------------------------------------------
# Shift reporting
# ---------------------------------------------------------------------------


@dataclass
class RunView:
    """The minimum a run must expose for diffing, whether computed in-process
    or read back from run artifacts."""

    housed: dict[int, int]
    unhoused: set[int]
    worker_mode: dict[int, str]
    worker_distance: dict[int, float]

    @classmethod
    def from_result(cls, result: RunResult) -> "RunView":
        return cls(
            housed=dict(result.allocation.housed),
            unhoused=set(result.allocation.unhoused),
            worker_mode={wid: d.chosen for wid, d in result.decisions.items()},
            worker_distance={wid: d.network_distance_km for wid, d in result.decisions.items()},
        )


@dataclass
class CategoryShift:
    attribute: str
    category: str
    n: int
    percentage: float
    relocated_pct: float
    mode_delta: dict[str, float]


@dataclass
class ShiftReport:
    rows: list[CategoryShift]
    zone_deltas: dict[int, dict[str, float]]
    zone_counts: dict[int, tuple[int, int]]

    def total_delta(self, mode: str) -> float:
        for row in self.rows:
            if row.attribute == "total":
                return row.mode_delta[mode]
        raise KeyError("no total row")

    def total_relocated_pct(self) -> float:
        for row in self.rows:
            if row.attribute == "total":
                return row.relocated_pct
        raise KeyError("no total row")


def distance_class(km: float) -> str:
    if km < 5.0:
        return "<5"
    if km <= 15.0:
        return "5-15"
    return ">15"


def _shares(worker_ids, modes_map, modes) -> dict[str, float]:
    decided = [w for w in worker_ids if w in modes_map]
    out = {m: 0.0 for m in modes}
    if not decided:
        return out
    for w in decided:
        out[modes_map[w]] += 1.0
    return {m: 100.0 * v / len(decided) for m, v in out.items()}


def build_shift_report(
    base: RunView,
    scen: RunView,
    hh_categories: dict[int, dict[str, str]],
    worker_info: dict[int, tuple[int, str]],
) -> ShiftReport:
    """Per-category relocation rates and mode-share deltas plus per-zone map.

    Workers are classed by commuting distance from the baseline run; household
    attribute categories are stable across runs by construction.
    """
    if not set(base.worker_mode) <= set(worker_info) or not set(scen.worker_mode) <= set(worker_info):
        raise PopulationMismatchError("runs cover different worker populations")

    modes = list(MODE_PRECEDENCE)
    groups: dict[tuple[str, str], list[int]] = {}
    for wid, (hh_id, gender) in worker_info.items():
        cats = [("gender", gender)]
        cats += list(hh_categories[hh_id].items())
        dist = base.worker_distance.get(wid)
        if dist is not None:
            cats.append(("distance", distance_class(dist)))
        cats.append(("total", "all"))
        for key in cats:
            groups.setdefault(key, []).append(wid)

    rows: list[CategoryShift] = []
    n_workers = len(worker_info)
    order = _row_order(groups)
    for key in order:
        members = groups[key]
        share_b = _shares(members, base.worker_mode, modes)
        share_s = _shares(members, scen.worker_mode, modes)
        moved = 0
        for wid in members:
            hh_id = worker_info[wid][0]
            if base.housed.get(hh_id) != scen.housed.get(hh_id):
                moved += 1
        rows.append(
            CategoryShift(
                attribute=key[0],
                category=key[1],
                n=len(members),
                percentage=100.0 * len(members) / n_workers if n_workers else 0.0,
                relocated_pct=100.0 * moved / len(members) if members else 0.0,
                mode_delta={m: share_s[m] - share_b[m] for m in modes},
            )
        )

    zone_deltas: dict[int, dict[str, float]] = {}
    zone_counts: dict[int, tuple[int, int]] = {}
    zones = sorted(set(base.housed.values()) | set(scen.housed.values()))
    bz: dict[int, list[int]] = {}
    sz: dict[int, list[int]] = {}
    for wid, (hh_id, _g) in worker_info.items():
        if hh_id in base.housed:
            bz.setdefault(base.housed[hh_id], []).append(wid)
        if hh_id in scen.housed:
            sz.setdefault(scen.housed[hh_id], []).append(wid)
    for z in zones:
        share_b = _shares(bz.get(z, []), base.worker_mode, modes)
        share_s = _shares(sz.get(z, []), scen.worker_mode, modes)
        zone_deltas[z] = {m: share_s[m] - share_b[m] for m in modes}
        zone_counts[z] = (len(bz.get(z, [])), len(sz.get(z, [])))
    return ShiftReport(rows=rows, zone_deltas=zone_deltas, zone_counts=zone_counts)


def _row_order(groups: dict[tuple[str, str], list[int]]) -> list[tuple[str, str]]:
    spec_order = {
        "gender": ("female", "male"),
        "size": ("single", "couple", "3-4", ">4"),
        "income": ("<10", "10-25", ">25"),
        "cars": ("0", "1", ">1"),
        "distance": DISTANCE_CLASSES,
        "total": ("all",),
    }
    out = []
    for attr, cats in spec_order.items():
        for c in cats:
            if (attr, c) in groups:
                out.append((attr, c))
    for key in sorted(groups):
        if key not in out:
            out.append(key)
    return out


def diff_report(
    baseline: RunResult,
    scenario_result: RunResult,
    households: list[HouseholdAgent],
    workers: list[WorkerAgent],
) -> ShiftReport:
    """Shift report between two in-process runs of the same population."""
    base_ids = set(baseline.decisions) | baseline.undecided_workers
    scen_ids = set(scenario_result.decisions) | scenario_result.undecided_workers
    if base_ids != scen_ids:
        raise PopulationMismatchError("runs cover different worker populations")
    hh_categories = {
        h.id: {"size": h.size_category, "income": h.income_category, "cars": h.car_category}
        for h in households
    }
    worker_info = {w.id: (w.household_id, w.gender) for w in workers}
    return build_shift_report(
        RunView.from_result(baseline), RunView.from_result(scenario_result), hh_categories, worker_info
    )
