"""Residential alternative selection: objectives, constraints, and the
constrained NSGA-II search over zones, plus the exhaustive oracle.

Each agent's search runs on its own seed substream derived from
(master seed, agent id), so results are independent of scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._rng import TAG_GA, minstd_seed
from .city import CityModel, Zone, service_coverage
from .population import (
    FACILITY_PREF_CRITERIA,
    HouseholdAgent,
    TRANSPORT_PREF_CRITERIA,
)

MIN_FACILITY_DISTANCE_KM = 0.1
MAX_ALTERNATIVES = 10
ORACLE_MAX_ZONES = 2000

# objective ids, all minimized internally; MAX-direction ones enter negated
OBJ_WORKPLACE = "workplace_distance"
OBJ_FORMER = "former_distance"
OBJ_POLLUTION = "pollution"
OBJ_FACILITY = "facility_access"
OBJ_TRANSPORT = "transport_access"


@dataclass
class ObjectiveVector:
    """Active objectives for one (agent, zone): (criterion, value, direction)."""

    entries: tuple[tuple[str, float, str], ...]

    def criteria(self) -> tuple[str, ...]:
        return tuple(c for c, _v, _d in self.entries)

    def minimized(self) -> np.ndarray:
        return np.array([v if d == "min" else -v for _c, v, d in self.entries], dtype=float)


@dataclass
class FeasibilityReport:
    rent_ok: bool
    pollution_ok: bool
    restriction_ok: bool
    violation_magnitude: float

    @property
    def feasible(self) -> bool:
        return self.rent_ok and self.pollution_ok and self.restriction_ok


@dataclass
class AlternativeSet:
    agent_id: int
    alternatives: list[tuple[int, ObjectiveVector]]

    def zone_ids(self) -> list[int]:
        return [z for z, _ in self.alternatives]


@dataclass
class GAParams:
    population_size: int = 50
    generations: int = 100
    mutation_rate: float = 0.2
    crossover_rate: float = 0.9
    tournament_size: int = 2
    seed: int = 0

    def validate(self) -> None:
        if self.population_size < 10:
            raise ValueError("population_size must be >= 10")
        if not (0.0 <= self.mutation_rate <= 1.0 and 0.0 <= self.crossover_rate <= 1.0):
            raise ValueError("rates must lie in [0, 1]")
        if self.tournament_size != 2:
            raise ValueError("only binary tournaments are implemented")


@dataclass
class CityTables:
    """Per-city arrays shared by every agent's search. Read-only."""

    zone_ids: list[int]
    index: dict[int, int]
    cx: np.ndarray
    cy: np.ndarray
    rent: np.ndarray
    pollution: np.ndarray
    restricted: np.ndarray
    area: np.ndarray
    residential_area: np.ndarray
    facility_basis: dict[str, np.ndarray] = field(default_factory=dict)
    transport_basis: dict[str, np.ndarray] = field(default_factory=dict)
    dist: np.ndarray | None = None


def prepare_city(city: CityModel) -> CityTables:
    """Precompute the distance matrix and per-kind accessibility bases."""
    zone_ids = city.zone_ids
    n = len(zone_ids)
    cx = np.array([z.centroid[0] for z in city.zones])
    cy = np.array([z.centroid[1] for z in city.zones])
    tables = CityTables(
        zone_ids=zone_ids,
        index={zid: k for k, zid in enumerate(zone_ids)},
        cx=cx,
        cy=cy,
        rent=np.array([z.rent_per_m2 for z in city.zones]),
        pollution=np.array([float(z.pollution) for z in city.zones]),
        restricted=np.array([bool(z.traffic_restricted) for z in city.zones]),
        area=np.array([z.area for z in city.zones]),
        residential_area=np.array([z.residential_area for z in city.zones]),
    )
    tables.dist = np.sqrt((cx[:, None] - cx[None, :]) ** 2 + (cy[:, None] - cy[None, :]) ** 2)
    # facility basis per kind: sum_j w_j * d_ij^-2 with w_j = area_j / max area of kind
    for kind in FACILITY_PREF_CRITERIA:
        members = [f for f in city.facilities if f.kind == kind]
        basis = np.zeros(n)
        if members:
            amax = max(f.area for f in members)
            for f in members:
                d = np.hypot(cx - f.location[0], cy - f.location[1])
                d = np.maximum(d, MIN_FACILITY_DISTANCE_KM)
                basis += (f.area / amax) * d**-2.0
        tables.facility_basis[kind] = basis
    # transport basis per service kind: sum_j coverage(i, j) / area_i
    for kind in TRANSPORT_PREF_CRITERIA:
        members = [s for s in city.services if s.kind == kind]
        basis = np.zeros(n)
        for s in members:
            for i, z in enumerate(city.zones):
                if _bbox_reachable(z, s):
                    cov = service_coverage(z, s)
                    if cov > 0.0:
                        basis[i] += cov / z.area
        tables.transport_basis[kind] = basis
    return tables


def _bbox_reachable(zone: Zone, service) -> bool:
    r = service.service_range_km
    zx = [p[0] for p in zone.polygon]
    zy = [p[1] for p in zone.polygon]
    gx = [p[0] for p in service.geometry]
    gy = [p[1] for p in service.geometry]
    return (
        min(zx) <= max(gx) + r
        and max(zx) >= min(gx) - r
        and min(zy) <= max(gy) + r
        and max(zy) >= min(gy) - r
    )


def facility_accessibility(zone_id: int, agent: HouseholdAgent, city: CityModel, tables: CityTables | None = None) -> float:
    """Preference-weighted inverse-square facility accessibility of a zone."""
    tables = tables or prepare_city(city)
    i = tables.index[zone_id]
    w = agent.residential_prefs.facility_weights
    return float(sum(w[k] * tables.facility_basis[k][i] for k in FACILITY_PREF_CRITERIA))


def transport_accessibility(zone_id: int, agent: HouseholdAgent, city: CityModel, tables: CityTables | None = None) -> float:
    """Preference-weighted service-coverage share of a zone."""
    tables = tables or prepare_city(city)
    i = tables.index[zone_id]
    w = agent.residential_prefs.transport_weights
    return float(sum(w[k] * tables.transport_basis[k][i] for k in TRANSPORT_PREF_CRITERIA))


def feasibility(zone: Zone, agent: HouseholdAgent, city: CityModel | None = None) -> FeasibilityReport:
    """Rent band plus hard pollution/restriction constraints for one zone."""
    min_frac, max_frac = agent.rent_band
    rent_cost = zone.rent_per_m2 * agent.required_area
    lo = min_frac * agent.monthly_income
    hi = max_frac * agent.monthly_income
    rent_ok = lo <= rent_cost <= hi
    violation = 0.0
    if rent_cost > hi:
        violation += (rent_cost - hi) / hi
    elif rent_cost < lo:
        violation += (lo - rent_cost) / lo
    prefs = agent.residential_prefs
    pollution_ok = (not prefs.pollution_hard) or zone.pollution <= 2
    if not pollution_ok:
        violation += (zone.pollution - 2) / 3.0
    restriction_ok = (not prefs.restriction_hard) or not zone.traffic_restricted
    if not restriction_ok:
        violation += 1.0
    return FeasibilityReport(rent_ok, pollution_ok, restriction_ok, violation)


def active_objectives(agent: HouseholdAgent) -> list[str]:
    imp = agent.residential_prefs.importance
    active = []
    if imp.get("workplace_distance", 0) > 0 and agent.workplace_zones:
        active.append(OBJ_WORKPLACE)
    if imp.get("former_distance", 0) > 0:
        active.append(OBJ_FORMER)
    if imp.get("pollution", 0) > 0:
        active.append(OBJ_POLLUTION)
    if any(imp.get(k, 0) > 0 for k in FACILITY_PREF_CRITERIA):
        active.append(OBJ_FACILITY)
    if any(imp.get(k, 0) > 0 for k in TRANSPORT_PREF_CRITERIA):
        active.append(OBJ_TRANSPORT)
    if not active:
        # degenerate preference draw: fall back to staying near the former home
        active.append(OBJ_FORMER)
    return active


def objectives(zone_id: int, agent: HouseholdAgent, city: CityModel, tables: CityTables | None = None) -> ObjectiveVector:
    """Objective vector for one zone, restricted to the agent's active set."""
    tables = tables or prepare_city(city)
    i = tables.index[zone_id]
    entries = []
    for crit in active_objectives(agent):
        if crit == OBJ_WORKPLACE:
            ws = [tables.dist[i, tables.index[w]] for w in agent.workplace_zones]
            entries.append((crit, float(np.mean(ws)), "min"))
        elif crit == OBJ_FORMER:
            entries.append((crit, float(tables.dist[i, tables.index[agent.former_zone]]), "min"))
        elif crit == OBJ_POLLUTION:
            entries.append((crit, float(tables.pollution[i]), "min"))
        elif crit == OBJ_FACILITY:
            entries.append((crit, facility_accessibility(zone_id, agent, city, tables), "max"))
        elif crit == OBJ_TRANSPORT:
            entries.append((crit, transport_accessibility(zone_id, agent, city, tables), "max"))
    return ObjectiveVector(entries=tuple(entries))


def agent_zone_arrays(agent: HouseholdAgent, tables: CityTables) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Vectorized (objectives, feasible, violation) over every zone."""
    n = len(tables.zone_ids)
    active = active_objectives(agent)
    cols = []
    for crit in active:
        if crit == OBJ_WORKPLACE:
            rows = np.array([tables.dist[tables.index[w]] for w in agent.workplace_zones])
            cols.append(rows.mean(axis=0))
        elif crit == OBJ_FORMER:
            cols.append(tables.dist[tables.index[agent.former_zone]].copy())
        elif crit == OBJ_POLLUTION:
            cols.append(tables.pollution.copy())
        elif crit == OBJ_FACILITY:
            w = agent.residential_prefs.facility_weights
            acc = sum(w[k] * tables.facility_basis[k] for k in FACILITY_PREF_CRITERIA)
            cols.append(-acc)
        elif crit == OBJ_TRANSPORT:
            w = agent.residential_prefs.transport_weights
            acc = sum(w[k] * tables.transport_basis[k] for k in TRANSPORT_PREF_CRITERIA)
            cols.append(-acc)
    obj = np.column_stack(cols) if cols else np.zeros((n, 1))
    min_frac, max_frac = agent.rent_band
    rent_cost = tables.rent * agent.required_area
    lo = min_frac * agent.monthly_income
    hi = max_frac * agent.monthly_income
    viol = np.where(rent_cost > hi, (rent_cost - hi) / hi, 0.0) + np.where(rent_cost < lo, (lo - rent_cost) / lo, 0.0)
    feas = (rent_cost >= lo) & (rent_cost <= hi)
    prefs = agent.residential_prefs
    if prefs.pollution_hard:
        bad = tables.pollution > 2
        feas &= ~bad
        viol = viol + np.where(bad, (tables.pollution - 2) / 3.0, 0.0)
    if prefs.restriction_hard:
        feas &= ~tables.restricted
        viol = viol + np.where(tables.restricted, 1.0, 0.0)
    return np.ascontiguousarray(obj, dtype=np.float64), feas.astype(np.uint8), viol.astype(np.float64), active


def constrained_dominates(a: tuple[ObjectiveVector, FeasibilityReport], b: tuple[ObjectiveVector, FeasibilityReport]) -> bool:
    """Constraint-domination: feasible beats infeasible; infeasible compare by
    violation; feasible compare by Pareto dominance."""
    ov_a, fr_a = a
    ov_b, fr_b = b
    if ov_a.criteria() != ov_b.criteria():
        raise ValueError("mismatched objective sets")
    if fr_a.feasible and not fr_b.feasible:
        return True
    if fr_b.feasible and not fr_a.feasible:
        return False
    if not fr_a.feasible and not fr_b.feasible:
        return fr_a.violation_magnitude < fr_b.violation_magnitude
    va = ov_a.minimized()
    vb = ov_b.minimized()
    return bool(np.all(va <= vb) and np.any(va < vb))


def nondominated_sort(population: list[tuple[ObjectiveVector, FeasibilityReport]]) -> list[list[int]]:
    """Partition indices into fronts F1, F2, ... under constraint-domination."""
    if not population:
        raise ValueError("empty population")
    crit = population[0][0].criteria()
    for ov, _fr in population[1:]:
        if ov.criteria() != crit:
            raise ValueError("mismatched objective sets")
    obj = np.array([ov.minimized() for ov, _ in population], dtype=np.float64)
    feas = np.array([1 if fr.feasible else 0 for _, fr in population], dtype=np.uint8)
    viol = np.array([fr.violation_magnitude for _, fr in population], dtype=np.float64)
    ranks, _crowd = _kernels.sort_and_crowd(np.ascontiguousarray(obj), feas, viol)
    fronts: list[list[int]] = [[] for _ in range(int(ranks.max()) + 1)]
    for i, r in enumerate(ranks):
        fronts[int(r)].append(i)
    return fronts


def crowding_distance(front: list[ObjectiveVector]) -> list[float]:
    """Crowding distance of each member, treating the input as one front.

    Boundary members get +inf per objective; interior members accumulate
    normalized neighbor gaps; a degenerate objective (max == min) adds 0.
    """
    if not front:
        return []
    obj = np.array([ov.minimized() for ov in front], dtype=np.float64)
    n, m = obj.shape
    crowd = np.zeros(n)
    for o in range(m):
        order = sorted(range(n), key=lambda i: (obj[i, o], i))
        fmin = obj[order[0], o]
        fmax = obj[order[-1], o]
        crowd[order[0]] = np.inf
        crowd[order[-1]] = np.inf
        if fmax > fmin:
            for k in range(1, n - 1):
                if not np.isinf(crowd[order[k]]):
                    crowd[order[k]] += (obj[order[k + 1], o] - obj[order[k - 1], o]) / (fmax - fmin)
    return [float(c) for c in crowd]


def select_alternatives(
    agent: HouseholdAgent,
    city: CityModel,
    params: GAParams,
    tables: CityTables | None = None,
) -> AlternativeSet:
    """Constrained NSGA-II over zone ids; up to 10 distinct feasible zones
    from the final first front by descending crowding distance."""
    params.validate()
    tables = tables or prepare_city(city)
    obj, feas, viol, _active = agent_zone_arrays(agent, tables)
    seed = minstd_seed(params.seed, TAG_GA, agent.id)
    out, n_out, _crowd = _kernels.ga_select_zones(
        obj,
        feas,
        viol,
        tables.cx,
        tables.cy,
        params.population_size,
        params.generations,
        params.mutation_rate,
        params.crossover_rate,
        seed,
        MAX_ALTERNATIVES,
    )
    alts = []
    for k in range(int(n_out)):
        zid = tables.zone_ids[int(out[k])]
        alts.append((zid, objectives(zid, agent, city, tables)))
    return AlternativeSet(agent_id=agent.id, alternatives=alts)


def pareto_oracle(agent: HouseholdAgent, city: CityModel, tables: CityTables | None = None) -> set[int]:
    """Exhaustive feasible nondominated zone set by full pairwise comparison.

    Independent of the GA path: plain numpy broadcasting over all zones.
    """
    tables = tables or prepare_city(city)
    n = len(tables.zone_ids)
    if n > ORACLE_MAX_ZONES:
        raise ValueError(f"zone count {n} too large for exhaustive oracle")
    obj, feas, _viol, _active = agent_zone_arrays(agent, tables)
    idx = np.flatnonzero(feas == 1)
    if idx.size == 0:
        return set()
    f = obj[idx]
    le = np.all(f[:, None, :] <= f[None, :, :], axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :], axis=2)
    dominates = le & lt
    dominated = dominates.any(axis=0)
    return {tables.zone_ids[int(idx[k])] for k in np.flatnonzero(~dominated)}
