"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The heavy fixtures (demo city at n=20,000) are shared across criteria.
"""

import time

import numpy as np
import pytest

import modalshift.residential as residential_mod
import modalshift.scenario as scenario_mod
from modalshift.city import TransportService, service_coverage
from modalshift.data import data_path
from modalshift.generate import DEMO_PARAMS, SynthCityParams, generate_synthetic_city
from modalshift.modechoice import MODE_PRECEDENCE, choose_mode, suitability
from modalshift.competition import allocate, build_capacity_table, build_period_plan, priority_compare
from modalshift.pipeline import PipelineParams, run_pipeline
from modalshift.population import (
    PopulationConfig,
    WorkerAgent,
    attach_workplaces,
    assign_workplaces,
    make_workers,
    synthesize_households,
)
from modalshift.residential import (
    AlternativeSet,
    GAParams,
    ObjectiveVector,
    facility_accessibility,
    feasibility,
    pareto_oracle,
    prepare_city,
    select_alternatives,
    transport_accessibility,
)
from modalshift.scenario import RentRing, ScenarioSpec, diff_report, run_scenario, update_rents

from conftest import grid_city, make_agent, uniform_prefs
from test_cli import run_cli


DEMO_N = 20_000
SCENARIO_TIME_BUDGET_S = 300.0


def _report(n, ok, desc):
    status = "PASS" if ok else "FAIL"
    print(f"\n[acceptance] criterion {n}: {status} - {desc}")
    assert ok, f"criterion {n} failed: {desc}"


@pytest.fixture(scope="module")
def demo_setup(survey, expert):
    city, _ = generate_synthetic_city(DEMO_PARAMS, seed=1)
    pc = PopulationConfig(zone_ids=city.zone_ids)
    households = synthesize_households(pc, survey, DEMO_N, seed=42)
    workers = make_workers(households, survey, pc, seed=42)
    assign_workplaces(workers, city, seed=42)
    attach_workplaces(households, workers)
    params = PipelineParams(seed=42, ga=GAParams(), expert=expert)
    return city, households, workers, params


@pytest.fixture(scope="module")
def demo_baseline(demo_setup):
    city, households, workers, params = demo_setup
    t0 = time.perf_counter()
    result = run_pipeline(city, households, workers, params)
    elapsed = time.perf_counter() - t0
    return result, elapsed


# ---------------------------------------------------------------------------
# criterion 1: equation fixtures at 1e-9 relative tolerance
# ---------------------------------------------------------------------------


def test_criterion_1_equation_fixtures(monkeypatch):
    checks = []
    # facility accessibility: p * w * d^-2
    city = grid_city(2)
    from modalshift.city import Facility

    fac = {k: 0.0 for k in ("commercial", "educational", "green_recreational", "remedial", "cultural")}
    fac["commercial"] = 1.0
    agent = make_agent(prefs=uniform_prefs(facility=fac))
    city.facilities.append(Facility(id=1, kind="commercial", location=(2.5, 0.5), area=0.02))
    checks.append(abs(facility_accessibility(1, agent, city) - 0.25) <= 1e-9 * 0.25)
    city.facilities = [
        Facility(id=1, kind="commercial", location=(1.5, 0.5), area=2.0),
        Facility(id=2, kind="commercial", location=(0.5, 1.5), area=1.0),
    ]
    checks.append(abs(facility_accessibility(1, agent, city) - 1.5) <= 1e-9 * 1.5)

    # transport accessibility: p * coverage / zone area with stated coverages
    city2 = grid_city(1, side=2.0)
    tra = {k: 0.0 for k in ("highway", "subway_station", "brt_stop", "bus_stop")}
    tra["subway_station"] = 1.0
    agent2 = make_agent(prefs=uniform_prefs(transport=tra))
    s1 = TransportService(id=1, kind="subway_station", geometry=((1.0, 1.0),), service_range_km=0.6)
    s2 = TransportService(id=2, kind="subway_station", geometry=((1.5, 1.5),), service_range_km=0.4)
    coverages = {1: 1.0, 2: 0.5}
    monkeypatch.setattr(residential_mod, "service_coverage", lambda z, s: coverages[s.id])
    city2.services = [s1]
    checks.append(abs(transport_accessibility(1, agent2, city2) - 0.25) <= 1e-9 * 0.25)
    city2.services = [s1, s2]
    checks.append(abs(transport_accessibility(1, agent2, city2) - 0.375) <= 1e-9 * 0.375)

    # suitability: weighted sum of scores
    worker = WorkerAgent(
        id=1,
        household_id=1,
        gender="male",
        professional_category="services",
        mode_prefs={
            "cost": 0.5,
            "in_vehicle_time": 0.5,
            "out_of_vehicle_time": 0.0,
            "comfortability": 0.0,
            "security": 0.0,
            "reliability": 0.0,
        },
    )
    scores = {
        "cost": 0.8,
        "in_vehicle_time": 0.2,
        "out_of_vehicle_time": 0.0,
        "comfortability": 0.0,
        "security": 0.0,
        "reliability": 0.0,
    }
    checks.append(abs(suitability(worker, "bus", scores) - 0.5) <= 1e-9 * 0.5)

    # rent blend: ((A - sum bands) R + sum band g R) / A
    city3 = grid_city(1, side=float(np.sqrt(10.0)), rent_per_m2=100.0)
    spec = ScenarioSpec(
        kind="subway",
        geometry=((0.5, 0.5), (1.5, 0.5)),
        stations=((0.5, 0.5), (1.5, 0.5)),
        rent_rings=(RentRing(0.0, 1.0, 1.2),),
    )
    monkeypatch.setattr(scenario_mod, "ring_coverage", lambda z, g, r, rp: 2.0)
    out = update_rents(city3, spec)
    checks.append(abs(out.zones[0].rent_per_m2 - 104.0) <= 1e-9 * 104.0)
    monkeypatch.setattr(scenario_mod, "ring_coverage", lambda z, g, r, rp: z.area)
    out = update_rents(city3, spec)
    checks.append(abs(out.zones[0].rent_per_m2 - 120.0) <= 1e-9 * 120.0)

    _report(1, all(checks), f"equation fixtures match to 1e-9 rel ({len(checks)} checks)")


# ---------------------------------------------------------------------------
# criterion 2: GA vs exhaustive oracle, 50 cities x 200 agents, < 60 s
# ---------------------------------------------------------------------------


def test_criterion_2_ga_matches_oracle(survey):
    t0 = time.perf_counter()
    lean = SynthCityParams(
        nx=10,
        ny=6,
        with_bus_stops=False,
        brt_row=None,
        facility_density={"commercial": 0.3, "educational": 0.25, "green_recreational": 0.2, "remedial": 0.1, "cultural": 0.1},
    )
    n_agents_ok = 0
    n_agents = 0
    feasible_alts = True
    rng = np.random.default_rng(2024)
    for c in range(50):
        seed = int(rng.integers(1, 2**30))
        city, _ = generate_synthetic_city(lean, seed=seed)
        assert len(city.zones) == 60
        pc = PopulationConfig(zone_ids=city.zone_ids)
        agents = synthesize_households(pc, survey, 200, seed=seed + 1)
        wk = make_workers(agents, survey, pc, seed=seed + 1)
        assign_workplaces(wk, city, seed=seed + 1)
        attach_workplaces(agents, wk)
        tables = prepare_city(city)
        params = GAParams(seed=seed + 2)
        for agent in agents:
            alts = select_alternatives(agent, city, params, tables)
            for zid, _ov in alts.alternatives:
                if not feasibility(city.zone(zid), agent).feasible:
                    feasible_alts = False
            oracle = pareto_oracle(agent, city, tables)
            n_agents += 1
            if set(alts.zone_ids()) <= oracle:
                n_agents_ok += 1
    elapsed = time.perf_counter() - t0
    rate = n_agents_ok / n_agents
    ok = feasible_alts and rate >= 0.99 and elapsed < 60.0
    _report(
        2,
        ok,
        f"all alternatives feasible={feasible_alts}, oracle-subset rate {rate:.4f} >= 0.99, "
        f"{n_agents} agents in {elapsed:.1f}s < 60s",
    )


# ---------------------------------------------------------------------------
# criterion 3: nondominated sort equivalence on 1000 random populations
# ---------------------------------------------------------------------------


def _vectorized_peel_oracle(obj, feas, viol):
    n = obj.shape[0]
    le = np.all(obj[:, None, :] <= obj[None, :, :], axis=2)
    lt = np.any(obj[:, None, :] < obj[None, :, :], axis=2)
    pareto = le & lt
    fi = feas.astype(bool)
    dom = np.zeros((n, n), dtype=bool)
    dom |= fi[:, None] & ~fi[None, :]
    both_inf = ~fi[:, None] & ~fi[None, :]
    dom |= both_inf & (viol[:, None] < viol[None, :])
    both_f = fi[:, None] & fi[None, :]
    dom |= both_f & pareto
    ranks = np.full(n, -1)
    remaining = np.arange(n)
    r = 0
    while remaining.size:
        sub = dom[np.ix_(remaining, remaining)]
        nondominated = ~sub.any(axis=0)
        ranks[remaining[nondominated]] = r
        remaining = remaining[~nondominated]
        r += 1
    return ranks


def test_criterion_3_sort_equivalence():
    from modalshift import _kernels

    rng = np.random.default_rng(31)
    mismatches = 0
    t0 = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(2, 301))
        m = int(rng.integers(1, 6))
        obj = np.round(rng.normal(size=(n, m)), 2)
        feas = (rng.random(n) < rng.uniform(0.3, 1.0)).astype(np.uint8)
        viol = np.where(feas == 1, 0.0, np.round(rng.random(n), 3))
        ranks, _ = _kernels.sort_and_crowd(np.ascontiguousarray(obj), feas, viol)
        expected = _vectorized_peel_oracle(obj, feas, viol)
        if not np.array_equal(ranks, expected):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    _report(3, mismatches == 0, f"1000 random populations, {mismatches} partition mismatches ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 4: competition invariants over 100 randomized allocations
# ---------------------------------------------------------------------------


def _random_allocation_inputs(city, n_agents, seed):
    rng = np.random.default_rng(seed)
    zone_ids = np.array(city.zone_ids)
    sizes = rng.integers(1, 7, size=n_agents)
    incomes = np.round(rng.uniform(4, 45, size=n_agents), 3)
    childs = rng.random(n_agents) < 0.4
    formers = rng.choice(zone_ids, size=n_agents)
    dummy = ObjectiveVector((("d", 0.0, "min"),))
    agents = []
    alt_map = {}
    n_alts = rng.integers(0, 6, size=n_agents)
    for i in range(n_agents):
        a = make_agent(
            aid=i + 1,
            size=int(sizes[i]),
            income=float(incomes[i]),
            former_zone=int(formers[i]),
            has_child=bool(childs[i]),
        )
        agents.append(a)
        k = int(n_alts[i])
        zones = rng.choice(zone_ids, size=k, replace=False) if k else []
        alt_map[a.id] = AlternativeSet(agent_id=a.id, alternatives=[(int(z), dummy) for z in zones])
    return agents, alt_map


def test_criterion_4_competition_invariants():
    t0 = time.perf_counter()
    city = grid_city(6)
    rng = np.random.default_rng(44)
    violations = 0
    for run in range(100):
        seed = int(rng.integers(1, 2**30))
        agents, alt_map = _random_allocation_inputs(city, 10_000, seed)
        eq = tuple([float(rng.uniform(0.02, 0.08))] * 12)
        plan = build_period_plan([a.id for a in agents], seed, None, eq)
        caps = build_capacity_table(city, len(agents), eq)
        res = allocate(city, agents, alt_map, plan, caps, seed)
        caps2 = build_capacity_table(city, len(agents), eq)
        by_id = {a.id: a for a in agents}
        housed_per_zone = {}
        for aid, z in res.housed.items():
            housed_per_zone[z] = housed_per_zone.get(z, 0) + 1
            if z not in alt_map[aid].zone_ids():
                violations += 1
        zrow = {z: k for k, z in enumerate(caps2.zone_ids)}
        for z, cnt in housed_per_zone.items():
            if cnt > caps2.initial[zrow[z]].sum():
                violations += 1
        for contest in res.audit:
            winners = set(contest.winners)
            for loser in set(contest.contenders) - winners:
                for w in winners:
                    if priority_compare(by_id[loser], by_id[w]) == -1:
                        violations += 1
        if run < 3:
            caps3 = build_capacity_table(city, len(agents), eq)
            res2 = allocate(city, agents, alt_map, plan, caps3, seed)
            if res2.housed != res.housed or res2.audit != res.audit or res2.unhoused != res.unhoused:
                violations += 1
    elapsed = time.perf_counter() - t0
    _report(
        4,
        violations == 0,
        f"100 x 10^4-agent allocations: 0 capacity/dominance/recurrence violations ({elapsed:.1f}s)",
    )


def test_criterion_4_worker_count_byte_identical(tmp_path):
    import json as _json

    ws = tmp_path
    r = run_cli(["gen-city", "--nx", "5", "--ny", "5", "--seed", "3", "--out", str(ws / "city.json")])
    assert r.returncode == 0, r.stderr
    cfg = {
        "schema_version": 1,
        "seed": 5,
        "n_households": 200,
        "city": "city.json",
        "ga_population_size": 16,
        "ga_generations": 25,
    }
    (ws / "config.json").write_text(_json.dumps(cfg))
    sums = {}
    for wk in (1, 2):
        out = ws / f"w{wk}"
        r = run_cli(["run", "--config", str(ws / "config.json"), "--out", str(out), "--workers", str(wk)])
        assert r.returncode == 0, r.stderr
        manifest = _json.loads((out / "manifest.json").read_text())
        sums[wk] = {k: v["sha256"] for k, v in manifest["outputs"].items()}
    ok = sums[1] == sums[2]
    _report(4.5, ok, "full run outputs byte-identical across --workers 1 and 2")


# ---------------------------------------------------------------------------
# criterion 5: mode-choice structural constraints
# ---------------------------------------------------------------------------


def test_criterion_5_structural_zeros_and_scale_invariance(demo_setup, demo_baseline, expert):
    city, households, workers, params = demo_setup
    result, _elapsed = demo_baseline
    hh = {a.id: a for a in households}
    wk = {w.id: w for w in workers}
    car_violations = 0
    walk_violations = 0
    for wid, d in result.decisions.items():
        if d.chosen == "car" and hh[wk[wid].household_id].n_cars == 0:
            car_violations += 1
        if d.chosen == "walk" and d.network_distance_km > 5.0:
            walk_violations += 1

    # argmax scale invariance over 10^4 random preference vectors
    rng = np.random.default_rng(55)
    crits = ("cost", "in_vehicle_time", "out_of_vehicle_time", "comfortability", "security", "reliability")
    zone_ids = city.zone_ids
    agent = make_agent(n_cars=1)
    flips = 0
    for k in range(10_000):
        o = int(rng.choice(zone_ids))
        dnew = int(rng.choice(zone_ids))
        raw = rng.uniform(0.01, 5.0, size=6)
        scale = float(rng.uniform(0.01, 100.0))
        w1 = dict(zip(crits, raw / raw.sum()))
        scaled = raw * scale
        w2 = dict(zip(crits, scaled / scaled.sum()))
        worker1 = WorkerAgent(id=1, household_id=1, gender="male", professional_category="services", mode_prefs=w1, workplace_zone=dnew)
        worker2 = WorkerAgent(id=1, household_id=1, gender="male", professional_category="services", mode_prefs=w2, workplace_zone=dnew)
        d1 = choose_mode(worker1, agent, o, result.los, expert)
        d2 = choose_mode(worker2, agent, o, result.los, expert)
        if d1.chosen != d2.chosen:
            flips += 1
    ok = car_violations == 0 and walk_violations == 0 and flips == 0
    _report(
        5,
        ok,
        f"zero-car car assignments {car_violations}, walks beyond 5 km {walk_violations}, "
        f"scale-invariance flips {flips}/10000",
    )


# ---------------------------------------------------------------------------
# criterion 6: population marginals at n = 50 000
# ---------------------------------------------------------------------------


def test_criterion_6_population_marginals(survey):
    pc = PopulationConfig(zone_ids=list(range(1, 61)))
    n = 50_000
    agents = synthesize_households(pc, survey, n, seed=606)
    worst = 0.0
    for probs, getter in (
        (pc.size_probs, lambda a: a.size_category),
        (pc.income_probs, lambda a: a.income_category),
        (pc.car_probs, lambda a: a.car_category),
    ):
        counts = {}
        for a in agents:
            counts[getter(a)] = counts.get(getter(a), 0) + 1
        for cat, p in probs.items():
            err = abs(counts.get(cat, 0) / n - p)
            worst = max(worst, err)
    _report(6, worst <= 0.01, f"n=50000 size/income/car marginals, worst abs error {worst:.4f} <= 0.01")


# ---------------------------------------------------------------------------
# criterion 7: demo-city scenario sign checks
# ---------------------------------------------------------------------------


def test_criterion_7_scenario_signs(demo_setup, demo_baseline):
    from modalshift.scenario import load_scenario

    city, households, workers, params = demo_setup
    base, base_elapsed = demo_baseline
    deltas = {}
    times = {"baseline": base_elapsed}
    for name in ("subway", "highway", "brt"):
        spec = load_scenario(data_path(f"scenario_{name}_demo.json"))
        t0 = time.perf_counter()
        _, scen, _mod = run_scenario(city, households, workers, spec, params, baseline=base)
        times[name] = time.perf_counter() - t0
        report = diff_report(base, scen, households, workers)
        deltas[name] = {m: report.total_delta(m) for m in MODE_PRECEDENCE}
    subway_ok = deltas["subway"]["subway"] > 0 and deltas["subway"]["car"] < 0
    highway_ok = deltas["highway"]["car"] > 0
    brt_ok = abs(deltas["brt"]["brt"]) < deltas["subway"]["subway"]
    time_ok = all(t < SCENARIO_TIME_BUDGET_S for t in times.values())
    ok = subway_ok and highway_ok and brt_ok and time_ok
    _report(
        7,
        ok,
        "subway: subway %+0.2f / car %+0.2f; highway: car %+0.2f; |brt %+0.2f| < %0.2f; "
        "run times %s s (budget %ds each)"
        % (
            deltas["subway"]["subway"],
            deltas["subway"]["car"],
            deltas["highway"]["car"],
            deltas["brt"]["brt"],
            deltas["subway"]["subway"],
            {k: round(v) for k, v in times.items()},
            SCENARIO_TIME_BUDGET_S,
        ),
    )


# ---------------------------------------------------------------------------
# criterion 8: residential self-selection sign
# ---------------------------------------------------------------------------


def test_criterion_8_self_selection(survey, expert):
    city, _ = generate_synthetic_city(SynthCityParams(nx=8, ny=8), seed=6)
    pc = PopulationConfig(zone_ids=city.zone_ids)
    households = synthesize_households(pc, survey, 300, seed=808)
    workers = make_workers(households, survey, pc, seed=808)
    assign_workplaces(workers, city, seed=808)
    attach_workplaces(households, workers)
    subway_only = {"highway": 0.0, "subway_station": 1.0, "brt_stop": 0.0, "bus_stop": 0.0}
    for a in households:
        a.residential_prefs.transport_weights = dict(subway_only)
        a.residential_prefs.importance["subway_station"] = 9
    params = PipelineParams(seed=808, ga=GAParams(generations=50), expert=expert)
    stations = ((1.5, 1.5), (2.5, 1.5), (3.5, 1.5))
    spec = ScenarioSpec(kind="subway", geometry=stations, stations=stations)
    base, scen, modified = run_scenario(city, households, workers, spec, params)
    _nb, noop_scen, _m = run_scenario(
        city, households, workers, ScenarioSpec(kind="subway"), params, baseline=base
    )
    new_services = modified.services[len(city.services):]
    buffer_zones = {z.id for z in city.zones if any(service_coverage(z, s) > 0 for s in new_services)}

    def moved_in(b, s):
        return sum(
            1
            for aid, z in s.allocation.housed.items()
            if z in buffer_zones and b.allocation.housed.get(aid) not in buffer_zones
        )

    with_line = moved_in(base, scen)
    without_line = moved_in(base, noop_scen)
    ok = with_line > without_line
    _report(
        8,
        ok,
        f"subway-loving subpopulation: {with_line} moved into station buffers under the new line "
        f"vs {without_line} under no-op",
    )


# ---------------------------------------------------------------------------
# criterion 9: no-op scenario bitwise equality
# ---------------------------------------------------------------------------


def test_criterion_9_noop_bitwise(tmp_path):
    import json as _json

    ws = tmp_path
    r = run_cli(["gen-city", "--nx", "6", "--ny", "6", "--seed", "9", "--out", str(ws / "city.json")])
    assert r.returncode == 0, r.stderr
    cfg = {
        "schema_version": 1,
        "seed": 17,
        "n_households": 300,
        "city": "city.json",
        "ga_population_size": 16,
        "ga_generations": 30,
    }
    (ws / "config.json").write_text(_json.dumps(cfg))
    base_out = ws / "baseline"
    r = run_cli(["run", "--config", str(ws / "config.json"), "--out", str(base_out)])
    assert r.returncode == 0, r.stderr
    noop = ws / "noop.json"
    noop.write_text(_json.dumps({"schema_version": 1, "kind": "subway", "geometry": [], "stations": []}))
    scen_out = ws / "scenario"
    r = run_cli(
        [
            "scenario",
            "--config",
            str(ws / "config.json"),
            "--scenario",
            str(noop),
            "--baseline",
            str(base_out),
            "--out",
            str(scen_out),
        ]
    )
    assert r.returncode == 0, r.stderr
    identical = all(
        (scen_out / name).read_bytes() == (base_out / name).read_bytes()
        for name in (
            "population.csv",
            "workers.csv",
            "assignments.csv",
            "decisions.csv",
            "mode_shares.csv",
            "housing_distribution.csv",
            "unhoused.csv",
            "audit.csv",
        )
    )
    zero_deltas = True
    import csv as _csv

    with open(scen_out / "shift_report.csv", newline="") as fh:
        for row in _csv.DictReader(fh):
            if float(row["relocated_pct"]) != 0.0:
                zero_deltas = False
            for m in MODE_PRECEDENCE:
                if float(row[f"delta_{m}"]) != 0.0:
                    zero_deltas = False
    ok = identical and zero_deltas
    _report(9, ok, f"no-op scenario: run artifacts byte-identical={identical}, all deltas zero={zero_deltas}")
