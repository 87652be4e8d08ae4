"""End-to-end run: alternatives -> competition -> mode choice.

Per-agent work may fan out to a process pool; every agent draws from its own
seed substream, so results are byte-identical for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .city import CityModel
from .competition import (
    AllocationResult,
    build_capacity_table,
    build_period_plan,
    allocate,
)
from .los import DEFAULT_TARIFFS, LOSTables, TariffConfig, build_los_tables
from .modechoice import ExpertScoreMatrix, ModeDecision, choose_mode
from .population import HouseholdAgent, WorkerAgent
from .residential import (
    AlternativeSet,
    CityTables,
    GAParams,
    prepare_city,
    select_alternatives,
)


@dataclass
class PipelineParams:
    seed: int = 0
    ga: GAParams = field(default_factory=GAParams)
    monthly_weights: tuple[float, ...] | None = None
    equilibrium: tuple[float, ...] | None = None
    tariffs: TariffConfig = field(default_factory=lambda: DEFAULT_TARIFFS)
    expert: ExpertScoreMatrix | None = None
    pool_workers: int = 1
    carry_over_capacity: bool = False


@dataclass
class RunResult:
    alternatives: dict[int, AlternativeSet]
    allocation: AllocationResult
    decisions: dict[int, ModeDecision]
    undecided_workers: set[int]
    los: LOSTables
    timings: dict[str, float] = field(default_factory=dict)


_POOL_CTX: dict = {}


def _pool_init(city: CityModel, tables: CityTables, ga: GAParams) -> None:
    _POOL_CTX["city"] = city
    _POOL_CTX["tables"] = tables
    _POOL_CTX["ga"] = ga


def _pool_select(chunk: list[HouseholdAgent]) -> list[tuple[int, AlternativeSet]]:
    city = _POOL_CTX["city"]
    tables = _POOL_CTX["tables"]
    ga = _POOL_CTX["ga"]
    return [(a.id, select_alternatives(a, city, ga, tables)) for a in chunk]


def compute_alternatives(
    city: CityModel,
    households: list[HouseholdAgent],
    ga: GAParams,
    tables: CityTables | None = None,
    pool_workers: int = 1,
) -> dict[int, AlternativeSet]:
    tables = tables or prepare_city(city)
    if pool_workers <= 1 or len(households) < 64:
        return {a.id: select_alternatives(a, city, ga, tables) for a in households}
    chunks = [households[i::pool_workers] for i in range(pool_workers)]
    out: dict[int, AlternativeSet] = {}
    with ProcessPoolExecutor(
        max_workers=pool_workers, initializer=_pool_init, initargs=(city, tables, ga)
    ) as pool:
        for part in pool.map(_pool_select, chunks):
            for aid, alts in part:
                out[aid] = alts
    return {aid: out[aid] for aid in sorted(out)}


def run_pipeline(
    city: CityModel,
    households: list[HouseholdAgent],
    workers: list[WorkerAgent],
    params: PipelineParams,
    tables: CityTables | None = None,
    los: LOSTables | None = None,
) -> RunResult:
    """Run residential choice, competition and mode choice on fixed agents."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    tables = tables or prepare_city(city)
    timings["prepare_city"] = time.perf_counter() - t0

    ga = GAParams(
        population_size=params.ga.population_size,
        generations=params.ga.generations,
        mutation_rate=params.ga.mutation_rate,
        crossover_rate=params.ga.crossover_rate,
        tournament_size=params.ga.tournament_size,
        seed=params.seed,
    )
    t0 = time.perf_counter()
    alternatives = compute_alternatives(city, households, ga, tables, params.pool_workers)
    timings["alternatives"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    eq = tuple(params.equilibrium) if params.equilibrium else tuple([1.0] * 12)
    plan = build_period_plan([a.id for a in households], params.seed, params.monthly_weights, eq)
    capacities = build_capacity_table(city, len(households), eq)
    allocation = allocate(
        city,
        households,
        alternatives,
        plan,
        capacities,
        params.seed,
        carry_over_capacity=params.carry_over_capacity,
    )
    timings["allocation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if los is None:
        los = build_los_tables(city, params.tariffs)
    timings["los"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if params.expert is None:
        raise ValueError("PipelineParams.expert matrix is required")
    by_hh = {a.id: a for a in households}
    decisions: dict[int, ModeDecision] = {}
    undecided: set[int] = set()
    for w in workers:
        origin = allocation.housed.get(w.household_id)
        if origin is None or w.workplace_zone is None:
            undecided.add(w.id)
            continue
        decisions[w.id] = choose_mode(w, by_hh[w.household_id], origin, los, params.expert)
    timings["mode_choice"] = time.perf_counter() - t0

    return RunResult(
        alternatives=alternatives,
        allocation=allocation,
        decisions=decisions,
        undecided_workers=undecided,
        los=los,
        timings=timings,
    )
