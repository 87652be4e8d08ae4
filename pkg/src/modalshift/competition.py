"""Monthly-period competition allocating each agent to one zone from its
alternative set, under per-period zone capacities and the household priority
rule (fewer members except singles, higher income, no child).

Allocation is sequential across rounds (capacity is shared state) but every
random tie-break is keyed on (seed, period, zone, agent id), so the outcome
is a pure function of the inputs and invariant to agent ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import TAG_PERIOD, TAG_TIEBREAK, stable_u01
from .city import CityModel, zone_distance
from .population import HouseholdAgent
from .residential import AlternativeSet

N_PERIODS = 12
_SINGLE_SENTINEL = 10**9


class AllocationError(ValueError):
    pass


@dataclass
class PeriodPlan:
    assignment: dict[int, int]  # agent id -> period (0-based)
    monthly_weights: tuple[float, ...]
    equilibrium: tuple[float, ...]

    def validate(self) -> None:
        if len(self.monthly_weights) != N_PERIODS or len(self.equilibrium) != N_PERIODS:
            raise AllocationError(f"need {N_PERIODS} monthly weights and equilibrium values")
        if abs(sum(self.monthly_weights) - 1.0) > 1e-9:
            raise AllocationError("monthly weights must sum to 1")
        if any(e <= 0 for e in self.equilibrium):
            raise AllocationError("equilibrium values must be positive")


@dataclass
class CapacityTable:
    zone_ids: list[int]
    initial: np.ndarray  # (zones, periods) int
    remaining: np.ndarray

    def total_initial(self, zone_id: int) -> int:
        return int(self.initial[self.zone_ids.index(zone_id)].sum())


@dataclass
class Contest:
    period: int
    round: int
    zone: int
    contenders: tuple[int, ...]
    winners: tuple[int, ...]


@dataclass
class AllocationResult:
    housed: dict[int, int]
    unhoused: set[int]
    audit: list[Contest] = field(default_factory=list)
    period_of: dict[int, int] = field(default_factory=dict)


def build_period_plan(
    agent_ids: list[int],
    seed: int,
    monthly_weights: tuple[float, ...] | None = None,
    equilibrium: tuple[float, ...] | None = None,
) -> PeriodPlan:
    """Distribute agents over the 12 periods proportional to monthly weights."""
    weights = tuple(monthly_weights) if monthly_weights else tuple([1.0 / N_PERIODS] * N_PERIODS)
    eq = tuple(equilibrium) if equilibrium else tuple([1.0] * N_PERIODS)
    plan = PeriodPlan(assignment={}, monthly_weights=weights, equilibrium=eq)
    plan.validate()
    cum = np.cumsum(weights)
    for aid in agent_ids:
        u = stable_u01(seed, TAG_PERIOD, aid)
        p = int(np.searchsorted(cum, u, side="right"))
        plan.assignment[aid] = min(p, N_PERIODS - 1)
    return plan


def build_capacity_table(city: CityModel, n_agents: int, equilibrium: tuple[float, ...]) -> CapacityTable:
    """capacity[zone, period] = round(res-area share * n_agents * equilibrium_p),
    rounded half-up, floored at 0."""
    zone_ids = city.zone_ids
    res = np.array([city.zone(z).residential_area for z in zone_ids], dtype=float)
    total = res.sum()
    if total <= 0:
        raise AllocationError("city has no residential area")
    share = res / total
    cap = np.zeros((len(zone_ids), N_PERIODS), dtype=np.int64)
    for p, eq in enumerate(equilibrium):
        cap[:, p] = np.floor(share * n_agents * eq + 0.5).astype(np.int64)
    cap = np.maximum(cap, 0)
    return CapacityTable(zone_ids=zone_ids, initial=cap.copy(), remaining=cap)


def priority_compare(a: HouseholdAgent, b: HouseholdAgent) -> int:
    """-1 if a beats b, +1 if b beats a, 0 on a full tie.

    Fewer members wins, except singles forfeit the size advantage entirely;
    then higher income; then childless before with-child.
    """
    ka = _priority_key(a)
    kb = _priority_key(b)
    if ka < kb:
        return -1
    if kb < ka:
        return 1
    return 0


def _priority_key(agent: HouseholdAgent) -> tuple:
    eff_size = agent.size if agent.size >= 2 else _SINGLE_SENTINEL
    return (eff_size, -agent.monthly_income, 1 if agent.has_child else 0)


def allocate(
    city: CityModel,
    agents: list[HouseholdAgent],
    alternatives: dict[int, AlternativeSet],
    plan: PeriodPlan,
    capacities: CapacityTable,
    seed: int,
    carry_over_capacity: bool = False,
) -> AllocationResult:
    """Run the period-by-period competition.

    Agents order their alternatives by distance from the former residence and
    demand the first with remaining capacity; over-demanded zones hold a
    contest decided by ``priority_compare`` with seeded tie-breaks. Agents
    exhausting all alternatives roll into the next period; after the last
    period they stay unhoused.
    """
    plan.validate()
    by_id = {a.id: a for a in agents}
    missing = [aid for aid in by_id if aid not in plan.assignment]
    if missing:
        raise AllocationError(f"period plan does not cover agent {missing[0]}")
    zrow = {z: k for k, z in enumerate(capacities.zone_ids)}
    ordered: dict[int, list[int]] = {}
    for a in agents:
        alts = alternatives.get(a.id)
        zlist = alts.zone_ids() if alts else []
        ordered[a.id] = sorted(zlist, key=lambda z: (zone_distance(city, z, a.former_zone), z))
    result = AllocationResult(housed={}, unhoused=set())
    carryover: list[int] = []
    for period in range(N_PERIODS):
        entrants = sorted([aid for aid, p in plan.assignment.items() if p == period]) + carryover
        for aid in entrants:
            result.period_of[aid] = period
        carryover = []
        pointer = {aid: 0 for aid in entrants}
        active = [aid for aid in entrants if ordered[aid]]
        exhausted = [aid for aid in entrants if not ordered[aid]]
        rnd = 0
        while active:
            demand: dict[int, list[int]] = {}
            for aid in active:
                demand.setdefault(ordered[aid][pointer[aid]], []).append(aid)
            next_active: list[int] = []
            for zone in sorted(demand):
                contenders = demand[zone]
                cap = int(capacities.remaining[zrow[zone], period])
                if len(contenders) <= cap:
                    winners = contenders
                else:
                    ranked = sorted(
                        contenders,
                        key=lambda aid: _priority_key(by_id[aid]) + (stable_u01(seed, TAG_TIEBREAK, period, zone, aid), aid),
                    )
                    winners = ranked[:cap]
                    result.audit.append(
                        Contest(
                            period=period,
                            round=rnd,
                            zone=zone,
                            contenders=tuple(sorted(contenders)),
                            winners=tuple(sorted(winners)),
                        )
                    )
                for aid in winners:
                    result.housed[aid] = zone
                capacities.remaining[zrow[zone], period] -= len(winners)
                for aid in contenders:
                    if aid in result.housed:
                        continue
                    pointer[aid] += 1
                    if pointer[aid] >= len(ordered[aid]):
                        exhausted.append(aid)
                    else:
                        next_active.append(aid)
            active = sorted(next_active)
            rnd += 1
        if carry_over_capacity and period + 1 < N_PERIODS:
            capacities.remaining[:, period + 1] += capacities.remaining[:, period]
            capacities.remaining[:, period] = 0
        if period + 1 < N_PERIODS:
            carryover = sorted(exhausted)
        else:
            result.unhoused.update(exhausted)
    return result
