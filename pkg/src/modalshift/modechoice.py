"""Commuting mode choice: per-worker weighted scoring of available modes.

Cost and time criteria are scored dynamically from the OD's level of service
(inverse min-max across the worker's available modes, floored at 0.1);
comfort, security and reliability come from the expert score matrix. The
chosen mode maximizes the preference-weighted sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .city import LOS
from .los import LOSTables
from .population import COMMUTING_CRITERIA, HouseholdAgent, WorkerAgent

MODE_PRECEDENCE = ("car", "subway", "bus", "brt", "taxi", "walk")
LOS_CRITERIA = ("cost", "in_vehicle_time", "out_of_vehicle_time")
EXPERT_CRITERIA = ("comfortability", "security", "reliability")
SCORE_FLOOR = 0.1


class ExpertMatrixError(ValueError):
    pass


class NoModeAvailableError(RuntimeError):
    """The OD pair is isolated: no mode can serve it."""


@dataclass
class ExpertScoreMatrix:
    """Raw 1..10 expert scores per (mode, criterion), normalized per criterion
    so the best mode scores exactly 1."""

    raw: dict[str, dict[str, float]]
    normalized: dict[str, dict[str, float]] = field(init=False)

    def __post_init__(self):
        for mode, row in self.raw.items():
            for crit, v in row.items():
                if not (1.0 <= v <= 10.0):
                    raise ExpertMatrixError(f"score out of 1..10 for mode '{mode}', criterion '{crit}'")
        self.normalized = {}
        for crit in COMMUTING_CRITERIA:
            col_max = max(row[crit] for row in self.raw.values())
            for mode, row in self.raw.items():
                self.normalized.setdefault(mode, {})[crit] = row[crit] / col_max

    def score(self, mode: str, criterion: str) -> float:
        return self.normalized[mode][criterion]


def load_expert_matrix(path) -> ExpertScoreMatrix:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise ExpertMatrixError(f"unsupported schema_version {doc.get('schema_version')!r}")
    modes = doc.get("modes")
    if not isinstance(modes, dict):
        raise ExpertMatrixError("missing field 'modes'")
    raw = {}
    for mode, row in modes.items():
        missing = [c for c in COMMUTING_CRITERIA if c not in row]
        if missing:
            raise ExpertMatrixError(f"mode '{mode}' missing criterion '{missing[0]}'")
        raw[mode] = {c: float(row[c]) for c in COMMUTING_CRITERIA}
    return ExpertScoreMatrix(raw=raw)


@dataclass
class ModeDecision:
    worker_id: int
    chosen: str
    suitability: dict[str, float]
    availability: dict[str, tuple[bool, str]]
    tie: bool
    network_distance_km: float


def _los_score(value: float, vmin: float, vmax: float) -> float:
    if vmax <= vmin:
        return 1.0
    return 1.0 - (1.0 - SCORE_FLOOR) * (value - vmin) / (vmax - vmin)


def criterion_scores(
    worker: WorkerAgent,
    mode: str,
    los_by_mode: dict[str, LOS],
    matrix: ExpertScoreMatrix,
) -> dict[str, float]:
    """Scores in [0, 1] for one available mode, normalized across the worker's
    available modes for this OD."""
    available = {m: l for m, l in los_by_mode.items() if l.available}
    if not available:
        raise NoModeAvailableError(f"no available mode for worker {worker.id}")
    if mode not in available:
        raise ValueError(f"mode '{mode}' is not available for this OD")
    scores: dict[str, float] = {}
    for crit in LOS_CRITERIA:
        values = {m: _los_value(l, crit) for m, l in available.items()}
        vmin = min(values.values())
        vmax = max(values.values())
        scores[crit] = _los_score(values[mode], vmin, vmax)
    for crit in EXPERT_CRITERIA:
        scores[crit] = matrix.score(mode, crit)
    return scores


def _los_value(los: LOS, criterion: str) -> float:
    if criterion == "cost":
        return los.cost
    if criterion == "in_vehicle_time":
        return los.in_vehicle_time
    return los.out_of_vehicle_time


def suitability(worker: WorkerAgent, mode: str, scores: dict[str, float]) -> float:
    """Preference-weighted sum of criterion scores; lies in [0, 1]."""
    return float(sum(worker.mode_prefs[c] * scores[c] for c in COMMUTING_CRITERIA))


def choose_mode(
    worker: WorkerAgent,
    household: HouseholdAgent,
    origin_zone: int,
    los_tables: LOSTables,
    matrix: ExpertScoreMatrix,
) -> ModeDecision:
    """Pick the maximum-suitability mode among those available to the worker."""
    dest = worker.workplace_zone
    if dest is None:
        raise ValueError(f"worker {worker.id} has no workplace assigned")
    availability: dict[str, tuple[bool, str]] = {}
    los_by_mode: dict[str, LOS] = {}
    for mode in MODE_PRECEDENCE:
        los = los_tables.los(mode, origin_zone, dest)
        if mode == "car" and household.n_cars < 1:
            availability[mode] = (False, "no_car")
            continue
        if not los.available:
            reason = "beyond_walk_cutoff" if mode == "walk" else "no_route"
            availability[mode] = (False, reason)
            continue
        availability[mode] = (True, "")
        los_by_mode[mode] = los
    if not los_by_mode:
        raise NoModeAvailableError(f"no available mode for worker {worker.id} ({origin_zone} -> {dest})")
    suit: dict[str, float] = {}
    for mode in los_by_mode:
        scores = criterion_scores(worker, mode, los_by_mode, matrix)
        suit[mode] = suitability(worker, mode, scores)
    best = max(suit.values())
    top = [m for m in MODE_PRECEDENCE if m in suit and suit[m] == best]
    chosen = top[0]
    return ModeDecision(
        worker_id=worker.id,
        chosen=chosen,
        suitability=suit,
        availability=availability,
        tie=len(top) > 1,
        network_distance_km=los_by_mode[chosen].network_distance,
    )
