"""Monte Carlo synthesis of tenant households, their employed members, and
preference draws from a stated-preference survey summary.

Attributes are generated sequentially per agent (income and size first, then
former zone, employment, cars, required area, then preferences), each agent
on its own seed substream so synthesis is order- and scheduling-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._rng import TAG_HOUSEHOLD, TAG_PREFS, TAG_WORKER, TAG_WORKPLACE, substream
from .city import CityModel

RESIDENTIAL_CRITERIA = (
    "housing_rent",
    "educational",
    "commercial",
    "green_recreational",
    "cultural",
    "remedial",
    "highway",
    "subway_station",
    "bus_stop",
    "pollution",
    "workplace_distance",
    "former_distance",
    "no_restriction",
)
COMMUTING_CRITERIA = (
    "cost",
    "in_vehicle_time",
    "out_of_vehicle_time",
    "comfortability",
    "security",
    "reliability",
)
FACILITY_PREF_CRITERIA = ("commercial", "educational", "green_recreational", "remedial", "cultural")
TRANSPORT_PREF_CRITERIA = ("highway", "subway_station", "brt_stop", "bus_stop")

SIZE_CLASSES = ("single", "couple", "3-4", ">4")
INCOME_CLASSES = ("<10", "10-25", ">25")
CAR_CLASSES = ("0", "1", ">1")


class ConfigError(ValueError):
    pass


@dataclass
class ResidentialPreferences:
    importance: dict[str, int]
    facility_weights: dict[str, float]
    transport_weights: dict[str, float]
    pollution_hard: bool
    restriction_hard: bool


@dataclass
class HouseholdAgent:
    id: int
    size: int
    member_ages: tuple[int, ...]
    has_child: bool
    monthly_income: float
    income_category: str
    former_zone: int
    n_employed: int
    professional_categories: tuple[str, ...]
    n_cars: int
    required_area: float
    rent_band: tuple[float, float]
    residential_prefs: ResidentialPreferences | None = None
    workplace_zones: tuple[int, ...] = ()

    @property
    def size_category(self) -> str:
        if self.size == 1:
            return "single"
        if self.size == 2:
            return "couple"
        if self.size <= 4:
            return "3-4"
        return ">4"

    @property
    def car_category(self) -> str:
        if self.n_cars == 0:
            return "0"
        if self.n_cars == 1:
            return "1"
        return ">1"


@dataclass
class WorkerAgent:
    id: int
    household_id: int
    gender: str
    professional_category: str
    mode_prefs: dict[str, float]
    workplace_zone: int | None = None


@dataclass
class SurveySummary:
    """Fraction of households rating each criterion 'important' (> 4 of 0..9),
    per marginal socio-economic category."""

    rows: dict[tuple[str, str], dict[str, float]]
    percentages: dict[tuple[str, str], float]

    def fraction(self, attribute: str, category: str, criterion: str) -> float:
        try:
            row = self.rows[(attribute, category)]
        except KeyError:
            raise ConfigError(f"missing category row ('{attribute}', '{category}') in survey") from None
        if criterion == "brt_stop" and "brt_stop" not in row:
            criterion = "bus_stop"
        try:
            return row[criterion]
        except KeyError:
            raise ConfigError(f"survey row ('{attribute}', '{category}') lacks criterion '{criterion}'") from None


def load_survey(path) -> SurveySummary:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise ConfigError(f"survey: unsupported schema_version {doc.get('schema_version')!r}")
    attrs = doc.get("attributes")
    if not isinstance(attrs, dict):
        raise ConfigError("survey: missing field 'attributes'")
    rows: dict[tuple[str, str], dict[str, float]] = {}
    pcts: dict[tuple[str, str], float] = {}
    for attribute, categories in attrs.items():
        for category, rec in categories.items():
            fractions = {}
            for block in ("residential", "commuting"):
                if block not in rec:
                    raise ConfigError(f"survey: row ('{attribute}', '{category}') missing field '{block}'")
                for crit, pct in rec[block].items():
                    pct = float(pct)
                    if not (0.0 <= pct <= 100.0):
                        raise ConfigError(
                            f"survey: row ('{attribute}', '{category}') criterion '{crit}' outside [0, 100]"
                        )
                    fractions[crit] = pct / 100.0
            rows[(attribute, category)] = fractions
            pcts[(attribute, category)] = float(rec.get("percentage", 0.0)) / 100.0
    need = {("size", c) for c in SIZE_CLASSES} | {("income", c) for c in INCOME_CLASSES} | {("cars", c) for c in CAR_CLASSES}
    missing = need - set(rows)
    if missing:
        raise ConfigError(f"survey: missing category row {sorted(missing)[0]}")
    return SurveySummary(rows=rows, percentages=pcts)


@dataclass
class PopulationConfig:
    zone_ids: list[int] = field(default_factory=list)
    former_zone_weights: list[float] | None = None
    size_probs: dict[str, float] = field(
        default_factory=lambda: {"single": 0.056, "couple": 0.281, "3-4": 0.548, ">4": 0.115}
    )
    income_probs: dict[str, float] = field(
        default_factory=lambda: {"<10": 0.176, "10-25": 0.631, ">25": 0.193}
    )
    income_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {"<10": (4.0, 10.0), "10-25": (10.0, 25.0), ">25": (25.0, 45.0)}
    )
    car_probs: dict[str, float] = field(default_factory=lambda: {"0": 0.108, "1": 0.688, ">1": 0.204})
    n_employed_probs: dict[int, float] = field(default_factory=lambda: {0: 0.05, 1: 0.75, 2: 0.20})
    professional_probs: dict[str, float] = field(
        default_factory=lambda: {"services": 0.40, "commercial": 0.25, "industrial": 0.20, "administrative": 0.15}
    )
    p_female: float = 0.31
    child_prob: float = 0.80
    child_age_limit: int = 18
    adult_age_range: tuple[int, int] = (23, 67)
    area_base_m2: float = 35.0
    area_per_member_m2: float = 15.0
    area_noise_m2: float = 10.0
    rent_min_frac_range: tuple[float, float] = (0.10, 0.25)
    rent_max_frac_range: tuple[float, float] = (0.30, 0.50)
    hard_threshold: int = 8

    def validate(self) -> None:
        if not self.zone_ids:
            raise ConfigError("inconsistent config: zone_ids is empty")
        for name, probs in (
            ("size", self.size_probs),
            ("income", self.income_probs),
            ("cars", self.car_probs),
            ("n_employed", self.n_employed_probs),
            ("professional", self.professional_probs),
        ):
            total = sum(probs.values())
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"inconsistent config: {name} probabilities sum to {total:.6f}")
            if any(p < 0 for p in probs.values()):
                raise ConfigError(f"inconsistent config: negative probability in {name}")
        if self.former_zone_weights is not None and len(self.former_zone_weights) != len(self.zone_ids):
            raise ConfigError("inconsistent config: former_zone_weights length differs from zone_ids")


def _pick(rng: np.random.Generator, probs: dict) -> object:
    keys = list(probs)
    cum = np.cumsum([probs[k] for k in keys])
    i = int(np.searchsorted(cum, rng.random(), side="right"))
    return keys[min(i, len(keys) - 1)]


def _draw_importance(rng: np.random.Generator, fraction: float) -> int:
    if rng.random() < fraction:
        return int(rng.integers(5, 10))
    return int(rng.integers(0, 5))


def draw_preferences(agent: HouseholdAgent, survey: SurveySummary, rng: np.random.Generator, config: PopulationConfig) -> ResidentialPreferences:
    """Draw the 0..9 importance per residential criterion and derive weights.

    The joint category fraction is the mean of the three marginal survey
    fractions (size, income, cars) for the agent.
    """
    cats = (("size", agent.size_category), ("income", agent.income_category), ("cars", agent.car_category))
    importance: dict[str, int] = {}
    for crit in RESIDENTIAL_CRITERIA + ("brt_stop",):
        frac = sum(survey.fraction(a, c, crit) for a, c in cats) / 3.0
        importance[crit] = _draw_importance(rng, frac)
    facility = _normalize({k: float(importance[k]) for k in FACILITY_PREF_CRITERIA})
    transport = _normalize({k: float(importance[k]) for k in TRANSPORT_PREF_CRITERIA})
    return ResidentialPreferences(
        importance=importance,
        facility_weights=facility,
        transport_weights=transport,
        pollution_hard=importance["pollution"] >= config.hard_threshold,
        restriction_hard=importance["no_restriction"] >= config.hard_threshold,
    )


def _normalize(weights: dict[str, float]) -> dict[str, float]:
    total = sum(weights.values())
    if total <= 0:
        return {k: 1.0 / len(weights) for k in weights}
    return {k: v / total for k, v in weights.items()}


def draw_mode_prefs(survey: SurveySummary, agent: HouseholdAgent, rng: np.random.Generator) -> dict[str, float]:
    cats = (("size", agent.size_category), ("income", agent.income_category), ("cars", agent.car_category))
    importance = {}
    for crit in COMMUTING_CRITERIA:
        frac = sum(survey.fraction(a, c, crit) for a, c in cats) / 3.0
        importance[crit] = float(_draw_importance(rng, frac))
    return _normalize(importance)


def synthesize_households(config: PopulationConfig, survey: SurveySummary, n: int, seed: int) -> list[HouseholdAgent]:
    """Generate exactly n tenant-household agents, deterministic per seed."""
    config.validate()
    zone_ids = list(config.zone_ids)
    former_cum = None
    if config.former_zone_weights is not None:
        w = np.asarray(config.former_zone_weights, dtype=float)
        if w.sum() <= 0:
            raise ConfigError("inconsistent config: former_zone_weights sum to 0")
        former_cum = np.cumsum(w / w.sum())
    agents: list[HouseholdAgent] = []
    for idx in range(n):
        rng = substream(seed, TAG_HOUSEHOLD, idx)
        income_cat = _pick(rng, config.income_probs)
        lo, hi = config.income_ranges[income_cat]
        income = float(rng.uniform(lo, hi))
        size_cat = _pick(rng, config.size_probs)
        if size_cat == "single":
            size = 1
        elif size_cat == "couple":
            size = 2
        elif size_cat == "3-4":
            size = int(rng.integers(3, 5))
        else:
            size = int(rng.integers(5, 8))
        a_lo, a_hi = config.adult_age_range
        ages = [int(rng.integers(a_lo, a_hi + 1))]
        if size >= 2:
            ages.append(int(np.clip(ages[0] + rng.integers(-4, 5), 21, a_hi)))
        for _ in range(size - 2):
            if rng.random() < config.child_prob:
                ages.append(int(rng.integers(1, config.child_age_limit)))
            else:
                ages.append(int(rng.integers(21, a_hi + 1)))
        if former_cum is None:
            former = zone_ids[int(rng.integers(0, len(zone_ids)))]
        else:
            fi = int(np.searchsorted(former_cum, rng.random(), side="right"))
            former = zone_ids[min(fi, len(zone_ids) - 1)]
        n_employed = min(int(_pick(rng, config.n_employed_probs)), size)
        prof = tuple(str(_pick(rng, config.professional_probs)) for _ in range(n_employed))
        car_cat = _pick(rng, config.car_probs)
        if car_cat == "0":
            n_cars = 0
        elif car_cat == "1":
            n_cars = 1
        else:
            n_cars = 2 if rng.random() < 0.8 else 3
        area = max(20.0, config.area_base_m2 + config.area_per_member_m2 * size + float(rng.uniform(-config.area_noise_m2, config.area_noise_m2)))
        min_frac = float(rng.uniform(*config.rent_min_frac_range))
        max_frac = float(rng.uniform(*config.rent_max_frac_range))
        agent = HouseholdAgent(
            id=idx + 1,
            size=size,
            member_ages=tuple(ages),
            has_child=any(a < config.child_age_limit for a in ages),
            monthly_income=income,
            income_category=income_cat,
            former_zone=former,
            n_employed=n_employed,
            professional_categories=prof,
            n_cars=n_cars,
            required_area=area,
            rent_band=(min_frac, max_frac),
        )
        agent.residential_prefs = draw_preferences(agent, survey, substream(seed, TAG_PREFS, idx), config)
        agents.append(agent)
    return agents


def make_workers(households: list[HouseholdAgent], survey: SurveySummary, config: PopulationConfig, seed: int) -> list[WorkerAgent]:
    """One worker agent per employed household member, with commuting prefs."""
    workers: list[WorkerAgent] = []
    wid = 1
    for hh in households:
        for k in range(hh.n_employed):
            rng = substream(seed, TAG_WORKER, hh.id, k)
            workers.append(
                WorkerAgent(
                    id=wid,
                    household_id=hh.id,
                    gender="female" if rng.random() < config.p_female else "male",
                    professional_category=hh.professional_categories[k],
                    mode_prefs=draw_mode_prefs(survey, hh, rng),
                )
            )
            wid += 1
    return workers


def assign_workplaces(workers: list[WorkerAgent], city: CityModel, seed: int) -> list[WorkerAgent]:
    """Draw each worker's workplace zone proportional to the zone employment
    rate for the worker's professional category."""
    zone_ids = city.zone_ids
    cum_by_cat: dict[str, np.ndarray] = {}
    for w in workers:
        cat = w.professional_category
        if cat not in cum_by_cat:
            rates = np.array([city.zone(z).employment_rate.get(cat, 0.0) for z in zone_ids], dtype=float)
            total = rates.sum()
            if total <= 0:
                raise ConfigError(f"no employment available for category '{cat}'")
            cum_by_cat[cat] = np.cumsum(rates / total)
        rng = substream(seed, TAG_WORKPLACE, w.id)
        zi = int(np.searchsorted(cum_by_cat[cat], rng.random(), side="right"))
        w.workplace_zone = zone_ids[min(zi, len(zone_ids) - 1)]
    return workers


def attach_workplaces(households: list[HouseholdAgent], workers: list[WorkerAgent]) -> None:
    """Backfill each household's employed members' workplace zones."""
    by_hh: dict[int, list[int]] = {}
    for w in workers:
        if w.workplace_zone is not None:
            by_hh.setdefault(w.household_id, []).append(w.workplace_zone)
    for hh in households:
        hh.workplace_zones = tuple(by_hh.get(hh.id, ()))
