import pytest

from modalshift.city import CityModel, Zone
from modalshift.data import data_path
from modalshift.generate import SynthCityParams, generate_synthetic_city
from modalshift.modechoice import load_expert_matrix
from modalshift.population import (
    PopulationConfig,
    ResidentialPreferences,
    HouseholdAgent,
    load_survey,
    synthesize_households,
    make_workers,
    assign_workplaces,
    attach_workplaces,
)


def square_zone(zid, x0, y0, side=1.0, **kw):
    defaults = dict(
        area=side * side,
        residential_area=0.5 * side * side,
        rent_per_m2=0.05,
        pollution=2,
        traffic_restricted=False,
        employment_rate={"services": 0.1},
    )
    defaults.update(kw)
    return Zone(
        id=zid,
        centroid=(x0 + side / 2, y0 + side / 2),
        polygon=((x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)),
        **defaults,
    )


def grid_city(n=2, side=1.0, facilities=(), services=(), networks=None, **zone_kw):
    zones = []
    zid = 1
    for r in range(n):
        for c in range(n):
            zones.append(square_zone(zid, c * side, r * side, side, **zone_kw))
            zid += 1
    return CityModel(
        zones=zones,
        facilities=list(facilities),
        services=list(services),
        networks=networks or {},
        metadata={"name": "test"},
    )


def uniform_prefs(importance=None, facility=None, transport=None, pollution_hard=False, restriction_hard=False):
    imp = {
        "housing_rent": 9,
        "educational": 5,
        "commercial": 5,
        "green_recreational": 5,
        "cultural": 5,
        "remedial": 5,
        "highway": 5,
        "subway_station": 5,
        "bus_stop": 5,
        "brt_stop": 5,
        "pollution": 5,
        "workplace_distance": 5,
        "former_distance": 5,
        "no_restriction": 0,
    }
    if importance:
        imp.update(importance)
    fac = facility or {k: 0.2 for k in ("commercial", "educational", "green_recreational", "remedial", "cultural")}
    tra = transport or {k: 0.25 for k in ("highway", "subway_station", "brt_stop", "bus_stop")}
    return ResidentialPreferences(
        importance=imp,
        facility_weights=fac,
        transport_weights=tra,
        pollution_hard=pollution_hard,
        restriction_hard=restriction_hard,
    )


def make_agent(
    aid=1,
    size=2,
    income=20.0,
    former_zone=1,
    required_area=80.0,
    rent_band=(0.10, 0.40),
    n_cars=1,
    has_child=False,
    prefs=None,
    workplace_zones=(),
    n_employed=1,
):
    if income < 10:
        cat = "<10"
    elif income <= 25:
        cat = "10-25"
    else:
        cat = ">25"
    return HouseholdAgent(
        id=aid,
        size=size,
        member_ages=(30,) * size if not has_child else (30, 10) + (30,) * max(0, size - 2),
        has_child=has_child,
        monthly_income=income,
        income_category=cat,
        former_zone=former_zone,
        n_employed=n_employed,
        professional_categories=("services",) * n_employed,
        n_cars=n_cars,
        required_area=required_area,
        rent_band=rent_band,
        residential_prefs=prefs or uniform_prefs(),
        workplace_zones=tuple(workplace_zones),
    )


@pytest.fixture(scope="session")
def survey():
    return load_survey(data_path("survey_default.json"))


@pytest.fixture(scope="session")
def expert():
    return load_expert_matrix(data_path("expert_scores_default.json"))


@pytest.fixture(scope="session")
def small_city():
    city, manifest = generate_synthetic_city(SynthCityParams(nx=8, ny=8), seed=1)
    return city, manifest


@pytest.fixture(scope="session")
def small_population(small_city, survey):
    city, _ = small_city
    pc = PopulationConfig(zone_ids=city.zone_ids)
    households = synthesize_households(pc, survey, 120, seed=7)
    workers = make_workers(households, survey, pc, seed=7)
    assign_workplaces(workers, city, seed=7)
    attach_workplaces(households, workers)
    return households, workers
