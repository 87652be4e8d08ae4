import numpy as np
import pytest

from modalshift.city import LOS
from modalshift.los import LOSTables
from modalshift.modechoice import (
    ExpertMatrixError,
    ExpertScoreMatrix,
    NoModeAvailableError,
    choose_mode,
    criterion_scores,
    suitability,
)
from modalshift.population import WorkerAgent

from conftest import make_agent


def _matrix():
    return ExpertScoreMatrix(
        raw={
            m: {
                "cost": 5.0,
                "in_vehicle_time": 5.0,
                "out_of_vehicle_time": 5.0,
                "comfortability": c,
                "security": s,
                "reliability": r,
            }
            for m, (c, s, r) in {
                "walk": (3.0, 5.0, 9.0),
                "car": (10.0, 8.0, 5.0),
                "taxi": (8.0, 7.0, 5.0),
                "bus": (5.0, 6.0, 5.0),
                "brt": (6.0, 6.0, 8.0),
                "subway": (7.0, 8.0, 9.0),
            }.items()
        }
    )


def _worker(prefs=None, wid=1, workplace=2):
    w = {c: 1.0 / 6 for c in ("cost", "in_vehicle_time", "out_of_vehicle_time", "comfortability", "security", "reliability")}
    if prefs:
        w = prefs
    return WorkerAgent(id=wid, household_id=1, gender="male", professional_category="services", mode_prefs=w, workplace_zone=workplace)


def _los(cost, ivt, ovt, dist=5.0):
    return LOS(cost=cost, in_vehicle_time=ivt, out_of_vehicle_time=ovt, network_distance=dist, available=True)


def _tables(per_mode):
    """per_mode: mode -> (cost, ivt, ovt, dist) or None for unavailable."""
    zone_ids = [1, 2]
    index = {1: 0, 2: 1}
    t = LOSTables(zone_ids, index, {}, {}, {}, {}, {})
    for mode, rec in per_mode.items():
        av = np.zeros((2, 2), dtype=bool)
        cost = np.zeros((2, 2))
        ivt = np.zeros((2, 2))
        ovt = np.zeros((2, 2))
        dist = np.zeros((2, 2))
        if rec is not None:
            av[:, :] = True
            cost[:, :], ivt[:, :], ovt[:, :], dist[:, :] = rec
        t.available[mode] = av
        t.cost[mode] = cost
        t.ivt[mode] = ivt
        t.ovt[mode] = ovt
        t.dist[mode] = dist
    return t


def test_expert_matrix_normalizes_column_max_to_one():
    m = _matrix()
    for crit in ("comfortability", "security", "reliability"):
        col = [m.score(mode, crit) for mode in m.raw]
        assert max(col) == pytest.approx(1.0, rel=1e-12)
        assert all(0 < v <= 1 for v in col)
    assert m.score("car", "comfortability") == pytest.approx(1.0)
    assert m.score("walk", "comfortability") == pytest.approx(0.3)


def test_expert_matrix_rejects_out_of_scale():
    with pytest.raises(ExpertMatrixError, match="out of 1..10"):
        ExpertScoreMatrix(raw={"car": {c: 11.0 for c in ("cost", "in_vehicle_time", "out_of_vehicle_time", "comfortability", "security", "reliability")}})


def test_single_available_mode_scores_one():
    worker = _worker()
    los = {"bus": _los(2.0, 30.0, 10.0)}
    scores = criterion_scores(worker, "bus", los, _matrix())
    assert scores["cost"] == 1.0
    assert scores["in_vehicle_time"] == 1.0
    assert scores["out_of_vehicle_time"] == 1.0


def test_minmax_with_floor():
    worker = _worker()
    los = {"bus": _los(10.0, 30.0, 10.0), "taxi": _los(20.0, 30.0, 10.0)}
    sb = criterion_scores(worker, "bus", los, _matrix())
    st = criterion_scores(worker, "taxi", los, _matrix())
    assert sb["cost"] == pytest.approx(1.0, rel=1e-12)
    assert st["cost"] == pytest.approx(0.1, rel=1e-12)
    # midpoint value lands halfway between floor and 1
    los["car"] = _los(15.0, 30.0, 10.0)
    sc = criterion_scores(worker, "car", los, _matrix())
    assert sc["cost"] == pytest.approx(0.55, rel=1e-12)


def test_expert_rows_pass_through():
    worker = _worker()
    m = _matrix()
    los = {"bus": _los(2.0, 30.0, 10.0), "car": _los(5.0, 20.0, 8.0)}
    s = criterion_scores(worker, "car", los, m)
    assert s["comfortability"] == m.score("car", "comfortability")
    assert s["security"] == m.score("car", "security")
    assert s["reliability"] == m.score("car", "reliability")


def test_no_available_mode_error():
    worker = _worker()
    with pytest.raises(NoModeAvailableError):
        criterion_scores(worker, "bus", {"bus": LOS.unavailable()}, _matrix())


# ---------------------------------------------------------------------------
# suitability
# ---------------------------------------------------------------------------


def test_suitability_weighted_sum():
    worker = _worker(prefs={"cost": 0.5, "in_vehicle_time": 0.5, "out_of_vehicle_time": 0.0, "comfortability": 0.0, "security": 0.0, "reliability": 0.0})
    scores = {"cost": 0.8, "in_vehicle_time": 0.2, "out_of_vehicle_time": 0.0, "comfortability": 0.0, "security": 0.0, "reliability": 0.0}
    assert suitability(worker, "bus", scores) == pytest.approx(0.5, rel=1e-12)


def test_suitability_constant_scores():
    worker = _worker(prefs={"cost": 0.3, "in_vehicle_time": 0.3, "out_of_vehicle_time": 0.1, "comfortability": 0.1, "security": 0.1, "reliability": 0.1})
    scores = {c: 0.7 for c in worker.mode_prefs}
    assert suitability(worker, "bus", scores) == pytest.approx(0.7, rel=1e-12)


def test_suitability_basis_vector():
    worker = _worker(prefs={"cost": 1.0, "in_vehicle_time": 0.0, "out_of_vehicle_time": 0.0, "comfortability": 0.0, "security": 0.0, "reliability": 0.0})
    scores = {c: 0.123 for c in worker.mode_prefs}
    scores["cost"] = 0.9
    assert suitability(worker, "bus", scores) == pytest.approx(0.9, rel=1e-12)


# ---------------------------------------------------------------------------
# choose_mode
# ---------------------------------------------------------------------------


def test_zero_car_household_never_drives():
    tables = _tables({"car": (1.0, 10.0, 5.0, 8.0), "bus": (0.5, 30.0, 15.0, 8.0), "taxi": (3.0, 12.0, 6.0, 8.0)})
    hh = make_agent(n_cars=0)
    worker = _worker()
    d = choose_mode(worker, hh, 1, tables, _matrix())
    assert d.chosen != "car"
    assert d.availability["car"] == (False, "no_car")


def test_walking_unavailable_beyond_cutoff():
    # LOS builder already excludes walk > 5 km; availability flag reflects that
    tables = _tables({"walk": None, "bus": (0.5, 40.0, 20.0, 12.0)})
    hh = make_agent(n_cars=0)
    worker = _worker()
    d = choose_mode(worker, hh, 1, tables, _matrix())
    assert d.chosen == "bus"
    assert d.availability["walk"] == (False, "beyond_walk_cutoff")


def test_cost_minded_worker_takes_cheapest():
    tables = _tables(
        {
            "taxi": (1.0, 12.0, 6.0, 8.0),
            "bus": (2.0, 30.0, 15.0, 8.0),
            "car": (3.0, 10.0, 5.0, 8.0),
        }
    )
    hh = make_agent(n_cars=1)
    worker = _worker(prefs={"cost": 1.0, "in_vehicle_time": 0.0, "out_of_vehicle_time": 0.0, "comfortability": 0.0, "security": 0.0, "reliability": 0.0})
    d = choose_mode(worker, hh, 1, tables, _matrix())
    assert d.chosen == "taxi"


def test_chosen_mode_always_available():
    rng = np.random.default_rng(0)
    for _ in range(50):
        per_mode = {}
        for mode in ("car", "subway", "bus", "brt", "taxi", "walk"):
            if rng.random() < 0.3:
                per_mode[mode] = None
            else:
                per_mode[mode] = (float(rng.uniform(0.5, 5)), float(rng.uniform(5, 60)), float(rng.uniform(2, 30)), 4.0)
        if all(v is None for v in per_mode.values()):
            continue
        hh = make_agent(n_cars=int(rng.integers(0, 3)))
        worker = _worker()
        try:
            d = choose_mode(worker, hh, 1, _tables(per_mode), _matrix())
        except NoModeAvailableError:
            assert per_mode.get("car") is not None or hh.n_cars == 0
            continue
        ok, _reason = d.availability[d.chosen]
        assert ok
        assert d.chosen in d.suitability
        assert d.suitability[d.chosen] == max(d.suitability.values())


def test_argmax_scale_invariance():
    tables = _tables(
        {
            "car": (3.0, 10.0, 5.0, 8.0),
            "subway": (0.5, 14.0, 12.0, 8.0),
            "bus": (0.3, 30.0, 15.0, 8.0),
        }
    )
    hh = make_agent(n_cars=1)
    rng = np.random.default_rng(11)
    crits = ("cost", "in_vehicle_time", "out_of_vehicle_time", "comfortability", "security", "reliability")
    for _ in range(300):
        raw = rng.uniform(0.01, 5.0, size=6)
        scale = float(rng.uniform(0.1, 50.0))
        w1 = dict(zip(crits, raw / raw.sum()))
        w2 = dict(zip(crits, (raw * scale) / (raw * scale).sum()))
        d1 = choose_mode(_worker(prefs=w1), hh, 1, tables, _matrix())
        d2 = choose_mode(_worker(prefs=w2), hh, 1, tables, _matrix())
        assert d1.chosen == d2.chosen


def test_improving_chosen_mode_keeps_choice():
    base = {
        "car": (3.0, 10.0, 5.0, 8.0),
        "subway": (0.5, 14.0, 12.0, 8.0),
        "bus": (0.3, 30.0, 15.0, 8.0),
    }
    hh = make_agent(n_cars=1)
    worker = _worker()
    d1 = choose_mode(worker, hh, 1, _tables(base), _matrix())
    improved = dict(base)
    c, i, o, dist = improved[d1.chosen]
    improved[d1.chosen] = (c * 0.5, i * 0.8, o * 0.8, dist)
    d2 = choose_mode(worker, hh, 1, _tables(improved), _matrix())
    assert d2.chosen == d1.chosen


def test_decisions_independent_of_worker_order():
    tables = _tables({"car": (3.0, 10.0, 5.0, 8.0), "bus": (0.3, 30.0, 15.0, 8.0)})
    hh = make_agent(n_cars=1)
    rng = np.random.default_rng(5)
    crits = ("cost", "in_vehicle_time", "out_of_vehicle_time", "comfortability", "security", "reliability")
    workers = []
    for i in range(40):
        raw = rng.uniform(0.01, 5.0, size=6)
        workers.append(_worker(prefs=dict(zip(crits, raw / raw.sum())), wid=i + 1))
    d_fwd = {w.id: choose_mode(w, hh, 1, tables, _matrix()).chosen for w in workers}
    d_rev = {w.id: choose_mode(w, hh, 1, tables, _matrix()).chosen for w in reversed(workers)}
    assert d_fwd == d_rev
