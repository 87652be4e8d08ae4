"""CSV report writers and the run manifest.

All writers use fixed float formatting and sorted row order so outputs are
byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

from .city import CityModel
from .competition import AllocationResult
from .modechoice import MODE_PRECEDENCE, ModeDecision
from .pipeline import RunResult
from .population import HouseholdAgent, WorkerAgent
from .residential import AlternativeSet
from .scenario import RunView, ShiftReport, build_shift_report, distance_class


def _fmt(x: float, nd: int = 6) -> str:
    return f"{x:.{nd}f}"


def write_population_csv(path, households: list[HouseholdAgent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "agent_id",
                "size",
                "size_category",
                "member_ages",
                "has_child",
                "monthly_income",
                "income_category",
                "former_zone",
                "n_employed",
                "professional_categories",
                "n_cars",
                "car_category",
                "required_area_m2",
                "rent_min_frac",
                "rent_max_frac",
                "pollution_hard",
                "restriction_hard",
            ]
        )
        for a in households:
            prefs = a.residential_prefs
            w.writerow(
                [
                    a.id,
                    a.size,
                    a.size_category,
                    "|".join(str(x) for x in a.member_ages),
                    int(a.has_child),
                    _fmt(a.monthly_income),
                    a.income_category,
                    a.former_zone,
                    a.n_employed,
                    "|".join(a.professional_categories),
                    a.n_cars,
                    a.car_category,
                    _fmt(a.required_area),
                    _fmt(a.rent_band[0]),
                    _fmt(a.rent_band[1]),
                    int(prefs.pollution_hard) if prefs else "",
                    int(prefs.restriction_hard) if prefs else "",
                ]
            )


def write_workers_csv(path, workers: list[WorkerAgent]) -> None:
    header = ["worker_id", "household_id", "gender", "professional_category", "workplace_zone"]
    pref_cols = sorted(workers[0].mode_prefs) if workers else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header + [f"pref_{c}" for c in pref_cols])
        for a in workers:
            w.writerow(
                [a.id, a.household_id, a.gender, a.professional_category, a.workplace_zone if a.workplace_zone else ""]
                + [_fmt(a.mode_prefs[c]) for c in pref_cols]
            )


def write_assignments_csv(path, allocation: AllocationResult, households: list[HouseholdAgent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "period", "housed_zone"])
        for a in households:
            zone = allocation.housed.get(a.id, "")
            w.writerow([a.id, allocation.period_of.get(a.id, ""), zone])


def write_unhoused_csv(path, allocation: AllocationResult, households: list[HouseholdAgent]) -> None:
    by_id = {a.id: a for a in households}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "size", "monthly_income", "income_category", "former_zone"])
        for aid in sorted(allocation.unhoused):
            a = by_id[aid]
            w.writerow([a.id, a.size, _fmt(a.monthly_income), a.income_category, a.former_zone])


def write_audit_csv(path, allocation: AllocationResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "round", "zone", "n_contenders", "n_winners", "contenders", "winners"])
        for c in allocation.audit:
            w.writerow(
                [
                    c.period,
                    c.round,
                    c.zone,
                    len(c.contenders),
                    len(c.winners),
                    "|".join(str(x) for x in c.contenders),
                    "|".join(str(x) for x in c.winners),
                ]
            )


def write_alternatives_csv(path, alternatives: dict[int, AlternativeSet]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "rank", "zone_id", "objectives"])
        for aid in sorted(alternatives):
            for rank, (zid, ov) in enumerate(alternatives[aid].alternatives):
                packed = ";".join(f"{c}={_fmt(v)}:{d}" for c, v, d in ov.entries)
                w.writerow([aid, rank, zid, packed])


def write_decisions_csv(
    path,
    decisions: dict[int, ModeDecision],
    workers: list[WorkerAgent],
    allocation: AllocationResult,
) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["worker_id", "household_id", "gender", "origin_zone", "workplace_zone", "chosen_mode",
             "network_distance_km", "distance_class", "tie"]
        )
        for a in workers:
            d = decisions.get(a.id)
            if d is None:
                continue
            origin = allocation.housed.get(a.household_id, "")
            w.writerow(
                [
                    a.id,
                    a.household_id,
                    a.gender,
                    origin,
                    a.workplace_zone,
                    d.chosen,
                    _fmt(d.network_distance_km),
                    distance_class(d.network_distance_km),
                    int(d.tie),
                ]
            )


def write_housing_csv(path, allocation: AllocationResult, city: CityModel) -> None:
    counts: dict[int, int] = {}
    for zid in allocation.housed.values():
        counts[zid] = counts.get(zid, 0) + 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone_id", "centroid_x", "centroid_y", "n_households"])
        for z in city.zones:
            w.writerow([z.id, _fmt(z.centroid[0]), _fmt(z.centroid[1]), counts.get(z.id, 0)])


def mode_share_rows(
    decisions: dict[int, ModeDecision],
    workers: list[WorkerAgent],
    households: list[HouseholdAgent],
) -> list[dict]:
    """Mode-share table rows: category x per-mode percent, rows close to 100."""
    hh = {a.id: a for a in households}
    groups: dict[tuple[str, str], list[str]] = {}
    for a in workers:
        d = decisions.get(a.id)
        if d is None:
            continue
        h = hh[a.household_id]
        cats = [
            ("gender", a.gender),
            ("size", h.size_category),
            ("income", h.income_category),
            ("cars", h.car_category),
            ("distance", distance_class(d.network_distance_km)),
            ("total", "all"),
        ]
        for key in cats:
            groups.setdefault(key, []).append(d.chosen)
    order = {
        "gender": ("female", "male"),
        "size": ("single", "couple", "3-4", ">4"),
        "income": ("<10", "10-25", ">25"),
        "cars": ("0", "1", ">1"),
        "distance": ("<5", "5-15", ">15"),
        "total": ("all",),
    }
    total_n = sum(1 for a in workers if a.id in decisions)
    rows = []
    for attr, cats in order.items():
        for cat in cats:
            chosen = groups.get((attr, cat))
            if chosen is None:
                continue
            n = len(chosen)
            shares = {m: 100.0 * sum(1 for c in chosen if c == m) / n for m in MODE_PRECEDENCE}
            rows.append(
                {
                    "attribute": attr,
                    "category": cat,
                    "n": n,
                    "percentage": 100.0 * n / total_n if total_n else 0.0,
                    "shares": shares,
                }
            )
    return rows


def write_mode_share_csv(path, decisions, workers, households) -> None:
    rows = mode_share_rows(decisions, workers, households)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["attribute", "category", "n_workers", "percentage"] + [f"share_{m}" for m in MODE_PRECEDENCE])
        for r in rows:
            w.writerow(
                [r["attribute"], r["category"], r["n"], _fmt(r["percentage"], 4)]
                + [_fmt(r["shares"][m], 4) for m in MODE_PRECEDENCE]
            )


def write_shift_csv(path, report: ShiftReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["attribute", "category", "n_workers", "percentage", "relocated_pct"]
            + [f"delta_{m}" for m in MODE_PRECEDENCE]
        )
        for r in report.rows:
            w.writerow(
                [r.attribute, r.category, r.n, _fmt(r.percentage, 4), _fmt(r.relocated_pct, 4)]
                + [_fmt(r.mode_delta[m], 4) for m in MODE_PRECEDENCE]
            )


def write_zone_delta_csv(path, report: ShiftReport, city: CityModel | None) -> None:
    """Per-zone mode-share deltas; centroid columns only when a city is given."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        centroid_cols = ["centroid_x", "centroid_y"] if city is not None else []
        w.writerow(
            ["zone_id"] + centroid_cols + ["n_workers_baseline", "n_workers_scenario"]
            + [f"delta_{m}" for m in MODE_PRECEDENCE]
        )
        if city is not None:
            zones = [(z.id, [_fmt(z.centroid[0]), _fmt(z.centroid[1])]) for z in city.zones]
        else:
            zones = [(zid, []) for zid in sorted(report.zone_deltas)]
        for zid, centroid in zones:
            deltas = report.zone_deltas.get(zid)
            nb, ns = report.zone_counts.get(zid, (0, 0))
            w.writerow(
                [zid] + centroid + [nb, ns]
                + [_fmt(deltas[m], 4) if deltas else _fmt(0.0, 4) for m in MODE_PRECEDENCE]
            )


# ---------------------------------------------------------------------------
# Artifact reading (for the diff subcommand)
# ---------------------------------------------------------------------------


def read_run_view(run_dir) -> RunView:
    housed: dict[int, int] = {}
    unhoused: set[int] = set()
    with open(os.path.join(run_dir, "assignments.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            aid = int(rec["agent_id"])
            if rec["housed_zone"]:
                housed[aid] = int(rec["housed_zone"])
            else:
                unhoused.add(aid)
    worker_mode: dict[int, str] = {}
    worker_distance: dict[int, float] = {}
    with open(os.path.join(run_dir, "decisions.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            wid = int(rec["worker_id"])
            worker_mode[wid] = rec["chosen_mode"]
            worker_distance[wid] = float(rec["network_distance_km"])
    return RunView(housed=housed, unhoused=unhoused, worker_mode=worker_mode, worker_distance=worker_distance)


def read_population_categories(run_dir) -> tuple[dict[int, dict[str, str]], dict[int, tuple[int, str]]]:
    hh_categories: dict[int, dict[str, str]] = {}
    with open(os.path.join(run_dir, "population.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            hh_categories[int(rec["agent_id"])] = {
                "size": rec["size_category"],
                "income": rec["income_category"],
                "cars": rec["car_category"],
            }
    worker_info: dict[int, tuple[int, str]] = {}
    with open(os.path.join(run_dir, "workers.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            worker_info[int(rec["worker_id"])] = (int(rec["household_id"]), rec["gender"])
    return hh_categories, worker_info


def shift_report_from_dirs(baseline_dir, scenario_dir) -> ShiftReport:
    base = read_run_view(baseline_dir)
    scen = read_run_view(scenario_dir)
    hh_categories, worker_info = read_population_categories(baseline_dir)
    return build_shift_report(base, scen, hh_categories, worker_info)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    timings: dict[str, float] = field(default_factory=dict)
    outputs: dict[str, dict] = field(default_factory=dict)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, config_hash: str, version: str, timings: dict[str, float], output_paths: list) -> RunManifest:
    outputs = {}
    for p in sorted(output_paths, key=lambda p: os.path.basename(str(p))):
        outputs[os.path.basename(str(p))] = {
            "sha256": sha256_file(p),
            "bytes": os.path.getsize(p),
        }
    manifest = RunManifest(config_hash=config_hash, tool_version=version, timings=timings, outputs=outputs)
    with open(path, "w") as fh:
        json.dump(
            {
                "config_hash": manifest.config_hash,
                "tool_version": manifest.tool_version,
                "timings": {k: round(v, 6) for k, v in manifest.timings.items()},
                "outputs": manifest.outputs,
            },
            fh,
            sort_keys=True,
            indent=1,
        )
        fh.write("\n")
    return manifest


def write_run_outputs(
    out_dir,
    city: CityModel,
    households: list[HouseholdAgent],
    workers: list[WorkerAgent],
    result: RunResult,
    dump_alternatives: bool = False,
) -> list[str]:
    """Write the standard artifact set for one pipeline run; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    def p(name: str) -> str:
        paths.append(os.path.join(out_dir, name))
        return paths[-1]

    write_population_csv(p("population.csv"), households)
    write_workers_csv(p("workers.csv"), workers)
    write_assignments_csv(p("assignments.csv"), result.allocation, households)
    write_unhoused_csv(p("unhoused.csv"), result.allocation, households)
    write_audit_csv(p("audit.csv"), result.allocation)
    write_decisions_csv(p("decisions.csv"), result.decisions, workers, result.allocation)
    write_housing_csv(p("housing_distribution.csv"), result.allocation, city)
    write_mode_share_csv(p("mode_shares.csv"), result.decisions, workers, households)
    if dump_alternatives:
        write_alternatives_csv(p("alternatives.csv"), result.alternatives)
    return paths
