"""Command-line entry point.

Subcommands: synth, run, scenario, diff, gen-city, validate.
Exit codes: 0 success, 2 input error, 3 runtime error. Errors print one
machine-parsable line to stderr: ``modalshift: error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import __version__
from .city import CityFileError, CityModel, load_city, save_city
from .config import RunConfig, apply_env_overrides, config_hash, load_run_config
from .generate import DEMO_PARAMS, InfeasibleParamsError, SynthCityParams, generate_synthetic_city
from .los import TariffError, load_tariffs
from .modechoice import ExpertMatrixError, load_expert_matrix
from .pipeline import PipelineParams, run_pipeline
from .population import (
    ConfigError,
    PopulationConfig,
    assign_workplaces,
    attach_workplaces,
    load_survey,
    make_workers,
    synthesize_households,
)
from .reports import (
    shift_report_from_dirs,
    write_manifest,
    write_population_csv,
    write_run_outputs,
    write_shift_csv,
    write_workers_csv,
    write_zone_delta_csv,
    read_run_view,
    read_population_categories,
)
from .residential import GAParams
from .scenario import (
    RunView,
    ScenarioError,
    build_shift_report,
    load_scenario,
    scenario_city,
)

INPUT_ERRORS = (
    ConfigError,
    CityFileError,
    TariffError,
    ExpertMatrixError,
    ScenarioError,
    InfeasibleParamsError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _fail(kind: str, message: str) -> int:
    print(f"modalshift: error: {kind}: {message}", file=sys.stderr)
    return 2 if kind == "input" else 3


def _population_config(cfg: RunConfig, city: CityModel) -> PopulationConfig:
    pc = PopulationConfig(zone_ids=city.zone_ids)
    for key, value in cfg.population.items():
        if not hasattr(pc, key):
            raise ConfigError(f"config: unknown population field '{key}'")
        if key == "n_employed_probs":
            value = {int(k): float(v) for k, v in value.items()}
        elif key.endswith("_range") or key in ("adult_age_range",):
            value = tuple(value)
        setattr(pc, key, value)
    return pc


def _build_agents(cfg: RunConfig, city: CityModel):
    survey = load_survey(cfg.resolved_survey())
    pc = _population_config(cfg, city)
    households = synthesize_households(pc, survey, cfg.n_households, cfg.seed)
    workers = make_workers(households, survey, pc, cfg.seed)
    assign_workplaces(workers, city, cfg.seed)
    attach_workplaces(households, workers)
    return households, workers


def _pipeline_params(cfg: RunConfig) -> PipelineParams:
    return PipelineParams(
        seed=cfg.seed,
        ga=GAParams(
            population_size=cfg.ga_population_size,
            generations=cfg.ga_generations,
            mutation_rate=cfg.ga_mutation_rate,
            crossover_rate=cfg.ga_crossover_rate,
        ),
        monthly_weights=tuple(cfg.monthly_weights) if cfg.monthly_weights else None,
        equilibrium=tuple(cfg.equilibrium) if cfg.equilibrium else None,
        tariffs=load_tariffs(cfg.resolved_tariffs()),
        expert=load_expert_matrix(cfg.resolved_expert()),
        pool_workers=cfg.workers,
        carry_over_capacity=cfg.carry_over_capacity,
    )


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    apply_env_overrides(cfg)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    cfg.validate()
    return cfg


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    city = load_city(cfg.city)
    households, workers = _build_agents(cfg, city)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_population_csv(os.path.join(cfg.out_dir, "population.csv"), households)
    write_workers_csv(os.path.join(cfg.out_dir, "workers.csv"), workers)
    n = len(households)
    print(f"synthesized {n} households, {len(workers)} workers -> {cfg.out_dir}")
    for attr, getter in (
        ("size", lambda a: a.size_category),
        ("income", lambda a: a.income_category),
        ("cars", lambda a: a.car_category),
    ):
        counts: dict[str, int] = {}
        for a in households:
            counts[getter(a)] = counts.get(getter(a), 0) + 1
        parts = ", ".join(f"{c}: {100.0 * v / n:.1f}%" for c, v in sorted(counts.items()))
        print(f"  {attr}: {parts}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    city = load_city(cfg.city)
    households, workers = _build_agents(cfg, city)
    params = _pipeline_params(cfg)
    result = run_pipeline(city, households, workers, params)
    paths = write_run_outputs(cfg.out_dir, city, households, workers, result, cfg.dump_alternatives)
    base_hash = config_hash(replace(cfg, scenario=None))
    write_manifest(os.path.join(cfg.out_dir, "manifest.json"), base_hash, __version__, result.timings, paths)
    housed = len(result.allocation.housed)
    print(f"run complete: {housed}/{len(households)} households housed, "
          f"{len(result.decisions)} workers decided -> {cfg.out_dir}")
    return 0


def cmd_scenario(args) -> int:
    cfg = _load_config(args)
    scenario_path = args.scenario or cfg.scenario
    if not scenario_path:
        raise ConfigError("no scenario file given (flag --scenario or config field)")
    spec = load_scenario(scenario_path)
    baseline_dir = args.baseline
    manifest_path = os.path.join(baseline_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"baseline run missing: no manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base_hash = config_hash(replace(cfg, scenario=None))
    if manifest.get("config_hash") != base_hash:
        raise ConfigError("baseline run does not match this config (stale config_hash); re-run `run`")
    city = load_city(cfg.city)
    households, workers = _build_agents(cfg, city)
    params = _pipeline_params(cfg)
    modified = scenario_city(city, spec)
    result = run_pipeline(modified, households, workers, params)
    paths = write_run_outputs(cfg.out_dir, modified, households, workers, result, cfg.dump_alternatives)
    base_view = read_run_view(baseline_dir)
    hh_categories, worker_info = read_population_categories(baseline_dir)
    report = build_shift_report(base_view, RunView.from_result(result), hh_categories, worker_info)
    shift_path = os.path.join(cfg.out_dir, "shift_report.csv")
    delta_path = os.path.join(cfg.out_dir, "zone_deltas.csv")
    write_shift_csv(shift_path, report)
    write_zone_delta_csv(delta_path, report, modified)
    paths += [shift_path, delta_path]
    cfg_scenario = replace(cfg, scenario=scenario_path)
    write_manifest(
        os.path.join(cfg.out_dir, "manifest.json"),
        config_hash(cfg_scenario),
        __version__,
        result.timings,
        paths,
    )
    totals = next(r for r in report.rows if r.attribute == "total")
    deltas = ", ".join(f"{m}: {totals.mode_delta[m]:+.2f}" for m in sorted(totals.mode_delta))
    print(f"scenario '{spec.kind}' complete: relocated {totals.relocated_pct:.2f}%, deltas {deltas}")
    return 0


def cmd_diff(args) -> int:
    report = shift_report_from_dirs(args.baseline, args.scenario_dir)
    os.makedirs(args.out, exist_ok=True)
    shift_path = os.path.join(args.out, "shift_report.csv")
    delta_path = os.path.join(args.out, "zone_deltas.csv")
    write_shift_csv(shift_path, report)
    write_zone_delta_csv(delta_path, report, None)
    print(f"diff written -> {args.out}")
    return 0


def cmd_gen_city(args) -> int:
    if args.preset == "demo":
        params = DEMO_PARAMS
    else:
        params = SynthCityParams(nx=args.nx, ny=args.ny)
    city, manifest = generate_synthetic_city(params, args.seed)
    save_city(city, args.out)
    manifest_path = args.manifest or (os.path.splitext(args.out)[0] + ".manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"generated city: {manifest['n_zones']} zones, {manifest['n_facilities']} facilities, "
          f"{manifest['n_services']} services -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    city = load_city(cfg.city)
    load_survey(cfg.resolved_survey())
    load_tariffs(cfg.resolved_tariffs())
    load_expert_matrix(cfg.resolved_expert())
    if cfg.scenario:
        load_scenario(cfg.scenario)
    print(f"config ok: city '{cfg.city}' with {len(city.zones)} zones; hash {config_hash(cfg)[:12]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modalshift",
        description="Agent-based microsimulation of residential and commuting mode choice.",
    )
    parser.add_argument("--version", action="version", version=f"modalshift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--workers", type=int, default=None, help="worker pool size")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("synth", help="synthesize the agent population")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the baseline pipeline and write reports")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scenario", help="run a transport development scenario against a baseline")
    common(p)
    p.add_argument("--scenario", default=None, help="scenario JSON (defaults to config field)")
    p.add_argument("--baseline", required=True, help="directory of the baseline `run` outputs")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("diff", help="diff two run output directories")
    p.add_argument("--baseline", required=True)
    p.add_argument("--scenario-dir", required=True, dest="scenario_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("gen-city", help="generate a synthetic city file")
    p.add_argument("--preset", choices=["demo"], default=None)
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="city JSON path")
    p.add_argument("--manifest", default=None, help="manifest JSON path")
    p.set_defaults(func=cmd_gen_city)

    p = sub.add_parser("validate", help="validate a config and all referenced files")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        return _fail("input", str(exc))
    except Exception as exc:  # noqa: BLE001
        return _fail("runtime", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
