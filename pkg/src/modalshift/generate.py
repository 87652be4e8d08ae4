"""Synthetic city generator: grid of square zones with facilities, services
and per-mode networks. Deterministic for a fixed seed; emits a manifest of
counts so tests can read back what was built."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import TAG_CITY, substream
from .city import (
    SERVICE_RANGE_DEFAULTS,
    CityModel,
    Connector,
    Facility,
    ModeNetwork,
    TransportService,
    Zone,
    validate_city,
)


class InfeasibleParamsError(ValueError):
    pass


@dataclass
class SynthCityParams:
    nx: int = 8
    ny: int = 8
    cell_km: float = 1.0
    facility_density: dict[str, float] = field(
        default_factory=lambda: {
            "commercial": 0.50,
            "educational": 0.40,
            "green_recreational": 0.25,
            "remedial": 0.15,
            "cultural": 0.10,
        }
    )
    rent_low: float = 0.030
    rent_high: float = 0.140
    rent_noise: float = 0.012
    restricted_core_km: float = 1.6
    residential_frac_range: tuple[float, float] = (0.35, 0.70)
    employment_categories: tuple[str, ...] = ("services", "commercial", "industrial", "administrative")
    # networks
    car_speed: float = 24.0
    taxi_speed: float = 22.0
    walk_speed: float = 4.8
    bus_speed: float = 16.0
    subway_speed: float = 40.0
    brt_speed: float = 26.0
    highway_speed: float = 70.0
    transit_access_cutoff_km: float = 2.5
    transit_access_speed_kmh: float = 10.0
    access_speed_kmh: float = 4.8
    taxi_fallback_cost_per_km: float = 0.30
    taxi_fallback_threshold_km: float = 0.8
    # corridors, as fractions of the grid
    highway_rows: tuple[float, ...] = (0.55,)
    highway_cols: tuple[float, ...] = (0.80,)
    subway_col: float | None = 0.70
    subway_row: float | None = 0.62
    subway_station_spacing: int = 2
    brt_row: float | None = 0.30
    with_bus_stops: bool = True


DEMO_PARAMS = SynthCityParams(nx=12, ny=12)


def _grid_index(params: SynthCityParams, row: int, col: int) -> int:
    return row * params.nx + col


def generate_synthetic_city(params: SynthCityParams, seed: int) -> tuple[CityModel, dict]:
    """Build a deterministic synthetic city; returns (model, manifest)."""
    nx, ny, cell = params.nx, params.ny, params.cell_km
    if nx < 2 or ny < 2 or cell <= 0:
        raise InfeasibleParamsError(f"grid {nx}x{ny} with cell {cell} km is not buildable")
    rng = substream(seed, TAG_CITY)
    width, height = nx * cell, ny * cell
    cx0, cy0 = width / 2.0, height / 2.0
    rmax = max(np.hypot(width / 2.0, height / 2.0), 1e-9)

    zones: list[Zone] = []
    for row in range(ny):
        for col in range(nx):
            x0, y0 = col * cell, row * cell
            centroid = (x0 + cell / 2.0, y0 + cell / 2.0)
            d_center = float(np.hypot(centroid[0] - cx0, centroid[1] - cy0))
            northness = centroid[1] / height
            rent = params.rent_low + (params.rent_high - params.rent_low) * northness
            rent += float(rng.uniform(-params.rent_noise, params.rent_noise))
            rent = max(rent, 0.005)
            rel = d_center / rmax
            if rel < 0.18:
                pollution = int(rng.integers(4, 6))
            elif rel < 0.42:
                pollution = 3
            elif rel < 0.68:
                pollution = 2
            else:
                pollution = 1
            employment = {}
            for k, cat in enumerate(params.employment_categories):
                center = (cx0, cy0) if cat != "industrial" else (0.82 * width, 0.18 * height)
                dd = np.hypot(centroid[0] - center[0], centroid[1] - center[1])
                employment[cat] = round(float(0.20 * np.exp(-(dd**2) / (2 * (0.35 * width) ** 2))), 6)
            area = cell * cell
            zones.append(
                Zone(
                    id=_grid_index(params, row, col) + 1,
                    centroid=centroid,
                    polygon=((x0, y0), (x0 + cell, y0), (x0 + cell, y0 + cell), (x0, y0 + cell)),
                    area=area,
                    residential_area=float(rng.uniform(*params.residential_frac_range)) * area,
                    rent_per_m2=round(rent, 6),
                    pollution=pollution,
                    traffic_restricted=bool(d_center <= params.restricted_core_km),
                    employment_rate=employment,
                )
            )

    facilities: list[Facility] = []
    fid = 1
    for z in zones:
        for kind, dens in params.facility_density.items():
            count = int(rng.poisson(dens))
            for _ in range(count):
                loc = (
                    float(z.polygon[0][0] + rng.uniform(0.05, 0.95) * cell),
                    float(z.polygon[0][1] + rng.uniform(0.05, 0.95) * cell),
                )
                facilities.append(Facility(id=fid, kind=kind, location=loc, area=float(rng.uniform(0.005, 0.05))))
                fid += 1

    services: list[TransportService] = []
    sid = 1

    def add_service(kind: str, geometry) -> None:
        nonlocal sid
        services.append(
            TransportService(
                id=sid, kind=kind, geometry=tuple(geometry), service_range_km=SERVICE_RANGE_DEFAULTS[kind]
            )
        )
        sid += 1

    # base lattice shared by walk/car/taxi/bus: one node per zone centroid
    lattice_nodes = {z.id: z.centroid for z in zones}
    lattice_edges = []
    for row in range(ny):
        for col in range(nx):
            zid = _grid_index(params, row, col) + 1
            if col + 1 < nx:
                lattice_edges.append((zid, _grid_index(params, row, col + 1) + 1, cell))
            if row + 1 < ny:
                lattice_edges.append((zid, _grid_index(params, row + 1, col) + 1, cell))

    def lattice_network(mode: str, speed: float, line: str) -> ModeNetwork:
        return ModeNetwork(
            mode=mode,
            nodes=dict(lattice_nodes),
            edges=[(u, v, length, speed, line) for u, v, length in lattice_edges],
            zone_connectors={z.id: [Connector(z.id, 0.0, 0.0)] for z in zones},
            access_speed_kmh=params.access_speed_kmh,
            access_cutoff_km=None,
            taxi_fallback_cost_per_km=params.taxi_fallback_cost_per_km,
            taxi_fallback_threshold_km=params.taxi_fallback_threshold_km,
        )

    networks = {
        "walk": lattice_network("walk", params.walk_speed, "walk"),
        "car": lattice_network("car", params.car_speed, "road"),
        "taxi": lattice_network("taxi", params.taxi_speed, "road"),
        "bus": lattice_network("bus", params.bus_speed, "bus"),
    }

    # highways: fast parallel edges on the car lattice plus corridor services
    hwy_i = 0
    for frac in params.highway_rows:
        row = min(ny - 1, int(round(frac * (ny - 1))))
        y = row * cell + cell / 2.0
        add_service("highway", [(0.0, y), (width, y)])
        for col in range(nx - 1):
            u = _grid_index(params, row, col) + 1
            v = _grid_index(params, row, col + 1) + 1
            networks["car"].edges.append((u, v, cell, params.highway_speed, f"hwy{hwy_i}"))
        hwy_i += 1
    for frac in params.highway_cols:
        col = min(nx - 1, int(round(frac * (nx - 1))))
        x = col * cell + cell / 2.0
        add_service("highway", [(x, 0.0), (x, height)])
        for row in range(ny - 1):
            u = _grid_index(params, row, col) + 1
            v = _grid_index(params, row + 1, col) + 1
            networks["car"].edges.append((u, v, cell, params.highway_speed, f"hwy{hwy_i}"))
        hwy_i += 1

    # rail-like modes: dedicated station nodes, negative-free fresh ids
    def station_network(mode: str, lines: list[list[tuple[float, float]]], speed: float) -> ModeNetwork:
        nodes: dict[int, tuple[float, float]] = {}
        coord_to_node: dict[tuple[float, float], int] = {}
        edges = []
        next_id = 1
        for li, pts in enumerate(lines):
            prev = None
            for p in pts:
                key = (round(p[0], 9), round(p[1], 9))
                if key not in coord_to_node:
                    coord_to_node[key] = next_id
                    nodes[next_id] = p
                    next_id += 1
                cur = coord_to_node[key]
                if prev is not None and prev != cur:
                    length = float(np.hypot(nodes[cur][0] - nodes[prev][0], nodes[cur][1] - nodes[prev][1]))
                    edges.append((prev, cur, length, speed, f"{mode}{li}"))
                prev = cur
        net = ModeNetwork(
            mode=mode,
            nodes=nodes,
            edges=edges,
            zone_connectors={},
            access_speed_kmh=params.transit_access_speed_kmh,
            access_cutoff_km=params.transit_access_cutoff_km,
            taxi_fallback_cost_per_km=params.taxi_fallback_cost_per_km,
            taxi_fallback_threshold_km=params.taxi_fallback_threshold_km,
        )
        rebuild_connectors(net, zones)
        return net

    subway_lines = []
    sub_x = sub_y = None
    if params.subway_col is not None:
        col = min(nx - 1, int(round(params.subway_col * (nx - 1))))
        sub_x = col * cell + cell / 2.0
    if params.subway_row is not None:
        row = min(ny - 1, int(round(params.subway_row * (ny - 1))))
        sub_y = row * cell + cell / 2.0
    if sub_x is not None:
        ys = sorted({r * cell + cell / 2.0 for r in range(0, ny, params.subway_station_spacing)} | ({sub_y} if sub_y is not None else set()))
        subway_lines.append([(sub_x, y) for y in ys])
    if sub_y is not None:
        xs = sorted({c * cell + cell / 2.0 for c in range(0, nx, params.subway_station_spacing)} | ({sub_x} if sub_x is not None else set()))
        subway_lines.append([(x, sub_y) for x in xs])
    if subway_lines:
        networks["subway"] = station_network("subway", subway_lines, params.subway_speed)
        for pts in subway_lines:
            for p in pts:
                add_service("subway_station", [p])

    if params.brt_row is not None:
        row = min(ny - 1, int(round(params.brt_row * (ny - 1))))
        y = row * cell + cell / 2.0
        pts = [(c * cell + cell / 2.0, y) for c in range(nx)]
        networks["brt"] = station_network("brt", [pts], params.brt_speed)
        for p in pts:
            add_service("brt_stop", [p])

    if params.with_bus_stops:
        for z in zones:
            add_service("bus_stop", [z.centroid])

    city = CityModel(
        zones=zones,
        facilities=facilities,
        services=services,
        networks=networks,
        metadata={"name": f"synthetic-{nx}x{ny}", "seed": seed, "generator": "grid"},
    )
    validate_city(city)

    manifest = {
        "seed": seed,
        "n_zones": len(zones),
        "n_facilities": len(facilities),
        "facilities_by_kind": {
            k: sum(1 for f in facilities if f.kind == k) for k in sorted({f.kind for f in facilities})
        },
        "n_services": len(services),
        "services_by_kind": {
            k: sum(1 for s in services if s.kind == k) for k in sorted({s.kind for s in services})
        },
        "networks": {
            mode: {"nodes": len(net.nodes), "edges": len(net.edges)} for mode, net in sorted(city.networks.items())
        },
    }
    return city, manifest


def rebuild_connectors(net: ModeNetwork, zones: list[Zone]) -> None:
    """Connect each zone to its nearest network node within the access cutoff.

    Access time uses the network's fixed access speed; a local-taxi fallback
    cost applies beyond the walkable threshold.
    """
    if not net.nodes:
        net.zone_connectors = {}
        return
    node_ids = sorted(net.nodes)
    pts = np.array([net.nodes[n] for n in node_ids], dtype=np.float64)
    connectors: dict[int, list[Connector]] = {}
    for z in zones:
        d = np.hypot(pts[:, 0] - z.centroid[0], pts[:, 1] - z.centroid[1])
        best = int(np.argmin(d))
        dist = float(d[best])
        if net.access_cutoff_km is not None and dist > net.access_cutoff_km:
            continue
        access_min = dist / net.access_speed_kmh * 60.0
        cost = net.taxi_fallback_cost_per_km * dist if dist > net.taxi_fallback_threshold_km else 0.0
        connectors[z.id] = [Connector(node_ids[best], round(access_min, 9), round(cost, 9))]
    net.zone_connectors = connectors
