"""Level-of-service queries: shortest paths on per-mode networks.

Paths minimize generalized time (access + in-vehicle + line-transfer
penalties + egress) with a heap Dijkstra over (node, line) states, so a line
change inside one mode network costs its configured transfer penalty. Cost
is assembled afterwards from the per-mode tariff. All queries are pure
functions of (city, tariffs); precomputed tables are read-only.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .city import LOS, CityModel, ModeNetwork

class TariffError(ValueError):
    pass


@dataclass
class ModeTariff:
    flat: float = 0.0
    per_km: float = 0.0
    fixed_ovt_min: float = 0.0
    transfer_penalty_min: float = 0.0


@dataclass
class TariffConfig:
    modes: dict[str, ModeTariff] = field(default_factory=dict)
    walk_max_network_km: float = 5.0

    def for_mode(self, mode: str) -> ModeTariff:
        return self.modes.get(mode, ModeTariff())


DEFAULT_TARIFFS = TariffConfig(
    modes={
        "walk": ModeTariff(0.0, 0.0, 0.0, 0.0),
        "car": ModeTariff(0.8, 0.65, 8.0, 0.0),
        "taxi": ModeTariff(1.0, 0.95, 4.0, 0.0),
        "bus": ModeTariff(0.25, 0.05, 6.0, 5.0),
        "brt": ModeTariff(0.30, 0.05, 4.5, 5.0),
        "subway": ModeTariff(0.40, 0.05, 4.0, 4.0),
    }
)


def load_tariffs(path) -> TariffConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise TariffError(f"unsupported schema_version {doc.get('schema_version')!r}")
    modes = {}
    for mode, rec in doc.get("modes", {}).items():
        modes[mode] = ModeTariff(
            flat=float(rec.get("flat", 0.0)),
            per_km=float(rec.get("per_km", 0.0)),
            fixed_ovt_min=float(rec.get("fixed_ovt_min", 0.0)),
            transfer_penalty_min=float(rec.get("transfer_penalty_min", 0.0)),
        )
        if modes[mode].flat < 0 or modes[mode].per_km < 0:
            raise TariffError(f"negative tariff for mode '{mode}'")
    return TariffConfig(modes=modes, walk_max_network_km=float(doc.get("walk_max_network_km", 5.0)))


def save_tariffs(cfg: TariffConfig, path) -> None:
    doc = {
        "schema_version": 1,
        "walk_max_network_km": cfg.walk_max_network_km,
        "modes": {
            m: {
                "flat": t.flat,
                "per_km": t.per_km,
                "fixed_ovt_min": t.fixed_ovt_min,
                "transfer_penalty_min": t.transfer_penalty_min,
            }
            for m, t in sorted(cfg.modes.items())
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


@dataclass
class _Arrival:
    gen_min: float
    ivt_min: float
    dist_km: float
    transfers: int
    access_min: float
    access_cost: float


def _adjacency(net: ModeNetwork):
    adj: dict[int, list[tuple[int, float, float, int]]] = {}
    line_ids: dict[str, int] = {}
    for u, v, length, speed, line in net.edges:
        li = line_ids.setdefault(line, len(line_ids))
        t = length / speed * 60.0
        adj.setdefault(u, []).append((v, t, length, li))
        adj.setdefault(v, []).append((u, t, length, li))
    return adj


def _single_source(net: ModeNetwork, adj, origin_zone: int, transfer_penalty: float) -> dict[int, _Arrival] | None:
    """Best arrival per node from the origin zone's connectors.

    States are (node, line); the first settled state at a node carries the
    minimal generalized time into it. Heap ties resolve by insertion counter,
    which is deterministic.
    """
    conns = net.zone_connectors.get(origin_zone)
    if not conns:
        return None
    settled: set[tuple[int, int]] = set()
    arrivals: dict[int, _Arrival] = {}
    heap: list = []
    counter = 0
    for c in sorted(conns, key=lambda c: (c.access_min, c.node)):
        heapq.heappush(heap, (c.access_min, counter, c.node, -1, 0.0, 0.0, 0, c.access_min, c.access_cost))
        counter += 1
    while heap:
        gen, _cnt, node, line, ivt, dist, ntr, amin, acost = heapq.heappop(heap)
        key = (node, line)
        if key in settled:
            continue
        settled.add(key)
        if node not in arrivals:
            arrivals[node] = _Arrival(gen, ivt, dist, ntr, amin, acost)
        for v, t, length, li in adj.get(node, ()):
            penalty = transfer_penalty if (line != -1 and li != line) else 0.0
            if (v, li) in settled:
                continue
            heapq.heappush(
                heap,
                (gen + t + penalty, counter, v, li, ivt + t, dist + length, ntr + (1 if penalty > 0.0 else 0), amin, acost),
            )
            counter += 1
    return arrivals


def _od_los(
    arrivals: dict[int, _Arrival] | None,
    net: ModeNetwork,
    mode: str,
    origin: int,
    dest: int,
    tariff: ModeTariff,
    walk_max_km: float,
) -> LOS:
    o_conns = net.zone_connectors.get(origin)
    d_conns = net.zone_connectors.get(dest)
    if not o_conns or not d_conns:
        return LOS.unavailable()
    if origin == dest:
        c = min(o_conns, key=lambda c: (c.access_min, c.node))
        return LOS(
            cost=tariff.flat + 2.0 * c.access_cost,
            in_vehicle_time=0.0,
            out_of_vehicle_time=2.0 * c.access_min + tariff.fixed_ovt_min,
            network_distance=0.0,
            available=True,
        )
    if arrivals is None:
        return LOS.unavailable()
    best = None
    best_total = np.inf
    for c in sorted(d_conns, key=lambda c: (c.access_min, c.node)):
        arr = arrivals.get(c.node)
        if arr is None:
            continue
        total = arr.gen_min + c.access_min
        if total < best_total:
            best_total = total
            best = (arr, c)
    if best is None:
        return LOS.unavailable()
    arr, egress = best
    if mode == "walk" and arr.dist_km > walk_max_km:
        return LOS.unavailable()
    return LOS(
        cost=tariff.flat + tariff.per_km * arr.dist_km + arr.access_cost + egress.access_cost,
        in_vehicle_time=arr.ivt_min,
        out_of_vehicle_time=arr.access_min
        + egress.access_min
        + tariff.fixed_ovt_min
        + arr.transfers * tariff.transfer_penalty_min,
        network_distance=arr.dist_km,
        available=True,
    )


def compute_los(city: CityModel, origin: int, dest: int, mode: str, tariffs: TariffConfig) -> LOS:
    """LOS for one origin-destination pair on one mode network."""
    city.zone(origin)
    city.zone(dest)
    if mode not in city.networks:
        raise ValueError(f"unknown mode '{mode}'")
    net = city.networks[mode]
    tariff = tariffs.for_mode(mode)
    arrivals = None
    if origin != dest and net.zone_connectors.get(origin):
        arrivals = _single_source(net, _adjacency(net), origin, tariff.transfer_penalty_min)
    return _od_los(arrivals, net, mode, origin, dest, tariff, tariffs.walk_max_network_km)


@dataclass
class LOSTables:
    """Dense per-mode OD tables in zone list order. Read-only once built."""

    zone_ids: list[int]
    index: dict[int, int]
    available: dict[str, np.ndarray]
    cost: dict[str, np.ndarray]
    ivt: dict[str, np.ndarray]
    ovt: dict[str, np.ndarray]
    dist: dict[str, np.ndarray]

    def los(self, mode: str, origin: int, dest: int) -> LOS:
        i = self.index[origin]
        j = self.index[dest]
        if mode not in self.available or not self.available[mode][i, j]:
            return LOS.unavailable()
        return LOS(
            cost=float(self.cost[mode][i, j]),
            in_vehicle_time=float(self.ivt[mode][i, j]),
            out_of_vehicle_time=float(self.ovt[mode][i, j]),
            network_distance=float(self.dist[mode][i, j]),
            available=True,
        )

    def modes(self) -> list[str]:
        return sorted(self.available)


def build_los_tables(city: CityModel, tariffs: TariffConfig) -> LOSTables:
    """One single-source Dijkstra per (origin zone, mode), finalized per dest."""
    zone_ids = city.zone_ids
    n = len(zone_ids)
    index = {zid: k for k, zid in enumerate(zone_ids)}
    tables = LOSTables(zone_ids, index, {}, {}, {}, {}, {})
    for mode in sorted(city.networks):
        net = city.networks[mode]
        tariff = tariffs.for_mode(mode)
        adj = _adjacency(net)
        av = np.zeros((n, n), dtype=bool)
        cost = np.zeros((n, n))
        ivt = np.zeros((n, n))
        ovt = np.zeros((n, n))
        dist = np.zeros((n, n))
        for i, origin in enumerate(zone_ids):
            arrivals = None
            if net.zone_connectors.get(origin):
                arrivals = _single_source(net, adj, origin, tariff.transfer_penalty_min)
            for j, dest in enumerate(zone_ids):
                l = _od_los(arrivals, net, mode, origin, dest, tariff, tariffs.walk_max_network_km)
                av[i, j] = l.available
                if l.available:
                    cost[i, j] = l.cost
                    ivt[i, j] = l.in_vehicle_time
                    ovt[i, j] = l.out_of_vehicle_time
                    dist[i, j] = l.network_distance
        tables.available[mode] = av
        tables.cost[mode] = cost
        tables.ivt[mode] = ivt
        tables.ovt[mode] = ovt
        tables.dist[mode] = dist
    return tables
