"""Spatial world: zones, facilities, transport services and mode networks.

A loaded ``CityModel`` is immutable by convention: every query here is a pure
function of the model, safe to evaluate concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import band_area

SCHEMA_VERSION = 1

FACILITY_KINDS = ("commercial", "educational", "green_recreational", "remedial", "cultural")
SERVICE_KINDS = ("highway", "subway_station", "brt_stop", "bus_stop")
MODES = ("walk", "car", "bus", "brt", "subway", "taxi")

SERVICE_RANGE_DEFAULTS = {
    "highway": 2.0,
    "subway_station": 1.9,
    "brt_stop": 1.7,
    "bus_stop": 1.2,
}

COVERAGE_CELL_KM = 0.05


class CityFileError(ValueError):
    """Schema violation, dangling reference or invalid geometry in a city file."""


class UnknownZoneError(KeyError):
    pass


@dataclass
class Zone:
    id: int
    centroid: tuple[float, float]
    polygon: tuple[tuple[float, float], ...]
    area: float
    residential_area: float
    rent_per_m2: float
    pollution: int
    traffic_restricted: bool
    employment_rate: dict[str, float] = field(default_factory=dict)


@dataclass
class Facility:
    id: int
    kind: str
    location: tuple[float, float]
    area: float


@dataclass
class TransportService:
    id: int
    kind: str
    geometry: tuple[tuple[float, float], ...]
    service_range_km: float


@dataclass
class Connector:
    node: int
    access_min: float
    access_cost: float


@dataclass
class ModeNetwork:
    mode: str
    nodes: dict[int, tuple[float, float]]
    edges: list[tuple[int, int, float, float, str]]  # u, v, length km, speed km/h, line
    zone_connectors: dict[int, list[Connector]]
    access_speed_kmh: float = 4.8
    access_cutoff_km: float | None = None
    taxi_fallback_cost_per_km: float = 0.0
    taxi_fallback_threshold_km: float = 0.8


@dataclass
class LOS:
    cost: float
    in_vehicle_time: float
    out_of_vehicle_time: float
    network_distance: float
    available: bool

    @classmethod
    def unavailable(cls) -> "LOS":
        return cls(0.0, 0.0, 0.0, 0.0, False)


@dataclass
class CityModel:
    zones: list[Zone]
    facilities: list[Facility]
    services: list[TransportService]
    networks: dict[str, ModeNetwork]
    metadata: dict

    def __post_init__(self):
        self._zone_by_id = {z.id: z for z in self.zones}

    def zone(self, zone_id: int) -> Zone:
        try:
            return self._zone_by_id[zone_id]
        except KeyError:
            raise UnknownZoneError(f"unknown zone id {zone_id}") from None

    @property
    def zone_ids(self) -> list[int]:
        return [z.id for z in self.zones]

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for z in self.zones for p in z.polygon]
        ys = [p[1] for z in self.zones for p in z.polygon]
        return min(xs), min(ys), max(xs), max(ys)


def zone_distance(city: CityModel, i: int, j: int) -> float:
    """Euclidean centroid distance in km; symmetric, zero iff i == j."""
    a = city.zone(i).centroid
    b = city.zone(j).centroid
    return math.hypot(a[0] - b[0], a[1] - b[1])


def distance_matrix(city: CityModel) -> np.ndarray:
    """Dense centroid distance matrix in zone list order."""
    pts = np.array([z.centroid for z in city.zones], dtype=np.float64)
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    return np.sqrt(dx * dx + dy * dy)


def buffer_area_upper_bound(service: TransportService) -> float:
    """Capsule-union upper bound on the buffer area around the geometry."""
    r = service.service_range_km
    pts = service.geometry
    if len(pts) == 1:
        return math.pi * r * r
    length = sum(
        math.hypot(pts[k + 1][0] - pts[k][0], pts[k + 1][1] - pts[k][1]) for k in range(len(pts) - 1)
    )
    return length * 2.0 * r + math.pi * r * r

def service_coverage(zone: Zone, service: TransportService, cell_km: float = COVERAGE_CELL_KM) -> float:
    """Area (km²) of the service buffer inside the zone, on the fixed grid."""
    px = np.array([p[0] for p in zone.polygon], dtype=np.float64)
    py = np.array([p[1] for p in zone.polygon], dtype=np.float64)
    gx = np.array([p[0] for p in service.geometry], dtype=np.float64)
    gy = np.array([p[1] for p in service.geometry], dtype=np.float64)
    est = band_area(px, py, gx, gy, 0.0, service.service_range_km, cell_km)
    return min(est, zone.area, buffer_area_upper_bound(service))


def ring_coverage(zone: Zone, geometry, r_in: float, r_out: float, cell_km: float = COVERAGE_CELL_KM) -> float:
    """Area (km²) of the ring band [r_in, r_out) around a polyline inside the zone."""
    px = np.array([p[0] for p in zone.polygon], dtype=np.float64)
    py = np.array([p[1] for p in zone.polygon], dtype=np.float64)
    gx = np.array([p[0] for p in geometry], dtype=np.float64)
    gy = np.array([p[1] for p in geometry], dtype=np.float64)
    est = band_area(px, py, gx, gy, r_in, r_out, cell_km)
    return min(est, zone.area)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_city(city: CityModel) -> None:
    seen: set[int] = set()
    for z in city.zones:
        if z.id in seen:
            raise CityFileError(f"duplicate zone id {z.id}")
        seen.add(z.id)
        if z.area <= 0:
            raise CityFileError(f"non-positive area, zone {z.id}")
        if not (0 <= z.residential_area <= z.area + 1e-12):
            raise CityFileError(f"residential_area outside [0, area], zone {z.id}")
        if z.rent_per_m2 < 0:
            raise CityFileError(f"negative rent_per_m2, zone {z.id}")
        if z.pollution not in (1, 2, 3, 4, 5):
            raise CityFileError(f"pollution must be 1..5, zone {z.id}")
        if len(z.polygon) < 3:
            raise CityFileError(f"polygon needs >= 3 vertices, zone {z.id}")
        total = sum(z.employment_rate.values())
        if total > 1 + 1e-9:
            raise CityFileError(f"employment rates sum to {total:.4f} > 1, zone {z.id}")
        if any(v < 0 for v in z.employment_rate.values()):
            raise CityFileError(f"negative employment rate, zone {z.id}")
    for f in city.facilities:
        if f.kind not in FACILITY_KINDS:
            raise CityFileError(f"unknown facility kind '{f.kind}', facility {f.id}")
        if f.area <= 0:
            raise CityFileError(f"non-positive area, facility {f.id}")
    for s in city.services:
        if s.kind not in SERVICE_KINDS:
            raise CityFileError(f"unknown service kind '{s.kind}', service {s.id}")
        if s.service_range_km <= 0:
            raise CityFileError(f"non-positive service_range_km, service {s.id}")
        if len(s.geometry) < 1:
            raise CityFileError(f"empty geometry, service {s.id}")
    for mode, net in city.networks.items():
        if mode not in MODES:
            raise CityFileError(f"unknown mode '{mode}'")
        if net.mode != mode:
            raise CityFileError(f"network key '{mode}' does not match mode field '{net.mode}'")
        for u, v, length, speed, _line in net.edges:
            if u not in net.nodes or v not in net.nodes:
                raise CityFileError(f"mode '{mode}': edge ({u}, {v}) references unknown node")
            if length <= 0 or speed <= 0:
                raise CityFileError(f"mode '{mode}': non-positive length/speed on edge ({u}, {v})")
        for zid, conns in net.zone_connectors.items():
            if zid not in city._zone_by_id:
                raise CityFileError(f"mode '{mode}': connector references unknown zone {zid}")
            for c in conns:
                if c.node not in net.nodes:
                    raise CityFileError(f"mode '{mode}': connector for zone {zid} references unknown node {c.node}")
        _check_connected(mode, net)


def _check_connected(mode: str, net: ModeNetwork) -> None:
    """All connector nodes must live in one component of the edge graph."""
    anchor_nodes = {c.node for conns in net.zone_connectors.values() for c in conns}
    if len(anchor_nodes) <= 1:
        return
    adj: dict[int, list[int]] = {}
    for u, v, _l, _s, _line in net.edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    start = next(iter(anchor_nodes))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    missing = anchor_nodes - seen
    if missing:
        raise CityFileError(f"mode '{mode}': network disconnected, node {sorted(missing)[0]} unreachable")


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise CityFileError(f"{where}: missing field '{key}'")
    return record[key]


def load_city(path) -> CityModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CityFileError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CityFileError("top level must be an object")
    version = _require(doc, "schema_version", "city file")
    if version != SCHEMA_VERSION:
        raise CityFileError(f"unsupported schema_version {version}")
    zones = []
    for k, rec in enumerate(_require(doc, "zones", "city file")):
        where = f"zones[{k}]"
        zones.append(
            Zone(
                id=int(_require(rec, "id", where)),
                centroid=tuple(float(x) for x in _require(rec, "centroid", where)),
                polygon=tuple(tuple(float(x) for x in p) for p in _require(rec, "polygon", where)),
                area=float(_require(rec, "area", where)),
                residential_area=float(_require(rec, "residential_area", where)),
                rent_per_m2=float(_require(rec, "rent_per_m2", where)),
                pollution=int(_require(rec, "pollution", where)),
                traffic_restricted=bool(_require(rec, "traffic_restricted", where)),
                employment_rate={str(c): float(v) for c, v in rec.get("employment_rate", {}).items()},
            )
        )
    facilities = []
    for k, rec in enumerate(doc.get("facilities", [])):
        where = f"facilities[{k}]"
        facilities.append(
            Facility(
                id=int(_require(rec, "id", where)),
                kind=str(_require(rec, "kind", where)),
                location=tuple(float(x) for x in _require(rec, "location", where)),
                area=float(_require(rec, "area", where)),
            )
        )
    services = []
    for k, rec in enumerate(doc.get("services", [])):
        where = f"services[{k}]"
        kind = str(_require(rec, "kind", where))
        services.append(
            TransportService(
                id=int(_require(rec, "id", where)),
                kind=kind,
                geometry=tuple(tuple(float(x) for x in p) for p in _require(rec, "geometry", where)),
                service_range_km=float(rec.get("service_range_km", SERVICE_RANGE_DEFAULTS.get(kind, 1.0))),
            )
        )
    networks = {}
    for k, rec in enumerate(doc.get("networks", [])):
        where = f"networks[{k}]"
        mode = str(_require(rec, "mode", where))
        nodes = {int(n[0]): (float(n[1]), float(n[2])) for n in _require(rec, "nodes", where)}
        edges = [
            (int(e[0]), int(e[1]), float(e[2]), float(e[3]), str(e[4]) if len(e) > 4 else "0")
            for e in _require(rec, "edges", where)
        ]
        connectors = {
            int(zid): [Connector(int(c[0]), float(c[1]), float(c[2])) for c in conns]
            for zid, conns in _require(rec, "zone_connectors", where).items()
        }
        networks[mode] = ModeNetwork(
            mode=mode,
            nodes=nodes,
            edges=edges,
            zone_connectors=connectors,
            access_speed_kmh=float(rec.get("access_speed_kmh", 4.8)),
            access_cutoff_km=(None if rec.get("access_cutoff_km") is None else float(rec["access_cutoff_km"])),
            taxi_fallback_cost_per_km=float(rec.get("taxi_fallback_cost_per_km", 0.0)),
            taxi_fallback_threshold_km=float(rec.get("taxi_fallback_threshold_km", 0.8)),
        )
    city = CityModel(
        zones=zones,
        facilities=facilities,
        services=services,
        networks=networks,
        metadata=dict(doc.get("metadata", {})),
    )
    validate_city(city)
    return city


def city_to_dict(city: CityModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "metadata": city.metadata,
        "zones": [
            {
                "id": z.id,
                "centroid": list(z.centroid),
                "polygon": [list(p) for p in z.polygon],
                "area": z.area,
                "residential_area": z.residential_area,
                "rent_per_m2": z.rent_per_m2,
                "pollution": z.pollution,
                "traffic_restricted": z.traffic_restricted,
                "employment_rate": dict(sorted(z.employment_rate.items())),
            }
            for z in city.zones
        ],
        "facilities": [
            {"id": f.id, "kind": f.kind, "location": list(f.location), "area": f.area}
            for f in city.facilities
        ],
        "services": [
            {
                "id": s.id,
                "kind": s.kind,
                "geometry": [list(p) for p in s.geometry],
                "service_range_km": s.service_range_km,
            }
            for s in city.services
        ],
        "networks": [
            {
                "mode": net.mode,
                "nodes": [[nid, xy[0], xy[1]] for nid, xy in sorted(net.nodes.items())],
                "edges": [[u, v, length, speed, line] for u, v, length, speed, line in net.edges],
                "zone_connectors": {
                    str(zid): [[c.node, c.access_min, c.access_cost] for c in conns]
                    for zid, conns in sorted(net.zone_connectors.items())
                },
                "access_speed_kmh": net.access_speed_kmh,
                "access_cutoff_km": net.access_cutoff_km,
                "taxi_fallback_cost_per_km": net.taxi_fallback_cost_per_km,
                "taxi_fallback_threshold_km": net.taxi_fallback_threshold_km,
            }
            for _mode, net in sorted(city.networks.items())
        ],
    }


def save_city(city: CityModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(city_to_dict(city), fh, sort_keys=True, indent=1)
        fh.write("\n")
