"""Core data model: charging instances, deployments, assignments, validation.

An :class:`Instance` couples demand nodes (with per-period demand profiles),
candidate stations, zones with charger-mix quotas, and a charger catalog over
a discretized planning horizon of ``periods`` time periods.  All types are
immutable after construction and safe to share across threads.  Members are
stored sorted by id; array-shaped quantities (distance matrix, demand matrix,
assignments) follow that canonical order.

Units: distances are meters, costs are plain currency units, demand is in
EV-units (number of vehicles requesting a full recharge).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import ModelBuildError

ZONE_KINDS = ("commercial", "residential", "industrial")

POSITION_TOL = 1e-6  # max |stored distance - Euclidean| accepted, meters


def euclidean_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Straight-line distance in meters between two 2-D points."""
    return math.hypot(p[0] - q[0], p[1] - q[1])


@dataclass(frozen=True)
class ChargerType:
    """One charger technology: recharging a vehicle holds the charger for
    ``recharge_periods`` consecutive periods (R_k)."""

    id: int
    recharge_periods: int

    def throughput(self, periods: int) -> int:
        """Vehicles fully recharged per horizon by one charger (p_k = T / R_k)."""
        if self.recharge_periods < 1:
            raise ModelBuildError(f"charger {self.id}: recharge_periods must be >= 1")
        if periods % self.recharge_periods != 0:
            raise ModelBuildError(
                f"charger {self.id}: horizon T={periods} not divisible by "
                f"R={self.recharge_periods}, throughput p undefined"
            )
        return periods // self.recharge_periods


@dataclass(frozen=True)
class Zone:
    """Urban zone; ``min_share`` maps charger type id to the minimum fraction
    of the zone's installed chargers that must be of that type."""

    id: int
    kind: str
    min_share: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DemandNode:
    id: int
    x: float
    y: float
    zone_id: int
    profile: tuple[int, ...]

    @property
    def total(self) -> int:
        """Aggregate demand over the horizon (always derived from the profile)."""
        return sum(self.profile)


@dataclass(frozen=True)
class Station:
    """Candidate station: per-type install costs f_jk and capacities u_jk,
    plus the total charger cap u_j."""

    id: int
    x: float
    y: float
    zone_id: int
    open_cost: float
    install_cost: Mapping[int, float]
    cap_per_type: Mapping[int, int]
    cap_total: int


@dataclass(frozen=True, eq=False)
class Instance:
    """A complete problem instance on the bipartite node/station network."""

    periods: int
    chargers: tuple[ChargerType, ...]
    zones: tuple[Zone, ...]
    stations: tuple[Station, ...]
    nodes: tuple[DemandNode, ...]
    horizon_label: str = "1 day"
    distances: np.ndarray | None = None  # explicit I x J matrix, meters

    def __post_init__(self):
        object.__setattr__(self, "chargers", tuple(sorted(self.chargers, key=lambda c: c.id)))
        object.__setattr__(self, "zones", tuple(sorted(self.zones, key=lambda z: z.id)))
        object.__setattr__(self, "stations", tuple(sorted(self.stations, key=lambda s: s.id)))
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        if self.distances is not None:
            d = np.asarray(self.distances, dtype=float)
            if d.shape != (len(self.nodes), len(self.stations)):
                raise ValueError(
                    f"distance matrix shape {d.shape} != ({len(self.nodes)}, {len(self.stations)})"
                )
            d.flags.writeable = False
            object.__setattr__(self, "distances", d)

    # --- canonical index maps (positions in the sorted member tuples) ---

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def station_index(self) -> dict[int, int]:
        return {s.id: j for j, s in enumerate(self.stations)}

    @cached_property
    def charger_index(self) -> dict[int, int]:
        return {c.id: k for k, c in enumerate(self.chargers)}

    @cached_property
    def zone_index(self) -> dict[int, int]:
        return {z.id: l for l, z in enumerate(self.zones)}

    # --- derived matrices ---

    @cached_property
    def dist(self) -> np.ndarray:
        """I x J distance matrix, explicit if provided else Euclidean from positions."""
        if self.distances is not None:
            return self.distances
        nx = np.array([n.x for n in self.nodes])
        ny = np.array([n.y for n in self.nodes])
        sx = np.array([s.x for s in self.stations])
        sy = np.array([s.y for s in self.stations])
        d = np.hypot(nx[:, None] - sx[None, :], ny[:, None] - sy[None, :])
        d.flags.writeable = False
        return d

    @cached_property
    def demand(self) -> np.ndarray:
        """I x T integer demand matrix d_i^t."""
        d = np.array([n.profile for n in self.nodes], dtype=np.int64).reshape(
            len(self.nodes), self.periods
        )
        d.flags.writeable = False
        return d

    @cached_property
    def node_totals(self) -> np.ndarray:
        t = self.demand.sum(axis=1)
        t.flags.writeable = False
        return t

    @property
    def total_demand(self) -> int:
        return int(self.node_totals.sum())

    @cached_property
    def throughputs(self) -> dict[int, int]:
        """p_k per charger type id; raises ModelBuildError unless R_k divides T."""
        return {c.id: c.throughput(self.periods) for c in self.chargers}

    @cached_property
    def zone_stations(self) -> dict[int, tuple[int, ...]]:
        """Zone id -> station ids located in the zone (the partition A_l)."""
        out: dict[int, list[int]] = {z.id: [] for z in self.zones}
        for s in self.stations:
            out.setdefault(s.zone_id, []).append(s.id)
        return {zid: tuple(sids) for zid, sids in out.items()}

    @cached_property
    def zone_nodes(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {z.id: [] for z in self.zones}
        for n in self.nodes:
            out.setdefault(n.zone_id, []).append(n.id)
        return {zid: tuple(nids) for zid, nids in out.items()}


@dataclass(frozen=True)
class Deployment:
    """Open/installed decisions: z_j per station id, y_jk per (station id,
    charger id).  ``counts`` stores nonzero entries only."""

    open: Mapping[int, bool]
    counts: Mapping[tuple[int, int], int]

    def count(self, station_id: int, charger_id: int) -> int:
        return self.counts.get((station_id, charger_id), 0)

    def is_open(self, station_id: int) -> bool:
        return bool(self.open.get(station_id, False))

    @property
    def stations_open(self) -> int:
        return sum(1 for v in self.open.values() if v)

    def chargers_of_type(self, charger_id: int) -> int:
        return sum(v for (_, k), v in self.counts.items() if k == charger_id)

    @property
    def total_chargers(self) -> int:
        return sum(self.counts.values())

    def counts_array(self, inst: Instance) -> np.ndarray:
        """J x K integer array in the instance's canonical order."""
        y = np.zeros((len(inst.stations), len(inst.chargers)), dtype=np.int64)
        for (sid, cid), v in self.counts.items():
            y[inst.station_index[sid], inst.charger_index[cid]] = v
        return y


@dataclass(frozen=True)
class Assignment:
    """Fractional demand routing.  ``values`` has shape (I, J, K) in mode
    ``"sp"`` and (T, I, J, K) in mode ``"mp"``, indexed in the instance's
    canonical member order."""

    mode: str  # "sp" | "mp"
    values: np.ndarray

    def __post_init__(self):
        if self.mode not in ("sp", "mp"):
            raise ValueError(f"unknown assignment mode {self.mode!r}")
        v = np.asarray(self.values, dtype=float)
        want = 3 if self.mode == "sp" else 4
        if v.ndim != want:
            raise ValueError(f"mode {self.mode!r} expects a {want}-D array, got {v.ndim}-D")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def max_deployable_capacity(inst: Instance) -> int:
    """Largest achievable sum of p_k * y_jk: per station, fill the fastest
    (highest-throughput) types first within u_jk and u_j."""
    p = inst.throughputs
    order = sorted(inst.chargers, key=lambda c: -p[c.id])
    total = 0
    for s in inst.stations:
        remaining = s.cap_total
        for c in order:
            take = min(s.cap_per_type.get(c.id, 0), remaining)
            total += p[c.id] * take
            remaining -= take
    return total


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every structural invariant; returns a report instead of raising.

    Pure and idempotent.  Includes the aggregate necessary capacity condition
    (total demand must not exceed the maximum deployable charging capacity,
    otherwise the single-period model is already infeasible).
    """
    rep = ValidationReport()
    err, warn = rep.errors.append, rep.warnings.append

    if inst.periods < 1:
        err(f"periods must be >= 1, got {inst.periods}")

    charger_ids = [c.id for c in inst.chargers]
    if len(set(charger_ids)) != len(charger_ids):
        err("duplicate charger ids")
    if not inst.chargers:
        err("no charger types")
    divisible = True
    for c in inst.chargers:
        if c.recharge_periods < 1:
            err(f"charger {c.id}: recharge_periods {c.recharge_periods} < 1")
            divisible = False
        elif inst.periods % c.recharge_periods != 0:
            err(
                f"charger {c.id}: T={inst.periods} not divisible by R={c.recharge_periods} "
                "(throughput p_k undefined)"
            )
            divisible = False

    zone_ids = {z.id for z in inst.zones}
    if len(zone_ids) != len(inst.zones):
        err("duplicate zone ids")
    for z in inst.zones:
        if z.kind not in ZONE_KINDS:
            warn(f"zone {z.id}: unknown kind {z.kind!r}")
        share_sum = 0.0
        for k, rho in z.min_share.items():
            if k not in set(charger_ids):
                err(f"zone {z.id}: min_share references unknown charger {k}")
            if not 0.0 <= rho <= 1.0:
                err(f"zone {z.id}: min_share[{k}]={rho} outside [0,1]")
            share_sum += rho
        if share_sum > 1.0 + 1e-12:
            err(f"zone {z.id}: sum of min shares {share_sum:.4f} > 1 (quotas unsatisfiable)")

    node_ids = [n.id for n in inst.nodes]
    if len(set(node_ids)) != len(node_ids):
        err("duplicate node ids")
    for n in inst.nodes:
        if n.zone_id not in zone_ids:
            err(f"node {n.id}: zone {n.zone_id} does not exist")
        if len(n.profile) != inst.periods:
            err(f"node {n.id}: profile length {len(n.profile)} != T={inst.periods}")
        if any(v < 0 for v in n.profile):
            err(f"node {n.id}: negative demand in profile")
        if n.total != sum(n.profile):
            err(f"profile/total mismatch at node {n.id}")

    station_ids = [s.id for s in inst.stations]
    if len(set(station_ids)) != len(station_ids):
        err("duplicate station ids")
    for s in inst.stations:
        if s.zone_id not in zone_ids:
            err(f"station {s.id}: zone {s.zone_id} does not exist")
        if s.open_cost < 0:
            err(f"station {s.id}: negative open cost")
        if s.cap_total < 0:
            err(f"station {s.id}: negative total capacity")
        for c in inst.chargers:
            if c.id not in s.cap_per_type:
                err(f"station {s.id}: missing cap_per_type entry for charger {c.id}")
            if c.id not in s.install_cost:
                err(f"station {s.id}: missing install_cost entry for charger {c.id}")
        for k, u in s.cap_per_type.items():
            if u < 0:
                err(f"station {s.id}: negative cap for charger {k}")
            elif u > s.cap_total:
                # legal (the total cap dominates) but worth flagging
                warn(f"station {s.id}: cap_per_type[{k}]={u} exceeds cap_total={s.cap_total}")
        for k, f in s.install_cost.items():
            if f < 0:
                err(f"station {s.id}: negative install cost for charger {k}")

    d = inst.dist
    if np.any(d < 0):
        err("negative distances in matrix")
    if inst.distances is not None and inst.nodes and inst.stations:
        for i, n in enumerate(inst.nodes):
            for j, s in enumerate(inst.stations):
                ref = euclidean_distance((n.x, n.y), (s.x, s.y))
                if abs(d[i, j] - ref) > POSITION_TOL:
                    err(
                        f"distance[{n.id},{s.id}]={d[i, j]:.6f} differs from Euclidean "
                        f"{ref:.6f} by more than {POSITION_TOL} m"
                    )

    if rep.ok and divisible and inst.nodes and inst.stations:
        cap = max_deployable_capacity(inst)
        total = inst.total_demand
        if total > cap:
            err(
                f"SP capacity shortfall: total demand {total} exceeds max deployable "
                f"capacity {cap} EV-equivalents"
            )
    return rep


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    """Canonical JSON-ready form; byte-identical emission via sorted keys."""
    out = {
        "periods": inst.periods,
        "horizon": inst.horizon_label,
        "chargers": [
            {"id": c.id, "recharge_periods": c.recharge_periods} for c in inst.chargers
        ],
        "zones": [
            {
                "id": z.id,
                "kind": z.kind,
                "min_share": {str(k): float(v) for k, v in z.min_share.items()},
            }
            for z in inst.zones
        ],
        "stations": [
            {
                "id": s.id,
                "x": float(s.x),
                "y": float(s.y),
                "zone": s.zone_id,
                "open_cost": float(s.open_cost),
                "install_cost": {str(k): float(v) for k, v in s.install_cost.items()},
                "cap_per_type": {str(k): int(v) for k, v in s.cap_per_type.items()},
                "cap_total": int(s.cap_total),
            }
            for s in inst.stations
        ],
        "nodes": [
            {
                "id": n.id,
                "x": float(n.x),
                "y": float(n.y),
                "zone": n.zone_id,
                "profile": [int(v) for v in n.profile],
            }
            for n in inst.nodes
        ],
    }
    if inst.distances is not None:
        out["distances"] = [[float(v) for v in row] for row in inst.distances]
    return out


def instance_from_dict(data: Mapping) -> Instance:
    chargers = tuple(
        ChargerType(id=int(c["id"]), recharge_periods=int(c["recharge_periods"]))
        for c in data["chargers"]
    )
    zones = tuple(
        Zone(
            id=int(z["id"]),
            kind=str(z["kind"]),
            min_share={int(k): float(v) for k, v in z.get("min_share", {}).items()},
        )
        for z in data["zones"]
    )
    stations = tuple(
        Station(
            id=int(s["id"]),
            x=float(s["x"]),
            y=float(s["y"]),
            zone_id=int(s["zone"]),
            open_cost=float(s["open_cost"]),
            install_cost={int(k): float(v) for k, v in s["install_cost"].items()},
            cap_per_type={int(k): int(v) for k, v in s["cap_per_type"].items()},
            cap_total=int(s["cap_total"]),
        )
        for s in data["stations"]
    )
    nodes = tuple(
        DemandNode(
            id=int(n["id"]),
            x=float(n["x"]),
            y=float(n["y"]),
            zone_id=int(n["zone"]),
            profile=tuple(int(v) for v in n["profile"]),
        )
        for n in data["nodes"]
    )
    distances = None
    if "distances" in data:
        distances = np.array(data["distances"], dtype=float)
    return Instance(
        periods=int(data["periods"]),
        chargers=chargers,
        zones=zones,
        stations=stations,
        nodes=nodes,
        horizon_label=str(data.get("horizon", "1 day")),
        distances=distances,
    )


def instance_to_json(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, indent=2) + "\n"


def dump_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(instance_to_json(inst))


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def deployment_to_dict(dep: Deployment) -> dict:
    counts: dict[str, dict[str, int]] = {}
    for (sid, cid), v in sorted(dep.counts.items()):
        if v:
            counts.setdefault(str(sid), {})[str(cid)] = int(v)
    return {
        "open": sorted(sid for sid, flag in dep.open.items() if flag),
        "counts": counts,
    }


def deployment_from_dict(data: Mapping, inst: Instance) -> Deployment:
    open_ids = {int(sid) for sid in data.get("open", [])}
    open_map = {s.id: (s.id in open_ids) for s in inst.stations}
    counts = {}
    for sid, per_type in data.get("counts", {}).items():
        for cid, v in per_type.items():
            if int(v):
                counts[(int(sid), int(cid))] = int(v)
    return Deployment(open=open_map, counts=counts)
