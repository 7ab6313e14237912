"""Seeded generation of synthetic urban charging instances.

Two urban layouts are supported: concentric rings (COR, Burgess) where the
commercial zone is the central circle and residential/industrial are rings
around it, and sectors (SEC, Hoyt) where the three zones are equal 120-degree
slices of the full disc.  Demand nodes are uniform within their zone, station
candidates uniform over the whole disc.  Hourly demand comes from per-zone
level profiles (levels 0..3 = null/low/medium/high used as Poisson means),
normalized so each node requests about ``daily_target`` recharges per day.

Reproducibility contract: the RNG is numpy's PCG64 (``default_rng(seed)``)
and the draw order is fixed — node positions zone by zone (commercial,
residential, industrial; radial uniforms then angle uniforms per zone), then
station positions (radial then angle), then demand profiles node by node in
id order.  Identical params therefore yield byte-identical instance JSON on
this implementation; cross-implementation byte identity is not promised.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .domain import ChargerType, DemandNode, Instance, Station, Zone
from .errors import DegenerateProfileError, OutOfRegionError, ParameterError

ZONE_ORDER = ("commercial", "residential", "industrial")
ZONE_ID = {"commercial": 1, "residential": 2, "industrial": 3}

# Default cost/charger/quota parameters (currency units, hours).
DEFAULT_OPEN_COST = 100_000.0
DEFAULT_INSTALL_COST = {1: 3_000.0, 2: 25_000.0}  # 1 = quick, 2 = fast
DEFAULT_RECHARGE_PERIODS = {1: 4, 2: 1}
DEFAULT_MIN_SHARE = {
    "commercial": {1: 0.20, 2: 0.40},
    "residential": {1: 0.50, 2: 0.20},
    "industrial": {1: 0.25, 2: 0.25},
}

MAX_PROFILE_REDRAWS = 100
_REGION_TOL = 1e-6


def default_level_profiles(periods: int) -> dict[str, tuple[int, ...]]:
    """Shipped per-zone level profiles (an interpretation of typical urban
    demand shapes: commercial double peak with the afternoon one higher,
    residential evening/night peak, industrial midday peak and null nights).
    Available for the 24- and 8-period horizons."""
    raw = json.loads(
        resources.files("evcfl.data").joinpath("level_profiles.json").read_text()
    )
    try:
        table = raw[str(periods)]
    except KeyError:
        raise ParameterError(
            f"no default level profiles for T={periods}; supply level_profiles explicitly"
        ) from None
    return {kind: tuple(int(v) for v in levels) for kind, levels in table.items()}


@dataclass(frozen=True)
class GenParams:
    """Parameters of one synthetic instance; see module docstring."""

    urban_model: str  # "COR" | "SEC"
    nodes: int
    stations: int
    cap: int  # uniform u_j = u_jk
    periods: int = 24
    rays: tuple[float, float, float] = (1000.0, 2000.0, 3000.0)
    level_profiles: Mapping[str, Sequence[int]] | None = None
    daily_target: int = 10
    seed: int = 0

    @property
    def name(self) -> str:
        return f"{self.nodes}_{self.stations}_{self.cap}"

    def validate(self) -> None:
        if self.urban_model not in ("COR", "SEC"):
            raise ParameterError(f"urban_model must be COR or SEC, got {self.urban_model!r}")
        if self.nodes < 3:
            raise ParameterError("need at least 3 demand nodes (one per zone)")
        if self.stations < 1:
            raise ParameterError("need at least 1 candidate station")
        if self.cap < 0:
            raise ParameterError("cap must be nonnegative")
        if self.periods < 1:
            raise ParameterError("periods must be >= 1")
        if len(self.rays) != 3 or not (0 < self.rays[0] < self.rays[1] < self.rays[2]):
            raise ParameterError(f"rays must be strictly increasing, got {self.rays}")
        if self.daily_target < 1:
            raise ParameterError("daily_target must be >= 1")
        for kind, levels in self.resolved_profiles().items():
            if len(levels) != self.periods:
                raise ParameterError(
                    f"{kind} level profile has length {len(levels)}, expected T={self.periods}"
                )
            if any(v not in (0, 1, 2, 3) for v in levels):
                raise ParameterError(f"{kind} level profile has levels outside 0..3")

    def resolved_profiles(self) -> dict[str, tuple[int, ...]]:
        if self.level_profiles is None:
            return default_level_profiles(self.periods)
        out = {}
        for kind in ZONE_ORDER:
            if kind not in self.level_profiles:
                raise ParameterError(f"level_profiles missing zone kind {kind!r}")
            out[kind] = tuple(int(v) for v in self.level_profiles[kind])
        return out


def params_to_dict(p: GenParams) -> dict:
    out = {
        "urban_model": p.urban_model,
        "nodes": p.nodes,
        "stations": p.stations,
        "cap": p.cap,
        "periods": p.periods,
        "rays": list(p.rays),
        "daily_target": p.daily_target,
        "seed": p.seed,
    }
    if p.level_profiles is not None:
        out["level_profiles"] = {k: list(v) for k, v in p.level_profiles.items()}
    return out


def params_from_dict(data: Mapping) -> GenParams:
    profiles = data.get("level_profiles")
    return GenParams(
        urban_model=str(data["urban_model"]),
        nodes=int(data["nodes"]),
        stations=int(data["stations"]),
        cap=int(data["cap"]),
        periods=int(data.get("periods", 24)),
        rays=tuple(float(r) for r in data.get("rays", (1000.0, 2000.0, 3000.0))),
        level_profiles=(
            {k: tuple(int(x) for x in v) for k, v in profiles.items()}
            if profiles is not None
            else None
        ),
        daily_target=int(data.get("daily_target", 10)),
        seed=int(data.get("seed", 0)),
    )


def zone_of_point(params: GenParams, p: Sequence[float]) -> str:
    """Zone kind containing a point; boundary radii belong to the inner ring
    and sector edges to the sector starting there (half-open in angle)."""
    r = math.hypot(p[0], p[1])
    r1, r2, r3 = params.rays
    if r > r3 + _REGION_TOL:
        raise OutOfRegionError(f"point at radius {r:.3f} outside the {r3:.0f} m disc")
    if params.urban_model == "COR":
        if r <= r1:
            return "commercial"
        if r <= r2:
            return "residential"
        return "industrial"
    angle = math.atan2(p[1], p[0]) % (2 * math.pi)
    sector = int(angle / (2 * math.pi / 3))
    return ZONE_ORDER[min(sector, 2)]  # angle == 2*pi collapses to sector 0 via mod


def sample_profile(
    levels: Sequence[int], daily_target: int, rng: np.random.Generator
) -> tuple[int, ...]:
    """Draw one day of demand: Poisson(level_t) per period, then scale to the
    daily target with half-up nearest-integer rounding.  All-zero draws are
    redrawn; an all-null level profile exhausts the retry budget."""
    if daily_target < 1:
        raise ParameterError("daily_target must be >= 1")
    lam = np.asarray(levels, dtype=float)
    for _ in range(1 + MAX_PROFILE_REDRAWS):
        draws = rng.poisson(lam)
        total = draws.sum()
        if total > 0:
            scaled = np.floor(draws / total * daily_target + 0.5).astype(int)
            return tuple(int(v) for v in scaled)
    raise DegenerateProfileError(
        f"no positive demand after {MAX_PROFILE_REDRAWS} redraws (all-null profile?)"
    )


def _sample_ring(rng, n: int, r_in: float, r_out: float, a_from: float, a_to: float):
    """n uniform points in an annular sector via inverse-CDF on the radius;
    draws the radial uniform vector first, then the angular one."""
    u = rng.random(n)
    r = np.sqrt(r_in**2 + u * (r_out**2 - r_in**2))
    a = a_from + rng.random(n) * (a_to - a_from)
    return r * np.cos(a), r * np.sin(a)


def _zone_region(params: GenParams, kind: str) -> tuple[float, float, float, float]:
    r1, r2, r3 = params.rays
    if params.urban_model == "COR":
        radii = {"commercial": (0.0, r1), "residential": (r1, r2), "industrial": (r2, r3)}
        return (*radii[kind], 0.0, 2 * math.pi)
    third = 2 * math.pi / 3
    start = ZONE_ORDER.index(kind) * third
    return (0.0, r3, start, start + third)


def zone_node_counts(total: int) -> tuple[int, int, int]:
    """Split ``total`` nodes over the three zones, counts differing by at most
    one, extras going to commercial first then residential."""
    base, extra = divmod(total, 3)
    return tuple(base + (1 if i < extra else 0) for i in range(3))


def generate_instance(params: GenParams) -> Instance:
    """Deterministic instance for the given params (see module docstring for
    the exact RNG stream order)."""
    params.validate()
    profiles = params.resolved_profiles()
    rng = np.random.default_rng(params.seed)

    counts = zone_node_counts(params.nodes)
    node_xy: list[tuple[float, float, str]] = []
    for kind, n in zip(ZONE_ORDER, counts):
        xs, ys = _sample_ring(rng, n, *_zone_region(params, kind))
        node_xy.extend((float(x), float(y), kind) for x, y in zip(xs, ys))

    sx, sy = _sample_ring(rng, params.stations, 0.0, params.rays[2], 0.0, 2 * math.pi)

    nodes = []
    for idx, (x, y, kind) in enumerate(node_xy):
        profile = sample_profile(profiles[kind], params.daily_target, rng)
        nodes.append(DemandNode(id=idx + 1, x=x, y=y, zone_id=ZONE_ID[kind], profile=profile))

    stations = []
    for j in range(params.stations):
        x, y = float(sx[j]), float(sy[j])
        kind = zone_of_point(params, (x, y))
        stations.append(
            Station(
                id=j + 1,
                x=x,
                y=y,
                zone_id=ZONE_ID[kind],
                open_cost=DEFAULT_OPEN_COST,
                install_cost=dict(DEFAULT_INSTALL_COST),
                cap_per_type={k: params.cap for k in DEFAULT_INSTALL_COST},
                cap_total=params.cap,
            )
        )

    chargers = tuple(
        ChargerType(id=k, recharge_periods=r) for k, r in DEFAULT_RECHARGE_PERIODS.items()
    )
    zones = tuple(
        Zone(id=ZONE_ID[kind], kind=kind, min_share=dict(DEFAULT_MIN_SHARE[kind]))
        for kind in ZONE_ORDER
    )
    return Instance(
        periods=params.periods,
        chargers=chargers,
        zones=zones,
        stations=tuple(stations),
        nodes=tuple(nodes),
        horizon_label="1 day",
    )


def build_worstcase_instance(periods: int, demand_total: int, peak: int) -> Instance:
    """Single-type, single-peak family behind the 1 - 1/T unserved-demand
    bound: one node whose whole demand arises in period ``peak``, every point
    collocated so distances are exactly zero, R = 1 so one charger serves T
    vehicles per horizon."""
    if periods < 1:
        raise ParameterError("periods must be >= 1")
    if demand_total < 1 or demand_total % periods != 0:
        raise ParameterError(
            f"demand_total must be a positive multiple of T={periods}, got {demand_total}"
        )
    if not 1 <= peak <= periods:
        raise ParameterError(f"peak period {peak} outside 1..{periods}")
    profile = tuple(demand_total if t == peak - 1 else 0 for t in range(periods))
    return Instance(
        periods=periods,
        chargers=(ChargerType(id=1, recharge_periods=1),),
        zones=(Zone(id=1, kind="commercial", min_share={1: 0.0}),),
        stations=(
            Station(
                id=1,
                x=0.0,
                y=0.0,
                zone_id=1,
                open_cost=DEFAULT_OPEN_COST,
                install_cost={1: DEFAULT_INSTALL_COST[1]},
                cap_per_type={1: demand_total},
                cap_total=demand_total,
            ),
        ),
        nodes=(DemandNode(id=1, x=0.0, y=0.0, zone_id=1, profile=profile),),
        horizon_label=f"worst-case T={periods}",
    )
