"""Single-period capacitated facility-location model (SP-CFL).

Demand is aggregated over the horizon (d_i = sum_t d_i^t) and each charger of
type k is credited with a horizon throughput of p_k = T / R_k vehicles.  The
objective is the convex combination

    lambda * (demand-weighted average travel distance) / D_max
    + (1 - lambda) * (opening + installation cost) / C_max

with the divisors taken from :func:`evcfl.milp.make_scaling`.  Note the
scaling makes lambda's numeric meaning depend on the instance; the
qualitative cost/distance trade-off is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import add_deployment, check_build_pre
from .domain import Assignment, Deployment, Instance
from .errors import ExtractionError
from .milp import CONTINUOUS, EQ, LE, MilpModel, ScalingSpec, SolveResult

INTEGRALITY_TOL = 1e-4
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class SpVarIndex:
    """Bijection between (node, station, type) positions and variable ids.

    All methods take canonical 0-based positions (instance member order);
    the id tuples give the corresponding domain ids."""

    I: int
    J: int
    K: int
    node_ids: tuple[int, ...]
    station_ids: tuple[int, ...]
    charger_ids: tuple[int, ...]

    def x(self, i: int, j: int, k: int) -> int:
        return (i * self.J + j) * self.K + k

    def y(self, j: int, k: int) -> int:
        return self.I * self.J * self.K + j * self.K + k

    def z(self, j: int) -> int:
        return self.I * self.J * self.K + self.J * self.K + j

    @property
    def num_vars(self) -> int:
        return self.I * self.J * self.K + self.J * self.K + self.J


def _make_index(inst: Instance) -> SpVarIndex:
    return SpVarIndex(
        I=len(inst.nodes),
        J=len(inst.stations),
        K=len(inst.chargers),
        node_ids=tuple(n.id for n in inst.nodes),
        station_ids=tuple(s.id for s in inst.stations),
        charger_ids=tuple(c.id for c in inst.chargers),
    )


def build_sp(
    inst: Instance,
    lam: float,
    scaling: ScalingSpec,
    include_strengthening: bool = True,
) -> tuple[MilpModel, SpVarIndex]:
    """Build the SP-CFL MILP.

    Rows: per-type and total charger caps tied to the open flag, full demand
    satisfaction per node, throughput capacity per (station, type), the
    redundant strengthening x_ijk <= y_jk (skippable for LP-bound
    experiments), and the zone quotas.
    """
    check_build_pre(inst, lam)
    idx = _make_index(inst)
    I, J, K = idx.I, idx.J, idx.K
    m = MilpModel(
        name=f"sp_{lam}",
        metadata={"model": "sp", "lambda": lam, "scaling": scaling.to_dict()},
    )
    x = m.add_vars(I * J * K, CONTINUOUS, lb=0.0, ub=1.0, prefix="x").reshape(I, J, K)
    y, z = add_deployment(m, inst, lam, scaling)

    d = inst.node_totals.astype(float)
    total = float(d.sum())
    p = inst.throughputs
    p_arr = np.array([p[c.id] for c in inst.chargers], dtype=float)

    dist_w = lam / (total * scaling.distance_divisor)
    coef = dist_w * d[:, None, None] * inst.dist[:, :, None] * np.ones((1, 1, K))
    m.add_objective_terms(x.ravel(), coef.ravel())

    for i in range(I):
        m.add_row(x[i].ravel(), np.ones(J * K), EQ, 1.0, name=f"demand_{i}")

    pos = np.flatnonzero(d > 0)
    for j in range(J):
        for k in range(K):
            cols = list(x[pos, j, k]) + [y[j, k]]
            vals = list(d[pos]) + [-p_arr[k]]
            m.add_row(cols, vals, LE, 0.0, name=f"capacity_{j}_{k}")

    if include_strengthening:
        m.add_pair_rows(x.ravel(), np.broadcast_to(y, (I, J, K)).ravel(), 1.0, -1.0, LE, 0.0)
    return m, idx


def _round_integers(values: np.ndarray, what: str) -> np.ndarray:
    rounded = np.rint(values)
    resid = np.abs(values - rounded).max() if values.size else 0.0
    if resid > INTEGRALITY_TOL:
        raise ExtractionError(
            f"{what} values are off integer by {resid:.2e} (> {INTEGRALITY_TOL}); "
            "backend integrality tolerance misconfigured?"
        )
    return rounded.astype(np.int64)


def extract_sp(result: SolveResult, index: SpVarIndex) -> tuple[Deployment, Assignment]:
    """Read (Deployment, Assignment) back from a solved SP model."""
    if not result.ok:
        raise ExtractionError(f"cannot extract from status {result.status!r}")
    v = result.values
    I, J, K = index.I, index.J, index.K
    nxy = I * J * K
    y = _round_integers(v[nxy : nxy + J * K].reshape(J, K), "y")
    z = _round_integers(v[nxy + J * K : nxy + J * K + J], "z")
    x = np.clip(v[:nxy].reshape(I, J, K), 0.0, 1.0)
    sums = x.reshape(I, -1).sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if bad.any():
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise ExtractionError(f"assignment row {i} sums to {sums[i]:.8f}, expected 1")
    dep = Deployment(
        open={index.station_ids[j]: bool(z[j]) for j in range(J)},
        counts={
            (index.station_ids[j], index.charger_ids[k]): int(y[j, k])
            for j in range(J)
            for k in range(K)
            if y[j, k]
        },
    )
    return dep, Assignment(mode="sp", values=x)


# --- solution JSON ----------------------------------------------------------

ASSIGNMENT_EPS = 1e-12  # drop numerically zero entries from solution files


def assignment_to_nested(inst: Instance, asg: Assignment) -> dict:
    """Sparse {i: {j: {k: x}}} (string keys, nonzero entries only)."""
    out: dict = {}
    x = asg.values
    for i, n in enumerate(inst.nodes):
        for j, s in enumerate(inst.stations):
            for k, c in enumerate(inst.chargers):
                v = float(x[i, j, k])
                if v > ASSIGNMENT_EPS:
                    out.setdefault(str(n.id), {}).setdefault(str(s.id), {})[str(c.id)] = v
    return out


def assignment_from_nested(inst: Instance, data: dict) -> Assignment:
    x = np.zeros((len(inst.nodes), len(inst.stations), len(inst.chargers)))
    for nid, per_station in data.items():
        for sid, per_type in per_station.items():
            for cid, v in per_type.items():
                x[
                    inst.node_index[int(nid)],
                    inst.station_index[int(sid)],
                    inst.charger_index[int(cid)],
                ] = float(v)
    return Assignment(mode="sp", values=x)
