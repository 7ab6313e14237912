"""Multi-period capacitated facility-location model (MP-CFL).

Assignments are time-indexed (x_ijk^t) and a charge started in period t
holds its charger for R_k consecutive periods, so the capacity rows track
occupancy: for every (station, type, period)

    sum_i sum_{tau=0}^{W-1} d_i^{t-tau} x_ijk^{t-tau} <= y_jk,
    W = min(t, R_k)

which unifies the separate "warm-up" (t < R_k) and steady-state (t >= R_k)
constraint families into one window form.  There is no wrap-around at the
horizon: a charge started near the end simply extends past period T.

Demand satisfaction (sum over stations/types of x_ijk^t = 1) is imposed for
every node and period, including zero-demand ones, to match the formulation;
extraction canonicalizes zero-demand rows to all-zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import add_deployment, check_build_pre
from .domain import Assignment, Deployment, Instance
from .errors import ExtractionError
from .milp import CONTINUOUS, EQ, LE, MilpModel, ScalingSpec, SolveResult
from .sp_model import INTEGRALITY_TOL, ROW_SUM_TOL, _round_integers

ASSIGNMENT_EPS = 1e-12


@dataclass(frozen=True)
class MpVarIndex:
    """Bijection between (period, node, station, type) positions and ids.
    ``active_rows[t, i]`` marks rows with positive demand; the others are
    canonicalized to zero on extraction."""

    T: int
    I: int
    J: int
    K: int
    node_ids: tuple[int, ...]
    station_ids: tuple[int, ...]
    charger_ids: tuple[int, ...]
    active_rows: np.ndarray  # (T, I) bool

    def x(self, t: int, i: int, j: int, k: int) -> int:
        return ((t * self.I + i) * self.J + j) * self.K + k

    def y(self, j: int, k: int) -> int:
        return self.T * self.I * self.J * self.K + j * self.K + k

    def z(self, j: int) -> int:
        return self.T * self.I * self.J * self.K + self.J * self.K + j

    @property
    def num_vars(self) -> int:
        return self.T * self.I * self.J * self.K + self.J * self.K + self.J


def build_mp(
    inst: Instance, lam: float, scaling: ScalingSpec
) -> tuple[MilpModel, MpVarIndex]:
    """Build the MP-CFL MILP (see module docstring for the occupancy rows)."""
    check_build_pre(inst, lam)
    T, I, J, K = inst.periods, len(inst.nodes), len(inst.stations), len(inst.chargers)
    idx = MpVarIndex(
        T=T,
        I=I,
        J=J,
        K=K,
        node_ids=tuple(n.id for n in inst.nodes),
        station_ids=tuple(s.id for s in inst.stations),
        charger_ids=tuple(c.id for c in inst.chargers),
        active_rows=(inst.demand.T > 0),
    )
    m = MilpModel(
        name=f"mp_{lam}",
        metadata={"model": "mp", "lambda": lam, "scaling": scaling.to_dict()},
    )
    x = m.add_vars(T * I * J * K, CONTINUOUS, lb=0.0, ub=1.0, prefix="x").reshape(T, I, J, K)
    y, z = add_deployment(m, inst, lam, scaling)

    D = inst.demand  # (I, T) ints
    total = float(D.sum())
    R = [c.recharge_periods for c in inst.chargers]

    dist_w = lam / (total * scaling.distance_divisor)
    coef = dist_w * D.T[:, :, None, None] * inst.dist[None, :, :, None] * np.ones((1, 1, 1, K))
    m.add_objective_terms(x.ravel(), coef.ravel())

    ones = np.ones(J * K)
    for t in range(T):
        for i in range(I):
            m.add_row(x[t, i].ravel(), ones, EQ, 1.0, name=f"demand_{t}_{i}")

    # occupancy: zero-demand terms are dropped for sparsity
    nz_nodes = [np.flatnonzero(D[:, t]) for t in range(T)]
    for j in range(J):
        for k in range(K):
            for t in range(T):
                w = min(t + 1, R[k])  # t is 0-based here; W = min(t, R_k) for 1-based t
                cols, vals = [y[j, k]], [-1.0]
                for tau in range(w):
                    tt = t - tau
                    sel = nz_nodes[tt]
                    if len(sel):
                        cols.extend(x[tt, sel, j, k])
                        vals.extend(D[sel, tt].astype(float))
                m.add_row(cols, vals, LE, 0.0, name=f"occupancy_{j}_{k}_{t}")

    m.add_pair_rows(
        x.ravel(),
        np.broadcast_to(y[None, None], (T, I, J, K)).ravel(),
        1.0,
        -1.0,
        LE,
        0.0,
    )
    return m, idx


def extract_mp(result: SolveResult, index: MpVarIndex) -> tuple[Deployment, Assignment]:
    """Read (Deployment, Assignment) back from a solved MP model."""
    if not result.ok:
        raise ExtractionError(f"cannot extract from status {result.status!r}")
    v = result.values
    T, I, J, K = index.T, index.I, index.J, index.K
    nxy = T * I * J * K
    y = _round_integers(v[nxy : nxy + J * K].reshape(J, K), "y")
    z = _round_integers(v[nxy + J * K : nxy + J * K + J], "z")
    x = np.clip(v[:nxy].reshape(T, I, J, K), 0.0, 1.0)
    sums = x.reshape(T, I, -1).sum(axis=2)
    active = index.active_rows
    bad = active & (np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.any():
        t, i = map(int, np.argwhere(bad)[0])
        raise ExtractionError(
            f"assignment row (t={t}, i={i}) sums to {sums[t, i]:.8f}, expected 1"
        )
    x = np.where(active[:, :, None, None], x, 0.0)  # canonical zero rows
    dep = Deployment(
        open={index.station_ids[j]: bool(z[j]) for j in range(J)},
        counts={
            (index.station_ids[j], index.charger_ids[k]): int(y[j, k])
            for j in range(J)
            for k in range(K)
            if y[j, k]
        },
    )
    return dep, Assignment(mode="mp", values=x)


def assignment_to_nested(inst: Instance, asg: Assignment) -> dict:
    """Sparse {t: {i: {j: {k: x}}}} with 1-based period keys."""
    out: dict = {}
    x = asg.values
    for t in range(inst.periods):
        for i, n in enumerate(inst.nodes):
            for j, s in enumerate(inst.stations):
                for k, c in enumerate(inst.chargers):
                    v = float(x[t, i, j, k])
                    if v > ASSIGNMENT_EPS:
                        out.setdefault(str(t + 1), {}).setdefault(str(n.id), {}).setdefault(
                            str(s.id), {}
                        )[str(c.id)] = v
    return out


def assignment_from_nested(inst: Instance, data: dict) -> Assignment:
    x = np.zeros((inst.periods, len(inst.nodes), len(inst.stations), len(inst.chargers)))
    for t, per_node in data.items():
        for nid, per_station in per_node.items():
            for sid, per_type in per_station.items():
                for cid, v in per_type.items():
                    x[
                        int(t) - 1,
                        inst.node_index[int(nid)],
                        inst.station_index[int(sid)],
                        inst.charger_index[int(cid)],
                    ] = float(v)
    return Assignment(mode="mp", values=x)
