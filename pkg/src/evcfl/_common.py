"""Model-building pieces shared by the single- and multi-period builders:
the deployment variables (y counts, z open flags), their capacity linking
rows, the zone charger-mix quotas, and the scaled cost objective term."""

from __future__ import annotations

import numpy as np

from .domain import Instance
from .errors import ModelBuildError, ParameterError
from .milp import BINARY, GE, INTEGER, LE, MilpModel, ScalingSpec


def check_build_pre(inst: Instance, lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    inst.throughputs  # raises ModelBuildError when T % R_k != 0
    if inst.total_demand <= 0:
        raise ModelBuildError("instance has zero total demand")


def add_deployment(
    m: MilpModel, inst: Instance, lam: float, scaling: ScalingSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Add y (J x K integer) and z (J binary) with rows

        y_jk <= u_jk z_j            per-type caps
        sum_k y_jk <= u_j z_j       total caps
        sum_{j in zone} y_jk >= rho_lk * sum_{j in zone, k'} y_jk'   quotas

    and the (1 - lambda)-weighted cost objective.  Returns (y_ids, z_ids).
    """
    J, K = len(inst.stations), len(inst.chargers)
    y = m.add_vars(J * K, INTEGER, lb=0.0, prefix="y").reshape(J, K)
    z = m.add_vars(J, BINARY, prefix="z")

    u_type = np.array(
        [[s.cap_per_type[c.id] for c in inst.chargers] for s in inst.stations], dtype=float
    )
    m.set_var_bounds(y.ravel(), ub=u_type.ravel())

    for j, s in enumerate(inst.stations):
        for k, c in enumerate(inst.chargers):
            m.add_row([y[j, k], z[j]], [1.0, -u_type[j, k]], LE, 0.0, name=f"cap_type_{j}_{k}")
        m.add_row(
            list(y[j]) + [z[j]], [1.0] * K + [-float(s.cap_total)], LE, 0.0, name=f"cap_tot_{j}"
        )

    for zone in inst.zones:
        members = [inst.station_index[sid] for sid in inst.zone_stations.get(zone.id, ())]
        if not members:
            continue
        for k, c in enumerate(inst.chargers):
            rho = float(zone.min_share.get(c.id, 0.0))
            if rho <= 0.0:
                continue
            cols, vals = [], []
            for j in members:
                for k2 in range(K):
                    cols.append(y[j, k2])
                    vals.append((1.0 if k2 == k else 0.0) - rho)
            m.add_row(cols, vals, GE, 0.0, name=f"quota_{zone.id}_{k}")

    cost_w = (1.0 - lam) / scaling.cost_divisor
    f = np.array(
        [[s.install_cost[c.id] for c in inst.chargers] for s in inst.stations], dtype=float
    )
    m.add_objective_terms(y.ravel(), cost_w * f.ravel())
    m.add_objective_terms(z, cost_w * np.array([s.open_cost for s in inst.stations]))
    return y, z
