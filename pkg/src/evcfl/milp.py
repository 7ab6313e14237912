"""Backend-neutral MILP container and the solver contract.

A :class:`MilpModel` stores variables as parallel arrays plus named blocks,
constraints in CSR form, and a dense linear objective (always minimize).
Solving goes through a narrow backend interface; the reference backend is
HiGHS via ``scipy.optimize.milp``.  Backends are selected with the
``EVCFL_BACKEND`` environment variable (default ``highs``).

The HiGHS-via-scipy backend accepts but cannot forward a thread count or a
seed (the scipy wrapper exposes neither); solves are single-threaded and
deterministic.  The relative MIP gap is pinned to 1e-9 so "optimal" is
optimal to well below the tolerances used in tests.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint
from scipy.optimize import milp as _scipy_milp

from .domain import Instance
from .errors import BackendConfigError, ScalingError

LE, EQ, GE = "<=", "=", ">="

GAP_EPS = 1e-9  # floor for |objective| in the gap denominator


def gap_percent(objective: float, bound: float) -> float:
    """Gap% = 100 * (obj - bound) / max(|obj|, eps), for minimization."""
    return 100.0 * (objective - bound) / max(abs(objective), GAP_EPS)


@dataclass(frozen=True)
class ScalingSpec:
    """Objective divisors making both terms fall in [0, 1]: the largest
    node-station distance and the cost of opening everything at full
    capacity.  A divisor that would be zero falls back to 1."""

    distance_divisor: float
    cost_divisor: float

    def __post_init__(self):
        if self.distance_divisor <= 0 or self.cost_divisor <= 0:
            raise ScalingError(
                f"divisors must be positive, got ({self.distance_divisor}, {self.cost_divisor})"
            )

    def to_dict(self) -> dict:
        return {
            "distance_divisor": self.distance_divisor,
            "cost_divisor": self.cost_divisor,
        }


def make_scaling(inst: Instance) -> ScalingSpec:
    d_max = float(inst.dist.max()) if inst.dist.size else 0.0
    c_max = float(
        sum(
            s.open_cost + sum(s.install_cost[c.id] * s.cap_per_type[c.id] for c in inst.chargers)
            for s in inst.stations
        )
    )
    if d_max <= 0 and c_max <= 0:
        raise ScalingError("both scaling divisors are zero (no distances, no costs)")
    return ScalingSpec(distance_divisor=d_max or 1.0, cost_divisor=c_max or 1.0)


BINARY, INTEGER, CONTINUOUS = "binary", "integer", "continuous"


class MilpModel:
    """Linear minimize model; build with add_vars/add_row, then solve."""

    def __init__(self, name: str = "model", metadata: dict | None = None):
        self.name = name
        self.metadata: dict = dict(metadata or {})
        self._blocks: list[tuple[str, int, int, str]] = []  # prefix, start, count, kind
        self._prefixes: set[str] = set()
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._integrality: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._indptr: list[int] = [0]
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str | None] = []
        self._obj: dict[int, float] = {}
        self._frozen = False

    # --- construction -----------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self._lb)

    @property
    def num_rows(self) -> int:
        return len(self._rhs)

    def add_vars(
        self, count: int, kind: str, lb: float = 0.0, ub: float = np.inf, prefix: str = "v"
    ) -> np.ndarray:
        """Register ``count`` variables of one kind; returns their ids."""
        if self._frozen:
            raise RuntimeError("model already finalized")
        if prefix in self._prefixes:
            raise ValueError(f"duplicate variable prefix {prefix!r}")
        self._prefixes.add(prefix)
        start = self.num_vars
        if kind == BINARY:
            lb, ub, integ = 0.0, 1.0, 1
        elif kind == INTEGER:
            integ = 1
        elif kind == CONTINUOUS:
            integ = 0
        else:
            raise ValueError(f"unknown variable kind {kind!r}")
        self._lb.extend([lb] * count)
        self._ub.extend([ub] * count)
        self._integrality.extend([integ] * count)
        self._blocks.append((prefix, start, count, kind))
        return np.arange(start, start + count)

    def set_var_bounds(self, ids, lb=None, ub=None) -> None:
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        if lb is not None:
            for vid, v in zip(ids, np.broadcast_to(np.asarray(lb, dtype=float), ids.shape)):
                self._lb[int(vid)] = float(v)
        if ub is not None:
            for vid, v in zip(ids, np.broadcast_to(np.asarray(ub, dtype=float), ids.shape)):
                self._ub[int(vid)] = float(v)

    def add_row(self, cols, vals, sense: str, rhs: float, name: str | None = None) -> int:
        if self._frozen:
            raise RuntimeError("model already finalized")
        if sense not in (LE, EQ, GE):
            raise ValueError(f"unknown sense {sense!r}")
        cols = [int(c) for c in cols]
        if cols and (min(cols) < 0 or max(cols) >= self.num_vars):
            raise ValueError("constraint references unregistered variable")
        self._cols.extend(cols)
        self._vals.extend(float(v) for v in vals)
        self._indptr.append(len(self._cols))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        return self.num_rows - 1

    def add_pair_rows(self, cols_a, cols_b, coef_a: float, coef_b: float, sense: str, rhs: float):
        """Bulk adder for two-term rows coef_a*a + coef_b*b (sense) rhs."""
        if self._frozen:
            raise RuntimeError("model already finalized")
        cols_a = np.asarray(cols_a, dtype=np.int64)
        cols_b = np.asarray(cols_b, dtype=np.int64)
        n = len(cols_a)
        if n and (min(cols_a.min(), cols_b.min()) < 0 or max(cols_a.max(), cols_b.max()) >= self.num_vars):
            raise ValueError("constraint references unregistered variable")
        interleaved = np.empty(2 * n, dtype=np.int64)
        interleaved[0::2] = cols_a
        interleaved[1::2] = cols_b
        self._cols.extend(interleaved.tolist())
        self._vals.extend([coef_a, coef_b] * n)
        base = self._indptr[-1]
        self._indptr.extend(range(base + 2, base + 2 * n + 1, 2))
        self._senses.extend([sense] * n)
        self._rhs.extend([rhs] * n)
        self._row_names.extend([None] * n)

    def set_objective(self, cols, vals) -> None:
        self._obj = {int(c): float(v) for c, v in zip(cols, vals)}

    def add_objective_terms(self, cols, vals) -> None:
        for c, v in zip(cols, vals):
            self._obj[int(c)] = self._obj.get(int(c), 0.0) + float(v)

    # --- finalized views ----------------------------------------------------

    def finalize(self) -> None:
        """Freeze the model and materialize array views (idempotent)."""
        if self._frozen:
            return
        self._frozen = True
        self.lb = np.array(self._lb)
        self.ub = np.array(self._ub)
        self.integrality = np.array(self._integrality)
        self.row_rhs = np.array(self._rhs)
        self.row_senses = list(self._senses)
        self.matrix = sp.csr_array(
            (np.array(self._vals), np.array(self._cols, dtype=np.int64), np.array(self._indptr)),
            shape=(self.num_rows, self.num_vars),
        )
        obj = np.zeros(self.num_vars)
        for c, v in self._obj.items():
            obj[c] = v
        self.objective = obj

    def var_name(self, vid: int) -> str:
        for prefix, start, count, _ in self._blocks:
            if start <= vid < start + count:
                return f"{prefix}{vid - start}"
        raise IndexError(f"no variable {vid}")

    def var_kind(self, vid: int) -> str:
        for prefix, start, count, kind in self._blocks:
            if start <= vid < start + count:
                return kind
        raise IndexError(f"no variable {vid}")

    def row_name(self, row: int) -> str:
        return self._row_names[row] or f"c{row}"

    def constraint_residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row violation of constraints at x (0 when satisfied)."""
        self.finalize()
        ax = self.matrix @ x
        resid = np.zeros(self.num_rows)
        for r, sense in enumerate(self.row_senses):
            if sense == LE:
                resid[r] = max(0.0, ax[r] - self.row_rhs[r])
            elif sense == GE:
                resid[r] = max(0.0, self.row_rhs[r] - ax[r])
            else:
                resid[r] = abs(ax[r] - self.row_rhs[r])
        return resid

    # --- LP-format export (write-only, debugging) ---------------------------

    def to_lp_string(self) -> str:
        self.finalize()
        nz = np.flatnonzero(self.objective)
        obj_expr = (
            "".join(_lp_term(self.objective[v], self.var_name(int(v))) for v in nz) or " 0"
        )
        lines = [f"\\ {self.name}", "Minimize", " obj:" + obj_expr]
        lines.append("Subject To")
        m = self.matrix
        for r in range(self.num_rows):
            lo, hi = m.indptr[r], m.indptr[r + 1]
            expr = "".join(
                _lp_term(m.data[p], self.var_name(int(m.indices[p]))) for p in range(lo, hi)
            )
            if not expr:
                expr = " 0 " + self.var_name(0) if self.num_vars else " 0"
            lines.append(f" {self.row_name(r)}:{expr} {self.row_senses[r]} {self.row_rhs[r]:.12g}")
        lines.append("Bounds")
        for v in range(self.num_vars):
            lb, ub = self.lb[v], self.ub[v]
            name = self.var_name(v)
            if np.isinf(ub):
                lines.append(f" {lb:.12g} <= {name}")
            else:
                lines.append(f" {lb:.12g} <= {name} <= {ub:.12g}")
        generals = [self.var_name(v) for v in range(self.num_vars) if self.var_kind(v) == INTEGER]
        binaries = [self.var_name(v) for v in range(self.num_vars) if self.var_kind(v) == BINARY]
        if generals:
            lines.append("General")
            lines.append(" " + " ".join(generals))
        if binaries:
            lines.append("Binary")
            lines.append(" " + " ".join(binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"

    def write_lp(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_lp_string())


def _lp_term(coef: float, name: str) -> str:
    sign = " + " if coef >= 0 else " - "
    return f"{sign}{abs(coef):.12g} {name}"


def lp_relaxation(model: MilpModel) -> MilpModel:
    """Same model with integrality dropped (binary -> [0,1] continuous)."""
    model.finalize()
    relaxed = MilpModel(name=f"{model.name}-lp", metadata=dict(model.metadata))
    relaxed._blocks = [(p, s, c, CONTINUOUS) for p, s, c, _ in model._blocks]
    relaxed._prefixes = set(model._prefixes)
    relaxed._lb = list(model._lb)
    relaxed._ub = list(model._ub)
    relaxed._integrality = [0] * model.num_vars
    relaxed._cols = model._cols
    relaxed._vals = model._vals
    relaxed._indptr = model._indptr
    relaxed._senses = model._senses
    relaxed._rhs = model._rhs
    relaxed._row_names = model._row_names
    relaxed._obj = dict(model._obj)
    relaxed.finalize()
    return relaxed


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

OPTIMAL, FEASIBLE, INFEASIBLE, UNBOUNDED, ERROR = (
    "optimal",
    "feasible",
    "infeasible",
    "unbounded",
    "error",
)


@dataclass
class SolveResult:
    status: str
    values: np.ndarray | None = None
    objective: float | None = None
    bound: float | None = None
    gap_pct: float | None = None
    wall_time_s: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap_pct": self.gap_pct,
            "wall_time_s": self.wall_time_s,
            "message": self.message,
        }


class ScipyHighsBackend:
    """HiGHS through scipy.optimize.milp.  threads/seed are accepted for the
    backend contract but ignored (not exposed by scipy); solves are
    single-threaded and deterministic."""

    id = "highs"

    def __init__(self, mip_rel_gap: float = 1e-9):
        self.mip_rel_gap = mip_rel_gap

    def solve(
        self,
        model: MilpModel,
        time_limit_s: float | None = None,
        threads: int = 0,
        seed: int | None = None,
    ) -> SolveResult:
        model.finalize()
        options = {"mip_rel_gap": self.mip_rel_gap, "disp": False}
        if time_limit_s is not None:
            options["time_limit"] = float(time_limit_s)
        constraints = None
        if model.num_rows:
            lo = np.where(
                [s == LE for s in model.row_senses], -np.inf, model.row_rhs
            )
            hi = np.where(
                [s == GE for s in model.row_senses], np.inf, model.row_rhs
            )
            constraints = LinearConstraint(model.matrix, lo, hi)
        start = time.perf_counter()
        try:
            res = _scipy_milp(
                c=model.objective,
                constraints=constraints,
                integrality=model.integrality,
                bounds=Bounds(model.lb, model.ub),
                options=options,
            )
        except Exception as exc:  # numerical failure inside HiGHS
            return SolveResult(status=ERROR, message=str(exc), wall_time_s=time.perf_counter() - start)
        wall = time.perf_counter() - start
        return _map_scipy_result(res, wall)


def _map_scipy_result(res, wall: float) -> SolveResult:
    message = getattr(res, "message", "") or ""
    if res.status == 2:
        return SolveResult(status=INFEASIBLE, wall_time_s=wall, message=message)
    if res.status == 3:
        return SolveResult(status=UNBOUNDED, wall_time_s=wall, message=message)
    if res.x is None:
        return SolveResult(status=ERROR, wall_time_s=wall, message=message or "no incumbent")
    objective = float(res.fun)
    bound = res.mip_dual_bound
    bound = objective if bound is None else float(bound)  # pure LP: bound = optimum
    status = OPTIMAL if res.status == 0 else FEASIBLE
    return SolveResult(
        status=status,
        values=np.asarray(res.x, dtype=float),
        objective=objective,
        bound=bound,
        gap_pct=max(0.0, gap_percent(objective, bound)),
        wall_time_s=wall,
        message=message,
    )


_BACKENDS = {"highs": ScipyHighsBackend}


def get_backend(name: str | None = None):
    name = name or os.environ.get("EVCFL_BACKEND", "highs")
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise BackendConfigError(
            f"unknown backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None


def solve(
    model: MilpModel,
    time_limit_s: float | None = 3600.0,
    threads: int = 0,
    backend=None,
    seed: int | None = None,
) -> SolveResult:
    """Solve through the configured backend (threads=0 means all available,
    where the backend supports it)."""
    backend = backend or get_backend()
    return backend.solve(model, time_limit_s=time_limit_s, threads=threads, seed=seed)
