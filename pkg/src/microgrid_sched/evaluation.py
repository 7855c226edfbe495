"""Schedule solutions, independent cost/feasibility audit, and a brute-force oracle.

Nothing here reuses the model's objective vector or constraint rows: costs are
recomputed from the dispatch itself and every constraint family is re-checked from
the microgrid data. That keeps the evaluator usable as ground truth for the solver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .domain import DmoSchedule, MicrogridSpec, StorageMode
from .formulation import build_model
from .formulation.model import MilpModel, VariableIndex
from .uncertainty import ScenarioSet

FEAS_TOL = 1e-6
COST_COMPONENTS = ("generation", "no_load", "startup", "shutdown", "curtailment", "penalty")


class DimensionError(ValueError):
    pass


class OracleScaleError(ValueError):
    pass


_ARRAYS = ("I", "u", "v", "z", "delta", "P", "P_storage", "C", "D", "PM", "LS", "dP", "dPplus")
_COUNTERS = ("T_on", "T_off", "T_ch", "T_dch")


@dataclass
class ScheduleSolution:
    """Decision values of one schedule. Time axes: hourly ``T`` or sub-period ``N = T*K``.

    Shapes: ``I (G,T)``, ``u, v (S_sto,T)``, ``z (D,T)``, ``delta (T,S)``,
    ``P (G,N,S)`` for dispatchable units, ``P_storage, C (S_sto,N,S)``, ``D (D,N,S)``,
    ``PM, LS, dP, dPplus (N,S)``.
    """

    I: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    delta: np.ndarray
    P: np.ndarray
    P_storage: np.ndarray
    C: np.ndarray
    D: np.ndarray
    PM: np.ndarray
    LS: np.ndarray
    dP: np.ndarray
    dPplus: np.ndarray
    objective: float | None = None
    status: str = "optimal"
    T_on: np.ndarray | None = None
    T_off: np.ndarray | None = None
    T_ch: np.ndarray | None = None
    T_dch: np.ndarray | None = None

    @classmethod
    def zeros(cls, spec: MicrogridSpec, n_scenarios: int, status: str = "optimal") -> "ScheduleSolution":
        T, N, S = spec.time_grid.n_hours, spec.time_grid.n_steps, n_scenarios
        G, B, D = len(spec.dispatchable_units), len(spec.storage_units), len(spec.adjustable_loads)
        return cls(
            I=np.zeros((G, T)), u=np.zeros((B, T)), v=np.zeros((B, T)), z=np.zeros((D, T)),
            delta=np.zeros((T, S)), P=np.zeros((G, N, S)), P_storage=np.zeros((B, N, S)),
            C=np.zeros((B, N, S)), D=np.zeros((D, N, S)), PM=np.zeros((N, S)), LS=np.zeros((N, S)),
            dP=np.zeros((N, S)), dPplus=np.zeros((N, S)), status=status,
        )

    @classmethod
    def from_dict(cls, d: dict, spec: MicrogridSpec, n_scenarios: int) -> "ScheduleSolution":
        """Inverse of :meth:`to_dict`; shapes are checked against ``spec``."""
        sol = cls.zeros(spec, n_scenarios, d.get("status", "optimal"))
        sol.objective = d.get("objective")
        for name in _ARRAYS:
            template = getattr(sol, name)
            arr = np.asarray(d[name], dtype=float)
            if arr.size != template.size or (arr.size and arr.shape != template.shape):
                raise DimensionError(f"{name}: expected shape {template.shape}, got {arr.shape}")
            setattr(sol, name, arr.reshape(template.shape))
        for name in _COUNTERS:
            if d.get(name) is not None:
                setattr(sol, name, np.asarray(d[name], dtype=int))
        return sol

    def to_dict(self) -> dict:
        out = {"status": self.status, "objective": self.objective}
        for name in _ARRAYS + _COUNTERS:
            arr = getattr(self, name)
            out[name] = None if arr is None else arr.tolist()
        return out


def solution_from_vector(spec: MicrogridSpec, scenarios: ScenarioSet, index: VariableIndex, x,
                         objective: float | None = None, status: str = "optimal") -> ScheduleSolution:
    """Unpack a column vector of the built model into a :class:`ScheduleSolution`."""
    sol = ScheduleSolution.zeros(spec, len(scenarios), status)
    sol.objective = objective
    K = spec.time_grid.subperiods_per_hour
    gen_pos = {g.id: n for n, g in enumerate(spec.dispatchable_units)}
    sto_pos = {st.id: n for n, st in enumerate(spec.storage_units)}
    dr_pos = {d.id: n for n, d in enumerate(spec.adjustable_loads)}
    for col, key in enumerate(index.keys()):
        val = float(x[col])
        kind = key[0]
        if kind == "I":
            sol.I[gen_pos[key[1]], key[2]] = val
        elif kind == "u":
            sol.u[sto_pos[key[1]], key[2]] = val
        elif kind == "v":
            sol.v[sto_pos[key[1]], key[2]] = val
        elif kind == "z":
            sol.z[dr_pos[key[1]], key[2]] = val
        elif kind == "delta":
            sol.delta[key[1], key[2]] = val
        elif kind == "P":
            _, aid, t, tau, s = key
            if aid in gen_pos:
                sol.P[gen_pos[aid], t * K + tau, s] = val
            else:
                sol.P_storage[sto_pos[aid], t * K + tau, s] = val
        elif kind == "C":
            _, aid, t, tau, s = key
            sol.C[sto_pos[aid], t * K + tau, s] = val
        elif kind == "D":
            _, aid, t, tau, s = key
            sol.D[dr_pos[aid], t * K + tau, s] = val
        elif kind in ("PM", "LS", "dP", "dPplus"):
            _, t, tau, s = key
            getattr(sol, kind)[t * K + tau, s] = val
    return sol


def _runs(values, init_state: int, init_hours: int, on: bool):
    """Run-length counter of hours spent in state ``on`` (1) / off (0)."""
    out = np.zeros(len(values))
    prev = init_hours if (init_state == 1) == on else 0
    for t, v in enumerate(values):
        active = (round(v) == 1) == on
        prev = prev + 1 if active else 0
        out[t] = prev
    return out


def reconstruct_counters(sol: ScheduleSolution, spec: MicrogridSpec) -> ScheduleSolution:
    """Fill T_on/T_off (units) and T_ch/T_dch (storage) by run length over hours."""
    T_on, T_off = [], []
    for n, g in enumerate(spec.dispatchable_units):
        state = 1 if g.init_committed else 0
        hours = g.init_on_hours if g.init_committed else g.init_off_hours
        T_on.append(_runs(sol.I[n], state, hours, True))
        T_off.append(_runs(sol.I[n], state, hours, False))
    T_ch, T_dch = [], []
    for n, st in enumerate(spec.storage_units):
        ch0 = 1 if st.init_mode == StorageMode.CHARGING else 0
        dch0 = 1 if st.init_mode == StorageMode.DISCHARGING else 0
        T_ch.append(_runs(sol.v[n], ch0, st.init_mode_hours, True))
        T_dch.append(_runs(sol.u[n], dch0, st.init_mode_hours, True))
    T = spec.time_grid.n_hours
    return replace(
        sol,
        T_on=np.array(T_on).reshape(-1, T),
        T_off=np.array(T_off).reshape(-1, T),
        T_ch=np.array(T_ch).reshape(-1, T),
        T_dch=np.array(T_dch).reshape(-1, T),
    )


@dataclass(frozen=True)
class Violation:
    family: str
    indices: tuple
    residual: float


@dataclass
class CostReport:
    expected_total: float
    scenario_costs: list[dict[str, float]]
    probabilities: list[float]
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def expected(self, component: str) -> float:
        return float(sum(p * c[component] for p, c in zip(self.probabilities, self.scenario_costs)))

    def expected_components(self) -> dict[str, float]:
        return {name: self.expected(name) for name in COST_COMPONENTS}

    @property
    def expected_generation(self) -> float:
        """Dispatchable operating cost: energy, no-load, startup and shutdown."""
        return sum(self.expected(c) for c in ("generation", "no_load", "startup", "shutdown"))

    def conditional(self, component: str, mask) -> float:
        """Probability-weighted ``component`` over scenarios selected by ``mask``."""
        return float(sum(p * c[component] for p, c, m in zip(self.probabilities, self.scenario_costs, mask) if m))

    def to_dict(self) -> dict:
        return {
            "expected_total": self.expected_total,
            "expected_components": self.expected_components(),
            "scenarios": [dict(c, probability=p) for p, c in zip(self.probabilities, self.scenario_costs)],
            "violations": [{"family": v.family, "indices": list(v.indices), "residual": v.residual}
                           for v in self.violations],
        }


def _check_dims(spec: MicrogridSpec, scenarios: ScenarioSet, sol: ScheduleSolution) -> None:
    T, N, S = spec.time_grid.n_hours, spec.time_grid.n_steps, len(scenarios)
    G, B, D = len(spec.dispatchable_units), len(spec.storage_units), len(spec.adjustable_loads)
    expected = {
        "I": (G, T), "u": (B, T), "v": (B, T), "z": (D, T), "delta": (T, S), "P": (G, N, S),
        "P_storage": (B, N, S), "C": (B, N, S), "D": (D, N, S), "PM": (N, S), "LS": (N, S),
        "dP": (N, S), "dPplus": (N, S),
    }
    for name, shape in expected.items():
        got = np.shape(getattr(sol, name))
        if got != shape:
            raise DimensionError(f"{name}: expected shape {shape}, got {got}")


def _min_run_violations(values, prev_state, init_hours, length, on, family, ident, out, tol):
    """Each switch into state ``on`` must persist ``length`` hours (truncated at the end)."""
    vals = np.round(values).astype(int)
    n = len(vals)
    target = 1 if on else 0
    if length >= 2 and prev_state == target and init_hours < length:
        for t in range(min(n, length - init_hours)):
            if vals[t] != target:
                out.append(Violation(family, (ident, t, "initial"), 1.0))
    prev = prev_state
    for t in range(n):
        if vals[t] == target and prev != target and length >= 2:
            for tt in range(t, min(n, t + length)):
                if vals[tt] != target:
                    out.append(Violation(family, (ident, tt, f"switch@{t}"), 1.0))
        prev = vals[t]


def evaluate(spec: MicrogridSpec, scenarios: ScenarioSet, dmo: DmoSchedule, sol: ScheduleSolution,
             tol: float = FEAS_TOL) -> CostReport:
    """Recompute every cost term from the raw schedule and audit all constraint families."""
    _check_dims(spec, scenarios, sol)
    grid = spec.time_grid
    T, K, N, dt = grid.n_hours, grid.subperiods_per_hour, grid.n_steps, grid.delta_tau
    hour = np.repeat(np.arange(T), K)
    psched = np.asarray(dmo.p_sched, dtype=float)[hour]
    M = dmo.p_m_max
    viol: list[Violation] = []

    def flag(family, idx, residual):
        if residual > tol:
            viol.append(Violation(family, tuple(idx), float(residual)))

    # --- first stage -------------------------------------------------------
    for name in ("I", "u", "v", "z", "delta"):
        arr = getattr(sol, name)
        for idx in zip(*np.nonzero(np.minimum(np.abs(arr), np.abs(arr - 1)) > tol)):
            viol.append(Violation("binary", (name,) + tuple(int(i) for i in idx), float(arr[idx])))

    I = np.round(sol.I)
    for n, g in enumerate(spec.dispatchable_units):
        prev_state = 1 if g.init_committed else 0
        _min_run_violations(I[n], prev_state, g.init_on_hours, g.min_up, True, "min-up", g.id, viol, tol)
        _min_run_violations(I[n], prev_state, g.init_off_hours, g.min_down, False, "min-down", g.id, viol, tol)

    for n, st in enumerate(spec.storage_units):
        for t in range(T):
            flag("storage-mode", (st.id, t), sol.u[n, t] + sol.v[n, t] - 1.0)
        ch0 = 1 if st.init_mode == StorageMode.CHARGING else 0
        dch0 = 1 if st.init_mode == StorageMode.DISCHARGING else 0
        _min_run_violations(sol.v[n], ch0, st.init_mode_hours, st.min_charge_time, True, "min-charge", st.id,
                            viol, tol)
        _min_run_violations(sol.u[n], dch0, st.init_mode_hours, st.min_discharge_time, True, "min-discharge",
                            st.id, viol, tol)

    for n, d in enumerate(spec.adjustable_loads):
        window = list(d.hours())
        outside = [t for t in range(T) if t not in window]
        for t in outside:
            flag("dr-limits", (d.id, t, "z-outside"), abs(sol.z[n, t]))
        _min_run_violations(sol.z[n, window], 0, 0, d.min_operating_time, True, "min-operating", d.id, viol, tol)

    # --- per scenario ------------------------------------------------------
    scenario_costs = []
    for s, sc in enumerate(scenarios):
        costs = dict.fromkeys(COST_COMPONENTS, 0.0)
        supply = sol.PM[:, s] + sol.LS[:, s] + sc.renewables.sum(axis=0)
        demand = sc.loads.sum(axis=0).astype(float).copy()

        for n, g in enumerate(spec.dispatchable_units):
            p = sol.P[n, :, s]
            on = I[n][hour]
            supply = supply + p
            for k in range(N):
                flag("unit-limits", (g.id, k, s, "min"), g.p_min * on[k] - p[k])
                flag("unit-limits", (g.id, k, s, "max"), p[k] - g.p_max * on[k])
            prev_p = g.init_power if g.init_committed else 0.0
            prev_on = 1.0 if g.init_committed else 0.0
            for k in range(N):
                t = k // K
                on_prev_hour = prev_on if t == 0 else I[n, t - 1]
                allowance_up = g.ramp_up
                allowance_dn = g.ramp_down
                if k % K == 0:
                    allowance_up += g.p_min * (I[n, t] - on_prev_hour)
                    allowance_dn += g.p_min * (on_prev_hour - I[n, t])
                flag("ramp", (g.id, k, s, "up"), p[k] - prev_p - allowance_up)
                flag("ramp", (g.id, k, s, "down"), prev_p - p[k] - allowance_dn)
                prev_p = p[k]
            costs["generation"] += dt * sum(g.energy_cost(max(pk, 0.0)) for pk in p)
            costs["no_load"] += g.no_load_cost * float(I[n].sum())
            prev = np.concatenate([[prev_on], I[n][:-1]])
            costs["startup"] += g.startup_cost * float(np.maximum(I[n] - prev, 0).sum())
            costs["shutdown"] += g.shutdown_cost * float(np.maximum(prev - I[n], 0).sum())

        for n, st in enumerate(spec.storage_units):
            p = sol.P_storage[n, :, s]
            c = sol.C[n, :, s]
            supply = supply + p
            u = sol.u[n][hour]
            v = sol.v[n][hour]
            level = st.initial_energy
            for k in range(N):
                flag("storage-limits", (st.id, k, s, "max"), p[k] - (st.p_dch_max * u[k] - st.p_ch_min * v[k]))
                flag("storage-limits", (st.id, k, s, "min"), (st.p_dch_min * u[k] - st.p_ch_max * v[k]) - p[k])
                level = level - dt * p[k]
                flag("storage-energy", (st.id, k, s, "update"), abs(c[k] - level))
                flag("storage-energy", (st.id, k, s, "min"), -c[k])
                flag("storage-energy", (st.id, k, s, "max"), c[k] - st.c_max)
                level = c[k]

        for n, d in enumerate(spec.adjustable_loads):
            q = sol.D[n, :, s]
            demand = demand + q
            z = sol.z[n][hour]
            in_window = (hour >= d.window_start) & (hour <= d.window_end)
            for k in range(N):
                if in_window[k]:
                    flag("dr-limits", (d.id, k, s, "min"), d.d_min * z[k] - q[k])
                    flag("dr-limits", (d.id, k, s, "max"), q[k] - d.d_max * z[k])
                else:
                    flag("dr-limits", (d.id, k, s, "outside"), abs(q[k]))
            flag("dr-energy", (d.id, s), abs(dt * float(q[in_window].sum()) - d.energy_required))

        for k in range(N):
            flag("balance", (k, s), abs(supply[k] - demand[k]))

        U = sc.grid_connected.astype(float)
        pm, ls, dp, dpp = sol.PM[:, s], sol.LS[:, s], sol.dP[:, s], sol.dPplus[:, s]
        for k in range(N):
            t = k // K
            flag("islanding", (k, s), abs(pm[k]) - M * U[k])
            flag("load-shedding", (k, s), -ls[k])
            if not spec.allow_load_shedding:
                flag("load-shedding", (k, s, "disallowed"), ls[k])
            flag("deviation", (k, s), abs(dp[k] - (pm[k] - psched[k])))
            dl = sol.delta[t, s]
            flag("positive-part", (k, s, "nonneg"), -dpp[k])
            flag("positive-part", (k, s, "ub"), dpp[k] - M * dl)
            flag("positive-part", (k, s, "link"), abs(dp[k] - dpp[k]) - M * (1 - dl))
            flag("positive-part", (k, s, "sign"), dp[k] - M * dl)

        costs["curtailment"] = dt * spec.voll * float(ls.sum())
        costs["penalty"] = dt * dmo.penalty * float(np.maximum(pm - psched, 0.0).sum())
        costs["total"] = sum(costs[c] for c in COST_COMPONENTS)
        scenario_costs.append(costs)

    probs = [sc.probability for sc in scenarios]
    expected_total = float(sum(p * c["total"] for p, c in zip(probs, scenario_costs)))
    return CostReport(expected_total, scenario_costs, probs, viol)


def hourly_costs(spec: MicrogridSpec, scenarios: ScenarioSet, dmo: DmoSchedule,
                 sol: ScheduleSolution) -> dict[str, np.ndarray]:
    """Expected cost per hour for each component (arrays of length ``n_hours``)."""
    _check_dims(spec, scenarios, sol)
    grid = spec.time_grid
    T, K, dt = grid.n_hours, grid.subperiods_per_hour, grid.delta_tau
    hour = np.repeat(np.arange(T), K)
    psched = np.asarray(dmo.p_sched, dtype=float)[hour]
    out = {c: np.zeros(T) for c in COST_COMPONENTS}
    I = np.round(sol.I)
    for n, g in enumerate(spec.dispatchable_units):
        prev = np.concatenate([[1.0 if g.init_committed else 0.0], I[n][:-1]])
        out["no_load"] += g.no_load_cost * I[n]
        out["startup"] += g.startup_cost * np.maximum(I[n] - prev, 0)
        out["shutdown"] += g.shutdown_cost * np.maximum(prev - I[n], 0)
    for s, sc in enumerate(scenarios):
        pr = sc.probability
        for n, g in enumerate(spec.dispatchable_units):
            energy = np.array([g.energy_cost(max(p, 0.0)) for p in sol.P[n, :, s]])
            out["generation"] += pr * dt * energy.reshape(T, K).sum(axis=1)
        out["curtailment"] += pr * dt * spec.voll * sol.LS[:, s].reshape(T, K).sum(axis=1)
        over = np.maximum(sol.PM[:, s] - psched, 0.0)
        out["penalty"] += pr * dt * dmo.penalty * over.reshape(T, K).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# brute-force oracle


def _binary_only_rows(model: MilpModel, binary_set: set[int]):
    rows = []
    for con in model.constraints:
        if con.cols and all(j in binary_set for j in con.cols):
            rows.append(con)
    return rows


def _rows_ok(rows, x, tol=1e-9) -> bool:
    for con in rows:
        act = sum(a * x[j] for j, a in zip(con.cols, con.coefs))
        if con.sense == "<=" and act > con.rhs + tol:
            return False
        if con.sense == ">=" and act < con.rhs - tol:
            return False
        if con.sense == "=" and abs(act - con.rhs) > tol:
            return False
    return True


def enumerate_binaries(model: MilpModel, max_binaries: int = 20):
    """Exhaustive minimum over binary assignments; returns ``(objective, x)`` or ``(None, None)``.

    Assignments are visited in lexicographic order and the first minimum is kept.
    Rows touching only binary columns are checked before any LP is solved.
    """
    lb, ub = model.bounds()
    binaries = model.binary_columns()
    if len(binaries) > max_binaries:
        raise OracleScaleError(f"{len(binaries)} binaries exceed the oracle budget of {max_binaries}")
    free = [j for j in binaries if lb[j] < ub[j]]
    fixed_vals = {j: float(round(lb[j])) for j in binaries if lb[j] >= ub[j]}
    rows = _binary_only_rows(model, set(binaries))
    # continuous subproblems go to scipy's HiGHS so the oracle shares no code with the embedded solver
    A = model.matrix().tocsc()
    lo, hi = model.row_bounds()
    rows_con = LinearConstraint(A, lo, hi) if model.n_constraints else None
    c = model.cost_vector()
    constant = model.objective_constant
    best_obj, best_x = None, None
    trial = np.zeros(model.n_vars)
    for j, val in fixed_vals.items():
        trial[j] = val
    for bits in itertools.product((0.0, 1.0), repeat=len(free)):
        for j, b in zip(free, bits):
            trial[j] = b
        if not _rows_ok(rows, trial):
            continue
        lb_t, ub_t = lb.copy(), ub.copy()
        lb_t[binaries] = trial[binaries]
        ub_t[binaries] = trial[binaries]
        res = milp(c, constraints=rows_con, bounds=Bounds(lb_t, ub_t))
        if res.status != 0:
            continue
        obj = float(res.fun) + constant
        if best_obj is None or obj < best_obj - 1e-9 * max(1.0, abs(best_obj)):
            best_obj, best_x = obj, res.x
    return best_obj, best_x


def brute_force_solve(spec: MicrogridSpec, scenarios: ScenarioSet, dmo: DmoSchedule,
                      max_binaries: int = 20) -> ScheduleSolution:
    """Oracle: enumerate every binary assignment and solve the remaining LP exactly."""
    model, index = build_model(spec, scenarios, dmo)
    obj, x = enumerate_binaries(model, max_binaries)
    if x is None:
        return ScheduleSolution.zeros(spec, len(scenarios), status="infeasible")
    return solution_from_vector(spec, scenarios, index, x, obj, "optimal")


def storage_telescoping_residual(spec: MicrogridSpec, sol: ScheduleSolution) -> float:
    """Largest |C_final - (c_init - dt * sum P)| over storage units and scenarios."""
    dt = spec.time_grid.delta_tau
    worst = 0.0
    for n, st in enumerate(spec.storage_units):
        final = sol.C[n, -1, :]
        expected = st.initial_energy - dt * sol.P_storage[n].sum(axis=0)
        worst = max(worst, float(np.max(np.abs(final - expected))))
    return worst


def is_close_rel(a: float, b: float, rel: float) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)
