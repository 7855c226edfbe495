"""Assemble the two-stage stochastic scheduling MILP.

First-stage columns (hourly, shared by all scenarios): unit commitment ``I``,
startup/shutdown indicators ``su``/``sd``, storage discharge/charge modes ``u``/``v``,
adjustable-load state ``z``. Per-scenario columns: dispatch ``P``, cost segments ``seg``,
stored energy ``C``, adjustable demand ``D``, grid transfer ``PM``, curtailment ``LS``,
deviation ``dP`` with positive part ``dPplus`` and the hourly indicator ``delta``.
"""

from __future__ import annotations

import math

from ..domain import MicrogridSpec, DmoSchedule, StorageMode
from ..uncertainty import ScenarioSet
from .model import BINARY, CONTINUOUS, MilpModel, VariableIndex, column_name


class FormulationError(ValueError):
    pass


class _Builder:
    def __init__(self, spec: MicrogridSpec, scenarios: ScenarioSet, dmo: DmoSchedule):
        self.spec = spec
        self.scenarios = scenarios
        self.dmo = dmo
        self.grid = spec.time_grid
        self.model = MilpModel(name="microgrid_schedule")
        self.index = VariableIndex()

    def var(self, key, kind=CONTINUOUS, lb=0.0, ub=math.inf, cost=0.0) -> int:
        j = self.model.add_variable(column_name(key), kind, lb, ub, cost)
        self.index.add(key, j)
        return j

    def row(self, terms, sense, rhs, family, key):
        self.model.add_constraint(terms, sense, rhs, name=column_name(("c", family) + key), family=family)

    def window_rows(self, cols, prev, length, family, key_prefix, on_value=1):
        """Minimum-run rows: a switch into ``on_value`` at hour t keeps the state for ``length`` hours.

        ``cols`` are hourly binary columns; ``prev`` is the state before the first one.
        For ``on_value=0`` the same logic applies to the complement ``1 - x``.
        """
        n = len(cols)
        if length < 2:
            return
        for t in range(n):
            span = min(length, n - t)
            if on_value == 1:
                # sum_{t'} x_{t'} >= span * (x_t - x_{t-1})
                terms = [(cols[tt], 1.0) for tt in range(t, t + span)]
                terms.append((cols[t], -float(span)))
                rhs = 0.0
                if t == 0:
                    rhs = -span * prev
                else:
                    terms.append((cols[t - 1], float(span)))
            else:
                # sum_{t'} (1 - x_{t'}) >= span * (x_{t-1} - x_t)
                terms = [(cols[tt], -1.0) for tt in range(t, t + span)]
                terms.append((cols[t], float(span)))
                rhs = -float(span)
                if t == 0:
                    rhs += span * prev
                else:
                    terms.append((cols[t - 1], -float(span)))
            self.row(terms, ">=", rhs, family, key_prefix + (t,))

    def build(self):
        spec, grid, dmo = self.spec, self.grid, self.dmo
        T, K, dt = grid.n_hours, grid.subperiods_per_hour, grid.delta_tau
        probs = [sc.probability for sc in self.scenarios]
        total_p = sum(probs)
        M = dmo.p_m_max

        # ---- first stage -------------------------------------------------
        I = {}
        for g in spec.dispatchable_units:
            fixed_on = max(0, g.min_up - g.init_on_hours) if g.init_committed else 0
            fixed_off = 0 if g.init_committed else max(0, g.min_down - g.init_off_hours)
            for t in range(T):
                lb, ub = 0.0, 1.0
                if t < fixed_on:
                    lb = 1.0
                if t < fixed_off:
                    ub = 0.0
                I[g.id, t] = self.var(("I", g.id, t), BINARY, lb, ub, cost=g.no_load_cost * total_p)
        su, sd = {}, {}
        for g in spec.dispatchable_units:
            prev_on = 1.0 if g.init_committed else 0.0
            for t in range(T):
                su[g.id, t] = self.var(("su", g.id, t), lb=0.0, ub=1.0, cost=g.startup_cost * total_p)
                sd[g.id, t] = self.var(("sd", g.id, t), lb=0.0, ub=1.0, cost=g.shutdown_cost * total_p)
            for t in range(T):
                if t == 0:
                    self.row([(su[g.id, t], 1.0), (I[g.id, t], -1.0)], ">=", -prev_on, "startup", (g.id, t))
                    self.row([(sd[g.id, t], 1.0), (I[g.id, t], 1.0)], ">=", prev_on, "shutdown", (g.id, t))
                else:
                    self.row([(su[g.id, t], 1.0), (I[g.id, t], -1.0), (I[g.id, t - 1], 1.0)], ">=", 0.0,
                             "startup", (g.id, t))
                    self.row([(sd[g.id, t], 1.0), (I[g.id, t], 1.0), (I[g.id, t - 1], -1.0)], ">=", 0.0,
                             "shutdown", (g.id, t))
            cols = [I[g.id, t] for t in range(T)]
            self.window_rows(cols, prev_on, g.min_up, "min-up", (g.id,), on_value=1)
            self.window_rows(cols, prev_on, g.min_down, "min-down", (g.id,), on_value=0)

        u, v = {}, {}
        for st in spec.storage_units:
            fix_ch = max(0, st.min_charge_time - st.init_mode_hours) if st.init_mode == StorageMode.CHARGING else 0
            fix_dch = (max(0, st.min_discharge_time - st.init_mode_hours)
                       if st.init_mode == StorageMode.DISCHARGING else 0)
            for t in range(T):
                u[st.id, t] = self.var(("u", st.id, t), BINARY, 1.0 if t < fix_dch else 0.0, 1.0)
                v[st.id, t] = self.var(("v", st.id, t), BINARY, 1.0 if t < fix_ch else 0.0, 1.0)
            for t in range(T):
                self.row([(u[st.id, t], 1.0), (v[st.id, t], 1.0)], "<=", 1.0, "storage-mode", (st.id, t))
            prev_dch = 1.0 if st.init_mode == StorageMode.DISCHARGING else 0.0
            prev_ch = 1.0 if st.init_mode == StorageMode.CHARGING else 0.0
            self.window_rows([v[st.id, t] for t in range(T)], prev_ch, st.min_charge_time, "min-charge", (st.id,))
            self.window_rows([u[st.id, t] for t in range(T)], prev_dch, st.min_discharge_time, "min-discharge",
                             (st.id,))

        z = {}
        for d in spec.adjustable_loads:
            for t in d.hours():
                z[d.id, t] = self.var(("z", d.id, t), BINARY, 0.0, 1.0)
            self.window_rows([z[d.id, t] for t in d.hours()], 0.0, d.min_operating_time, "min-operating", (d.id,))

        # ---- second stage ------------------------------------------------
        for s, sc in enumerate(self.scenarios):
            pr = sc.probability
            delta = {t: self.var(("delta", t, s), BINARY, 0.0, 1.0) for t in range(T)}
            P_prev = {}
            C_prev = {}
            for t in range(T):
                for tau in range(K):
                    k = grid.step(t, tau)
                    balance = []
                    for g in spec.dispatchable_units:
                        p = self.var(("P", g.id, t, tau, s), lb=0.0, ub=g.p_max)
                        balance.append((p, 1.0))
                        it = I[g.id, t]
                        self.row([(p, 1.0), (it, -g.p_max)], "<=", 0.0, "unit-max", (g.id, t, tau, s))
                        if g.p_min > 0:
                            self.row([(p, 1.0), (it, -g.p_min)], ">=", 0.0, "unit-min", (g.id, t, tau, s))
                        widths = g.segment_widths()
                        if len(widths) == 1:
                            self.model.add_cost(p, pr * dt * g.cost_segments[0].rate)
                        else:
                            seg_terms = [(p, -1.0)]
                            for j, (seg, w) in enumerate(zip(g.cost_segments, widths)):
                                q = self.var(("seg", g.id, j, t, tau, s), lb=0.0, ub=w, cost=pr * dt * seg.rate)
                                seg_terms.append((q, 1.0))
                                self.row([(q, 1.0), (it, -w)], "<=", 0.0, "segment", (g.id, j, t, tau, s))
                            self.row(seg_terms, "=", 0.0, "segment-sum", (g.id, t, tau, s))
                        self._ramp_rows(g, p, P_prev.get(g.id), I, t, tau, s)
                        P_prev[g.id] = p

                    for st in spec.storage_units:
                        p = self.var(("P", st.id, t, tau, s), lb=-st.p_ch_max, ub=st.p_dch_max)
                        c = self.var(("C", st.id, t, tau, s), lb=0.0, ub=st.c_max)
                        balance.append((p, 1.0))
                        ut, vt = u[st.id, t], v[st.id, t]
                        self.row([(p, 1.0), (ut, -st.p_dch_max), (vt, st.p_ch_min)], "<=", 0.0,
                                 "storage-limit", ("max", st.id, t, tau, s))
                        self.row([(p, 1.0), (ut, -st.p_dch_min), (vt, st.p_ch_max)], ">=", 0.0,
                                 "storage-limit", ("min", st.id, t, tau, s))
                        if st.id in C_prev:
                            self.row([(c, 1.0), (C_prev[st.id], -1.0), (p, dt)], "=", 0.0,
                                     "storage-energy", (st.id, t, tau, s))
                        else:
                            self.row([(c, 1.0), (p, dt)], "=", st.initial_energy, "storage-energy",
                                     (st.id, t, tau, s))
                        C_prev[st.id] = c

                    for d in spec.adjustable_loads:
                        if (d.id, t) not in z:
                            continue
                        q = self.var(("D", d.id, t, tau, s), lb=0.0, ub=d.d_max)
                        balance.append((q, -1.0))
                        zt = z[d.id, t]
                        self.row([(q, 1.0), (zt, -d.d_max)], "<=", 0.0, "dr-limit", ("max", d.id, t, tau, s))
                        if d.d_min > 0:
                            self.row([(q, 1.0), (zt, -d.d_min)], ">=", 0.0, "dr-limit", ("min", d.id, t, tau, s))

                    U = float(sc.grid_connected[k])
                    pm = self.var(("PM", t, tau, s), lb=-M * U, ub=M * U)
                    ls = self.var(("LS", t, tau, s), lb=0.0,
                                  ub=math.inf if spec.allow_load_shedding else 0.0, cost=pr * dt * spec.voll)
                    # dP never exceeds M*U - P^sch, so that (when below M) is a valid big-M for dP > 0
                    m_up = min(M, max(M * U - dmo.p_sched[t], 0.0))
                    dp = self.var(("dP", t, tau, s), lb=-2 * M, ub=2 * M)
                    dpp = self.var(("dPplus", t, tau, s), lb=0.0, ub=m_up, cost=pr * dt * dmo.penalty)
                    balance += [(pm, 1.0), (ls, 1.0)]
                    net_fixed = float(sc.loads[:, k].sum()) - float(sc.renewables[:, k].sum())
                    self.row(balance, "=", net_fixed, "balance", (t, tau, s))

                    dl = delta[t]
                    self.row([(dp, 1.0), (pm, -1.0)], "=", -dmo.p_sched[t], "deviation", (t, tau, s))
                    self.row([(dpp, 1.0), (dl, -m_up)], "<=", 0.0, "positive-part", ("ub", t, tau, s))
                    # delta = 0 already implies dP <= 0 = dPplus, so this row needs no big-M
                    self.row([(dp, 1.0), (dpp, -1.0)], "<=", 0.0, "positive-part", ("hi", t, tau, s))
                    self.row([(dp, 1.0), (dpp, -1.0), (dl, -M)], ">=", -M, "positive-part", ("lo", t, tau, s))
                    self.row([(dp, 1.0), (dl, -m_up)], "<=", 0.0, "positive-part", ("sign", t, tau, s))

            for d in spec.adjustable_loads:
                terms = [(self.index[("D", d.id, t, tau, s)], dt) for t in d.hours() for tau in range(K)]
                self.row(terms, "=", d.energy_required, "dr-energy", (d.id, s))
        return self.model, self.index

    def _ramp_rows(self, g, p, p_prev, I, t, tau, s):
        """Ramp limits between consecutive sub-periods, including across hour boundaries.

        At an hour boundary the limit is relaxed by ``p_min`` on a startup (up-ramp)
        or shutdown (down-ramp) so a unit can always be brought online at minimum output.
        """
        boundary = tau == 0
        if p_prev is None:
            prev_const = g.init_power if g.init_committed else 0.0
            prev_on = 1.0 if g.init_committed else 0.0
        it = I[g.id, t]
        if g.ramp_up < g.p_max:
            terms = [(p, 1.0)]
            rhs = g.ramp_up
            if p_prev is None:
                rhs += prev_const
            else:
                terms.append((p_prev, -1.0))
            if boundary and g.p_min > 0:
                terms.append((it, -g.p_min))
                if t == 0:
                    rhs -= g.p_min * prev_on
                else:
                    terms.append((I[g.id, t - 1], g.p_min))
            self.row(terms, "<=", rhs, "ramp-up", (g.id, t, tau, s))
        if g.ramp_down < g.p_max:
            terms = [(p, -1.0)]
            rhs = g.ramp_down
            if p_prev is None:
                rhs -= prev_const
            else:
                terms.append((p_prev, 1.0))
            if boundary and g.p_min > 0:
                terms.append((it, g.p_min))
                if t == 0:
                    rhs += g.p_min * prev_on
                else:
                    terms.append((I[g.id, t - 1], -g.p_min))
            self.row(terms, "<=", rhs, "ramp-down", (g.id, t, tau, s))


def build_model(spec: MicrogridSpec, scenarios: ScenarioSet, dmo: DmoSchedule) -> tuple[MilpModel, VariableIndex]:
    """Translate the microgrid, its scenarios and the DMO schedule into a MILP."""
    if len(scenarios) == 0:
        raise FormulationError("scenario set is empty")
    if len(dmo.p_sched) != spec.time_grid.n_hours:
        raise FormulationError(
            f"DMO schedule covers {len(dmo.p_sched)} hours, time grid has {spec.time_grid.n_hours}")
    n = spec.time_grid.n_steps
    for sc in scenarios:
        if sc.renewables.shape != (len(spec.nondispatchable_units), n) or sc.loads.shape != (len(spec.fixed_loads), n):
            raise FormulationError(f"scenario {sc.id} does not match the microgrid's assets and time grid")
        if sc.grid_connected.shape != (n,):
            raise FormulationError(f"scenario {sc.id}: islanding profile length mismatch")
    return _Builder(spec, scenarios, dmo).build()
