"""Initialization, time stepping and trajectory recording."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..controller import CurrentCtrlState, PllState, PowerCtrlState
from ..frames import AbcTriple, DqPair
from ..network import PlantState
from ..numerics import NonConvergence, ResidualSystem, SingularJacobian, newton_solve
from . import model as m
from .model import Model
from .scenario import Schedule, Scenario, SimConfig, validate


class InitResidualTooLarge(RuntimeError):
    pass


class SimulationError(RuntimeError):
    """A step failed; carries the time, the last good state and partial records."""

    def __init__(self, message, t=None, state=None, records=None, cause=None):
        super().__init__(message)
        self.t = t
        self.state = state
        self.records = records if records is not None else []
        self.cause = cause


COLUMNS = (
    "time_s", "v_g_a", "v_g_b", "v_g_c", "v_gd", "v_gq", "v_gq_fil", "theta_pll_rad",
    "delta_pll_pu", "omega_hat_rad_s", "p_g", "q_g", "p_g_fil", "q_g_fil", "i_ref_d",
    "i_ref_q", "i_g_d", "i_g_q", "i_g_fil_d", "i_g_fil_q", "e_inv_d", "e_inv_q",
    "p_sup", "q_sup", "newton_iters",
)

TimeSeriesRecord = NamedTuple("TimeSeriesRecord", [(c, int if c == "newton_iters" else float)
                                                    for c in COLUMNS])

# unknown-vector index behind each logged column (after the abc columns)
_RECORD_INDEX = (m.VGD, m.VGQ, m.VQF, m.TH, m.DEL, m.WH, m.PG, m.QG, m.PF, m.QF,
                 m.IRD, m.IRQ, m.IGD, m.IGQ, m.IFD, m.IFQ, m.ED, m.EQ, m.PS, m.QS)


@dataclass(frozen=True)
class SimState:
    """All unknowns at one instant, plus bookkeeping."""

    t: float
    x: np.ndarray
    k: int = 0
    newton_iters: int = 0
    vg_abc: tuple = (math.nan, math.nan, math.nan)

    def __getitem__(self, name: str) -> float:
        return float(self.x[m.INDEX[name]])

    @property
    def pll(self) -> PllState:
        x = self.x
        return PllState(x[m.VQF], x[m.IPLL], x[m.DEL], x[m.TH], x[m.WH])

    @property
    def power(self) -> PowerCtrlState:
        x = self.x
        return PowerCtrlState(x[m.PG], x[m.QG], x[m.PF], x[m.QF], x[m.IP], x[m.IQ],
                              DqPair(x[m.IRD], x[m.IRQ]))

    @property
    def current(self) -> CurrentCtrlState:
        x = self.x
        return CurrentCtrlState(DqPair(x[m.IFD], x[m.IFQ]), x[m.VCD], x[m.VCQ],
                                DqPair(x[m.EPD], x[m.EPQ]), DqPair(x[m.ED], x[m.EQ]))

    @property
    def plant(self) -> PlantState:
        x = self.x
        return PlantState(DqPair(x[m.IGD], x[m.IGQ]), DqPair(x[m.VGD], x[m.VGQ]),
                          AbcTriple(*self.vg_abc))


def make_record(t: float, x, vg_abc, iters: int) -> TimeSeriesRecord:
    return TimeSeriesRecord(float(t), *(float(v) for v in vg_abc),
                            *(float(x[j]) for j in _RECORD_INDEX), int(iters))


def records_to_array(records) -> np.ndarray:
    return np.array([tuple(r) for r in records], dtype=float)


class Simulator:
    """Owns the model and input schedule for one (scenario, config) run."""

    def __init__(self, scenario: Scenario, config: SimConfig):
        validate(scenario, config)
        self.scenario = scenario
        self.config = config
        self.model = Model(scenario, config)
        self.schedule = Schedule(scenario, config)

    def time(self, k: int) -> float:
        return k * self.config.dt

    def _state(self, k, x, iters=0) -> SimState:
        t = self.time(k)
        vg_abc = tuple(float(v) for v in self.model.pcc_abc(x, t, self.schedule[k]))
        return SimState(t=t, x=x, k=k, newton_iters=iters, vg_abc=vg_abc)

    # -------------------------------------------------------------- init
    def table1_vector(self) -> np.ndarray:
        """Initial differential states from the initialization table.

        Both currents start at (2/3) P_g(0) / V_m and (2/3) Q_g(0) / V_m with
        P_g(0), Q_g(0) the base references. The current-PI integrals start at
        the steady PI output of the selected topology: R_f * i in rl mode
        (the feedforward carries the PCC voltage) and V_m + (R_f + R_g) * i in
        resistive mode. ``table1_literal`` uses R_g * i instead.
        """
        sc, cfg = self.scenario, self.config
        u0 = self.schedule[0]
        x = np.zeros(m.N)
        i0d = (2.0 / 3.0) * sc.p_ref / sc.grid.Vm
        i0q = (2.0 / 3.0) * sc.q_ref / sc.grid.Vm
        x[m.TH] = u0.theta_offset
        x[m.PF], x[m.QF] = sc.p_ref, sc.q_ref
        x[m.IP], x[m.IQ] = i0d, i0q
        x[m.IFD], x[m.IFQ] = i0d, i0q
        x[m.IGD], x[m.IGQ] = i0d, i0q
        net = sc.network
        if cfg.table1_literal:
            rg = net.Rg[0]
            x[m.VCD], x[m.VCQ] = rg * i0d, rg * i0q
        elif cfg.topology == "rl":
            x[m.VCD], x[m.VCQ] = net.rf * i0d, net.rf * i0q
        else:
            r = net.Rf[0] + net.Rg[0]
            x[m.VCD], x[m.VCQ] = sc.grid.Vm + r * i0d, r * i0q
        x[m.WH] = self.model.w
        x[m.VGD] = sc.grid.Vm
        return x

    def _reinit(self, x_fixed, k) -> tuple[np.ndarray, int]:
        """Solve the algebraic unknowns at step k with differential states frozen."""
        t, u = self.time(k), self.schedule[k]
        mod = self.model
        system = ResidualSystem(
            m.N, lambda x: mod.reinit_residual(x, t, u, x_fixed),
            lambda x: mod.reinit_jacobian(x, t, u))
        res = newton_solve(system, x_fixed, self.config.solver)
        return res.x, res.iterations

    def init_residual(self, state: SimState) -> float:
        """max |dt * dx/dt| over the differential states at ``state``."""
        mod = self.model
        cur = mod.currents(state.x, state.t, self.schedule[state.k])
        rates = cur[list(mod.diff)] / mod.capacitance[list(mod.diff)]
        return float(np.max(np.abs(rates))) * self.config.dt

    def initialize(self) -> SimState:
        try:
            x, iters = self._reinit(self.table1_vector(), 0)
            state = self._state(0, x, iters)
            if self.config.init == "steady_state":
                state = self._steady_state(state)
        except (NonConvergence, SingularJacobian) as exc:
            raise SimulationError(f"initialization failed: {exc}", t=0.0, cause=exc) from exc
        resid = self.init_residual(state)
        if resid > self.config.init_residual_bound:
            raise InitResidualTooLarge(
                f"initial state is far from equilibrium: max |dt*dx/dt| = {resid:.3e} "
                f"> {self.config.init_residual_bound:.3e}; check parameters")
        return state

    def _steady_state(self, seed: SimState) -> SimState:
        t, u = 0.0, self.schedule[0]
        mod = self.model
        system = ResidualSystem(m.N, lambda x: mod.steady_residual(x, t, u),
                                lambda x: mod.steady_jacobian(x, t, u))
        res = newton_solve(system, seed.x, self.config.solver)
        return self._state(0, res.x, res.iterations)

    # -------------------------------------------------------------- stepping
    def residual_system(self, prev: SimState) -> ResidualSystem:
        k = prev.k
        u = self.schedule[k]
        t_next = self.time(k + 1)
        mod = self.model
        hist = mod.history(prev.x, prev.t, u)
        return ResidualSystem(m.N, lambda x: mod.step_residual(x, t_next, u, hist),
                              lambda x: mod.step_jacobian(x, t_next, u))

    def step(self, prev: SimState) -> SimState:
        """One trapezoidal advance from step k to k+1.

        Inputs in effect at step k are held over the interval. Events that
        fall due at k+1 are applied afterwards by re-solving the algebraic
        unknowns with the differential states frozen.
        """
        k1 = prev.k + 1
        try:
            res = newton_solve(self.residual_system(prev), prev.x, self.config.solver)
            x, iters = res.x, res.iterations
            if self.schedule.changes_at(k1):
                x, extra = self._reinit(x, k1)
                iters += extra
        except (NonConvergence, SingularJacobian) as exc:
            raise SimulationError(f"step to t={self.time(k1):.6g} s failed: {exc}",
                                  t=self.time(k1), state=prev, cause=exc) from exc
        return self._state(k1, x, iters)

    def record(self, state: SimState) -> TimeSeriesRecord:
        return make_record(state.t, state.x, state.vg_abc, state.newton_iters)

    def run(self, initial: SimState | None = None, keep_states: bool = False):
        state = self.initialize() if initial is None else initial
        records = [self.record(state)]
        states = [state] if keep_states else None
        for _ in range(self.config.n_steps):
            try:
                state = self.step(state)
            except SimulationError as exc:
                exc.records = records
                raise
            records.append(self.record(state))
            if keep_states:
                states.append(state)
        return (records, states) if keep_states else records


def initialize(scenario: Scenario, config: SimConfig = SimConfig()) -> SimState:
    return Simulator(scenario, config).initialize()


def assemble_residual(x_next, x_prev: SimState, t_next: float, scenario: Scenario,
                      config: SimConfig = SimConfig()) -> np.ndarray:
    """Residual of the step from ``x_prev`` to ``t_next`` evaluated at ``x_next``."""
    sim = Simulator(scenario, config)
    k = int(round(t_next / config.dt)) - 1
    prev = SimState(t=x_prev.t, x=x_prev.x, k=k)
    xn = x_next.x if isinstance(x_next, SimState) else np.asarray(x_next, dtype=float)
    return sim.residual_system(prev).residual(xn)


def step(x_prev: SimState, t_next: float, scenario: Scenario,
         config: SimConfig = SimConfig()) -> SimState:
    sim = Simulator(scenario, config)
    if not math.isclose(t_next, x_prev.t + config.dt, rel_tol=0, abs_tol=1e-9 * config.dt + 1e-15):
        raise ValueError(f"t_next must equal x_prev.t + dt ({x_prev.t + config.dt}), got {t_next}")
    return sim.step(x_prev)


def run(scenario: Scenario, config: SimConfig = SimConfig()) -> list:
    return Simulator(scenario, config).run()
