"""Named default scenarios used by the examples, the CLI and the test suite."""
from __future__ import annotations

import math

from ..frames import GridSourceParams
from ..grid_support import FreqSupportParams, VoltVarParams
from ..network import NetworkParams
from .scenario import PhaseJump, PStep, QStep, Scenario, SimConfig, SupportToggle

W_NOM = 2.0 * math.pi * 60.0


def stiff_rl_network() -> NetworkParams:
    """R-L filter straight onto a stiff PCC (no grid impedance)."""
    return NetworkParams.from_reactance(0.01, 0.1, 0.0, 0.0, W_NOM)


def weak_rl_network() -> NetworkParams:
    """R-L filter behind a grid impedance of 0.02 + j0.1 pu."""
    return NetworkParams.from_reactance(0.01, 0.1, 0.02, 0.1, W_NOM)


def resistive_network() -> NetworkParams:
    return NetworkParams(Rf=0.05, Rg=0.05)


def quiescent(t_end=0.1):
    return Scenario(network=stiff_rl_network()), SimConfig(t_end=t_end)


def pll_phase_jump(t_end=0.6):
    sc = Scenario(network=stiff_rl_network(), events=(PhaseJump(0.1, 0.2),))
    return sc, SimConfig(t_end=t_end)


def weak_grid_phase_jump(t_end=0.3):
    sc = Scenario(network=weak_rl_network(), events=(PhaseJump(0.1, 0.2),))
    return sc, SimConfig(t_end=t_end)


def p_step(t_end=0.6):
    sc = Scenario(network=stiff_rl_network(), events=(PStep(0.1, 0.1),))
    return sc, SimConfig(t_end=t_end)


def q_step(t_end=0.6):
    sc = Scenario(network=stiff_rl_network(), events=(QStep(0.1, 0.1),))
    return sc, SimConfig(t_end=t_end)


def frequency_support(t_end=0.4, offset=0.01):
    """Source runs at (1 + offset) f; frequency-watt switched on at 0.2 s."""
    sc = Scenario(grid=GridSourceParams(freq_offset=offset), network=stiff_rl_network(),
                  freq_support=FreqSupportParams(),
                  events=(SupportToggle(0.2, "frequency", True),))
    return sc, SimConfig(t_end=t_end)


def volt_var(t_end=0.3, vtarget=0.95):
    """Volt-var against a 0.95 pu target, deep enough to hit the clamp."""
    sc = Scenario(network=stiff_rl_network(), volt_var=VoltVarParams(vtarget=vtarget),
                  events=(SupportToggle(0.1, "volt_var", True),))
    return sc, SimConfig(t_end=t_end)


def resistive_p_step(t_end=0.3, frame="dq"):
    sc = Scenario(network=resistive_network(), events=(PStep(0.1, 0.1),))
    return sc, SimConfig(t_end=t_end, topology="resistive", frame=frame)


def resistive_phase_jump(t_end=0.2, frame="dq", dt=50e-6):
    sc = Scenario(network=resistive_network(), events=(PhaseJump(0.1, 0.2),))
    return sc, SimConfig(dt=dt, t_end=t_end, topology="resistive", frame=frame)


DEFAULT_SCENARIOS = {
    "quiescent": quiescent,
    "pll_phase_jump": pll_phase_jump,
    "weak_grid_phase_jump": weak_grid_phase_jump,
    "p_step": p_step,
    "q_step": q_step,
    "frequency_support": frequency_support,
    "volt_var": volt_var,
    "resistive_p_step": resistive_p_step,
}
