"""Grid-following control stack: PLL, power controller, current controller.

The functions here return the continuous-time right-hand sides and the
algebraic outputs of each block. Discretization happens in the simulator,
which stacks them into one residual per time step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .frames import DqPair
from .numerics import CompanionModel


@dataclass(frozen=True)
class FirstOrderFilter:
    """First-order low-pass 1/(1 + sT), realized as an RC stage with R = 1."""

    time_constant: float
    state: float = 0.0
    form: str = "norton"

    def __post_init__(self):
        if not self.time_constant > 0:
            raise ValueError("time_constant must be > 0")

    def companion(self, dt: float) -> CompanionModel:
        return CompanionModel(capacitance=self.time_constant, dt=dt, form=self.form)

    def step(self, u_next: float, u_prev: float, dt: float) -> "FirstOrderFilter":
        """Advance one trapezoidal step for a known input sequence."""
        comp = self.companion(dt)
        a, b = comp.coefficients
        hist = comp.history(self.state, u_prev - self.state)
        return replace(self, state=(b * u_next + hist) / (a + b))


@dataclass(frozen=True)
class PiBlock:
    kp: float
    ki: float
    integral_state: float = 0.0

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ValueError("PI gains must be non-negative")


def filter_rate(u: float, state: float, T: float) -> float:
    return (u - state) / T


def pi_rate(error: float, block: PiBlock) -> float:
    """d(integral_state)/dt."""
    return block.ki * error


def pi_output(error: float, block: PiBlock) -> float:
    return block.kp * error + block.integral_state


@dataclass(frozen=True)
class ControllerParams:
    """Gains and filter time constants for the three control loops."""

    kp_pll: float = 0.25
    ki_pll: float = 10.0
    Tf_pll: float = 1e-3
    kp_pq: float = 0.1
    ki_pq: float = 10.0
    Tf_pq: float = 5e-3
    kp_ig: float = 0.3
    ki_ig: float = 20.0
    Tf_ig: float = 5e-4

    def __post_init__(self):
        for name in ("kp_pll", "ki_pll", "kp_pq", "ki_pq", "kp_ig", "ki_ig"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("Tf_pll", "Tf_pq", "Tf_ig"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def min_time_constant(self) -> float:
        return min(self.Tf_pll, self.Tf_pq, self.Tf_ig)

    def pll_block(self, integral=0.0) -> PiBlock:
        return PiBlock(self.kp_pll, self.ki_pll, integral)

    def pq_block(self, integral=0.0) -> PiBlock:
        return PiBlock(self.kp_pq, self.ki_pq, integral)

    def ig_block(self, integral=0.0) -> PiBlock:
        return PiBlock(self.kp_ig, self.ki_ig, integral)


@dataclass(frozen=True)
class PllState:
    vq_fil: float = 0.0
    i_pll: float = 0.0
    delta_pll: float = 0.0
    theta_pll: float = 0.0
    omega_hat: float = 2.0 * math.pi * 60.0


@dataclass(frozen=True)
class PowerCtrlState:
    p_g: float = 0.0
    q_g: float = 0.0
    p_fil: float = 0.0
    q_fil: float = 0.0
    int_p: float = 0.0
    int_q: float = 0.0
    iref: DqPair = field(default_factory=lambda: DqPair(0.0, 0.0))


@dataclass(frozen=True)
class CurrentCtrlState:
    ifil: DqPair = field(default_factory=lambda: DqPair(0.0, 0.0))
    int_d: float = 0.0
    int_q: float = 0.0
    eps: DqPair = field(default_factory=lambda: DqPair(0.0, 0.0))
    einv: DqPair = field(default_factory=lambda: DqPair(0.0, 0.0))


def pll_outputs(state: PllState, omega_nom: float, gains: PiBlock):
    """(delta_pll, omega_hat, d theta_pll / dt) from the filtered q voltage."""
    delta = gains.kp * state.vq_fil + state.i_pll
    return delta, omega_nom * (1.0 + delta), omega_nom * delta


def power_compute(v, i) -> tuple[float, float]:
    """Instantaneous P and Q at the PCC from dq voltage and current."""
    vd, vq = v
    id_, iq = i
    return 1.5 * (vd * id_ + vq * iq), 1.5 * (vd * iq - vq * id_)


def power_ctrl_outputs(Pref: float, Qref: float, state: PowerCtrlState,
                       gains: PiBlock):
    """Current references and the integral rates of the two power PIs.

    Returns ``(iref, (dI_P/dt, dI_Q/dt))``; ``gains.integral_state`` is
    ignored, the integrals come from ``state``.
    """
    ep = Pref - state.p_fil
    eq = Qref - state.q_fil
    iref = DqPair(gains.kp * ep + state.int_p, gains.kp * eq + state.int_q)
    return iref, (gains.ki * ep, gains.ki * eq)


def current_ctrl_pi(iref, ifil, state: CurrentCtrlState, gains: PiBlock):
    """PI outputs eps^dq and the rates of V_cc^dq."""
    ed = iref[0] - ifil[0]
    eq = iref[1] - ifil[1]
    eps = DqPair(gains.kp * ed + state.int_d, gains.kp * eq + state.int_q)
    return eps, (gains.ki * ed, gains.ki * eq)


def feedforward(eps, omega_hat: float, ig, vg, Lf: float) -> DqPair:
    """Voltage command with PCC feedforward and cross-coupling decoupling."""
    return DqPair(eps[0] - omega_hat * Lf * ig[1] + vg[0],
                  eps[1] + omega_hat * Lf * ig[0] + vg[1])


def current_ctrl_outputs(iref, ifil, state: CurrentCtrlState, omega_hat: float,
                         ig, vg, Lf: float, mode: str, gains: PiBlock) -> DqPair:
    """Inverter voltage command e_inv^dq.

    ``mode == "resistive"`` drops the filter inductor, so the command is the
    PI output itself. ``mode == "rl"`` adds PCC feedforward and cancels the
    omega_hat * Lf cross-coupling. The PI error uses filtered currents while
    the decoupling term uses the raw grid current.
    """
    eps, _ = current_ctrl_pi(iref, ifil, state, gains)
    if mode == "resistive":
        return eps
    if mode == "rl":
        return feedforward(eps, omega_hat, ig, vg, Lf)
    raise ValueError(f"unknown mode {mode!r}")
