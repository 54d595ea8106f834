"""Scenario description, run settings and the step-indexed input schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..controller import ControllerParams
from ..frames import GridSourceParams
from ..grid_support import FreqSupportParams, VoltVarParams
from ..network import NetworkParams
from ..numerics import NewtonSettings, SmoothingParams
from .model import Inputs


class ScenarioError(ValueError):
    """Inconsistent scenario or run settings; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class PhaseJump:
    time: float
    delta_theta: float


@dataclass(frozen=True)
class PStep:
    time: float
    delta_p: float


@dataclass(frozen=True)
class QStep:
    time: float
    delta_q: float


@dataclass(frozen=True)
class SupportToggle:
    """Switch a grid-support function on or off.

    ``target`` is ``"frequency"``, ``"volt_var"`` or ``"both"``.
    """

    time: float
    target: str = "both"
    enabled: bool = True

    def __post_init__(self):
        if self.target not in ("frequency", "volt_var", "both"):
            raise ValueError(f"unknown support target {self.target!r}")


Event = Union[PhaseJump, PStep, QStep, SupportToggle]


def _default_network():
    return NetworkParams.from_reactance(0.01, 0.1, 0.0, 0.0, 2.0 * math.pi * 60.0)


@dataclass(frozen=True)
class Scenario:
    grid: GridSourceParams = field(default_factory=GridSourceParams)
    network: NetworkParams = field(default_factory=_default_network)
    controller: ControllerParams = field(default_factory=ControllerParams)
    freq_support: FreqSupportParams = field(default_factory=FreqSupportParams)
    volt_var: VoltVarParams = field(default_factory=VoltVarParams)
    p_ref: float = 0.5
    q_ref: float = 0.0
    events: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        times = [ev.time for ev in self.events]
        for k, (t0, t1) in enumerate(zip(times, times[1:])):
            if not t1 > t0:
                raise ScenarioError(
                    f"event times must be strictly increasing (event {k + 1} at {t1} "
                    f"after {t0})", key="events")
        if any(t < 0 for t in times):
            raise ScenarioError("event times must be >= 0", key="events")

    def all_events(self) -> list:
        """Scheduled events plus the grid source's own phase jump, time ordered."""
        evs = list(self.events)
        if self.grid.theta_dist != 0.0:
            evs.append(PhaseJump(self.grid.t_dist, self.grid.theta_dist))
        return sorted(evs, key=lambda ev: ev.time)


TOPOLOGIES = ("resistive", "rl")
FRAMES = ("dq", "abc")
FORMS = ("norton", "thevenin")
INITS = ("table1", "steady_state")


@dataclass(frozen=True)
class SimConfig:
    """Run settings.

    ``frame`` selects how the resistive network is evaluated: directly in dq,
    or per phase in abc followed by a Park transform. ``table1_literal`` uses
    the grid resistance in the current-controller integral initialization
    in place of the equilibrium value.
    """

    dt: float = 50e-6
    t_end: float = 0.6
    topology: str = "rl"
    frame: str = "dq"
    companion_form: str = "norton"
    solver: NewtonSettings = field(default_factory=NewtonSettings)
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)
    init: str = "table1"
    table1_literal: bool = False
    init_residual_bound: float = 0.1

    def __post_init__(self):
        if not 0 < self.dt < self.t_end:
            raise ScenarioError(f"need 0 < dt < t_end, got dt={self.dt}, t_end={self.t_end}",
                                key="simulation.dt")
        for name, allowed in (("topology", TOPOLOGIES), ("frame", FRAMES),
                              ("companion_form", FORMS), ("init", INITS)):
            if getattr(self, name) not in allowed:
                raise ScenarioError(f"{name} must be one of {allowed}",
                                    key=f"simulation.{name}")
        if self.frame == "abc" and self.topology != "resistive":
            raise ScenarioError("the abc frame path exists only for the resistive topology",
                                key="simulation.frame")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


def validate(scenario: Scenario, config: SimConfig):
    """Cross-checks that need both the scenario and the run settings."""
    tmin = scenario.controller.min_time_constant
    if not config.dt < 2.0 * tmin:
        raise ScenarioError(
            f"dt={config.dt} violates the filter stability guard dt < 2*min(Tf) = {2 * tmin}",
            key="simulation.dt")
    net = scenario.network
    if config.topology == "rl" or config.frame == "dq":
        if not net.balanced:
            raise ScenarioError("unbalanced per-phase impedances are not supported in dq",
                                key="network.R")
    if config.topology == "rl":
        if not net.lf > 0:
            raise ScenarioError("rl topology needs a filter inductance > 0", key="filter.X")
    else:
        for rf, rg in zip(net.Rf, net.Rg):
            if not rf + rg > 0:
                raise ScenarioError("resistive topology needs Rf + Rg > 0", key="filter.R")
    for ev in scenario.events:
        if ev.time > config.t_end:
            raise ScenarioError(f"event at {ev.time} s lies beyond t_end", key="events")


def event_step(t: float, dt: float) -> int:
    """First step index whose time is at or after ``t``."""
    return max(0, int(math.ceil(t / dt - 1e-9)))


class Schedule:
    """Inputs in effect at each step index 0..n_steps."""

    def __init__(self, scenario: Scenario, config: SimConfig):
        n = config.n_steps
        self.n_steps = n
        p = np.full(n + 1, scenario.p_ref)
        q = np.full(n + 1, scenario.q_ref)
        th = np.zeros(n + 1)
        fs = np.full(n + 1, scenario.freq_support.enabled)
        vv = np.full(n + 1, scenario.volt_var.enabled)
        self.event_steps = set()
        for ev in scenario.all_events():
            k = event_step(ev.time, config.dt)
            if k > n:
                continue
            self.event_steps.add(k)
            if isinstance(ev, PhaseJump):
                th[k:] += ev.delta_theta
            elif isinstance(ev, PStep):
                p[k:] += ev.delta_p
            elif isinstance(ev, QStep):
                q[k:] += ev.delta_q
            elif isinstance(ev, SupportToggle):
                if ev.target in ("frequency", "both"):
                    fs[k:] = ev.enabled
                if ev.target in ("volt_var", "both"):
                    vv[k:] = ev.enabled
        self.p_ref, self.q_ref, self.theta_offset = p, q, th
        self.freq_support, self.volt_var = fs, vv

    def __getitem__(self, k: int) -> Inputs:
        return Inputs(float(self.p_ref[k]), float(self.q_ref[k]), float(self.theta_offset[k]),
                      bool(self.freq_support[k]), bool(self.volt_var[k]))

    def changes_at(self, k: int) -> bool:
        return k in self.event_steps and k > 0
