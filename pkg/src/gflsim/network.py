"""Electrical interface between the inverter terminal and the slack source.

Two topologies are supported. ``resistive`` is the purely resistive
simplified circuit, solved algebraically per phase. ``rl`` is the series
R_f-L_f-R_g-L_g path in the synchronous frame; with no shunt element at the
PCC, one current flows through both branches and the PCC voltage is recovered
from the grid-side drop.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .frames import AbcTriple, DqPair


class DegenerateNetwork(ValueError):
    pass


def _triple(v) -> tuple[float, float, float]:
    if isinstance(v, (int, float)):
        return (float(v),) * 3
    a, b, c = v
    return (float(a), float(b), float(c))


@dataclass(frozen=True)
class NetworkParams:
    """Per-phase filter and grid impedances in per unit (inductances in pu*s)."""

    Rf: tuple = (0.0, 0.0, 0.0)
    Lf: tuple = (0.0, 0.0, 0.0)
    Rg: tuple = (0.0, 0.0, 0.0)
    Lg: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("Rf", "Lf", "Rg", "Lg"):
            val = _triple(getattr(self, name))
            if any(x < 0 for x in val):
                raise ValueError(f"{name} must be >= 0 on every phase")
            object.__setattr__(self, name, val)

    @classmethod
    def from_reactance(cls, Rf, Xf, Rg, Xg, omega: float) -> "NetworkParams":
        """Build from reactances at nominal angular frequency ``omega``."""
        Xf, Xg = _triple(Xf), _triple(Xg)
        return cls(Rf=Rf, Lf=tuple(x / omega for x in Xf),
                   Rg=Rg, Lg=tuple(x / omega for x in Xg))

    @property
    def balanced(self) -> bool:
        return all(len(set(getattr(self, n))) == 1 for n in ("Rf", "Lf", "Rg", "Lg"))

    def _dq(self, name: str) -> float:
        vals = getattr(self, name)
        if len(set(vals)) != 1:
            raise DegenerateNetwork(f"{name} is unbalanced {vals}; dq parameters are undefined")
        return vals[0]

    # dq-frame values; only defined for balanced phases
    @property
    def rf(self) -> float:
        return self._dq("Rf")

    @property
    def lf(self) -> float:
        return self._dq("Lf")

    @property
    def rg(self) -> float:
        return self._dq("Rg")

    @property
    def lg(self) -> float:
        return self._dq("Lg")

    @property
    def r_series(self) -> float:
        return self.rf + self.rg

    @property
    def l_series(self) -> float:
        return self.lf + self.lg


class PlantState(NamedTuple):
    ig: DqPair
    vg_dq: DqPair
    vg_abc: AbcTriple


def _check_resistive(params: NetworkParams):
    for k, (rf, rg) in enumerate(zip(params.Rf, params.Rg)):
        if rf + rg <= 0.0:
            raise DegenerateNetwork(f"Rf + Rg = 0 on phase {'abc'[k]}")


def pcc_voltage_resistive(einv, vslack, params: NetworkParams) -> AbcTriple:
    """PCC voltage of the resistive divider, phase by phase (KCL at the PCC)."""
    _check_resistive(params)
    return AbcTriple(*((e * rg + vs * rf) / (rg + rf)
                       for e, vs, rf, rg in zip(einv, vslack, params.Rf, params.Rg)))


def line_current_resistive(einv, vslack, params: NetworkParams) -> AbcTriple:
    _check_resistive(params)
    return AbcTriple(*((e - vs) / (rg + rf)
                       for e, vs, rf, rg in zip(einv, vslack, params.Rf, params.Rg)))


def cross_coupling(i) -> DqPair:
    """J i with J = [[0, -1], [1, 0]]."""
    return DqPair(-i[1], i[0])


def branch_rl(params: NetworkParams, branch: str = "series") -> tuple[float, float]:
    if branch == "series":
        return params.r_series, params.l_series
    if branch == "filter":
        return params.rf, params.lf
    if branch == "grid":
        return params.rg, params.lg
    raise ValueError(f"unknown branch {branch!r}")


def plant_rate_dq(ig, einv, v, omega_hat: float, params: NetworkParams,
                  branch: str = "series") -> DqPair:
    """di/dt of the dq current through an R-L branch.

    ``v`` is the voltage at the far end of the branch: the slack voltage for
    the default ``series`` branch (R = Rf + Rg, L = Lf + Lg) or the PCC voltage
    for the ``filter`` branch alone.
    """
    R, L = branch_rl(params, branch)
    if not L > 0:
        raise DegenerateNetwork(f"{branch} inductance must be > 0 for dq dynamics")
    return DqPair((-R * ig[0] + omega_hat * L * ig[1] + einv[0] - v[0]) / L,
                  (-R * ig[1] - omega_hat * L * ig[0] + einv[1] - v[1]) / L)


def branch_drop(ig, di_dt, omega_hat: float, R: float, L: float) -> DqPair:
    """Voltage across a series R-L branch in a frame rotating at omega_hat."""
    jd, jq = cross_coupling(ig)
    return DqPair(R * ig[0] + L * di_dt[0] + omega_hat * L * jd,
                  R * ig[1] + L * di_dt[1] + omega_hat * L * jq)


def pcc_voltage_rl(ig, di_dt, vslack_dq, omega_hat: float,
                   params: NetworkParams) -> DqPair:
    """PCC voltage: slack voltage plus the drop across the grid branch."""
    drop = branch_drop(ig, di_dt, omega_hat, params.rg, params.lg)
    return DqPair(vslack_dq[0] + drop[0], vslack_dq[1] + drop[1])
