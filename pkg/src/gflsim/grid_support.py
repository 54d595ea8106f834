"""Frequency-watt and volt-var supplementary power references.

The piecewise characteristics are kept as reference implementations; the
simulator only ever solves with the smoothed versions, whose slopes are
also exported for the analytic Jacobian. These are bare characteristics: the
``enabled`` flags are honoured by the simulator, which substitutes an exact
zero when a function is switched off.
"""
from __future__ import annotations

from dataclasses import dataclass

from .numerics import SmoothingParams, smax, smax_grad, smin, smin_grad


@dataclass(frozen=True)
class FreqSupportParams:
    kf: float = 20.0
    fdb: float = 0.0006
    enabled: bool = False

    def __post_init__(self):
        if self.kf < 0 or self.fdb < 0:
            raise ValueError("kf and fdb must be >= 0")


@dataclass(frozen=True)
class VoltVarParams:
    kv: float = 10.0
    vdb: float = 0.01
    vtarget: float = 1.0
    qmax: float = 0.3
    enabled: bool = False

    def __post_init__(self):
        if self.kv < 0 or self.vdb < 0 or self.qmax < 0:
            raise ValueError("kv, vdb and qmax must be >= 0")


def freq_deviation(omega_hat: float, omega_nom: float) -> float:
    return (omega_hat - omega_nom) / omega_nom


def _deadband(x, k, db):
    if x > db:
        return -k * (x - db)
    if x < -db:
        return -k * (x + db)
    return 0.0


def psup_piecewise(df: float, params: FreqSupportParams) -> float:
    return _deadband(df, params.kf, params.fdb)


def qval_piecewise(vgd: float, params: VoltVarParams) -> float:
    return _deadband(vgd - params.vtarget, params.kv, params.vdb)


def qsup_piecewise(vgd: float, params: VoltVarParams) -> float:
    return max(-params.qmax, min(params.qmax, qval_piecewise(vgd, params)))


def _smooth_deadband(x, k, db, eps):
    """Smoothed deadband and its slope in x."""
    lo = -k * (x - db)
    hi = -k * (x + db)
    val = smin(0.0, lo, eps) + smax(0.0, hi, eps)
    slope = -k * (smin_grad(0.0, lo, eps)[1] + smax_grad(0.0, hi, eps)[1])
    return val, slope


def psup_smooth_with_slope(df: float, params: FreqSupportParams,
                           eps=SmoothingParams()) -> tuple[float, float]:
    return _smooth_deadband(df, params.kf, params.fdb, eps)


def psup_smooth(df: float, params: FreqSupportParams, eps=SmoothingParams()) -> float:
    return psup_smooth_with_slope(df, params, eps)[0]


def qsup_smooth_with_slope(vgd: float, params: VoltVarParams,
                           eps=SmoothingParams()) -> tuple[float, float]:
    qval, dqval = _smooth_deadband(vgd - params.vtarget, params.kv, params.vdb, eps)
    qtemp = smin(qval, params.qmax, eps)
    dqtemp = smin_grad(qval, params.qmax, eps)[0] * dqval
    qsup = smax(qtemp, -params.qmax, eps)
    return qsup, smax_grad(qtemp, -params.qmax, eps)[0] * dqtemp


def qsup_smooth(vgd: float, params: VoltVarParams, eps=SmoothingParams()) -> float:
    return qsup_smooth_with_slope(vgd, params, eps)[0]
