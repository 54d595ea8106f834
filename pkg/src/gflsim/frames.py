"""Three-phase source synthesis and the Park / inverse-Park transforms.

The Park transform is the amplitude-invariant (2/3) variant with the d axis on
phase a; its power-invariant mate is the 3/2 factor in
:func:`gflsim.controller.power_compute`. Neither is configurable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI_3 = 2.0 * math.pi / 3.0


class AbcTriple(NamedTuple):
    a: float
    b: float
    c: float


class DqPair(NamedTuple):
    d: float
    q: float


@dataclass(frozen=True)
class GridSourceParams:
    """Ideal slack source.

    ``freq_offset`` shifts the source frequency to ``f * (1 + freq_offset)``
    while the controller keeps the nominal ``f``; zero reproduces the plain
    balanced set.
    """

    Vm: float = 1.0
    f: float = 60.0
    theta_dist: float = 0.0
    t_dist: float = 0.0
    freq_offset: float = 0.0

    def __post_init__(self):
        if not self.Vm > 0:
            raise ValueError("Vm must be > 0")
        if not self.f > 0:
            raise ValueError("f must be > 0")
        if not self.t_dist >= 0:
            raise ValueError("t_dist must be >= 0")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f


def theta_grid(t: float, params: GridSourceParams) -> float:
    """Step-shaped bus-angle offset: zero before ``t_dist``, ``theta_dist`` after."""
    return params.theta_dist if t >= params.t_dist else 0.0


def grid_angle(t: float, params: GridSourceParams) -> float:
    return params.omega * (1.0 + params.freq_offset) * t + theta_grid(t, params)


def balanced_abc(theta: float, Vm: float) -> AbcTriple:
    return AbcTriple(Vm * math.cos(theta),
                     Vm * math.cos(theta - TWO_PI_3),
                     Vm * math.cos(theta + TWO_PI_3))


def grid_voltage(t: float, params: GridSourceParams) -> AbcTriple:
    return balanced_abc(grid_angle(t, params), params.Vm)


def park(v, theta: float) -> DqPair:
    """abc -> dq at frame angle ``theta`` (amplitude invariant)."""
    va, vb, vc = v
    c0, c1, c2 = math.cos(theta), math.cos(theta - TWO_PI_3), math.cos(theta + TWO_PI_3)
    s0, s1, s2 = math.sin(theta), math.sin(theta - TWO_PI_3), math.sin(theta + TWO_PI_3)
    d = (2.0 / 3.0) * (va * c0 + vb * c1 + vc * c2)
    q = -(2.0 / 3.0) * (va * s0 + vb * s1 + vc * s2)
    return DqPair(d, q)


def inverse_park(x, theta: float) -> AbcTriple:
    d, q = x
    return AbcTriple(
        d * math.cos(theta) - q * math.sin(theta),
        d * math.cos(theta - TWO_PI_3) - q * math.sin(theta - TWO_PI_3),
        d * math.cos(theta + TWO_PI_3) - q * math.sin(theta + TWO_PI_3),
    )


def park_matrix(theta: float) -> np.ndarray:
    """2x3 matrix form of :func:`park`."""
    ang = np.array([theta, theta - TWO_PI_3, theta + TWO_PI_3])
    return (2.0 / 3.0) * np.vstack([np.cos(ang), -np.sin(ang)])


def inverse_park_matrix(theta: float) -> np.ndarray:
    """3x2 matrix form of :func:`inverse_park`."""
    ang = np.array([theta, theta - TWO_PI_3, theta + TWO_PI_3])
    return np.column_stack([np.cos(ang), -np.sin(ang)])
