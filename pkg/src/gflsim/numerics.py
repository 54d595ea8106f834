"""Discretization residuals, smooth max/min and a damped Newton solver.

Everything here is a pure function of its inputs. The Newton solver works on a
small dense system (a few dozen unknowns), so the linear solve is a plain LU
factorization with partial pivoting.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve


class NonConvergence(RuntimeError):
    """Newton iteration cap reached without meeting the residual tolerance."""

    def __init__(self, message, x=None, residual_norm=math.inf, iterations=0):
        super().__init__(message)
        self.x = x
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobian(RuntimeError):
    """LU pivot below threshold; usually a modeling error or a bad time step."""

    def __init__(self, message, x=None, pivot=0.0):
        super().__init__(message)
        self.x = x
        self.pivot = pivot


@dataclass(frozen=True)
class SmoothingParams:
    epsilon: float = 1e-5

    def __post_init__(self):
        # zero is tolerated so the exact max/min can be recovered in checks
        if not self.epsilon >= 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 20
    damping: float = 1.0
    min_damping: float = 1.0 / 16.0
    pivot_tol: float = 1e-13

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if not 0.0 < self.min_damping <= self.damping:
            raise ValueError("min_damping must lie in (0, damping]")


@dataclass(frozen=True)
class ResidualSystem:
    """A square nonlinear system r(x) = 0 with an optional analytic Jacobian."""

    dimension: int
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def _eps(eps) -> float:
    return eps.epsilon if isinstance(eps, SmoothingParams) else float(eps)


def smax(a: float, b: float, eps=SmoothingParams()) -> float:
    """Smooth maximum, (a + b + sqrt((a - b)^2 + eps)) / 2."""
    return 0.5 * (a + b + math.sqrt((a - b) ** 2 + _eps(eps)))


def smin(a: float, b: float, eps=SmoothingParams()) -> float:
    """Smooth minimum, (a + b - sqrt((a - b)^2 + eps)) / 2."""
    return 0.5 * (a + b - math.sqrt((a - b) ** 2 + _eps(eps)))


def smax_grad(a: float, b: float, eps=SmoothingParams()) -> tuple[float, float]:
    """Partial derivatives of smax with respect to a and b."""
    s = math.sqrt((a - b) ** 2 + _eps(eps))
    if s == 0.0:
        return 0.5, 0.5
    g = (a - b) / s
    return 0.5 * (1.0 + g), 0.5 * (1.0 - g)


def smin_grad(a: float, b: float, eps=SmoothingParams()) -> tuple[float, float]:
    s = math.sqrt((a - b) ** 2 + _eps(eps))
    if s == 0.0:
        return 0.5, 0.5
    g = (a - b) / s
    return 0.5 * (1.0 - g), 0.5 * (1.0 + g)


def trapezoidal_residual(x_next, x_prev, f_next, f_prev, dt):
    """Residual of one trapezoidal step; zero when the update holds exactly."""
    return x_next - x_prev - 0.5 * dt * (f_next + f_prev)


@dataclass(frozen=True)
class CompanionModel:
    """Trapezoidal companion of a storage element C dx/dt = i.

    ``form`` picks the circuit representation. Norton writes KCL at the node,
    ``G x_next + I_hist - i_next = 0`` with ``G = 2C/dt`` and
    ``I_hist = -G x_prev - i_prev``. Thevenin writes KVL around the loop,
    ``x_next - R_eq i_next - V_hist = 0`` with ``R_eq = dt/(2C)`` and
    ``V_hist = x_prev + R_eq i_prev``. An inductor is the dual: x is the
    current, C the inductance and i the voltage across it.
    """

    capacitance: float
    dt: float
    form: str = "norton"

    def __post_init__(self):
        if self.form not in ("norton", "thevenin"):
            raise ValueError(f"unknown companion form {self.form!r}")
        if not self.capacitance > 0 or not self.dt > 0:
            raise ValueError("capacitance and dt must be positive")

    @property
    def coefficients(self) -> tuple[float, float]:
        """(a, b) such that residual = a*x_next - b*i_next - history."""
        if self.form == "norton":
            return 2.0 * self.capacitance / self.dt, 1.0
        return 1.0, self.dt / (2.0 * self.capacitance)

    def history(self, x_prev: float, i_prev: float) -> float:
        a, b = self.coefficients
        # Norton: -I_hist = G x_prev + i_prev ; Thevenin: V_hist = x_prev + R_eq i_prev
        return a * x_prev + b * i_prev

    def residual(self, x_next, x_prev, i_next, i_prev):
        a, b = self.coefficients
        return a * x_next - b * i_next - self.history(x_prev, i_prev)


def finite_diff_jacobian(system: ResidualSystem, x, h: float = 1e-7,
                         h_floor: float = 1e-9, scale=None, steps=None) -> np.ndarray:
    """Central-difference Jacobian.

    The step for column j is ``h * max(|x_j|, scale_j)`` floored at ``h_floor``.
    ``scale`` defaults to zero, i.e. a purely relative step. ``steps`` gives
    absolute per-column steps and overrides both.
    """
    x = np.asarray(x, dtype=float)
    n = system.dimension
    if scale is None:
        scale = np.zeros(n)
    jac = np.empty((n, n))
    for j in range(n):
        if steps is not None:
            step = float(steps[j])
        else:
            step = max(h * max(abs(x[j]), scale[j]), h_floor)
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        # use the representable step actually taken
        width = xp[j] - xm[j]
        jac[:, j] = (np.asarray(system.residual(xp)) - np.asarray(system.residual(xm))) / width
    return jac


def newton_solve(system: ResidualSystem, x0, settings: NewtonSettings = NewtonSettings()) -> NewtonResult:
    """Damped Newton-Raphson on ``system`` from ``x0``.

    Converges on the residual infinity norm. A full step that increases the
    residual norm is halved repeatedly down to ``settings.min_damping``; the
    last trial is accepted regardless so the iteration keeps moving.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (system.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({system.dimension},)")
    r = np.asarray(system.residual(x), dtype=float)
    norm = float(np.max(np.abs(r)))
    if not math.isfinite(norm):
        raise NonConvergence("non-finite residual at initial guess", x, norm, 0)
    it = 0
    while norm > settings.tol:
        if it >= settings.max_iter:
            raise NonConvergence(
                f"no convergence after {it} iterations (|r|={norm:.3e})", x, norm, it)
        it += 1
        if system.jacobian is not None:
            jac = np.asarray(system.jacobian(x), dtype=float)
        else:
            jac = finite_diff_jacobian(system, x)
        with warnings.catch_warnings():
            # singularity is reported below with our own threshold
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(jac, check_finite=False)
        pivots = np.abs(np.diag(lu))
        scale = max(float(np.max(np.abs(jac))), 1.0)
        if not np.all(np.isfinite(pivots)) or pivots.min() < settings.pivot_tol * scale:
            raise SingularJacobian(
                f"Jacobian pivot {pivots.min():.3e} below threshold", x, float(pivots.min()))
        dx = lu_solve((lu, piv), -r, check_finite=False)

        lam = settings.damping
        while True:
            x_try = x + lam * dx
            r_try = np.asarray(system.residual(x_try), dtype=float)
            norm_try = float(np.max(np.abs(r_try)))
            if norm_try <= norm or lam <= settings.min_damping:
                break
            lam = max(0.5 * lam, settings.min_damping)
        if not math.isfinite(norm_try):
            raise NonConvergence("residual became non-finite", x, norm, it)
        x, r, norm = x_try, r_try, norm_try
    return NewtonResult(x=x, iterations=it, residual_norm=norm)
