"""Global unknown vector, per-step residual and its analytic Jacobian.

Every unknown owns one residual row. Differential unknowns get a trapezoidal
companion row ``a*x_next - b*i_next - hist``; algebraic unknowns get
``y - g(...)``. The layout is fixed and shared with the Euler oracle.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..frames import TWO_PI_3, inverse_park_matrix, park_matrix
from ..grid_support import psup_smooth_with_slope, qsup_smooth_with_slope
from ..numerics import CompanionModel

NAMES = (
    "vq_fil", "i_pll", "theta_pll", "p_fil", "q_fil", "int_p", "int_q",
    "ifil_d", "ifil_q", "vcc_d", "vcc_q", "ig_d", "ig_q",
    "vg_d", "vg_q", "delta_pll", "omega_hat", "p_g", "q_g",
    "iref_d", "iref_q", "eps_d", "eps_q", "einv_d", "einv_q", "p_sup", "q_sup",
)
N = len(NAMES)
(VQF, IPLL, TH, PF, QF, IP, IQ, IFD, IFQ, VCD, VCQ, IGD, IGQ,
 VGD, VGQ, DEL, WH, PG, QG, IRD, IRQ, EPD, EPQ, ED, EQ, PS, QS) = range(N)
INDEX = {name: k for k, name in enumerate(NAMES)}

CONTROL_STATES = (VQF, IPLL, TH, PF, QF, IP, IQ, IFD, IFQ, VCD, VCQ)


class Inputs(NamedTuple):
    """Exogenous signals in effect over one step."""

    p_ref: float
    q_ref: float
    theta_offset: float
    freq_support: bool
    volt_var: bool


class Model:
    """Residual assembly for one scenario/config pair."""

    def __init__(self, scenario, config):
        self.scenario = scenario
        self.config = config
        grid = scenario.grid
        self.w = grid.omega
        self.Vm = grid.Vm
        self.df = grid.freq_offset
        self.ctrl = scenario.controller
        self.net = scenario.network
        self.topology = config.topology
        self.frame = config.frame
        self.eps = config.smoothing
        self.fs = scenario.freq_support
        self.vv = scenario.volt_var

        if self.topology == "rl":
            self.diff = CONTROL_STATES + (IGD, IGQ)
            self.R = self.net.r_series
            self.L = self.net.l_series
            self.Rf, self.Lf = self.net.rf, self.net.lf
            self.Rg, self.Lg = self.net.rg, self.net.lg
        else:
            self.diff = CONTROL_STATES
            if self.frame == "dq":
                self.Rf, self.Rg = self.net.rf, self.net.rg
                self.R = self.Rf + self.Rg
            else:
                rf = np.array(self.net.Rf)
                rg = np.array(self.net.Rg)
                self._ga = rg / (rf + rg)
                self._gb = rf / (rf + rg)
                self._gi = 1.0 / (rf + rg)
        self.alg = tuple(k for k in range(N) if k not in self.diff)
        self.diff_mask = np.zeros(N, dtype=bool)
        self.diff_mask[list(self.diff)] = True

        cap = np.zeros(N)
        c = self.ctrl
        cap[[VQF, IPLL, TH, PF, QF, IP, IQ, IFD, IFQ, VCD, VCQ]] = (
            c.Tf_pll, 1.0, 1.0, c.Tf_pq, c.Tf_pq, 1.0, 1.0, c.Tf_ig, c.Tf_ig, 1.0, 1.0)
        if self.topology == "rl":
            cap[[IGD, IGQ]] = self.L
        self.capacitance = cap
        self.a = np.zeros(N)
        self.b = np.zeros(N)
        for k in self.diff:
            comp = CompanionModel(cap[k], config.dt, config.companion_form)
            self.a[k], self.b[k] = comp.coefficients
        self._jac_template = self._constant_jacobian()

    # ------------------------------------------------------------------ sources
    def slack_dq(self, theta_pll, t, u):
        """Slack voltage in the PLL frame and its angle difference."""
        phi = self.w * self.df * t + u.theta_offset - theta_pll
        return self.Vm * math.cos(phi), self.Vm * math.sin(phi)

    def slack_abc(self, t, u):
        th = self.w * (1.0 + self.df) * t + u.theta_offset
        return self.Vm * np.cos([th, th - TWO_PI_3, th + TWO_PI_3])

    def frame_angle(self, theta_pll, t):
        return self.w * t + theta_pll

    # --------------------------------------------------------------- evaluation
    def evaluate(self, x, t, u):
        """Algebraic residual rows and branch currents of the differential rows.

        Returns two length-N arrays. ``alg`` is zero on differential rows and
        ``cur`` (the C*dx/dt "current" of each companion) is zero on algebraic
        rows.
        """
        (vqf, ipll, th, pf, qf, Ip, Iq, ifd, ifq, vcd, vcq, igd, igq, vgd, vgq,
         dl, wh, pg, qg, ird, irq, epd, epq, ed, eq, ps, qs) = x.tolist()
        c = self.ctrl
        vsd, vsq = self.slack_dq(th, t, u)
        alg = [0.0] * N
        cur = [0.0] * N

        pref = u.p_ref + ps
        qref = u.q_ref + qs
        cur[VQF] = vgq - vqf
        cur[IPLL] = c.ki_pll * vqf
        cur[TH] = self.w * dl
        cur[PF] = pg - pf
        cur[QF] = qg - qf
        cur[IP] = c.ki_pq * (pref - pf)
        cur[IQ] = c.ki_pq * (qref - qf)
        cur[IFD] = igd - ifd
        cur[IFQ] = igq - ifq
        cur[VCD] = c.ki_ig * (ird - ifd)
        cur[VCQ] = c.ki_ig * (irq - ifq)

        if self.topology == "rl":
            R, L = self.R, self.L
            cur[IGD] = -R * igd + wh * L * igq + ed - vsd
            cur[IGQ] = -R * igq - wh * L * igd + eq - vsq
            # PCC = slack + grid-branch drop, with di/dt taken from the series branch
            did, diq = cur[IGD] / L, cur[IGQ] / L
            Rg, Lg, Lf = self.Rg, self.Lg, self.Lf
            alg[VGD] = vgd - (vsd + Rg * igd + Lg * did - wh * Lg * igq)
            alg[VGQ] = vgq - (vsq + Rg * igq + Lg * diq + wh * Lg * igd)
            alg[ED] = ed - (epd - wh * Lf * igq + vgd)
            alg[EQ] = eq - (epq + wh * Lf * igd + vgq)
        elif self.frame == "dq":
            Rf, Rg, R = self.Rf, self.Rg, self.R
            alg[VGD] = vgd - (ed * Rg + vsd * Rf) / R
            alg[VGQ] = vgq - (eq * Rg + vsq * Rf) / R
            alg[IGD] = igd - (ed - vsd) / R
            alg[IGQ] = igq - (eq - vsq) / R
            alg[ED] = ed - epd
            alg[EQ] = eq - epq
        else:
            vg_abc, ig_abc = self._abc_network(ed, eq, th, t, u)
            P = park_matrix(self.frame_angle(th, t))
            vg = P @ vg_abc
            ig = P @ ig_abc
            alg[VGD] = vgd - vg[0]
            alg[VGQ] = vgq - vg[1]
            alg[IGD] = igd - ig[0]
            alg[IGQ] = igq - ig[1]
            alg[ED] = ed - epd
            alg[EQ] = eq - epq

        alg[DEL] = dl - (c.kp_pll * vqf + ipll)
        alg[WH] = wh - self.w * (1.0 + dl)
        alg[PG] = pg - 1.5 * (vgd * igd + vgq * igq)
        alg[QG] = qg - 1.5 * (vgd * igq - vgq * igd)
        alg[IRD] = ird - (c.kp_pq * (pref - pf) + Ip)
        alg[IRQ] = irq - (c.kp_pq * (qref - qf) + Iq)
        alg[EPD] = epd - (c.kp_ig * (ird - ifd) + vcd)
        alg[EPQ] = epq - (c.kp_ig * (irq - ifq) + vcq)
        if u.freq_support:
            alg[PS] = ps - psup_smooth_with_slope((wh - self.w) / self.w, self.fs, self.eps)[0]
        else:
            alg[PS] = ps
        if u.volt_var:
            alg[QS] = qs - qsup_smooth_with_slope(vgd, self.vv, self.eps)[0]
        else:
            alg[QS] = qs
        return np.array(alg), np.array(cur)

    def _abc_network(self, ed, eq, th, t, u):
        e_abc = inverse_park_matrix(self.frame_angle(th, t)) @ np.array([ed, eq])
        vs = self.slack_abc(t, u)
        return self._ga * e_abc + self._gb * vs, self._gi * (e_abc - vs)

    def currents(self, x, t, u):
        return self.evaluate(x, t, u)[1]

    def history(self, x_prev, t_prev, u):
        """Companion history terms from the accepted state at the previous step."""
        return self.a * x_prev + self.b * self.currents(x_prev, t_prev, u)

    def step_residual(self, x, t, u, hist):
        alg, cur = self.evaluate(x, t, u)
        # storage terms first: a*x and hist nearly cancel, keep that exact
        return (self.a * x - hist) + (alg - self.b * cur)

    # ----------------------------------------------------------------- jacobian
    def _constant_jacobian(self):
        """State-independent entries of (algebraic rows, current rows)."""
        c = self.ctrl
        A = np.zeros((N, N))
        D = np.zeros((N, N))
        D[VQF, VGQ], D[VQF, VQF] = 1.0, -1.0
        D[IPLL, VQF] = c.ki_pll
        D[TH, DEL] = self.w
        D[PF, PG], D[PF, PF] = 1.0, -1.0
        D[QF, QG], D[QF, QF] = 1.0, -1.0
        D[IP, PS], D[IP, PF] = c.ki_pq, -c.ki_pq
        D[IQ, QS], D[IQ, QF] = c.ki_pq, -c.ki_pq
        D[IFD, IGD], D[IFD, IFD] = 1.0, -1.0
        D[IFQ, IGQ], D[IFQ, IFQ] = 1.0, -1.0
        D[VCD, IRD], D[VCD, IFD] = c.ki_ig, -c.ki_ig
        D[VCQ, IRQ], D[VCQ, IFQ] = c.ki_ig, -c.ki_ig
        for k in self.alg:
            A[k, k] = 1.0
        if self.topology == "rl":
            D[IGD, IGD] = D[IGQ, IGQ] = -self.R
            D[IGD, ED] = D[IGQ, EQ] = 1.0
            A[ED, EPD] = A[EQ, EPQ] = -1.0
            A[ED, VGD] = A[EQ, VGQ] = -1.0
        elif self.frame == "dq":
            A[VGD, ED] = A[VGQ, EQ] = -self.Rg / self.R
            A[IGD, ED] = A[IGQ, EQ] = -1.0 / self.R
            A[ED, EPD] = A[EQ, EPQ] = -1.0
        else:
            A[ED, EPD] = A[EQ, EPQ] = -1.0
        A[DEL, VQF], A[DEL, IPLL] = -c.kp_pll, -1.0
        A[WH, DEL] = -self.w
        A[IRD, PS], A[IRD, PF], A[IRD, IP] = -c.kp_pq, c.kp_pq, -1.0
        A[IRQ, QS], A[IRQ, QF], A[IRQ, IQ] = -c.kp_pq, c.kp_pq, -1.0
        A[EPD, IRD], A[EPD, IFD], A[EPD, VCD] = -c.kp_ig, c.kp_ig, -1.0
        A[EPQ, IRQ], A[EPQ, IFQ], A[EPQ, VCQ] = -c.kp_ig, c.kp_ig, -1.0
        return A, D

    def jacobian_parts(self, x, t, u):
        """(A, D): d(alg)/dx and d(cur)/dx at ``x``."""
        A = self._jac_template[0].copy()
        D = self._jac_template[1].copy()
        th, igd, igq, vgd, vgq, wh = x[TH], x[IGD], x[IGQ], x[VGD], x[VGQ], x[WH]
        vsd, vsq = self.slack_dq(th, t, u)
        # d(vs_d)/d(theta) = vs_q, d(vs_q)/d(theta) = -vs_d

        if self.topology == "rl":
            R, L, Lg, Lf, Rg = self.R, self.L, self.Lg, self.Lf, self.Rg
            D[IGD, IGQ] = wh * L
            D[IGD, WH] = L * igq
            D[IGD, TH] = -vsq
            D[IGQ, IGD] = -wh * L
            D[IGQ, WH] = -L * igd
            D[IGQ, TH] = vsd
            # vg = vs + Rg i + (Lg/L) cur + wh Lg J i ; the wh terms cancel
            k = Lg / L
            A[VGD, TH] = -(vsq + k * D[IGD, TH])
            A[VGQ, TH] = -(-vsd + k * D[IGQ, TH])
            A[VGD, IGD] = -(Rg - k * R)
            A[VGQ, IGQ] = -(Rg - k * R)
            A[VGD, ED] = -k
            A[VGQ, EQ] = -k
            A[VGD, IGQ] = -(k * wh * L - wh * Lg)
            A[VGQ, IGD] = -(-k * wh * L + wh * Lg)
            A[VGD, WH] = -(k * L * igq - Lg * igq)
            A[VGQ, WH] = -(-k * L * igd + Lg * igd)
            A[ED, WH], A[ED, IGQ] = Lf * igq, wh * Lf
            A[EQ, WH], A[EQ, IGD] = -Lf * igd, -wh * Lf
        elif self.frame == "dq":
            A[VGD, TH] = -(self.Rf / self.R) * vsq
            A[VGQ, TH] = (self.Rf / self.R) * vsd
            A[IGD, TH] = vsq / self.R
            A[IGQ, TH] = -vsd / self.R
        else:
            self._abc_jacobian(A, x, t, u)

        A[PG, VGD], A[PG, IGD], A[PG, VGQ], A[PG, IGQ] = -1.5 * igd, -1.5 * vgd, -1.5 * igq, -1.5 * vgq
        A[QG, VGD], A[QG, IGQ], A[QG, VGQ], A[QG, IGD] = -1.5 * igq, -1.5 * vgd, 1.5 * igd, 1.5 * vgq
        if u.freq_support:
            slope = psup_smooth_with_slope((wh - self.w) / self.w, self.fs, self.eps)[1]
            A[PS, WH] = -slope / self.w
        if u.volt_var:
            A[QS, VGD] = -qsup_smooth_with_slope(vgd, self.vv, self.eps)[1]
        return A, D

    def _abc_jacobian(self, A, x, t, u):
        th = x[TH]
        ang = self.frame_angle(th, t)
        P = park_matrix(ang)
        Pi = inverse_park_matrix(ang)
        e = np.array([x[ED], x[EQ]])
        Je = np.array([-e[1], e[0]])
        vs = self.slack_abc(t, u)

        def rotate(v):
            # d/dtheta of park(w, theta) for fixed w
            return np.array([v[1], -v[0]])

        for rows, gain, off in ((VGD, self._ga, self._gb * vs), (IGD, self._gi, -self._gi * vs)):
            w = gain * (Pi @ e) + off
            m = P @ (gain[:, None] * Pi)
            dth = rotate(P @ w) + P @ (gain * (Pi @ Je))
            A[rows:rows + 2, ED] = -m[:, 0]
            A[rows:rows + 2, EQ] = -m[:, 1]
            A[rows:rows + 2, TH] = -dth

    def step_jacobian(self, x, t, u):
        A, D = self.jacobian_parts(x, t, u)
        J = A - self.b[:, None] * D
        J[self.diff, self.diff] += self.a[list(self.diff)]
        return J

    def reinit_jacobian(self, x, t, u):
        A, _ = self.jacobian_parts(x, t, u)
        A[self.diff, self.diff] = 1.0
        return A

    def reinit_residual(self, x, t, u, x_fixed):
        alg, _ = self.evaluate(x, t, u)
        return np.where(self.diff_mask, x - x_fixed, alg)

    def steady_residual(self, x, t, u):
        alg, cur = self.evaluate(x, t, u)
        return alg + cur

    def steady_jacobian(self, x, t, u):
        A, D = self.jacobian_parts(x, t, u)
        return A + D

    # ------------------------------------------------------------------ outputs
    def pcc_abc(self, x, t, u):
        if self.topology == "resistive" and self.frame == "abc":
            return self._abc_network(x[ED], x[EQ], x[TH], t, u)[0]
        return inverse_park_matrix(self.frame_angle(x[TH], t)) @ np.array([x[VGD], x[VGQ]])
