"""Forward-Euler reference integrator.

An independent route to the same trajectories: the algebraic unknowns are
eliminated in closed form, in dependency order, at every micro-step, the slack
voltage is synthesized per phase and Park-transformed explicitly, and the
differential states are advanced with explicit Euler at ``dt / refinement``.
Nothing here shares code with the residual assembly apart from the input
schedule and the initial differential states.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import model as m
from .core import Simulator, make_record

_TWO_PI_3 = 2.0 * math.pi / 3.0

# parameter vector layout
(_W, _VM, _DF, _KPPLL, _KIPLL, _TFPLL, _KPPQ, _KIPQ, _TFPQ, _KPIG, _KIIG, _TFIG,
 _RF, _LF, _RG, _LG, _KF, _FDB, _KV, _VDB, _VT, _QMAX, _EPS,
 _RFA, _RFB, _RFC, _RGA, _RGB, _RGC) = range(29)


@njit(cache=True)
def _smax(a, b, eps):
    return 0.5 * (a + b + math.sqrt((a - b) ** 2 + eps))


@njit(cache=True)
def _smin(a, b, eps):
    return 0.5 * (a + b - math.sqrt((a - b) ** 2 + eps))


@njit(cache=True)
def _deadband(x, k, db, eps):
    return _smin(0.0, -k * (x - db), eps) + _smax(0.0, -k * (x + db), eps)


_C120 = math.cos(_TWO_PI_3)
_S120 = math.sin(_TWO_PI_3)


@njit(cache=True)
def _shifted(c, s):
    """cos/sin of (x - 2pi/3) and (x + 2pi/3) from cos x, sin x."""
    return (c * _C120 + s * _S120, s * _C120 - c * _S120,
            c * _C120 - s * _S120, s * _C120 + c * _S120)


@njit(cache=True)
def _park(va, vb, vc, ca, sa):
    cb, sb, cc, sc = _shifted(ca, sa)
    d = (2.0 / 3.0) * (va * ca + vb * cb + vc * cc)
    q = -(2.0 / 3.0) * (va * sa + vb * sb + vc * sc)
    return d, q


@njit(cache=True)
def _inv_park(d, q, ang, k):
    a = ang - k * _TWO_PI_3
    return d * math.cos(a) - q * math.sin(a)


@njit(cache=True)
def _solve2(a11, a12, a21, a22, b1, b2):
    det = a11 * a22 - a12 * a21
    return (b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det


@njit(cache=True)
def _algebra(s, t, p, rl, pref0, qref0, thoff, fs_on, vv_on, y, rate):
    """Fill the full 27-vector ``y`` and the state rates from the states ``s``."""
    (vqf, ipll, th, pf, qf, Ip, Iq, ifd, ifq, vcd, vcq, igd, igq) = (
        s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8], s[9], s[10], s[11], s[12])
    w = p[_W]
    eps = p[_EPS]

    dl = p[_KPPLL] * vqf + ipll
    wh = w * (1.0 + dl)

    # slack voltage per phase, then into the PLL frame
    ths = w * (1.0 + p[_DF]) * t + thoff
    cs, ss = math.cos(ths), math.sin(ths)
    csb, _, csc, _ = _shifted(cs, ss)
    vsa = p[_VM] * cs
    vsb = p[_VM] * csb
    vsc = p[_VM] * csc
    ang = w * t + th
    ca, sa = math.cos(ang), math.sin(ang)
    vsd, vsq = _park(vsa, vsb, vsc, ca, sa)

    ps = 0.0
    if fs_on:
        ps = _deadband((wh - w) / w, p[_KF], p[_FDB], eps)
    ird = p[_KPPQ] * (pref0 + ps - pf) + Ip
    epd = p[_KPIG] * (ird - ifd) + vcd

    if rl:
        R = p[_RF] + p[_RG]
        L = p[_LF] + p[_LG]
        k = p[_LG] / L
        # d axis: vg_d = vs_d + Rg i_d - w Lg i_q + Lg di_d/dt, e_d = eps_d - w Lf i_q + vg_d
        c0 = vsd + p[_RG] * igd - wh * p[_LG] * igq + k * (-R * igd + wh * L * igq - vsd)
        c1 = epd - wh * p[_LF] * igq
        vgd, ed = _solve2(1.0, -k, -1.0, 1.0, c0, c1)
    else:
        ed = epd
        vgd = 0.0  # filled after the q axis is known

    qs = 0.0
    if vv_on:
        if not rl:
            # resistive PCC voltage depends on the d-axis command only
            vgd = (ed * p[_RG] + vsd * p[_RF]) / (p[_RF] + p[_RG])
        qv = _deadband(vgd - p[_VT], p[_KV], p[_VDB], eps)
        qs = _smax(_smin(qv, p[_QMAX], eps), -p[_QMAX], eps)
    irq = p[_KPPQ] * (qref0 + qs - qf) + Iq
    epq = p[_KPIG] * (irq - ifq) + vcq

    if rl:
        R = p[_RF] + p[_RG]
        L = p[_LF] + p[_LG]
        k = p[_LG] / L
        c0 = vsq + p[_RG] * igq + wh * p[_LG] * igd + k * (-R * igq - wh * L * igd - vsq)
        c1 = epq + wh * p[_LF] * igd
        vgq, eq = _solve2(1.0, -k, -1.0, 1.0, c0, c1)
        did = (-R * igd + wh * L * igq + ed - vsd) / L
        diq = (-R * igq - wh * L * igd + eq - vsq) / L
    else:
        eq = epq
        # per-phase resistive divider
        cb, sb, cc, sc = _shifted(ca, sa)
        ea = ed * ca - eq * sa
        eb = ed * cb - eq * sb
        ec = ed * cc - eq * sc
        ra = p[_RFA] + p[_RGA]
        rb = p[_RFB] + p[_RGB]
        rc = p[_RFC] + p[_RGC]
        vgd, vgq = _park((ea * p[_RGA] + vsa * p[_RFA]) / ra, (eb * p[_RGB] + vsb * p[_RFB]) / rb,
                         (ec * p[_RGC] + vsc * p[_RFC]) / rc, ca, sa)
        igd, igq = _park((ea - vsa) / ra, (eb - vsb) / rb, (ec - vsc) / rc, ca, sa)
        did = 0.0
        diq = 0.0

    pg = 1.5 * (vgd * igd + vgq * igq)
    qg = 1.5 * (vgd * igq - vgq * igd)

    rate[0] = (vgq - vqf) / p[_TFPLL]
    rate[1] = p[_KIPLL] * vqf
    rate[2] = w * dl
    rate[3] = (pg - pf) / p[_TFPQ]
    rate[4] = (qg - qf) / p[_TFPQ]
    rate[5] = p[_KIPQ] * (pref0 + ps - pf)
    rate[6] = p[_KIPQ] * (qref0 + qs - qf)
    rate[7] = (igd - ifd) / p[_TFIG]
    rate[8] = (igq - ifq) / p[_TFIG]
    rate[9] = p[_KIIG] * (ird - ifd)
    rate[10] = p[_KIIG] * (irq - ifq)
    rate[11] = did
    rate[12] = diq

    for j in range(11):
        y[j] = s[j]
    y[11] = igd
    y[12] = igq
    y[13] = vgd
    y[14] = vgq
    y[15] = dl
    y[16] = wh
    y[17] = pg
    y[18] = qg
    y[19] = ird
    y[20] = irq
    y[21] = epd
    y[22] = epq
    y[23] = ed
    y[24] = eq
    y[25] = ps
    y[26] = qs


@njit(cache=True)
def _euler_kernel(s0, p, rl, p_ref, q_ref, th_off, fs_on, vv_on, n_steps, refinement, dt):
    out = np.empty((n_steps + 1, 27))
    s = s0.copy()
    rate = np.zeros(13)
    y = np.zeros(27)
    h = dt / refinement
    _algebra(s, 0.0, p, rl, p_ref[0], q_ref[0], th_off[0], fs_on[0], vv_on[0], y, rate)
    out[0, :] = y
    for n in range(n_steps):
        for j in range(refinement):
            t = (n * refinement + j) * h
            _algebra(s, t, p, rl, p_ref[n], q_ref[n], th_off[n], fs_on[n], vv_on[n], y, rate)
            for i in range(13):
                s[i] += h * rate[i]
            if not rl:
                s[11] = 0.0
                s[12] = 0.0
        for i in range(13):
            if not math.isfinite(s[i]):
                raise OverflowError("Euler oracle diverged")
        _algebra(s, (n + 1) * dt, p, rl, p_ref[n + 1], q_ref[n + 1], th_off[n + 1],
                 fs_on[n + 1], vv_on[n + 1], y, rate)
        out[n + 1, :] = y
    return out


def _params(scenario, topology):
    g, c, net = scenario.grid, scenario.controller, scenario.network
    fs, vv = scenario.freq_support, scenario.volt_var
    if topology == "rl":
        rf, lf, rg, lg = net.rf, net.lf, net.rg, net.lg
    else:
        rf, lf, rg, lg = net.Rf[0], 0.0, net.Rg[0], 0.0
    return np.array([
        g.omega, g.Vm, g.freq_offset, c.kp_pll, c.ki_pll, c.Tf_pll, c.kp_pq, c.ki_pq, c.Tf_pq,
        c.kp_ig, c.ki_ig, c.Tf_ig, rf, lf, rg, lg, fs.kf, fs.fdb, vv.kv, vv.vdb, vv.vtarget,
        vv.qmax, 0.0, *net.Rf, *net.Rg], dtype=float)


def euler_trajectory(scenario, config, refinement: int = 100) -> np.ndarray:
    """Unknown vectors on the main time grid, shape (n_steps + 1, 27)."""
    if int(refinement) != refinement or refinement < 10:
        raise ValueError(f"refinement must be an integer >= 10, got {refinement}")
    sim = Simulator(scenario, config)
    if (config.topology == "resistive" and not scenario.network.balanced
            and bool(np.any(sim.schedule.volt_var))):
        # the d-axis PCC voltage then depends on the q-axis command: no explicit ordering
        raise ValueError("the Euler oracle needs balanced phases when volt-var is active")
    x0 = sim.initialize().x
    s0 = np.zeros(13)
    s0[:11] = x0[list(m.CONTROL_STATES)]
    rl = config.topology == "rl"
    if rl:
        s0[11], s0[12] = x0[m.IGD], x0[m.IGQ]
    p = _params(scenario, config.topology)
    p[_EPS] = config.smoothing.epsilon
    sch = sim.schedule
    return _euler_kernel(s0, p, rl, sch.p_ref, sch.q_ref, sch.theta_offset,
                         sch.freq_support, sch.volt_var, config.n_steps, int(refinement),
                         config.dt)


def euler_oracle_run(scenario, config, refinement: int = 100) -> list:
    """Forward-Euler run at ``dt / refinement``, sampled on the main grid."""
    traj = euler_trajectory(scenario, config, refinement)
    records = []
    w = scenario.grid.omega
    for k, x in enumerate(traj):
        t = k * config.dt
        ang = w * t + x[m.TH]
        vg_abc = [_inv_park(x[m.VGD], x[m.VGQ], ang, float(j)) for j in (0, 1, -1)]
        records.append(make_record(t, x, vg_abc, 0))
    return records
