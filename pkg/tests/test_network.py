import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gflsim.network import (DegenerateNetwork, NetworkParams, cross_coupling,
                            line_current_resistive, pcc_voltage_resistive, pcc_voltage_rl,
                            plant_rate_dq)

W = 2 * math.pi * 60
pos = st.floats(0.01, 1.0)
v = st.floats(-2, 2)


def test_pcc_voltage_resistive_examples():
    net = NetworkParams(Rf=0.05, Rg=0.05)
    assert pcc_voltage_resistive((1, 2, 3), (1, 2, 3), net) == pytest.approx((1, 2, 3))
    assert pcc_voltage_resistive((1, 0, 0), (0, 0, 0), net)[0] == pytest.approx(0.5)
    net = NetworkParams(Rf=0.05, Rg=0.1)
    assert pcc_voltage_resistive((1.02, 0, 0), (1.0, 0, 0), net)[0] == pytest.approx(1.0133333,
                                                                                      abs=1e-7)


def test_line_current_resistive_examples():
    net = NetworkParams(Rf=1.0, Rg=1.0)
    assert line_current_resistive((1, 2, 3), (1, 2, 3), net) == (0, 0, 0)
    assert line_current_resistive((1.5, 0, 0), (0.5, 0, 0), net)[0] == pytest.approx(0.5)


def test_degenerate_resistive_network():
    net = NetworkParams(Rf=(0.1, 0.0, 0.1), Rg=(0.1, 0.0, 0.1))
    with pytest.raises(DegenerateNetwork):
        pcc_voltage_resistive((1, 1, 1), (0, 0, 0), net)
    with pytest.raises(DegenerateNetwork):
        line_current_resistive((1, 1, 1), (0, 0, 0), net)


@given(pos, pos, v, v)
def test_kcl_consistency(rf, rg, e, vs):
    net = NetworkParams(Rf=rf, Rg=rg)
    vg = pcc_voltage_resistive((e, 0, 0), (vs, 0, 0), net)[0]
    i = line_current_resistive((e, 0, 0), (vs, 0, 0), net)[0]
    assert (e - vg) / rf == pytest.approx(i, abs=1e-12 / min(rf, rg))
    assert (vg - vs) / rg == pytest.approx(i, abs=1e-12 / min(rf, rg))


def test_plant_rate_examples():
    net = NetworkParams.from_reactance(0.01, 0.1, 0.02, 0.05, W)
    R = net.r_series
    rate = plant_rate_dq((0.6, 0.0), (1.0 + R * 0.6, W * net.l_series * 0.6), (1.0, 0.0), W, net)
    assert rate == pytest.approx((0.0, 0.0), abs=1e-12)
    assert plant_rate_dq((0, 0), (1, 0.2), (1, 0.2), W, net) == (0.0, 0.0)


def test_plant_rate_needs_inductance():
    with pytest.raises(DegenerateNetwork):
        plant_rate_dq((0, 0), (1, 0), (1, 0), W, NetworkParams(Rf=0.1))


def test_plant_step_response_against_closed_form():
    """Decoupled step: L di/dt = -R i + u from rest, explicit Euler at dt / 100."""
    net = NetworkParams.from_reactance(0.05, 0.1, 0.0, 0.0, W)
    R, L = net.r_series, net.l_series
    dt = 50e-6 / 100
    i = np.zeros(2)
    for _ in range(int(round(0.03 / dt))):
        # cancel the rotation term so the axes decouple
        e = (1.0 - W * L * i[1], 0.0 + W * L * i[0])
        i = i + dt * np.array(plant_rate_dq(i, (e[0] + 1.0, e[1]), (1.0, 0.0), W, net))
    exact = (1.0 / R) * (1 - math.exp(-R / L * 0.03))
    assert abs(i[0] - exact) < 1e-3
    assert abs(i[1]) < 1e-12


def test_pcc_voltage_rl_examples():
    net = NetworkParams.from_reactance(0.01, 0.1, 0.02, 0.05, W)
    assert pcc_voltage_rl((0, 0), (0, 0), (1.0, 0.1), W, net) == (1.0, 0.1)
    net0 = NetworkParams.from_reactance(0.01, 0.1, 0.02, 0.0, W)
    assert pcc_voltage_rl((0.5, 0.2), (3.0, -1.0), (1.0, 0.0), W, net0) == pytest.approx(
        (1.0 + 0.02 * 0.5, 0.02 * 0.2))


@given(pos, pos, v, v, v, v, v, v)
def test_rl_reduces_to_resistive(rf, rg, idd, iq, ed, eq, vsd, vsq):
    """With L = 0 the series current is (e - vs)/R and the PCC voltage is the divider."""
    net = NetworkParams(Rf=rf, Rg=rg)
    i = ((ed - vsd) / (rf + rg), (eq - vsq) / (rf + rg))
    vg = pcc_voltage_rl(i, (0.0, 0.0), (vsd, vsq), W, net)
    expect = ((ed * rg + vsd * rf) / (rf + rg), (eq * rg + vsq * rf) / (rf + rg))
    assert vg == pytest.approx(expect, abs=1e-12)


@given(v, v)
def test_cross_coupling_does_no_work(a, b):
    j = cross_coupling((a, b))
    assert abs(a * j[0] + b * j[1]) <= 1e-14


def test_balanced_reduction_and_validation():
    net = NetworkParams(Rf=0.1, Lf=(2e-4,) * 3, Rg=0.0, Lg=0.0)
    assert net.balanced and net.rf == 0.1 and net.lf == 2e-4
    unb = NetworkParams(Rf=(0.1, 0.2, 0.1))
    assert not unb.balanced
    with pytest.raises(DegenerateNetwork):
        unb.rf
    with pytest.raises(ValueError):
        NetworkParams(Rf=-0.1)
    net = NetworkParams.from_reactance(0.01, 0.1, 0, 0.2, W)
    assert net.lf * W == pytest.approx(0.1) and net.lg * W == pytest.approx(0.2)
