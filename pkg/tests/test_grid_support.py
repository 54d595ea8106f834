import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gflsim.grid_support import (FreqSupportParams, VoltVarParams, freq_deviation,
                                 psup_piecewise, psup_smooth, psup_smooth_with_slope,
                                 qsup_piecewise, qsup_smooth, qsup_smooth_with_slope)

W = 2 * math.pi * 60
EPS = 1e-5
FS = FreqSupportParams()
VV = VoltVarParams()


def test_freq_deviation_examples():
    assert freq_deviation(W, W) == 0.0
    assert freq_deviation(1.01 * W, W) == pytest.approx(0.01)
    d = 0.0123
    assert freq_deviation(W * (1 + d), W) == pytest.approx(d, rel=1e-13)


def test_psup_piecewise_examples():
    assert psup_piecewise(0.0005, FS) == 0.0
    assert psup_piecewise(0.01, FreqSupportParams(kf=20, fdb=0.0006)) == pytest.approx(-0.188)


@given(st.floats(-0.1, 0.1))
def test_psup_odd_symmetry(df):
    assert psup_piecewise(-df, FS) == pytest.approx(-psup_piecewise(df, FS), abs=1e-15)
    assert psup_smooth(-df, FS) == pytest.approx(-psup_smooth(df, FS), abs=1e-15)


def test_psup_smooth_examples():
    # closed-form value of the smoothed characteristic
    assert psup_smooth(0.01, FS) == pytest.approx(-0.18800150513491964, abs=1e-15)
    assert abs(psup_smooth(0.01, FS) - psup_piecewise(0.01, FS)) < 1e-5
    assert abs(psup_smooth(0.0, FS)) <= math.sqrt(EPS)


def test_psup_smooth_is_c1_at_the_corner():
    h = 1e-8
    xs = FS.fdb + np.linspace(-5e-4, 5e-4, 401)
    slopes = np.array([(psup_smooth(x + h, FS) - psup_smooth(x - h, FS)) / (2 * h) for x in xs])
    # the slope of kf * smin has |d/dx| <= kf^2 / (2 sqrt(eps)) between samples
    bound = FS.kf ** 2 / (2 * math.sqrt(EPS)) * (xs[1] - xs[0])
    assert np.max(np.abs(np.diff(slopes))) <= bound + 1e-4


def test_qsup_piecewise_examples():
    assert qsup_piecewise(1.005, VV) == 0.0
    assert qsup_piecewise(1.05, VoltVarParams(kv=10, vdb=0.01, qmax=0.3)) == pytest.approx(-0.3)
    assert qsup_piecewise(0.98, VoltVarParams(kv=10, vdb=0.01, qmax=1.0)) == pytest.approx(0.1)


def test_qsup_smooth_examples():
    assert qsup_smooth(1.05, VV) == pytest.approx(-0.2999750076594039, abs=1e-15)
    assert abs(qsup_smooth(1.0, VV)) <= 2 * math.sqrt(EPS)
    for dv in np.linspace(-0.1, 0.1, 41):
        assert abs(qsup_smooth(1 + dv, VoltVarParams(qmax=0.0))) <= math.sqrt(EPS)


def test_smooth_piecewise_sweep():
    for df in np.linspace(-0.05, 0.05, 20001):
        assert abs(psup_smooth(df, FS) - psup_piecewise(df, FS)) <= 2 * math.sqrt(EPS)
    for dv in np.linspace(-0.1, 0.1, 20001):
        q = qsup_smooth(1 + dv, VV)
        assert abs(q - qsup_piecewise(1 + dv, VV)) <= 2 * math.sqrt(EPS)
        assert abs(q) <= VV.qmax + math.sqrt(EPS)


def test_monotonicity():
    dfs = np.linspace(-0.05, 0.05, 2001)
    assert np.all(np.diff([psup_smooth(x, FS) for x in dfs]) <= 1e-15)
    assert np.all(np.diff([psup_piecewise(x, FS) for x in dfs]) <= 0)
    dvs = np.linspace(-0.1, 0.1, 2001)
    assert np.all(np.diff([qsup_piecewise(1 + x, VV) for x in dvs]) <= 0)


@given(st.floats(-0.05, 0.05))
def test_slopes_match_fd(x):
    h = 1e-8
    s = psup_smooth_with_slope(x, FS)[1]
    assert s == pytest.approx((psup_smooth(x + h, FS) - psup_smooth(x - h, FS)) / (2 * h),
                              abs=1e-4 * (1 + abs(s)))
    v = 1 + 2 * x
    s = qsup_smooth_with_slope(v, VV)[1]
    assert s == pytest.approx((qsup_smooth(v + h, VV) - qsup_smooth(v - h, VV)) / (2 * h),
                              abs=1e-4 * (1 + abs(s)))


def test_param_validation():
    with pytest.raises(ValueError):
        FreqSupportParams(kf=-1)
    with pytest.raises(ValueError):
        VoltVarParams(qmax=-0.1)
