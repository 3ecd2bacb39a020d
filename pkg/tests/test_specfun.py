import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from levinson2d.specfun import (
    EULER_GAMMA,
    MAX_ORDER,
    BesselDomainError,
    BesselValue,
    bessel_j,
    bessel_j_deriv,
    bessel_jy_table,
    bessel_k,
    bessel_y,
    bessel_y_deriv,
)

orders = st.integers(min_value=0, max_value=20)
args = st.floats(min_value=1e-3, max_value=400.0)


def test_known_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0
    assert bessel_j(0, 2.404825557695773) == pytest.approx(0.0, abs=1e-15)
    assert bessel_y(0, 1.0) == pytest.approx(0.088256964215676956, rel=1e-14)
    assert bessel_k(0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-13)
    assert EULER_GAMMA == pytest.approx(np.euler_gamma, rel=0, abs=1e-16)


@settings(max_examples=300, deadline=None)
@given(orders, args)
def test_against_reference(n, x):
    j, y = bessel_j(n, x), bessel_y(n, x)
    jr, yr = special.jv(n, x), special.yv(n, x)
    # absolute error relative to the envelope sqrt(2 / (pi x)), J, Y oscillate
    env = max(math.sqrt(2 / (math.pi * x)), abs(jr))
    assert abs(j - jr) <= 1e-12 * env + 1e-13 * abs(jr)
    assert abs(y - yr) <= 1e-12 * max(env, abs(yr))


@settings(max_examples=200, deadline=None)
@given(orders, args)
def test_wronskian(n, x):
    J, Y = bessel_jy_table(n + 1, np.array([x]))
    w = J[n + 1, 0] * Y[n, 0] - J[n, 0] * Y[n + 1, 0]
    assert w == pytest.approx(2 / (math.pi * x), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=12), st.floats(min_value=0.05, max_value=60.0))
def test_derivatives(n, x):
    assert bessel_j_deriv(n, x) == pytest.approx(special.jvp(n, x), abs=1e-12)
    assert bessel_y_deriv(n, x) == pytest.approx(special.yvp(n, x), rel=1e-10, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=6), st.floats(min_value=0.01, max_value=50.0))
def test_bessel_k(n, x):
    assert bessel_k(n, x) == pytest.approx(special.kv(n, x), rel=1e-11)


def test_table_shape_and_switch_continuity():
    x = np.array([[24.999999, 25.0], [25.000001, 30.0]])
    J, Y = bessel_jy_table(5, x)
    assert J.shape == Y.shape == (6, 2, 2)
    assert J[3, 0, 0] == pytest.approx(J[3, 1, 0], abs=1e-6)


def test_array_in_array_out():
    x = np.linspace(0.0, 10.0, 11)
    out = bessel_j(1, x)
    assert out.shape == x.shape
    assert out[0] == 0.0
    assert bessel_j_deriv(1, 0.0) == 0.5


@pytest.mark.parametrize("call", [
    lambda: bessel_j(-1, 1.0),
    lambda: bessel_j(1.5, 1.0),
    lambda: bessel_j(MAX_ORDER + 1, 1.0),
    lambda: bessel_j(0, -1.0),
    lambda: bessel_j(0, math.nan),
    lambda: bessel_k(0, 0.0),
])
def test_domain_errors(call):
    with pytest.raises(BesselDomainError):
        call()


def test_bessel_value_record():
    v = BesselValue("Y", 2, 3.0)
    assert v.value == pytest.approx(special.yv(2, 3.0), rel=1e-13)
    assert v.derivative == pytest.approx(special.yvp(2, 3.0), rel=1e-12)
    assert "Y_2" in repr(v)
    with pytest.raises(ValueError):
        BesselValue("K", 0, 1.0)
