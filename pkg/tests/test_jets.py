import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibrated_necks import jets
from calibrated_necks.jets import jet_space


def _univariate(value, order):
    return jet_space(1, order).variable(0, np.array([value]))


def test_exp_log_sin_cos_derivatives():
    a = 0.7
    x = _univariate(a, 5)
    for k in range(6):
        assert jets.exp(x).partial((k,))[0] == pytest.approx(math.exp(a))
        assert jets.sin(x).partial((k,))[0] == pytest.approx([math.sin, math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t)][k % 4](a))
    logd = [math.log(a)] + [(-1) ** (k - 1) * math.factorial(k - 1) / a ** k for k in range(1, 6)]
    for k in range(6):
        assert jets.log(x).partial((k,))[0] == pytest.approx(logd[k])


def test_product_and_quotient_rules():
    sp = jet_space(2, 3)
    p = np.array([[0.3, -0.4], [1.1, 0.2]])
    x, y = sp.variables(p)
    f = x * x * y + 3.0 * y
    assert np.allclose(f.partial((2, 1)), 2.0)
    assert np.allclose(f.partial((1, 1)), 2 * p[:, 0])
    g = 1.0 / (1.0 + x * x)
    assert np.allclose(g.partial((1, 0)), -2 * p[:, 0] / (1 + p[:, 0] ** 2) ** 2)
    assert np.allclose((g * (1.0 + x * x)).partials()[1:], 0, atol=1e-13)


def test_logistic_tails():
    x = _univariate(0.0, 3)
    assert jets.logistic(x).value[0] == pytest.approx(0.5)
    assert jets.logistic(x).partial((1,))[0] == pytest.approx(0.25)
    far = jets.logistic(_univariate(800.0, 2))
    assert far.value[0] == 1.0 and far.partial((1,))[0] == 0.0


def test_diff_and_truncate():
    sp = jet_space(2, 3)
    x, y = sp.variables(np.array([[0.5, 0.25]]))
    f = jets.sin(x) * y
    fx = f.diff(0)
    assert fx.order == 2
    assert np.allclose(fx.value, math.cos(0.5) * 0.25)
    assert np.allclose(f.truncate(1).partial((0, 1)), math.sin(0.5))
    with pytest.raises(ValueError):
        f.truncate(1).truncate(2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_taylor_evaluation_matches_function(a, b):
    sp = jet_space(2, 6)
    x, y = sp.variables(np.array([[a, b]]))
    f = jets.exp(0.3 * x) * jets.cos(y)
    h = np.array([[1e-2, -2e-2]])
    exact = math.exp(0.3 * (a + h[0, 0])) * math.cos(b + h[0, 1])
    assert f.evaluate(h)[0] == pytest.approx(exact, rel=1e-12, abs=1e-14)
