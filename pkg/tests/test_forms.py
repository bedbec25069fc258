import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibrated_necks.forms import (
    Box,
    FormError,
    SmoothMap,
    adapted_primitive,
    cn_norm,
    constant_form,
    d_exterior,
    evaluate,
    from_functions,
    identity_map,
    omega0,
    pullback,
    ray_primitive,
    scalar_field,
    wedge,
    zero_form_field,
)
from calibrated_necks.verify import _random_polynomial, plane_vanishing_form

E = np.eye(4)
UNIT = Box((-1.0,) * 4, (1.0,) * 4)


def _points(n, seed=0):
    return UNIT.sample(n, np.random.default_rng(seed))


def _fd_exterior(form_values, pts, h=1e-5):
    """Central-difference d of a 1-form given as a value function, components (i<j)."""
    out = {}
    for i in range(4):
        for j in range(i + 1, 4):
            def part(k, comp):
                return (form_values(pts + h * E[k])[:, comp] - form_values(pts - h * E[k])[:, comp]) / (2 * h)
            out[(i, j)] = part(i, j) - part(j, i)
    return out


def test_eval_omega0():
    w = omega0()
    p = np.zeros(4)
    assert evaluate(w, p, [E[0], E[1]])[0] == 1.0
    assert evaluate(w, p, [E[0], E[2]])[0] == 0.0
    assert evaluate(w, p, [E[1], E[0]])[0] == -1.0


def test_eval_errors():
    with pytest.raises(FormError):
        evaluate(omega0(), np.zeros(4), [E[0]])
    with pytest.raises(FormError):
        evaluate(omega0(UNIT), 2 * np.ones(4), [E[0], E[1]])


def test_d_constant_is_zero():
    pts = _points(5)
    assert np.all(d_exterior(omega0()).values(pts) == 0)


def test_d_product_rule_example():
    theta = from_functions(1, {(0,): lambda x: x[2] * x[3]})
    pts = _points(7)
    got = d_exterior(theta).values(pts)
    # components ordered (01, 02, 03, 12, 13, 23)
    expected = np.zeros_like(got)
    expected[:, 1] = -pts[:, 3]
    expected[:, 2] = -pts[:, 2]
    assert np.allclose(got, expected, atol=1e-15)
    fd = _fd_exterior(theta.values, pts)
    assert np.allclose(got[:, 1], fd[(0, 2)], atol=1e-9)
    assert np.allclose(got[:, 2], fd[(0, 3)], atol=1e-9)


def test_wedge_examples():
    dx = [constant_form(1, {(i,): 1.0}) for i in range(4)]
    p = np.zeros(4)
    assert evaluate(wedge(dx[0], dx[1]), p, [E[0], E[1]])[0] == 1.0
    assert np.all(wedge(dx[0], dx[0]).values(_points(3)) == 0)
    with pytest.raises(FormError):
        wedge(omega0(), wedge(omega0(), dx[0]))


def test_wedge_radial_cutoff():
    phi = scalar_field(lambda x: x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3])
    form = wedge(d_exterior(phi), constant_form(1, {(0,): 1.0}))
    pts = _points(5)
    got = form.values(pts)
    expected = np.zeros_like(got)
    expected[:, 0] = -2 * pts[:, 1]
    expected[:, 1] = -2 * pts[:, 2]
    expected[:, 2] = -2 * pts[:, 3]
    assert np.allclose(got, expected, atol=1e-14)


def test_pullback_identity_and_plane():
    w = from_functions(2, {(0, 1): lambda x: x[2] * x[0], (1, 3): lambda x: x[3] + 1.0})
    pts = _points(6)
    assert np.allclose(pullback(w, identity_map()).values(pts), w.values(pts), atol=1e-15)
    incl = SmoothMap.from_functions([lambda x: x[0], lambda x: x[1], lambda x: 0.0, lambda x: 0.0])
    assert np.all(pullback(constant_form(2, {(2, 3): 1.0}), incl).values(pts) == 0)


def test_pullback_holomorphic_graph():
    eps = 1e-2
    graph = SmoothMap.from_functions([
        lambda x: x[0],
        lambda x: x[1],
        lambda x: eps * (x[0] * x[0] - x[1] * x[1]),
        lambda x: 2 * eps * x[0] * x[1],
    ])
    pts = _points(5, seed=2)
    got = pullback(omega0(), graph).values(pts)
    z = pts[:, 0] + 1j * pts[:, 1]
    assert np.allclose(got[:, 0], 1 + np.abs(2 * eps * z) ** 2, atol=1e-15)


def test_ray_primitive_constant():
    beta = constant_form(2, {(0, 1): 1.0}, UNIT)
    alpha = ray_primitive(beta)
    pts = _points(6)
    v = alpha.values(pts)
    assert np.allclose(v[:, 0], -0.5 * pts[:, 1]) and np.allclose(v[:, 1], 0.5 * pts[:, 0])
    assert np.allclose(d_exterior(alpha).values(pts), beta.values(pts), atol=1e-12)


def test_ray_primitive_zero():
    alpha = ray_primitive(zero_form_field(2, UNIT))
    assert np.all(alpha.values(_points(3)) == 0)


def test_ray_primitive_cubic_example():
    beta = from_functions(2, {(0, 2): lambda x: x[2]}, UNIT)
    alpha = ray_primitive(beta)
    pts = _points(6)
    v = alpha.values(pts)
    x1, x3 = pts[:, 0], pts[:, 2]
    assert np.allclose(v[:, 0], -x3 * x3 / 3) and np.allclose(v[:, 2], x3 * x1 / 3)
    assert np.allclose(d_exterior(alpha).values(pts), beta.values(pts), atol=1e-12)


def test_ray_primitive_rejects_non_closed():
    with pytest.raises(FormError):
        ray_primitive(from_functions(2, {(0, 1): lambda x: x[2]}, UNIT))


def _check_adapted(beta, pts):
    alpha = adapted_primitive(beta)
    assert np.max(np.abs(d_exterior(alpha).values(pts) - beta.values(pts))) <= 1e-8
    plane = pts.copy()
    plane[:, 2:] = 0
    assert np.max(np.abs(alpha.values(plane))) <= 1e-10


def test_adapted_primitive_examples():
    pts = _points(6)
    _check_adapted(constant_form(2, {(2, 3): 1.0}, UNIT), pts)
    theta = from_functions(1, {(0,): lambda x: x[2] * x[3]}, UNIT)
    beta = d_exterior(theta)
    beta.box = UNIT
    _check_adapted(beta, pts)
    assert np.all(adapted_primitive(zero_form_field(2, UNIT)).values(pts) == 0)


def test_adapted_primitive_rejects_plane_pullback():
    with pytest.raises(FormError):
        adapted_primitive(constant_form(2, {(0, 1): 1.0}, UNIT))


def test_norm_bound_homogeneous():
    pts = _points(10)
    ratios = []
    for c in (1e-3, 1e-2, 1e-1, 1.0):
        theta = from_functions(1, {(0,): lambda x, c=c: c * x[2] * x[3]}, UNIT)
        beta = d_exterior(theta)
        beta.box = UNIT
        alpha = adapted_primitive(beta)
        ratios.append(cn_norm(alpha, pts, 0) / cn_norm(beta, pts, 1))
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dd_zero(seed):
    rng = np.random.default_rng(seed)
    theta = from_functions(1, {(i,): _random_polynomial(rng, 3) for i in range(4)}, UNIT)
    assert np.max(np.abs(d_exterior(d_exterior(theta)).values(_points(100, seed)))) <= 1e-10
    two = from_functions(2, {(i, j): _random_polynomial(rng, 3) for i in range(4) for j in range(i + 1, 4)}, UNIT)
    assert np.max(np.abs(d_exterior(d_exterior(two)).values(_points(100, seed)))) <= 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_d_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    theta = from_functions(1, {(i,): _random_polynomial(rng, 3) for i in range(4)}, UNIT)
    pts = _points(5, seed) * 0.5
    got = d_exterior(theta).values(pts)
    fd = _fd_exterior(theta.values, pts)
    for n, key in enumerate(sorted(fd)):
        assert np.allclose(got[:, n], fd[key], atol=1e-8)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_adapted_primitive_random(seed):
    rng = np.random.default_rng(seed)
    _check_adapted(plane_vanishing_form(rng), _points(6, seed))
