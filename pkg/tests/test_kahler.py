import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibrated_necks import jets
from calibrated_necks.forms import constant_form, from_functions, omega0
from calibrated_necks.kahler import (
    DELTA,
    J0,
    OMEGA0,
    DegenerateFormError,
    EuclideanConstants,
    SurfacePatch,
    acs_from_omega,
    calibration_residual,
    euclidean_fields,
    j_preserves_tangent,
    metric_jets,
    polar_acs,
    skew_field,
    wirtinger_comass,
)

R = np.array([[0.0, -1.0], [1.0, 0.0]])


def block(c):
    A = np.zeros((4, 4))
    A[:2, :2] = c * R
    A[2:, 2:] = R
    return A


def random_near_j0(rng, size):
    M = rng.standard_normal((4, 4))
    K = M - M.T
    return J0 + size * K / np.linalg.norm(K, 2)


def test_euclidean_constants():
    assert EuclideanConstants().identity_residual() == 0
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(J0 @ v, [-2, 1, -4, 3])


def test_skew_field_examples():
    p = np.zeros((1, 4))
    assert np.allclose(skew_field(omega0(), p)[0], J0)
    c = 2.0
    w = constant_form(2, {(0, 1): c, (2, 3): 1.0})
    assert np.allclose(skew_field(w, p)[0], block(c))
    rng = np.random.default_rng(0)
    W = from_functions(2, {(0, 1): lambda x: 1 + x[0], (1, 3): lambda x: x[2], (0, 2): lambda x: 0.3}).matrix(p + 0.2)[0]
    A = skew_field(W)
    v, u = rng.standard_normal((2, 100, 4))
    assert np.max(np.abs(np.einsum("pi,ij,pj->p", v, W, u) + np.einsum("pi,ij,pj->p", v, np.eye(4), (A @ u.T).T))) < 1e-14


def test_polar_examples():
    f = polar_acs(J0)
    assert np.allclose(f.g, DELTA) and np.allclose(f.J, J0)
    f = polar_acs(block(2.0))
    assert np.allclose(-block(2.0) @ block(2.0), np.diag([4, 4, 1, 1]))
    assert np.allclose(f.g, np.diag([2, 2, 1, 1])) and np.allclose(f.J, J0)
    assert max(f.identity_residuals().values()) < 1e-14


def test_polar_degenerate():
    with pytest.raises(DegenerateFormError):
        polar_acs(block(0.0))


def test_polar_random():
    rng = np.random.default_rng(1)
    A = np.stack([random_near_j0(rng, 0.3) for _ in range(20)])
    f = polar_acs(A)
    assert max(f.identity_residuals(seed=2).values()) <= 1e-10


def test_comass_omega0():
    res = wirtinger_comass(OMEGA0, DELTA, J0, n_samples=10_000)
    assert res.candidate == pytest.approx(1.0, abs=1e-14)
    assert res.sampled <= 1.0 + 1e-12
    v = np.array([1.0, 0, 0, 0])
    assert v @ OMEGA0 @ (J0 @ v) == pytest.approx(1.0)
    assert np.eye(4)[0] @ OMEGA0 @ np.eye(4)[2] == 0


def _graph_patch(func):
    """Graph (z, func(z)) over the unit square, as a SurfacePatch."""

    def fn(x):
        w = func(x[0] + x[1] * 1j)
        return [x[0], x[1], w.real, w.imag]

    return SurfacePatch(fn)


def _conj_graph_patch(c):
    return SurfacePatch(lambda x: [x[0], x[1], x[0] * c, x[1] * (-c)])


PARAMS = np.random.default_rng(5).uniform(-1, 1, (200, 2))


def test_calibration_examples():
    omega, delta, _ = euclidean_fields()
    flat = SurfacePatch(lambda x: [x[0], x[1], x[0] * 0.0, x[0] * 0.0])
    assert calibration_residual(flat, PARAMS, omega, delta) == 0
    holo = _graph_patch(lambda z: z * z * 1e-3)
    assert calibration_residual(holo, PARAMS, omega, delta) <= 1e-12
    c = 1e-3
    anti = _conj_graph_patch(c)
    res = calibration_residual(anti, PARAMS, omega, delta)
    # flux 1 - c^2 against area 1 + c^2
    assert res == pytest.approx(2 * c * c, rel=1e-6)


def test_tangent_invariance_examples():
    _, _, j0 = euclidean_fields()
    ok, res = j_preserves_tangent(_graph_patch(lambda z: z * z * 1e-3), PARAMS, j0)
    assert ok and res < 1e-15
    real_plane = SurfacePatch(lambda x: [x[0], x[0] * 0.0, x[1], x[0] * 0.0])
    ok, res = j_preserves_tangent(real_plane, PARAMS, j0)
    assert not ok and res == pytest.approx(1.0)


def test_deviation_controls_structure():
    rng = np.random.default_rng(7)
    for t in (1e-4, 1e-3, 1e-2):
        for _ in range(10):
            A = random_near_j0(rng, t)
            W = -A
            assert np.max(np.abs(A - J0)) <= 2 * np.max(np.abs(W - OMEGA0))


def test_metric_jets_match_finite_differences():
    w = from_functions(2, {
        (0, 1): lambda x: 1 + 0.1 * jets.sin(x[0] + 0.3 * x[2]),
        (0, 2): lambda x: 0.05 * x[1] * x[3],
        (2, 3): lambda x: 1 + 0.05 * x[0] * x[0],
    })
    p = np.array([[0.3, -0.2, 0.1, 0.4]])
    S, _, _ = metric_jets(w, p, 1)
    h = 1e-5
    for i in range(4):
        e = np.eye(4)[i] * h
        gp = acs_from_omega(w.matrix(p + e)).g
        gm = acs_from_omega(w.matrix(p - e)).g
        fd = (gp - gm) / (2 * h)
        assert np.allclose(S[1 + i], fd, atol=1e-9)
    assert np.allclose(S[0], acs_from_omega(w.matrix(p)).g, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-6, 0.3))
def test_polar_identities_property(seed, size):
    rng = np.random.default_rng(seed)
    f = polar_acs(random_near_j0(rng, size))
    assert max(f.identity_residuals(seed=seed).values()) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-6, 0.3))
def test_comass_maximality_property(seed, size):
    rng = np.random.default_rng(seed)
    f = polar_acs(random_near_j0(rng, size))
    res = wirtinger_comass(f.omega, f.g, f.J, n_samples=2000, seed=seed)
    assert res.candidate == pytest.approx(1.0, abs=1e-12)
    assert res.sampled <= res.candidate + 1e-9


def test_collar_comass(default_collar):
    rng = np.random.default_rng(3)
    th = rng.uniform(0, 2 * math.pi, 10)
    r = rng.uniform(3, 7, 10)
    x = np.stack([r * np.cos(th), r * np.sin(th), np.full(10, 5e-5), np.zeros(10)], -1)
    f = default_collar.acs(default_collar.chart.Y(x))
    for b in range(10):
        res = wirtinger_comass(f.omega[b], f.g[b], f.J[b], n_samples=2000, seed=b)
        assert res.value <= 1 + 1e-9
