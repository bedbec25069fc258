import math

import numpy as np
import pytest

from calibrated_necks.chart import ChartPair
from calibrated_necks.glue import (
    Cutoff,
    GlueError,
    GlueInput,
    GridSpec,
    HoloFunction,
    annulus_grid,
    build_beta,
    default_collar_input,
    glue,
    holo_cn_norm,
    transition_zeta,
)
from calibrated_necks.kahler import OMEGA0

SMALL_GRID = GridSpec(n_radius=4, n_theta=8, n_normal=2, n_directions=2)


def _input(f, h, **kw):
    kw.setdefault("enforce_regime", False)
    return GlueInput(f=f, h=h, **kw)


def _zeta_values(inp, planar):
    return transition_zeta(inp).values(planar)


def _as_pairs(values):
    return np.stack([values.real, values.imag], -1)


def test_zeta_equal_inputs():
    f = HoloFunction.laurent({-1: 1e-3, 1: 2e-4})
    pts = annulus_grid()
    got = _zeta_values(_input(f, f), pts)
    z = pts[:, 0] + 1j * pts[:, 1]
    assert np.allclose(got, _as_pairs(f(z)), atol=1e-18)


def test_zeta_zero_inputs():
    zero = HoloFunction.zero()
    assert np.all(_zeta_values(_input(zero, zero), annulus_grid()) == 0)


def test_zeta_interpolates():
    f = HoloFunction.laurent({-1: 1e-3})
    h = HoloFunction.laurent({-1: 1e-3, 0: 1e-4})
    pts = annulus_grid()
    z = pts[:, 0] + 1j * pts[:, 1]
    got = _zeta_values(_input(f, h), pts)
    assert np.max(np.abs(got - _as_pairs(f(z)))) <= 1e-4 + 1e-18
    assert np.max(np.abs(got - _as_pairs(h(z)))) <= 1e-4 + 1e-18
    r = np.abs(z)
    assert np.allclose(got[r <= 4], _as_pairs(f(z[r <= 4])), atol=1e-18)
    assert np.allclose(got[r >= 5], _as_pairs(h(z[r >= 5])), atol=1e-18)


def test_beta_flat_and_linear():
    zero = HoloFunction.zero()
    chart = ChartPair(transition_zeta(_input(zero, zero)))
    pts = np.array([[1.0, 2.0, 0.1, -0.2], [5.0, 0.0, 0.0, 0.3]])
    assert np.allclose(build_beta(chart).matrix(pts), OMEGA0)
    eps = 1e-3
    lin = HoloFunction.laurent({1: eps})
    chart = ChartPair(transition_zeta(_input(lin, lin)))
    a = build_beta(chart).values(np.array([[2.0, 1.0, 0.0, 0.0], [1.5, -1.0, 0.1, 0.0]]))[:, 0]
    assert np.allclose(a, 1 + eps**2, atol=1e-15)


def test_beta_annihilates_mixed_pairs(default_collar):
    st = default_collar
    th = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    planar = np.stack([4.5 * np.cos(th), 4.5 * np.sin(th)], -1)
    surf = st.surface_points(planar)
    W = st.chart.to_euclidean(st.beta).matrix(surf)
    t1, t2 = st.tangent_frames(planar)
    from calibrated_necks.chart import normal_frame

    xi, tau = normal_frame(st.chart.surface, planar)
    worst = max(np.max(np.abs(np.einsum("bi,bij,bj->b", v, W, w))) for v in (t1, t2) for w in (xi, tau))
    assert worst <= 1e-9


def test_trivial_inputs_give_omega0():
    zero = HoloFunction.zero()
    st = glue(_input(zero, zero), validate=True)
    pts = np.random.default_rng(0).uniform(-6, 6, (20, 4)) * np.array([1, 1, 1e-4, 1e-4])
    assert np.allclose(st.omega_matrix(pts), OMEGA0, atol=1e-15)


def test_cutoff_regions():
    cut = Cutoff(1e-2)
    rng = np.random.default_rng(1)
    R = rng.uniform(0, 8, 4000)
    s = rng.uniform(0, 0.05, 4000)
    th, ph = rng.uniform(0, 2 * math.pi, (2, 4000))
    pts = np.stack([R * np.cos(th), R * np.sin(th), s * np.cos(ph), s * np.sin(ph)], -1)
    v = cut.values(pts)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[cut.in_zero_region(pts)] == 0)
    assert np.all(v[cut.in_one_region(pts)] == 1)


def test_regime_and_budget_checks():
    f = HoloFunction.laurent({-1: 1e-3})
    h = HoloFunction.laurent({-1: 1e-3 * (1 + 1e-2)})
    # c = 1e-3 exceeds the default norm budget eps = 1e-6
    with pytest.raises(GlueError):
        GlueInput(f=f, h=h).validate()
    with pytest.raises(GlueError):
        GlueInput(f=HoloFunction.zero(), h=HoloFunction.zero(), sigma=1e-2).validate()
    bad = HoloFunction(lambda z: np.conj(z) * 1e-9 if not hasattr(z, "coeffs") else z * 1e-9, "conj")
    with pytest.raises(GlueError):
        GlueInput(f=bad, h=HoloFunction.zero()).validate()


def test_default_collar_input_budget():
    inp = default_collar_input().validate()
    assert inp.measured_eps <= inp.eps
    assert holo_cn_norm(inp.f, 4) < inp.eps


def test_default_collar_properties(default_collar_report):
    rep = default_collar_report
    for name, res in rep.results.items():
        assert res.passed, (name, res.value, res.tol)


def test_smallness_scaling():
    base = default_collar_input()
    full = glue(base)
    half = glue(GlueInput(f=base.f.scaled(0.5), h=base.h.scaled(0.5)))
    grid = full.chart.Y(full.collar_grid(SMALL_GRID))
    a, _ = full.deviation_cn(grid)
    b, _ = half.deviation_cn(grid)
    assert b <= 0.5 * a * 1.2
    assert b >= 0.5 * a * 0.8
