import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibrated_necks.slitplane import (
    DomainCurve,
    SlitConfig,
    Variant,
    cauchy_riemann_residual,
    curve_gamma,
    f_factor,
    g_product,
    in_disk,
    log_slit,
    pow_neg_alpha,
    property_a_margin,
    seed_map,
    zero_candidates,
    zero_set_residual,
    zeros_in_disk,
)

HALF = SlitConfig(0.5)
QUARTER = SlitConfig(0.25)


def test_phase_offsets():
    assert [QUARTER.phase(k) for k in range(4)] == pytest.approx([0.5, 1 / 6, -1 / 6, -0.5])
    br = SlitConfig(0.25, Variant.BRANCHED)
    assert [br.phase(k) for k in range(8)] == pytest.approx([(7 - 2 * k) / 14 for k in range(8)])
    assert (br.n_factors, br.power) == (8, 7)


def test_alpha_range():
    for bad in (0.0, 1.0, -0.3):
        with pytest.raises(ValueError):
            SlitConfig(bad)


def test_log_slit_values():
    assert log_slit(math.e) == pytest.approx(1.0)
    assert log_slit(1j) == pytest.approx(1j * math.pi / 2)
    z = math.exp(math.pi) * np.exp(1j * math.pi / 6)
    assert log_slit(z) == pytest.approx(math.pi + 1j * math.pi / 6)
    assert np.angle(1j) == pytest.approx(log_slit(1j).imag)


@pytest.mark.parametrize("z", [0.0, -1.0, -2.5])
def test_log_slit_rejects_cut(z):
    with pytest.raises(ValueError):
        log_slit(z)


def test_pow_neg_alpha_values():
    assert pow_neg_alpha(1.0, HALF) == pytest.approx(1.0)
    assert pow_neg_alpha(math.exp(2 * math.pi), HALF) == pytest.approx(math.exp(-math.pi))
    assert pow_neg_alpha(1j, HALF) == pytest.approx(np.exp(-1j * math.pi / 4))


def test_f_factor_values():
    for n in (-2, -1, 0, 1):
        for k in range(4):
            z = np.exp(n * math.pi + 1j * (2 * k - 3) * math.pi / 6)
            assert abs(f_factor(z, k, HALF)) < 1e-12
    expected = math.exp(-1) * 1j * math.sinh(math.pi / 2)
    assert f_factor(1.0, 0, HALF) == pytest.approx(expected)
    assert f_factor(0.0, 0, HALF) == 0


def test_f_factor_flat_on_wedge():
    t = 10.0 ** -np.arange(1, 5)
    z = t * np.exp(0.49j * math.pi)
    vals = np.abs(f_factor(z, 0, HALF))
    # the decay beats every power only asymptotically: the ratio to t^m collapses on the last decade
    for m in range(1, 11):
        ratio = vals / t ** m
        assert ratio[-1] < 1e-9 * ratio[-2]


def test_g_product_at_one():
    expected = np.prod([math.exp(-1) * np.sin(HALF.phase(k) * math.pi * 1j) for k in range(4)])
    assert g_product(1.0, HALF) == pytest.approx(expected)
    assert abs(expected) > 0


def test_g_holomorphic():
    rng = np.random.default_rng(3)
    r = np.exp(rng.uniform(math.log(0.01), 0.0, 20))
    z = r * np.exp(1j * rng.uniform(0.05, math.pi - 0.05, 20))
    res = cauchy_riemann_residual(lambda w: g_product(w, HALF), z, h=1e-5 * np.abs(z))
    assert np.max(res) < 1e-8


@pytest.mark.parametrize("cfg", [HALF, QUARTER, SlitConfig(0.25, Variant.BRANCHED)])
def test_zero_set_residual(cfg):
    assert zero_set_residual(cfg, 1e-6) <= 1e-12


def test_zero_candidate_first_point():
    cands = zero_candidates(HALF, 1.0, n_max=0)
    assert any(abs(c.z - (-1j)) < 1e-15 and c.k == 0 for c in cands)


def test_curve_invariants():
    curve = DomainCurve()
    assert curve.F(0) == 0.0
    assert not in_disk(0.0, curve)
    dFx, dFy = curve.grad_F(0.0)
    assert dFy == 0 and dFx != 0
    t0 = curve.gamma_prime(0.0)
    assert abs(t0.real) < 1e-15 and abs(t0.imag) > 0
    assert curve_gamma(0.0, curve) == 0 and abs(curve_gamma(2 * math.pi, curve)) < 1e-15
    assert curve.wedge_violation() <= 0
    with pytest.raises(ValueError):
        DomainCurve(0.5, 0.9)


def test_disk_membership_examples():
    curve = DomainCurve()
    assert in_disk(1j * math.exp(-math.pi), curve)
    z = math.exp(-math.pi) * np.exp(1j * math.pi / 6)
    assert curve.F(z) == pytest.approx(0.2136 - 0.25, abs=1e-4)
    assert in_disk(z, curve)
    assert curve.imaginary_axis_threshold == pytest.approx(0.5)


def test_zero_count_at_two_pi():
    curve = DomainCurve()
    z_min = math.exp(-2 * math.pi) * (1 - 1e-12)
    zs = zeros_in_disk(HALF, curve, z_min)
    brute = [c for c in zero_candidates(HALF, z_min) if curve.F(c.z) < 0]
    assert len(zs) == len(brute) == 8
    assert sorted({c.n for c in zs}) == [-2, -1]
    mods = [abs(c.z) for c in zs]
    assert mods == sorted(mods, reverse=True)


def test_property_a():
    assert property_a_margin(HALF, DomainCurve(), 1e-6) > 0


def test_seed_map_basic():
    assert np.all(seed_map(0.0, HALF) == 0)
    for c in zeros_in_disk(QUARTER, DomainCurve(), 1e-3):
        q = seed_map(c.z, QUARTER)
        assert abs(q[2]) < 1e-12 and abs(q[3]) < 1e-12


def test_seed_map_injective_sample():
    curve = DomainCurve()
    rng = np.random.default_rng(0)
    z = curve.disk_point(rng.uniform(-0.99, 0.99, 1000), rng.uniform(0.01, 0.99, 1000))
    q = seed_map(z, QUARTER)
    d = np.linalg.norm(q[:, None, :] - q[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    assert np.min(d) > 0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.01, math.pi - 0.01))
def test_log_reflection(r, theta):
    z = r * np.exp(1j * theta)
    assert log_slit(np.conj(z)) == pytest.approx(np.conj(log_slit(z)), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e-4), st.floats(-0.75, 0.75))
def test_f_factor_small_gradient_on_wedge(r, theta_frac):
    # at alpha = 1/2 the gradient bound holds inside radius 1e-4 (it is about 2 at radius 1e-3)
    z = r * np.exp(1j * theta_frac * math.pi)
    h = 1e-3 * r
    grad = abs(f_factor(z + h, 0, HALF) - f_factor(z - h, 0, HALF)) / (2 * h)
    assert grad <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-0.95, 0.95))
def test_disk_point_inside(u, s):
    curve = DomainCurve()
    assert in_disk(curve.disk_point(s, u), curve)
