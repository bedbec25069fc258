import math
from itertools import pairwise

import numpy as np
import pytest

from calibrated_necks import assemble as asm
from calibrated_necks.kahler import DELTA, J0, OMEGA0
from calibrated_necks.mesh import MeshError, check_manifold, mesh_and_euler
from calibrated_necks.slitplane import (
    DomainCurve,
    SlitConfig,
    Variant,
    ZeroPoint,
    zeros_in_disk,
)
from calibrated_necks.verify import Construction, RunConfig

QUARTER = SlitConfig(0.25)
CURVE = DomainCurve()
Z_MIN = RunConfig().z_min


def _axis_branch(tangent, normal, line):
    """Branch stub along a coordinate axis; only the frame and labels are used."""
    empty = np.zeros(3, dtype=complex)
    return asm.Branch(ZeroPoint(0j, 0, 0), np.zeros((3, 2), complex), np.array(tangent, complex),
                      np.array(normal, complex), line, empty, empty, empty)


@pytest.fixture(scope="module")
def points():
    return asm.singular_points(QUARTER, CURVE, Z_MIN)


def test_singular_points_distinct_lines(points):
    assert len(points) >= 3
    for p in points:
        assert len(p.branches) == 2
        assert p.min_line_angle() >= 1e-3
        for b in p.branches:
            assert np.allclose(b.local_seed(np.array([0.0]))[0], 0)
    mods = [p.modulus for p in points]
    assert mods == sorted(mods, reverse=True)


def test_cluster_count_matches_brute_force(points):
    zs = zeros_in_disk(QUARTER, CURVE, Z_MIN)
    images = np.array([z.z ** QUARTER.power for z in zs])
    close = np.abs(images[:, None] - images[None, :]) <= 1e-9 * np.abs(images[None, :])
    pairs = (close.sum() - len(zs)) // 2
    assert pairs == len(points)


def test_schedule_disjoint_and_decreasing(default_construction):
    specs = default_construction.specs
    assert len(specs) == 3
    rs = [s.r for s in specs]
    assert all(b < a for a, b in pairwise(rs))
    for i, a in enumerate(specs):
        for b in specs[i + 1:]:
            assert np.linalg.norm(a.point.position - b.point.position) > 100 * (a.r + b.r)
        assert a.eta <= 1e-2 * a.r * a.r


def test_schedule_errors(points):
    with pytest.raises(asm.AssemblyError):
        asm.schedule([], QUARTER, CURVE)
    with pytest.raises(asm.AssemblyError):
        asm.schedule(points, QUARTER, CURVE, K=len(points) + 1)
    with pytest.raises(ValueError):
        asm.schedule(points, QUARTER, CURVE, epsilon=0.0)


def test_neck_over_coordinate_lines():
    # z w = eta with L = 1: the sheet over the z-axis is w = eta / z
    on_z = _axis_branch([1, 0], [0, 1], (0j, 1 + 0j))
    on_w = _axis_branch([0, 1], [-1, 0], (1 + 0j, 0j))
    model = asm.NeckModel(((0j, 1 + 0j), (1 + 0j, 0j)), Variant.QUADRATIC, 1e-4, 1.0)
    rng = np.random.default_rng(0)
    u = np.exp(rng.uniform(math.log(1e-2), 0.0, 200)) * np.exp(1j * rng.uniform(0, 2 * math.pi, 200))
    v = model.sheet_values(on_z, u)
    assert np.allclose(v, 1e-4 / u, rtol=1e-12, atol=0)
    assert np.max(np.abs(v)) <= 1e-2 * (1 + 1e-12)
    # over the w-axis the normal is -z, so the sheet is v = -eta / u
    assert np.allclose(model.sheet_values(on_w, u), -1e-4 / u, rtol=1e-12, atol=0)
    flat = asm.NeckModel(model.lines, Variant.QUADRATIC, 0.0, 1.0)
    assert np.all(flat.sheet_values(on_z, u) == 0)


def test_neck_sheets_solve_and_are_holomorphic(default_construction):
    spec = default_construction.specs[0]
    th = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    u = 3.0 * np.exp(1j * th)
    for b, sheet in zip(spec.point.branches, spec.neck_graphs()):
        v = spec.model.sheet_values(b, u)
        assert np.max(np.abs(spec.model.residual(b, u, v))) <= 1e-12 * spec.model.eta_scaled
        h = 1e-4
        dx = (sheet(u + h) - sheet(u - h)) / (2 * h)
        dy = (sheet(u + 1j * h) - sheet(u - 1j * h)) / (2 * h)
        assert np.max(np.abs(dx + 1j * dy)) <= 1e-6 * np.max(np.abs(dx)) + 1e-20


def test_graphicality(default_construction):
    for spec in default_construction.specs:
        rep = asm.graphicality(spec, default_construction.config.N)
        assert rep.passed and rep.single_valued and rep.separation >= 1e-3


def test_global_metric_outside_and_interface(default_construction):
    atlas = default_construction.atlas
    far = np.array([[0.5, 0.1, 0.0, 0.0], [-0.3, 0.2, 0.01, 0.0]])
    g, J, W = asm.global_metric(atlas, far)
    assert np.all(g == DELTA) and np.all(J == J0) and np.all(W == OMEGA0)
    assert asm.interface_residual(atlas, 300) <= 1e-9
    assert atlas.overlap_residual() <= 1e-9


def _flat_disk_patch(radius=1.0):
    def frames(p):
        rho, th = p[:, 0], p[:, 1]
        c, s = np.cos(th), np.sin(th)
        z = np.zeros_like(rho)
        pts = np.stack([rho * c, rho * s, z, z], -1)
        return pts, np.stack([c, s, z, z], -1), np.stack([-rho * s, rho * c, z, z], -1)

    return asm.Patch("disk", "seed", ((0.0, radius), (0.0, 2 * math.pi)), frames, asm._euclidean_structure)


def test_flat_disk_area_and_flux():
    res = asm.integrate_patch(_flat_disk_patch())
    assert res.area == pytest.approx(math.pi, rel=1e-12)
    assert res.flux == pytest.approx(math.pi, rel=1e-12)


def test_collar_area_equals_flux(default_construction):
    atlas = default_construction.atlas
    res = asm.integrate_patch(asm.collar_patch(atlas.collars[0]))
    assert abs(res.area - res.flux) <= 1e-6 * res.area
    assert asm.patch_calibration(asm.collar_patch(atlas.collars[0])) <= 1e-6


def test_seed_graph_rescaling(points):
    b = points[0].branches[0]
    L = 1e-3
    f = b.seed_graph(L)
    u = np.array([0.5 + 0.2j])
    direct = asm._series_eval(b.graph_series, u * L) / L
    assert np.allclose(f(u), direct, rtol=1e-12)


@pytest.mark.parametrize("K", [0, 1, 2, 3])
def test_mesh_euler(K):
    atlas = Construction(RunConfig(K=K).validate()).atlas
    mesh = mesh_and_euler(atlas)
    assert mesh.euler == 1 - 2 * K
    check_manifold(mesh.triangles, len(mesh.vertices))


def test_check_manifold_rejects_bad_meshes():
    with pytest.raises(MeshError):
        check_manifold(np.array([[0, 1, 2], [0, 1, 3]]), 4)
    with pytest.raises(MeshError):
        check_manifold(np.array([[0, 1, 2], [1, 2, 3], [1, 2, 4]]), 5)
    assert check_manifold(np.array([[0, 1, 2], [2, 1, 3]]), 4).all()


def test_branched_variant_is_refused(points):
    cfg = SlitConfig(0.25, Variant.BRANCHED)
    spec = asm.NeckSpec(1, points[0], Variant.BRANCHED, 1e-3, 1e-10, 2, 0.1, 1.0, 1e-6)
    with pytest.raises(asm.AssemblyError):
        asm.InnerNeck(spec)
    atlas = asm.SurfaceAtlas(cfg, CURVE, [spec], 2)
    with pytest.raises(asm.AssemblyError):
        mesh_and_euler(atlas)

