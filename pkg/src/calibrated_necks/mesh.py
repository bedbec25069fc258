"""Triangulation of the assembled surface and its Euler characteristic.

The seed disk is meshed in polar coordinates around the origin.  For every
necked zero the star of its vertex is removed and the hole is filled by
graded rings in the offset ``dz``, the collar annulus and, for each neck,
the inner annulus shared by the two collars.  Each piece is triangulated in
its own holomorphic parameter, so orientations agree across pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assemble import AssemblyError, SurfaceAtlas, _series_eval, to_real
from .slitplane import DomainCurve, Variant, seed_map


class MeshError(AssemblyError):
    """Non-manifold or inconsistently oriented triangulation."""


@dataclass
class MeshSurface:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.vertices), len(edge_table(self.triangles)), len(self.triangles)

    @property
    def euler(self) -> int:
        V, E, F = self.counts
        return V - E + F

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.writelines("v " + " ".join(f"{x:.16e}" for x in v) + "\n" for v in self.vertices)
            fh.writelines("f {} {} {}\n".format(*(int(i) + 1 for i in t)) for t in self.triangles)

    def chi_text(self) -> str:
        V, E, F = self.counts
        return f"V {V}\nE {E}\nF {F}\nchi {V - E + F}\n"


def edge_table(triangles: np.ndarray) -> dict[tuple[int, int], list[int]]:
    """Undirected edge -> list of triangle indices."""
    table: dict[tuple[int, int], list[int]] = {}
    for f, (a, b, c) in enumerate(triangles):
        for i, j in ((a, b), (b, c), (c, a)):
            table.setdefault((min(i, j), max(i, j)), []).append(f)
    return table


def check_manifold(triangles: np.ndarray, n_vertices: int) -> np.ndarray:
    """Raise on non-manifold edges, flipped neighbours or pinched vertices; return boundary markers."""
    directed: dict[tuple[int, int], int] = {}
    for f, (a, b, c) in enumerate(triangles):
        if len({a, b, c}) < 3:
            raise MeshError(f"degenerate triangle {f}")
        for i, j in ((a, b), (b, c), (c, a)):
            if (i, j) in directed:
                raise MeshError(f"edge {i}-{j} used twice with the same orientation")
            directed[(i, j)] = f
    boundary = np.zeros(n_vertices, dtype=bool)
    for (i, j), faces in edge_table(triangles).items():
        if len(faces) > 2:
            raise MeshError(f"non-manifold edge {i}-{j}")
        if len(faces) == 1:
            boundary[i] = boundary[j] = True
    # each vertex link must be a single path or cycle
    links: dict[int, list[tuple[int, int]]] = {}
    for a, b, c in triangles:
        for v, p, q in ((a, b, c), (b, c, a), (c, a, b)):
            links.setdefault(int(v), []).append((int(p), int(q)))
    for v, edges in links.items():
        nxt = dict(edges)
        starts = set(nxt) - set(nxt.values())
        if len(starts) > 1:
            raise MeshError(f"pinched vertex {v}")
        start = next(iter(starts)) if starts else edges[0][0]
        seen, cur = 0, start
        while cur in nxt and seen <= len(edges):
            cur = nxt[cur]
            seen += 1
            if cur == start:
                break
        if seen != len(edges):
            raise MeshError(f"vertex {v} has a disconnected link")
    unused = set(range(n_vertices)) - set(links)
    if unused:
        raise MeshError(f"{len(unused)} unused vertices")
    return boundary


class _Builder:
    def __init__(self):
        self.points: list[np.ndarray] = []
        self.tris: list[tuple[int, int, int]] = []

    def add(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        start = sum(len(p) for p in self.points)
        self.points.append(pts)
        return np.arange(start, start + len(pts))

    def tri(self, idx, planar) -> None:
        """Add a triangle, oriented positively in the given complex parameter."""
        a, b, c = idx
        pa, pb, pc = planar
        area = ((pb - pa).conjugate() * (pc - pa)).imag
        if area == 0:
            raise MeshError("degenerate triangle in parameter space")
        self.tris.append((a, b, c) if area > 0 else (a, c, b))

    def strip(self, outer: np.ndarray, inner: np.ndarray, p_outer: np.ndarray, p_inner: np.ndarray) -> None:
        """Triangles between two closed loops with equal vertex counts."""
        n = len(outer)
        for m in range(n):
            k = (m + 1) % n
            self.tri((outer[m], outer[k], inner[k]), (p_outer[m], p_outer[k], p_inner[k]))
            self.tri((outer[m], inner[k], inner[m]), (p_outer[m], p_inner[k], p_inner[m]))

    def zipper(self, outer: np.ndarray, inner: np.ndarray, p_outer: np.ndarray, p_inner: np.ndarray) -> None:
        """Triangles between two counterclockwise loops around the planar origin, merged by angle."""
        no, ni = len(outer), len(inner)
        ao = np.angle(p_outer)
        base = ao[0]
        ao = base + (ao - base) % (2 * math.pi)
        if np.any(np.diff(ao) <= 0):
            raise MeshError("outer loop is not counterclockwise")
        ai_raw = base + (np.angle(p_inner) - base) % (2 * math.pi)
        j0 = int(np.argmin(ai_raw))
        order = (j0 + np.arange(ni)) % ni
        ai = ai_raw[order]
        if np.any(np.diff(ai) <= 0):
            raise MeshError("inner loop is not counterclockwise")
        ao = np.append(ao, base + 2 * math.pi)
        ai = np.append(ai, ai[0] + 2 * math.pi)
        i = j = 0
        while i < no or j < ni:
            o0, o1 = i % no, (i + 1) % no
            n0, n1 = order[j % ni], order[(j + 1) % ni]
            if j == ni or (i < no and ao[i + 1] <= ai[j + 1]):
                self.tri((outer[o0], outer[o1], inner[n0]), (p_outer[o0], p_outer[o1], p_inner[n0]))
                i += 1
            else:
                self.tri((outer[o0], inner[n1], inner[n0]), (p_outer[o0], p_inner[n1], p_inner[n0]))
                j += 1

    def mesh(self, discarded: int = 0) -> MeshSurface:
        """Drop the ``discarded`` vertices no triangle uses, then check the result."""
        verts = np.concatenate(self.points, axis=0)
        tris = np.array(self.tris, dtype=np.int64)
        used = np.zeros(len(verts), dtype=bool)
        used[tris.ravel()] = True
        if len(verts) - used.sum() != discarded:
            raise MeshError(f"{len(verts) - used.sum()} unused vertices, expected {discarded}")
        new_index = np.cumsum(used) - 1
        verts, tris = verts[used], new_index[tris]
        boundary = check_manifold(tris, len(verts))
        return MeshSurface(verts, tris, boundary)


def arc_limit(curve: DomainCurve, rho: np.ndarray, iters: int = 80) -> np.ndarray:
    """Largest ``theta`` with ``rho e^{i theta}`` in the closed disk ``D`` (``D`` meets each circle in one arc)."""
    lo = np.zeros_like(rho)
    hi = np.full_like(rho, math.pi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = curve.F(rho * np.exp(1j * mid)) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def mesh_and_euler(atlas: SurfaceAtlas, resolution: int = 2) -> MeshSurface:
    """Triangulate the assembled surface (quadratic variant) and check it is a manifold."""
    if atlas.cfg.variant is not Variant.QUADRATIC and atlas.specs:
        raise AssemblyError("mesh export covers the quadratic variant only")
    res = max(1, int(resolution))
    cfg, curve = atlas.cfg, atlas.curve
    b = _Builder()

    # seed rows: log rho stepped by pi / (2 res), hitting every n pi exactly
    necked = {(br.zero.n, br.zero.k): (spec, i) for spec in atlas.specs for i, br in enumerate(spec.point.branches)}
    n_low = min([n for n, _ in necked] + [-1])
    step = math.pi / (2 * res)
    log_min = (n_low - 0.5) * math.pi
    log_cap = math.log(0.95)
    n_rows = math.floor((log_cap - log_min) / step) + 1
    logs = log_min + step * np.arange(n_rows)
    if log_cap - logs[-1] > 0.1 * step:
        logs = np.append(logs, log_cap)
        n_rows += 1
    rho = np.exp(logs)
    theta_max = arc_limit(curve, rho) * (1 - 1e-9)
    n_cols = 8 * res
    t = np.linspace(0.0, 1.0, n_cols + 1)
    extra = []
    for spec, i in necked.values():
        z = spec.point.branches[i].zero.z
        row = round((math.log(abs(z)) - log_min) / step)
        extra.append(0.5 * (math.atan2(z.imag, z.real) / theta_max[row] + 1.0))
    t = np.unique(np.concatenate([t, extra]))
    T, R = np.meshgrid(t, rho, indexing="xy")
    TH = (2 * T - 1) * theta_max[:, None]
    Z = R * np.exp(1j * TH)
    snapped = {}
    for key, (spec, i) in necked.items():
        z = spec.point.branches[i].zero.z
        r_i, c_i = np.unravel_index(np.argmin(np.abs(Z - z)), Z.shape)
        if not (0 < r_i < n_rows - 1 and 0 < c_i < len(t) - 1):
            raise MeshError("necked zero too close to the mesh boundary")
        Z[r_i, c_i] = z
        snapped[(int(r_i), int(c_i))] = (spec, i)
    ids = b.add(seed_map(Z.ravel(), cfg)).reshape(Z.shape)
    apex = b.add(seed_map(np.array([2 * curve.r + 0j]), cfg))[0]

    removed = set(snapped)
    link_edges: dict[tuple[int, int], list] = {key: [] for key in snapped}

    def star_owner(cells):
        for cell in cells:
            if cell in removed:
                return cell
        return None

    for r_ in range(n_rows - 1):
        for c_ in range(len(t) - 1):
            quads = [((r_, c_), (r_ + 1, c_), (r_ + 1, c_ + 1)), ((r_, c_), (r_ + 1, c_ + 1), (r_, c_ + 1))]
            for cells in quads:
                owner = star_owner(cells)
                if owner is None:
                    b.tri(tuple(ids[c] for c in cells), tuple(logs[c[0]] + 1j * t[c[1]] for c in cells))
                else:
                    link_edges[owner].append([c for c in cells if c != owner])
    for c_ in range(len(t) - 1):
        top = n_rows - 1
        apex_param = logs[top] + step + 0.5j
        b.tri((ids[top, c_], ids[top, c_ + 1], apex), (logs[top] + 1j * t[c_], logs[top] + 1j * t[c_ + 1], apex_param))

    n_theta = 8 * res
    phi = 2 * math.pi * np.arange(n_theta) / n_theta
    collar_inner: dict[tuple[int, int], np.ndarray] = {}
    for key, (spec, i) in snapped.items():
        br = spec.point.branches[i]
        zc = br.zero.z
        # the zipper runs in the grid parameter logs + i t, where the star is a hexagon
        def grid_param(z):
            th_lim = arc_limit(curve, np.abs(z)) * (1 - 1e-9)
            return np.log(np.abs(z)) + 0.5j * (np.angle(z) / th_lim + 1.0)

        centre = grid_param(np.array([zc]))[0]
        cells = sorted({c for e in link_edges[key] for c in e}, key=lambda c: math.atan2(t[c[1]] - centre.imag, logs[c[0]] - centre.real))
        if len(cells) != 6:
            raise MeshError("unexpected star at a necked zero")
        link = np.array([ids[c] for c in cells])
        p_link = np.array([logs[c[0]] + 1j * t[c[1]] for c in cells]) - centre
        z_link = np.array([Z[c] - zc for c in cells])
        # graded rings in dz down to the image of |u~| = 10
        L = spec.L
        u_hole = 10.0 * L * np.exp(1j * phi)
        dz_hole = _series_eval(br.dz_series, u_hole)
        r_top = 0.05 * float(np.min(np.abs(z_link)))
        r_bot = float(np.max(np.abs(dz_hole)))
        n_rings = max(2, math.ceil(math.log(r_top / r_bot) / step))
        radii = np.geomspace(r_top, r_bot, n_rings + 1)[:-1]
        rings = [radii[m] * np.exp(1j * phi) for m in range(len(radii))] + [dz_hole]
        ring_ids = [b.add(spec.point.position + to_real(br.local_seed(dz))) for dz in rings]
        b.zipper(link, ring_ids[0], p_link, grid_param(zc + rings[0]) - centre)
        for m in range(len(rings) - 1):
            b.strip(ring_ids[m], ring_ids[m + 1], rings[m], rings[m + 1])
        # collar rings 10 >= |u~| >= 1
        collar = atlas.collar(spec.index, i)
        radii_c = np.geomspace(10.0, 1.0, 2 * res + 1)
        prev_ids, prev_p = ring_ids[-1], 10.0 * np.exp(1j * phi)
        for rr in radii_c[1:]:
            u = rr * np.exp(1j * phi)
            planar = np.stack([u.real, u.imag], -1)
            z1, z2 = collar.surface.zeta_jets(planar, 0)
            x = np.concatenate([planar, np.stack([z1.value.real, z2.value.real], -1)], -1)
            cur = b.add(spec.point.position + spec.L * x @ br.real_frame)
            b.strip(prev_ids, cur, prev_p, u)
            prev_ids, prev_p = cur, u
        collar_inner[(spec.index, i)] = prev_ids

    for neck in atlas.inner_necks:
        spec = neck.spec
        lam = np.linspace(0.0, 1.0, 4 * res + 1)
        first = collar_inner[(spec.index, 0)]
        last = collar_inner[(spec.index, 1)][(-np.arange(n_theta)) % n_theta]
        rows = [first]
        for l_ in lam[1:-1]:
            pts, _, _ = neck.frames(np.stack([phi, np.full_like(phi, l_)], -1))
            rows.append(b.add(spec.point.position + spec.L * pts))
        rows.append(last)
        for m in range(len(lam) - 1):
            p0 = phi + 1j * lam[m]
            p1 = phi + 1j * lam[m + 1]
            for j in range(n_theta):
                k = (j + 1) % n_theta
                q0, q1 = p0[j], p0[j] + (2 * math.pi / n_theta)
                r0, r1 = p1[j], p1[j] + (2 * math.pi / n_theta)
                b.tri((rows[m][j], rows[m][k], rows[m + 1][k]), (q0, q1, r1))
                b.tri((rows[m][j], rows[m + 1][k], rows[m + 1][j]), (q0, r1, r0))

    return b.mesh(discarded=len(snapped))
