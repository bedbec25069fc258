"""Global construction: necks at the self-intersections of the seed surface.

The seed surface is ``G(D)`` with ``G(z) = (z^m, g(z))``.  Each singular
image ``p`` is met by two (quadratic variant) or four (branched variant)
branches of ``G``.  Near ``p`` we replace the surface by the holomorphic curve
``Lambda = {prod_j l_j(q) = eta Q(q)}`` (``Q = 1`` or ``z^3 - w^2``) and glue the
two across collars using :mod:`glue`, one collar per branch.

Numerics near ``p`` never use absolute coordinates.  Each branch is described
by exact Taylor series in the parameter offset ``dz``; the neck sheets are
solved in rescaled coordinates ``q / L`` with ``L = 10 r``.  This keeps the
construction exact at the tiny scales where the necks live.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import jets
from .glue import (
    GluedStructure,
    GlueInput,
    GridSpec,
    HoloFunction,
    glue,
    holo_cn_norm,
    transition_zeta,
)
from .jets import Jet, jet_space
from .kahler import (
    DELTA,
    J0,
    OMEGA0,
    ACSField,
    area_density,
    calibration_defect,
    flux_density,
    tangent_invariance_defect,
)
from .slitplane import (
    DomainCurve,
    SlitConfig,
    Variant,
    ZeroPoint,
    g_jet,
    seed_map,
    zeros_in_disk,
)

SEED_ORDER = 14
CLUSTER_TOL = 1e-9
MIN_LINE_ANGLE = 1e-6
RADIUS_DIVISOR = 300.0
ETA_CEILING = 1e-2
BISECTION_STEPS = 60
PROP_BUDGET = 1e-6
REFERENCE_SIGMA = 0.1
SEED_SHARE = 0.5
NECK_SHARE = 0.01
COLLAR_ETA = 1e-2
ZONE_RADII = (2.0, 8.0)
GRAPH_RADII = (0.1, 10.0)


class AssemblyError(RuntimeError):
    """Inconsistent seed data or a failed construction step."""


class ScheduleError(AssemblyError):
    def __init__(self, index: int, message: str):
        super().__init__(f"neck {index}: {message}")
        self.index = index


# -- power series -------------------------------------------------------------

def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def _series_compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients of ``a(b(x))`` for ``b(0) = 0`` (same truncation)."""
    out = np.zeros(len(a), dtype=complex)
    out[0] = a[-1]
    for c in a[-2::-1]:
        out = _series_mul(out, b)
        out[0] += c
    return out


def _series_revert(a: np.ndarray) -> np.ndarray:
    """Compositional inverse of ``a`` with ``a(0) = 0``, ``a'(0) != 0``."""
    ident = np.zeros(len(a), dtype=complex)
    ident[1] = 1.0
    d = ident / a[1]
    for _ in range(len(a)):
        d = d - (_series_compose(a, d) - ident) / a[1]
    return d


def _series_eval(a: np.ndarray, x):
    out = x * 0.0 + a[-1]
    for c in a[-2::-1]:
        out = out * x + c
    return out


# -- complex linear algebra ------------------------------------------------------

def real_matrix(W: np.ndarray) -> np.ndarray:
    """Real ``4 x 4`` form of a complex ``2 x 2`` matrix on ``(Re, Im, Re, Im)``."""
    R = np.zeros((4, 4))
    for j in range(2):
        for k in range(2):
            a, b = W[j, k].real, W[j, k].imag
            R[2 * j: 2 * j + 2, 2 * k: 2 * k + 2] = [[a, -b], [b, a]]
    return R


def to_real(q: np.ndarray) -> np.ndarray:
    """``(..., 2)`` complex to ``(..., 4)`` real."""
    return np.stack([q[..., 0].real, q[..., 0].imag, q[..., 1].real, q[..., 1].imag], axis=-1)


def projective_normal_form(a: complex, b: complex) -> tuple[complex, complex]:
    """Unit representative of ``[a, b]`` whose first nonzero entry is real positive."""
    v = np.array([a, b], dtype=complex)
    v = v / np.linalg.norm(v)
    lead = v[0] if abs(v[0]) > 1e-12 else v[1]
    v = v * (abs(lead) / lead)
    return complex(v[0]), complex(v[1])


def line_angle(l1: tuple[complex, complex], l2: tuple[complex, complex]) -> float:
    """Hermitian angle between the complex lines ``{a z + b w = 0}``."""
    c = abs(np.vdot(np.array(l1), np.array(l2)))
    return float(math.acos(min(1.0, c)))


# -- singular points ----------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One sheet of the seed surface through a singular image.

    ``seed_series`` holds ``Q_m`` with ``G(z0 + dz) - G(z0) = sum Q_m dz^m``.
    In the unitary frame ``(tangent, normal)`` the sheet is the graph
    ``v = F(u)`` with coefficients ``graph_series``.
    """

    zero: ZeroPoint
    seed_series: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    line: tuple[complex, complex]
    u_series: np.ndarray
    dz_series: np.ndarray
    graph_series: np.ndarray

    @property
    def frame(self) -> np.ndarray:
        """Unitary ``W`` with ``(u, v) = W q``."""
        return np.array([self.tangent.conj(), self.normal.conj()])

    @property
    def real_frame(self) -> np.ndarray:
        return real_matrix(self.frame)

    def local_seed(self, dz) -> np.ndarray:
        """``G(z0 + dz) - G(z0)`` as complex pairs, from the Taylor series."""
        dz = np.asarray(dz, dtype=complex)
        return np.stack([_series_eval(self.seed_series[:, 0], dz), _series_eval(self.seed_series[:, 1], dz)], axis=-1)

    def seed_graph(self, L: float) -> HoloFunction:
        """Rescaled seed graph ``u -> F(L u) / L``."""
        coeffs = {m: complex(self.graph_series[m]) * L ** (m - 1) for m in range(2, len(self.graph_series))}
        coeffs = {m: c for m, c in coeffs.items() if c != 0}
        return HoloFunction.laurent(coeffs or {0: 0.0}, f"seed[{self.zero.n},{self.zero.k}]")

    def truncation_ratio(self, radius: float) -> float:
        """Size of the last retained graph term relative to the quadratic one at ``radius``."""
        F = np.abs(self.graph_series)
        M = len(F) - 1
        if F[2] == 0:
            return 0.0
        return float(F[M] * radius ** M / (F[2] * radius ** 2))


def _branch(zero: ZeroPoint, cfg: SlitConfig, order: int = SEED_ORDER) -> Branch:
    z0 = zero.z
    m = cfg.power
    Q = np.zeros((order + 1, 2), dtype=complex)
    for j in range(1, min(m, order) + 1):
        Q[j, 0] = math.comb(m, j) * z0 ** (m - j)
    gz = g_jet(jet_space(1, order).variable(0, np.array(z0)), cfg)
    Q[1:, 1] = gz.coeffs[1:]
    e = Q[1] / np.linalg.norm(Q[1])
    n = np.array([-np.conj(e[1]), np.conj(e[0])])
    u = Q @ e.conj()
    v = Q @ n.conj()
    v[:2] = 0.0
    dz = _series_revert(u)
    F = _series_compose(v, dz)
    F[:2] = 0.0
    line = projective_normal_form(e[1], -e[0])
    return Branch(zero, Q, e, n, line, u, dz, F)


@dataclass(frozen=True)
class SingularPoint:
    """A self-intersection ``p = G(z_a) = G(z_b) (= ...)`` with its branches."""

    image: np.ndarray
    branches: tuple[Branch, ...]

    @property
    def position(self) -> np.ndarray:
        return to_real(self.image)

    @property
    def lines(self) -> list[tuple[complex, complex]]:
        return [b.line for b in self.branches]

    @property
    def modulus(self) -> float:
        return float(np.linalg.norm(self.image))

    def min_line_angle(self) -> float:
        ls = self.lines
        return min(line_angle(ls[i], ls[j]) for i in range(len(ls)) for j in range(i + 1, len(ls)))


def singular_points(cfg: SlitConfig, curve: DomainCurve, z_min: float, tol: float = CLUSTER_TOL) -> list[SingularPoint]:
    """Images of the zeros of ``g`` in ``D`` grouped by coincident image.

    Images are clustered with relative tolerance ``tol``; every cluster must
    contain ``cfg.sheets`` zeros and pairwise distinct tangent lines.
    """
    zeros = zeros_in_disk(cfg, curve, z_min)
    images = [np.array([p.z ** cfg.power, 0.0], dtype=complex) for p in zeros]
    groups: list[list[int]] = []
    for i, w in enumerate(images):
        for grp in groups:
            ref = images[grp[0]]
            if np.linalg.norm(w - ref) <= tol * max(np.linalg.norm(ref), 1e-300):
                grp.append(i)
                break
        else:
            groups.append([i])
    out = []
    for grp in groups:
        if len(grp) != cfg.sheets:
            raise AssemblyError(f"image cluster with {len(grp)} zeros, expected {cfg.sheets}")
        branches = tuple(_branch(zeros[i], cfg) for i in grp)
        sp = SingularPoint(images[grp[0]], branches)
        if sp.min_line_angle() < MIN_LINE_ANGLE:
            raise AssemblyError(f"non-transversal collision at |p| = {sp.modulus:.3e}")
        out.append(sp)
    out.sort(key=lambda s: (-s.modulus, math.atan2(s.image[0].imag, s.image[0].real)))
    return out


def boundary_distance(point: SingularPoint, cfg: SlitConfig, curve: DomainCurve, samples: int = 4001) -> float:
    """Distance from ``p`` to the image of the boundary curve (sampled)."""
    t = np.linspace(0.0, 2 * math.pi, samples)
    fine = np.geomspace(1e-12, 1e-1, 400)
    t = np.unique(np.concatenate([t, fine, 2 * math.pi - fine]))
    pts = seed_map(curve.gamma(t), cfg)
    return float(np.min(np.linalg.norm(pts - point.position, axis=-1)))


# -- neck model ----------------------------------------------------------------------

@dataclass(frozen=True)
class NeckModel:
    """``prod_j l_j(q) = eta Q(q)`` in rescaled coordinates ``q~ = q / L``.

    Dividing by ``L^d`` gives ``prod_j l_j(q~) = eta~ Q~(q~)`` with
    ``eta~ = eta / L^2`` and ``Q~ = 1`` (quadratic) or ``L z~^3 - w~^2``
    (branched).
    """

    lines: tuple[tuple[complex, complex], ...]
    variant: Variant
    eta: float
    L: float

    @property
    def eta_scaled(self) -> float:
        return self.eta / self.L ** 2

    def _rhs(self, q1, q2):
        if self.variant is Variant.QUADRATIC:
            return q1 * 0.0 + 1.0
        return q1 * q1 * q1 * self.L - q2 * q2

    def branch_forms(self, branch: Branch) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients ``l_j(e)`` and ``l_j(n)`` in the branch frame, with ``l_i(e_i) = 0`` exactly."""
        e, n = branch.tangent, branch.normal
        A = np.array([a * e[0] + b * e[1] for a, b in self.lines])
        B = np.array([a * n[0] + b * n[1] for a, b in self.lines])
        own = int(np.argmin(np.abs(A)))
        if abs(A[own]) > 1e-10:
            raise AssemblyError("branch tangent is not on any neck line")
        A[own] = 0.0
        return A, B

    def residual(self, branch: Branch, u, v):
        """``prod_j l_j(q~) - eta~ Q~(q~)`` at ``q~ = u e + v n``."""
        A, B = self.branch_forms(branch)
        prod = None
        for a, b in zip(A, B):
            l = u * a + v * b
            prod = l if prod is None else prod * l
        e, n = branch.tangent, branch.normal
        return prod - self._rhs(u * e[0] + v * n[0], u * e[1] + v * n[1]) * self.eta_scaled

    def residual_dv(self, branch: Branch, u, v):
        A, B = self.branch_forms(branch)
        ls = [u * a + v * b for a, b in zip(A, B)]
        total = 0.0
        for j in range(len(ls)):
            term = B[j]
            for i, l in enumerate(ls):
                if i != j:
                    term = term * l
            total = total + term
        if self.variant is Variant.QUADRATIC:
            return total
        e, n = branch.tangent, branch.normal
        q1, q2 = u * e[0] + v * n[0], u * e[1] + v * n[1]
        return total - self.eta_scaled * (3 * self.L * q1 * q1 * n[0] - 2 * q2 * n[1])

    def sheet_values(self, branch: Branch, u: np.ndarray, steps: int = 4, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
        """Sheet ``v~(u~)`` over the branch line by Newton continuation in ``eta``.

        Each stage iterates until the update stops shrinking; the last update
        must then be below ``tol`` relative to ``v``.
        """
        u = np.asarray(u, dtype=complex)
        v = np.zeros_like(u)
        for s in range(1, steps + 1):
            model = dataclasses.replace(self, eta=self.eta * s / steps)
            prev = np.inf
            for _ in range(max_iter):
                dv = model.residual(branch, u, v) / model.residual_dv(branch, u, v)
                v = v - dv
                size = float(np.max(np.abs(dv) / np.maximum(np.abs(v), 1e-300), initial=0.0))
                if size == 0.0 or size >= 0.5 * prev:
                    break
                prev = size
            if not size <= tol:
                raise AssemblyError(f"neck sheet Newton iteration did not converge ({size:.1e})")
        return v

    def sheet(self, branch: Branch) -> HoloFunction:
        """The sheet over ``branch`` as a holomorphic function of ``u~``."""

        def fn(u):
            if not isinstance(u, Jet):
                return self.sheet_values(branch, u)
            v0 = self.sheet_values(branch, np.asarray(u.value))
            inv = 1.0 / self.residual_dv(branch, np.asarray(u.value), v0)
            v = u * 0.0 + v0
            for _ in range(u.order + 1):
                v = v - self.residual(branch, u, v) * inv
            return v

        return HoloFunction(fn, f"neck[{branch.zero.n},{branch.zero.k}]")

    def other_roots(self, branch: Branch, u: np.ndarray) -> np.ndarray:
        """Remaining roots ``v`` of the neck equation over each ``u~`` (polynomial in ``v``)."""
        u = np.asarray(u, dtype=complex)
        d = len(self.lines)
        scale = np.maximum(np.abs(u), 1e-300)
        nodes = np.exp(2j * math.pi * np.arange(d + 1) / (d + 1))
        V = np.vander(nodes, d + 1)
        out = []
        for k in range(u.size):
            vals = np.array([self.residual(branch, u[k], x * scale[k]) for x in nodes])
            coef = np.linalg.solve(V, vals)
            roots = np.roots(coef) * scale[k]
            out.append(roots)
        return np.array(out)


# -- schedule ------------------------------------------------------------------------

@dataclass(frozen=True)
class NeckSpec:
    """Scheduled neck: centre, lines, radius ``r``, parameter ``eta`` and collar widths."""

    index: int
    point: SingularPoint
    variant: Variant
    r: float
    eta: float
    kbar: int
    sigma: float
    zone_width: float
    budget: float

    @property
    def L(self) -> float:
        return 10.0 * self.r

    @property
    def lines(self) -> list[tuple[complex, complex]]:
        return self.point.lines

    @property
    def model(self) -> NeckModel:
        return NeckModel(tuple(self.lines), self.variant, self.eta, self.L)

    def with_eta(self, eta: float) -> NeckSpec:
        return dataclasses.replace(self, eta=eta)

    def seed_graphs(self) -> list[HoloFunction]:
        return [b.seed_graph(self.L) for b in self.point.branches]

    def neck_graphs(self) -> list[HoloFunction]:
        model = self.model
        return [model.sheet(b) for b in self.point.branches]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "center": [float(x) for x in self.point.position],
            "lines": [[[a.real, a.imag], [b.real, b.imag]] for a, b in self.lines],
            "r": self.r,
            "eta": self.eta,
            "kbar": self.kbar,
            "sigma": self.sigma,
            "zone_width": self.zone_width,
            "budget": self.budget,
        }


@dataclass
class GraphicalityReport:
    single_valued: bool
    separation: float
    slope: float
    hypothesis: float
    budget: float

    @property
    def passed(self) -> bool:
        return self.single_valued and self.slope <= self.budget and self.hypothesis <= self.budget


def graphicality(spec: NeckSpec, N: int, n_radius: int = 10, n_theta: int = 24) -> GraphicalityReport:
    """Sheets over ``r <= |u| <= 100 r`` are single-valued graphs; also returns the derivative norms of the rescaled sheets."""
    model = spec.model
    r_grid = np.geomspace(GRAPH_RADII[0], GRAPH_RADII[1], n_radius)
    th = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
    u = (r_grid[:, None] * np.exp(1j * th)[None]).ravel()
    single = True
    sep = np.inf
    slope = 0.0
    hyp = 0.0
    for b, seed in zip(spec.point.branches, spec.seed_graphs()):
        try:
            v = model.sheet_values(b, u)
        except AssemblyError:
            return GraphicalityReport(False, 0.0, np.inf, np.inf, spec.budget)
        roots = model.other_roots(b, u[:: max(1, u.size // 40)])
        vv = v[:: max(1, u.size // 40)][:, None]
        dist = np.abs(roots - vv)
        dist.sort(axis=1)
        gap = dist[:, 1] / np.maximum(np.abs(u[:: max(1, u.size // 40)]), 1e-300)
        sep = min(sep, float(gap.min()))
        if np.any(dist[:, 0] > 1e-6 * np.maximum(np.abs(vv[:, 0]), 1e-300) + 1e-14) or gap.min() < 1e-3:
            single = False
        sheet = model.sheet(b)
        slope = max(slope, holo_cn_norm(sheet, 1), holo_cn_norm(seed, 1))
        hyp = max(hyp, holo_cn_norm(sheet, N + 2) + holo_cn_norm(seed, N + 2))
    return GraphicalityReport(single, sep, slope, hyp, spec.budget)


def _collar_widths(point: SingularPoint) -> tuple[float, float]:
    """Zone half-width and collar ``sigma`` keeping the per-branch collars disjoint."""
    width = min(1.0, 0.8 * math.sin(point.min_line_angle()))
    return width, min(REFERENCE_SIGMA, width / 3.0)


def _seed_cap(point: SingularPoint, L: float, N: int, target: float) -> float:
    """Largest ``L`` (from the given one) with seed graph norms below ``target``."""
    for _ in range(40):
        worst = max(holo_cn_norm(b.seed_graph(L), N + 2) for b in point.branches)
        if worst <= target:
            return L
        L *= 0.9 * target / worst
    raise AssemblyError("seed curvature cap did not settle")


def schedule(points: list[SingularPoint], cfg: SlitConfig, curve: DomainCurve, epsilon: float = 1e-2, N: int = 2, K: int | None = None, prop_budget: float = PROP_BUDGET) -> list[NeckSpec]:
    """Radii and neck parameters for the first ``K`` singular points."""
    if not points:
        raise AssemblyError("no singular points to schedule")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    K = len(points) if K is None else K
    if K > len(points):
        raise AssemblyError(f"requested {K} necks but only {len(points)} singular points are available")
    chosen = points[:K]
    specs: list[NeckSpec] = []
    r_prev = np.inf
    for k, pt in enumerate(chosen, start=1):
        others = [np.linalg.norm(pt.image - q.image) for q in chosen if q is not pt]
        gap = min(others) if others else np.inf
        r = min(gap, boundary_distance(pt, cfg, curve), pt.modulus) / RADIUS_DIVISOR
        r = min(r, r_prev / 2.0)
        width, sigma = _collar_widths(pt)
        budget = prop_budget * min(1.0, (sigma / REFERENCE_SIGMA) ** 2)
        L = _seed_cap(pt, 10.0 * r, N, SEED_SHARE * budget)
        r = L / 10.0
        for b in pt.branches:
            if b.truncation_ratio(10.0 * L) > 1e-16:
                raise ScheduleError(k, "seed Taylor series truncated too early for this radius")
        kbar = max(k, N)
        base = NeckSpec(k, pt, cfg.variant, r, ETA_CEILING * r * r, kbar, sigma, width, budget)
        specs.append(_choose_eta(base, N))
        r_prev = r
    return specs


def _neck_ok(spec: NeckSpec, N: int) -> bool:
    rep = graphicality(spec, N)
    if not rep.single_valued:
        return False
    worst = max(holo_cn_norm(s, N + 2) for s in spec.neck_graphs())
    return worst <= NECK_SHARE * spec.budget and rep.passed


def _choose_eta(spec: NeckSpec, N: int) -> NeckSpec:
    """Largest ``eta <= r^2 10^-2`` passing the neck certificates (geometric bisection)."""
    hi = spec.eta
    if _neck_ok(spec, N):
        return spec
    lo = None
    trial = hi
    steps = 0
    while lo is None:
        trial *= 1e-3
        steps += 1
        if steps > BISECTION_STEPS:
            raise ScheduleError(spec.index, "bisection exhausted without satisfying the neck certificates")
        if _neck_ok(spec.with_eta(trial), N):
            lo = trial
        else:
            hi = trial
    while steps < BISECTION_STEPS and hi / lo > 1.0 + 1e-3:
        mid = math.sqrt(lo * hi)
        if _neck_ok(spec.with_eta(mid), N):
            lo = mid
        else:
            hi = mid
        steps += 1
    return spec.with_eta(lo)


# -- collars ---------------------------------------------------------------------------

@dataclass
class Collar:
    """Gluing data for one branch of one neck (rescaled unit-scale coordinates)."""

    spec: NeckSpec
    branch_index: int
    N: int
    use_J0: bool = False

    @property
    def branch(self) -> Branch:
        return self.spec.point.branches[self.branch_index]

    @cached_property
    def input(self) -> GlueInput:
        return GlueInput(
            f=self.spec.neck_graphs()[self.branch_index],
            h=self.spec.seed_graphs()[self.branch_index],
            eta=COLLAR_ETA,
            sigma=self.spec.sigma,
            N=self.N,
            eps=self.spec.budget,
            enforce_regime=False,
        )

    @cached_property
    def surface(self):
        return transition_zeta(self.input)

    @cached_property
    def structure(self) -> GluedStructure:
        return glue(self.input, validate=False)

    @property
    def name(self) -> str:
        return f"collar[{self.spec.index}.{self.branch_index}]"

    def acs(self, points: np.ndarray) -> ACSField:
        field_ = self.structure.acs(points)
        if self.use_J0:
            field_ = dataclasses.replace(field_, J=np.broadcast_to(J0, field_.J.shape).copy())
        return field_

    def rescale(self, points: np.ndarray) -> np.ndarray:
        """Absolute points to rescaled branch coordinates."""
        return (np.atleast_2d(points) - self.spec.point.position) @ self.branch.real_frame.T / self.spec.L

    def in_zone(self, x: np.ndarray) -> np.ndarray:
        t = np.hypot(x[:, 0], x[:, 1])
        n = np.hypot(x[:, 2], x[:, 3])
        return (t >= ZONE_RADII[0]) & (t <= ZONE_RADII[1]) & (n <= self.spec.zone_width)


# -- patches ---------------------------------------------------------------------------

Frames = tuple[np.ndarray, np.ndarray, np.ndarray]
Structure = tuple[np.ndarray, np.ndarray, np.ndarray]


def _euclidean_structure(points: np.ndarray) -> Structure:
    B = points.shape[0]
    return (np.broadcast_to(OMEGA0, (B, 4, 4)), np.broadcast_to(DELTA, (B, 4, 4)), np.broadcast_to(J0, (B, 4, 4)))


def _polar_graph_frames(zeta: Callable[[np.ndarray, int], tuple[Jet, Jet]], rho: np.ndarray, theta: np.ndarray) -> Frames:
    c, s = np.cos(theta), np.sin(theta)
    planar = np.stack([rho * c, rho * s], axis=-1)
    z1, z2 = zeta(planar, 1)
    zx = np.stack([z1.coeffs[1], z2.coeffs[1]], axis=-1).real
    zy = np.stack([z1.coeffs[2], z2.coeffs[2]], axis=-1).real
    pts = np.concatenate([planar, np.stack([z1.value.real, z2.value.real], axis=-1)], axis=-1)
    dr = np.concatenate([np.stack([c, s], -1), zx * c[:, None] + zy * s[:, None]], axis=-1)
    dt = np.concatenate([np.stack([-rho * s, rho * c], -1), rho[:, None] * (-zx * s[:, None] + zy * c[:, None])], axis=-1)
    return pts, dr, dt


def _holo_zeta(f: HoloFunction):
    def zeta(planar, order):
        j = f.jets(planar, order)
        return j.real, j.imag

    return zeta


@dataclass
class Patch:
    """A parametrized piece of the surface with its working coordinates.

    ``frames(params)`` returns points and the two parameter tangents in the
    working coordinates; ``structure(points)`` returns ``(omega, g, J)``
    matrices there.  ``scale`` converts working areas to original areas and
    ``weight = -1`` marks a piece subtracted from an overlapping patch.
    """

    name: str
    zone: str
    domain: tuple[tuple[float, float], tuple[float, float]]
    frames: Callable[[np.ndarray], Frames]
    structure: Callable[[np.ndarray], Structure]
    scale: float = 1.0
    weight: float = 1.0
    neck: int | None = None
    branch: int | None = None


def seed_patch(cfg: SlitConfig, curve: DomainCurve) -> Patch:
    """The seed disk ``G(D)`` parametrized by ``(u, s)`` in ``[0, 1] x [-1, 1]``."""
    r, mu = curve.r, curve.mu

    def frames(params):
        u, s = params[:, 0], params[:, 1]
        y = r * np.sin(0.5 * math.pi * s)
        dy = r * 0.5 * math.pi * np.cos(0.5 * math.pi * s)
        root = r * np.cos(0.5 * math.pi * s)
        mid = r - mu * y * y
        lo, hi = mid - root, mid + root
        dmid = -2 * mu * y * dy
        droot = -y * 0.5 * math.pi
        z = lo + u * (hi - lo) + 1j * y
        dz_du = hi - lo
        dz_ds = (dmid - droot) + u * 2 * droot + 1j * dy
        m = cfg.power
        d1 = m * z ** (m - 1)
        d2 = g_jet(jet_space(1, 1).variable(0, z), cfg).coeffs[1]
        pts = seed_map(z, cfg)
        t1 = to_real(np.stack([d1 * dz_du, d2 * dz_du], axis=-1))
        t2 = to_real(np.stack([d1 * dz_ds, d2 * dz_ds], axis=-1))
        return pts, t1, t2

    return Patch("seed", "seed", ((0.0, 1.0), (-1.0, 1.0)), frames, _euclidean_structure)


def hole_patch(spec: NeckSpec, i: int) -> Patch:
    """Seed piece inside ``|u| < 100 r`` over branch ``i`` (subtracted from the seed disk)."""
    zeta = _holo_zeta(spec.seed_graphs()[i])
    return Patch(
        f"hole[{spec.index}.{i}]", "hole", ((0.0, 10.0), (0.0, 2 * math.pi)),
        lambda p: _polar_graph_frames(zeta, p[:, 0], p[:, 1]), _euclidean_structure,
        scale=spec.L ** 2, weight=-1.0, neck=spec.index, branch=i,
    )


def collar_patch(collar: Collar) -> Patch:
    def structure(points):
        f = collar.acs(points)
        return f.omega, f.g, f.J

    return Patch(
        collar.name, "collar", ((1.0, 10.0), (0.0, 2 * math.pi)),
        lambda p: _polar_graph_frames(collar.surface.zeta_jets, p[:, 0], p[:, 1]), structure,
        scale=collar.spec.L ** 2, neck=collar.spec.index, branch=collar.branch_index,
    )


class InnerNeck:
    """Parametrization of ``Lambda`` between the two collar inner loops (quadratic variant).

    With ``t = l_0(q~)`` the neck is ``q~ = M^{-1} (t, eta~ / t)``.  The two
    boundary loops are ``|u~_0| = 1`` and ``|u~_1| = 1``; ``log t`` is
    interpolated linearly between them, so ``(theta, lam)`` in
    ``[0, 2 pi] x [0, 1]`` covers the annulus.
    """

    def __init__(self, spec: NeckSpec):
        if spec.variant is not Variant.QUADRATIC:
            raise AssemblyError("the inner neck parametrization covers the quadratic variant only")
        self.spec = spec
        self.model = spec.model
        (a0, b0), (a1, b1) = spec.lines
        self.M = np.array([[a0, b0], [a1, b1]], dtype=complex)
        self.Minv = np.linalg.inv(self.M)
        self.b0, self.b1 = spec.point.branches
        self.sheets = [self.model.sheet(b) for b in (self.b0, self.b1)]
        l0 = lambda x: a0 * x[0] + b0 * x[1]
        self.l0_n0 = l0(self.b0.normal)
        self.l0_e1 = l0(self.b1.tangent)
        self.l0_n1 = l0(self.b1.normal)
        self.m0_ref = complex(self.sheets[0](np.array([1.0 + 0j]))[0])

    def _log_t(self, theta: Jet, lam: Jet) -> Jet:
        w = jets.exp(theta * 1j)
        wbar = jets.exp(theta * (-1j))
        m0 = w * self.sheets[0](w)
        sA = jets.log(m0 * (1.0 / self.m0_ref)) + (np.log(self.l0_n0 * self.m0_ref) - 1j * theta)
        corr = self.sheets[1](wbar) * w * (self.l0_n1 / self.l0_e1)
        sB = jets.log(corr + 1.0) + (np.log(self.l0_e1) - 1j * theta)
        return sA + (sB - sA) * lam

    def points_jets(self, params: np.ndarray, order: int) -> list[Jet]:
        theta, lam = jet_space(2, order).variables(params)
        theta = theta + 0j
        lam = lam + 0j
        t = jets.exp(self._log_t(theta, lam))
        s = t.reciprocal() * self.model.eta_scaled
        q1 = t * self.Minv[0, 0] + s * self.Minv[0, 1]
        q2 = t * self.Minv[1, 0] + s * self.Minv[1, 1]
        return [q1, q2]

    def frames(self, params: np.ndarray) -> Frames:
        q1, q2 = self.points_jets(np.atleast_2d(params), 1)
        pts = to_real(np.stack([q1.value, q2.value], axis=-1))
        d1 = to_real(np.stack([q1.coeffs[1], q2.coeffs[1]], axis=-1))
        d2 = to_real(np.stack([q1.coeffs[2], q2.coeffs[2]], axis=-1))
        return pts, d1, d2

    def patch(self) -> Patch:
        return Patch(f"neck[{self.spec.index}]", "neck", ((0.0, 2 * math.pi), (0.0, 1.0)), self.frames, _euclidean_structure,
                     scale=self.spec.L ** 2, neck=self.spec.index)


# -- atlas -----------------------------------------------------------------------------

@dataclass
class SurfaceAtlas:
    """Seed disk, collars and necks for a scheduled configuration."""

    cfg: SlitConfig
    curve: DomainCurve
    specs: list[NeckSpec]
    N: int
    j0_collar: tuple[int, int] | None = None
    collars: list[Collar] = field(init=False)

    def __post_init__(self):
        self.collars = [
            Collar(s, i, self.N, use_J0=(self.j0_collar == (s.index, i)))
            for s in self.specs for i in range(len(s.point.branches))
        ]

    @cached_property
    def inner_necks(self) -> list[InnerNeck]:
        return [InnerNeck(s) for s in self.specs]

    def patches(self, include_holes: bool = True) -> list[Patch]:
        out = [seed_patch(self.cfg, self.curve)]
        for s in self.specs:
            if include_holes:
                out.extend(hole_patch(s, i) for i in range(len(s.point.branches)))
        out.extend(collar_patch(c) for c in self.collars)
        if self.cfg.variant is Variant.QUADRATIC:
            out.extend(n.patch() for n in self.inner_necks)
        return out

    def collar(self, neck: int, branch: int) -> Collar:
        for c in self.collars:
            if c.spec.index == neck and c.branch_index == branch:
                return c
        raise KeyError((neck, branch))

    def overlap_residual(self, n_theta: int = 32) -> float:
        """Mismatch of patch images on shared loops, relative to the neck scale ``L``.

        Checks the seed (through the Taylor branch) against each collar at
        ``|u~| = 10`` and the inner neck against the collars at ``|u~| = 1``.
        """
        th = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
        worst = 0.0
        for c in self.collars:
            b, L = c.branch, c.spec.L
            u = 10.0 * np.exp(1j * th)
            dz = _series_eval(b.dz_series, u * L)
            seed_q = b.local_seed(dz) / L
            planar = np.stack([u.real, u.imag], -1)
            z1, z2 = c.surface.zeta_jets(planar, 0)
            x = np.concatenate([planar, np.stack([z1.value, z2.value], -1)], -1)
            collar_q = to_real(seed_q) @ b.real_frame.T
            worst = max(worst, float(np.max(np.abs(collar_q - x))))
        if self.cfg.variant is Variant.QUADRATIC:
            for nk in self.inner_necks:
                for lam, bi, sign in ((0.0, 0, 1.0), (1.0, 1, -1.0)):
                    pts, _, _ = nk.frames(np.stack([th, np.full_like(th, lam)], -1))
                    c = self.collar(nk.spec.index, bi)
                    u = np.exp(1j * sign * th)
                    planar = np.stack([u.real, u.imag], -1)
                    z1, z2 = c.surface.zeta_jets(planar, 0)
                    x = np.concatenate([planar, np.stack([z1.value, z2.value], -1)], -1)
                    worst = max(worst, float(np.max(np.abs(pts @ c.branch.real_frame.T - x))))
        return worst


def build_atlas(cfg: SlitConfig, curve: DomainCurve, specs: list[NeckSpec], N: int = 2, j0_collar: tuple[int, int] | None = None) -> SurfaceAtlas:
    return SurfaceAtlas(cfg, curve, specs, N, j0_collar)


def neck_patch(spec: NeckSpec) -> list[HoloFunction]:
    """Rescaled sheets of ``Lambda`` over each tangent line, ``u~ -> v~``."""
    return spec.neck_graphs()


# -- global metric ---------------------------------------------------------------------------

def global_metric(atlas: SurfaceAtlas, points: np.ndarray) -> Structure:
    """``(g, J, omega)`` at absolute points: Euclidean except inside collar zones."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    B = points.shape[0]
    g = np.broadcast_to(DELTA, (B, 4, 4)).copy()
    J = np.broadcast_to(J0, (B, 4, 4)).copy()
    W = np.broadcast_to(OMEGA0, (B, 4, 4)).copy()
    claimed = np.zeros(B, dtype=int)
    for c in atlas.collars:
        x = c.rescale(points)
        mask = c.in_zone(x)
        claimed += mask
        if np.any(mask):
            gg, JJ, WW = collar_metric(c, x[mask])
            g[mask], J[mask], W[mask] = gg, JJ, WW
    if np.any(claimed > 1):
        raise AssemblyError("point claimed by two collars")
    return g, J, W


def collar_metric(collar: Collar, x: np.ndarray) -> Structure:
    """Collar structure at rescaled points, expressed in the original orientation."""
    f = collar.acs(x)
    R = collar.branch.real_frame
    conj = lambda M: np.einsum("ji,bjk,kl->bil", R, M, R)
    return conj(f.g), conj(f.J), conj(f.omega)


def interface_residual(atlas: SurfaceAtlas, n: int = 1000, seed: int = 0) -> float:
    """Two-sided mismatch of ``(g, J, omega)`` across collar zone boundaries."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    per = max(1, n // max(1, len(atlas.collars)))
    for c in atlas.collars:
        th = rng.uniform(0, 2 * math.pi, per)
        ph = rng.uniform(0, 2 * math.pi, per)
        kind = rng.integers(0, 3, per)
        t = np.where(kind == 0, ZONE_RADII[0], np.where(kind == 1, ZONE_RADII[1], rng.uniform(*ZONE_RADII, per)))
        s = np.where(kind == 2, c.spec.zone_width, rng.uniform(0, c.spec.zone_width, per))
        x = np.stack([t * np.cos(th), t * np.sin(th), s * np.cos(ph), s * np.sin(ph)], -1)
        g, J, W = collar_metric(c, x)
        worst = max(worst, float(np.max(np.abs(g - DELTA))), float(np.max(np.abs(J - J0))), float(np.max(np.abs(W - OMEGA0))))
    return worst


# -- certificates on patches --------------------------------------------------------------

def patch_grid(patch: Patch, n1: int = 16, n2: int = 24) -> np.ndarray:
    (a0, a1), (b0, b1) = patch.domain
    s = a0 + (a1 - a0) * (np.arange(n1) + 0.5) / n1
    t = b0 + (b1 - b0) * (np.arange(n2) + 0.5) / n2
    S, T = np.meshgrid(s, t, indexing="ij")
    return np.stack([S.ravel(), T.ravel()], -1)


def patch_calibration(patch: Patch, params: np.ndarray | None = None) -> float:
    """Worst relative defect ``|omega(d1, d2) - |d1 ^ d2|_g| / |d1 ^ d2|_g`` on the patch."""
    params = patch_grid(patch) if params is None else params
    pts, d1, d2 = patch.frames(params)
    W, g, _ = patch.structure(pts)
    defect = calibration_defect(pts, d1, d2, W, g)
    flux = np.einsum("bi,bij,bj->b", d1, W, d2)
    area = flux - defect
    return float(np.max(np.abs(defect) / np.maximum(area, 1e-300)))


def patch_j_tangent(patch: Patch, params: np.ndarray | None = None) -> float:
    params = patch_grid(patch) if params is None else params
    pts, d1, d2 = patch.frames(params)
    _, _, J = patch.structure(pts)
    return float(np.max(tangent_invariance_defect(d1, d2, J)))


# -- mass and flux ---------------------------------------------------------------------------

def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor_integrals(patch: Patch, panels: tuple[int, int], nodes: int = 8) -> tuple[float, float]:
    (a0, a1), (b0, b1) = patch.domain
    x, w = _gauss(nodes)
    e1 = np.linspace(a0, a1, panels[0] + 1)
    e2 = np.linspace(b0, b1, panels[1] + 1)
    s = (e1[:-1, None] + np.diff(e1)[:, None] * x[None]).ravel()
    ws = (np.diff(e1)[:, None] * w[None]).ravel()
    t = (e2[:-1, None] + np.diff(e2)[:, None] * x[None]).ravel()
    wt = (np.diff(e2)[:, None] * w[None]).ravel()
    S, T = np.meshgrid(s, t, indexing="ij")
    WW = np.outer(ws, wt).ravel()
    params = np.stack([S.ravel(), T.ravel()], -1)
    pts, d1, d2 = patch.frames(params)
    W, g, _ = patch.structure(pts)
    return float(np.sum(WW * area_density(d1, d2, g))), float(np.sum(WW * flux_density(d1, d2, W)))


@dataclass
class PatchIntegral:
    name: str
    area: float
    flux: float
    panels: tuple[int, int]
    change: float


def integrate_patch(patch: Patch, rtol: float = 1e-7, start: tuple[int, int] = (2, 4), max_level: int = 5) -> PatchIntegral:
    """Tensor Gauss quadrature refined by panel doubling until the relative change is below ``rtol``."""
    panels = start
    prev = _tensor_integrals(patch, panels)
    for _ in range(max_level):
        panels = (2 * panels[0], 2 * panels[1])
        cur = _tensor_integrals(patch, panels)
        change = max(abs(cur[0] - prev[0]) / max(abs(cur[0]), 1e-300), abs(cur[1] - prev[1]) / max(abs(cur[1]), 1e-300))
        if change <= rtol:
            s = patch.scale * patch.weight
            return PatchIntegral(patch.name, s * cur[0], s * cur[1], panels, change)
        prev = cur
    raise AssemblyError(f"quadrature on {patch.name} did not converge (relative change {change:.2e})")


def mass_and_flux(atlas: SurfaceAtlas, rtol: float = 1e-7) -> tuple[float, float, list[PatchIntegral]]:
    """Total area and flux ``int omega`` of the assembled surface."""
    parts = [integrate_patch(p, rtol) for p in atlas.patches()]
    return math.fsum(p.area for p in parts), math.fsum(p.flux for p in parts), parts


# -- decay of the metric perturbation -------------------------------------------------------

# lighter sampling for the many assembly collars; the default collar uses the full grid
ASSEMBLY_GRID = GridSpec(n_radius=6, n_theta=12, n_normal=2, n_directions=3)


def metric_decay_profile(collar: Collar, order: int, points: np.ndarray | None = None) -> np.ndarray:
    """Largest ``|d^j (g - delta)|`` per derivative degree ``j <= order``, in rescaled coordinates."""
    from .kahler import metric_jets

    st = collar.structure
    pts = st.euclidean_collar_grid(ASSEMBLY_GRID) if points is None else points
    S, _, sp = metric_jets(st.omega, pts, order)
    S = S.copy()
    S[0] -= np.eye(4)
    fac = sp.factorial.reshape((-1,) + (1,) * (S.ndim - 1))
    partials = np.abs(S * fac)
    return np.array([float(np.max(partials[sp.degree == deg])) for deg in range(order + 1)])


def decay_norms(profile: np.ndarray, L: float, order: int) -> tuple[float, float]:
    """``C^order`` norms from a profile: original coordinates (``j``-th derivative times ``L^-j``) and rescaled."""
    head = profile[: order + 1]
    scale = float(L) ** (-np.arange(head.size, dtype=float))
    return float(np.max(head * scale)), float(np.max(head))


def metric_decay(collar: Collar, order: int, points: np.ndarray | None = None) -> tuple[float, float]:
    """``||g - delta||_{C^order}`` on the collar grid: original coordinates and rescaled ones."""
    return decay_norms(metric_decay_profile(collar, order, points), collar.spec.L, order)
