"""Gluing two holomorphic graphs across a collar with a closed 2-form.

Given holomorphic ``f`` (inner) and ``h`` (outer) on the annulus
``1 < |u| < 10`` we build the interpolated graph ``zeta``, the adapted chart
``X``, the model form ``beta = a dX1^dX2 + dX3^dX4``, the primitive ``theta``
of ``omega0 - beta`` vanishing on the surface, and the glued closed form

    omega = beta + d(phi theta) = beta + phi (omega0 - beta) + dphi ^ theta.

Everything is computed in ``X``-coordinates and transported to Euclidean
coordinates by pullback through ``X``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .chart import ChartPair, GraphSurface
from .forms import (
    FormField,
    adapted_primitive,
    combine,
    wedge_coeffs,
)
from .jets import Jet, jet_space
from .slitplane import cauchy_riemann_residual

# cutoff argument below which (above one minus which) the flat step is
# treated as exactly 0 (exactly 1); the neglected values are below 1e-250
STEP_CLAMP = 1.0 / 600.0

INNER_RADIUS = 1.0
OUTER_RADIUS = 10.0
EXTENSION_RADII = (0.5, 0.9)


class GlueError(ValueError):
    """Invalid gluing input (regime, norm budget or holomorphy)."""


class GlueFailure(RuntimeError):
    """A glued form failed one of its certified properties."""

    def __init__(self, report: GlueReport):
        self.report = report
        bad = [r for r in report.results.values() if not r.passed]
        first = bad[0]
        super().__init__(f"property {first.name} failed: {first.value:.3e} > {first.tol:.1e} at {first.worst_point}")


# -- cutoffs ----------------------------------------------------------------

def smooth_step(t: Jet) -> Jet:
    """``psi(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})``, flat at both ends."""
    v = np.asarray(t.value, dtype=float)
    out = t.space.constant((v >= 1.0 - STEP_CLAMP).astype(float))
    mid = (v > STEP_CLAMP) & (v < 1.0 - STEP_CLAMP)
    if np.any(mid):
        s = t[mid]
        q = 1.0 / s - 1.0 / (1.0 - s)
        out.coeffs[:, mid] = jets.logistic(-q).coeffs
    return out


def smooth_step_value(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return smooth_step(jet_space(1, 0).constant(t)).value


def planar_cutoff(x1: Jet, x2: Jet) -> Jet:
    """Equal to 1 on ``|u| <= 4`` and to 0 on ``|u| >= 5``."""
    return smooth_step((25.0 - (x1 * x1 + x2 * x2)) / 9.0)


def extension_cutoff(x1: Jet, x2: Jet, radii: tuple[float, float] = EXTENSION_RADII) -> Jet:
    """Equal to 0 on ``|u| <= radii[0]`` and to 1 on ``|u| >= radii[1]``."""
    a2, b2 = radii[0] ** 2, radii[1] ** 2
    return smooth_step((x1 * x1 + x2 * x2 - a2) / (b2 - a2))


@dataclass(frozen=True)
class Cutoff:
    """``phi = 1 - rho(|X12|) nu(|X34|)`` with collar half-width ``sigma``.

    ``phi`` vanishes on ``(D6 \\ D4) x D_sigma`` and equals 1 outside
    ``(D7 \\ D3) x D_{2 sigma}``.
    """

    sigma: float

    def jets(self, points: np.ndarray, order: int) -> Jet:
        X = jet_space(4, order).variables(np.atleast_2d(points))
        R2 = X[0] * X[0] + X[1] * X[1]
        s2 = X[2] * X[2] + X[3] * X[3]
        rho = smooth_step((R2 - 9.0) / 7.0) * smooth_step((49.0 - R2) / 13.0)
        sig2 = self.sigma ** 2
        nu = smooth_step((4.0 * sig2 - s2) / (3.0 * sig2))
        return 1.0 - rho * nu

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.jets(points, 0).value

    def in_zero_region(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        R = np.hypot(points[:, 0], points[:, 1])
        s = np.hypot(points[:, 2], points[:, 3])
        return (R >= 4.0) & (R <= 6.0) & (s <= self.sigma)

    def in_one_region(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        R = np.hypot(points[:, 0], points[:, 1])
        s = np.hypot(points[:, 2], points[:, 3])
        return (R <= 3.0) | (R >= 7.0) | (s >= 2.0 * self.sigma)


# -- holomorphic inputs -----------------------------------------------------

@dataclass
class HoloFunction:
    """A holomorphic function usable on complex arrays and complex jets."""

    fn: Callable
    name: str = "f"

    def __call__(self, z):
        return self.fn(z)

    def jets(self, points: np.ndarray, order: int) -> Jet:
        """Complex 2-variable jet of ``f(x1 + i x2)``."""
        x = jet_space(2, order).variables(np.atleast_2d(points))
        z = x[0] + x[1] * 1j
        out = self.fn(z)
        if not isinstance(out, Jet):
            out = z * 0.0 + out
        return out

    def scaled(self, c: float) -> HoloFunction:
        return HoloFunction(lambda z, fn=self.fn: fn(z) * c, f"{c:g}*{self.name}")

    @staticmethod
    def zero() -> HoloFunction:
        return HoloFunction(lambda z: z * 0.0, "0")

    @staticmethod
    def laurent(coeffs: dict[int, complex], name: str = "laurent") -> HoloFunction:
        """``sum_k c_k z^k`` with finitely many (possibly negative) powers."""

        def fn(z):
            total = z * 0.0
            for k, c in coeffs.items():
                total = total + c * (z ** k if k >= 0 else (1.0 / z) ** (-k))
            return total

        return HoloFunction(fn, name)


def annulus_grid(n_r: int = 19, n_theta: int = 48, inner: float = INNER_RADIUS, outer: float = OUTER_RADIUS) -> np.ndarray:
    r = np.linspace(inner, outer, n_r)
    th = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    return np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)


def holo_cn_norm(f: HoloFunction, order: int, points: np.ndarray | None = None) -> float:
    """Grid sup of all real partials of ``Re f`` and ``Im f`` up to ``order``."""
    pts = annulus_grid() if points is None else points
    j = f.jets(pts, order)
    return float(max(np.max(np.abs(j.real.partials())), np.max(np.abs(j.imag.partials()))))


def holo_cr_residual(f: HoloFunction, points: np.ndarray | None = None) -> float:
    pts = annulus_grid() if points is None else points
    z = pts[:, 0] + 1j * pts[:, 1]
    vals = np.asarray(f(z))
    if np.all(vals == 0):
        return 0.0
    return float(np.max(cauchy_riemann_residual(f, z)))


@dataclass
class GlueInput:
    """Inner map ``f``, outer map ``h`` and the collar parameters."""

    f: HoloFunction
    h: HoloFunction
    eta: float = 1e-2
    sigma: float = 1e-4
    N: int = 2
    eps: float = 1e-6
    enforce_regime: bool = True
    cr_tol: float = 1e-8
    measured_eps: float = field(init=False, default=float("nan"))

    def validate(self) -> GlueInput:
        if self.N < 0:
            raise GlueError("N must be nonnegative")
        if self.enforce_regime:
            if self.eps > self.sigma / 100.0:
                raise GlueError(f"regime violated: eps = {self.eps:g} > sigma/100 = {self.sigma / 100:g}")
            if self.sigma > self.eta / 100.0:
                raise GlueError(f"regime violated: sigma = {self.sigma:g} > eta/100 = {self.eta / 100:g}")
        if 2.0 * self.sigma >= 8.0:
            raise GlueError("collar does not fit in the chart box")
        for g in (self.f, self.h):
            res = holo_cr_residual(g)
            if res > self.cr_tol:
                raise GlueError(f"{g.name} fails the Cauchy-Riemann check ({res:.2e})")
        self.measured_eps = holo_cn_norm(self.f, self.N + 2) + holo_cn_norm(self.h, self.N + 2)
        if self.measured_eps > self.eps:
            raise GlueError(f"norm budget exceeded: {self.measured_eps:.3e} > eps = {self.eps:g}")
        return self


# -- pipeline ---------------------------------------------------------------

def _masked_apply(fn: Callable[[np.ndarray, int], Jet], points: np.ndarray, order: int, weight: Jet) -> Jet:
    """``weight * fn`` evaluated only where the weight jet is not identically zero."""
    mask = np.any(weight.coeffs != 0, axis=0)
    out = Jet(weight.space, np.zeros(weight.coeffs.shape, dtype=complex))
    if np.any(mask):
        sub = fn(points[mask], order) * weight[mask]
        out.coeffs[:, mask] = sub.coeffs
    return out


def transition_zeta(inp: GlueInput, extension_radii: tuple[float, float] = EXTENSION_RADII) -> GraphSurface:
    """``zeta = f phi + h (1 - phi)``, damped to zero inside ``D_1``.

    The damping only changes ``zeta`` on ``|u| < extension_radii[1] < 1``; it
    makes the graph defined on the whole disk, which the radial primitive
    needs because its rays pass through the center.
    """

    def zeta_jets(points: np.ndarray, order: int) -> tuple[Jet, Jet]:
        points = np.atleast_2d(points)
        x = jet_space(2, order).variables(points)
        chi = extension_cutoff(x[0], x[1], extension_radii)
        phi = planar_cutoff(x[0], x[1])
        w = _masked_apply(inp.f.jets, points, order, chi * phi) + _masked_apply(inp.h.jets, points, order, chi * (1.0 - phi))
        return w.real, w.imag

    return GraphSurface(zeta_jets, 0.0, OUTER_RADIUS)


def _area_factor_jets(surface: GraphSurface, points: np.ndarray, order: int) -> Jet:
    """``a = 1 + det D zeta`` as a 4-variable jet depending on ``(X1, X2)``."""
    z1, z2 = surface.zeta_jets(np.atleast_2d(points)[:, :2], order + 1)
    a = 1.0 + z1.diff(0) * z2.diff(1) - z1.diff(1) * z2.diff(0)
    return a.embed(jet_space(4, order), (0, 1))


def build_beta(chart: ChartPair) -> FormField:
    """``beta = a(X1, X2) dX1^dX2 + dX3^dX4`` in ``X``-coordinates."""

    def fn(points, order):
        a = _area_factor_jets(chart.surface, points, order)
        return {(0, 1): a, (2, 3): a * 0.0 + 1.0}

    return FormField(2, fn, chart.box, "beta")


def omega0_adapted(chart: ChartPair) -> FormField:
    """``omega0`` expressed in ``X``-coordinates."""
    return FormField(2, chart.omega0_jets, chart.box, "omega0_X")


@dataclass
class PropertyResult:
    name: str
    value: float
    tol: float
    worst_point: list[float]

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


@dataclass
class GlueReport:
    results: dict[str, PropertyResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def raise_if_failed(self) -> GlueReport:
        if not self.passed:
            raise GlueFailure(self)
        return self


@dataclass
class GridSpec:
    """Sampling of the collar support for norm and property sweeps."""

    n_radius: int = 9
    n_theta: int = 24
    n_normal: int = 4
    n_directions: int = 4


@dataclass
class GluedStructure:
    """The glued form with the ingredients it was built from."""

    input: GlueInput
    chart: ChartPair
    beta: FormField
    omega0_X: FormField
    theta: FormField
    cutoff: Cutoff
    omega_X: FormField
    omega: FormField

    # -- point evaluation --------------------------------------------
    def omega_matrix(self, points: np.ndarray) -> np.ndarray:
        return self.omega.matrix(np.atleast_2d(points))

    def acs(self, points: np.ndarray):
        from .kahler import acs_from_omega

        return acs_from_omega(self.omega_matrix(points))

    def surface_points(self, planar: np.ndarray) -> np.ndarray:
        return self.chart.surface.embed(planar)

    def tangent_frames(self, planar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Euclidean tangent vectors ``d/dx1``, ``d/dx2`` of the graph."""
        z1, z2 = self.chart.surface.zeta_jets(np.atleast_2d(planar), 1)
        B = z1.value.shape[0]
        t1 = np.stack([np.ones(B), np.zeros(B), z1.coeffs[1], z2.coeffs[1]], axis=-1)
        t2 = np.stack([np.zeros(B), np.ones(B), z1.coeffs[2], z2.coeffs[2]], axis=-1)
        return t1, t2

    # -- grids ---------------------------------------------------------
    def collar_grid(self, spec: GridSpec | None = None) -> np.ndarray:
        """Points in ``X``-coordinates covering ``(D7 \\ D3) x D_{2 sigma}``."""
        spec = spec or GridSpec()
        # cell midpoints, so that the cutoff transitions are sampled
        r = 3.0 + 4.0 * (np.arange(spec.n_radius) + 0.5) / spec.n_radius
        th = np.linspace(0.0, 2 * math.pi, spec.n_theta, endpoint=False)
        s = 2.0 * self.input.sigma * (np.arange(spec.n_normal) + 0.5) / spec.n_normal
        ph = np.linspace(0.0, 2 * math.pi, spec.n_directions, endpoint=False) + 0.25
        pts = []
        for rr in r:
            for tt in th:
                base = [rr * math.cos(tt), rr * math.sin(tt)]
                pts.append(base + [0.0, 0.0])
                for ss in s:
                    for pp in ph:
                        pts.append(base + [ss * math.cos(pp), ss * math.sin(pp)])
        return np.array(pts)

    def euclidean_collar_grid(self, spec: GridSpec | None = None) -> np.ndarray:
        return self.chart.Y(self.collar_grid(spec))

    # -- properties ----------------------------------------------------
    def deviation_cn(self, points: np.ndarray | None = None, N: int | None = None) -> tuple[float, np.ndarray]:
        """``||omega - omega0||_{C^N}`` over Euclidean grid points and the worst point."""
        N = self.input.N if N is None else N
        pts = self.euclidean_collar_grid() if points is None else points
        c = self.omega.jets(pts, N)
        c = combine([c], [1.0])
        c[(0, 1)] = c[(0, 1)] - 1.0
        c[(2, 3)] = c[(2, 3)] - 1.0
        per_point = np.zeros(pts.shape[0])
        for v in c.values():
            per_point = np.maximum(per_point, np.max(np.abs(v.truncate(N).partials()), axis=0))
        i = int(np.argmax(per_point))
        return float(per_point[i]), pts[i]

    def certify(self, spec: GridSpec | None = None, seed: int = 0, tolerances: dict[str, float] | None = None) -> GlueReport:
        tol = {"closed": 1e-8, "pullback": 1e-9, "mixed": 1e-8, "support": 1e-12, "smallness": self.input.eta}
        tol.update(tolerances or {})
        rng = np.random.default_rng(seed)
        sigma = self.input.sigma
        results: dict[str, PropertyResult] = {}

        # closedness on collar points and random box points
        grid_X = self.collar_grid(spec)
        sample_X = grid_X[rng.choice(grid_X.shape[0], size=min(64, grid_X.shape[0]), replace=False)]
        pts = self.chart.Y(sample_X)
        dres = _closedness_per_point(self.omega, pts)
        i = int(np.argmax(dres))
        results["closed"] = PropertyResult("closed", float(dres[i]), tol["closed"], pts[i].tolist())

        # pullback and mixed pairs on surface points of the collar annulus
        r = np.linspace(3.0, 7.0, 17)
        th = np.linspace(0.0, 2 * math.pi, 32, endpoint=False)
        R, T = np.meshgrid(r, th, indexing="ij")
        planar = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)
        surf = self.surface_points(planar)
        W = self.omega_matrix(surf)
        t1, t2 = self.tangent_frames(planar)
        pull = np.einsum("bi,bij,bj->b", t1, W, t2)
        pull0 = t1[:, 0] * t2[:, 1] - t1[:, 1] * t2[:, 0] + t1[:, 2] * t2[:, 3] - t1[:, 3] * t2[:, 2]
        diff = np.abs(pull - pull0)
        i = int(np.argmax(diff))
        results["pullback"] = PropertyResult("pullback", float(diff[i]), tol["pullback"], surf[i].tolist())

        collar = (R.ravel() >= 4.0) & (R.ravel() <= 6.0)
        e1, e2 = _orthonormal_pair(t1, t2)
        from .chart import normal_frame

        xi, tau = normal_frame(self.chart.surface, planar)
        mixed = np.zeros(planar.shape[0])
        for v in (e1, e2):
            for w in (xi, tau):
                mixed = np.maximum(mixed, np.abs(np.einsum("bi,bij,bj->b", v, W, w)))
        mixed = np.where(collar, mixed, 0.0)
        i = int(np.argmax(mixed))
        results["mixed"] = PropertyResult("mixed", float(mixed[i]), tol["mixed"], surf[i].tolist())

        # equality with omega0 outside the support, in X-coordinates
        out_X = _outside_support_sample(rng, sigma, 200)
        out_p = self.chart.Y(out_X)
        W = self.omega_matrix(out_p)
        dev = np.max(np.abs(W - _OMEGA0_MATRIX), axis=(1, 2))
        i = int(np.argmax(dev))
        results["support"] = PropertyResult("support", float(dev[i]), tol["support"], out_p[i].tolist())

        # smallness in C^N
        val, worst = self.deviation_cn(self.chart.Y(grid_X))
        results["smallness"] = PropertyResult("smallness", val, tol["smallness"], worst.tolist())
        return GlueReport(results)


_OMEGA0_MATRIX = np.array([[0.0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])


def _orthonormal_pair(t1: np.ndarray, t2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e1 = t1 / np.linalg.norm(t1, axis=-1, keepdims=True)
    v = t2 - np.sum(t2 * e1, axis=-1, keepdims=True) * e1
    return e1, v / np.linalg.norm(v, axis=-1, keepdims=True)


def _closedness_per_point(form: FormField, points: np.ndarray) -> np.ndarray:
    from .forms import d_coeffs

    dc = d_coeffs(form.jets(points, 1), form.degree)
    out = np.zeros(points.shape[0])
    for v in dc.values():
        out = np.maximum(out, np.abs(v.value))
    return out


def _outside_support_sample(rng: np.random.Generator, sigma: float, n: int) -> np.ndarray:
    """Random ``X``-points outside ``(D7 \\ D3) x D_{2 sigma}`` within the chart box."""
    pts = []
    kinds = [0, 1, 2]
    for k in range(n):
        kind = kinds[k % 3]
        th, ph = rng.uniform(0, 2 * math.pi, 2)
        if kind == 0:
            R, s = rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0)
        elif kind == 1:
            R, s = rng.uniform(7.0, 7.9), rng.uniform(0.0, 1.0)
        else:
            R, s = rng.uniform(3.0, 7.0), rng.uniform(2.0 * sigma, min(4.0 * sigma + 0.1, 2.0))
        pts.append([R * math.cos(th), R * math.sin(th), s * math.cos(ph), s * math.sin(ph)])
    return np.array(pts)


def build_omega(inp: GlueInput, chart: ChartPair, beta: FormField, rtol: float = 1e-10) -> GluedStructure:
    """Assemble ``omega = beta + phi (omega0 - beta) + dphi ^ theta``."""
    w0X = omega0_adapted(chart)
    gap = FormField(2, lambda p, k: combine([w0X.jets(p, k), beta.jets(p, k)], [1.0, -1.0]), chart.box, "omega0-beta")
    # collar points keep the consistency checks away from the undefined outer rim
    theta = adapted_primitive(gap, rtol=rtol, check_points=0, breaks=(*EXTENSION_RADII, 4.0, 5.0))
    cutoff = Cutoff(inp.sigma)

    def fn(points, order):
        points = np.atleast_2d(points)
        cb = beta.jets(points, order)
        cw = w0X.jets(points, order)
        phi = cutoff.jets(points, order + 1)
        phik = phi.truncate(order)
        out = {k: cb[k] + phik * (cw[k] - cb[k]) for k in cb}
        for k in cw:
            if k not in out:
                out[k] = phik * cw[k]
        active = np.any(phi.coeffs[1:] != 0, axis=0)
        if np.any(active):
            sub = points[active]
            th = theta.jets(sub, order)
            dphi = {(i,): phi[active].diff(i) for i in range(4)}
            extra = wedge_coeffs(dphi, 1, th, 1)
            for k, v in extra.items():
                full = out[k].coeffs.copy() if k in out else np.zeros((jet_space(4, order).size,) + points.shape[:1])
                full[:, active] += v.coeffs
                out[k] = Jet(jet_space(4, order), full)
        return out

    omega_X = FormField(2, fn, chart.box, "omega_X")
    omega = chart.to_euclidean(omega_X)
    omega.box = chart.box
    omega.name = "omega"
    return GluedStructure(inp, chart, beta, w0X, theta, cutoff, omega_X, omega)


DEFAULT_COLLAR_SCALE = 2e-11


def default_collar_input(scale: float = DEFAULT_COLLAR_SCALE) -> GlueInput:
    """``f = c/z``, ``h = c (1 + 10^-2)/z`` with the collar defaults ``eta, sigma, eps``.

    ``c`` is small enough that the smallness bound holds at ``sigma = 10^-4``.
    """
    return GlueInput(
        f=HoloFunction.laurent({-1: scale}, "c/z"),
        h=HoloFunction.laurent({-1: scale * (1 + 1e-2)}, "c(1+1e-2)/z"),
    )


def glue(inp: GlueInput, validate: bool = True, certify: bool = False, spec: GridSpec | None = None) -> GluedStructure:
    """Run the whole pipeline on one collar."""
    if validate:
        inp.validate()
    surface = transition_zeta(inp)
    chart = ChartPair(surface)
    beta = build_beta(chart)
    out = build_omega(inp, chart, beta)
    if certify:
        out.certify(spec).raise_if_failed()
    return out
