"""Certificate runner: every invariant suite against one configuration.

Suites run in a fixed order and sample with generators seeded from the
configuration, so the report payload is a pure function of the config.  All
tolerances live in :data:`TOLERANCES`.  Failures (including exceptions
raised while building a suite's inputs) become report entries.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import assemble as asm
from .chart import ChartPair
from .forms import Box, FormField, adapted_primitive, d_exterior, from_functions
from .glue import GluedStructure, _outside_support_sample, default_collar_input, glue
from .jets import Jet
from .kahler import DELTA, J0, acs_from_omega, wirtinger_comass
from .mesh import mesh_and_euler
from .slitplane import (
    DomainCurve,
    SlitConfig,
    Variant,
    cauchy_riemann_residual,
    g_product,
    zero_candidates,
)

SCHEMA = 1

TOLERANCES: dict[str, float] = {
    "slitplane.zero_set": 1e-12,
    "slitplane.holomorphy": 1e-8,
    "forms.dd": 1e-10,
    "forms.primitive": 1e-7,
    "forms.primitive_plane": 1e-10,
    "chart.roundtrip": 1e-10,
    "glue.closed": 1e-8,
    "glue.pullback": 1e-9,
    "glue.mixed": 1e-8,
    "glue.support": 1e-12,
    "glue.smallness": 1e-2,
    "kahler.identities": 1e-10,
    "kahler.euclidean": 1e-10,
    "wirtinger.comass": 1e-9,
    "wirtinger.maximality": 1e-9,
    "assemble.schedule": 0.0,
    "assemble.disjoint": 1.0,
    "assemble.graphicality": 1.0,
    "assemble.overlap": 1e-9,
    "assemble.interface": 1e-9,
    "collar.closed": 1e-8,
    "collar.pullback": 1e-9,
    "collar.mixed": 1e-8,
    "collar.support": 1e-12,
    "collar.smallness": 1e-2,
    "calibration.volume": 1e-6,
    "calibration.j_tangent": 1e-8,
    "calibration.flux": 1e-6,
    "topology.euler": 0.0,
    # decay.per_neck and decay.sum compare against the configured epsilon
}

SUITES = ("slitplane", "forms", "chart", "glue", "kahler", "wirtinger", "assemble")

MUTATIONS = {
    "J0-collar": "calibration.j_tangent",
    "eta-x1000": "assemble.graphicality",
}


# -- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on."""

    variant: str = "quadratic"
    epsilon: float = 1e-2
    N: int = 2
    K: int = 3
    z_min: float = math.exp(-2 * math.pi)
    mesh_resolution: int = 2
    quad_rtol: float = 1e-7
    seed: int = 0
    out: str = "out"
    only: tuple[str, ...] | None = None
    mutate: str | None = None

    def validate(self) -> RunConfig:
        Variant(self.variant)
        if not (self.epsilon > 0 and self.z_min > 0 and self.quad_rtol > 0):
            raise ValueError("epsilon, z_min and the quadrature tolerance must be positive")
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if self.N not in (0, 1, 2, 3):
            raise ValueError("N must lie in {0, 1, 2, 3}")
        if self.mesh_resolution < 1:
            raise ValueError("mesh resolution must be at least 1")
        if self.mutate is not None and self.mutate not in MUTATIONS:
            raise ValueError(f"unknown mutation {self.mutate!r}; choose from {sorted(MUTATIONS)}")
        if self.only is not None:
            unknown = set(self.only) - set(SUITES)
            if unknown:
                raise ValueError(f"unknown suites {sorted(unknown)}; choose from {list(SUITES)}")
        return self

    def payload(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        d["only"] = list(self.only) if self.only is not None else None
        return d

    @property
    def slit(self) -> SlitConfig:
        return SlitConfig(0.25, Variant(self.variant))


# -- report -----------------------------------------------------------------------

def _finite(x: float):
    x = float(x)
    return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


@dataclass
class Certificate:
    name: str
    suite: str
    region: str
    residual: float
    tolerance: float
    samples: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "suite": self.suite,
            "region": self.region,
            "residual": _finite(self.residual),
            "tolerance": _finite(self.tolerance),
            "passed": self.passed,
            "samples": self.samples,
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    return _finite(obj)


@dataclass
class CertificateReport:
    config: RunConfig
    certificates: list[Certificate]
    timing: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.certificates if not c.passed]

    def __getitem__(self, name: str) -> Certificate:
        for c in self.certificates:
            if c.name == name:
                return c
        raise KeyError(name)

    def payload(self) -> dict:
        """Deterministic part of the report."""
        return {
            "schema": SCHEMA,
            "config": self.config.payload(),
            "epsilon": self.config.epsilon,
            "N": self.config.N,
            "K": self.config.K,
            "variant": self.config.variant,
            "passed": self.passed,
            "failed": self.failed,
            "certificates": [c.to_json() for c in self.certificates],
        }

    def to_json(self) -> str:
        doc = self.payload()
        doc["timing"] = {k: round(v, 3) for k, v in self.timing.items()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- shared construction ----------------------------------------------------------

class Construction:
    """Lazily built inputs shared by the suites of one run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.cfg = config.slit
        self.curve = DomainCurve()

    @cached_property
    def default_collar(self) -> GluedStructure:
        return glue(default_collar_input())

    @cached_property
    def points(self) -> list[asm.SingularPoint]:
        return asm.singular_points(self.cfg, self.curve, self.config.z_min)

    @cached_property
    def specs(self) -> list[asm.NeckSpec]:
        if self.config.K == 0:
            return []
        specs = asm.schedule(self.points, self.cfg, self.curve, self.config.epsilon, self.config.N, self.config.K)
        if self.config.mutate == "eta-x1000":
            specs = [s.with_eta(s.eta * 1e3) for s in specs]
        return specs

    @cached_property
    def atlas(self) -> asm.SurfaceAtlas:
        j0 = (1, 0) if self.config.mutate == "J0-collar" and self.specs else None
        return asm.build_atlas(self.cfg, self.curve, self.specs, self.config.N, j0_collar=j0)


def build_atlas(config: RunConfig) -> asm.SurfaceAtlas:
    return Construction(config.validate()).atlas


# -- suites --------------------------------------------------------------------------

def _rng(config: RunConfig, suite: str) -> np.random.Generator:
    return np.random.default_rng([config.seed, SUITES.index(suite)])


def _cert(name: str, region: str, residual: float, samples: int, tolerance: float | None = None, **details) -> Certificate:
    tol = TOLERANCES[name] if tolerance is None else tolerance
    return Certificate(name, name.split(".")[0], region, float(residual), tol, int(samples), details)


def suite_slitplane(ctx: Construction) -> list[Certificate]:
    cfg, z_min = ctx.cfg, ctx.config.z_min
    zeros = np.array([p.z for p in zero_candidates(cfg, z_min)])
    zero_res = float(np.max(np.abs(g_product(zeros, cfg)))) if zeros.size else 0.0
    rng = _rng(ctx.config, "slitplane")
    r = np.exp(rng.uniform(math.log(0.01), 0.0, 20))
    z = r * np.exp(1j * rng.uniform(0.05, math.pi - 0.05, 20))
    cr = float(np.max(cauchy_riemann_residual(lambda w: g_product(w, cfg), z, h=1e-5 * np.abs(z))))
    return [
        _cert("slitplane.zero_set", f"truncated zero set |z| >= {z_min:.6g}", zero_res, zeros.size),
        _cert("slitplane.holomorphy", "upper half plane, 0.01 < |z| < 1", cr, z.size),
    ]


def _random_polynomial(rng: np.random.Generator, degree: int, n_terms: int = 4) -> Callable[[list[Jet]], Jet]:
    exps = [rng.integers(0, degree + 1, 4) for _ in range(n_terms)]
    exps = [e if e.sum() <= degree else (e * degree) // max(1, e.sum()) for e in exps]
    coeffs = rng.uniform(-1.0, 1.0, n_terms)

    def poly(xs):
        total = xs[0] * 0.0
        for c, e in zip(coeffs, exps):
            term = xs[0] * 0.0 + c
            for i, k in enumerate(e):
                for _ in range(int(k)):
                    term = term * xs[i]
            total = total + term
        return total

    return poly


def plane_vanishing_form(rng: np.random.Generator, degree: int = 2) -> FormField:
    """``d theta`` for a random polynomial ``theta`` whose pullback to ``{x3 = x4 = 0}`` vanishes."""
    p = [_random_polynomial(rng, degree) for _ in range(6)]
    theta = from_functions(1, {
        (0,): lambda xs: xs[2] * p[0](xs) + xs[3] * p[1](xs),
        (1,): lambda xs: xs[2] * p[2](xs) + xs[3] * p[3](xs),
        (2,): p[4],
        (3,): p[5],
    }, Box((-1.0,) * 4, (1.0,) * 4))
    beta = d_exterior(theta)
    beta.box = theta.box
    return beta


def suite_forms(ctx: Construction) -> list[Certificate]:
    rng = _rng(ctx.config, "forms")
    box = Box((-1.0,) * 4, (1.0,) * 4)
    grid = box.sample(100, rng)
    dd = 0.0
    for _ in range(10):
        theta = from_functions(1, {(i,): _random_polynomial(rng, 3) for i in range(4)}, box)
        vals = d_exterior(d_exterior(theta)).values(grid)
        dd = max(dd, float(np.max(np.abs(vals))) if vals.size else 0.0)
    prim, plane = 0.0, 0.0
    pts = box.sample(8, rng)
    plane_pts = pts.copy()
    plane_pts[:, 2:] = 0.0
    for _ in range(20):
        beta = plane_vanishing_form(rng)
        alpha = adapted_primitive(beta, seed=int(rng.integers(2**31)))
        prim = max(prim, float(np.max(np.abs(d_exterior(alpha).values(pts) - beta.values(pts)))))
        plane = max(plane, float(np.max(np.linalg.norm(alpha.values(plane_pts), axis=-1))))
    return [
        _cert("forms.dd", "[-1, 1]^4, 10 cubic 1-forms", dd, grid.shape[0] * 10),
        _cert("forms.primitive", "[-1, 1]^4, 20 closed plane-vanishing 2-forms", prim, pts.shape[0] * 20),
        _cert("forms.primitive_plane", "plane x3 = x4 = 0", plane, plane_pts.shape[0] * 20),
    ]


def _collar_sample(rng: np.random.Generator, sigma: float, n: int) -> np.ndarray:
    R = rng.uniform(3.0, 7.0, n)
    th = rng.uniform(0.0, 2 * math.pi, n)
    s = 2 * sigma * np.sqrt(rng.uniform(0.0, 1.0, n))
    ph = rng.uniform(0.0, 2 * math.pi, n)
    return np.stack([R * np.cos(th), R * np.sin(th), s * np.cos(ph), s * np.sin(ph)], -1)


def suite_chart(ctx: Construction) -> list[Certificate]:
    rng = _rng(ctx.config, "chart")
    chart: ChartPair = ctx.default_collar.chart
    x = np.concatenate([rng.uniform(-7.0, 7.0, (1000, 2)), rng.uniform(-0.5, 0.5, (1000, 2))], -1)
    back = chart.invert(chart.Y(x))
    return [_cert("chart.roundtrip", "default collar chart, |x1|,|x2| <= 7, |x3|,|x4| <= 0.5", float(np.max(np.abs(back - x))), x.shape[0])]


def _glue_certs(prefix: str, region: str, reports: Iterable) -> list[Certificate]:
    out = []
    for key in ("closed", "pullback", "mixed", "support", "smallness"):
        worst = max((r.results[key] for r in reports), key=lambda p: p.value)
        out.append(_cert(f"{prefix}.{key}", region, worst.value, 1, worst_point=list(worst.worst_point)))
    return out


def suite_glue(ctx: Construction) -> list[Certificate]:
    rep = ctx.default_collar.certify(seed=ctx.config.seed)
    return _glue_certs("glue", "default collar", [rep])


def suite_kahler(ctx: Construction) -> list[Certificate]:
    rng = _rng(ctx.config, "kahler")
    st = ctx.default_collar
    pts = st.chart.Y(_collar_sample(rng, st.input.sigma, 1000))
    f = acs_from_omega(st.omega_matrix(pts))
    ident = f.identity_residuals(n_pairs=4, seed=ctx.config.seed)
    outside = st.chart.Y(_outside_support_sample(rng, st.input.sigma, 300))
    fo = acs_from_omega(st.omega_matrix(outside))
    eu = max(float(np.max(np.abs(fo.g - DELTA))), float(np.max(np.abs(fo.J - J0))))
    return [
        _cert("kahler.identities", "default collar (D7 \\ D3) x D_2sigma", max(ident.values()), pts.shape[0], **ident),
        _cert("kahler.euclidean", "default collar, outside the support", eu, outside.shape[0]),
    ]


def suite_wirtinger(ctx: Construction) -> list[Certificate]:
    rng = _rng(ctx.config, "wirtinger")
    st = ctx.default_collar
    pts = st.chart.Y(_collar_sample(rng, st.input.sigma, 50))
    f = acs_from_omega(st.omega_matrix(pts))
    excess, gap = -np.inf, -np.inf
    for b in range(pts.shape[0]):
        res = wirtinger_comass(f.omega[b], f.g[b], f.J[b], n_samples=10_000, seed=ctx.config.seed + b)
        excess = max(excess, res.value - 1.0)
        gap = max(gap, res.sampled - res.candidate)
    return [
        _cert("wirtinger.comass", "default collar, 50 points x 1e4 samples", excess, 50 * 10_000),
        _cert("wirtinger.maximality", "default collar, (v, Jv) against random pairs", gap, 50 * 10_000),
    ]


def _disjointness(ctx: Construction) -> float:
    """Worst ratio of ``100 r`` sums to centre gaps and of ``100 r`` to the boundary image distance."""
    worst = 0.0
    specs = ctx.specs
    for i, a in enumerate(specs):
        worst = max(worst, 100 * a.r / asm.boundary_distance(a.point, ctx.cfg, ctx.curve))
        for b in specs[i + 1:]:
            worst = max(worst, 100 * (a.r + b.r) / float(np.linalg.norm(a.point.image - b.point.image)))
    return worst


def suite_assemble(ctx: Construction) -> list[Certificate]:
    config = ctx.config
    out: list[Certificate] = []
    try:
        specs = ctx.specs
        atlas = ctx.atlas
    except asm.AssemblyError as exc:
        return [_cert("assemble.schedule", "schedule", math.inf, config.K, error=str(exc))]
    out.append(_cert("assemble.schedule", "schedule", 0.0, len(specs), necks=[s.to_json() for s in specs]))
    out.append(_cert("assemble.disjoint", "balls of radius 100 r", _disjointness(ctx), len(specs)))

    reps = [asm.graphicality(s, config.N) for s in specs]
    ratio = max([max(r.slope, r.hypothesis) / r.budget if r.single_valued else math.inf for r in reps], default=0.0)
    out.append(_cert("assemble.graphicality", "rescaled annuli 0.1 <= |u| <= 10", ratio, len(reps),
                     per_neck=[dataclasses.asdict(r) for r in reps]))

    out.append(_cert("assemble.overlap", "shared patch loops", atlas.overlap_residual() if specs else 0.0, 32 * len(atlas.collars)))
    out.append(_cert("assemble.interface", "collar zone boundaries", asm.interface_residual(atlas, 1000, config.seed) if specs else 0.0, 1000))

    if atlas.collars:
        glue_reports = [c.structure.certify(asm.ASSEMBLY_GRID, seed=config.seed) for c in atlas.collars]
        out.extend(_glue_certs("collar", "assembly collars", glue_reports))

    patches = atlas.patches()
    cal = max(asm.patch_calibration(p) for p in patches)
    out.append(_cert("calibration.volume", "every patch (relative)", cal, sum(asm.patch_grid(p).shape[0] for p in patches)))
    jt = max([asm.patch_j_tangent(p) for p in patches if p.zone == "collar"], default=0.0)
    out.append(_cert("calibration.j_tangent", "collar patches", jt, sum(asm.patch_grid(p).shape[0] for p in patches if p.zone == "collar")))
    area, flux, parts = asm.mass_and_flux(atlas, config.quad_rtol)
    out.append(_cert("calibration.flux", "whole surface", abs(area - flux) / area, len(parts), area=area, flux=flux,
                     patches={p.name: {"area": p.area, "flux": p.flux, "panels": list(p.panels)} for p in parts}))

    eps, N = config.epsilon, config.N
    per, total, detail = 0.0, 0.0, []
    for s in specs:
        collars = [c for c in atlas.collars if c.spec.index == s.index]
        profiles = [asm.metric_decay_profile(c, max(s.kbar, N)) for c in collars]
        kbar_vals = [asm.decay_norms(p, s.L, s.kbar) for p in profiles]
        n_vals = [asm.decay_norms(p, s.L, N) for p in profiles]
        orig = max(v[0] for v in kbar_vals)
        per = max(per, orig * 2 ** (s.kbar + 1))
        total += max(v[0] for v in n_vals)
        detail.append({"neck": s.index, "kbar": s.kbar, "original": orig, "rescaled": max(v[1] for v in kbar_vals),
                       "bound": eps * 2.0 ** (-s.kbar - 1)})
    out.append(_cert("decay.per_neck", "collar grids, original coordinates", per, len(specs), tolerance=eps, per_neck=detail))
    out.append(_cert("decay.sum", "sum over necks of C^N norms", total, len(specs), tolerance=eps))

    try:
        mesh = mesh_and_euler(atlas, config.mesh_resolution)
        V, E, F = mesh.counts
        out.append(_cert("topology.euler", "mesh", abs(mesh.euler - (1 - 2 * len(specs))), F, V=V, E=E, F=F, chi=mesh.euler))
    except asm.AssemblyError as exc:
        out.append(_cert("topology.euler", "mesh", math.inf, 0, error=str(exc)))
    return out


SUITE_FUNCTIONS: dict[str, Callable[[Construction], list[Certificate]]] = {
    "slitplane": suite_slitplane,
    "forms": suite_forms,
    "chart": suite_chart,
    "glue": suite_glue,
    "kahler": suite_kahler,
    "wirtinger": suite_wirtinger,
    "assemble": suite_assemble,
}


def run_all(config: RunConfig) -> CertificateReport:
    """Run the selected suites in order and collect the certificates."""
    config.validate()
    ctx = Construction(config)
    certs: list[Certificate] = []
    timing: dict[str, float] = {}
    for suite in SUITES:
        if config.only is not None and suite not in config.only:
            continue
        t0 = time.perf_counter()
        try:
            certs.extend(SUITE_FUNCTIONS[suite](ctx))
        except Exception as exc:  # noqa: BLE001  failures are report entries
            certs.append(Certificate(f"{suite}.error", suite, "suite", math.inf, 0.0, 0, {"error": f"{type(exc).__name__}: {exc}"}))
        timing[suite] = time.perf_counter() - t0
    return CertificateReport(config, certs, timing)
