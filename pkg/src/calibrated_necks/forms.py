"""Differential forms on boxes in R^4 with jet-valued coefficients.

A :class:`FormField` of degree ``p`` is a map from strictly increasing index
tuples to scalar fields.  Coefficients are produced lazily as jets at a batch
of points, so exterior derivatives, wedge products and pullbacks are exact up
to rounding.  Missing index tuples stand for zero coefficients.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations, pairwise, permutations

import numpy as np

from . import jets
from .jets import Jet, jet_space

DIM = 4

Coeffs = dict[tuple[int, ...], Jet]
JetFn = Callable[[np.ndarray, int], Coeffs]


class FormError(ValueError):
    """Raised for arity, domain or precondition violations."""


class QuadratureError(RuntimeError):
    """Raised when the ray quadrature does not reach its tolerance."""


def index_tuples(degree: int) -> list[tuple[int, ...]]:
    return list(combinations(range(DIM), degree))


def _sort_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``idx`` (0 if an index repeats)."""
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0, ()
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lo <= x <= hi`` (``inf`` bounds allowed)."""

    lo: tuple[float, ...] = (-np.inf,) * DIM
    hi: tuple[float, ...] = (np.inf,) * DIM

    def contains(self, points: np.ndarray, slack: float = 1e-12) -> np.ndarray:
        p = np.asarray(points)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((p >= lo - slack) & (p <= hi + slack), axis=-1)

    def star_center(self) -> np.ndarray:
        """Origin if the box contains it, else the box center."""
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if np.all(lo <= 0) and np.all(hi >= 0):
            return np.zeros(DIM)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise FormError("unbounded box without the origin has no star center")
        return 0.5 * (lo + hi)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        lo = np.where(np.isfinite(lo), lo, -1.0)
        hi = np.where(np.isfinite(hi), hi, 1.0)
        return lo + (hi - lo) * rng.random((n, DIM))


def _zero(space, batch) -> Jet:
    return space.constant(np.zeros(batch))


class FormField:
    """A differential form whose coefficients are evaluated as jets."""

    def __init__(self, degree: int, fn: JetFn, box: Box | None = None, name: str = ""):
        if not 0 <= degree <= DIM:
            raise FormError(f"degree {degree} out of range")
        self.degree = degree
        self._fn = fn
        self.box = box or Box()
        self.name = name

    # -- evaluation --------------------------------------------------
    def jets(self, points: np.ndarray, order: int) -> Coeffs:
        """Coefficient jets of the given order at points of shape ``(B, 4)``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._fn(points, order)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Coefficient values, shape ``(B, n_components)`` in :func:`index_tuples` order."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        c = self.jets(points, 0)
        out = np.zeros((points.shape[0], len(index_tuples(self.degree))))
        for n, idx in enumerate(index_tuples(self.degree)):
            if idx in c:
                out[:, n] = np.real(c[idx].value)
        return out

    def matrix(self, points: np.ndarray) -> np.ndarray:
        """For 2-forms: antisymmetric coefficient matrices ``(B, 4, 4)``."""
        if self.degree != 2:
            raise FormError("matrix() needs a 2-form")
        vals = self.values(points)
        return coefficient_matrix(vals)

    # -- algebra -----------------------------------------------------
    def __add__(self, other: FormField) -> FormField:
        return add(self, other)

    def __sub__(self, other: FormField) -> FormField:
        return add(self, scale(other, -1.0))

    def __neg__(self) -> FormField:
        return scale(self, -1.0)

    def __mul__(self, c: float) -> FormField:
        return scale(self, c)

    __rmul__ = __mul__


def coefficient_matrix(vals: np.ndarray) -> np.ndarray:
    """Antisymmetric matrices from increasing-index 2-form components."""
    vals = np.asarray(vals)
    M = np.zeros(vals.shape[:-1] + (DIM, DIM))
    for n, (i, j) in enumerate(index_tuples(2)):
        M[..., i, j] = vals[..., n]
        M[..., j, i] = -vals[..., n]
    return M


def matrix_components(M: np.ndarray) -> np.ndarray:
    return np.stack([M[..., i, j] for i, j in index_tuples(2)], axis=-1)


# -- constructors -----------------------------------------------------------

def from_functions(
    degree: int,
    coefficients: Mapping[tuple[int, ...], Callable[[list[Jet]], Jet | float]],
    box: Box | None = None,
    name: str = "",
) -> FormField:
    """Form whose coefficients are jet-arithmetic functions of the coordinates.

    Index tuples are normalized to increasing order (with the permutation sign).
    """
    normalized: dict[tuple[int, ...], list[tuple[int, Callable]]] = {}
    for idx, f in coefficients.items():
        if len(idx) != degree:
            raise FormError(f"index {idx} does not match degree {degree}")
        sign, key = _sort_sign(idx)
        if sign == 0:
            continue
        normalized.setdefault(key, []).append((sign, f))

    def fn(points: np.ndarray, order: int) -> Coeffs:
        space = jet_space(DIM, order)
        xs = space.variables(points)
        out: Coeffs = {}
        for key, terms in normalized.items():
            acc = None
            for sign, f in terms:
                v = f(xs)
                if not isinstance(v, Jet):
                    v = space.constant(np.full(points.shape[0], float(v)))
                v = v * sign if sign != 1 else v
                acc = v if acc is None else acc + v
            out[key] = acc
        return out

    return FormField(degree, fn, box, name)


def constant_form(degree: int, coefficients: Mapping[tuple[int, ...], float], box: Box | None = None, name: str = "") -> FormField:
    return from_functions(degree, {k: (lambda xs, c=c: c) for k, c in coefficients.items()}, box, name)


def omega0(box: Box | None = None) -> FormField:
    """The standard Kähler form ``dx1^dx2 + dx3^dx4``."""
    return constant_form(2, {(0, 1): 1.0, (2, 3): 1.0}, box, "omega0")


def zero_form_field(degree: int, box: Box | None = None) -> FormField:
    return FormField(degree, lambda p, k: {}, box, "zero")


def scalar_field(f: Callable[[list[Jet]], Jet], box: Box | None = None, name: str = "") -> FormField:
    return from_functions(0, {(): f}, box, name)


# -- operations -------------------------------------------------------------

def add(a: FormField, b: FormField) -> FormField:
    if a.degree != b.degree:
        raise FormError("cannot add forms of different degree")

    def fn(points, order):
        ca, cb = a.jets(points, order), b.jets(points, order)
        out = dict(ca)
        for k, v in cb.items():
            out[k] = out[k] + v if k in out else v
        return out

    return FormField(a.degree, fn, a.box)


def scale(a: FormField, c: float) -> FormField:
    def fn(points, order):
        return {k: v * c for k, v in a.jets(points, order).items()}

    return FormField(a.degree, fn, a.box)


def multiply(f: FormField, a: FormField) -> FormField:
    """Product of a scalar field (0-form) with a form."""
    return wedge(f, a)


def combine(coeffs: Sequence[Coeffs], weights: Sequence[float]) -> Coeffs:
    out: Coeffs = {}
    for c, w in zip(coeffs, weights):
        for k, v in c.items():
            t = v * w if w != 1 else v
            out[k] = out[k] + t if k in out else t
    return out


def d_coeffs(c: Coeffs, degree: int) -> Coeffs:
    """Exterior derivative at the level of coefficient jets (order drops by one)."""
    if degree >= DIM:
        raise FormError("exterior derivative of a top-degree form")
    out: Coeffs = {}
    for idx, a in c.items():
        for i in range(DIM):
            sign, key = _sort_sign((i,) + idx)
            if sign == 0:
                continue
            term = a.diff(i)
            term = term if sign == 1 else -term
            out[key] = out[key] + term if key in out else term
    return out


def d_exterior(form: FormField) -> FormField:
    if form.degree >= DIM:
        raise FormError("degree-4 forms have zero derivative on R^4 and are rejected")

    def fn(points, order):
        return d_coeffs(form.jets(points, order + 1), form.degree)

    return FormField(form.degree + 1, fn, form.box, f"d({form.name})")


def wedge_coeffs(ca: Coeffs, pa: int, cb: Coeffs, pb: int) -> Coeffs:
    out: Coeffs = {}
    for ia, a in ca.items():
        for ib, b in cb.items():
            sign, key = _sort_sign(ia + ib)
            if sign == 0:
                continue
            term = a * b
            term = term if sign == 1 else -term
            out[key] = out[key] + term if key in out else term
    return out


def wedge(a: FormField, b: FormField) -> FormField:
    if a.degree + b.degree > DIM:
        raise FormError("wedge degree overflow")

    def fn(points, order):
        return wedge_coeffs(a.jets(points, order), a.degree, b.jets(points, order), b.degree)

    return FormField(a.degree + b.degree, fn, a.box)


def evaluate(form: FormField, point: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Multilinear antisymmetric evaluation at a point (or batch of points)."""
    if len(vectors) != form.degree:
        raise FormError(f"{form.degree}-form needs {form.degree} vectors, got {len(vectors)}")
    point = np.atleast_2d(np.asarray(point, dtype=float))
    if not np.all(form.box.contains(point)):
        raise FormError("point outside the form's domain")
    vals = form.values(point)
    V = [np.broadcast_to(np.asarray(v, dtype=float), point.shape) for v in vectors]
    return evaluate_values(vals, form.degree, V)


def evaluate_values(vals: np.ndarray, degree: int, vectors: Sequence[np.ndarray]) -> np.ndarray:
    total = np.zeros(vals.shape[0])
    for n, idx in enumerate(index_tuples(degree)):
        if degree == 0:
            total = total + vals[:, n]
            continue
        sub = np.stack([v[:, list(idx)] for v in vectors], axis=-2)  # (B, p, p)
        total = total + vals[:, n] * np.linalg.det(sub)
    return total


# -- maps and pullbacks -------------------------------------------------

class SmoothMap:
    """A map ``R^m -> R^4`` providing jets of its components."""

    def __init__(self, fn: Callable[[np.ndarray, int], list[Jet]], nvars: int = DIM, box: Box | None = None):
        self._fn = fn
        self.nvars = nvars
        self.box = box or Box()

    def jets(self, points: np.ndarray, order: int) -> list[Jet]:
        return self._fn(np.atleast_2d(np.asarray(points, dtype=float)), order)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.stack([j.value for j in self.jets(points, 0)], axis=-1)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        comps = self.jets(points, 1)
        return np.stack([np.stack([c.coeffs[1 + i] for i in range(self.nvars)], axis=-1) for c in comps], axis=-2)

    @staticmethod
    def from_functions(fs: Sequence[Callable[[list[Jet]], Jet]], nvars: int = DIM) -> SmoothMap:
        def fn(points, order):
            xs = jet_space(nvars, order).variables(points)
            out = []
            for f in fs:
                v = f(xs)
                if not isinstance(v, Jet):
                    v = xs[0] * 0 + v
                out.append(v)
            return out

        return SmoothMap(fn, nvars)


def identity_map() -> SmoothMap:
    return SmoothMap.from_functions([lambda xs, i=i: xs[i] for i in range(DIM)])


def pullback_coeffs(c_at_image: Coeffs, degree: int, comps: Sequence[Jet], constant: bool = False) -> Coeffs:
    """Pull back coefficient jets given at the image points.

    ``comps`` are the map component jets of order ``K + 1`` in the source
    variables; ``c_at_image`` are jets of order ``K`` in target variables at
    the image points (ignored beyond their values when ``constant``).
    """
    order = comps[0].order - 1
    nsrc = comps[0].space.nvars
    grads = [[comp.diff(i) for i in range(nsrc)] for comp in comps]  # grads[a][i] = d y_a / d x_i
    if constant:
        composed = {k: v.value for k, v in c_at_image.items()}
    else:
        disp = [comp.truncate(order) for comp in comps]
        keys = list(c_at_image.keys())
        outer = [c_at_image[k].truncate(order) for k in keys]
        composed = dict(zip(keys, jets.compose(outer, disp))) if keys else {}
    out: Coeffs = {}
    for src_idx in combinations(range(nsrc), degree):
        acc = None
        for tgt_idx, coef in composed.items():
            # minor det(d y_{tgt} / d x_{src})
            minor = _minor(grads, tgt_idx, src_idx)
            term = minor * coef
            acc = term if acc is None else acc + term
        if acc is not None:
            out[src_idx] = acc
    return out


def _minor(grads, rows: Sequence[int], cols: Sequence[int]) -> Jet:
    p = len(rows)
    if p == 0:
        raise FormError("empty minor")
    if p == 1:
        return grads[rows[0]][cols[0]]
    acc = None
    for perm in permutations(range(p)):
        sign, _ = _sort_sign(perm)
        term = grads[rows[0]][cols[perm[0]]]
        for a in range(1, p):
            term = term * grads[rows[a]][cols[perm[a]]]
        term = term if sign == 1 else -term
        acc = term if acc is None else acc + term
    return acc


def pullback(form: FormField, phi: SmoothMap, constant_coefficients: bool = False) -> FormField:
    """Pullback ``phi^* form``; set ``constant_coefficients`` to skip composition."""

    def fn(points, order):
        comps = phi.jets(points, order + 1)
        image = np.stack([c.value for c in comps], axis=-1).real
        c_img = form.jets(image, 0 if constant_coefficients else order)
        if form.degree == 0:
            if constant_coefficients:
                return {(): comps[0].truncate(order) * 0 + c_img[()].value} if () in c_img else {}
            disp = [c.truncate(order) for c in comps]
            return {(): jets.compose([c_img[()]], disp)[0]} if () in c_img else {}
        return pullback_coeffs(c_img, form.degree, comps, constant_coefficients)

    return FormField(form.degree, fn, phi.box)


# -- primitives -------------------------------------------------------------

# relative size below which panel disagreement is treated as rounding noise
ROUNDING_FLOOR = 1e-13


@dataclass
class QuadratureReport:
    nodes: int
    change: float


def _gauss_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def ray_integral(
    bjets: Callable[[np.ndarray, int], Coeffs],
    points: np.ndarray,
    order: int,
    center: np.ndarray,
    rtol: float = 1e-10,
    nodes: int = 16,
    max_depth: int = 14,
    report: list | None = None,
    breaks: Sequence[float] = (),
    chunk: int = 256,
    atol: float = 1e-15,
) -> Coeffs:
    """Jets of ``I_ij(x) = int_0^1 t b_ij(c + t (x - c)) dt`` by adaptive Gauss panels.

    ``breaks`` are planar radii ``|(x - c)_{12}|`` where the integrand is known
    to change scale; rays start with panel edges there.  A panel is accepted
    when its Gauss value agrees with the sum over its two halves; otherwise it
    is bisected.  The tolerance is relative to the largest initial panel
    contribution over all components; ``atol`` is the absolute noise floor of
    the integrand (forms that are differences of O(1) terms carry about 1e-16).
    """
    points = np.atleast_2d(points)
    B = points.shape[0]
    if B > chunk:
        parts = [
            ray_integral(bjets, points[i : i + chunk], order, center, rtol, nodes, max_depth, report, breaks, chunk, atol)
            for i in range(0, B, chunk)
        ]
        return {k: Jet(parts[0][k].space, np.concatenate([p[k].coeffs for p in parts], axis=1)) for k in parts[0]}
    y = points - center
    rad = np.hypot(y[:, 0], y[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        cuts = [np.clip(np.where(rad > 0, b / rad, 1.0), 0.0, 1.0) for b in sorted(breaks)]
    edges = [np.zeros(B)] + cuts + [np.ones(B)]
    panels = [(a, b) for a, b in pairwise(edges) if np.any(b > a)]
    t0, w0 = _gauss_nodes(nodes)
    used = [0]

    def integrate(a: np.ndarray, b: np.ndarray) -> Coeffs:
        used[0] += nodes
        t = a[None, :] + (b - a)[None, :] * t0[:, None]  # (n, B)
        w = (b - a)[None, :] * w0[:, None]
        pts = center + t[:, :, None] * y[None, :, :]
        c = bjets(pts.reshape(-1, DIM), order)
        out: Coeffs = {}
        for k, v in c.items():
            vv = Jet(v.space, v.coeffs.reshape((v.space.size, nodes, B)))
            vv = vv.scale_variables(t)
            out[k] = Jet(v.space, np.sum(vv.coeffs * (w * t)[None], axis=1))
        return out

    def change_per_point(cur: Coeffs, prev: Coeffs) -> np.ndarray:
        worst = np.zeros(B)
        for k in set(cur) | set(prev):
            u = cur[k].coeffs if k in cur else 0.0
            v = prev[k].coeffs if k in prev else 0.0
            d = np.abs(np.asarray(u) - np.asarray(v))
            worst = np.maximum(worst, d.reshape(-1, B).max(axis=0))
        return worst

    first = [integrate(a, b) for a, b in panels]
    scale_ = max((float(np.max(np.abs(v.coeffs))) for c in first for v in c.values()), default=0.0)
    scale_ = max(scale_, 1e-300)
    worst_seen = [0.0]

    def refine(a, b, whole: Coeffs, budget: float, depth: int) -> Coeffs:
        m = 0.5 * (a + b)
        left, right = integrate(a, m), integrate(m, b)
        both = combine([left, right], [1.0, 1.0])
        per_point = change_per_point(both, whole)
        err = float(per_point.max())
        if err <= budget:
            worst_seen[0] = max(worst_seen[0], err / scale_)
            return both
        if depth >= max_depth:
            i = int(np.argmax(per_point))
            raise QuadratureError(
                f"ray quadrature did not converge ({err / scale_:.2e} after {used[0]} nodes) "
                f"for the point {points[i].tolist()} on t in [{a[i]:.6g}, {b[i]:.6g}]"
            )
        sub = max(0.5 * budget, ROUNDING_FLOOR * scale_, atol)
        return combine([refine(a, m, left, sub, depth + 1), refine(m, b, right, sub, depth + 1)], [1.0, 1.0])

    budget = max(rtol * scale_ / max(len(panels), 1), atol)
    accepted = [refine(a, b, whole, budget, 0) for (a, b), whole in zip(panels, first)]
    if report is not None:
        report.append(QuadratureReport(used[0], worst_seen[0]))
    if not accepted:
        return {k: v * 0.0 for k, v in bjets(points, order).items()}
    return combine(accepted, [1.0] * len(accepted))


def ray_assemble(I: Coeffs, points: np.ndarray, order: int, center: np.ndarray) -> Coeffs:
    """Turn integrals ``I_ij`` into ``sum_{i<j} I_ij ((x-c)_i dx_j - (x-c)_j dx_i)``."""
    space = jet_space(DIM, order)
    ys = space.variables(points - center)
    out: Coeffs = {}
    for (i, j), Iij in I.items():
        for key, term in (((j,), Iij * ys[i]), ((i,), -(Iij * ys[j]))):
            out[key] = out[key] + term if key in out else term
    return out


def closedness_residual(form: FormField, points: np.ndarray) -> float:
    dc = d_coeffs(form.jets(points, 1), form.degree)
    return max((float(np.max(np.abs(v.value))) for v in dc.values()), default=0.0)


def ray_primitive(
    beta: FormField,
    rtol: float = 1e-10,
    check_points: int = 16,
    closed_tol: float = 1e-8,
    seed: int = 0,
) -> FormField:
    """Radial primitive of a closed 2-form on a star-shaped box."""
    if beta.degree != 2:
        raise FormError("ray_primitive expects a 2-form")
    center = beta.box.star_center()
    if check_points:
        pts = beta.box.sample(check_points, np.random.default_rng(seed))
        res = closedness_residual(beta, pts)
        if res > closed_tol:
            raise FormError(f"ray_primitive: input not closed (|d beta| = {res:.2e})")
    quad_log: list[QuadratureReport] = []

    def fn(points, order):
        I = ray_integral(beta.jets, points, order, center, rtol, report=quad_log)
        return ray_assemble(I, points, order, center)

    out = FormField(1, fn, beta.box, f"ray({beta.name})")
    out.quadrature_log = quad_log
    return out


def normal_correction(c: Coeffs, space_order: int, points: np.ndarray) -> Coeffs:
    """Linear-in-normal 1-form whose differential matches the normal part on the plane.

    For ``b = sum b_ij dx_i ^ dx_j`` this is
    ``-x3 (b13 dx1 + b23 dx2) - x4 (b14 dx1 + b24 dx2 + b34 dx3)``; at points
    of ``{x3 = x4 = 0}`` its differential reproduces every component of ``b``
    that involves ``dx3`` or ``dx4``.
    """
    space = jet_space(DIM, space_order)
    X = space.variables(points)
    get = lambda k: c[k].truncate(space_order) if k in c else None
    out: Coeffs = {}

    def acc(key, term):
        if term is not None:
            out[key] = out[key] + term if key in out else term

    b13, b23, b14, b24, b34 = get((0, 2)), get((1, 2)), get((0, 3)), get((1, 3)), get((2, 3))
    acc((0,), None if b13 is None else -(X[2] * b13))
    acc((0,), None if b14 is None else -(X[3] * b14))
    acc((1,), None if b23 is None else -(X[2] * b23))
    acc((1,), None if b24 is None else -(X[3] * b24))
    acc((2,), None if b34 is None else -(X[3] * b34))
    return out


def adapted_primitive(
    beta: FormField,
    rtol: float = 1e-10,
    check_points: int = 16,
    plane_tol: float = 1e-8,
    closed_tol: float = 1e-8,
    seed: int = 0,
    breaks: Sequence[float] = (),
) -> FormField:
    """Primitive of a closed 2-form that vanishes identically on ``{x3 = x4 = 0}``."""
    if beta.degree != 2:
        raise FormError("adapted_primitive expects a 2-form")
    center = beta.box.star_center()
    if center[2] != 0 or center[3] != 0:
        raise FormError("star center must lie on the plane x3 = x4 = 0")
    if check_points:
        rng = np.random.default_rng(seed)
        pts = beta.box.sample(check_points, rng)
        res = closedness_residual(beta, pts)
        if res > closed_tol:
            raise FormError(f"adapted_primitive: input not closed (|d beta| = {res:.2e})")
        plane = pts.copy()
        plane[:, 2:] = 0.0
        v = beta.values(plane)[:, 0]
        if np.max(np.abs(v)) > plane_tol:
            raise FormError(f"adapted_primitive: pullback to the plane does not vanish ({np.max(np.abs(v)):.2e})")

    def bar_jets(points, order):
        c = beta.jets(points, order + 1)
        theta = normal_correction(c, order + 1, points)
        dtheta = d_coeffs(theta, 1)
        return combine([{k: v.truncate(order) for k, v in c.items()}, dtheta], [1.0, -1.0])

    quad_log: list[QuadratureReport] = []

    def fn(points, order):
        I = ray_integral(bar_jets, points, order, center, rtol, report=quad_log, breaks=breaks)
        alpha = ray_assemble(I, points, order, center)
        theta = normal_correction(beta.jets(points, order), order, points)
        return combine([alpha, theta], [1.0, 1.0])

    out = FormField(1, fn, beta.box, f"adapted({beta.name})")
    out.quadrature_log = quad_log
    return out


# -- norms ------------------------------------------------------------------

def cn_norm_coeffs(c: Coeffs, N: int) -> float:
    """Sup over the batch of all partials of order ``<= N`` of all coefficients."""
    best = 0.0
    for v in c.values():
        p = v.truncate(N).partials()
        best = max(best, float(np.max(np.abs(p))))
    return best


def cn_norm(form: FormField, points: np.ndarray, N: int) -> float:
    return cn_norm_coeffs(form.jets(points, N), N)


def sup_difference(a: Coeffs, b: Coeffs) -> float:
    keys = set(a) | set(b)
    worst = 0.0
    for k in keys:
        va = a[k].coeffs if k in a else 0.0
        vb = b[k].coeffs if k in b else 0.0
        worst = max(worst, float(np.max(np.abs(np.asarray(va) - np.asarray(vb)))))
    return worst
