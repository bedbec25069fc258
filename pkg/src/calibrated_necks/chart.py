"""Adapted coordinates along a graph surface in R^4.

For a graph ``{(x1, x2, zeta(x1, x2))}`` we build the orthonormal normal frame
``(xi, tau)`` by projecting ``e3, e4`` onto the normal space and applying
Gram-Schmidt, the chart ``Y(x) = (x1, x2, zeta) + x3 xi + x4 tau`` and its
inverse ``X = Y^{-1}`` (Newton iteration for values, Taylor-map inversion for
jets).  In ``X``-coordinates the surface is ``{X3 = X4 = 0}``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import jets
from .forms import Box, FormField, SmoothMap, pullback
from .jets import Jet, jet_space

ZetaFn = Callable[[np.ndarray, int], tuple[Jet, Jet]]

VALIDITY_BOX = Box((-8.0, -8.0, -8.0, -8.0), (8.0, 8.0, 8.0, 8.0))


class ChartError(RuntimeError):
    """Newton non-convergence or a degenerate frame."""


@dataclass
class GraphSurface:
    """Graph of ``zeta = (zeta1, zeta2)`` over a planar region.

    ``zeta_jets(points, order)`` returns the two component jets (2 variables)
    at planar points of shape ``(B, 2)``.  ``inner``/``outer`` describe the
    annulus on which the graph is meaningful (``inner = 0`` for a disk).
    """

    zeta_jets: ZetaFn
    inner: float = 0.0
    outer: float = np.inf

    @staticmethod
    def from_functions(f1: Callable[[list[Jet]], Jet], f2: Callable[[list[Jet]], Jet], inner: float = 0.0, outer: float = np.inf) -> GraphSurface:
        def fn(points, order):
            xs = jet_space(2, order).variables(points)
            out = []
            for f in (f1, f2):
                v = f(xs)
                if not isinstance(v, Jet):
                    v = xs[0] * 0.0 + v
                out.append(v)
            return out[0], out[1]

        return GraphSurface(fn, inner, outer)

    @staticmethod
    def flat() -> GraphSurface:
        return GraphSurface.from_functions(lambda xs: xs[0] * 0.0, lambda xs: xs[0] * 0.0)

    def values(self, points: np.ndarray) -> np.ndarray:
        z1, z2 = self.zeta_jets(np.atleast_2d(points), 0)
        return np.stack([z1.value, z2.value], axis=-1)

    def embed(self, points: np.ndarray) -> np.ndarray:
        """Surface points ``(x1, x2, zeta)`` in R^4."""
        points = np.atleast_2d(points)
        return np.concatenate([points, self.values(points)], axis=-1)


def _dot(a: list[Jet], b: list[Jet]) -> Jet:
    acc = a[0] * b[0]
    for i in range(1, len(a)):
        acc = acc + a[i] * b[i]
    return acc


def frame_jets(surface: GraphSurface, points: np.ndarray, order: int, guard: float = 1e-3) -> tuple[list[Jet], list[Jet], tuple[Jet, Jet]]:
    """Jets (2 variables, given order) of ``xi``, ``tau`` and ``zeta``."""
    z1, z2 = surface.zeta_jets(points, order + 1)
    d1z1, d2z1 = z1.diff(0), z1.diff(1)
    d1z2, d2z2 = z2.diff(0), z2.diff(1)
    zero = d1z1 * 0.0
    one = zero + 1.0
    T1 = [one, zero, d1z1, d1z2]
    T2 = [zero, one, d2z1, d2z2]
    g11 = _dot(T1, T1)
    g12 = _dot(T1, T2)
    g22 = _dot(T2, T2)
    inv_det = (g11 * g22 - g12 * g12).reciprocal()

    def project(e: int) -> list[Jet]:
        a1, a2 = T1[e], T2[e]  # T_i . e_e
        c1 = (g22 * a1 - g12 * a2) * inv_det
        c2 = (g11 * a2 - g12 * a1) * inv_det
        v = [-(c1 * T1[i]) - c2 * T2[i] for i in range(4)]
        v[e] = v[e] + 1.0
        return v

    n3 = project(2)
    n4 = project(3)
    norm3 = _dot(n3, n3)
    if np.any(norm3.value < guard):
        raise ChartError("degenerate normal projection of e3")
    inv3 = jets.power(norm3, -0.5)
    xi = [c * inv3 for c in n3]
    proj = _dot(n4, xi)
    t = [n4[i] - proj * xi[i] for i in range(4)]
    normt = _dot(t, t)
    if np.any(normt.value < guard):
        raise ChartError("degenerate normal projection of e4")
    invt = jets.power(normt, -0.5)
    tau = [c * invt for c in t]
    return xi, tau, (z1.truncate(order), z2.truncate(order))


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for (a, b), u in p.items():
        for (c, d), v in q.items():
            k = (a + c, b + d)
            out[k] = out[k] + u * v if k in out else u * v
    return out


def _poly_add(p: dict, q: dict) -> dict:
    out = dict(p)
    for k, v in q.items():
        out[k] = out[k] + v if k in out else v
    return out


def _poly_sub(p: dict, q: dict) -> dict:
    return _poly_add(p, {k: -v for k, v in q.items()})


def normal_polynomial(terms: dict[tuple[int, int], Jet], points: np.ndarray, order: int) -> Jet:
    """4-variable jet of ``sum c_ab(x1, x2) x3^a x4^b`` from 2-variable jets ``c_ab``."""
    sp4 = jet_space(4, order)
    out = None
    for (a, b), c in terms.items():
        j = c.truncate(order).embed(sp4, (0, 1))
        for _ in range(a):
            j = j.times_coordinate(2, points[:, 2])
        for _ in range(b):
            j = j.times_coordinate(3, points[:, 3])
        out = j if out is None else out + j
    return out


def normal_frame(surface: GraphSurface, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``xi`` and ``tau`` at planar points, each of shape ``(B, 4)``."""
    xi, tau, _ = frame_jets(surface, np.atleast_2d(points), 0)
    return np.stack([c.value for c in xi], axis=-1), np.stack([c.value for c in tau], axis=-1)


class ChartPair:
    """The chart ``Y`` adapted to a graph surface and its inverse ``X``."""

    def __init__(self, surface: GraphSurface, box: Box = VALIDITY_BOX, newton_tol: float = 1e-12, max_iter: int = 50):
        self.surface = surface
        self.box = box
        self.newton_tol = newton_tol
        self.max_iter = max_iter

    # -- forward map -------------------------------------------------
    def Y_jets(self, points: np.ndarray, order: int) -> list[Jet]:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        xi, tau, (z1, z2) = frame_jets(self.surface, points[:, :2], order)
        x = jet_space(2, order).variables(points[:, :2])
        base = [x[0], x[1], z1, z2]
        return [normal_polynomial({(0, 0): base[a], (1, 0): xi[a], (0, 1): tau[a]}, points, order) for a in range(4)]

    def omega0_jets(self, points: np.ndarray, order: int) -> dict[tuple[int, int], Jet]:
        """Coefficients of ``omega0`` in ``X``-coordinates, i.e. ``Y^* omega0``.

        ``DY`` is affine in ``(x3, x4)`` with coefficients depending on
        ``(x1, x2)``, so every product is taken between 2-variable jets and
        the result is a quadratic polynomial in the normal coordinates.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        xi, tau, (z1, z2) = frame_jets(self.surface, points[:, :2], order + 1)
        x = jet_space(2, order + 1).variables(points[:, :2])
        P = [x[0], x[1], z1, z2]
        cols = []
        for i in range(2):
            cols.append([{(0, 0): P[a].diff(i), (1, 0): xi[a].diff(i), (0, 1): tau[a].diff(i)} for a in range(4)])
        cols.append([{(0, 0): xi[a].truncate(order)} for a in range(4)])
        cols.append([{(0, 0): tau[a].truncate(order)} for a in range(4)])
        out = {}
        for i in range(4):
            for j in range(i + 1, 4):
                ci, cj = cols[i], cols[j]
                terms = _poly_add(
                    _poly_sub(_poly_mul(ci[0], cj[1]), _poly_mul(cj[0], ci[1])),
                    _poly_sub(_poly_mul(ci[2], cj[3]), _poly_mul(cj[2], ci[3])),
                )
                out[(i, j)] = normal_polynomial(terms, points, order)
        return out

    def Y(self, points: np.ndarray) -> np.ndarray:
        return np.stack([c.value for c in self.Y_jets(points, 0)], axis=-1)

    def DY(self, points: np.ndarray) -> np.ndarray:
        comps = self.Y_jets(points, 1)
        return np.stack([np.stack([c.coeffs[1 + i] for i in range(4)], axis=-1) for c in comps], axis=-2)

    @property
    def Y_map(self) -> SmoothMap:
        return SmoothMap(self.Y_jets, 4, self.box)

    # -- inverse -----------------------------------------------------
    def invert(self, p: np.ndarray) -> np.ndarray:
        """Newton iteration ``Y(x) = p`` from ``x = p``."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x = p.copy()
        active = np.ones(p.shape[0], dtype=bool)
        for _ in range(self.max_iter + 1):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                return x
            comps = self.Y_jets(x[idx], 1)
            r = np.stack([c.value for c in comps], axis=-1) - p[idx]
            done = np.max(np.abs(r), axis=-1) <= self.newton_tol
            active[idx[done]] = False
            todo = idx[~done]
            if todo.size == 0:
                return x
            J = np.stack([np.stack([c.coeffs[1 + i] for i in range(4)], axis=-1) for c in comps], axis=-2)
            step = np.linalg.solve(J[~done], r[~done][..., None])[..., 0]
            x[todo] -= step
        raise ChartError(f"Newton inversion did not converge for {int(active.sum())} points")

    def X_jets(self, p: np.ndarray, order: int) -> list[Jet]:
        """Jets of ``X`` at ``p`` in the Euclidean variables (Taylor-map inversion)."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x0 = self.invert(p)
        sp = jet_space(4, order)
        if order == 0:
            return [sp.constant(x0[:, i]) for i in range(4)]
        Yc = self.Y_jets(x0, order)
        A = np.stack([np.stack([c.coeffs[1 + i] for i in range(4)], axis=-1) for c in Yc], axis=-2)
        Ainv = np.linalg.inv(A)
        k = sp.variables(np.zeros_like(p))
        disp = [c - c.value for c in Yc]

        def apply_inv(v: list[Jet]) -> list[Jet]:
            return [sum((v[j] * Ainv[:, i, j] for j in range(1, 4)), v[0] * Ainv[:, i, 0]) for i in range(4)]

        S = apply_inv(k)
        for _ in range(order - 1):
            DS = jets.compose(disp, S)
            S = [S[i] - r for i, r in enumerate(apply_inv([DS[a] - k[a] for a in range(4)]))]
        return [S[i] + x0[:, i] for i in range(4)]

    @property
    def X_map(self) -> SmoothMap:
        return SmoothMap(self.X_jets, 4)

    # -- transport ---------------------------------------------------
    def to_euclidean(self, form_in_X: FormField) -> FormField:
        """Express a form given in ``X``-coordinates in Euclidean coordinates."""
        return pullback(form_in_X, self.X_map)

    def to_adapted(self, form_euclidean: FormField, constant_coefficients: bool = False) -> FormField:
        """Express a Euclidean form in ``X``-coordinates (pullback by ``Y``)."""
        out = pullback(form_euclidean, self.Y_map, constant_coefficients)
        out.box = self.box
        return out


def build_Y(surface: GraphSurface) -> ChartPair:
    return ChartPair(surface)


def invert_X(chart: ChartPair, p: np.ndarray) -> np.ndarray:
    return chart.invert(p)
