"""Metric and almost complex structure synthesized from a nondegenerate 2-form.

For a 2-form with matrix ``W`` (``omega(v, w) = v^T W w``) we set ``A = -W`` so
that ``omega(v, w) = -<v, A w>``, take the positive square root ``S`` of
``Q = -A^2 = A A^T`` and define ``g = S`` (as a Gram matrix) and
``J = S^{-1} A``.  Then ``J^2 = -Id``, ``g(J., J.) = g`` and
``omega = -g(., J.)``; at ``omega0`` this returns the Euclidean pair.

The module also provides Wirtinger comass sampling and the calibration and
tangent-invariance residuals of parametrized surface pieces.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .forms import FormField
from .jets import Jet, JetSpace, jet_space

DELTA = np.eye(4)
J0 = np.array([[0.0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
OMEGA0 = -J0
EIGEN_CLAMP = 1e-12


class DegenerateFormError(ValueError):
    """``-A^2`` is not positive definite."""


@dataclass(frozen=True)
class EuclideanConstants:
    delta: np.ndarray = DELTA
    J0: np.ndarray = J0
    omega0: np.ndarray = OMEGA0

    def identity_residual(self) -> float:
        """``max |omega0(e_i, e_j) + delta(e_i, J0 e_j)|``."""
        return float(np.max(np.abs(self.omega0 + self.delta @ self.J0)))


def skew_field(omega: FormField | np.ndarray, points: np.ndarray | None = None) -> np.ndarray:
    """``A`` with ``omega(v, w) = -<v, A w>``; accepts a form field or its matrices."""
    W = omega.matrix(np.atleast_2d(points)) if isinstance(omega, FormField) else np.asarray(omega)
    return -W


@dataclass
class ACSField:
    """Pointwise ``(omega, A, g, J)`` on a batch of points."""

    omega: np.ndarray
    A: np.ndarray
    g: np.ndarray
    J: np.ndarray
    clamped: int = 0

    def identity_residuals(self, n_pairs: int = 16, seed: int = 0) -> dict[str, float]:
        """Worst residuals of the six defining identities over random vector pairs."""
        rng = np.random.default_rng(seed)
        A, g, J = self.A, self.g, self.J
        I = np.eye(4)
        Q = -A @ A
        v = rng.standard_normal(A.shape[:-2] + (n_pairs, 4))
        w = rng.standard_normal(A.shape[:-2] + (n_pairs, 4))
        gvw = np.einsum("...pi,...ij,...pj->...p", v, g, w)
        Jv = np.einsum("...ij,...pj->...pi", J, v)
        Jw = np.einsum("...ij,...pj->...pi", J, w)
        gJJ = np.einsum("...pi,...ij,...pj->...p", Jv, g, Jw)
        om = np.einsum("...pi,...ij,...pj->...p", v, self.omega, w)
        gvJw = np.einsum("...pi,...ij,...pj->...p", v, g, Jw)
        return {
            "skew": float(np.max(np.abs(A + np.swapaxes(A, -1, -2)))),
            "Q_is_AAt": float(np.max(np.abs(Q - A @ np.swapaxes(A, -1, -2)))),
            "sqrt": float(np.max(np.abs(g @ g - Q))),
            "J_squared": float(np.max(np.abs(J @ J + I))),
            "isometry": float(np.max(np.abs(gJJ - gvw))),
            "compatibility": float(np.max(np.abs(om + gvJw))),
        }


def _spd_sqrt(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Square root and inverse square root of symmetric positive ``Q`` (batched)."""
    Qs = 0.5 * (Q + np.swapaxes(Q, -1, -2))
    lam, V = np.linalg.eigh(Qs)
    clamped = int(np.sum(lam < EIGEN_CLAMP))
    if np.any(lam <= 0.0):
        raise DegenerateFormError(f"-A^2 is not positive definite (smallest eigenvalue {lam.min():.3e})")
    lam = np.maximum(lam, EIGEN_CLAMP)
    r = np.sqrt(lam)
    S = np.einsum("...ik,...k,...jk->...ij", V, r, V)
    Sinv = np.einsum("...ik,...k,...jk->...ij", V, 1.0 / r, V)
    return S, Sinv, clamped


def polar_acs(A: np.ndarray, omega: np.ndarray | None = None) -> ACSField:
    """Polar decomposition ``A = S J`` with ``S = (-A^2)^{1/2}``."""
    A = np.asarray(A, dtype=float)
    S, Sinv, clamped = _spd_sqrt(-A @ A)
    J = Sinv @ A
    return ACSField(-A if omega is None else omega, A, S, J, clamped)


def acs_from_omega(W: np.ndarray) -> ACSField:
    W = np.asarray(W, dtype=float)
    return polar_acs(-W, W)


# -- jets of the polar decomposition ------------------------------------------

def _jet_matmul(a: np.ndarray, b: np.ndarray, sp: JetSpace) -> np.ndarray:
    """Product of matrix-valued jets stored as ``(M, ..., n, n)``."""
    if sp.order == 0:
        return a @ b
    prod = a[sp._left] @ b[sp._right]
    return np.add.reduceat(prod, sp._starts, axis=0)


def _sylvester(V: np.ndarray, lam: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Solve ``S0 X + X S0 = R`` for ``S0 = V diag(lam) V^T`` (batched over leading axes)."""
    Rt = np.swapaxes(V, -1, -2) @ R @ V
    X = Rt / (lam[..., :, None] + lam[..., None, :])
    return V @ X @ np.swapaxes(V, -1, -2)


def polar_jets(A: np.ndarray, sp: JetSpace) -> tuple[np.ndarray, np.ndarray]:
    """Jets of ``S = (-A^2)^{1/2}`` and ``J = S^{-1} A`` from jets of ``A``.

    ``A`` has shape ``(M, B, 4, 4)``.  The square root is corrected order by
    order with the Sylvester equation ``S0 dS + dS S0 = Q - S S``.
    """
    Q = -_jet_matmul(A, A, sp)
    lam, V = np.linalg.eigh(0.5 * (Q[0] + np.swapaxes(Q[0], -1, -2)))
    if np.any(lam <= 0.0):
        raise DegenerateFormError("-A^2 is not positive definite")
    r = np.sqrt(np.maximum(lam, EIGEN_CLAMP))
    S = np.zeros_like(Q)
    S[0] = np.einsum("...ik,...k,...jk->...ij", V, r, V)
    for _ in range(sp.order):
        R = Q - _jet_matmul(S, S, sp)
        R[0] = 0.0
        S = S + _sylvester(V[None], r[None], R)
    Sinv = np.zeros_like(S)
    Sinv[0] = np.einsum("...ik,...k,...jk->...ij", V, 1.0 / r, V)
    eye = np.zeros_like(S)
    eye[0] = np.eye(4)
    for _ in range(sp.order):
        Sinv = Sinv + Sinv[0][None] @ (eye - _jet_matmul(S, Sinv, sp))
    J = _jet_matmul(Sinv, A, sp)
    return S, J


def omega_matrix_jets(coeffs: dict[tuple[int, int], Jet], order: int) -> tuple[np.ndarray, JetSpace]:
    """Matrix-valued jet ``(M, B, 4, 4)`` of a 2-form from its coefficient jets."""
    sp = jet_space(4, order)
    some = next(iter(coeffs.values()))
    B = some.batch_shape
    W = np.zeros((sp.size,) + B + (4, 4))
    for (i, j), v in coeffs.items():
        c = v.truncate(order).coeffs
        W[..., i, j] += c
        W[..., j, i] -= c
    return W, sp


def metric_jets(omega: FormField, points: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray, JetSpace]:
    """Jets of the Gram matrix ``g`` and of ``J`` synthesized from ``omega``."""
    W, sp = omega_matrix_jets(omega.jets(np.atleast_2d(points), order), order)
    S, J = polar_jets(-W, sp)
    return S, J, sp


def metric_deviation_cn(omega: FormField, points: np.ndarray, order: int) -> float:
    """Grid sup of all partials of order ``<= order`` of ``g - delta``."""
    S, _, sp = metric_jets(omega, points, order)
    S = S.copy()
    S[0] -= np.eye(4)
    fac = sp.factorial.reshape((-1,) + (1,) * (S.ndim - 1))
    return float(np.max(np.abs(S * fac)))


# -- comass and calibration ------------------------------------------------------

@dataclass
class ComassResult:
    sampled: float
    candidate: float

    @property
    def value(self) -> float:
        return max(self.sampled, self.candidate)


def _wedge_norm(v: np.ndarray, w: np.ndarray, g: np.ndarray) -> np.ndarray:
    gvv = np.einsum("...i,ij,...j->...", v, g, v)
    gww = np.einsum("...i,ij,...j->...", w, g, w)
    gvw = np.einsum("...i,ij,...j->...", v, g, w)
    return np.sqrt(np.maximum(gvv * gww - gvw * gvw, 0.0))


def wirtinger_comass(W: np.ndarray, g: np.ndarray, J: np.ndarray, n_samples: int = 10_000, seed: int = 0) -> ComassResult:
    """Sampled ``sup omega(v, w)`` over unit simple 2-vectors at one point.

    Random pairs are normalized by ``|v ^ w|_g``; near-degenerate pairs are
    resampled.  The candidate ``(v, J v)`` attains the supremum.
    """
    rng = np.random.default_rng(seed)
    best = -np.inf
    remaining = n_samples
    while remaining > 0:
        v = rng.standard_normal((remaining, 4))
        w = rng.standard_normal((remaining, 4))
        norm = _wedge_norm(v, w, g)
        ok = norm > 1e-6 * np.sqrt(np.einsum("pi,pi->p", v, v) * np.einsum("pi,pi->p", w, w))
        if np.any(ok):
            vals = np.einsum("pi,ij,pj->p", v[ok], W, w[ok]) / norm[ok]
            best = max(best, float(vals.max()))
        remaining -= int(ok.sum())
    v = rng.standard_normal(4)
    Jv = J @ v
    cand = float(v @ W @ Jv / _wedge_norm(v, Jv, g))
    return ComassResult(best, cand)


@dataclass
class SurfacePatch:
    """A parametrized surface piece ``Phi: (s, t) -> R^4``.

    ``fn`` maps a list of two parameter jets to four coordinate jets, so the
    same code yields points and exact tangents.
    """

    fn: Callable[[list[Jet]], list[Jet]]
    name: str = "patch"

    def evaluate(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points and the tangents ``d Phi / ds``, ``d Phi / dt``."""
        x = jet_space(2, 1).variables(np.atleast_2d(params))
        comps = self.fn(x)
        pts = np.stack([np.asarray(c.value).real for c in comps], axis=-1)
        d1 = np.stack([np.asarray(c.coeffs[1]).real for c in comps], axis=-1)
        d2 = np.stack([np.asarray(c.coeffs[2]).real for c in comps], axis=-1)
        return pts, d1, d2


MatrixField = Callable[[np.ndarray], np.ndarray]


def euclidean_fields() -> tuple[MatrixField, MatrixField, MatrixField]:
    """``omega0``, ``delta`` and ``J0`` as constant matrix fields."""
    const = lambda M: (lambda p: np.broadcast_to(M, np.atleast_2d(p).shape[:-1] + (4, 4)))
    return const(OMEGA0), const(DELTA), const(J0)


def area_density(d1: np.ndarray, d2: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``|d1 ^ d2|_g`` per point."""
    g11 = np.einsum("bi,bij,bj->b", d1, g, d1)
    g22 = np.einsum("bi,bij,bj->b", d2, g, d2)
    g12 = np.einsum("bi,bij,bj->b", d1, g, d2)
    return np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))


def flux_density(d1: np.ndarray, d2: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``omega(d1, d2)`` per point."""
    return np.einsum("bi,bij,bj->b", d1, W, d2)


def calibration_defect(points: np.ndarray, d1: np.ndarray, d2: np.ndarray, W: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``omega(d1, d2) - |d1 ^ d2|_g`` per point (zero when calibrated)."""
    return flux_density(d1, d2, W) - area_density(d1, d2, g)


def calibration_residual(patch: SurfacePatch, params: np.ndarray, omega: MatrixField, metric: MatrixField) -> float:
    """Sup of ``|omega(d1, d2) - |d1 ^ d2|_g|`` over the parameter samples."""
    pts, d1, d2 = patch.evaluate(params)
    if np.any(np.linalg.norm(d1, axis=-1) == 0) or np.any(np.linalg.norm(d2, axis=-1) == 0):
        raise ValueError("degenerate tangents")
    return float(np.max(np.abs(calibration_defect(pts, d1, d2, omega(pts), metric(pts)))))


def tangent_invariance_defect(d1: np.ndarray, d2: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Euclidean norm of the normal part of ``J e`` for unit tangents ``e``."""
    e1 = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
    u = d2 - np.sum(d2 * e1, axis=-1, keepdims=True) * e1
    e2 = u / np.linalg.norm(u, axis=-1, keepdims=True)
    worst = np.zeros(d1.shape[0])
    for e in (e1, e2):
        Je = np.einsum("bij,bj->bi", J, e)
        normal = Je - np.sum(Je * e1, axis=-1, keepdims=True) * e1 - np.sum(Je * e2, axis=-1, keepdims=True) * e2
        worst = np.maximum(worst, np.linalg.norm(normal, axis=-1))
    return worst


def j_preserves_tangent(patch: SurfacePatch, params: np.ndarray, J: MatrixField, tol: float = 1e-8) -> tuple[bool, float]:
    pts, d1, d2 = patch.evaluate(params)
    res = float(np.max(tangent_invariance_defect(d1, d2, J(pts))))
    return res <= tol, res
