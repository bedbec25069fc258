"""Holomorphic seed data on the slit plane.

The slit plane is ``C`` minus the closed negative real axis.  On it we use the
principal logarithm, the power ``z**(-alpha) = exp(-alpha Log z)``, the
factors ``f_k(z) = exp(-z**(-alpha)) sin(Log z + c_k pi i)``, their product
``g`` and the seed map ``G(z) = (z**m, g(z))`` into ``C^2 = R^4``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import jets
from .jets import Jet


class Variant(str, enum.Enum):
    QUADRATIC = "quadratic"
    BRANCHED = "branched"


@dataclass(frozen=True)
class SlitConfig:
    """Exponent and factor layout of the seed function."""

    alpha: float = 0.25
    variant: Variant = Variant.QUADRATIC

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def n_factors(self) -> int:
        return 4 if self.variant is Variant.QUADRATIC else 8

    @property
    def power(self) -> int:
        """Exponent ``m`` of the first coordinate of the seed map."""
        return 3 if self.variant is Variant.QUADRATIC else 7

    @property
    def sheets(self) -> int:
        """Number of zero branches meeting at each singular image."""
        return 2 if self.variant is Variant.QUADRATIC else 4

    def phase(self, k: int) -> float:
        """Offset ``c_k`` such that the k-th factor is ``sin(Log z + c_k pi i)``."""
        if not 0 <= k < self.n_factors:
            raise ValueError(f"factor index {k} out of range")
        if self.variant is Variant.QUADRATIC:
            return (3 - 2 * k) / 6
        return (7 - 2 * k) / 14

    def zero_angle(self, k: int) -> float:
        """Argument of the zeros of the k-th factor."""
        return -self.phase(k) * math.pi


def _on_cut(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0) & (z.real <= 0)


def log_slit(z):
    """Principal logarithm on the slit plane, imaginary part in ``(-pi, pi)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(_on_cut(z)):
        raise ValueError("log_slit: argument on the cut (-inf, 0]")
    return np.log(z)


def pow_neg_alpha(z, cfg: SlitConfig):
    return np.exp(-cfg.alpha * log_slit(z))


def f_factor(z, k: int, cfg: SlitConfig):
    """The k-th factor; extended by zero at the origin."""
    z = np.asarray(z, dtype=complex)
    zero = z == 0
    if np.any(_on_cut(z) & ~zero):
        raise ValueError("f_factor: argument on the cut")
    safe = np.where(zero, 1.0, z)
    L = np.log(safe)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.exp(-np.exp(-cfg.alpha * L)) * np.sin(L + cfg.phase(k) * math.pi * 1j)
    return np.where(zero, 0.0, val)


def g_product(z, cfg: SlitConfig):
    z = np.asarray(z, dtype=complex)
    out = np.ones(z.shape, dtype=complex)
    for k in range(cfg.n_factors):
        out = out * f_factor(z, k, cfg)
    return out


def g_jet(z: Jet, cfg: SlitConfig) -> Jet:
    """``g`` applied to a complex jet whose base values lie off the cut."""
    if np.any(_on_cut(np.asarray(z.value, dtype=complex))):
        raise ValueError("g_jet: base point on the cut")
    L = jets.log(z)
    decay = jets.exp(-jets.exp(L * (-cfg.alpha)))
    out = None
    for k in range(cfg.n_factors):
        fk = decay * jets.sin(L + cfg.phase(k) * math.pi * 1j)
        out = fk if out is None else out * fk
    return out


def seed_map(z, cfg: SlitConfig) -> np.ndarray:
    """``G(z) = (z**m, g(z))`` as real 4-vectors ``(Re, Im, Re, Im)``."""
    z = np.asarray(z, dtype=complex)
    w1 = z ** cfg.power
    w2 = g_product(z, cfg)
    return np.stack([w1.real, w1.imag, w2.real, w2.imag], axis=-1)


def seed_map_complex(z, cfg: SlitConfig) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=complex)
    return z ** cfg.power, g_product(z, cfg)


# -- extended precision ---------------------------------------------------

def g_product_mp(z, cfg: SlitConfig):
    """``g`` in mpmath arithmetic at the current working precision."""
    z = mpmath.mpc(z)
    if z == 0:
        return mpmath.mpc(0)
    if z.imag == 0 and z.real < 0:
        raise ValueError("g_product_mp: argument on the cut")
    L = mpmath.log(z)
    decay = mpmath.exp(-mpmath.exp(-cfg.alpha * L))
    out = mpmath.mpc(1)
    for k in range(cfg.n_factors):
        out *= decay * mpmath.sin(L + cfg.phase(k) * mpmath.pi * 1j)
    return out


def zero_point_mp(n: int, k: int, cfg: SlitConfig):
    """The zero ``exp(n pi + i * angle_k)`` of the k-th factor, in mpmath."""
    return mpmath.exp(n * mpmath.pi + 1j * (-cfg.phase(k)) * mpmath.pi)


# -- domain curve ---------------------------------------------------------

@dataclass(frozen=True)
class DomainCurve:
    """The quartic ``F(x, y) = (x - r + mu y^2)^2 + y^2 - r^2`` bounding ``D``."""

    r: float = 0.5
    mu: float = 2.0

    def __post_init__(self):
        if self.r <= 0 or self.mu <= 0:
            raise ValueError("r and mu must be positive")
        if self.mu <= 1.0 / (2.0 * self.r):
            raise ValueError("need mu > 1/(2r) so that the curve bulges into Re z < 0")

    def F(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        return (x - self.r + self.mu * y * y) ** 2 + y * y - self.r ** 2

    def grad_F(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        u = x - self.r + self.mu * y * y
        return 2 * u, 2 * u * 2 * self.mu * y + 2 * y

    def in_disk(self, z) -> np.ndarray:
        return self.F(z) < 0

    @property
    def imaginary_axis_threshold(self) -> float:
        """Imaginary-axis points ``iy`` with ``0 < |y| <`` this value lie in ``D``."""
        return math.sqrt(2 * self.r * self.mu - 1) / self.mu

    def gamma(self, t) -> np.ndarray:
        """Closed parametrization, ``t`` in ``[0, 2 pi]``, through 0 at both ends."""
        t = np.asarray(t, dtype=float)
        y = -self.r * np.sin(t)
        x = self.r - self.mu * y * y - self.r * np.cos(t)
        return x + 1j * y

    def gamma_prime(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        y = -self.r * np.sin(t)
        dy = -self.r * np.cos(t)
        dx = -2 * self.mu * y * dy + self.r * np.sin(t)
        return dx + 1j * dy

    def branches(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Left and right ``x`` limits of ``D`` on the horizontal line ``Im z = y``."""
        y = np.asarray(y, dtype=float)
        root = np.sqrt(np.maximum(self.r ** 2 - y * y, 0.0))
        mid = self.r - self.mu * y * y
        return mid - root, mid + root

    def disk_point(self, s, u) -> np.ndarray:
        """Map of the unit square onto ``D``: ``s`` in ``[-1, 1]`` (height), ``u`` in ``[0, 1]``."""
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)
        y = self.r * np.sin(0.5 * math.pi * s)
        lo, hi = self.branches(y)
        return lo + u * (hi - lo) + 1j * y

    def wedge_violation(self, samples: int = 4001) -> float:
        """Largest value of ``-Re z - |Im z|`` along the curve (``<= 0`` means inside ``K_1``)."""
        z = self.gamma(np.linspace(0.0, 2 * math.pi, samples))
        return float(np.max(-z.real - np.abs(z.imag)))


def curve_gamma(t, curve: DomainCurve) -> np.ndarray:
    return curve.gamma(t)


def in_disk(z, curve: DomainCurve) -> np.ndarray:
    return curve.in_disk(z)


@dataclass(frozen=True)
class ZeroPoint:
    """A zero of ``g`` together with its labels."""

    z: complex
    n: int
    k: int


def zero_candidates(cfg: SlitConfig, z_min: float, n_max: int = 1) -> list[ZeroPoint]:
    """All points ``exp(n pi + i angle_k)`` with modulus at least ``z_min``."""
    if z_min <= 0:
        raise ValueError("z_min must be positive")
    n_min = math.ceil(math.log(z_min) / math.pi - 1e-12)
    out = []
    for n in range(n_max, n_min - 1, -1):
        for k in range(cfg.n_factors):
            z = complex(np.exp(n * math.pi + 1j * cfg.zero_angle(k)))
            out.append(ZeroPoint(z, n, k))
    return out


def zeros_in_disk(cfg: SlitConfig, curve: DomainCurve, z_min: float) -> list[ZeroPoint]:
    """Zeros of ``g`` inside ``D`` with ``|z| >= z_min``, by decreasing modulus.

    Ties in modulus are broken by increasing argument, which makes the
    ordering deterministic.
    """
    pts = [p for p in zero_candidates(cfg, z_min) if curve.in_disk(p.z)]
    pts.sort(key=lambda p: (-p.n, cfg.zero_angle(p.k)))
    return pts


def zero_set_residual(cfg: SlitConfig, z_min: float) -> float:
    """Largest ``|g|`` over the truncated zero set."""
    z = np.array([p.z for p in zero_candidates(cfg, z_min)])
    return float(np.max(np.abs(g_product(z, cfg)))) if z.size else 0.0


def cauchy_riemann_residual(func, z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Relative residual of ``f_x + i f_y = 0`` by central differences."""
    z = np.asarray(z, dtype=complex)
    fx = (func(z + h) - func(z - h)) / (2 * h)
    fy = (func(z + 1j * h) - func(z - 1j * h)) / (2 * h)
    scale = np.maximum(np.abs(fx) + np.abs(fy), 1e-300)
    return np.abs(fx + 1j * fy) / scale


def property_a_margin(cfg: SlitConfig, curve: DomainCurve, z_min: float) -> float:
    """Smallest ``|F|`` over the truncated zero set (``> 0`` means no zero on the curve)."""
    z = np.array([p.z for p in zero_candidates(cfg, z_min)])
    return float(np.min(np.abs(curve.F(z))))
