"""Truncated multivariate Taylor polynomials ("jets") with a batch dimension.

A :class:`Jet` stores the Taylor coefficients ``c[alpha] = d^alpha f / alpha!``
of a scalar function at a batch of base points, for all multi-indices
``|alpha| <= order``.  Arithmetic and the usual elementary functions act on
the coefficients exactly (up to rounding), which gives forward-mode
derivatives of any order without finite differences.

The coefficient axis is always the first one; everything after it is batch.
Real and complex coefficient arrays are both supported.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from functools import cache
from itertools import combinations_with_replacement

import numpy as np

try:
    import numba
except ImportError:  # pure numpy fallback
    numba = None

ArrayLike = np.ndarray | float | complex


if numba is not None:

    @numba.njit(cache=True)
    def _mul_kernel(a, b, left, right, target, out):
        n = a.shape[1]
        for p in range(left.shape[0]):
            i, j, k = left[p], right[p], target[p]
            for q in range(n):
                out[k, q] += a[i, q] * b[j, q]

else:
    _mul_kernel = None


class JetSpace:
    """Index bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        exps = []
        for deg in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), deg):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                exps.append(tuple(e))
        # combinations_with_replacement yields each exponent once per degree
        self.exponents = np.array(exps, dtype=np.int64).reshape(-1, nvars)
        self.size = len(exps)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degree = self.exponents.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(a) for a in e) for e in exps], dtype=float
        )

        left, right, target = [], [], []
        for i, ei in enumerate(exps):
            for j, ej in enumerate(exps):
                if self.degree[i] + self.degree[j] > order:
                    continue
                k = self.index[tuple(a + b for a, b in zip(ei, ej))]
                left.append(i)
                right.append(j)
                target.append(k)
        perm = np.argsort(np.array(target), kind="stable")
        self._left = np.array(left)[perm]
        self._right = np.array(right)[perm]
        tgt = np.array(target)[perm]
        self._target = tgt.astype(np.int64)
        self._starts = np.searchsorted(tgt, np.arange(self.size))

    # -- construction -------------------------------------------------
    def constant(self, value: ArrayLike) -> Jet:
        value = np.asarray(value)
        c = np.zeros((self.size,) + value.shape, dtype=np.result_type(value, float))
        c[0] = value
        return Jet(self, c)

    def variable(self, i: int, value: ArrayLike) -> Jet:
        jet = self.constant(value)
        e = [0] * self.nvars
        e[i] = 1
        if self.order > 0:
            jet.coeffs[self.index[tuple(e)]] = 1.0
        return jet

    def variables(self, point: np.ndarray) -> list[Jet]:
        """Coordinate jets at a batch of points of shape ``(..., nvars)``."""
        point = np.asarray(point)
        return [self.variable(i, point[..., i]) for i in range(self.nvars)]

    # -- coefficient maps --------------------------------------------
    # spaces are interned by jet_space, so these per-instance caches never outlive them
    @cache  # noqa: B019
    def _derivative_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        lower = jet_space(self.nvars, self.order - 1)
        src = np.empty(lower.size, dtype=np.int64)
        fac = np.empty(lower.size)
        for i, e in enumerate(lower.exponents):
            up = list(e)
            up[var] += 1
            src[i] = self.index[tuple(up)]
            fac[i] = up[var]
        return src, fac

    @cache  # noqa: B019
    def _shift_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Source and target indices for multiplication by the increment ``h_var``."""
        src, tgt = [], []
        for i, e in enumerate(self.exponents):
            if self.degree[i] < self.order:
                up = list(e)
                up[var] += 1
                src.append(i)
                tgt.append(self.index[tuple(up)])
        return np.array(src, dtype=np.int64), np.array(tgt, dtype=np.int64)

    @cache  # noqa: B019
    def _truncation_map(self, order: int) -> np.ndarray:
        return np.nonzero(self.degree <= order)[0]

    @cache  # noqa: B019
    def embedding(self, target: JetSpace, var_map: tuple[int, ...]) -> np.ndarray:
        """Target indices for embedding this space's monomials into ``target``."""
        out = np.empty(self.size, dtype=np.int64)
        for i, e in enumerate(self.exponents):
            t = [0] * target.nvars
            for v, a in enumerate(e):
                t[var_map[v]] += a
            out[i] = target.index[tuple(t)]
        return out


@cache
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


class Jet:
    """Taylor coefficients of a function at a batch of points."""

    __array_priority__ = 1000

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- basic properties --------------------------------------------
    @property
    def order(self) -> int:
        return self.space.order

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def real(self) -> Jet:
        return Jet(self.space, self.coeffs.real.copy())

    @property
    def imag(self) -> Jet:
        return Jet(self.space, self.coeffs.imag.copy())

    def conj(self) -> Jet:
        return Jet(self.space, np.conj(self.coeffs))

    def copy(self) -> Jet:
        return Jet(self.space, self.coeffs.copy())

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """The partial derivative ``d^alpha f`` at the base points."""
        i = self.space.index[tuple(alpha)]
        return self.coeffs[i] * self.space.factorial[i]

    def partials(self) -> np.ndarray:
        """All partial derivatives, indexed like the coefficients."""
        return self.coeffs * self.space.factorial.reshape((-1,) + (1,) * len(self.batch_shape))

    def truncate(self, order: int) -> Jet:
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        idx = self.space._truncation_map(order)
        return Jet(jet_space(self.space.nvars, order), self.coeffs[idx])

    def diff(self, var: int) -> Jet:
        """Partial derivative; the result has order one less."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.space._derivative_map(var)
        fac = fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(jet_space(self.space.nvars, self.order - 1), self.coeffs[src] * fac)

    def gradient(self) -> list[Jet]:
        return [self.diff(i) for i in range(self.space.nvars)]

    def embed(self, target: JetSpace, var_map: Sequence[int]) -> Jet:
        """View this jet as a jet in more variables (``var_map[v]`` = new index)."""
        if target.order != self.order:
            raise ValueError("embedding keeps the order")
        idx = self.space.embedding(target, tuple(var_map))
        c = np.zeros((target.size,) + self.batch_shape, dtype=self.coeffs.dtype)
        c[idx] = self.coeffs
        return Jet(target, c)

    def times_coordinate(self, var: int, base: ArrayLike) -> Jet:
        """Multiply by the coordinate jet ``base + h_var`` without a full product."""
        base = np.asarray(base)
        c = self.coeffs * base[None]
        src, tgt = self.space._shift_map(var)
        c = c.astype(np.result_type(c, self.coeffs), copy=False)
        c[tgt] += self.coeffs[src]
        return Jet(self.space, c)

    def scale_variables(self, factor: ArrayLike) -> Jet:
        """Substitute ``h -> factor * h`` (factor broadcast over the batch)."""
        factor = np.asarray(factor)
        deg = self.space.degree.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(self.space, self.coeffs * factor ** deg)

    def evaluate(self, offset: np.ndarray) -> np.ndarray:
        """Evaluate the Taylor polynomial at ``base + offset``."""
        offset = np.asarray(offset)
        mono = np.prod(offset[None, ...] ** self.space.exponents.reshape((-1,) + (1,) * (offset.ndim - 1) + (self.space.nvars,)), axis=-1)
        return np.sum(self.coeffs * mono, axis=0)

    def broadcast_to(self, batch_shape: tuple[int, ...]) -> Jet:
        return Jet(self.space, np.broadcast_to(self.coeffs, (self.space.size,) + batch_shape).copy())

    def __getitem__(self, key) -> Jet:
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.space, self.coeffs[(slice(None),) + key])

    # -- arithmetic ----------------------------------------------------
    def _coerce(self, other) -> Jet:
        if isinstance(other, Jet):
            return other
        return self.space.constant(other)

    def _align(self, other: Jet) -> tuple[Jet, Jet]:
        if other.space is self.space:
            return self, other
        if other.space.nvars != self.space.nvars:
            raise ValueError("jets in different numbers of variables")
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order)

    def __add__(self, other) -> Jet:
        if not isinstance(other, Jet):
            c = self.coeffs.astype(np.result_type(self.coeffs, np.asarray(other)), copy=True)
            c[0] = c[0] + other
            return Jet(self.space, c)
        a, b = self._align(other)
        return Jet(a.space, a.coeffs + b.coeffs)

    __radd__ = __add__

    def __neg__(self) -> Jet:
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other) -> Jet:
        return self + (-other)

    def __rsub__(self, other) -> Jet:
        return (-self) + other

    def __mul__(self, other) -> Jet:
        if not isinstance(other, Jet):
            other = np.asarray(other)
            return Jet(self.space, self.coeffs * other[None])
        a, b = self._align(other)
        sp = a.space
        if sp.order == 0:
            return Jet(sp, a.coeffs * b.coeffs)
        return Jet(sp, _product(a.coeffs, b.coeffs, sp))

    __rmul__ = __mul__

    def __truediv__(self, other) -> Jet:
        if not isinstance(other, Jet):
            other = np.asarray(other)
            return Jet(self.space, self.coeffs / other[None])
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> Jet:
        return self.reciprocal() * other

    def __pow__(self, p) -> Jet:
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = self.space.constant(np.ones(self.batch_shape, dtype=self.coeffs.dtype))
            base = self
            n = int(p)
            while n:
                if n & 1:
                    out = out * base
                n >>= 1
                if n:
                    base = base * base
            return out
        return power(self, float(p))

    # -- univariate composition ---------------------------------------
    def compose_univariate(self, derivs: Callable[[np.ndarray, int], list[np.ndarray]]) -> Jet:
        """Apply a scalar function given its derivatives at the base value.

        ``derivs(a0, K)`` must return ``[f(a0), f'(a0), ..., f^(K)(a0)]``.
        """
        a0 = self.value
        K = self.order
        ds = derivs(a0, K)
        h = self.copy()
        h.coeffs[0] = 0
        out = self.space.constant(ds[K] / math.factorial(K))
        for j in range(K - 1, -1, -1):
            out = out * h + ds[j] / math.factorial(j)
        return out

    def reciprocal(self) -> Jet:
        def derivs(a0, K):
            out = [1.0 / a0]
            for j in range(1, K + 1):
                out.append(-j * out[-1] / a0)
            return out

        return self.compose_univariate(derivs)


def _product(a: np.ndarray, b: np.ndarray, sp: JetSpace) -> np.ndarray:
    batch = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    n = math.prod(batch)
    if _mul_kernel is None or n < 32:
        prod = a[sp._left] * b[sp._right]
        return np.add.reduceat(prod, sp._starts, axis=0)
    dtype = np.result_type(a, b)
    a2 = np.ascontiguousarray(np.broadcast_to(a, (sp.size,) + batch), dtype=dtype).reshape(sp.size, n)
    b2 = np.ascontiguousarray(np.broadcast_to(b, (sp.size,) + batch), dtype=dtype).reshape(sp.size, n)
    out = np.zeros((sp.size, n), dtype=dtype)
    _mul_kernel(a2, b2, sp._left, sp._right, sp._target, out)
    return out.reshape((sp.size,) + batch)


# -- elementary functions ----------------------------------------------

def exp(x: Jet) -> Jet:
    return x.compose_univariate(lambda a, K: [np.exp(a)] * (K + 1))


def log(x: Jet) -> Jet:
    """Principal logarithm (numpy's branch for complex base values)."""

    def derivs(a, K):
        out = [np.log(a)]
        inv = 1.0 / a
        p = inv
        for j in range(1, K + 1):
            out.append((-1) ** (j - 1) * math.factorial(j - 1) * p)
            p = p * inv
        return out

    return x.compose_univariate(derivs)


def sin(x: Jet) -> Jet:
    def derivs(a, K):
        s, c = np.sin(a), np.cos(a)
        cyc = [s, c, -s, -c]
        return [cyc[j % 4] for j in range(K + 1)]

    return x.compose_univariate(derivs)


def cos(x: Jet) -> Jet:
    def derivs(a, K):
        s, c = np.sin(a), np.cos(a)
        cyc = [c, -s, -c, s]
        return [cyc[j % 4] for j in range(K + 1)]

    return x.compose_univariate(derivs)


def _logistic_polys(K: int) -> list[np.ndarray]:
    """Coefficients of ``P_n`` with ``sigma^(n) = P_n(sigma)``, ``n <= K``."""
    polys = [np.array([0.0, 1.0])]
    for _ in range(K):
        d = np.polynomial.polynomial.polyder(polys[-1])
        polys.append(np.polynomial.polynomial.polymul(d, [0.0, 1.0, -1.0]))
    return polys


def logistic(x: Jet) -> Jet:
    """``1 / (1 + exp(-x))`` for real jets, accurate in both tails."""

    def derivs(a, K):
        a = np.asarray(a, dtype=float)
        neg = -np.abs(a)
        with np.errstate(over="ignore"):
            s = np.exp(neg) / (1.0 + np.exp(neg))  # sigma(-|a|), never near 1
        polys = _logistic_polys(K)
        flip = a > 0
        out = [np.where(flip, 1.0 - s, s)]
        for n in range(1, K + 1):
            v = np.polynomial.polynomial.polyval(s, polys[n])
            out.append(np.where(flip, (-1.0) ** (n + 1) * v, v))
        return out

    return x.compose_univariate(derivs)


def power(x: Jet, p: float) -> Jet:
    """``x**p`` for real ``p`` (principal branch for complex base values)."""

    def derivs(a, K):
        out = []
        coef = 1.0
        for j in range(K + 1):
            out.append(coef * a ** (p - j))
            coef *= p - j
        return out

    return x.compose_univariate(derivs)


def sqrt(x: Jet) -> Jet:
    return power(x, 0.5)


# -- multivariate composition -------------------------------------------

def monomials(inner: Sequence[Jet], order: int) -> list[Jet]:
    """All products ``S^alpha`` for ``|alpha| <= order`` in graded order."""
    space = jet_space(len(inner), order)
    batch = np.broadcast_shapes(*[s.batch_shape for s in inner])
    dtype = np.result_type(*[s.coeffs for s in inner])
    one = inner[0].space.constant(np.ones(batch, dtype=dtype))
    out: list[Jet] = [one]
    for e in space.exponents[1:]:
        v = int(np.nonzero(e)[0][0])
        prev = list(e)
        prev[v] -= 1
        out.append(out[space.index[tuple(prev)]] * inner[v])
    return out


def compose(outer: Sequence[Jet], inner: Sequence[Jet]) -> list[Jet]:
    """Compose outer jets ``F(y0 + k)`` with inner jets ``k = S(h)``.

    The inner jets must have zero constant term (they are displacements).
    All outer jets share the same space; the result lives in the inner space
    truncated to the smaller of the two orders.
    """
    if not outer:
        return []
    ospace = outer[0].space
    if len(inner) != ospace.nvars:
        raise ValueError("inner jet count must match outer variable count")
    order = min(ospace.order, inner[0].order)
    inner = [s.truncate(order) for s in inner]
    inner = [Jet(s.space, s.coeffs.copy()) for s in inner]
    for s in inner:
        s.coeffs[0] = 0
    outer = [f.truncate(order) for f in outer]
    mono = monomials(inner, order)
    stack = np.stack([m.coeffs for m in mono], axis=0)  # (M_outer, M_inner, ...)
    out = []
    for f in outer:
        c = np.einsum("m...,mk...->k...", f.coeffs, stack)
        out.append(Jet(inner[0].space, c))
    return out


def stack_values(jets: Sequence[Jet]) -> np.ndarray:
    return np.stack([j.value for j in jets], axis=-1)
