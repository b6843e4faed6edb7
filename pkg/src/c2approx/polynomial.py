"""Chebyshev-basis polynomials in one and several variables.

All polynomials are stored in a Chebyshev basis on an explicit interval
or box, which keeps evaluation well conditioned at the degrees used by
the partitions of unity (several hundred in one variable).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iproduct
from math import comb

import numpy as np
from numpy.polynomial import chebyshev as C

from ._kernels import clenshaw, total_vander


def total_degree_exponents(n: int, dim: int) -> np.ndarray:
    """Multi-indices of total degree ``<= n`` sorted by degree, then lexicographically.

    The degree ordering makes the first ``comb(k + dim, dim)`` rows span
    the polynomials of total degree ``<= k`` for every ``k <= n``.
    """
    rows = [e for e in iproduct(range(n + 1), repeat=dim) if sum(e) <= n]
    rows.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.array(rows, dtype=np.int64).reshape(-1, dim)


def n_basis(n: int, dim: int) -> int:
    return comb(n + dim, dim)


def to_reference(x, lo, hi):
    """Affine map of ``[lo, hi]`` onto ``[-1, 1]`` (componentwise)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return (2.0 * np.asarray(x, dtype=float) - lo - hi) / (hi - lo)


def cheb_nodes(k: int) -> np.ndarray:
    """First-kind Chebyshev nodes on [-1, 1], ``k`` of them."""
    return np.cos(np.pi * (np.arange(k) + 0.5) / k)[::-1]


class Polynomial1D:
    """Chebyshev series on an interval ``[a, b]``.

    Parameters
    ----------
    coef : array_like
        Coefficients of ``T_0, T_1, ...`` in the reference variable.
    interval : tuple of float
        The interval mapped onto ``[-1, 1]``.
    """

    def __init__(self, coef, interval=(-1.0, 1.0)):
        self.coef = np.atleast_1d(np.asarray(coef, dtype=float)).copy()
        self.interval = (float(interval[0]), float(interval[1]))

    @property
    def degree(self) -> int:
        return max(len(self.coef) - 1, 0)

    def measured_degree(self, rtol: float = 1e-12) -> int:
        c = np.abs(self.coef)
        scale = c.max() if c.size else 0.0
        nz = np.nonzero(c > rtol * scale)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        a, b = self.interval
        t = (2.0 * np.asarray(x, dtype=float) - a - b) / (b - a)
        return clenshaw(self.coef, t)

    def deriv(self, m: int = 1) -> "Polynomial1D":
        a, b = self.interval
        return Polynomial1D(C.chebder(self.coef, m, scl=2.0 / (b - a)), self.interval)

    def _coerce(self, other):
        if isinstance(other, Polynomial1D):
            if other.interval != self.interval:
                raise ValueError("interval mismatch")
            return other.coef
        return np.array([float(other)])

    def __add__(self, other):
        return Polynomial1D(C.chebadd(self.coef, self._coerce(other)), self.interval)

    __radd__ = __add__

    def __sub__(self, other):
        return Polynomial1D(C.chebsub(self.coef, self._coerce(other)), self.interval)

    def __rsub__(self, other):
        return Polynomial1D(C.chebsub(self._coerce(other), self.coef), self.interval)

    def __mul__(self, other):
        return Polynomial1D(C.chebmul(self.coef, self._coerce(other)), self.interval)

    __rmul__ = __mul__

    def __neg__(self):
        return Polynomial1D(-self.coef, self.interval)

    def __repr__(self):
        return f"Polynomial1D(degree={self.degree}, interval={self.interval})"


class MultiPolynomial:
    """Polynomial of total degree ``<= n`` in ``dim`` variables.

    Coefficients live in a dense tensor ``coef[k_1, ..., k_dim]`` of the
    products ``T_{k_1}(x_1) ... T_{k_dim}(x_dim)`` in the reference
    variables of the box ``[lo, hi]``; entries with ``sum(k) > n`` are zero.
    """

    def __init__(self, coef, lo, hi, degree: int | None = None):
        coef = np.asarray(coef, dtype=float)
        self.dim = coef.ndim
        self.lo = np.asarray(lo, dtype=float).reshape(self.dim)
        self.hi = np.asarray(hi, dtype=float).reshape(self.dim)
        if degree is None:
            degree = sum(s - 1 for s in coef.shape)
        self.n = int(degree)
        size = self.n + 1
        full = np.zeros((size,) * self.dim)
        sl = tuple(slice(0, min(s, size)) for s in coef.shape)
        full[sl] = coef[sl]
        # zero the entries above the total degree
        grid = np.indices(full.shape).sum(axis=0)
        full[grid > self.n] = 0.0
        self.coef = full

    # ------------------------------------------------------------ builders
    @classmethod
    def from_basis(cls, exps, values, lo, hi, degree: int):
        exps = np.asarray(exps)
        dim = exps.shape[1]
        coef = np.zeros((degree + 1,) * dim)
        for e, v in zip(exps, values):
            coef[tuple(e)] += v
        return cls(coef, lo, hi, degree)

    @classmethod
    def constant(cls, value, lo, hi):
        dim = np.asarray(lo).size
        return cls(np.full((1,) * dim, float(value)), lo, hi, 0)

    @classmethod
    def interpolate(cls, func, degree: int, lo, hi):
        """Exact coefficients of a polynomial of total degree ``<= degree``.

        ``func`` is sampled on the tensor Chebyshev grid and transformed;
        the result is exact (to roundoff) when ``func`` is such a polynomial.
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        dim = lo.size
        k = degree + 1
        t = cheb_nodes(k)
        mesh = np.meshgrid(*([t] * dim), indexing="ij")
        ref = np.stack([m.reshape(-1) for m in mesh], axis=1)
        pts = lo + (ref + 1.0) * (hi - lo) / 2.0
        vals = np.asarray(func(pts), dtype=float).reshape((k,) * dim)
        inv = np.linalg.inv(C.chebvander(t, degree))
        coef = vals
        for ax in range(dim):
            coef = np.moveaxis(np.tensordot(inv, np.moveaxis(coef, ax, 0), axes=(1, 0)), 0, ax)
        return cls(coef, lo, hi, degree)

    # ------------------------------------------------------------ queries
    @property
    def degree(self) -> int:
        return self.n

    @property
    def n_coefficients(self) -> int:
        return n_basis(self.n, self.dim)

    def basis_coefficients(self):
        exps = total_degree_exponents(self.n, self.dim)
        return exps, self.coef[tuple(exps.T)]

    def measured_degree(self, rtol: float = 1e-12) -> int:
        """Largest total degree whose coefficient shell exceeds ``rtol`` relative."""
        c = np.abs(self.coef)
        scale = c.max()
        if scale == 0:
            return 0
        shells = np.indices(c.shape).sum(axis=0)
        active = shells[c > rtol * scale]
        return int(active.max()) if active.size else 0

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            pts = pts.reshape(-1, self.dim)
        ref = to_reference(pts, self.lo, self.hi)
        exps, vals = self.basis_coefficients()
        return total_vander(ref, exps) @ vals

    def deriv(self, axis: int, m: int = 1) -> "MultiPolynomial":
        if m == 0:
            return self
        scl = 2.0 / (self.hi[axis] - self.lo[axis])
        c = C.chebder(self.coef, m, scl=scl, axis=axis)
        return MultiPolynomial(c, self.lo, self.hi, max(self.n - m, 0))

    # ------------------------------------------------------------ algebra
    def _same_box(self, other):
        return np.allclose(self.lo, other.lo) and np.allclose(self.hi, other.hi)

    def __add__(self, other):
        if isinstance(other, MultiPolynomial):
            if not self._same_box(other):
                raise ValueError("box mismatch")
            n = max(self.n, other.n)
            a = MultiPolynomial(self.coef, self.lo, self.hi, n).coef
            b = MultiPolynomial(other.coef, other.lo, other.hi, n).coef
            return MultiPolynomial(a + b, self.lo, self.hi, n)
        c = self.coef.copy()
        c[(0,) * self.dim] += float(other)
        return MultiPolynomial(c, self.lo, self.hi, self.n)

    __radd__ = __add__

    def __neg__(self):
        return MultiPolynomial(-self.coef, self.lo, self.hi, self.n)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, MultiPolynomial):
            if not self._same_box(other):
                raise ValueError("box mismatch")
            n = self.n + other.n
            return MultiPolynomial.interpolate(
                lambda p: self(p) * other(p), n, self.lo, self.hi
            )
        return MultiPolynomial(self.coef * float(other), self.lo, self.hi, self.n)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        exps, vals = self.basis_coefficients()
        return {
            "basis": "tensor-chebyshev-total-degree",
            "dim": self.dim,
            "degree": self.n,
            "lo": [float(v) for v in self.lo],
            "hi": [float(v) for v in self.hi],
            "exponents": exps.tolist(),
            "coefficients": [float(f"{v:.17g}") for v in vals],
        }

    def __repr__(self):
        return f"MultiPolynomial(dim={self.dim}, degree={self.n})"


@dataclass
class TensorProductPolynomial:
    """Separable product ``prod_i p_i(x_i)`` of univariate factors."""

    factors: tuple

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def degree(self) -> int:
        return int(sum(f.degree for f in self.factors))

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(pts.shape[0])
        for i, f in enumerate(self.factors):
            out *= f(pts[:, i])
        return out

    def to_multi(self, lo, hi) -> MultiPolynomial:
        return MultiPolynomial.interpolate(self, self.degree, lo, hi)


class LazyPolynomial:
    """Polynomial given by an evaluation rule and a declared degree bound.

    Used for members of the partitions of unity whose explicit coefficient
    tensors would be far too large (degrees in the hundreds or thousands);
    evaluation stays exact up to roundoff.
    """

    def __init__(self, evaluate, degree: int, dim: int, label: str = ""):
        self._evaluate = evaluate
        self.degree = int(degree)
        self.dim = int(dim)
        self.label = label

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self._evaluate(pts), dtype=float)

    def to_multi(self, lo, hi) -> MultiPolynomial:
        return MultiPolynomial.interpolate(self, self.degree, lo, hi)

    def __repr__(self):
        return f"LazyPolynomial({self.label!r}, degree={self.degree})"
