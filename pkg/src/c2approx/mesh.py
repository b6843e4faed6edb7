"""Cell decompositions of a chart body.

Depth below the graph is measured in units of the body depth
``D = L b``; the normalized depth ``(g(x) - y)/D`` runs over ``[0, 1]``
on the chart body. Layers follow the Chebyshev spacing
``alpha_j = sin^2(j pi / (2 l1 n)) / sin^2(pi / (2 l1))`` so that
``alpha_n = 1`` and the layer widths grow like ``j / n^2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .errors import EmptySlabError, ParameterTooSmallError
from .geometry import Chart, _cube_samples

#  ---------------------------------------------------------------- layers


def layer_alpha(ell1: int) -> float:
    """``alpha = 1 / (2 sin^2(pi / (2 l1)))``."""
    return 1.0 / (2.0 * math.sin(math.pi / (2 * ell1)) ** 2)


def chebyshev_layers(n: int, ell1: int) -> np.ndarray:
    """Layer depths ``alpha_0..alpha_N`` with ``N = l1 n``; ``alpha_n = 1`` exactly."""
    N = ell1 * n
    j = np.arange(N + 1)
    a = np.sin(j * np.pi / (2 * N)) ** 2 / math.sin(math.pi / (2 * ell1)) ** 2
    a[0] = 0.0
    a[n] = 1.0
    return a


def _normalized_bounds(chart: Chart):
    """Sup of ``|g_hat|`` and of the second derivatives of ``g_hat`` on ``[-2b, 2b]^d``.

    ``g_hat = (g - min g)/D + 4`` is the graph in depth units lifted so
    that it stays at least 4, matching the normalization behind the
    layer condition.
    """
    D = chart.body_depth
    gh = (chart.g_max2 - chart.g_min2) / D + 4.0
    return gh, chart.hessian_bound / D


def min_ell1(chart: Chart) -> int:
    """Smallest ``l1`` with ``alpha >= 5 d max(|g_hat| + |D^2 g_hat|)``."""
    gh, hh = _normalized_bounds(chart)
    need = 5.0 * chart.d * (gh + hh)
    ell1 = 2
    while layer_alpha(ell1) < need:
        ell1 += 1
    return ell1


def min_m1(chart: Chart, ell1: int, m0: int) -> int:
    """Smallest ``m1 >= 32 l1^2 m0^2 b^2 ||D^2 g_hat|| / alpha`` (at least 1)."""
    _, hh = _normalized_bounds(chart)
    bound = 32.0 * ell1**2 * m0**2 * chart.b**2 * hh / layer_alpha(ell1)
    return max(1, int(math.ceil(bound - 1e-12)))


# ---------------------------------------------------------------- tangents


def tangent_vector(chart: Chart, x, j: int, normalized: bool = False) -> np.ndarray:
    """Local tangent ``e_j + d_j g(x) e_{d+1}`` (``j`` is 1-based).

    With ``normalized=True`` the unit vector is returned. Accepts a
    single point ``x`` of shape ``(d,)`` or a batch ``(m, d)``.
    """
    d = chart.d
    if not 1 <= j <= d:
        raise IndexError(f"tangent index {j} outside 1..{d}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x).reshape(-1, d)
    v = np.zeros((X.shape[0], d + 1))
    v[:, j - 1] = 1.0
    v[:, d] = chart.g.grad(X)[:, j - 1]
    if normalized:
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v[0] if single else v


# ---------------------------------------------------------------- regions


class _ChartRegion:
    """Region described by ``x`` in a box and a normalized depth band.

    The depth is ``(top(x) - y) / D`` where ``top`` is either the graph
    or an affine function; ``sample`` places midpoint samples in the
    ``(x, depth)`` coordinates, whose Jacobian is ``D``.
    """

    convex = False

    def __init__(self, chart: Chart, lo_x, hi_x, dlo: float, dhi: float):
        self.chart = chart
        self.dim = chart.dim
        self.lo_x = np.asarray(lo_x, dtype=float)
        self.hi_x = np.asarray(hi_x, dtype=float)
        self.dlo, self.dhi = float(dlo), float(dhi)

    def top(self, X):
        return self.chart.g(X)

    def normalized_depth(self, P):
        X, Y = self.chart.to_local(np.atleast_2d(P))
        return X, (self.top(X) - Y) / self.chart.body_depth

    def contains(self, P, tol: float = 1e-12):
        P = np.asarray(P, dtype=float)
        shape = P.shape[:-1]
        X, dep = self.normalized_depth(P.reshape(-1, self.dim))
        ok = (np.all((X >= self.lo_x - tol) & (X <= self.hi_x + tol), axis=1)
              & (dep >= self.dlo - tol) & (dep <= self.dhi + tol))
        return ok.reshape(shape)

    def segment_contains(self, A, B, k_samples: int = 65):
        """Segment inclusion; segments along the chart axis are decided by their endpoints."""
        A, B = np.atleast_2d(A), np.atleast_2d(B)
        ok = self.contains(A) & self.contains(B)
        V = self.chart.vec_to_local(B - A)
        vertical = np.all(np.abs(V[:, :-1]) <= 1e-14 * (1 + np.abs(V[:, -1:])), axis=1)
        for s in np.linspace(0.0, 1.0, k_samples)[1:-1]:
            idx = np.nonzero(ok & ~vertical)[0]
            if idx.size == 0:
                break
            ok[idx] = self.contains(A[idx] + s * (B[idx] - A[idx]))
        return ok

    @property
    def area(self) -> float:
        return float(np.prod(self.hi_x - self.lo_x) * self.chart.body_depth * (self.dhi - self.dlo))

    def sample(self, resolution: int):
        """Midpoint samples: ``resolution`` per axis, returned as ``(points, weights)``."""
        k = max(int(resolution), 1)
        axes = [lo + (np.arange(k) + 0.5) * (hi - lo) / k for lo, hi in zip(self.lo_x, self.hi_x)]
        dd = self.dlo + (np.arange(k) + 0.5) * (self.dhi - self.dlo) / k
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([m.reshape(-1) for m in mesh], axis=1)
        top = self.top(X)
        D = self.chart.body_depth
        Y = top[:, None] - D * dd[None, :]
        Xr = np.repeat(X, k, axis=0)
        P = self.chart.to_global(Xr, Y.reshape(-1))
        w = np.full(P.shape[0], self.area / P.shape[0])
        return P, w

    @property
    def bbox(self):
        P, _ = self.sample(4)
        return P.min(axis=0), P.max(axis=0)


class Slab(_ChartRegion):
    """Parallelepiped over ``Delta*`` between two translates of a tangent plane.

    Convex; its edge directions are the tangents at ``x*`` and ``e_{d+1}``.
    """

    convex = True

    def __init__(self, chart, lo_x, hi_x, dlo, dhi, x_star):
        super().__init__(chart, lo_x, hi_x, dlo, dhi)
        self.x_star = np.asarray(x_star, dtype=float).reshape(-1)
        xs = self.x_star[None]
        self.g0 = float(chart.g(xs)[0])
        self.grad0 = chart.g.grad(xs)[0]

    def top(self, X):
        return self.g0 + (X - self.x_star) @ self.grad0

    @property
    def height(self) -> float:
        return self.chart.body_depth * (self.dhi - self.dlo)

    def edge_directions(self):
        """Global unit tangents at ``x*`` and the chart axis direction."""
        d = self.chart.d
        vs = [tangent_vector(self.chart, self.x_star, k, normalized=True) for k in range(1, d + 1)]
        up = np.zeros(d + 1)
        up[-1] = 1.0
        return [self.chart.vec_to_global(v) for v in vs], self.chart.vec_to_global(up)


class SubgraphRegion:
    """``G^t = {xi in G: dist(xi, graph) >= A0 t^2}``."""

    convex = False

    def __init__(self, chart: Chart, t: float, A0: float):
        self.chart = chart
        self.dim = chart.dim
        self.t = float(t)
        self.A0 = float(A0)
        self.threshold = A0 * t * t

    def contains(self, P, essential_distance=None):
        P = np.asarray(P, dtype=float)
        inside = self.chart.contains(P)
        if self.threshold <= 0:
            return inside
        if essential_distance is None:
            essential_distance = np.zeros(P.shape[:-1])
            essential_distance[inside] = self.chart.essential_distance(P[inside])
        return inside & (essential_distance >= self.threshold)


def subgraph_set(chart: Chart, t: float, A0: float = 4.0) -> SubgraphRegion:
    """Membership region ``G^t`` at depth threshold ``A0 t^2``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return SubgraphRegion(chart, t, A0)


# ---------------------------------------------------------------- partition


@dataclass(eq=False)
class CellPartition:
    """Grid ``Delta_i`` times Chebyshev layers on one chart.

    Attributes
    ----------
    knots : ndarray
        ``t_i = -b + 2 i b / n``, ``i = 0..n``.
    layers : ndarray
        ``alpha_0..alpha_N`` with ``N = l1 n``.
    M0 : float
        Slab correction ``8 m0^2 b^2 ||D^2 g_hat|| + A0``.
    """

    chart: Chart
    n: int
    ell1: int
    m0: int
    m1: int
    A0: float
    knots: np.ndarray = field(repr=False)
    layers: np.ndarray = field(repr=False)
    M0: float = 0.0

    @property
    def d(self) -> int:
        return self.chart.d

    @property
    def alpha(self) -> float:
        return layer_alpha(self.ell1)

    @property
    def N(self) -> int:
        return self.ell1 * self.n

    @property
    def n_cells(self) -> int:
        return self.n ** (self.d + 1)

    def alpha_star(self, j):
        """``alpha_j`` for ``0 <= j <= n``, 0 below and 1 above."""
        j = np.asarray(j)
        jj = np.clip(j, 0, self.n)
        return np.where(j < 0, 0.0, np.where(j > self.n, 1.0, self.layers[jj]))

    def t(self, i):
        i = np.clip(np.asarray(i), 0, self.n)
        return self.knots[i]

    def indices(self):
        """All ``(i, j)`` with ``i`` a d-tuple, in lexicographic order."""
        for idx in iproduct(range(self.n), repeat=self.d + 1):
            yield tuple(idx[:-1]), idx[-1]

    def delta(self, i):
        i = np.asarray(i).reshape(self.d)
        return self.t(i), self.t(i + 1)

    def delta_star(self, i):
        i = np.asarray(i).reshape(self.d)
        return self.t(i - self.m0), self.t(i + self.m0)

    def default_x_star(self, i):
        lo, hi = self.delta_star(i)
        return 0.5 * (lo + hi)

    def cell(self, i, j) -> _ChartRegion:
        lo, hi = self.delta(i)
        return _ChartRegion(self.chart, lo, hi, self.layers[j], self.layers[j + 1])

    def extended_cell(self, i, j) -> _ChartRegion:
        lo, hi = self.delta_star(i)
        return _ChartRegion(self.chart, lo, hi, float(self.alpha_star(j - self.m1)),
                            float(self.alpha_star(j + self.m1)))

    def cell_measure(self, i, j) -> float:
        return self.cell(i, j).area

    def parallelepipeds(self, i, j, x_star=None):
        """The slabs ``S`` and ``S*`` of cell ``(i, j)``.

        Raises
        ------
        EmptySlabError
            When the inner slab has nonpositive height.
        """
        lo, hi = self.delta_star(i)
        if x_star is None:
            x_star = 0.5 * (lo + hi)
        x_star = np.asarray(x_star, dtype=float).reshape(self.d)
        if np.any(x_star < lo - 1e-12) or np.any(x_star > hi + 1e-12):
            raise ValueError("x_star must lie in the extended base cell")
        a_lo = float(self.alpha_star(j - self.m1))
        a_hi = float(self.alpha_star(j + self.m1))
        c = self.M0 / self.n**2
        if a_hi - c <= a_lo + c:
            raise EmptySlabError(
                f"slab of cell {tuple(np.atleast_1d(i))},{j} is empty; increase m1 or n"
            )
        S = Slab(self.chart, lo, hi, a_lo + c, a_hi - c, x_star)
        S_star = Slab(self.chart, lo, hi, a_lo - c, a_hi + c, x_star)
        return S, S_star

    def cell_index(self, P):
        """Map points to ``(i, j)``; ties go to the lower index.

        Returns
        -------
        I : ndarray of shape (m, d)
        J : ndarray of shape (m,)
        valid : bool ndarray of shape (m,)
            False for points outside the chart body.
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        X, Y = self.chart.to_local(P)
        dep = (self.chart.g(X) - Y) / self.chart.body_depth
        b = self.chart.b
        h = 2.0 * b / self.n
        I = np.clip(np.ceil((X + b) / h - 1e-12).astype(int) - 1, 0, self.n - 1)
        J = np.clip(np.searchsorted(self.layers[: self.n + 1], dep, side="left") - 1, 0, self.n - 1)
        valid = np.all(np.abs(X) <= b + 1e-12, axis=1) & (dep >= -1e-12) & (dep <= 1 + 1e-12)
        return I, J, valid

    def to_csv(self, path):
        """One row per cell: index, measure, layer bounds."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"i{k + 1}" for k in range(self.d)] + ["j", "measure", "alpha_lo", "alpha_hi"])
            for i, j in self.indices():
                w.writerow(list(i) + [j, f"{self.cell_measure(i, j):.17g}",
                                      f"{self.layers[j]:.17g}", f"{self.layers[j + 1]:.17g}"])


def build_partition(chart: Chart, n: int, ell1: int | None = None, m0: int = 2,
                    m1: int | None = None, A0: float = 4.0, C_d: float = 1.0) -> CellPartition:
    """Cell partition of ``chart`` at resolution ``n``.

    ``ell1`` and ``m1`` default to the smallest admissible values.

    Raises
    ------
    ParameterTooSmallError
        When ``ell1`` violates the layer condition or ``m1`` the slab condition.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    need_ell1 = min_ell1(chart)
    if ell1 is None:
        ell1 = need_ell1
    elif ell1 < need_ell1:
        raise ParameterTooSmallError(
            f"layer condition violated: alpha(l1={ell1}) = {layer_alpha(ell1):.4g} is below "
            f"5 d max(|g_hat| + |D^2 g_hat|); need l1 >= {need_ell1}"
        )
    need_m1 = min_m1(chart, ell1, m0)
    if m1 is not None and m1 < need_m1:
        raise ParameterTooSmallError(
            f"slab condition violated: m1={m1} < 32 l1^2 m0^2 b^2 ||D^2 g_hat|| / alpha; "
            f"need m1 >= {need_m1}"
        )
    b = chart.b
    knots = -b + 2.0 * b * np.arange(n + 1) / n
    knots[-1] = b
    _, hh = _normalized_bounds(chart)
    M0 = 8.0 * m0**2 * b**2 * hh + C_d * A0
    layers = chebyshev_layers(n, ell1)
    part = CellPartition(chart, int(n), int(ell1), int(m0), int(m1 or need_m1), float(A0),
                         knots, layers, float(M0))
    if m1 is None:
        # also keep every inner slab nonempty
        js = np.arange(n)
        while np.any(part.alpha_star(js + part.m1) - part.alpha_star(js - part.m1)
                     <= 2.0 * M0 / n**2) and part.m1 <= n:
            part.m1 += 1
    return part
