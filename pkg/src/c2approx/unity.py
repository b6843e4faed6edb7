"""Polynomial partitions of unity.

Every family here sums to one *identically* (as a polynomial identity),
because its last member is defined as one minus the others; localization
comes from nonnegative trigonometric kernels whose mass is concentrated
near one node.

Families
--------
chebyshev_unity_1d
    ``n`` polynomials on ``[-1, 1]`` peaked at ``cos(j pi / n)``.
box_unity
    Tensor family on a box, regrouped so that member ``j`` lives near
    the ``j``-th cell of a uniform grid.
special_unity
    Layered family ``q_{i,j}`` on a chart body.
fast_decreasing
    Polynomial gate close to 1 on a shrunken box and tiny off the box.
global_unity
    Families glued across charts and interior boxes with gates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np
import scipy.sparse as sp

from ._kernels import chebvander, clenshaw
from .errors import ChainingError, DegreeBudgetError, ParameterTooSmallError
from .geometry import CompositeDomain, rho_omega
from .mesh import CellPartition, _ChartRegion, _normalized_bounds, chebyshev_layers, layer_alpha
from .polynomial import LazyPolynomial, MultiPolynomial, Polynomial1D, TensorProductPolynomial

# ======================================================================
# kernels
# ======================================================================


def fejer_power_coefficients(m: int, s: int) -> np.ndarray:
    """Cosine coefficients ``c_0..c_K`` of ``(sin(m t/2)/sin(t/2))^{2s}``, with ``c_0 = 1``.

    The kernel equals ``c_0 + 2 sum_k c_k cos(k t)`` up to a positive
    factor; ``K = s (m - 1)``.
    """
    base = np.concatenate([np.arange(1, m + 1), np.arange(m - 1, 0, -1)]).astype(float)
    full = np.array([1.0])
    for _ in range(s):
        full = np.convolve(full, base / base.max())
    K = (full.size - 1) // 2
    c = full[K:]
    return c / c[0]


def _arc_coefficients(c: np.ndarray, a: float, b: float) -> np.ndarray:
    """Chebyshev coefficients of ``x = cos(t) -> int_a^b [T(t - s) + T(t + s)] ds``.

    ``T(t) = (1 + 2 sum_k c_k cos(k t)) / (2 pi)``.
    """
    k = np.arange(1, c.size)
    out = np.empty(c.size)
    out[0] = (b - a) / np.pi
    out[1:] = (2.0 / np.pi) * c[1:] * (np.sin(k * b) - np.sin(k * a)) / k
    return out


def _kernel_power(ell: float) -> int:
    return int(math.ceil(ell / 2.0)) + 1


def chebyshev_unity_coefficients(n: int, ell: float = 2.0, degree: int | None = None) -> np.ndarray:
    """Coefficient matrix ``(n, K + 1)`` of the univariate family (see ``chebyshev_unity_1d``)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if degree is None:
        degree = 2 * n
    s = _kernel_power(ell)
    m = degree // s + 1
    c = fejer_power_coefficients(m, s)
    edges = np.clip((np.arange(n + 1) - 0.5) * np.pi / n, 0.0, np.pi)
    edges[-1] = np.pi
    coef = np.stack([_arc_coefficients(c, edges[j], edges[j + 1]) for j in range(n)])
    # the last member closes the identity exactly
    coef[-1] = -coef[:-1].sum(axis=0)
    coef[-1, 0] += 1.0
    return coef


def chebyshev_unity_1d(n: int, ell: float = 2.0) -> list[Polynomial1D]:
    """Univariate partition ``{u_j}_{j<n}`` of ``[-1, 1]``, each of degree ``<= 2n``.

    ``u_j(cos t)`` is the mass that a Jackson-type kernel of power
    ``ceil(ell/2) + 1`` centred at ``t`` puts on the arc of angles nearest
    to ``j pi / n``; hence ``u_j`` decays like ``(1 + n |t - j pi/n|)^{-ell}``.
    """
    return [Polynomial1D(row, (-1.0, 1.0)) for row in chebyshev_unity_coefficients(n, ell)]


# ======================================================================
# box family
# ======================================================================


def _regroup_matrix(n: int) -> np.ndarray:
    """0/1 matrix ``G[j, i]`` with ``s_j < cos(i pi/n) <= s_{j+1}``."""
    s = -0.5 + np.arange(n + 1) / n
    s[0], s[-1] = -2.0, 2.0
    nodes = np.cos(np.arange(n) * np.pi / n)
    G = np.zeros((n, n))
    for i, x in enumerate(nodes):
        j = int(np.searchsorted(s, x, side="left")) - 1
        G[min(max(j, 0), n - 1), i] = 1.0
    return G


def regrouped_coefficients(n: int, ell: float = 2.0) -> np.ndarray:
    """Coefficients of ``v_0..v_{n-1}`` in the variable ``x / (2b)`` (some rows may be zero)."""
    return _regroup_matrix(n) @ chebyshev_unity_coefficients(n, 2.0 * ell)


@dataclass
class BoxUnity:
    """Tensor family ``{v_j}`` on the box ``[lo, hi]`` indexed by ``{0..n-1}^d``."""

    n: int
    lo: np.ndarray
    hi: np.ndarray
    coef: np.ndarray  # (n, K+1), shared by all axes
    zero_rows: np.ndarray = field(repr=False, default=None)

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def degree(self) -> int:
        return self.d * (self.coef.shape[1] - 1)

    def factor(self, axis: int, j: int) -> Polynomial1D:
        c = 0.5 * (self.lo[axis] + self.hi[axis])
        h = 0.5 * (self.hi[axis] - self.lo[axis])
        return Polynomial1D(self.coef[j], (c - 2 * h, c + 2 * h))

    def member(self, idx) -> TensorProductPolynomial:
        return TensorProductPolynomial(tuple(self.factor(a, j) for a, j in enumerate(idx)))

    def __len__(self):
        return self.n**self.d

    def __iter__(self):
        for idx in iproduct(range(self.n), repeat=self.d):
            yield idx, self.member(idx)

    def centers(self) -> np.ndarray:
        """Cell centres in lexicographic member order."""
        axes = [lo + (np.arange(self.n) + 0.5) * (hi - lo) / self.n for lo, hi in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def axis_values(self, x, axis: int) -> np.ndarray:
        """``(m, n)`` values of the univariate factors along ``axis``."""
        c = 0.5 * (self.lo[axis] + self.hi[axis])
        h = 0.5 * (self.hi[axis] - self.lo[axis])
        z = (np.asarray(x, dtype=float) - c) / (2 * h)
        return chebvander(z, self.coef.shape[1] - 1) @ self.coef.T

    def evaluate(self, points) -> np.ndarray:
        """``(m, n^d)`` member values, lexicographic order."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones((P.shape[0], 1))
        for a in range(self.d):
            V = self.axis_values(P[:, a], a)
            out = (out[:, :, None] * V[:, None, :]).reshape(P.shape[0], -1)
        return out


def box_unity(n: int, d: int, b: float, ell: float = 2.0, lo=None, hi=None) -> BoxUnity:
    """Partition of unity on ``[-b, b]^d`` (or on ``[lo, hi]``) with ``n`` cells per axis.

    Each univariate factor has degree ``<= 2n``; members whose regroup
    set is empty vanish identically.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    lo = np.full(d, -float(b)) if lo is None else np.asarray(lo, dtype=float).reshape(d)
    hi = np.full(d, float(b)) if hi is None else np.asarray(hi, dtype=float).reshape(d)
    coef = regrouped_coefficients(n, ell)
    return BoxUnity(n, lo, hi, coef, np.all(coef == 0, axis=1))


# ======================================================================
# layered family on a chart
# ======================================================================


class SpecialUnity:
    """The layered family ``q_{i,j}`` of a cell partition.

    ``q_{i,j}(x, y) = u_j(f_i(x) - y_hat) v_i(x)`` for ``j <= n - 2`` and
    the tail ``(1 - sum_{k <= n-2} u_k) v_i`` for ``j = n - 1``. Depth is in
    body-depth units and ``f_i`` is the tangent paraboloid majorant of the
    normalized graph at the centre of ``Delta_i``.
    """

    def __init__(self, partition: CellPartition, m: float = 2.0, verify: bool = True):
        if m < 2:
            raise ValueError("m must be at least 2")
        self.partition = partition
        self.chart = ch = partition.chart
        self.n = n = partition.n
        self.d = d = ch.d
        self.m = float(m)
        ell = 2.0 * m
        self.N = partition.N
        self.alpha = layer_alpha(partition.ell1)
        self.D = ch.body_depth
        _, hh = _normalized_bounds(ch)
        self.M = d * hh + 1.0
        ucoef = chebyshev_unity_coefficients(self.N, ell)
        self.u_head = ucoef[: n - 1]  # members 0..n-2
        self.u_degree = ucoef.shape[1] - 1
        b = ch.b
        self.box = box_unity(n, d, b, ell)
        centers = self.box.centers()
        self.x_centers = centers
        self.g_centers = ch.g(centers) / self.D
        self.grad_centers = ch.g.grad(centers) / self.D
        if verify:
            # largest argument of the u-family over the body
            span = 1.0 + self.M * 4.0 * d * b * b
            if span > 2.0 * self.alpha:
                raise ParameterTooSmallError(
                    f"depth range {span:.4g} of f_i - y exceeds the u-family interval "
                    f"[0, {2 * self.alpha:.4g}]; increase l1"
                )

    @property
    def degree(self) -> int:
        return 2 * self.u_degree + self.box.degree

    def __len__(self):
        return self.n ** (self.d + 1)

    def indices(self):
        return self.partition.indices()

    def _s(self, X, Yhat, k):
        dx = X - self.x_centers[k]
        return (self.g_centers[k] + dx @ self.grad_centers[k]
                + 0.5 * self.M * np.sum(dx * dx, axis=1) - Yhat)

    def _local(self, P):
        X, Y = self.chart.to_local(np.atleast_2d(np.asarray(P, dtype=float)))
        return X, Y / self.D

    def evaluate(self, points) -> np.ndarray:
        """``(m, n^d, n)`` values of all members."""
        X, Yhat = self._local(points)
        mpts = X.shape[0]
        V = self.box.evaluate(X)  # (m, n^d)
        out = np.empty((mpts, V.shape[1], self.n))
        for k in range(V.shape[1]):
            z = 1.0 - self._s(X, Yhat, k) / self.alpha
            U = chebvander(z, self.u_degree) @ self.u_head.T
            out[:, k, : self.n - 1] = U
            out[:, k, self.n - 1] = 1.0 - U.sum(axis=1)
            out[:, k, :] *= V[:, k, None]
        return out

    def evaluate_flat(self, points) -> np.ndarray:
        X = np.atleast_2d(points)
        return self.evaluate(X).reshape(X.shape[0], -1)

    def member(self, i, j) -> LazyPolynomial:
        i = tuple(np.atleast_1d(i))
        k = int(np.ravel_multi_index(i, (self.n,) * self.d))
        v = self.box.member(i)

        def ev(P, k=k, j=j, v=v):
            X, Yhat = self._local(P)
            z = 1.0 - self._s(X, Yhat, k) / self.alpha
            if j < self.n - 1:
                u = clenshaw(self.u_head[j], z)
            else:
                u = 1.0 - chebvander(z, self.u_degree) @ self.u_head.sum(axis=0)
            return u * v(X)

        return LazyPolynomial(ev, self.degree, self.d + 1, label=f"q{i},{j}")

    def centers(self) -> np.ndarray:
        """Global centres of the cells, order matching ``evaluate_flat``."""
        p = self.partition
        mid = 0.5 * (p.layers[: self.n] + p.layers[1: self.n + 1])
        X = np.repeat(self.x_centers, self.n, axis=0)
        dep = np.tile(mid, self.x_centers.shape[0])
        Y = self.chart.g(X) - self.D * dep
        return self.chart.to_global(X, Y)


def special_unity(partition: CellPartition, m: float = 2.0) -> SpecialUnity:
    """Layered partition of unity on the chart body of ``partition``.

    Raises
    ------
    ParameterTooSmallError
        If ``f_i(x) - y`` can leave the interval of the u-family.
    """
    return SpecialUnity(partition, m)


# ======================================================================
# fast-decreasing gates
# ======================================================================


def _dolph_kernel_coefficients(M: int, width: float) -> np.ndarray:
    """Cosine coefficients (``c_0 = 1``) of ``T_{M/2}(x0 cos(t/2))^2``, ``x0 = 1/cos(width/2)``.

    The kernel is a nonnegative trigonometric polynomial of degree ``M``
    whose main lobe is ``|t| <= width`` and whose side lobes are
    exponentially small in ``M width``.
    """
    half = M // 2
    x0 = 1.0 / math.cos(width / 2.0)
    L = 4 * M + 8
    t = 2.0 * np.pi * np.arange(L) / L
    x = x0 * np.cos(t / 2.0)
    ax = np.abs(x)
    with np.errstate(invalid="ignore"):
        val = np.where(ax <= 1.0, np.cos(half * np.arccos(np.clip(x, -1, 1))),
                       np.cosh(half * np.arccosh(np.maximum(ax, 1.0))) * np.where(x < 0, (-1.0) ** half, 1.0))
    top = math.cosh(half * math.acosh(x0))
    K = (val / top) ** 2
    c = np.fft.rfft(K).real / L
    c = c[: M + 1]
    return c / c[0]


def _tail_mass(c: np.ndarray, delta: float) -> float:
    """Mass of the normalized kernel outside ``[-delta, delta]``."""
    k = np.arange(1, c.size)
    inner = (delta + 2.0 * np.sum(c[1:] * np.sin(k * delta) / k)) / np.pi
    return max(1.0 - inner, 0.0)


@dataclass
class GateFactor:
    poly: Polynomial1D
    z_edge: float
    tail: float


class FastDecreasing(TensorProductPolynomial):
    """Tensor product of univariate gates; records its verified tail bound."""

    def __init__(self, factors, lo, hi, mu, theta, n, tail):
        super().__init__(tuple(factors))
        self.lo, self.hi = np.asarray(lo), np.asarray(hi)
        self.mu, self.theta, self.n, self.tail = mu, theta, n, tail


def _gate_factor(lo, hi, R, mu, target, max_degree, start):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    zA = min(-1.0, (-R - c) / h)
    zB = max(1.0, (R - c) / h)
    mid, half = 0.5 * (zA + zB), 0.5 * (zB - zA)

    def phi(z):
        return math.acos(max(-1.0, min(1.0, (z - mid) / half)))

    e = 0.5 * (1.0 + mu)
    pa, pb = phi(e), phi(-e)  # phi decreases in z
    gap = min(abs(phi(mu) - pa), abs(phi(1.0) - pa), abs(phi(-mu) - pb), abs(phi(-1.0) - pb))
    if not gap > 0:
        raise DegreeBudgetError("degenerate gate geometry")
    M = max(8, int(start) + (int(start) % 2))
    while True:
        kc = _dolph_kernel_coefficients(M, gap / 2.0)
        tail = _tail_mass(kc, gap)
        if tail <= target:
            break
        M *= 2
        if M > max_degree:
            raise DegreeBudgetError(
                f"gate tail {tail:.3g} above {target:.3g} at degree {M // 2}; raise the budget"
            )
    # shrink back between the last failing and the first passing degree
    lo_M = max(8, M // 2)
    while M - lo_M > max(16, M // 16):
        mid = ((lo_M + M) // 2) & ~1
        kc_mid = _dolph_kernel_coefficients(mid, gap / 2.0)
        t_mid = _tail_mass(kc_mid, gap)
        if t_mid <= target:
            M, kc, tail = mid, kc_mid, t_mid
        else:
            lo_M = mid
    coef = _arc_coefficients(kc, pa, pb)
    interval = (c + h * zA, c + h * zB)
    return GateFactor(Polynomial1D(coef, interval), e, tail)


def fast_decreasing(box, R: float, theta: float = 0.5, n: int = 8, mu: float = 0.5,
                    max_degree: int = 1 << 16, verify: bool = True) -> FastDecreasing:
    """Polynomial ``P`` with ``0 <= P <= 1`` on ``B_R``, ``1 - P <= theta^n`` on ``mu * box``
    and ``P <= theta^n`` on ``B_R`` minus the box.

    ``box`` is a pair ``(lo, hi)``; ``mu * box`` shrinks it about its centre.
    Each coordinate factor integrates a squared Dolph-Chebyshev kernel over
    the angular interval of ``|z| <= (1 + mu)/2``; the degree is doubled
    until the exact kernel tail is at most ``theta^n / (d + 1)``.

    Raises
    ------
    DegreeBudgetError
        When ``max_degree`` is exhausted or the bounds fail verification.
    """
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    if not 0 < theta < 1 or not 0 < mu < 1:
        raise ValueError("theta and mu must lie in (0, 1)")
    dim = lo.size
    bound = theta**n
    target = max(bound / (dim + 1), 1e-13)
    factors = [_gate_factor(lo[i], hi[i], R, mu, target, max_degree, 2 * n) for i in range(dim)]
    P = FastDecreasing([f.poly for f in factors], lo, hi, mu, theta, n, max(f.tail for f in factors))
    if verify:
        _verify_gate(P, factors, lo, hi, R, mu, bound)
    return P


def _verify_gate(P, factors, lo, hi, R, mu, bound, tol=1e-11):
    for i, f in enumerate(factors):
        a, b = f.poly.interval
        x = np.linspace(a, b, 20001)
        v = f.poly(x)
        c, h = 0.5 * (lo[i] + hi[i]), 0.5 * (hi[i] - lo[i])
        z = (x - c) / h
        if v.min() < -tol or v.max() > 1 + tol:
            raise DegreeBudgetError("gate factor leaves [0, 1]")
        if np.any(1.0 - v[np.abs(z) <= mu] > bound + tol):
            raise DegreeBudgetError("gate factor misses the inner bound")
        if np.any(v[np.abs(z) >= 1.0] > bound + tol):
            raise DegreeBudgetError("gate factor misses the outer bound")
    rng = np.random.default_rng(12345)
    dim = lo.size
    pts = rng.normal(size=(4000, dim))
    pts *= (R * rng.random(4000) ** (1.0 / dim) / np.linalg.norm(pts, axis=1))[:, None]
    v = P(pts)
    z = (pts - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
    outside = np.any(np.abs(z) > 1.0, axis=1)
    inner = np.all(np.abs(z) <= mu, axis=1)
    if (v.min() < -tol or v.max() > 1 + tol or np.any(v[outside] > bound + tol)
            or np.any(1 - v[inner] > bound + tol)):
        raise DegreeBudgetError("gate fails its bounds on sampled points")


def patch_approximants(P1, P2, R):
    """``R P1 + (1 - R) P2``.

    Exact coefficient arithmetic when all three are ``MultiPolynomial`` on
    the same box; otherwise a lazy polynomial of the summed degree.
    """
    if all(isinstance(q, MultiPolynomial) for q in (P1, P2, R)):
        return R * P1 + (1.0 - R) * P2
    deg = int(getattr(R, "degree", 0)) + max(int(getattr(P1, "degree", 0)), int(getattr(P2, "degree", 0)))
    dim = int(getattr(P1, "dim", getattr(R, "dim", 1)))

    def ev(P):
        r = R(P)
        return r * P1(P) + (1.0 - r) * P2(P)

    return LazyPolynomial(ev, deg, dim, label="patch")


# ======================================================================
# glued global family
# ======================================================================


class GlobalUnity:
    """Glued partition of unity ``{(omega, phi_omega)}`` on a composite domain.

    Regions are ordered interior boxes first, then charts. With gates
    ``R_s`` (``R_1 = 1``) the member ``u`` of region ``s`` becomes
    ``u R_s prod_{t > s} (1 - R_t)``; the weights telescope to one.
    Members are then merged onto a ``1/n``-separated set of centres.
    """

    def __init__(self, domain, n, m, families, gates, member_centers, centers, assignment):
        self.domain = domain
        self.n = n
        self.m = m
        self.families = families
        self.gates = gates
        self.member_centers = member_centers
        self.centers = centers
        self.assignment = assignment  # per region: centre index of each member
        self._maps = [sp.csr_matrix((np.ones(a.size), (np.arange(a.size), a)),
                                    shape=(a.size, centers.shape[0])) for a in assignment]

    def __len__(self):
        return self.centers.shape[0]

    @property
    def degree(self) -> int:
        gate_deg = sum(g.degree for g in self.gates if g is not None)
        return max(f.degree for f in self.families) + gate_deg

    def region_weights(self, P) -> np.ndarray:
        """``(m, S)`` weights ``R_s prod_{t>s} (1 - R_t)``."""
        P = np.atleast_2d(P)
        S = len(self.families)
        R = np.ones((P.shape[0], S))
        for s, g in enumerate(self.gates):
            if g is not None:
                R[:, s] = g(P)
        W = np.empty_like(R)
        suffix = np.ones(P.shape[0])
        for s in range(S - 1, -1, -1):
            W[:, s] = R[:, s] * suffix
            suffix = suffix * (1.0 - R[:, s])
        return W

    def _family_values(self, s, P):
        fam = self.families[s]
        if isinstance(fam, BoxUnity):
            return fam.evaluate(P)
        return fam.evaluate_flat(P)

    def evaluate(self, points, chunk: int = 2048) -> np.ndarray:
        """``(m, n_centers)`` values of ``phi_omega``."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((P.shape[0], len(self)))
        for a in range(0, P.shape[0], chunk):
            Q = P[a:a + chunk]
            W = self.region_weights(Q)
            for s in range(len(self.families)):
                vals = self._family_values(s, Q) * W[:, s, None]
                out[a:a + chunk] += np.asarray((self._maps[s].T @ vals.T).T)
        return out

    def evaluate_sum(self, points, chunk: int = 4096) -> np.ndarray:
        """``sum_omega phi_omega`` without materializing the member matrix."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(P.shape[0])
        for a in range(0, P.shape[0], chunk):
            Q = P[a:a + chunk]
            W = self.region_weights(Q)
            for s in range(len(self.families)):
                out[a:a + chunk] += self._family_values(s, Q).sum(axis=1) * W[:, s]
        return out

    def member(self, k: int) -> LazyPolynomial:
        def ev(P, k=k):
            return self.evaluate(P)[:, k]

        return LazyPolynomial(ev, self.degree, self.domain.dim, label=f"phi{k}")

    def __iter__(self):
        for k in range(len(self)):
            yield self.centers[k], self.member(k)


def select_separated(points, dom, sep: float):
    """Greedy subset of ``points`` that is ``sep``-separated in the boundary metric.

    Returns the selected indices and, for every point, the index (into
    the selection) of its nearest selected centre.
    """
    pts = np.asarray(points, dtype=float)
    sq = np.sqrt(dom.dist(pts))
    chosen = []
    mind = np.full(pts.shape[0], np.inf)
    owner = np.zeros(pts.shape[0], dtype=np.int64)
    for k in range(pts.shape[0]):
        if mind[k] < sep:
            continue
        chosen.append(k)
        r = np.linalg.norm(pts - pts[k], axis=1) + np.abs(sq - sq[k])
        closer = r < mind
        owner[closer] = len(chosen) - 1
        mind = np.minimum(mind, r)
    return np.array(chosen, dtype=np.int64), owner


def _check_chaining(dom, regions, gamma0):
    rng = np.random.default_rng(7)
    ang = np.linspace(0, 2 * np.pi, 9)[:-1]
    for s in range(1, len(regions)):
        kind, obj = regions[s]
        if kind != "chart":
            continue
        P, _ = _ChartRegion(obj, -np.full(obj.d, obj.b), np.full(obj.d, obj.b), 0.0, 1.0).sample(20)
        P = P[rng.permutation(P.shape[0])]

        def in_prev(Q):
            ok = np.zeros(Q.shape[0], dtype=bool)
            for kind2, obj2 in regions[:s]:
                if kind2 == "box":
                    ok |= np.all((Q >= obj2[0]) & (Q <= obj2[1]), axis=1)
                else:
                    ok |= obj2.contains(Q)
            return ok

        found = False
        cand = P[in_prev(P) & obj.contains(P)]
        for xi in cand[:400]:
            if dom.dim == 2:
                ring = xi + gamma0 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            else:
                ring = xi + gamma0 * np.concatenate([np.eye(dom.dim), -np.eye(dom.dim)])
            ring = np.vstack([ring, xi])
            if np.all(in_prev(ring)) and np.all(obj.contains(ring)):
                found = True
                break
        if not found:
            raise ChainingError(
                f"region {s} does not overlap the previous regions on a ball of radius {gamma0:g}"
            )


def global_unity(dom: CompositeDomain, n: int, m: float = 2.0, theta: float = 0.2,
                 mu: float = 0.5, gamma0: float = 0.02, check_chaining: bool = True) -> GlobalUnity:
    """Glued polynomial partition of unity on ``dom``.

    The sum telescopes to one exactly, but a chart family evaluated far
    outside its body takes huge values, so its gate must be small there
    for the floating-point sum to stay accurate; ``theta = 0.2`` keeps the
    deviation near ``1e-10`` at ``n = 16`` for ``m = 4`` on the unit disk.

    Raises
    ------
    ChainingError
        If some chart does not overlap the union of the previous regions
        on a ball of radius ``gamma0``.
    """
    from .mesh import build_partition

    regions = [("box", b) for b in dom.interior_boxes] + [("chart", c) for c in dom.charts]
    if not regions:
        raise ChainingError("domain has neither interior boxes nor charts")
    if check_chaining:
        _check_chaining(dom, regions, gamma0)
    lo, hi = dom.bbox
    Rball = max(1.0, float(np.max(np.linalg.norm(np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), -1)
                                                 .reshape(-1, dom.dim), axis=1))))
    families, gates, centers = [], [], []
    for s, (kind, obj) in enumerate(regions):
        if kind == "box":
            fam = box_unity(n, dom.dim, 1.0, 2.0 * m, lo=obj[0], hi=obj[1])
            cen = fam.centers()
            gbox = obj
        else:
            fam = special_unity(build_partition(obj, n), m)
            cen = fam.centers()
            gbox = obj.bounding_box(1.0)
        families.append(fam)
        centers.append(cen)
        gates.append(None if s == 0 else fast_decreasing(gbox, Rball, theta, n, mu))
    allc = np.vstack(centers)
    inside = dom.contains(allc)
    order = np.argsort(~inside, kind="stable")  # centres in the domain first
    chosen, owner = select_separated(allc[order][: inside.sum()], dom, 1.0 / n)
    sel = allc[order][chosen]
    # every member goes to its nearest selected centre (Euclidean for outside points)
    sq = np.sqrt(np.where(inside, dom.dist(np.where(inside[:, None], allc, 0.0)), 0.0))
    sq_sel = np.sqrt(dom.dist(sel))
    assign_all = np.empty(allc.shape[0], dtype=np.int64)
    for a in range(0, allc.shape[0], 1024):
        block = allc[a:a + 1024]
        r = np.linalg.norm(block[:, None, :] - sel[None], axis=2)
        r = r + np.abs(sq[a:a + 1024, None] - sq_sel[None]) * inside[a:a + 1024, None]
        assign_all[a:a + 1024] = np.argmin(r, axis=1)
    splits = np.cumsum([c.shape[0] for c in centers])[:-1]
    assignment = np.split(assign_all, splits)
    return GlobalUnity(dom, n, m, families, gates, allc, sel, assignment)
