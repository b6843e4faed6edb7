"""C²-domains as covers by graph charts, and boundary-aware geometry.

Points are numpy arrays whose last axis holds the ``d+1`` coordinates.
A :class:`Chart` is an upward graph patch after a translation and a
coordinate permutation/reflection; local coordinates are split as
``(x, y)`` with ``y`` the graph axis. A :class:`CompositeDomain` bundles
an inside predicate, a boundary distance, the charts and interior boxes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (AboveGraphError, ChartSlopeError, EmptyBallError,
                     PointOutsideDomainError)

_TOL = 1e-12


# ======================================================================
# graph functions
# ======================================================================


class GraphFunction:
    """A C² function ``g: R^d -> R`` with gradient and Hessian.

    Subclasses implement ``value``, ``grad`` and ``hess`` on arrays of
    shape ``(m, d)``. ``domain_radius`` bounds the sup-norm ball on which
    ``g`` is defined (``inf`` when defined everywhere).
    """

    name = "callable"
    domain_radius = math.inf

    def __init__(self, d: int = 1):
        self.d = d

    def __call__(self, X):
        return self.value(np.atleast_2d(np.asarray(X, dtype=float)))

    def value(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def grad(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def hess(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_json(self) -> dict:
        return {"name": self.name, **self.params()}


class FlatGraph(GraphFunction):
    """``g(x) = c``."""

    name = "flat"

    def __init__(self, c: float = 0.0, d: int = 1):
        super().__init__(d)
        self.c = float(c)

    def value(self, X):
        return np.full(X.shape[0], self.c)

    def grad(self, X):
        return np.zeros_like(X, dtype=float)

    def hess(self, X):
        return np.zeros((X.shape[0], self.d, self.d))

    def params(self):
        return {"c": self.c, "d": self.d}


class QuadraticGraph(GraphFunction):
    """``g(x) = c + (k/2) ||x||^2``."""

    name = "quadratic"

    def __init__(self, k: float = 1.0, c: float = 0.0, d: int = 1):
        super().__init__(d)
        self.k = float(k)
        self.c = float(c)

    def value(self, X):
        return self.c + 0.5 * self.k * np.sum(X * X, axis=1)

    def grad(self, X):
        return self.k * np.asarray(X, dtype=float)

    def hess(self, X):
        return np.broadcast_to(self.k * np.eye(self.d), (X.shape[0], self.d, self.d)).copy()

    def params(self):
        return {"k": self.k, "c": self.c, "d": self.d}


class EllipseArcGraph(GraphFunction):
    """Upper arc ``g(x) = B sqrt(1 - ((x + shift)/A)^2)`` of an ellipse (d = 1)."""

    name = "ellipse_arc"

    def __init__(self, A: float, B: float, shift: float = 0.0):
        super().__init__(1)
        self.A, self.B, self.shift = float(A), float(B), float(shift)
        self.domain_radius = self.A - abs(self.shift)

    def _s(self, X):
        u = (X[:, 0] + self.shift) / self.A
        return u, np.sqrt(np.maximum(1.0 - u * u, 0.0))

    def value(self, X):
        _, s = self._s(X)
        return self.B * s

    def grad(self, X):
        u, s = self._s(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (-self.B * u / (self.A * s))[:, None]

    def hess(self, X):
        _, s = self._s(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (-self.B / (self.A**2 * s**3))[:, None, None]

    def params(self):
        return {"A": self.A, "B": self.B, "shift": self.shift}


class CallableGraph(GraphFunction):
    """Wrap user callables; missing derivatives use central differences."""

    name = "callable"

    def __init__(self, g, grad=None, hess=None, d: int = 1, h: float = 1e-5):
        super().__init__(d)
        self._g, self._grad, self._hess, self._h = g, grad, hess, h

    def value(self, X):
        return np.asarray(self._g(X), dtype=float).reshape(X.shape[0])

    def grad(self, X):
        if self._grad is not None:
            return np.asarray(self._grad(X), dtype=float).reshape(X.shape)
        out = np.empty_like(X, dtype=float)
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = self._h
            out[:, i] = (self.value(X + e) - self.value(X - e)) / (2 * self._h)
        return out

    def hess(self, X):
        if self._hess is not None:
            return np.asarray(self._hess(X), dtype=float).reshape(X.shape[0], self.d, self.d)
        out = np.empty((X.shape[0], self.d, self.d))
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = self._h
            out[:, :, i] = (self.grad(X + e) - self.grad(X - e)) / (2 * self._h)
        return 0.5 * (out + out.transpose(0, 2, 1))


GRAPH_REGISTRY = {"flat": FlatGraph, "quadratic": QuadraticGraph, "ellipse_arc": EllipseArcGraph}


def graph_from_json(obj: dict) -> GraphFunction:
    obj = dict(obj)
    name = obj.pop("name")
    if name not in GRAPH_REGISTRY:
        raise ValueError(f"unknown graph function {name!r}")
    return GRAPH_REGISTRY[name](**obj)


def _as_graph(g, d: int) -> GraphFunction:
    return g if isinstance(g, GraphFunction) else CallableGraph(g, d=d)


def _cube_samples(d: int, radius: float, per_dim: int | None = None) -> np.ndarray:
    if per_dim is None:
        per_dim = {1: 801, 2: 81}.get(d, 17)
    t = np.linspace(-radius, radius, per_dim)
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


# ======================================================================
# charts
# ======================================================================


class Chart:
    """A domain of special type: a graph patch after a rigid relabelling.

    In local coordinates the chart body is
    ``G(lam) = {(x, y): x in (-lam b, lam b)^d, g(x) - lam L b < y <= g(x)}``.
    Global points map to local ones by subtracting ``offset``, moving
    coordinate ``axis`` to the last slot and multiplying it by
    ``orientation`` (+1 for an upward chart, -1 for a downward one).

    Parameters
    ----------
    axis : int
        Zero-based index of the graph coordinate in global coordinates.
    orientation : {+1, -1}
    offset : array_like
        Translation vector.
    b : float
        Base size.
    L : float
        Chart parameter; must satisfy ``L >= 4 sqrt(d) max ||grad g|| + 1``
        on ``[-2b, 2b]^d``.
    g : GraphFunction or callable
    hessian_bound : float, optional
        Bound on the second derivatives on ``[-2b, 2b]^d``; measured when omitted.
    """

    def __init__(self, axis: int, orientation: int, offset, b: float, L: float, g,
                 hessian_bound: float | None = None, name: str = "", validate: bool = True):
        self.offset = np.asarray(offset, dtype=float).reshape(-1)
        self.dim = self.offset.size
        self.d = self.dim - 1
        if not 0 <= axis < self.dim:
            raise ValueError("axis out of range")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if b <= 0:
            raise ValueError("base size must be positive")
        self.axis = int(axis)
        self.orientation = int(orientation)
        self.b = float(b)
        self.L = float(L)
        self.g = _as_graph(g, self.d)
        self.name = name
        self._others = [i for i in range(self.dim) if i != self.axis]
        self._perm = np.array(self._others + [self.axis])
        self._inv = np.argsort(self._perm)
        samples = _cube_samples(self.d, 2 * self.b)
        gv = self.g(samples)
        self.g_min2, self.g_max2 = float(np.min(gv)), float(np.max(gv))
        grad = self.g.grad(samples)
        self.grad_bound = float(np.max(np.linalg.norm(grad, axis=1)))
        if hessian_bound is None:
            hessian_bound = float(np.max(np.abs(self.g.hess(samples))))
        self.hessian_bound = float(hessian_bound)
        if validate:
            self.check_slope()

    # ------------------------------------------------------------ validation
    @property
    def slope_parameter(self) -> float:
        """Smallest admissible ``L`` for this ``g`` and ``b``."""
        return 4.0 * math.sqrt(self.d) * self.grad_bound + 1.0

    def check_slope(self):
        if not np.isfinite(self.grad_bound) or self.L < self.slope_parameter - 1e-9:
            raise ChartSlopeError(
                f"chart {self.name!r}: L={self.L:.6g} < 4 sqrt(d) max|grad g| + 1 = "
                f"{self.slope_parameter:.6g} on [-2b, 2b]^d"
            )

    # ------------------------------------------------------------ coordinates
    @property
    def body_depth(self) -> float:
        return self.L * self.b

    def to_local(self, P):
        P = np.asarray(P, dtype=float)
        Q = (P - self.offset)[..., self._perm]
        X = Q[..., :-1]
        Y = self.orientation * Q[..., -1]
        return X, Y

    def to_global(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        Q = np.concatenate([X, (self.orientation * Y)[..., None]], axis=-1)
        return Q[..., self._inv] + self.offset

    def local_point(self, P):
        X, Y = self.to_local(P)
        return np.concatenate([X, Y[..., None]], axis=-1)

    def vec_to_global(self, V):
        V = np.array(V, dtype=float)
        V[..., -1] *= self.orientation
        return V[..., self._inv]

    def vec_to_local(self, V):
        V = np.asarray(V, dtype=float)[..., self._perm].copy()
        V[..., -1] *= self.orientation
        return V

    def depth(self, P):
        """``g(x) - y`` in local coordinates."""
        X, Y = self.to_local(P)
        shape = Y.shape
        return (self.g(X.reshape(-1, self.d)) - Y.reshape(-1)).reshape(shape)

    def contains(self, P, lam: float = 1.0):
        X, Y = self.to_local(P)
        shape = Y.shape
        X2 = X.reshape(-1, self.d)
        dep = self.g(X2) - Y.reshape(-1)
        ok = (np.all(np.abs(X2) < lam * self.b, axis=1) & (dep >= -_TOL)
              & (dep < lam * self.body_depth))
        return ok.reshape(shape)

    def in_star(self, P):
        """Membership in the enlarged body ``G*``."""
        X, Y = self.to_local(P)
        shape = Y.shape
        X2 = X.reshape(-1, self.d)
        dep = self.g(X2) - Y.reshape(-1)
        ok = (np.all(np.abs(X2) < 2 * self.b, axis=1) & (dep >= -_TOL)
              & (Y.reshape(-1) > self.g_min2 - 4 * self.body_depth))
        return ok.reshape(shape)

    def bounding_box(self, lam: float = 1.0):
        """Axis-aligned global box containing ``G(lam)``."""
        samples = _cube_samples(self.d, lam * self.b, 41 if self.d == 1 else 11)
        gv = self.g(samples)
        lo_y = float(gv.min()) - lam * self.body_depth
        hi_y = float(gv.max())
        lo_l = np.concatenate([np.full(self.d, -lam * self.b), [lo_y]])
        hi_l = np.concatenate([np.full(self.d, lam * self.b), [hi_y]])
        corners = np.stack([lo_l, hi_l])
        a = self.to_global(corners[:, :-1], corners[:, -1])
        return np.minimum(a[0], a[1]), np.maximum(a[0], a[1])

    # ------------------------------------------------------------ distances
    def essential_distance(self, P):
        """Distance to the graph piece ``{(u, g(u)): u in [-b, b]^d}``."""
        X, Y = self.to_local(P)
        shape = Y.shape
        out = graph_distance(self.g, X.reshape(-1, self.d), Y.reshape(-1), self.b)
        return out.reshape(shape)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "axis": self.axis,
            "orientation": "up" if self.orientation > 0 else "down",
            "offset": self.offset.tolist(),
            "b": self.b,
            "L": self.L,
            "g": self.g.to_json(),
        }

    def __repr__(self):
        return (f"Chart({self.name!r}, axis={self.axis}, orientation={self.orientation:+d}, "
                f"b={self.b:.4g}, L={self.L:.4g})")


def graph_distance(g: GraphFunction, X, Y, b: float, newton_steps: int = 12):
    """Distance from local points ``(X, Y)`` to the graph of ``g`` over ``[-b, b]^d``.

    A dense search over ``u`` seeds a safeguarded Newton iteration on
    ``F(u) = |u - x|^2/2 + (g(u) - y)^2/2`` with projection onto the cube.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    m, d = X.shape
    if m == 0:
        return np.zeros(0)
    grid = _cube_samples(d, b, {1: 129, 2: 25}.get(d, 9))
    gg = g(grid)
    best_u = np.empty((m, d))
    best_f = np.full(m, np.inf)
    chunk = max(1, 200_000 // grid.shape[0])
    for s in range(0, m, chunk):
        Xs, Ys = X[s:s + chunk], Y[s:s + chunk]
        F = (0.5 * np.sum((Xs[:, None, :] - grid[None, :, :]) ** 2, axis=2)
             + 0.5 * (gg[None, :] - Ys[:, None]) ** 2)
        k = np.argmin(F, axis=1)
        best_u[s:s + chunk] = grid[k]
        best_f[s:s + chunk] = F[np.arange(F.shape[0]), k]
    u = best_u.copy()
    f = best_f.copy()
    eye = np.eye(d)
    for _ in range(newton_steps):
        gu = g(u)
        gr = g.grad(u)
        H = g.hess(u)
        r = gu - Y
        grad_F = (u - X) + r[:, None] * gr
        HF = eye[None] + gr[:, :, None] * gr[:, None, :] + r[:, None, None] * H
        try:
            step = np.linalg.solve(HF, grad_F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = grad_F
        bad = ~np.all(np.isfinite(step), axis=1) | (np.einsum("ij,ij->i", step, grad_F) <= 0)
        step[bad] = grad_F[bad]
        accepted = np.zeros(m, dtype=bool)
        t = 1.0
        for _ in range(8):
            cand = np.clip(u - t * step, -b, b)
            fc = 0.5 * np.sum((cand - X) ** 2, axis=1) + 0.5 * (g(cand) - Y) ** 2
            take = (fc < f) & ~accepted
            u[take] = cand[take]
            f[take] = fc[take]
            accepted |= take
            if accepted.all():
                break
            t *= 0.5
        if not accepted.any():
            break
    return np.sqrt(2.0 * np.maximum(f, 0.0))


# ======================================================================
# composite domains
# ======================================================================


@dataclass(eq=False)
class CompositeDomain:
    """A C²-domain described by charts, interior boxes and callbacks.

    Attributes
    ----------
    dim : int
        Ambient dimension ``d + 1``.
    inside : callable
        ``(m, dim) -> bool (m,)``; the closed domain.
    boundary_distance : callable
        ``(m, dim) -> (m,)`` distance to the boundary.
    diameter : float
    charts : tuple of Chart
        Charts attached to the boundary.
    interior_boxes : tuple of (lo, hi)
    bbox : tuple of arrays
        Bounding box of the domain.
    margin : float
        Cover margin: every point closer than ``margin`` to the boundary
        lies in some ``G_j(lam0)``.
    convex : bool
        When true, segment inclusion is decided from the endpoints.
    ray_exit : callable, optional
        ``(P, e) -> t`` exact exit distance along unit direction ``e``.
    area : float, optional
        Exact measure when known.
    """

    dim: int
    inside: Callable
    boundary_distance: Callable
    diameter: float
    charts: tuple = ()
    interior_boxes: tuple = ()
    bbox: tuple = None
    margin: float = 0.0
    lam0: float = 0.75
    convex: bool = False
    ray_exit: Callable | None = None
    area: float | None = None
    description: dict = field(default_factory=dict)

    def contains(self, P):
        P = np.asarray(P, dtype=float)
        shape = P.shape[:-1]
        return np.asarray(self.inside(P.reshape(-1, self.dim)), dtype=bool).reshape(shape)

    def dist(self, P):
        P = np.asarray(P, dtype=float)
        shape = P.shape[:-1]
        return np.asarray(self.boundary_distance(P.reshape(-1, self.dim)), dtype=float).reshape(shape)

    def covered_by_charts(self, P, lam: float | None = None):
        lam = self.lam0 if lam is None else lam
        P = np.asarray(P, dtype=float)
        ok = np.zeros(P.shape[:-1], dtype=bool)
        for ch in self.charts:
            ok |= ch.contains(P, lam)
        return ok

    def in_boxes(self, P):
        P = np.asarray(P, dtype=float)
        ok = np.zeros(P.shape[:-1], dtype=bool)
        for lo, hi in self.interior_boxes:
            ok |= np.all((P >= lo) & (P <= hi), axis=-1)
        return ok

    def to_json(self) -> dict:
        out = dict(self.description)
        out["charts"] = [c.to_json() for c in self.charts]
        out["interior_boxes"] = [[np.asarray(lo).tolist(), np.asarray(hi).tolist()]
                                 for lo, hi in self.interior_boxes]
        return out

    def __repr__(self):
        kind = self.description.get("kind", "custom")
        return f"CompositeDomain({kind}, dim={self.dim}, charts={len(self.charts)})"


def _check_inside(dom, *points):
    for P in points:
        if not np.all(dom.contains(P)):
            raise PointOutsideDomainError("point outside the domain")


# ----------------------------------------------------------------------
# metric, rays, segments
# ----------------------------------------------------------------------


def rho_omega(xi, eta, dom: CompositeDomain, check: bool = True):
    """Boundary metric ``|xi - eta| + |sqrt(dist(xi)) - sqrt(dist(eta))|``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if check:
        _check_inside(dom, xi, eta)
    val = (np.linalg.norm(xi - eta, axis=-1)
           + np.abs(np.sqrt(dom.dist(xi)) - np.sqrt(dom.dist(eta))))
    return float(val) if np.ndim(val) == 0 else val


def rho_hat(xi, eta, chart: Chart, tol: float = 1e-12):
    """Chart metric ``max{|x - x'|, |sqrt(g(x) - y) - sqrt(g(x') - y')|}``.

    Arguments are local chart coordinates ``(x_1, ..., x_d, y)``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    scalar = np.ndim(xi) == 2 and xi.shape[0] == 1 and eta.shape[0] == 1
    d = chart.d
    dx = np.linalg.norm(xi[..., :d] - eta[..., :d], axis=-1)
    s1 = chart.g(xi[..., :d].reshape(-1, d)).reshape(xi.shape[:-1]) - xi[..., d]
    s2 = chart.g(eta[..., :d].reshape(-1, d)).reshape(eta.shape[:-1]) - eta[..., d]
    if np.any(s1 < -tol) or np.any(s2 < -tol):
        raise AboveGraphError("argument lies above the graph of the chart")
    val = np.maximum(dx, np.abs(np.sqrt(np.maximum(s1, 0)) - np.sqrt(np.maximum(s2, 0))))
    return float(val[0]) if scalar else val


def _region_contains(region, P):
    """Membership with the chart-exact override for composite domains."""
    ok = np.asarray(region.contains(P), dtype=bool)
    charts = getattr(region, "charts", ())
    for ch in charts:
        X, Y = ch.to_local(P)
        X2 = X.reshape(-1, ch.d)
        dep = (ch.g(X2) - Y.reshape(-1)).reshape(Y.shape)
        in_box = np.all(np.abs(X) < ch.b, axis=-1) & (dep < ch.body_depth)
        ok = np.where(in_box, dep >= -_TOL, ok)
    return ok


def segments_in_domain(A, B, region, k_samples: int = 65):
    """Vectorized segment inclusion ``[A_i, B_i] subset region``.

    Convex regions are decided from the endpoints, which is exact. Other
    regions are sampled at ``k_samples`` equally spaced points.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if getattr(region, "convex", False):
        return region.contains(A) & region.contains(B)
    if hasattr(region, "segment_contains"):
        return region.segment_contains(A, B, k_samples)
    if k_samples < 2:
        raise ValueError("k_samples must be >= 2")
    ok = np.ones(A.shape[0], dtype=bool)
    for s in np.linspace(0.0, 1.0, k_samples):
        idx = np.nonzero(ok)[0]
        if idx.size == 0:
            break
        P = A[idx] + s * (B[idx] - A[idx])
        ok[idx] = _region_contains(region, P)
    return ok


def segment_in_domain(xi, eta, dom, k_samples: int = 65) -> bool:
    """True iff ``k_samples`` equally spaced points of ``[xi, eta]`` are inside."""
    if k_samples < 2:
        raise ValueError("k_samples must be >= 2")
    xi = np.asarray(xi, dtype=float).reshape(1, -1)
    eta = np.asarray(eta, dtype=float).reshape(1, -1)
    s = np.linspace(0.0, 1.0, k_samples)[:, None]
    P = xi + s * (eta - xi)
    try:
        return bool(np.all(_region_contains(dom, P)))
    except Exception:
        return False


def ray_lengths(P, e, dom, tol: float = 1e-10):
    """Distance from each point to the first exit along direction ``e``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    if dom.ray_exit is not None:
        return np.maximum(dom.ray_exit(P, e), 0.0)
    diam = float(dom.diameter)
    step = diam / 256.0
    m = P.shape[0]
    lo = np.zeros(m)
    hi = np.full(m, np.nan)
    active = np.ones(m, dtype=bool)
    t = 0.0
    while active.any() and t < 2.0 * diam:
        t += step
        idx = np.nonzero(active)[0]
        inside = dom.contains(P[idx] + t * e)
        out = idx[~inside]
        hi[out] = t
        lo[idx[inside]] = t
        active[out] = False
    hi[np.isnan(hi)] = 2.0 * diam
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        inside = dom.contains(P + mid[:, None] * e)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def phi_weight(e, xi, dom: CompositeDomain):
    """Ditzian–Totik-type weight ``max sqrt(l1 l2)`` over chords through ``xi``.

    The chord ``[xi - l1 e, xi + l2 e]`` passes through ``xi``, so the
    admissible rectangle of ``(l1, l2)`` is spanned by the two ray
    lengths and the maximum of ``l1 l2`` sits at its far corner.
    Scale invariant in ``e``.
    """
    xi = np.asarray(xi, dtype=float)
    scalar = xi.ndim == 1
    P = np.atleast_2d(xi)
    _check_inside(dom, P)
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    l2 = ray_lengths(P, e, dom)
    l1 = ray_lengths(P, -e, dom)
    val = np.sqrt(np.maximum(l1, 0) * np.maximum(l2, 0))
    return float(val[0]) if scalar else val


@dataclass
class BallSubset:
    """Grid points of a metric ball ``U(xi, t)`` and their total weight."""

    indices: np.ndarray
    weight: float


def metric_ball(xi, t: float, dom: CompositeDomain, grid) -> BallSubset:
    """Grid points ``eta`` with ``rho(xi, eta) <= t``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    _check_inside(dom, xi[None])
    cand = np.asarray(grid.tree.query_ball_point(xi, t), dtype=np.int64)
    if cand.size:
        sd = math.sqrt(float(dom.dist(xi[None])[0]))
        rho = (np.linalg.norm(grid.points[cand] - xi, axis=1)
               + np.abs(grid.sqrt_dist(dom)[cand] - sd))
        cand = np.sort(cand[rho <= t])
    if cand.size == 0:
        raise EmptyBallError(f"no grid point within rho-distance {t:g}")
    return BallSubset(cand, float(np.sum(grid.weights[cand])))


# ======================================================================
# built-in domains
# ======================================================================


def _ellipse_distance(P, a: float, b: float, iters: int = 100):
    """Distance to the ellipse ``x^2/a^2 + y^2/b^2 = 1`` (robust bisection)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    swap = a < b
    e0, e1 = (b, a) if swap else (a, b)
    y0 = np.abs(P[:, 1] if swap else P[:, 0])
    y1 = np.abs(P[:, 0] if swap else P[:, 1])
    out = np.empty(P.shape[0])
    pos1 = y1 > 0
    pos0 = y0 > 0
    # generic case: bisection on the Lagrange parameter
    g = pos0 & pos1
    if g.any():
        z0, z1 = y0[g] / e0, y1[g] / e1
        r0 = (e0 / e1) ** 2
        s0 = z1 - 1.0
        val = z0 * z0 + z1 * z1 - 1.0
        s1 = np.where(val < 0, 0.0, np.sqrt((r0 * z0) ** 2 + z1 * z1) - 1.0)
        lo, hi = np.minimum(s0, s1), np.maximum(s0, s1)
        for _ in range(iters):
            s = 0.5 * (lo + hi)
            n0 = r0 * z0 / (s + r0)
            n1 = z1 / (s + 1.0)
            f = n0 * n0 + n1 * n1 - 1.0
            lo = np.where(f > 0, s, lo)
            hi = np.where(f > 0, hi, s)
        s = 0.5 * (lo + hi)
        x0 = r0 * y0[g] / (s + r0)
        x1 = y1[g] / (s + 1.0)
        out[g] = np.hypot(x0 - y0[g], x1 - y1[g])
    # on the minor axis
    m = ~pos0 & pos1
    out[m] = np.abs(y1[m] - e1)
    # on the major axis
    k = ~pos1
    num = e0 * y0[k]
    den = e0 * e0 - e1 * e1
    near = num < den
    res = np.abs(y0[k] - e0)
    if np.any(near):
        x0 = e0 * e0 * y0[k][near] / den
        x1 = e1 * np.sqrt(np.maximum(1 - (x0 / e0) ** 2, 0))
        res[near] = np.hypot(x0 - y0[k][near], x1)
    out[k] = res
    return out


def _side_cover(A: float, B: float, lam0: float, kappa: float = 0.95,
                margin: float = 0.02, max_charts: int = 40):
    """Greedy chart centres/sizes covering one side of an ellipse.

    The side is the arc ``y = B sqrt(1 - x^2/A^2)`` over ``|x| <= x45``
    where the slope is at most one, widened by ``margin * A``. Each chart
    ``(c, b, L)`` keeps ``[c - 2b, c + 2b]`` inside the arc's domain,
    uses the least admissible ``L`` and keeps the body inside the ellipse.
    """

    def slope(x):
        u = min(abs(x) / A, 1 - 1e-15)
        return B * u / (A * math.sqrt(1 - u * u))

    def params(c, b):
        if abs(c) + 2 * b > 0.98 * A:
            return None
        L = 4.0 * slope(abs(c) + 2 * b) + 1.0
        L = math.ceil(L * 1e6) / 1e6
        u = min((abs(c) + b) / A, 1.0)
        chord = 2.0 * B * math.sqrt(max(1 - u * u, 0.0))
        if L * b > kappa * chord:
            return None
        return L

    def largest(fun, hi):
        lo_b, hi_b = 0.0, hi
        for _ in range(60):
            mid = 0.5 * (lo_b + hi_b)
            if fun(mid):
                lo_b = mid
            else:
                hi_b = mid
        return lo_b

    target = A * A / math.sqrt(A * A + B * B) + margin * A
    b0 = largest(lambda b: params(0.0, b) is not None, 0.49 * A)
    charts = [(0.0, b0, params(0.0, b0))]
    covered = lam0 * b0
    while covered < target:
        def ok(b, covered=covered):
            return params(covered + 0.9 * lam0 * b, b) is not None
        b = largest(ok, charts[-1][1])
        if b < 1e-3 * A or len(charts) > max_charts:
            raise ChartSlopeError("cannot cover the boundary with admissible charts")
        c = covered + 0.9 * lam0 * b
        charts.append((c, b, params(c, b)))
        covered = c + lam0 * b
    out = list(charts)
    for c, b, L in charts[1:]:
        out.append((-c, b, L))
    out.sort(key=lambda t: t[0])
    return out


def _cover_margin(dom: CompositeDomain, seed: int = 0, n: int = 4000) -> float:
    """Largest tested ``delta`` with all sampled near-boundary points covered."""
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox
    pts = lo + (hi - lo) * rng.random((40 * n, dom.dim))
    pts = pts[dom.contains(pts)]
    dist = dom.dist(pts)
    delta = 0.5 * min(dom.lam0 * c.body_depth for c in dom.charts)
    for _ in range(40):
        near = pts[dist < delta]
        if near.shape[0] == 0 or np.all(dom.covered_by_charts(near)):
            return float(delta)
        delta *= 0.8
    return 0.0


def make_ellipse(a: float = 1.0, b: float = 1.0, lam0: float = 0.75) -> CompositeDomain:
    """The ellipse ``x^2/a^2 + y^2/b^2 <= 1`` with a generated chart cover.

    Charts come in four families (upward/downward along each axis); the
    interior box is ``[-0.6 a, 0.6 a] x [-0.6 b, 0.6 b]``.
    """
    if a <= 0 or b <= 0:
        raise ValueError("semi-axes must be positive")
    a, b = float(a), float(b)
    axes = np.array([a, b])

    def inside(P):
        return (P[:, 0] / a) ** 2 + (P[:, 1] / b) ** 2 <= 1.0 + 1e-12

    if a == b:
        def dist(P):
            return np.abs(a - np.linalg.norm(P, axis=1))
    else:
        def dist(P):
            return _ellipse_distance(P, a, b)

    def ray_exit(P, e):
        q = P / axes
        f = e / axes
        aa = float(f @ f)
        qf = q @ f
        cc = np.sum(q * q, axis=1) - 1.0
        disc = np.maximum(qf * qf - aa * cc, 0.0)
        return np.maximum((-qf + np.sqrt(disc)) / aa, 0.0)

    charts = []
    # family: (graph axis, orientation, semi-axis along chart x, semi-axis along chart y)
    for axis, orient, A, B, tag in ((1, 1, a, b, "up"), (1, -1, a, b, "down"),
                                    (0, 1, b, a, "right"), (0, -1, b, a, "left")):
        for k, (c, bb, L) in enumerate(_side_cover(A, B, lam0)):
            off = np.zeros(2)
            off[1 - axis] = c
            charts.append(Chart(axis, orient, off, bb, L, EllipseArcGraph(A, B, c),
                                name=f"{tag}{k}"))
    box = (np.array([-0.6 * a, -0.6 * b]), np.array([0.6 * a, 0.6 * b]))
    kind = "disk" if a == b == 1.0 else "ellipse"
    desc = {"kind": kind} if kind == "disk" else {"kind": "ellipse", "a": a, "b": b}
    dom = CompositeDomain(
        dim=2, inside=inside, boundary_distance=dist, diameter=2 * max(a, b),
        charts=tuple(charts), interior_boxes=(box,), bbox=(-axes, axes), lam0=lam0,
        convex=True, ray_exit=ray_exit, area=math.pi * a * b, description=desc,
    )
    dom.margin = _cover_margin(dom)
    return dom


def make_unit_disk(lam0: float = 0.75) -> CompositeDomain:
    return make_ellipse(1.0, 1.0, lam0)


def make_box(lo, hi) -> CompositeDomain:
    """Axis-aligned box; no charts (its boundary has corners)."""
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    dim = lo.size

    def inside(P):
        return np.all((P >= lo - 1e-12) & (P <= hi + 1e-12), axis=1)

    def dist(P):
        return np.maximum(np.min(np.minimum(P - lo, hi - P), axis=1), 0.0)

    def ray_exit(P, e):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(e > 0, (hi - P) / e, np.where(e < 0, (lo - P) / e, np.inf))
        return np.maximum(np.min(t, axis=1), 0.0)

    return CompositeDomain(
        dim=dim, inside=inside, boundary_distance=dist,
        diameter=float(np.linalg.norm(hi - lo)), interior_boxes=((lo, hi),),
        bbox=(lo, hi), convex=True, ray_exit=ray_exit, area=float(np.prod(hi - lo)),
        description={"kind": "box", "lo": lo.tolist(), "hi": hi.tolist()},
    )


def make_interval(a: float = -1.0, b: float = 1.0) -> CompositeDomain:
    """The interval ``[a, b]`` as a one-dimensional domain."""
    dom = make_box([a], [b])
    dom.description = {"kind": "interval", "a": float(a), "b": float(b)}
    return dom


def make_graph_domain(g, b: float, L: float, d: int = 1, grad=None, hess=None) -> CompositeDomain:
    """The body ``{x in (-b, b)^d, g(x) - L b < y <= g(x)}`` of one upward chart.

    Raises
    ------
    ChartSlopeError
        If ``L`` is below the admissible slope parameter for ``b``.
    """
    if not isinstance(g, GraphFunction):
        g = CallableGraph(g, grad, hess, d=d)
    d = g.d
    chart = Chart(d, 1, np.zeros(d + 1), b, L, g, name="graph")
    D = chart.body_depth

    def inside(P):
        X, Y = P[:, :d], P[:, d]
        dep = g(X) - Y
        return np.all(np.abs(X) <= b + 1e-12, axis=1) & (dep >= -1e-12) & (dep <= D + 1e-12)

    def dist(P):
        X, Y = P[:, :d], P[:, d]
        top = graph_distance(g, X, Y, b)
        bottom = graph_distance(g, X, Y + D, b)
        side = np.min(b - np.abs(X), axis=1)
        return np.maximum(np.minimum(np.minimum(top, bottom), side), 0.0)

    samples = _cube_samples(d, b, 41 if d == 1 else 11)
    gv = g(samples)
    lo = np.concatenate([np.full(d, -b), [gv.min() - D]])
    hi = np.concatenate([np.full(d, b), [gv.max()]])
    boxes = []
    ylo, yhi = gv.max() - 0.8 * D, gv.min() - 0.2 * D
    if yhi > ylo:
        boxes.append((np.concatenate([np.full(d, -b / 2), [ylo]]),
                      np.concatenate([np.full(d, b / 2), [yhi]])))
    dom = CompositeDomain(
        dim=d + 1, inside=inside, boundary_distance=dist,
        diameter=float(np.linalg.norm(hi - lo)), charts=(chart,), interior_boxes=tuple(boxes),
        bbox=(lo, hi), convex=False,
        description={"kind": "graph", "g": g.to_json(), "b": float(b), "L": float(L)},
    )
    return dom


def domain_from_json(obj) -> CompositeDomain:
    """Build a domain from its JSON description (dict, JSON text, or a name)."""
    if isinstance(obj, str):
        text = obj.strip()
        if text.startswith("{"):
            obj = json.loads(text)
        else:
            obj = {"kind": text}
    kind = obj.get("kind")
    if kind == "disk":
        return make_unit_disk()
    if kind == "ellipse":
        return make_ellipse(float(obj["a"]), float(obj["b"]))
    if kind == "graph":
        return make_graph_domain(graph_from_json(obj["g"]), float(obj["b"]), float(obj["L"]))
    if kind == "box":
        return make_box(obj["lo"], obj["hi"])
    if kind == "interval":
        return make_interval(float(obj.get("a", -1.0)), float(obj.get("b", 1.0)))
    raise ValueError(f"unknown domain kind {kind!r}")


def domain_to_json(dom: CompositeDomain) -> str:
    return json.dumps(dom.to_json(), indent=2, sort_keys=True)
