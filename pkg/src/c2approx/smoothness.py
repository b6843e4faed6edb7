"""Finite differences and moduli of smoothness on domains.

All integrals are weighted sums over a :class:`SampleGrid`; suprema over
the step size run over a geometric net (``per_octave`` points per factor
of two below ``t``, plus ``t`` itself). The net is a sub-lattice of
``{2^(-k/per_octave)}``, so curves in ``t`` share their difference
evaluations.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from ._kernels import segment_power_sum
from .errors import EmptyRegionError, ExponentOrderError, GridTooCoarseWarning, ResolutionError
from .geometry import metric_ball, phi_weight, segments_in_domain
from .mesh import CellPartition, tangent_vector
from .sampling import SampleGrid, build_grid, lp_norm

# ======================================================================
# requests and reports
# ======================================================================


@dataclass
class ModulusRequest:
    """Parameters shared by the moduli.

    Attributes
    ----------
    f : callable
        ``(m, dim) -> (m,)``.
    r : int
        Difference order.
    p : float
        Exponent in ``(0, inf]``.
    t : float
        Scale.
    per_octave, octaves : int
        Density and depth of the step net.
    A0 : float
        Depth parameter of the tangential modulus.
    inner_samples : int
        Quasi-random points for the inner average of the tangential modulus.
    seed : int
    """

    f: Callable
    r: int = 1
    p: float = 2.0
    t: float = 0.1
    per_octave: int = 8
    octaves: int = 5
    A0: float = 4.0
    inner_samples: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not self.t > 0:
            raise ValueError("t must be positive")


@dataclass
class ModulusReport:
    value: float
    breakdown: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    seed: int = 0

    def __float__(self):
        return float(self.value)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, (np.floating, float)):
                return float(f"{float(v):.17g}") if math.isfinite(v) else str(v)
            if isinstance(v, np.integer):
                return int(v)
            return v

        return json.dumps(clean(asdict(self)), sort_keys=True)


# ======================================================================
# differences
# ======================================================================


def difference_coefficients(r: int) -> np.ndarray:
    """``(-1)^(r+k) C(r, k)`` for ``k = 0..r``."""
    return np.array([(-1) ** (r + k) * comb(r, k) for k in range(r + 1)], dtype=float)


def restricted_difference(f, P, step, r: int, region=None, symmetric: bool = False,
                          k_samples: int = 65) -> np.ndarray:
    """Vectorized ``r``-th differences, zero where the segment leaves ``region``.

    ``step`` is a single vector or one per point. With ``symmetric=True``
    the stencil starts at ``P - (r/2) step``. ``f`` is only evaluated at
    admissible stencils.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    step = np.broadcast_to(np.asarray(step, dtype=float), P.shape)
    start = P - 0.5 * r * step if symmetric else P
    out = np.zeros(P.shape[0])
    if region is not None:
        ok = segments_in_domain(start, start + r * step, region, k_samples)
        idx = np.nonzero(ok)[0]
    else:
        idx = np.arange(P.shape[0])
    if idx.size == 0:
        return out
    s0, st = start[idx], step[idx]
    acc = np.zeros(idx.size)
    for k, c in enumerate(difference_coefficients(r)):
        acc += c * np.asarray(f(s0 + k * st), dtype=float).reshape(-1)
    out[idx] = acc
    return out


def finite_difference(f, step, eta, r: int, dom=None, symmetric: bool = False,
                      k_samples: int = 65):
    """``sum_k (-1)^(r+k) C(r,k) f(eta + k step)``, restricted to ``dom`` when given."""
    eta = np.asarray(eta, dtype=float)
    vals = restricted_difference(f, np.atleast_2d(eta), step, r, dom, symmetric, k_samples)
    return float(vals[0]) if eta.ndim == 1 else vals


def decomposition_identity(f, xi, eta, h, r: int):
    """Both sides of the decomposition of ``Delta_h^r f(xi)`` through the point ``eta``.

    The right side combines differences on segments joining points of
    ``[xi, xi + r h]`` with points of ``[xi + r h, eta]`` and ``[xi, eta]``;
    the identity is exact for every ``f``.

    Returns
    -------
    (lhs, rhs) : tuple of float
    """
    xi, eta, h = (np.asarray(v, dtype=float) for v in (xi, eta, h))

    def D(u, v):
        return finite_difference(f, (v - u) / r, u, r)

    lhs = D(xi, xi + r * h)
    end = xi + r * h
    rhs = 0.0
    for j in range(r):
        rhs += (-1) ** j * comb(r, j) * D(xi + j * h, (j / r) * end + (1 - j / r) * eta)
    for j in range(1, r + 1):
        rhs -= (-1) ** j * comb(r, j) * D((1 - j / r) * xi + (j / r) * eta, end)
    return lhs, rhs


# ======================================================================
# helpers
# ======================================================================


def h_net(t: float, per_octave: int = 8, octaves: int = 5) -> np.ndarray:
    """Steps ``2^(-k/per_octave)`` in ``[t 2^-octaves, t)`` followed by ``t``."""
    if t <= 0:
        raise ValueError("t must be positive")
    kmin = math.floor(-per_octave * math.log2(t)) + 1
    kmax = math.floor(-per_octave * (math.log2(t) - octaves) + 1e-9)
    ks = np.arange(kmin, kmax + 1)
    hs = 2.0 ** (-ks / per_octave)
    hs = hs[hs < t * (1 - 1e-12)]
    return np.concatenate([hs[::-1], [t]])


def _as_list(p):
    return list(p) if isinstance(p, (list, tuple, np.ndarray)) else [p]


def _norms(vals, w, ps):
    return [lp_norm(vals, w, p) for p in ps]


def _warn_coarse(count, what):
    if count < 100:
        warnings.warn(f"only {count} grid points contribute to the {what}", GridTooCoarseWarning,
                      stacklevel=3)


def _unit(v):
    v = np.asarray(v, dtype=float).reshape(-1)
    return v / np.linalg.norm(v)


def _grid_for(dom, grid, resolution=48):
    return grid if grid is not None else build_grid(dom, resolution)


# ======================================================================
# directional and Ditzian-Totik moduli
# ======================================================================


def directional_curve(f, dom, directions, r, ps, t_list, grid, per_octave=8, octaves=5,
                      support=None, region=None):
    """``{(t, p): omega^r(f, t; E)_p}`` sharing difference evaluations across ``t`` and ``p``.

    ``support`` masks the grid points integrated over; ``region`` restricts
    the differences (defaults to ``dom``).
    """
    region = dom if region is None else region
    P, w = grid.points, grid.weights
    if support is not None:
        P, w = P[support], w[support]
    _warn_coarse(P.shape[0], "directional modulus")
    ps = _as_list(ps)
    cache = {}
    out = {}
    for t in t_list:
        best = {p: 0.0 for p in ps}
        for h in h_net(t, per_octave, octaves):
            key = round(float(h), 15)
            if key not in cache:
                vals = []
                for e in directions:
                    dv = restricted_difference(f, P, h * _unit(e), r, region)
                    vals.append(_norms(dv, w, ps))
                cache[key] = np.max(np.array(vals), axis=0)
            for a, p in enumerate(ps):
                best[p] = max(best[p], float(cache[key][a]))
        for p in ps:
            out[(t, p)] = best[p]
    return out


def directional_modulus(req: ModulusRequest, dom, directions, grid: SampleGrid | None = None,
                        support=None, region=None) -> ModulusReport:
    """``sup_{e in E} sup_{0 < h <= t} || Delta^r_{h e}(f, dom, .) ||_p``."""
    directions = [np.asarray(e, dtype=float) for e in directions]
    if not directions:
        raise ValueError("directions must be nonempty")
    grid = _grid_for(dom, grid)
    val = directional_curve(req.f, dom, directions, req.r, [req.p], [req.t], grid,
                            req.per_octave, req.octaves, support, region)[(req.t, req.p)]
    return ModulusReport(val, {"directions": [e.tolist() for e in directions]},
                         {"grid": grid.metadata(), "per_octave": req.per_octave,
                          "octaves": req.octaves, "r": req.r, "p": req.p, "t": req.t}, req.seed)


def _phi_on_grid(dom, grid, e):
    e = _unit(e)
    return grid.cached(("phi", id(dom), tuple(np.round(e, 15))), lambda: phi_weight(e, grid.points, dom))


def dt_curve(f, dom, e, r, ps, t_list, grid, per_octave=8, octaves=5):
    """``{(t, p): DT modulus}`` along direction ``e``."""
    e = _unit(e)
    phi = _phi_on_grid(dom, grid, e)
    P, w = grid.points, grid.weights
    ps = _as_list(ps)
    cache, out = {}, {}
    for t in t_list:
        best = {p: 0.0 for p in ps}
        for h in h_net(min(t, 1.0), per_octave, octaves):
            key = round(float(h), 15)
            if key not in cache:
                dv = restricted_difference(f, P, (h * phi)[:, None] * e, r, dom, symmetric=True)
                cache[key] = _norms(dv, w, ps)
            for a, p in enumerate(ps):
                best[p] = max(best[p], cache[key][a])
        for p in ps:
            out[(t, p)] = best[p]
    return out


def dt_modulus(req: ModulusRequest, dom, e, grid: SampleGrid | None = None) -> ModulusReport:
    """Ditzian-Totik-type modulus: symmetric steps ``h phi(e, xi) e``, ``h <= min(t, 1)``."""
    grid = _grid_for(dom, grid)
    val = dt_curve(req.f, dom, e, req.r, [req.p], [req.t], grid, req.per_octave,
                   req.octaves)[(req.t, req.p)]
    return ModulusReport(val, {"direction": _unit(e).tolist()},
                         {"grid": grid.metadata(), "r": req.r, "p": req.p, "t": req.t}, req.seed)


# ======================================================================
# tangential modulus
# ======================================================================


def _halton(k, d, seed):
    return 2.0 * qmc.Halton(d, scramble=True, seed=seed).random(k) - 1.0


def _essential_on_grid(chart, grid):
    def compute():
        inside = chart.contains(grid.points)
        ed = np.full(len(grid), -np.inf)
        ed[inside] = chart.essential_distance(grid.points[inside])
        return ed

    return grid.cached(("essential", id(chart)), compute)


def tangential_values(f, chart, dom, r, ps, t, grid, per_octave=8, octaves=5, A0=4.0,
                      inner_samples=32, seed=0, chunk=4096):
    """``{p: tangential modulus at t}`` for one chart.

    Raises
    ------
    EmptyRegionError
        When no grid point lies in ``G^t``.
    """
    t = min(float(t), 1.0)
    ed = _essential_on_grid(chart, grid)
    mask = ed >= A0 * t * t
    if not np.any(mask):
        raise EmptyRegionError(f"G^t is empty at t={t:g} (depth threshold {A0 * t * t:g})")
    P, w = grid.points[mask], grid.weights[mask]
    X, _ = chart.to_local(P)
    d = chart.d
    H = _halton(inner_samples, d, seed)
    rad = t * chart.b
    K = H.shape[0]
    ps = _as_list(ps)
    # the inner sample geometry does not depend on the step
    geo = []
    for j in range(1, d + 1):
        for a in range(0, P.shape[0], chunk):
            Xa = X[a:a + chunk]
            U = Xa[:, None, :] + rad * H[None]
            valid = (np.linalg.norm(U - Xa[:, None, :], axis=2) <= rad) & np.all(np.abs(U) < chart.b, axis=2)
            ok = valid.reshape(-1)
            Vg = chart.vec_to_global(tangent_vector(chart, U.reshape(-1, d)[ok], j))
            base = np.repeat(P[a:a + chunk], K, axis=0)[ok]
            geo.append((j, ok, base, Vg))
    best = {p: 0.0 for p in ps}
    for s in h_net(t, per_octave, octaves):
        acc = {(j, p): [] for j in range(1, d + 1) for p in ps}
        for j, ok, base, Vg in geo:
            dv = np.zeros(ok.size)
            dv[ok] = restricted_difference(f, base, s * Vg, r, dom)
            dv = np.abs(dv).reshape(-1, K)
            for p in ps:
                if math.isinf(p):
                    acc[(j, p)].append(dv.max(axis=1))
                else:
                    acc[(j, p)].append((2.0**d / K) * np.sum(dv**p, axis=1))
        for (j, p), parts in acc.items():
            inner = np.concatenate(parts)
            if math.isinf(p):
                val = float(inner.max()) if inner.size else 0.0
            else:
                val = lp_norm(inner ** (1.0 / p), w, p)
            best[p] = max(best[p], val)
    return best


def tangential_modulus(req: ModulusRequest, chart, dom, grid: SampleGrid | None = None) -> ModulusReport:
    """Tangential modulus of ``f`` on one chart (``t`` is clamped to 1)."""
    grid = _grid_for(dom, grid)
    vals = tangential_values(req.f, chart, dom, req.r, [req.p], req.t, grid, req.per_octave,
                             req.octaves, req.A0, req.inner_samples, req.seed)
    return ModulusReport(vals[req.p], {"chart": chart.name},
                         {"grid": grid.metadata(), "A0": req.A0, "inner_samples": req.inner_samples,
                          "t_effective": min(req.t, 1.0)}, req.seed)


# ======================================================================
# full modulus
# ======================================================================


def full_modulus_curve(f, dom, r, ps, t_list, grid, per_octave=8, octaves=5, A0=4.0,
                       inner_samples=32, seed=0):
    """``{(t, p): (value, breakdown)}`` of the composite modulus."""
    ps = _as_list(ps)
    dim = dom.dim
    dts = [dt_curve(f, dom, np.eye(dim)[i], r, ps, t_list, grid, per_octave, octaves)
           for i in range(dim)]
    out = {}
    for t in t_list:
        tans = {}
        for ch in dom.charts:
            tans[ch.name] = tangential_values(f, ch, dom, r, ps, t, grid, per_octave, octaves,
                                              A0, inner_samples, seed)
        for p in ps:
            bd = {f"dt_e{i + 1}": dts[i][(t, p)] for i in range(dim)}
            phi_part = max(bd.values())
            tan_part = math.fsum(v[p] for v in tans.values())
            bd.update({f"tan_{k}": v[p] for k, v in tans.items()})
            bd["phi_part"] = phi_part
            bd["tan_part"] = tan_part
            out[(t, p)] = (phi_part + tan_part, bd)
    return out


def full_modulus(req: ModulusRequest, dom, grid: SampleGrid | None = None) -> ModulusReport:
    """``max_i DT(e_i) + sum over charts of the tangential modulus``."""
    grid = _grid_for(dom, grid)
    val, bd = full_modulus_curve(req.f, dom, req.r, [req.p], [req.t], grid, req.per_octave,
                                 req.octaves, req.A0, req.inner_samples, req.seed)[(req.t, req.p)]
    return ModulusReport(val, bd, {"grid": grid.metadata(), "r": req.r, "p": req.p, "t": req.t,
                                   "A0": req.A0, "per_octave": req.per_octave,
                                   "octaves": req.octaves}, req.seed)


# ======================================================================
# Ivanov average moduli
# ======================================================================


def ivanov_w(f, xi, delta: float, r: int, q, dom, grid: SampleGrid) -> float:
    """q-average over the metric ball ``U(xi, delta)`` of ``Delta^r_{(eta - xi)/r} f(xi)``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    ball = metric_ball(xi, delta, dom, grid)
    eta = grid.points[ball.indices]
    base = np.broadcast_to(xi, eta.shape)
    dv = restricted_difference(f, base, (eta - xi) / r, r, dom)
    return lp_norm(dv, grid.weights[ball.indices] / ball.weight, q)


def _ball_pairs(grid, dom, delta, idx):
    lists = grid.tree.query_ball_point(grid.points[idx], delta)
    lens = np.array([len(l) for l in lists], dtype=np.int64)
    nb = np.concatenate([np.asarray(l, dtype=np.int64) for l in lists]) if lens.sum() else np.zeros(0, np.int64)
    owner = np.repeat(idx, lens)
    sq = grid.sqrt_dist(dom)
    rho = np.linalg.norm(grid.points[nb] - grid.points[owner], axis=1) + np.abs(sq[nb] - sq[owner])
    return owner, nb, rho


def ivanov_tau_curve(f, deltas, r, p_q, dom, grid, chunk=1024):
    """``{(delta, p, q): tau_r(f, delta)_{p,q}}`` sharing the ball searches across ``delta``."""
    for p, q in p_q:
        if q > p:
            raise ExponentOrderError(f"need q <= p, got q={q}, p={p}")
    deltas = sorted(deltas)
    dmax = deltas[-1]
    fv = grid.values(f)
    qs = sorted({q for _, q in p_q})
    n = len(grid)
    wvals = {(dl, q): np.zeros(n) for dl in deltas for q in qs}
    for a in range(0, n, chunk):
        idx = np.arange(a, min(a + chunk, n))
        owner, nb, rho = _ball_pairs(grid, dom, dmax, idx)
        if r == 1:
            dv = fv[nb] - fv[owner]
        else:
            xi = grid.points[owner]
            dv = restricted_difference(f, xi, (grid.points[nb] - xi) / r, r, dom)
        wt = grid.weights[nb]
        for dl in deltas:
            sel = rho <= dl
            o, v, ww = owner[sel], dv[sel], wt[sel]
            starts = np.searchsorted(o, idx)
            starts = np.append(starts, o.size)
            for q in qs:
                acc, ws = segment_power_sum(v, ww, starts, q)
                with np.errstate(invalid="ignore", divide="ignore"):
                    if math.isinf(q):
                        wq = acc
                    else:
                        wq = np.where(ws > 0, (acc / np.where(ws > 0, ws, 1.0)) ** (1.0 / q), 0.0)
                wvals[(dl, q)][idx] = wq
    return {(dl, p, q): lp_norm(wvals[(dl, q)], grid.weights, p) for dl in deltas for p, q in p_q}


def ivanov_tau(f, delta: float, r: int, p, q, dom, grid: SampleGrid) -> float:
    """``|| w_r(f, ., delta)_q ||_p`` over the grid.

    Raises
    ------
    ExponentOrderError
        If ``q > p``.
    """
    return ivanov_tau_curve(f, [delta], r, [(p, q)], dom, grid)[(delta, p, q)]


# ======================================================================
# local (cell-wise) moduli
# ======================================================================


def _extent(P, v):
    proj = P @ v
    return float(proj.max() - proj.min()) if proj.size else 0.0


def region_modulus(f, region, directions, r, ps, points, weights, per_octave=8, octaves=6):
    """``omega^r(f, E; dirs)_p`` with steps up to the region's extent (Whitney form).

    Differences are restricted to ``region``; the L^p norm runs over the
    supplied region samples.
    """
    ps = _as_list(ps)
    best = {p: 0.0 for p in ps}
    for e in directions:
        e = _unit(e)
        ext = _extent(points, e)
        if ext <= 0:
            continue
        for h in h_net(ext / r, per_octave, octaves):
            dv = restricted_difference(f, points, h * e, r, region)
            for p, v in zip(ps, _norms(dv, weights, ps)):
                best[p] = max(best[p], v)
    return best


def cell_moduli(f, partition: CellPartition, r: int, ps, resolution: int = 8, x_star=None,
                per_octave: int = 8, octaves: int = 6):
    """Per-cell pairs ``(omega(f, I*; e_{d+1})_p, omega(f, S; E(x*))_p)``.

    ``x_star`` maps a cell index ``i`` to a point of ``Delta*_i``
    (default: its centre).

    Returns
    -------
    dict mapping ``(i, j)`` to ``{p: (a, b)}``.
    """
    ps = _as_list(ps)
    ch = partition.chart
    up = ch.vec_to_global(np.eye(ch.dim)[-1])
    out = {}
    for i, j in partition.indices():
        E = partition.extended_cell(i, j)
        xs = None if x_star is None else x_star(i)
        S, _ = partition.parallelepipeds(i, j, xs)
        PE, wE = E.sample(resolution)
        PS, wS = S.sample(resolution)
        tang, _ = S.edge_directions()
        a = region_modulus(f, E, [up], r, ps, PE, wE, per_octave, octaves)
        b = region_modulus(f, S, tang, r, ps, PS, wS, per_octave, octaves)
        out[(i, j)] = {p: (a[p], b[p]) for p in ps}
    return out


def local_modulus(f, partition: CellPartition, r: int, p, resolution: int = 8, x_star=None,
                  per_octave: int = 8, octaves: int = 6) -> float:
    """``[sum over cells of omega(f, I*; e_{d+1})^p + omega(f, S; E(x*))^p]^(1/p)`` (max for ``p = inf``)."""
    cm = cell_moduli(f, partition, r, [p], resolution, x_star, per_octave, octaves)
    vals = np.array([v[p] for v in cm.values()])
    if math.isinf(p):
        return float(vals.max())
    return float(math.fsum((vals**p).reshape(-1).tolist()) ** (1.0 / p))


# ======================================================================
# univariate moduli
# ======================================================================


def _gl_panels(a, b, panels, order):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * x).reshape(-1), (half[:, None] * w).reshape(-1)


def _diff_1d(f, x, h, r):
    acc = np.zeros_like(x)
    for k, c in enumerate(difference_coefficients(r)):
        acc += c * np.asarray(f(x + k * h), dtype=float)
    return acc


def averaged_modulus_1d(f, interval, t: float, r: int = 1, p=2.0, h_nodes: int = 24,
                        panels: int = 512, order: int = 4) -> float:
    """``( t^-1 int_{t/4r}^t int_{I - rh} |Delta_h^r f(x)|^p dx dh )^(1/p)``.

    ``f`` acts on 1-D arrays. For ``p = inf`` the sup over ``h`` and ``x``
    is taken on dense samples.

    Raises
    ------
    ValueError
        If ``t`` exceeds the length of the interval.
    """
    a, b = map(float, interval)
    if not 0 < t <= b - a:
        raise ValueError(f"t={t:g} must lie in (0, |I|] = (0, {b - a:g}]")
    if math.isinf(p):
        best = 0.0
        for h in np.linspace(t / (4 * r), t, 64):
            if b - r * h <= a:
                continue
            x = np.linspace(a, b - r * h, 2001)
            best = max(best, float(np.max(np.abs(_diff_1d(f, x, h, r)))))
        return best
    hs, hw = _gl_panels(t / (4 * r), t, 1, h_nodes)
    total = 0.0
    for h, wh in zip(hs, hw):
        if b - r * h <= a:
            continue
        x, wx = _gl_panels(a, b - r * h, panels, order)
        total += wh * float(np.dot(wx, np.abs(_diff_1d(f, x, h, r)) ** p))
    return (total / t) ** (1.0 / p)


def sup_modulus_1d(f, interval, t: float, r: int = 1, p=2.0, per_octave: int = 8,
                   octaves: int = 8, panels: int = 512, order: int = 4) -> float:
    """``sup_{0 < h <= t} || Delta_h^r f ||_{L^p(I - rh)}`` on the step net."""
    a, b = map(float, interval)
    best = 0.0
    for h in h_net(t, per_octave, octaves):
        if b - r * h <= a:
            continue
        if math.isinf(p):
            x = np.linspace(a, b - r * h, 4001)
            best = max(best, float(np.max(np.abs(_diff_1d(f, x, h, r)))))
        else:
            x, wx = _gl_panels(a, b - r * h, panels, order)
            best = max(best, float(np.dot(wx, np.abs(_diff_1d(f, x, h, r)) ** p)) ** (1.0 / p))
    return best
