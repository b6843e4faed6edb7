"""Weighted sample grids on domains and sub-regions, and discrete L^p norms."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ResolutionError
from .geometry import CompositeDomain
from .mesh import chebyshev_layers, min_ell1

MODES = ("layered", "tensor", "monte-carlo")


@dataclass(eq=False)
class SampleGrid:
    """Points with positive weights whose sum approximates the region's measure.

    Distances to the boundary, direction weights and essential distances
    are cached per domain/chart, which keeps repeated modulus evaluations
    on the same grid cheap.
    """

    points: np.ndarray
    weights: np.ndarray
    region: str = ""
    seed: int = 0
    mode: str = "tensor"
    resolution: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    @property
    def tree(self) -> cKDTree:
        if "tree" not in self._cache:
            self._cache["tree"] = cKDTree(self.points)
        return self._cache["tree"]

    def cached(self, key, compute):
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]

    def dist(self, dom) -> np.ndarray:
        return self.cached(("dist", id(dom)), lambda: dom.dist(self.points))

    def sqrt_dist(self, dom) -> np.ndarray:
        return self.cached(("sqrt_dist", id(dom)), lambda: np.sqrt(self.dist(dom)))

    def values(self, f) -> np.ndarray:
        return np.asarray(f(self.points), dtype=float).reshape(-1)

    def subset(self, mask, region: str | None = None) -> "SampleGrid":
        mask = np.asarray(mask)
        return SampleGrid(self.points[mask], self.weights[mask], region or self.region,
                          self.seed, self.mode, self.resolution)

    def metadata(self) -> dict:
        return {"region": self.region, "mode": self.mode, "resolution": self.resolution,
                "n_points": len(self), "total_weight": self.total_weight, "seed": self.seed}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(self.dim - 1)] + ["y", "weight"])
            for p, wt in zip(self.points, self.weights):
                w.writerow([f"{v:.17g}" for v in p] + [f"{wt:.17g}"])


def lp_norm(values, weights, p) -> float:
    """``(sum w |v|^p)^(1/p)``, the max of ``|v|`` for ``p = inf``.

    For ``0 < p < 1`` the same formula gives the quasi-norm.
    """
    v = np.abs(np.asarray(values, dtype=float).reshape(-1))
    w = np.asarray(weights, dtype=float).reshape(-1)
    if v.shape != w.shape:
        raise ValueError(f"length mismatch: {v.size} values, {w.size} weights")
    p = float(p)
    if p <= 0:
        raise ValueError("p must be positive")
    if v.size == 0:
        return 0.0
    if math.isinf(p):
        return float(v.max())
    scale = v.max()
    if scale == 0:
        return 0.0
    s = math.fsum((w * (v / scale) ** p).tolist())
    return float(scale * s ** (1.0 / p))


# ----------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------


def _tensor(lo, hi, k):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = [a + (np.arange(k) + 0.5) * (b - a) / k for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return P, float(np.prod((hi - lo) / k))


def _centrality(chart, P):
    """``min(1 - |x|_inf / b, 1 - depth / D)``, negative outside the body."""
    X, Y = chart.to_local(P)
    dep = (chart.g(X) - Y) / chart.body_depth
    inside = chart.contains(P)
    kap = np.minimum(1.0 - np.max(np.abs(X), axis=1) / chart.b, 1.0 - dep)
    return np.where(inside, kap, -np.inf)


def _owner(dom, Q):
    """Index of the owning chart (most central body), ``-1`` for the interior."""
    kq = np.stack([_centrality(c, Q) for c in dom.charts], axis=1)
    own = np.argmax(kq, axis=1)
    own[np.all(np.isneginf(kq), axis=1)] = -1
    return own


def _sub_offsets(k, dim):
    t = (np.arange(k) + 0.5) / k - 0.5
    mesh = np.meshgrid(*([t] * dim), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _owned_part(dom, Q, owner_id, k):
    """Fraction of each sub-cell owned by ``owner_id`` and the owned centroid.

    ``Q`` has shape ``(cells, k**dim, dim)`` of sub-sample positions.
    """
    c, s, dim = Q.shape
    flat = Q.reshape(-1, dim)
    ok = (_owner(dom, flat) == owner_id) & dom.contains(flat)
    ok = ok.reshape(c, s)
    frac = ok.mean(axis=1)
    cnt = np.maximum(ok.sum(axis=1), 1)
    cen = (Q * ok[:, :, None]).sum(axis=1) / cnt[:, None]
    return frac, cen


def _layered(dom: CompositeDomain, resolution: int, k: int = 4):
    """Chebyshev-layer samples on the charts plus a tensor grid elsewhere.

    Every point of the domain is owned by the chart in whose body it is
    most central, or by the interior when no chart contains it. Each
    sample cell is split into ``k**dim`` sub-samples; its weight is the
    owned fraction of its exact measure, placed at the owned centroid.
    """
    dim = dom.dim
    lo, hi = (np.asarray(v, dtype=float) for v in dom.bbox)
    P, cw = _tensor(lo, hi, resolution)
    off = _sub_offsets(k, dim) * ((hi - lo) / resolution)
    Q = P[:, None, :] + off[None]
    frac, cen = _owned_part(dom, Q, -1, k)
    keep = frac > 0
    pts, wts = [cen[keep]], [cw * frac[keep]]
    for ci, ch in enumerate(dom.charts):
        d = ch.d
        layers = chebyshev_layers(resolution, min_ell1(ch))[: resolution + 1]
        hx = 2 * ch.b / resolution
        xs = -ch.b + (np.arange(resolution) + 0.5) * hx
        mesh = np.meshgrid(*([xs] * d), indexing="ij")
        X = np.stack([m.reshape(-1) for m in mesh], axis=1)
        dal = np.diff(layers)
        D = ch.body_depth
        # sub-sample positions in (x, depth) coordinates
        so = _sub_offsets(k, d + 1)
        nx, nl = X.shape[0], resolution
        Xc = np.repeat(X, nl, axis=0)
        lc = np.tile(layers[:-1], nx)
        dl = np.tile(dal, nx)
        Xs = Xc[:, None, :] + so[None, :, :d] * hx
        deps = lc[:, None] + (so[None, :, d] + 0.5) * dl[:, None]
        Ys = ch.g(Xs.reshape(-1, d)).reshape(Xs.shape[:2]) - D * deps
        Qs = ch.to_global(Xs, Ys)
        frac, cen = _owned_part(dom, Qs, ci, k)
        keep = frac > 0
        pts.append(cen[keep])
        wts.append((dl * D * hx**d * frac)[keep])
    return np.vstack(pts), np.concatenate(wts)


def build_grid(region, resolution: int = 64, mode: str = "layered", seed: int = 0) -> SampleGrid:
    """Weighted samples of a domain or region.

    Parameters
    ----------
    region : CompositeDomain or region object
        Regions providing ``sample(resolution)`` (cells, slabs) are sampled
        in their own fitted coordinates. Other regions need ``contains``
        and ``bbox``.
    resolution : int
        Points per axis (per chart for the layered mode).
    mode : {"layered", "tensor", "monte-carlo"}
        ``layered`` places one sample per Chebyshev-layer sub-cell of every
        chart and a tensor grid elsewhere; ``tensor`` clips a lattice;
        ``monte-carlo`` uses ``resolution ** dim`` rejection draws.

    Raises
    ------
    ResolutionError
        If ``resolution < 8`` or fewer than 64 points survive.
    """
    if resolution < 8:
        raise ResolutionError("resolution must be at least 8")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    tag = getattr(region, "description", {}).get("kind", type(region).__name__) \
        if isinstance(region, CompositeDomain) else type(region).__name__
    if hasattr(region, "sample") and not isinstance(region, CompositeDomain):
        P, w = region.sample(resolution)
        mode = "fitted"
    elif mode == "monte-carlo":
        rng = np.random.default_rng(seed)
        lo, hi = (np.asarray(v, dtype=float) for v in region.bbox)
        N = resolution ** len(lo)
        P = lo + (hi - lo) * rng.random((N, len(lo)))
        P = P[region.contains(P)]
        w = np.full(P.shape[0], float(np.prod(hi - lo)) / N)
    elif mode == "layered" and isinstance(region, CompositeDomain) and region.charts:
        P, w = _layered(region, resolution)
    else:
        lo, hi = region.bbox
        P, cw = _tensor(lo, hi, resolution)
        P = P[region.contains(P)]
        w = np.full(P.shape[0], cw)
        if mode == "layered":
            mode = "tensor"
    if P.shape[0] < 64:
        raise ResolutionError(f"only {P.shape[0]} sample points survive; raise the resolution")
    return SampleGrid(np.ascontiguousarray(P), np.ascontiguousarray(w), tag, seed, mode, resolution)
