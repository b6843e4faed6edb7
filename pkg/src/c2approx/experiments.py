"""Numerical studies: Jackson and inverse ratios, modulus comparisons, Bernstein
and Whitney spot-checks, plus reporting.

Every study returns a :class:`Table` of rows ``(lhs, rhs, ratio)``; a row
whose sides fall below ``degenerate_tol * max(1, ||f||)`` is flagged and
left out of the ratio statistics. A :class:`Workspace` caches grids,
moduli and best-approximation errors so studies sharing a domain reuse
each other's work.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import qmc

import cvxopt as cvx

from .bestapprox import _CVX_OPTIONS, best_approx, best_approx_sequence
from .geometry import Chart, CompositeDomain, rho_hat
from .mesh import _ChartRegion, build_partition
from .polynomial import MultiPolynomial, total_degree_exponents
from .sampling import SampleGrid, build_grid, lp_norm
from .smoothness import cell_moduli, full_modulus_curve, ivanov_tau_curve
from .unity import special_unity

# ======================================================================
# test functions
# ======================================================================

_RADIAL_CENTER = np.array([0.2, 0.1])


def _cubic(P):
    x, y = P[:, 0], P[:, 1]
    return x**3 - 2.0 * x * y + y * y + 1.0


def _exp(P):
    return np.exp(P[:, 0] + P[:, 1])


def _sincos(P):
    return np.sin(3.0 * P[:, 0]) * np.cos(2.0 * P[:, 1])


def _radial(P):
    return np.linalg.norm(P[:, :2] - _RADIAL_CENTER, axis=1) ** 1.5


def _spline(P):
    return np.maximum(P[:, 0] - 0.1, 0.0) ** 2


def _const(P):
    return np.ones(P.shape[0])


def _abs(P):
    return np.abs(P[:, 0])


@dataclass(frozen=True)
class TestFunction:
    name: str
    f: Callable
    smoothness: str
    poly_degree: int | None = None

    def __call__(self, P):
        return self.f(np.atleast_2d(P))


SUITE = {
    "cubic": TestFunction("cubic", _cubic, "polynomial of degree 3", 3),
    "exp": TestFunction("exp", _exp, "analytic"),
    "sincos": TestFunction("sincos", _sincos, "analytic"),
    "radial": TestFunction("radial", _radial, "C^{1,1/2} at one interior point"),
    "spline": TestFunction("spline", _spline, "C^1 with a jump of the second derivative"),
}
EXTRA = {"const": TestFunction("const", _const, "constant", 0),
         "abs": TestFunction("abs", _abs, "Lipschitz with a kink at x = 0")}


def test_suite(names=None) -> list[TestFunction]:
    """The fixed planar test functions (all of them when ``names`` is None)."""
    pool = {**SUITE, **EXTRA}
    if names is None:
        return list(SUITE.values())
    return [pool[n] for n in names]


# ======================================================================
# configuration, tables, workspace
# ======================================================================


@dataclass
class ExperimentConfig:
    """Discretization knobs shared by the studies.

    ``octaves`` sets the depth of the step net below ``t``; moduli of
    regular functions peak at the top of the net, so two octaves keep the
    studies affordable.
    """

    resolution: int = 24
    per_octave: int = 8
    octaves: int = 2
    A0: float = 4.0
    inner_samples: int = 32
    seed: int = 0
    ratio_bound: float = 10.0
    degenerate_tol: float = 1e-12
    cell_resolution: int = 8

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


COLUMNS = ("experiment", "f", "param", "value", "r", "p", "q", "cell", "lhs", "rhs", "ratio",
           "degenerate", "grid_mode", "grid_resolution", "grid_points", "seed")


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.12e}"
    if v is None:
        return ""
    return str(v)


@dataclass
class Row:
    experiment: str
    f: str
    param: str
    value: float
    lhs: float
    rhs: float
    r: int | None = None
    p: float | None = None
    q: float | None = None
    cell: str = ""
    grid_mode: str = ""
    grid_resolution: int = 0
    grid_points: int = 0
    seed: int = 0
    degenerate: bool = False

    @property
    def ratio(self) -> float:
        if self.degenerate or self.rhs == 0:
            return math.nan
        return self.lhs / self.rhs

    def cells(self):
        d = asdict(self)
        d["ratio"] = self.ratio
        return [_fmt(d[c]) for c in COLUMNS]


@dataclass
class Table:
    name: str
    rows: list = field(default_factory=list)
    bound: float = 10.0
    meta: dict = field(default_factory=dict)

    def add(self, row: Row, scale: float, tol: float):
        floor = tol * max(1.0, scale)
        row.degenerate = bool(row.lhs < floor or row.rhs < floor)
        self.rows.append(row)

    def ratios(self, key=None) -> dict:
        """Non-degenerate ratios grouped by ``key(row)`` (default: function name)."""
        key = key or (lambda r: r.f)
        out = {}
        for r in self.rows:
            if not r.degenerate:
                out.setdefault(key(r), []).append(r.ratio)
        return out

    def spread(self, key=None) -> dict:
        """``max / min`` of the ratios per group."""
        return {k: (max(v) / min(v) if min(v) > 0 else math.inf)
                for k, v in self.ratios(key).items()}

    def summary(self, key=None) -> dict:
        rat = self.ratios(key)
        return {k: {"max": max(v), "min": min(v), "spread": max(v) / min(v) if min(v) > 0 else math.inf,
                    "rows": len(v)} for k, v in rat.items()}

    @property
    def passed(self) -> bool:
        return all(s <= self.bound for s in self.spread().values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()


class Workspace:
    """Caches grids, moduli, best-approximation errors and Ivanov moduli."""

    def __init__(self, dom: CompositeDomain, config: ExperimentConfig | None = None):
        self.dom = dom
        self.config = config or ExperimentConfig()
        self._grids = {}
        self._mod = {}
        self._best = {}
        self._tau = {}

    def grid(self, resolution: int | None = None) -> SampleGrid:
        res = resolution or self.config.resolution
        if res not in self._grids:
            self._grids[res] = build_grid(self.dom, res, seed=self.config.seed)
        return self._grids[res]

    def norm(self, fn: TestFunction, resolution=None) -> float:
        return float(np.max(np.abs(self.grid(resolution).values(fn))))

    def modulus(self, fn: TestFunction, r: int, ts, ps, resolution=None) -> dict:
        """``{(t, p): omega^r(f, t)_p}`` of the composite modulus."""
        c = self.config
        res = resolution or c.resolution
        missing = [t for t in ts if any((fn.name, r, res, t, p) not in self._mod for p in ps)]
        if missing:
            vals = full_modulus_curve(fn, self.dom, r, list(ps), missing, self.grid(res),
                                      c.per_octave, c.octaves, c.A0, c.inner_samples, c.seed)
            for (t, p), (v, _) in vals.items():
                self._mod[(fn.name, r, res, t, p)] = v
        return {(t, p): self._mod[(fn.name, r, res, t, p)] for t in ts for p in ps}

    def best_errors(self, fn: TestFunction, ns, p, resolution=None) -> dict:
        """``{n: E_n(f)_p}`` on the grid (made nonincreasing in ``n``)."""
        res = resolution or self.config.resolution
        ns = sorted(set(int(n) for n in ns))
        missing = [n for n in ns if (fn.name, res, n, p) not in self._best]
        if missing:
            g = self.grid(res)
            if p == 2:
                for r in best_approx_sequence(fn, g, missing, 2.0):
                    self._best[(fn.name, res, r.n, p)] = r.error
            else:
                for n in missing:
                    self._best[(fn.name, res, n, p)] = best_approx(fn, g, n, p).error
        out, run = {}, math.inf
        known = sorted(n for (name, rs, n, pp) in self._best if name == fn.name and rs == res and pp == p)
        for n in known:
            run = min(run, self._best[(fn.name, res, n, p)])
            if n in ns:
                out[n] = run
        return out

    def tau(self, fn: TestFunction, r: int, deltas, p, q, resolution=None) -> dict:
        res = resolution or self.config.resolution
        missing = [d for d in deltas if (fn.name, r, res, d, p, q) not in self._tau]
        if missing:
            vals = ivanov_tau_curve(fn, missing, r, [(p, q)], self.dom, self.grid(res))
            for (d, pp, qq), v in vals.items():
                self._tau[(fn.name, r, res, d, pp, qq)] = v
        return {d: self._tau[(fn.name, r, res, d, p, q)] for d in deltas}


def _grid_cols(g: SampleGrid) -> dict:
    return {"grid_mode": g.mode, "grid_resolution": g.resolution, "grid_points": len(g)}


def _workspace(dom, config, ws):
    if ws is not None:
        return ws
    return Workspace(dom, config)


# ======================================================================
# Jackson, inverse and comparison studies
# ======================================================================


def run_jackson(dom, suite, r: int, p, n_list, config: ExperimentConfig | None = None,
                resolution: int | None = None, ws: Workspace | None = None) -> Table:
    """``E_n(f)_p`` against ``omega^r(f, 1/n)_p`` for each ``f`` and ``n``."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    ws = _workspace(dom, config, ws)
    c = ws.config
    g = ws.grid(resolution)
    tab = Table("jackson", bound=c.ratio_bound, meta={"r": r, "p": p})
    for fn in suite:
        E = ws.best_errors(fn, n_list, p, resolution)
        om = ws.modulus(fn, r, [1.0 / n for n in n_list], [p], resolution)
        scale = ws.norm(fn, resolution)
        for n in n_list:
            tab.add(Row("jackson", fn.name, "n", n, E[n], om[(1.0 / n, p)], r, p, None,
                        seed=c.seed, **_grid_cols(g)), scale, c.degenerate_tol)
    return tab


def inverse_rhs(E: dict, n: int, r: int) -> float:
    """``n^-r sum_{j <= n} (j + 1)^(r - 1) E_j``."""
    return math.fsum((j + 1) ** (r - 1) * E[j] for j in range(n + 1)) / n**r


def run_inverse(dom, suite, r: int, p, n_list, config: ExperimentConfig | None = None,
                with_tau: bool = True, resolution: int | None = None,
                ws: Workspace | None = None) -> Table:
    """``omega^r(f, 1/n)_p`` (and ``tau_r(f, 1/n)_{p,p}``) against the inverse sum."""
    if p < 1:
        raise ValueError("the inverse study needs p >= 1")
    n_list = list(n_list)
    ws = _workspace(dom, config, ws)
    c = ws.config
    g = ws.grid(resolution)
    tab = Table("inverse", bound=c.ratio_bound, meta={"r": r, "p": p})
    for fn in suite:
        E = ws.best_errors(fn, range(max(n_list) + 1), p, resolution)
        om = ws.modulus(fn, r, [1.0 / n for n in n_list], [p], resolution)
        tau = ws.tau(fn, r, [1.0 / n for n in n_list], p, p, resolution) if with_tau else {}
        scale = ws.norm(fn, resolution)
        for n in n_list:
            rhs = inverse_rhs(E, n, r)
            tab.add(Row("inverse", fn.name, "n", n, om[(1.0 / n, p)], rhs, r, p, None,
                        seed=c.seed, **_grid_cols(g)), scale, c.degenerate_tol)
            if with_tau:
                tab.add(Row("inverse-tau", fn.name, "n", n, tau[1.0 / n], rhs, r, p, p,
                            seed=c.seed, **_grid_cols(g)), scale, c.degenerate_tol)
    return tab


def run_tau_compare(dom, suite, r: int, p, q, t_list, A: float = 1.0,
                    config: ExperimentConfig | None = None, resolution: int | None = None,
                    ws: Workspace | None = None) -> Table:
    """``omega^r(f, t)_p / tau_r(f, A t)_{p,q}`` over ``t``."""
    ws = _workspace(dom, config, ws)
    c = ws.config
    g = ws.grid(resolution)
    tab = Table("tau-compare", bound=c.ratio_bound, meta={"r": r, "p": p, "q": q, "A": A})
    for fn in suite:
        om = ws.modulus(fn, r, list(t_list), [p], resolution)
        tau = ws.tau(fn, r, [A * t for t in t_list], p, q, resolution)
        scale = ws.norm(fn, resolution)
        for t in t_list:
            tab.add(Row("tau-compare", fn.name, "t", t, om[(t, p)], tau[A * t], r, p, q,
                        seed=c.seed, **_grid_cols(g)), scale, c.degenerate_tol)
    return tab


def fit_tau_constant(dom, suite, r, p, q, t_list, A_list=(0.5, 1.0, 2.0, 4.0),
                     config=None, ws=None):
    """Smallest ``C`` per ``A`` with ``omega(f, t) <= C tau(f, A t)`` on the suite.

    Returns ``{A: C}``; ``C`` does not increase with ``A`` since ``tau``
    grows with its scale.
    """
    ws = _workspace(dom, config, ws)
    out = {}
    for A in A_list:
        tab = run_tau_compare(dom, suite, r, p, q, t_list, A, ws=ws)
        rat = [x for v in tab.ratios().values() for x in v]
        out[A] = max(rat) if rat else 0.0
    return out


# ======================================================================
# Bernstein spot-check
# ======================================================================

BERNSTEIN_ORDERS = ((1, 0, 0), (0, 0, 1), (1, 1, 0))


def _body(chart: Chart, lam: float) -> _ChartRegion:
    d = chart.d
    return _ChartRegion(chart, [-lam * chart.b] * d, [lam * chart.b] * d, 0.0, lam)


def _random_poly(n, lo, hi, rng, dim) -> MultiPolynomial:
    coef = rng.standard_normal((n + 1,) * dim)
    return MultiPolynomial(coef, lo, hi, n)


def _dir_deriv(P: MultiPolynomial, v) -> MultiPolynomial:
    out = None
    for k, vk in enumerate(v):
        if vk != 0:
            term = P.deriv(k) * float(vk)
            out = term if out is None else out + term
    return out if out is not None else P * 0.0


def _tangent_slopes(chart: Chart, X, phi, lam, mu, u_samples):
    """Range ``[lo, hi]`` of ``d_k g(u)`` over admissible ``u`` for each tangent index ``k``."""
    d = chart.d
    s = np.linspace(-1.0, 1.0, u_samples)
    out = []
    for k in range(d):
        lo = hi = None
        for ax in range(d):
            for sv in s:
                U = X.copy()
                U[:, ax] = np.clip(X[:, ax] + mu * phi * sv, -lam * chart.b, lam * chart.b)
                gk = chart.g.grad(U)[:, k]
                lo = gk if lo is None else np.minimum(lo, gk)
                hi = gk if hi is None else np.maximum(hi, gk)
        out.append((lo, hi))
    return out


def _sup_extremal(a, Q):
    """Maximize ``a . v`` subject to ``|Q v| <= 1``; None when the solver fails."""
    G = cvx.matrix(np.vstack([Q, -Q]))
    h = cvx.matrix(np.ones(2 * Q.shape[0]))
    try:
        sol = cvx.solvers.lp(cvx.matrix(-np.asarray(a, dtype=float)), G, h, options=_CVX_OPTIONS)
    except (ValueError, ArithmeticError):
        return None
    if sol["x"] is None or sol["status"] not in ("optimal", "unknown"):
        return None
    v = np.array(sol["x"]).reshape(-1)
    return v / max(1.0, np.abs(Q @ v).max())


class _BernsteinSetup:
    """Sample sets and derivative data shared by all polynomials of one chart."""

    def __init__(self, chart: Chart, lam=1.5, mu=2.0, resolution=64, u_samples=17):
        self.chart, self.lam, self.mu = chart, lam, mu
        G = _body(chart, 1.0)
        L = _body(chart, lam)
        self.G_pts, self.G_w = G.sample(resolution)
        self.L_pts, self.L_w = L.sample(resolution)
        self.lo, self.hi = self.L_pts.min(axis=0), self.L_pts.max(axis=0)
        self.X, Y = chart.to_local(self.G_pts)
        self.gap = np.sqrt(np.maximum(chart.g(self.X) - Y, 0.0))
        self.up = chart.vec_to_global(np.eye(chart.dim)[-1])
        self.tangents = [chart.vec_to_global(np.eye(chart.dim)[k]) for k in range(chart.d)]
        self._slopes = {}
        self._ops = {}
        self.u_samples = u_samples

    def phi(self, n):
        return self.gap + 1.0 / n

    def slopes(self, n):
        if n not in self._slopes:
            self._slopes[n] = _tangent_slopes(self.chart, self.X, self.phi(n), self.lam,
                                              self.mu, self.u_samples)
        return self._slopes[n]

    def terms(self, P: MultiPolynomial, n, order):
        """Numerator arrays, one per tangent index (a single one when ``|alpha| = 0``)."""
        a, i, j = order
        F = P
        for _ in range(i + j):
            F = _dir_deriv(F, self.up)
        w = self.phi(n) ** i
        if a == 0:
            return [w * np.abs(F(self.G_pts))]
        dup = _dir_deriv(F, self.up)(self.G_pts)
        out = []
        for ek, (lo, hi) in zip(self.tangents, self.slopes(n)):
            dk = _dir_deriv(F, ek)(self.G_pts)
            out.append(w * np.maximum(np.abs(dk + lo * dup), np.abs(dk + hi * dup)))
        return out

    def ratio(self, P, n, order, p):
        a, i, j = order
        den = n ** (a + 2 * j + i) * lp_norm(P(self.L_pts), self.L_w, p)
        if den == 0:
            return 0.0
        return max(lp_norm(v, self.G_w, p) for v in self.terms(P, n, order)) / den

    def _operators(self, n, order):
        """Basis data and the frozen-slope operators (rows on ``G``, orthonormal columns)."""
        key = (n, order)
        if key in self._ops:
            return self._ops[key]
        dim = self.chart.dim
        exps = total_degree_exponents(n, dim)
        basis = []
        for e in exps:
            c = np.zeros((n + 1,) * dim)
            c[tuple(e)] = 1.0
            basis.append(MultiPolynomial(c, self.lo, self.hi, n))
        V = np.column_stack([b(self.L_pts) for b in basis])
        _, R = np.linalg.qr(V * np.sqrt(self.L_w)[:, None])
        a, i, j = order
        wphi = self.phi(n) ** i
        ders = []
        for b in basis:
            F = b
            for _ in range(i + j):
                F = _dir_deriv(F, self.up)
            ders.append(F)
        if a == 0:
            ops = [np.column_stack([F(self.G_pts) for F in ders])]
        else:
            dup = np.column_stack([_dir_deriv(F, self.up)(self.G_pts) for F in ders])
            ops = []
            for ek, (lo, hi) in zip(self.tangents, self.slopes(n)):
                dk = np.column_stack([_dir_deriv(F, ek)(self.G_pts) for F in ders])
                ops += [dk + lo[:, None] * dup, dk + hi[:, None] * dup]
        # work in the coordinates c = R^-1 v, where the L^2(G(lam)) norm is |v|
        ops = [np.linalg.solve(R.T, (wphi[:, None] * A).T).T for A in ops]
        Q = np.linalg.solve(R.T, V.T).T
        self._ops[key] = (exps, R, ops, Q)
        return self._ops[key]

    def _poly(self, exps, R, v, n):
        return MultiPolynomial.from_basis(exps, np.linalg.solve(R, v), self.lo, self.hi, n)

    def extremal(self, n, order, p=2.0, peaks: int = 1):
        """Candidate maximizers of the ratio.

        For every operator with the slope frozen at one end of its range the
        ``L^2`` maximizer is the top right singular vector. For ``p = inf``
        the sup-norm maximizer at a point ``x`` solves a linear program; it is
        solved at the ``peaks`` largest points of each ``L^2`` maximizer.
        """
        exps, R, ops, Q = self._operators(n, order)
        sw = np.sqrt(self.G_w)
        out = []
        for A in ops:
            _, _, vt = np.linalg.svd(A * sw[:, None], full_matrices=False)
            out.append(self._poly(exps, R, vt[0], n))
            if not math.isinf(p):
                continue
            vals = np.abs(A @ vt[0])
            for k in np.argsort(vals)[::-1][:peaks]:
                v = _sup_extremal(A[k], Q)
                if v is not None:
                    out.append(self._poly(exps, R, v, n))
        return out


def bernstein_ratio(P: MultiPolynomial, n: int, chart: Chart, order, p, lam: float = 1.5,
                    mu: float = 2.0, resolution: int = 64, setup: _BernsteinSetup | None = None) -> float:
    """``|| phi_n^i max_u |D_tan,u^alpha d_{d+1}^{i+j} P| ||_p / (n^(|alpha|+2j+i) ||P||_{p, G(lam)})``.

    ``|alpha|`` is 0 or 1; for ``|alpha| = 1`` the largest value over the
    tangent directions ``j = 1..d`` is returned. ``phi_n = sqrt(g(x) - y) + 1/n``
    and ``u`` ranges over ``|u - x| <= mu phi_n`` inside the base cube.
    """
    setup = setup or _BernsteinSetup(chart, lam, mu, resolution)
    return setup.ratio(P, n, order, p)


def run_bernstein_check(chart: Chart, n_list, p, trials: int = 10, lam: float = 1.5,
                        mu: float = 2.0, resolution: int = 64, seed: int = 0) -> Table:
    """Bernstein ratios of candidate polynomials for the three derivative orders.

    Candidates are ``trials`` random ``P in Pi_n`` (Chebyshev coefficients
    on the box of ``G(lam)``) plus the ``L^2`` maximizers of the frozen-slope
    operators, so the fitted constant (largest ratio) tracks the supremum.
    """
    rng = np.random.default_rng(seed)
    st = _BernsteinSetup(chart, lam, mu, resolution)
    tab = Table("bernstein", bound=2.0, meta={"lam": lam, "mu": mu, "chart": chart.name})
    for n in n_list:
        for order in BERNSTEIN_ORDERS:
            cands = [(f"rand{t}", _random_poly(n, st.lo, st.hi, rng, chart.dim)) for t in range(trials)]
            cands += [(f"ext{k}", P) for k, P in enumerate(st.extremal(n, order, p))]
            for label, P in cands:
                val = st.ratio(P, n, order, p)
                tab.rows.append(Row("bernstein", "".join(map(str, order)), "n", n, val, 1.0, None,
                                    p, None, cell=label, grid_mode="fitted",
                                    grid_resolution=resolution, grid_points=len(st.G_pts),
                                    seed=seed))
    return tab


def bernstein_constants(tab: Table) -> dict:
    """``{(order, n): max ratio}``."""
    out = {}
    for r in tab.rows:
        key = (r.f, int(r.value))
        out[key] = max(out.get(key, 0.0), r.lhs)
    return out


def interval_bernstein_check(n_list, p, trials: int = 10, nodes: int = 512, seed: int = 0) -> Table:
    """Univariate reduction: ``||phi_n P'||_p / (n ||P||_p)`` on ``[-1, 1]``.

    ``phi_n(x) = sqrt(1 - x^2) + 1/n``. Candidates are random Chebyshev
    series and ``T_n``, which attains ``|sqrt(1 - x^2) T_n'| = n`` at its
    interior extrema. Norms use Gauss-Legendre nodes (``p = inf``: the
    same nodes plus the endpoints).
    """
    rng = np.random.default_rng(seed)
    x, w = np.polynomial.legendre.leggauss(nodes)
    if math.isinf(p):
        x, w = np.concatenate([[-1.0], x, [1.0]]), np.ones(nodes + 2)
    tab = Table("bernstein_1d", bound=2.0, meta={"nodes": nodes})
    for n in n_list:
        phi = np.sqrt(np.maximum(1 - x * x, 0.0)) + 1.0 / n
        cands = [(f"rand{t}", rng.standard_normal(n + 1)) for t in range(trials)]
        cands.append(("cheb", np.eye(n + 1)[n]))
        for label, c in cands:
            P = np.polynomial.Chebyshev(c)
            lhs = lp_norm(phi * P.deriv()(x), w, p)
            rhs = n * lp_norm(P(x), w, p)
            tab.rows.append(Row("bernstein_1d", "100", "n", n, lhs / rhs, 1.0, None, p, None,
                                cell=label, grid_mode="gauss", grid_resolution=nodes,
                                grid_points=len(x), seed=seed))
    return tab


# ======================================================================
# Whitney cell study
# ======================================================================


def run_whitney(chart: Chart, suite, r: int, p, n_list, config: ExperimentConfig | None = None) -> Table:
    """Per-cell ``E_{(d+1)(r-1)}(f)_{L^p(I*)}`` against the two local moduli."""
    c = config or ExperimentConfig()
    deg = (chart.d + 1) * (r - 1)
    tab = Table("whitney", bound=math.inf, meta={"r": r, "p": p, "chart": chart.name})
    for n in n_list:
        part = build_partition(chart, n)
        for fn in suite:
            cm = cell_moduli(fn, part, r, [p], c.cell_resolution, per_octave=c.per_octave,
                             octaves=6)
            for (i, j), vals in cm.items():
                E = part.extended_cell(i, j)
                pts, w = E.sample(c.cell_resolution)
                g = SampleGrid(pts, w, "cell", c.seed, "fitted", c.cell_resolution)
                lhs = best_approx(fn, g, deg, p).error
                a, b = vals[p]
                scale = float(np.max(np.abs(fn(pts))))
                tab.add(Row("whitney", fn.name, "n", n, lhs, a + b, r, p, None,
                            cell=f"{'-'.join(map(str, i))}:{j}", grid_mode="fitted",
                            grid_resolution=c.cell_resolution, grid_points=len(pts), seed=c.seed),
                        scale, c.degenerate_tol)
    return tab


def whitney_constants(tab: Table) -> dict:
    """``{(f, n): max cell ratio}``."""
    return {k: max(v) for k, v in tab.ratios(lambda r: (r.f, int(r.value))).items()}


# ======================================================================
# geometric and structural checks
# ======================================================================


def norm_doubling_check(n_list, q_list=(2.0, math.inf), trials: int = 50, lam: float = 2.0,
                        dim: int = 2, radius: float = 0.5, resolution: int = 160,
                        seed: int = 0) -> Table:
    """``||P||_{L^q(lam B)} / ||P||_{L^q(B)}`` against ``(5 lam)^(n + dim/q)`` for random ``P``."""
    rng = np.random.default_rng(seed)

    def ball(rad):
        ax = -rad + (np.arange(resolution) + 0.5) * 2 * rad / resolution
        mesh = np.meshgrid(*([ax] * dim), indexing="ij")
        Pt = np.stack([m.reshape(-1) for m in mesh], axis=1)
        keep = np.linalg.norm(Pt, axis=1) <= rad
        return Pt[keep], np.full(keep.sum(), (2 * rad / resolution) ** dim)

    B, wB = ball(radius)
    LB, wL = ball(lam * radius)
    lo, hi = -np.ones(dim) * lam * radius, np.ones(dim) * lam * radius
    tab = Table("norm-doubling", bound=math.inf, meta={"lam": lam, "radius": radius})
    for n in n_list:
        for q in q_list:
            bound = (5 * lam) ** (n + dim / q)
            for t in range(trials):
                P = _random_poly(n, lo, hi, rng, dim)
                ratio = lp_norm(P(LB), wL, q) / lp_norm(P(B), wB, q)
                tab.rows.append(Row("norm-doubling", "random", "n", n, ratio, bound, None, None, q,
                                    cell=str(t), grid_mode="tensor", grid_resolution=resolution,
                                    grid_points=len(B), seed=seed))
    return tab


def metric_ratio_constant(chart: Chart, dom: CompositeDomain, pairs: int = 10_000,
                          seed: int = 0) -> float:
    """Fitted ``c`` with ``rho_hat / rho in [1/c, c]`` on random pairs of the chart body."""
    rng = np.random.default_rng(seed)
    d = chart.d
    X1 = rng.uniform(-chart.b, chart.b, (pairs, d))
    X2 = rng.uniform(-chart.b, chart.b, (pairs, d))
    D = chart.body_depth
    dep1 = rng.uniform(0, 1, pairs) * D
    dep2 = rng.uniform(0, 1, pairs) * D
    L1 = np.column_stack([X1, chart.g(X1) - dep1])
    L2 = np.column_stack([X2, chart.g(X2) - dep2])
    P1 = chart.to_global(X1, L1[:, -1])
    P2 = chart.to_global(X2, L2[:, -1])
    ok = dom.contains(P1) & dom.contains(P2)
    rh = rho_hat(L1[ok], L2[ok], chart)
    rho = (np.linalg.norm(P1[ok] - P2[ok], axis=1)
           + np.abs(np.sqrt(dom.dist(P1[ok])) - np.sqrt(dom.dist(P2[ok]))))
    good = rho > 0
    ratio = rh[good] / rho[good]
    return float(max(ratio.max(), 1.0 / ratio.min()))


def ball_measure(xi, delta: float, dom: CompositeDomain, samples: int = 4096, seed: int = 0):
    """``|U(xi, delta)|`` by quasi-Monte Carlo over the Euclidean ball ``B(xi, delta)``.

    ``U`` lies inside that ball since ``rho`` dominates the Euclidean distance.
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    dim = xi.size
    eng = qmc.Halton(dim, scramble=True, seed=seed)
    Z = 2.0 * eng.random(samples) - 1.0
    Z = Z[np.linalg.norm(Z, axis=1) <= 1.0]
    vol = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * delta**dim
    Q = xi + delta * Z
    inside = dom.contains(Q)
    sd = math.sqrt(float(dom.dist(xi[None])[0]))
    rho = np.linalg.norm(Q - xi, axis=1)
    rho[inside] += np.abs(np.sqrt(dom.dist(Q[inside])) - sd)
    hit = inside & (rho <= delta)
    return vol * hit.mean()


def ball_measure_study(dom: CompositeDomain, n_list, points: int = 1000, samples: int = 4096,
                       seed: int = 0) -> Table:
    """``|U(xi, 1/n)| n^dim / (1/n + sqrt(dist(xi)))`` at random ``xi``.

    Half of the points are drawn uniformly, half close to the boundary
    (uniform in the square root of the distance).
    """
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(v, dtype=float) for v in dom.bbox)
    pts = []
    while sum(len(p) for p in pts) < points:
        Q = lo + (hi - lo) * rng.random((4 * points, dom.dim))
        Q = Q[dom.contains(Q)]
        dq = dom.dist(Q)
        # keep a mix of deep and near-boundary points
        near = Q[dq < 0.05][: points // 2]
        pts += [near, Q[: points - len(near)]]
    X = np.vstack(pts)[:points]
    tab = Table("ball-measure", bound=10.0)
    dist = dom.dist(X)
    for n in n_list:
        for k, xi in enumerate(X):
            m = ball_measure(xi, 1.0 / n, dom, samples, seed + k)
            rhs = (1.0 / n + math.sqrt(dist[k])) / n ** dom.dim
            tab.rows.append(Row("ball-measure", "U", "n", n, m, rhs, cell=str(k),
                                grid_mode="qmc", grid_points=samples, seed=seed))
    return tab


def unity_decay_constant(chart: Chart, n: int, m: float = 4.0, points: int = 4000,
                         seed: int = 0) -> float:
    """Fitted ``C`` in ``|q_{i,j}(xi)| <= C (1 + max(|i - k|, |j - l|))^-m`` on the chart body.

    ``(k, l)`` is the cell containing ``xi``.
    """
    part = build_partition(chart, n)
    su = special_unity(part, m)
    rng = np.random.default_rng(seed)
    d = chart.d
    X = rng.uniform(-chart.b, chart.b, (points, d))
    dep = rng.uniform(0, 1, points) * chart.body_depth
    P = chart.to_global(X, chart.g(X) - dep)
    V = np.abs(su.evaluate(P))  # (m, n^d, n)
    I, J, valid = part.cell_index(P)
    idx = np.array(np.unravel_index(np.arange(n**d), (n,) * d)).T  # (n^d, d)
    di = np.linalg.norm(idx[None, :, :] - I[:, None, :], axis=2)  # (m, n^d)
    dj = np.abs(np.arange(n)[None, :] - J[:, None])  # (m, n)
    dist = np.maximum(di[:, :, None], dj[:, None, :])
    C = V * (1.0 + dist) ** m
    return float(C[valid].max())


# ======================================================================
# reporting
# ======================================================================


def emit_report(tables, path, config: ExperimentConfig | None = None, extra: dict | None = None):
    """Write ``<path>.csv`` (all rows, fixed header) and ``<path>.json`` (manifest).

    Output is byte-stable for a fixed configuration.

    Returns
    -------
    (csv_path, json_path)
    """
    config = config or ExperimentConfig()
    path = Path(path)
    base = path.with_suffix("") if path.suffix in (".csv", ".json") else path
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for t in tables:
        for r in t.rows:
            w.writerow(r.cells())
    csv_path.write_text(buf.getvalue())

    def clean(v):
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (float, np.floating)):
            return _fmt(float(v))
        if isinstance(v, np.integer):
            return int(v)
        return v

    manifest = {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "tables": [{"name": t.name, "rows": len(t.rows), "bound": t.bound, "meta": t.meta,
                    "summary": t.summary(), "degenerate": sum(r.degenerate for r in t.rows),
                    "passed": t.passed} for t in tables],
        "csv": csv_path.name,
    }
    if extra:
        manifest["run"] = extra
    json_path.write_text(json.dumps(clean(manifest), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
