"""Discrete best polynomial approximation in L^p over a sample grid.

The basis is the total-degree tensor Chebyshev family on the grid's
bounding box, with every column scaled to unit weighted 2-norm. ``p = 2``
is one QR factorization (nested degrees reuse its prefixes), ``p = inf``
runs Lawson's iteration followed by a linear-programming exchange, and
other exponents use iteratively reweighted least squares.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import cvxopt as cvx
from scipy.optimize import linprog

from ._kernels import total_vander
from .errors import IllConditionedWarning, NonConvergenceError, RankDeficiencyError
from .polynomial import MultiPolynomial, n_basis, to_reference, total_degree_exponents
from .sampling import SampleGrid, lp_norm

CSV_COLUMNS = ("n", "p", "error", "iterations", "condition")
COND_LIMIT = 1e12
FULL_LP_LIMIT = 8_000_000
_CVX_OPTIONS = {"show_progress": False, "abstol": 1e-12, "reltol": 1e-10, "feastol": 1e-10,
                "maxiters": 100}
# the minimax LP is posed at unit scale, so a looser feasibility
# tolerance suffices and avoids stalls at the end of the central path
_MINIMAX_OPTIONS = {**_CVX_OPTIONS, "abstol": 1e-10, "reltol": 1e-9, "feastol": 1e-8}


@dataclass
class ApproxResult:
    n: int
    p: float
    error: float
    polynomial: MultiPolynomial = field(repr=False)
    iterations: int = 0
    condition: float = 1.0
    converged: bool = True

    def row(self) -> dict:
        return {"n": self.n, "p": self.p, "error": self.error,
                "iterations": self.iterations, "condition": self.condition}


# ---------------------------------------------------------------- basis


@dataclass
class Basis:
    """Scaled design matrix of a grid for degrees up to ``n_max``."""

    V: np.ndarray
    scale: np.ndarray
    exps: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_max: int

    def columns(self, n: int) -> int:
        return n_basis(n, self.exps.shape[1])

    def polynomial(self, c, n: int) -> MultiPolynomial:
        k = self.columns(n)
        return MultiPolynomial.from_basis(self.exps[:k], np.asarray(c) / self.scale[:k],
                                          self.lo, self.hi, n)


def design_basis(grid: SampleGrid, n_max: int) -> Basis:
    """Chebyshev columns on the grid's bounding box, scaled to unit weighted norm.

    Cached on the grid, so repeated solves share one matrix.
    """

    def build():
        lo = grid.points.min(axis=0)
        hi = grid.points.max(axis=0)
        hi = np.where(hi - lo > 0, hi, lo + 1.0)
        exps = total_degree_exponents(n_max, grid.dim)
        V = total_vander(to_reference(grid.points, lo, hi), exps)
        scale = np.sqrt(grid.weights @ V**2)
        scale[scale == 0] = 1.0
        return Basis(V / scale, scale, exps, lo, hi, n_max)

    cached = grid._cache.get("basis")
    if cached is None or cached.n_max < n_max:
        grid._cache["basis"] = build()
    return grid._cache["basis"]


def _weighted_lstsq(A, b, n, check=True):
    """Least squares with a rank check; returns coefficients and the condition number."""
    Q, R = np.linalg.qr(A)
    dr = np.abs(np.diag(R))
    if check and (A.shape[0] < A.shape[1] or dr.min() <= 1e-13 * dr.max()):
        raise RankDeficiencyError(f"design matrix for n={n} is rank deficient "
                                  f"({A.shape[0]} rows, {A.shape[1]} columns)")
    c = np.linalg.solve(R, Q.T @ b)
    return c, Q, R


def _condition(A) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


def _warn_condition(cond, n):
    if cond > COND_LIMIT:
        warnings.warn(f"condition number {cond:.3g} at n={n}", IllConditionedWarning, stacklevel=3)


# ---------------------------------------------------------------- solvers


def _solve_l2(fv, grid, basis, n):
    k = basis.columns(n)
    sw = np.sqrt(grid.weights)
    A = basis.V[:, :k] * sw[:, None]
    c, _, _ = _weighted_lstsq(A, fv * sw, n)
    cond = _condition(A)
    res = fv - basis.V[:, :k] @ c
    return c, lp_norm(res, grid.weights, 2.0), 1, cond, True


def _lp_highs(A, b):
    m, k = A.shape
    ones = np.ones((m, 1))
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    sol = linprog(cost, A_ub=np.block([[A, -ones], [-A, -ones]]), b_ub=np.concatenate([b, -b]),
                  bounds=[(None, None)] * k + [(0, None)], method="highs")
    if not sol.success:
        raise NonConvergenceError(f"linear program failed: {sol.message}")
    return sol.x[:k]


def _lp_minimax(A, b):
    """Minimax fit ``min_c max |A c - b|``; returns the coefficients and the level.

    The columns are orthonormalized first and the LP
    ``min s  s.t.  -s <= Q y - b <= s`` goes to the dense interior-point
    solver of cvxopt; HiGHS is the fallback when the rows do not
    resolve the basis or the interior-point method stalls.
    """
    m, k = A.shape
    Q, R = np.linalg.qr(A)
    dr = np.abs(np.diag(R))
    c = None
    if m > k and dr.min() > 1e-10 * dr.max():
        rt = math.sqrt(m)
        Qs = Q * rt
        ones = np.ones((m, 1))
        G = cvx.matrix(np.block([[Qs, -ones], [-Qs, -ones]]))
        h = cvx.matrix(np.concatenate([b, -b]))
        cost = cvx.matrix(np.r_[np.zeros(k), 1.0])
        try:
            sol = cvx.solvers.lp(cost, G, h, options=_MINIMAX_OPTIONS)
        except (ValueError, ArithmeticError):
            sol = None
        if sol is not None and sol["x"] is not None and sol["status"] in ("optimal", "unknown"):
            y = np.array(sol["x"]).reshape(-1)[:k]
            c = np.linalg.solve(R, rt * y)
    if c is None:
        c = _lp_highs(A, b)
    return c, float(np.abs(A @ c - b).max())


def _solve_linf(fv, grid, basis, n, max_iter=200, tol=1e-8, lawson_steps=10):
    k = basis.columns(n)
    V = basis.V[:, :k]
    cond = _condition(V * np.sqrt(grid.weights)[:, None])
    # Lawson: reweighted least squares concentrating on the extremal points
    u = grid.weights / grid.weights.sum()
    c = None
    for _ in range(lawson_steps):
        su = np.sqrt(u)
        if c is None:
            c, _, _ = _weighted_lstsq(V * su[:, None], fv * su, n)
        else:
            c = np.linalg.lstsq(V * su[:, None], fv * su, rcond=None)[0]
        res = np.abs(fv - V @ c)
        u = u * res
        tot = u.sum()
        if tot == 0:
            break
        u /= tot
    res = np.abs(fv - V @ c)
    scale = max(float(np.abs(fv).max()), 1e-300)
    # resolution of the linear program relative to |f|
    floor = 1e-9 * scale
    if res.max() <= floor:
        # already below what the linear program can resolve
        return c, float(res.max()), lawson_steps, cond, True
    # one LP on the whole grid when it fits; otherwise an exchange whose
    # working set grows by the worst violators
    if V.shape[0] * k <= FULL_LP_LIMIT:
        work = np.arange(V.shape[0])
    else:
        work = np.unique(np.concatenate([np.argsort(-u)[: 4 * k], np.argsort(-res)[: 2 * k]]))
    best_c, best_err = c, float(res.max())
    # the LP solves for the correction of the Lawson seed, scaled to unit
    # size, so that solver tolerances act relative to the error level
    c0, s0 = c, best_err
    r0 = (fv - V @ c0) / s0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        dc, level = _lp_minimax(V[work], r0[work])
        c_lp, level = c0 + dc * s0, level * s0
        res = np.abs(fv - V @ c_lp)
        err = float(res.max())
        if err < best_err:
            best_c, best_err = c_lp, err
        if err - level <= max(tol * err, floor):
            converged = True
            break
        viol = np.nonzero(res > level + max(tol * err, floor))[0]
        viol = np.setdiff1d(viol, work)
        if viol.size == 0:
            # remaining gap is at the accuracy of the linear program
            converged = True
            break
        work = np.union1d(work, viol[np.argsort(-res[viol])][: 2 * k])
    if not converged:
        best = ApproxResult(n, math.inf, best_err, basis.polynomial(best_c, n), it, cond, False)
        raise NonConvergenceError(f"exchange did not converge in {max_iter} rounds", best, best_err)
    return best_c, best_err, it, cond, True


def _solve_irls(fv, grid, basis, n, p, max_iter=200, tol=1e-8):
    k = basis.columns(n)
    V = basis.V[:, :k]
    w = grid.weights
    scale = max(float(np.abs(fv).max()), 1e-300)
    eps = 1e-10 * scale
    sw = np.sqrt(w)
    A0 = V * sw[:, None]
    c, _, _ = _weighted_lstsq(A0, fv * sw, n)
    cond = _condition(A0)
    err = lp_norm(fv - V @ c, w, p)
    best_c, best_err = c, err
    floor = 1e-12 * scale
    if err <= floor:
        return c, err, 0, cond, True
    # damping keeps the iteration monotone for p > 2; for p < 2 the step is
    # over-relaxed and falls back to the plain step when the error grows
    step = 1.0 / (p - 1.0) if p > 2 else 2.0 / p
    for it in range(1, max_iter + 1):
        r = fv - V @ c
        u = (r * r + eps * eps) ** ((p - 2.0) / 2.0)
        su = np.sqrt(w * u)
        c_new, _, _ = _weighted_lstsq(V * su[:, None], fv * su, n, check=False)
        c_try = c + step * (c_new - c)
        new = lp_norm(fv - V @ c_try, w, p)
        if new > err and p < 2:
            c_try = c_new
            new = lp_norm(fv - V @ c_try, w, p)
        c = c_try
        if new < best_err:
            best_c, best_err = c, new
        if abs(err - new) <= tol * max(new, 1e-300) or new <= floor:
            return best_c, best_err, it, cond, True
        err = new
    best = ApproxResult(n, p, best_err, basis.polynomial(best_c, n), max_iter, cond, False)
    raise NonConvergenceError(f"IRLS did not converge in {max_iter} iterations for p={p}",
                              best, best_err)


def best_approx(f, grid: SampleGrid, n: int, p=2.0, max_iter: int = 200,
                tol: float = 1e-8) -> ApproxResult:
    """Best approximation of ``f`` by polynomials of total degree ``<= n`` on ``grid``.

    Parameters
    ----------
    f : callable or ndarray
        Function of ``(m, dim)`` points, or its values on the grid.
    p : float
        ``2``, ``inf`` or any positive exponent (``p < 1`` is experimental).

    Raises
    ------
    RankDeficiencyError
        If the grid cannot resolve the degree.
    NonConvergenceError
        With ``best`` set to the best iterate when iterations run out.
    """
    p = float(p)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if p <= 0:
        raise ValueError("p must be positive")
    fv = np.asarray(f if not callable(f) else grid.values(f), dtype=float).reshape(-1)
    if fv.size != len(grid):
        raise ValueError("values do not match the grid")
    basis = design_basis(grid, n)
    if p == 2:
        out = _solve_l2(fv, grid, basis, n)
    elif math.isinf(p):
        out = _solve_linf(fv, grid, basis, n, max_iter, tol)
    else:
        out = _solve_irls(fv, grid, basis, n, p, max_iter, tol)
    c, err, it, cond, conv = out
    _warn_condition(cond, n)
    return ApproxResult(n, p, float(err), basis.polynomial(c, n), it, cond, conv)


def best_approx_sequence(f, grid: SampleGrid, ns, p=2.0, **kw) -> list[ApproxResult]:
    """Errors for increasing degrees, made monotone by a cumulative minimum.

    For ``p = 2`` all degrees share one QR factorization.
    """
    ns = sorted(int(n) for n in ns)
    p = float(p)
    fv = np.asarray(f if not callable(f) else grid.values(f), dtype=float).reshape(-1)
    out = []
    if p == 2 and ns:
        basis = design_basis(grid, ns[-1])
        sw = np.sqrt(grid.weights)
        kmax = basis.columns(ns[-1])
        A = basis.V[:, :kmax] * sw[:, None]
        b = fv * sw
        Q, R = np.linalg.qr(A)
        dr = np.abs(np.diag(R))
        qb = Q.T @ b
        for n in ns:
            k = basis.columns(n)
            if A.shape[0] < k or dr[:k].min() <= 1e-13 * dr[:k].max():
                raise RankDeficiencyError(f"design matrix for n={n} is rank deficient")
            c = np.linalg.solve(R[:k, :k], qb[:k])
            res = b - A[:, :k] @ c
            err = float(np.sqrt(math.fsum((res * res).tolist())))
            cond = _condition(A[:, :k])
            _warn_condition(cond, n)
            out.append(ApproxResult(n, p, err, basis.polynomial(c, n), 1, cond, True))
    else:
        out = [best_approx(fv, grid, n, p, **kw) for n in ns]
    running = math.inf
    for res in out:
        running = min(running, res.error)
        res.error = running
    return out


def write_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow([r.n, r.p, f"{r.error:.17g}", r.iterations, f"{r.condition:.17g}"])


def alternation_count(x, residual, rtol: float = 1e-3) -> int:
    """Number of sign alternations of a 1-D residual at its near-extremal points."""
    x = np.asarray(x, dtype=float).reshape(-1)
    r = np.asarray(residual, dtype=float).reshape(-1)
    order = np.argsort(x)
    r = r[order]
    top = np.abs(r).max()
    signs = np.sign(r[np.abs(r) >= (1 - rtol) * top])
    if signs.size == 0:
        return 0
    return int(1 + np.count_nonzero(np.diff(signs) != 0))
