"""Hot numerical kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``C2APPROX_DISABLE_NUMBA`` is unset (or ``0``). Both paths
return identical results up to floating point reassociation.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("C2APPROX_DISABLE_NUMBA", "0") not in ("", "0", "false", "False")

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit

    USING_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------- numpy path


def clenshaw_np(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate a Chebyshev series ``sum_k coef[k] T_k(x)`` by Clenshaw."""
    x = np.asarray(x, dtype=float)
    n = coef.shape[0]
    if n == 0:
        return np.zeros_like(x)
    if n == 1:
        return np.full_like(x, coef[0])
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    x2 = 2.0 * x
    for k in range(n - 1, 0, -1):
        b1, b2 = coef[k] + x2 * b1 - b2, b1
    return coef[0] + x * b1 - b2


def chebvander_np(x: np.ndarray, deg: int) -> np.ndarray:
    """Rows ``[T_0(x_i), ..., T_deg(x_i)]``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.shape[0], deg + 1))
    out[:, 0] = 1.0
    if deg >= 1:
        out[:, 1] = x
    for k in range(2, deg + 1):
        out[:, k] = 2.0 * x * out[:, k - 1] - out[:, k - 2]
    return out


def total_vander_np(xs: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """Tensor Chebyshev basis ``prod_i T_{e_i}(x_i)`` for each exponent row."""
    m, dim = xs.shape
    deg = int(exps.max()) if exps.size else 0
    out = np.ones((m, exps.shape[0]))
    for i in range(dim):
        v = chebvander_np(xs[:, i], deg)
        out *= v[:, exps[:, i]]
    return out


def segment_power_sum_np(values: np.ndarray, weights: np.ndarray, starts: np.ndarray,
                         q: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment ``sum w |v|^q`` (or max for ``q=inf``) and total weight.

    Segments are ``values[starts[k]:starts[k+1]]``; ``starts`` has a
    trailing sentinel equal to ``len(values)``.
    """
    nseg = starts.shape[0] - 1
    acc = np.zeros(nseg)
    wsum = np.zeros(nseg)
    lengths = np.diff(starts)
    nonempty = lengths > 0
    idx = starts[:-1][nonempty]
    a = np.abs(values)
    if np.isinf(q):
        acc[nonempty] = np.maximum.reduceat(a, idx) if a.size else 0.0
    else:
        acc[nonempty] = np.add.reduceat(weights * a**q, idx) if a.size else 0.0
    wsum[nonempty] = np.add.reduceat(weights, idx) if a.size else 0.0
    return acc, wsum


# ---------------------------------------------------------------- numba path

if USING_NUMBA:

    @njit(cache=True)
    def _clenshaw_nb(coef, x):
        n = coef.shape[0]
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            xi = x[i]
            if n == 1:
                out[i] = coef[0]
                continue
            b1 = 0.0
            b2 = 0.0
            for k in range(n - 1, 0, -1):
                t = coef[k] + 2.0 * xi * b1 - b2
                b2 = b1
                b1 = t
            out[i] = coef[0] + xi * b1 - b2
        return out

    @njit(cache=True)
    def _chebvander_nb(x, deg):
        m = x.shape[0]
        out = np.empty((m, deg + 1))
        for i in range(m):
            out[i, 0] = 1.0
            if deg >= 1:
                out[i, 1] = x[i]
            for k in range(2, deg + 1):
                out[i, k] = 2.0 * x[i] * out[i, k - 1] - out[i, k - 2]
        return out

    @njit(cache=True)
    def _total_vander_nb(xs, exps):
        m, dim = xs.shape
        nb = exps.shape[0]
        deg = 0
        for j in range(nb):
            for i in range(dim):
                if exps[j, i] > deg:
                    deg = exps[j, i]
        out = np.ones((m, nb))
        t = np.empty(deg + 1)
        for p in range(m):
            for i in range(dim):
                x = xs[p, i]
                t[0] = 1.0
                if deg >= 1:
                    t[1] = x
                for k in range(2, deg + 1):
                    t[k] = 2.0 * x * t[k - 1] - t[k - 2]
                for j in range(nb):
                    out[p, j] *= t[exps[j, i]]
        return out

    @njit(cache=True)
    def _segment_power_sum_nb(values, weights, starts, q):
        nseg = starts.shape[0] - 1
        acc = np.zeros(nseg)
        wsum = np.zeros(nseg)
        is_inf = np.isinf(q)
        for s in range(nseg):
            a = 0.0
            w = 0.0
            for k in range(starts[s], starts[s + 1]):
                v = abs(values[k])
                if is_inf:
                    if v > a:
                        a = v
                elif q == 2.0:
                    a += weights[k] * v * v
                elif q == 1.0:
                    a += weights[k] * v
                else:
                    a += weights[k] * v**q
                w += weights[k]
            acc[s] = a
            wsum[s] = w
        return acc, wsum


def clenshaw(coef, x):
    coef = np.ascontiguousarray(coef, dtype=float)
    x = np.asarray(x, dtype=float)
    if USING_NUMBA and coef.shape[0] > 0:
        flat = np.ascontiguousarray(x.reshape(-1))
        return _clenshaw_nb(coef, flat).reshape(x.shape)
    return clenshaw_np(coef, x)


def chebvander(x, deg: int):
    x = np.ascontiguousarray(x, dtype=float).reshape(-1)
    if USING_NUMBA:
        return _chebvander_nb(x, int(deg))
    return chebvander_np(x, int(deg))


def total_vander(xs, exps):
    xs = np.ascontiguousarray(xs, dtype=float)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    if USING_NUMBA:
        return _total_vander_nb(xs, exps)
    return total_vander_np(xs, exps)


def segment_power_sum(values, weights, starts, q: float):
    values = np.ascontiguousarray(values, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    if USING_NUMBA:
        return _segment_power_sum_nb(values, weights, starts, float(q))
    return segment_power_sum_np(values, weights, starts, float(q))
