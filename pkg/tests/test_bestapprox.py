import csv
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from c2approx.bestapprox import (CSV_COLUMNS, alternation_count, best_approx, best_approx_sequence,
                                 design_basis, write_csv)
from c2approx.errors import RankDeficiencyError
from c2approx.sampling import build_grid
from c2approx.unity import chebyshev_unity_1d


def expsum(P):
    return np.exp(P[:, 0] + P[:, 1])


@pytest.fixture(scope="module")
def line_grid(interval):
    # odd resolution puts a sample at the kink of |x|
    return build_grid(interval, 401)


def _linprog_minimax(x, fv, n):
    """Independent dense-grid minimax in the Chebyshev basis via HiGHS."""
    V = np.polynomial.chebyshev.chebvander(x, n)
    m, k = V.shape
    A = np.block([[V, -np.ones((m, 1))], [-V, -np.ones((m, 1))]])
    b = np.concatenate([fv, -fv])
    c = np.zeros(k + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * k + [(0, None)], method="highs")
    return res.x[-1]


def _alternating_lower_bound(x, r, k):
    """Largest ``min |r|`` over alternating ``k``-point references (greedy on sign blocks)."""
    r = r[np.argsort(x)]
    blocks = []
    for v in r:
        if v == 0:
            continue
        if blocks and np.sign(v) == np.sign(blocks[-1]):
            blocks[-1] = max(blocks[-1], v, key=abs)
        else:
            blocks.append(v)
    mags = np.abs(blocks)
    while len(mags) > k:
        # dropping the smallest interior block merges its neighbours
        i = int(np.argmin(mags))
        if 0 < i < len(mags) - 1:
            merged = max(mags[i - 1], mags[i + 1])
            mags = np.concatenate([mags[: i - 1], [merged], mags[i + 2:]])
        else:
            mags = np.delete(mags, i)
    return float(mags.min()) if len(mags) >= k else 0.0


def test_abs_quadratic_minimax(line_grid):
    res = best_approx(lambda P: np.abs(P[:, 0]), line_grid, 2, math.inf)
    assert res.error == pytest.approx(0.125, abs=1e-3)
    # independent dense-grid oracle
    x = np.linspace(-1, 1, 4001)
    assert _linprog_minimax(x, np.abs(x), 2) == pytest.approx(0.125, abs=1e-3)
    P = line_grid.points
    assert alternation_count(P[:, 0], np.abs(P[:, 0]) - res.polynomial(P), rtol=1e-6) >= 4


@pytest.mark.parametrize("n", [3, 5, 6, 8, 10])
def test_minimax_equioscillation(line_grid, n):
    P = line_grid.points
    res = best_approx(lambda Q: np.exp(Q[:, 0]) * np.sin(2 * Q[:, 0]), line_grid, n, math.inf)
    resid = np.exp(P[:, 0]) * np.sin(2 * P[:, 0]) - res.polynomial(P)
    assert np.abs(resid).max() == pytest.approx(res.error, rel=1e-9)
    assert alternation_count(P[:, 0], resid, rtol=1e-6) >= n + 2
    # de la Vallee Poussin: n + 2 alternating values bound the minimax level from below
    assert _alternating_lower_bound(P[:, 0], resid, n + 2) >= (1 - 1e-6) * res.error


def test_l2_orthogonality(disk_grid):
    n = 6
    res = best_approx(expsum, disk_grid, n, 2.0)
    basis = design_basis(disk_grid, n)
    k = basis.columns(n)
    V = basis.V[:, :k]
    r = disk_grid.values(expsum) - res.polynomial(disk_grid.points)
    w = disk_grid.weights
    inner = np.abs(V.T @ (w * r))
    fnorm = math.sqrt(w @ disk_grid.values(expsum) ** 2)
    bnorm = np.sqrt(w @ V**2)
    assert np.all(inner < 1e-8 * fnorm * bnorm)
    assert res.error == pytest.approx(math.sqrt(w @ r**2), rel=1e-10)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
def test_reproduces_polynomials(disk_grid, p):
    def poly(P):
        return 1 + P[:, 0] - 2 * P[:, 0] * P[:, 1] ** 2 + 0.5 * P[:, 1] ** 3

    res = best_approx(poly, disk_grid, 3, p)
    assert res.error < 1e-9 * np.abs(disk_grid.values(poly)).max()


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0, math.inf])
def test_nesting(disk_grid, p):
    errs = [best_approx(expsum, disk_grid, n, p).error for n in range(0, 6)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_irls_between_norms(disk_grid):
    e1 = best_approx(expsum, disk_grid, 3, 1.0)
    e3 = best_approx(expsum, disk_grid, 3, 3.0)
    assert e1.converged and e3.converged
    # the L^3 error of the L^3 minimizer beats that of the L^2 minimizer
    from c2approx.sampling import lp_norm

    l2 = best_approx(expsum, disk_grid, 3, 2.0).polynomial
    r = disk_grid.values(expsum) - l2(disk_grid.points)
    assert e3.error <= lp_norm(r, disk_grid.weights, 3.0) * (1 + 1e-8)


def test_sequence(disk_grid):
    seq = best_approx_sequence(expsum, disk_grid, [6, 2, 4], 2.0)
    assert [r.n for r in seq] == [2, 4, 6]
    assert seq[0].error >= seq[1].error >= seq[2].error
    direct = best_approx(expsum, disk_grid, 4, 2.0).error
    assert seq[1].error == pytest.approx(direct, rel=1e-9)
    zeros = best_approx_sequence(lambda P: np.full(len(P), 2.5), disk_grid, [0, 1, 2], math.inf)
    assert all(r.error < 1e-12 for r in zeros)


def test_unity_member_degree(line_grid):
    u = chebyshev_unity_1d(6)[2]
    D = u.measured_degree()

    def f(P):
        return u(P[:, 0])

    seq = best_approx_sequence(f, line_grid, [D - 1, D], 2.0)
    assert seq[0].error > 1e-6
    assert seq[1].error < 1e-8


def test_rank_deficiency(square):
    grid = build_grid(square, 8)
    with pytest.raises(RankDeficiencyError):
        best_approx(expsum, grid, 20, 2.0)


def test_input_validation(disk_grid):
    with pytest.raises(ValueError):
        best_approx(expsum, disk_grid, -1)
    with pytest.raises(ValueError):
        best_approx(expsum, disk_grid, 2, 0.0)
    with pytest.raises(ValueError):
        best_approx(np.zeros(3), disk_grid, 2)


def test_csv_columns(disk_grid, tmp_path):
    res = best_approx_sequence(expsum, disk_grid, [1, 2], 2.0)
    path = tmp_path / "e.csv"
    write_csv(res, path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS == ("n", "p", "error", "iterations", "condition")
    assert float(rows[2][2]) == res[1].error
