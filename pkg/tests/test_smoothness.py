import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from c2approx.errors import EmptyRegionError, ExponentOrderError, GridTooCoarseWarning
from c2approx.geometry import FlatGraph, make_graph_domain
from c2approx.mesh import build_partition
from c2approx.sampling import build_grid
from c2approx.smoothness import (ModulusRequest, averaged_modulus_1d, decomposition_identity,
                                 difference_coefficients, directional_modulus, dt_modulus,
                                 finite_difference, full_modulus, full_modulus_curve, h_net,
                                 ivanov_tau, ivanov_tau_curve, ivanov_w, local_modulus, sup_modulus_1d,
                                 tangential_modulus, tangential_values)


def const(P):
    return np.full(P.shape[0], 3.0)


def linear(P):
    return 2.0 * P[:, 0] - P[:, 1] + 0.5


def x0(P):
    return P[:, 0]


def square_x(P):
    return P[:, 0] ** 2


def expsum(P):
    return np.exp(P[:, 0] + P[:, 1])


@pytest.fixture(scope="module")
def flat_dom():
    return make_graph_domain(FlatGraph(0.0), 1.0, 1.0)


@pytest.fixture(scope="module")
def flat_grid(flat_dom):
    return build_grid(flat_dom, 40)


@pytest.fixture(scope="module")
def square_grid(square):
    return build_grid(square, 40)


# ---------------------------------------------------------------- differences


def test_difference_coefficients():
    assert difference_coefficients(1).tolist() == [-1, 1]
    assert difference_coefficients(3).tolist() == [-1, 3, -3, 1]
    assert difference_coefficients(6).sum() == 0


def test_first_difference():
    eta = np.array([0.2, -0.1])
    step = np.array([0.05, 0.3])
    assert finite_difference(expsum, step, eta, 1) == pytest.approx(
        expsum((eta + step)[None])[0] - expsum(eta[None])[0], rel=1e-14)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.5, 0.5))
def test_second_difference_of_square(x, y, h):
    val = finite_difference(square_x, np.array([h, 0.0]), np.array([x, y]), 2)
    assert val == pytest.approx(2 * h * h, abs=1e-12)


@given(st.integers(1, 5), st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_differences_annihilate_low_degree(r, x, y, h1, h2):
    coef = np.linspace(0.3, 1.7, r * r)

    def poly(P):
        out = np.zeros(P.shape[0])
        k = 0
        for a in range(r):
            for b in range(r - a):
                out += coef[k] * P[:, 0] ** a * P[:, 1] ** b
                k += 1
        return out

    scale = 1 + np.abs(poly(np.array([[x, y]]))).max()
    assert abs(finite_difference(poly, np.array([h1, h2]), np.array([x, y]), r)) < 1e-12 * scale * 10**r


def test_symmetric_difference_shift():
    eta, step = np.array([0.1, 0.2]), np.array([0.04, 0.0])
    a = finite_difference(expsum, step, eta, 2, symmetric=True)
    b = finite_difference(expsum, step, eta - step, 2)
    assert a == pytest.approx(b, rel=1e-13)


def test_restricted_difference_outside_is_zero(square):
    assert finite_difference(x0, np.array([0.5, 0.0]), np.array([0.8, 0.5]), 1, square) == 0.0
    assert finite_difference(x0, np.array([0.1, 0.0]), np.array([0.8, 0.5]), 1, square) == pytest.approx(0.1)


@given(st.integers(1, 4), st.lists(st.floats(-0.5, 0.5), min_size=6, max_size=6))
def test_decomposition_identity(r, v):
    xi, eta, h = np.array(v[:2]), np.array(v[2:4]), 0.3 * np.array(v[4:])
    lhs, rhs = decomposition_identity(lambda P: np.sin(3 * P[:, 0]) * np.exp(P[:, 1]), xi, eta, h, r)
    assert abs(lhs - rhs) < 1e-10


def test_h_net():
    hs = h_net(0.1, 8, 2)
    assert hs[-1] == 0.1
    assert np.all(np.diff(hs) > 0)
    assert hs[0] >= 0.1 / 4 * (1 - 1e-12)
    with pytest.raises(ValueError):
        h_net(0.0)


def test_request_validation():
    with pytest.raises(ValueError):
        ModulusRequest(x0, r=0)
    with pytest.raises(ValueError):
        ModulusRequest(x0, p=0.0)
    with pytest.raises(ValueError):
        ModulusRequest(x0, t=-1.0)


# ---------------------------------------------------------------- directional and DT


def test_directional_constant(square, square_grid):
    req = ModulusRequest(const, r=1, p=2.0, t=0.2)
    assert directional_modulus(req, square, [[1.0, 0.0], [0.0, 1.0]], square_grid).value == 0.0


def test_directional_linear_largest_step(square, square_grid):
    req = ModulusRequest(x0, r=1, p=math.inf, t=0.1)
    rep = directional_modulus(req, square, [[1.0, 0.0]], square_grid)
    assert rep.value == pytest.approx(0.1, rel=1e-12)
    assert rep.meta["grid"]["n_points"] == len(square_grid)


def test_directional_sign_flip(square, square_grid):
    req = ModulusRequest(expsum, r=2, p=2.0, t=0.2)
    E = [np.array([1.0, 0.3])]
    a = directional_modulus(req, square, E, square_grid).value
    b = directional_modulus(req, square, E + [-E[0]], square_grid).value
    assert a <= b
    assert b == pytest.approx(a, rel=0.05)


def test_directional_requires_directions(square, square_grid):
    with pytest.raises(ValueError):
        directional_modulus(ModulusRequest(x0), square, [], square_grid)


def test_coarse_grid_warning(square):
    grid = build_grid(square, 8)
    with pytest.warns(GridTooCoarseWarning):
        directional_modulus(ModulusRequest(x0, t=0.1), square, [[1.0, 0.0]], grid)


def test_dt_annihilates_linear(disk, disk_grid):
    req = ModulusRequest(linear, r=2, p=2.0, t=0.2)
    assert dt_modulus(req, disk, [1.0, 0.0], disk_grid).value < 1e-12


@pytest.mark.parametrize("t", [0.05, 0.125, 0.25])
def test_dt_square_on_interval(interval, t):
    grid = build_grid(interval, 201)
    req = ModulusRequest(lambda P: P[:, 0] ** 2, r=2, p=math.inf, t=t)
    assert dt_modulus(req, interval, [1.0], grid).value == pytest.approx(2 * t * t, rel=1e-3)


def test_dt_monotone_in_t(disk, disk_grid):
    from c2approx.smoothness import dt_curve

    ts = [0.02, 0.05, 0.1, 0.2, 0.4]
    c = dt_curve(expsum, disk, [0.0, 1.0], 2, [2.0], ts, disk_grid)
    vals = [c[(t, 2.0)] for t in ts]
    assert all(a <= b + 1e-14 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------- tangential and full


def test_tangential_annihilates(disk, up_chart, disk_grid):
    req = ModulusRequest(linear, r=2, p=2.0, t=0.2)
    assert tangential_modulus(req, up_chart, disk, disk_grid).value < 1e-12


def test_tangential_flat_equals_directional(flat_dom, flat_grid):
    ch = flat_dom.charts[0]
    t = 0.2
    req = ModulusRequest(expsum, r=2, p=math.inf, t=t)
    tan = tangential_modulus(req, ch, flat_dom, flat_grid).value
    mask = ch.contains(flat_grid.points) & (ch.essential_distance(flat_grid.points) >= req.A0 * t * t)
    dirm = directional_modulus(req, flat_dom, [[1.0, 0.0]], flat_grid, support=mask).value
    assert tan == pytest.approx(dirm, rel=1e-10)


def test_tangential_empty_region(disk, up_chart, disk_grid):
    with pytest.raises(EmptyRegionError):
        tangential_values(x0, up_chart, disk, 1, [2.0], 1.0, disk_grid, A0=100.0)


def test_tangential_clamps_t(disk, up_chart, disk_grid):
    a = tangential_values(expsum, up_chart, disk, 1, [2.0], 1.0, disk_grid, A0=0.1)
    b = tangential_values(expsum, up_chart, disk, 1, [2.0], 3.0, disk_grid, A0=0.1)
    assert a == b


@pytest.mark.parametrize("r", [1, 2])
def test_tangential_slope(disk, up_chart, disk_grid, r):
    ts = 2.0 ** -np.arange(3, 8)
    vals = [tangential_values(expsum, up_chart, disk, r, [2.0], t, disk_grid)[2.0] for t in ts]
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    assert abs(slope - r) <= 0.25


def test_full_modulus_parts(disk, disk_grid):
    req = ModulusRequest(expsum, r=1, p=2.0, t=0.1)
    rep = full_modulus(req, disk, disk_grid)
    bd = rep.breakdown
    assert rep.value == bd["phi_part"] + bd["tan_part"]
    tans = [v for k, v in bd.items() if k.startswith("tan_") and k != "tan_part"]
    assert bd["tan_part"] == pytest.approx(sum(tans), rel=1e-14)
    assert bd["phi_part"] == max(bd["dt_e1"], bd["dt_e2"])
    assert '"value"' in rep.to_json()


def test_full_modulus_constant_and_monotone(disk, disk_grid):
    assert full_modulus(ModulusRequest(const, t=0.1), disk, disk_grid).value == 0.0
    ts = [0.03, 0.06, 0.12]
    c = full_modulus_curve(expsum, disk, 1, [2.0], ts, disk_grid)
    vals = [c[(t, 2.0)][0] for t in ts]
    assert vals[0] <= vals[1] <= vals[2]


# ---------------------------------------------------------------- Ivanov moduli


def test_ivanov_w_trivial(disk, disk_grid):
    xi = np.array([0.1, 0.2])
    assert ivanov_w(const, xi, 0.1, 1, 2.0, disk, disk_grid) == 0.0
    assert ivanov_w(linear, xi, 0.1, 2, 2.0, disk, disk_grid) < 1e-12


def test_ivanov_w_linear_at_centre(disk):
    grid = build_grid(disk, 160)
    delta = 0.05
    # metric ball radius at the centre: R + 1 - sqrt(1 - R) = delta
    R = brentq(lambda s: s + 1 - math.sqrt(1 - s) - delta, 0.0, delta)
    val = ivanov_w(x0, np.zeros(2), delta, 1, math.inf, disk, grid)
    # direct evaluation of the ball inequality on the same samples
    P = grid.points
    rho = np.linalg.norm(P, axis=1) + np.abs(np.sqrt(np.maximum(1 - np.linalg.norm(P, axis=1), 0)) - 1)
    assert val == pytest.approx(np.abs(P[rho <= delta, 0]).max(), rel=1e-12)
    near = np.sort(np.abs(P[np.abs(P[:, 1]) < 0.02, 0]))
    step = np.diff(np.unique(np.round(near[near < 0.1], 12))).max()
    assert R - step <= val <= R * 1.1


def test_ivanov_tau_monotone(disk, disk_grid):
    ds = [0.05, 0.1, 0.2]
    pq = [(2.0, 1.0), (2.0, 2.0), (math.inf, math.inf), (math.inf, 2.0)]
    c = ivanov_tau_curve(expsum, ds, 1, pq, disk, disk_grid)
    for p, q in pq:
        vals = [c[(d, p, q)] for d in ds]
        assert vals[0] <= vals[1] <= vals[2]
    for d in ds:
        assert c[(d, 2.0, 1.0)] <= c[(d, 2.0, 2.0)] * (1 + 1e-12)
        assert c[(d, math.inf, 2.0)] <= c[(d, math.inf, math.inf)] * (1 + 1e-12)


def test_ivanov_tau_trivial_and_order(disk, disk_grid):
    assert ivanov_tau(const, 0.1, 1, 2.0, 2.0, disk, disk_grid) == 0.0
    assert ivanov_tau(linear, 0.1, 2, 2.0, 2.0, disk, disk_grid) < 1e-12
    with pytest.raises(ExponentOrderError):
        ivanov_tau(x0, 0.1, 1, 1.0, 2.0, disk, disk_grid)


# ---------------------------------------------------------------- local moduli


def test_local_modulus_annihilates(up_chart):
    part = build_partition(up_chart, 8)
    assert local_modulus(linear, part, 2, 2.0, resolution=4) < 1e-12


def test_local_modulus_point_choice(up_chart):
    part = build_partition(up_chart, 8)
    base = local_modulus(expsum, part, 2, 2.0, resolution=4)
    rng = np.random.default_rng(7)
    vals = []
    for _ in range(5):
        corner = {}

        def pick(i):
            if i not in corner:
                lo, hi = part.delta_star(i)
                corner[i] = np.where(rng.random(part.d) < 0.5, lo, hi)
            return corner[i]

        vals.append(local_modulus(expsum, part, 2, 2.0, resolution=4, x_star=pick))
    assert max(vals + [base]) / min(vals + [base]) <= 4


def test_local_modulus_combines_parts(up_chart):
    from c2approx.smoothness import cell_moduli

    part4 = build_partition(up_chart, 8)
    cm = cell_moduli(expsum, part4, 1, [2.0, math.inf], resolution=4)
    l2 = math.sqrt(sum(a * a + b * b for v in cm.values() for a, b in [v[2.0]]))
    linf = max(max(v[math.inf]) for v in cm.values())
    assert local_modulus(expsum, part4, 1, 2.0, resolution=4) == pytest.approx(l2, rel=1e-12)
    assert local_modulus(expsum, part4, 1, math.inf, resolution=4) == linf


# ---------------------------------------------------------------- 1-D averaged modulus


def test_averaged_trivial():
    assert averaged_modulus_1d(lambda x: 2 * x + 1, (-1, 1), 0.1, r=2) < 1e-12
    assert averaged_modulus_1d(lambda x: x, (0, 1), 0.1, r=1, p=math.inf) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        averaged_modulus_1d(np.abs, (-1, 1), 3.0)


def test_averaged_equivalent_to_sup():
    ratios = [sup_modulus_1d(np.abs, (-1, 1), t, 1, 2.0) / averaged_modulus_1d(np.abs, (-1, 1), t, 1, 2.0)
              for t in 2.0 ** -np.arange(4, 9)]
    assert max(ratios) / min(ratios) <= 10
    assert min(ratios) > 0
