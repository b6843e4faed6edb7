import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from c2approx.errors import AboveGraphError, ChartSlopeError, PointOutsideDomainError
from c2approx.geometry import (Chart, CompositeDomain, FlatGraph, QuadraticGraph, domain_from_json,
                               domain_to_json, make_ellipse, metric_ball, phi_weight, rho_hat,
                               rho_omega, segment_in_domain)
from c2approx.sampling import build_grid


def _random_inside(dom, rng, k):
    lo, hi = dom.bbox
    P = rng.uniform(lo, hi, (8 * k, dom.dim))
    return P[dom.contains(P)][:k]


def test_disk_membership_and_distance(disk):
    assert disk.contains(np.array([[0.0, 0.0]]))[0]
    assert not disk.contains(np.array([[2.0, 0.0]]))[0]
    assert disk.dist(np.array([[0.5, 0.0]]))[0] == pytest.approx(0.5)


def test_ellipse_distance_at_center():
    assert make_ellipse(2.0, 1.0).dist(np.zeros((1, 2)))[0] == pytest.approx(1.0)


def test_rho_omega_values(disk):
    assert rho_omega([0.0, 0.0], [0.0, 0.0], disk) == 0.0
    # closed form: 0.5 + |1 - sqrt(0.5)|
    assert rho_omega([0.0, 0.0], [0.5, 0.0], disk) == pytest.approx(0.5 + 1 - math.sqrt(0.5), abs=1e-12)


def test_rho_omega_rejects_outside(disk):
    with pytest.raises(PointOutsideDomainError):
        rho_omega([0.0, 0.0], [1.5, 0.0], disk)


def test_rho_omega_triangle_inequality(disk, rng):
    P = _random_inside(disk, rng, 300)
    a, b, c = P[:100], P[100:200], P[200:300]
    lhs = rho_omega(a, c, disk)
    rhs = rho_omega(a, b, disk) + rho_omega(b, c, disk)
    assert np.all(lhs <= rhs + 1e-12)


def test_rho_hat_flat_graph():
    ch = Chart(1, 1, [0.0, 0.0], 1.0, 2.0, FlatGraph(5.0))
    assert rho_hat([0.0, 4.0], [0.0, 4.0], ch) == 0.0
    assert rho_hat([0.0, 4.0], [0.3, 4.0], ch) == pytest.approx(0.3)
    assert rho_hat([0.0, 5.0], [0.0, 4.0], ch) == pytest.approx(1.0)
    with pytest.raises(AboveGraphError):
        rho_hat([0.0, 5.5], [0.0, 4.0], ch)


def test_chart_slope_condition():
    with pytest.raises(ChartSlopeError):
        Chart(1, 1, [0.0, 0.0], 1.0, 1.0, QuadraticGraph(1.0))


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_chart_coordinates_roundtrip(x, y):
    ch = Chart(0, -1, [0.3, -0.2], 0.5, 4.0, FlatGraph(1.0))
    X, Y = ch.to_local(np.array([[x, y]]))
    assert np.allclose(ch.to_global(X, Y), [[x, y]])


def test_segments(disk):
    assert segment_in_domain([0.1, 0.1], [0.1, 0.1], disk)
    assert segment_in_domain([-0.9, 0.0], [0.9, 0.0], disk)
    inner = 0.2
    holed = CompositeDomain(
        dim=2,
        inside=lambda P: (np.linalg.norm(P, axis=1) <= 1) & (np.linalg.norm(P, axis=1) >= inner),
        boundary_distance=lambda P: np.minimum(1 - np.linalg.norm(P, axis=1),
                                               np.linalg.norm(P, axis=1) - inner),
        diameter=2.0, bbox=(np.array([-1.0, -1.0]), np.array([1.0, 1.0])))
    assert not segment_in_domain([-0.5, 0.0], [0.5, 0.0], holed)


def test_phi_weight_values(disk, square):
    assert phi_weight([1.0, 0.0], [0.0, 0.0], disk) == pytest.approx(1.0, abs=1e-9)
    assert phi_weight([1.0, 0.0], [0.25, 0.5], square) == pytest.approx(math.sqrt(0.25 * 0.75), abs=1e-9)
    assert phi_weight([0.0, 1.0], [1.0, 0.0], disk) == pytest.approx(0.0, abs=1e-6)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 10.0))
def test_phi_weight_scale_invariant(x, y, s):
    from c2approx.geometry import make_box
    box = make_box([0.0, 0.0], [1.0, 1.0])
    e = np.array([0.6, 0.8])
    assert phi_weight(s * e, [x, y], box) == pytest.approx(phi_weight(e, [x, y], box), rel=1e-9)


def test_metric_ball_whole_and_center(disk):
    g = build_grid(disk, 96, mode="tensor")
    whole = metric_ball([0.0, 0.0], disk.diameter + 1.0, disk, g)
    assert whole.indices.size == len(g)
    assert whole.weight == pytest.approx(g.total_weight)
    # at the centre U(0, t) is the disk r + 1 - sqrt(1 - r) <= t
    from scipy.optimize import brentq
    t = 0.1
    R = brentq(lambda r: r + 1 - math.sqrt(1 - r) - t, 0.0, t)
    ball = metric_ball([0.0, 0.0], t, disk, build_grid(disk, 400, mode="tensor"))
    assert ball.weight == pytest.approx(math.pi * R * R, rel=0.05)


def test_charts_cover_boundary_layer(disk, rng):
    P = _random_inside(disk, rng, 4000)
    near = P[disk.dist(P) < disk.margin]
    assert near.size and disk.covered_by_charts(near).all()
    assert (disk.covered_by_charts(P) | disk.in_boxes(P)).all()


def test_domain_json_roundtrip(disk):
    again = domain_from_json(domain_to_json(disk))
    P = np.array([[0.3, 0.4], [0.99, 0.0], [1.01, 0.0]])
    assert np.array_equal(again.contains(P), disk.contains(P))
    assert domain_from_json("disk").dim == 2
