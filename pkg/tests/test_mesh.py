import csv
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from c2approx.errors import EmptySlabError, ParameterTooSmallError
from c2approx.geometry import Chart, FlatGraph, QuadraticGraph, rho_hat
from c2approx.mesh import (build_partition, chebyshev_layers, layer_alpha, min_ell1, subgraph_set,
                           tangent_vector)


@pytest.fixture(scope="module")
def flat_chart():
    return Chart(1, 1, [0.0, 0.0], 1.0, 1.0, FlatGraph(0.0))


@pytest.mark.parametrize("ell1", [2, 3, 7, 12])
def test_layers_closed_form(ell1):
    n = 4
    a = chebyshev_layers(n, ell1)
    mpmath.mp.dps = 40
    for j in range(ell1 * n + 1):
        ref = mpmath.sin(j * mpmath.pi / (2 * ell1 * n)) ** 2 / mpmath.sin(mpmath.pi / (2 * ell1)) ** 2
        assert a[j] == pytest.approx(float(ref), rel=4e-15, abs=1e-300)
    assert a[0] == 0.0 and a[n] == 1.0
    assert np.all(np.diff(a) > 0)
    assert layer_alpha(ell1) == pytest.approx(1 / (2 * math.sin(math.pi / (2 * ell1)) ** 2))


@given(st.integers(4, 40), st.integers(2, 16))
def test_layer_spacing_bounds(n, ell1):
    a = chebyshev_layers(n, ell1)
    al, N = layer_alpha(ell1), ell1 * n
    j = np.arange(1, n + 1)
    gap = np.diff(a)[: n]
    assert np.all(4 * j * al / N**2 <= gap * (1 + 1e-12))
    assert np.all(gap <= math.pi**2 * j * al / N**2 * (1 + 1e-12))


def test_flat_cells_tile_body(flat_chart):
    part = build_partition(flat_chart, 4)
    b = flat_chart.b
    tot = 0.0
    for i, j in part.indices():
        m = part.cell_measure(i, j)
        assert m == pytest.approx(2 * b / 4 * (part.layers[j + 1] - part.layers[j]), rel=1e-14)
        tot += m
    assert tot == pytest.approx(2 * b, rel=1e-13)


def test_disk_cells_tile_body(up_chart):
    part = build_partition(up_chart, 8)
    tot = sum(part.cell_measure(i, j) for i, j in part.indices())
    assert tot == pytest.approx(2 * up_chart.b * up_chart.body_depth, rel=1e-12)


def test_cell_index_partitions_body(up_chart, rng):
    part = build_partition(up_chart, 8)
    ch = up_chart
    x = rng.uniform(-ch.b, ch.b, (3000, 1))
    dep = rng.random(3000)
    P = ch.to_global(x, ch.g(x) - ch.body_depth * dep)
    I, J, valid = part.cell_index(P)
    assert valid.all()
    for k in range(0, 3000, 97):
        assert part.cell((I[k, 0],), J[k]).contains(P[k : k + 1])[0]
    outside = ch.to_global(np.array([[0.0]]), ch.g(np.array([[0.0]])) + 0.1)
    assert not part.cell_index(outside)[2][0]


def test_tangent_vectors(flat_chart, up_chart):
    assert np.allclose(tangent_vector(flat_chart, [0.3], 1), [1.0, 0.0])
    quad = Chart(1, 1, [0.0, 0.0], 0.5, 20.0, QuadraticGraph(1.0))
    assert np.allclose(tangent_vector(quad, [1.0], 1), [1.0, 1.0])
    assert np.allclose(tangent_vector(quad, [1.0], 1, normalized=True), [2**-0.5, 2**-0.5])
    assert np.allclose(tangent_vector(up_chart, [0.0], 1), [1.0, 0.0], atol=1e-12)
    with pytest.raises(IndexError):
        tangent_vector(up_chart, [0.0], 2)


def test_flat_slab_is_box(flat_chart):
    part = build_partition(flat_chart, 16)
    i, j = (5,), 9
    S, S_star = part.parallelepipeds(i, j)
    expected = part.alpha_star(j + part.m1) - part.alpha_star(j - part.m1) - 2 * part.M0 / 16**2
    assert S.height == pytest.approx(flat_chart.body_depth * expected, rel=1e-14)
    assert np.allclose(S.top(np.linspace(-1, 1, 7)[:, None]), 0.0)


def test_alpha_star_clamps(up_chart):
    part = build_partition(up_chart, 8)
    assert part.alpha_star(-3) == 0.0
    assert part.alpha_star(11) == 1.0
    E = part.extended_cell((3,), 0)
    assert E.dlo == 0.0


def _random_points(region, rng, m):
    ch = region.chart
    X = rng.uniform(region.lo_x, region.hi_x, (m, ch.d))
    dep = rng.uniform(region.dlo, region.dhi, m)
    return ch.to_global(X, region.top(X) - ch.body_depth * dep)


@pytest.mark.parametrize("n", [8, 16])
def test_slab_sandwich(up_chart, n, rng):
    part = build_partition(up_chart, n)
    for i, j in part.indices():
        if (i[0] + j) % 3:
            continue
        S, S_star = part.parallelepipeds(i, j)
        E = part.extended_cell(i, j)
        assert S_star.contains(_random_points(E, rng, 200)).all()
        X, _ = S.sample(14)
        assert E.contains(X).all()


def test_empty_slab_and_small_parameters(up_chart):
    part = build_partition(up_chart, 4)
    with pytest.raises(EmptySlabError):
        part.parallelepipeds((1,), 1)
    with pytest.raises(ParameterTooSmallError, match="layer condition"):
        build_partition(up_chart, 8, ell1=min_ell1(up_chart) - 1)
    with pytest.raises(ParameterTooSmallError, match="slab condition"):
        build_partition(up_chart, 8, m1=1)
    with pytest.raises(ValueError):
        build_partition(up_chart, 3)
    with pytest.raises(ValueError):
        part.parallelepipeds((1,), 1, x_star=[5.0])


def test_subgraph_set(flat_chart):
    G = subgraph_set(flat_chart, 1 / 8, 4.0)
    assert G.threshold == pytest.approx(0.0625)
    P = flat_chart.to_global(np.zeros((3, 1)), np.array([-0.05, -0.0625, -0.2]))
    assert G.contains(P).tolist() == [False, True, True]
    G0 = subgraph_set(flat_chart, 0.0)
    assert G0.contains(P).all()


def _local_pairs(ch, rng, m):
    x = rng.uniform(-ch.b, ch.b, (2 * m, ch.d))
    loc = np.c_[x, ch.g(x) - ch.body_depth * rng.random(2 * m)]
    return loc, ch.to_global(loc[:, :-1], loc[:, -1])


def test_metric_matches_cell_index_distance(up_chart):
    bounds = []
    for n in (8, 16):
        part = build_partition(up_chart, n)
        loc, P = _local_pairs(up_chart, np.random.default_rng(n), 1000)
        I, J, _ = part.cell_index(P)
        r = rho_hat(loc[:1000], loc[1000:], up_chart)
        k = np.maximum(np.abs(I[:1000] - I[1000:]).max(axis=1), np.abs(J[:1000] - J[1000:]))
        q = (1 + n * r) / (1 + k)
        bounds.append(max(q.max(), 1 / q.min()))
    assert max(bounds) < 4
    assert 0.5 < bounds[1] / bounds[0] < 2


def test_partition_csv(up_chart, tmp_path):
    part = build_partition(up_chart, 4)
    path = tmp_path / "cells.csv"
    part.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["i1", "j", "measure", "alpha_lo", "alpha_hi"]
    assert len(rows) == 1 + part.n_cells
    assert sum(float(r[2]) for r in rows[1:]) == pytest.approx(2 * up_chart.b * up_chart.body_depth)
