import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotmet.metricspace import (FiniteMetricSpace, PointMap, bilipschitz_constant,
                                 lipschitz_constant, power_space, product_space,
                                 scale_space)


def space_from_points(points, labels=None):
    pts = np.asarray(points, dtype=float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    labels = labels or tuple(f"p{i}" for i in range(len(pts)))
    return FiniteMetricSpace(tuple(labels), d)


def two_point_space(distance):
    return FiniteMetricSpace(("a", "b"), [[0.0, distance], [distance, 0.0]])


@pytest.fixture
def random_space():
    rng = np.random.default_rng(42)
    return space_from_points(rng.standard_normal((5, 3)))


# ---------------------------------------------------------------- validation

def test_rejects_asymmetric():
    with pytest.raises(ValueError):
        FiniteMetricSpace(("a", "b"), [[0.0, 1.0], [2.0, 0.0]])


def test_rejects_nonzero_diagonal():
    with pytest.raises(ValueError):
        FiniteMetricSpace(("a", "b"), [[0.1, 1.0], [1.0, 0.0]])


def test_rejects_coincident_points():
    with pytest.raises(ValueError):
        FiniteMetricSpace(("a", "b"), [[0.0, 0.0], [0.0, 0.0]])


def test_rejects_triangle_violation():
    d = [[0.0, 1.0, 3.0], [1.0, 0.0, 1.0], [3.0, 1.0, 0.0]]
    with pytest.raises(ValueError, match="triangle"):
        FiniteMetricSpace(("a", "b", "c"), d)


def test_immutable_matrix(random_space):
    with pytest.raises(ValueError):
        random_space.dist[0, 1] = 5.0


# ------------------------------------------------------------------- scaling

def test_scale_identity(random_space):
    assert np.array_equal(scale_space(random_space, 1.0).dist, random_space.dist)


def test_scale_two_points():
    assert two_point_space(3.0) and scale_space(two_point_space(3.0), 2.0).distance("a", "b") == 6.0


def test_scale_elementwise_oracle(random_space):
    scaled = scale_space(random_space, 0.5)
    # oracle: recompute the matrix entry by entry
    expected = np.array([[0.5 * random_space.dist[i, j]
                          for j in range(5)] for i in range(5)])
    assert np.array_equal(scaled.dist, expected)
    assert scaled.labels == random_space.labels


def test_scale_rejects_nonpositive(random_space):
    with pytest.raises(ValueError):
        scale_space(random_space, 0.0)


def test_scale_composition(random_space):
    once = scale_space(random_space, 0.7 * 1.9)
    twice = scale_space(scale_space(random_space, 0.7), 1.9)
    assert np.allclose(twice.dist, once.dist, rtol=1e-15, atol=0.0)


# ------------------------------------------------------------------ products

def test_product_with_singleton_is_isometric():
    single = FiniteMetricSpace(("o",), [[0.0]])
    rng = np.random.default_rng(3)
    y = space_from_points(rng.standard_normal((4, 2)))
    prod = product_space(single, y)
    assert np.array_equal(prod.dist, y.dist)


def test_product_three_four_five():
    prod = product_space(two_point_space(3.0), two_point_space(4.0))
    # the cross pair moves 3 in one factor and 4 in the other
    assert prod.distance(("a", "a"), ("b", "b")) == 5.0


def test_product_elementwise_oracle():
    rng = np.random.default_rng(11)
    x = space_from_points(rng.standard_normal((3, 2)), labels="abc")
    y = space_from_points(rng.standard_normal((3, 2)), labels="uvw")
    prod = product_space(x, y)
    for i, (lx, ly) in enumerate(prod.labels):
        for j, (mx, my) in enumerate(prod.labels):
            expected = math.sqrt(x.distance(lx, mx) ** 2 + y.distance(ly, my) ** 2)
            assert prod.dist[i, j] == pytest.approx(expected, abs=1e-15)


def test_product_commutative_up_to_relabeling():
    rng = np.random.default_rng(5)
    x = space_from_points(rng.standard_normal((3, 2)), labels="abc")
    y = space_from_points(rng.standard_normal((2, 2)), labels="uv")
    xy, yx = product_space(x, y), product_space(y, x)
    for i, (lx, ly) in enumerate(xy.labels):
        for j, (mx, my) in enumerate(xy.labels):
            assert xy.dist[i, j] == pytest.approx(
                yx.distance((ly, lx), (my, mx)), abs=1e-15)


def test_power_one_is_identity(random_space):
    assert np.array_equal(power_space(random_space, 1).dist, random_space.dist)


def test_power_two_matches_product(random_space):
    assert np.allclose(power_space(random_space, 2).dist,
                       product_space(random_space, random_space).dist,
                       rtol=0, atol=0)


def test_power_hamming_oracle():
    cube = power_space(two_point_space(1.0), 4)
    # distances are square roots of Hamming disagreement counts
    for i, li in enumerate(cube.labels):
        for j, lj in enumerate(cube.labels):
            hamming = sum(a != b for a, b in zip(li, lj))
            assert cube.dist[i, j] == pytest.approx(math.sqrt(hamming), abs=1e-15)
    assert cube.dist.max() == 2.0


def test_power_zero_rejected(random_space):
    with pytest.raises(ValueError):
        power_space(random_space, 0)


def test_power_splits_into_products(random_space):
    whole = power_space(random_space, 3)
    left = power_space(random_space, 2)
    prod = product_space(left, random_space)
    for i, lw in enumerate(whole.labels):
        j = prod.labels.index((lw[:2], lw[2]))
        assert np.allclose(whole.dist[i], prod.dist[j][
            [prod.labels.index((mw[:2], mw[2])) for mw in whole.labels]])


# ----------------------------------------------------------------- constants

def test_identity_map_constants(random_space):
    m = PointMap(random_space, random_space, range(5))
    assert lipschitz_constant(m) == 1.0
    assert bilipschitz_constant(m) == 1.0


def test_constant_map_lipschitz(random_space):
    m = PointMap(random_space, random_space, [2] * 5)
    assert lipschitz_constant(m) == 0.0
    assert bilipschitz_constant(m) == math.inf


def test_scale_map_constants(random_space):
    m3 = PointMap(random_space, scale_space(random_space, 3.0), range(5))
    assert lipschitz_constant(m3) == pytest.approx(3.0, rel=1e-15)
    m2 = PointMap(random_space, scale_space(random_space, 2.0), range(5))
    assert bilipschitz_constant(m2) == pytest.approx(2.0, rel=1e-15)


def test_bilipschitz_brute_force_oracle():
    rng = np.random.default_rng(9)
    x = space_from_points(rng.standard_normal((4, 2)))
    y = space_from_points(rng.standard_normal((4, 2)), labels="wxyz")
    perm = rng.permutation(4)
    m = PointMap(x, y, perm)
    best = 1.0
    for i in range(4):
        for j in range(i + 1, 4):
            dx = x.dist[i, j]
            dy = y.dist[perm[i], perm[j]]
            best = max(best, dx / dy, dy / dx)
    assert bilipschitz_constant(m) == pytest.approx(best, rel=1e-15)


def test_bilipschitz_equals_two_sided_lipschitz():
    rng = np.random.default_rng(21)
    x = space_from_points(rng.standard_normal((4, 2)))
    y = space_from_points(rng.standard_normal((4, 2)), labels="wxyz")
    perm = list(rng.permutation(4))
    inv = [perm.index(i) for i in range(4)]
    c = bilipschitz_constant(PointMap(x, y, perm))
    assert c == pytest.approx(max(lipschitz_constant(PointMap(x, y, perm)),
                                  lipschitz_constant(PointMap(y, x, inv))),
                              rel=1e-15)


def test_assignment_must_be_total(random_space):
    with pytest.raises(ValueError):
        PointMap(random_space, random_space, [0, 1])


# -------------------------------------------------------------- hypothesis

@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
                min_size=2, max_size=6, unique=True),
       st.floats(0.1, 10))
def test_point_clouds_always_validate_and_scale(coords, factor):
    pts = np.asarray(coords)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    if np.any(d[~np.eye(len(pts), dtype=bool)] == 0.0):
        return  # coincident projections, not a metric space
    space = FiniteMetricSpace(tuple(range(len(pts))), d)
    assert np.allclose(scale_space(space, factor).dist, factor * space.dist,
                       rtol=1e-15, atol=0)


# -------------------------------------------------------------- round trips

def test_json_roundtrip(random_space):
    back = FiniteMetricSpace.from_json(random_space.to_json())
    assert back.labels == random_space.labels
    assert np.array_equal(back.dist, random_space.dist)


def test_json_roundtrip_tuple_labels():
    prod = product_space(two_point_space(1.0), two_point_space(2.0))
    back = FiniteMetricSpace.from_json(prod.to_json())
    assert back.labels == prod.labels


def test_csv_export(random_space):
    rows = random_space.to_csv().strip().split("\n")
    assert len(rows) == 10  # 5 choose 2
    first = rows[0].split(",")
    assert first[0] == "p0" and first[1] == "p1"
    assert float(first[2]) == random_space.dist[0, 1]
