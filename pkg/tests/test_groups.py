import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotmet.groups import (SU2, OffManifoldError, ProductGroup, ScaledGroup, Torus,
                            budget_net, circle, flatten_elements, group_from_dict,
                            leaf_factors, pairwise_distance_matrix, scaled)

RNG = np.random.default_rng(12345)
GROUPS = [circle(2 * math.pi), Torus(2, 1.0), SU2(1.0),
          ProductGroup((circle(2 * math.pi), SU2(0.5))),
          scaled(Torus(2, 2 * math.pi), math.sqrt(2))]


# ---------------------------------------------------------------- distances

def test_circle_antipodal():
    g = circle(2 * math.pi)
    assert g.distance(g.element([0.0]), g.element([math.pi])) == pytest.approx(math.pi)


def test_su2_quarter_turn():
    g = SU2(1.0)
    one = g.element([1, 0, 0, 0])
    i = g.element([0, 1, 0, 0])
    assert g.distance(one, i) == pytest.approx(math.pi / 2)


def test_torus_wraparound_oracle():
    t = Torus(2, 1.0)
    d = t.distance(t.element([0.1, 0.9]), t.element([0.9, 0.1]))
    # each coordinate wraps to a 0.2 move
    assert d == pytest.approx(math.sqrt(0.2 ** 2 + 0.2 ** 2), abs=1e-12)


def test_scaled_distance():
    g = scaled(circle(2 * math.pi), 3.0)
    assert g.distance(g.identity(), np.array([1.0])) == pytest.approx(3.0)


def test_product_distance_l2():
    g = ProductGroup((circle(2 * math.pi), circle(2 * math.pi)))
    a = (np.array([0.0]), np.array([0.0]))
    b = (np.array([3.0]), np.array([0.5]))
    expected = math.hypot(g.factors[0].distance(a[0], b[0]),
                          g.factors[1].distance(a[1], b[1]))
    assert g.distance(a, b) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: type(g).__name__)
def test_bi_invariance(group):
    worst = 0.0
    for _ in range(100):
        a, x, y = (group.random_element(RNG) for _ in range(3))
        d = group.distance(x, y)
        worst = max(worst,
                    abs(group.distance(group.op(a, x), group.op(a, y)) - d),
                    abs(group.distance(group.op(x, a), group.op(y, a)) - d))
    assert worst <= 1e-12


# --------------------------------------------------------------- group laws

def test_quaternion_table():
    g = SU2(1.0)
    i = g.element([0, 1, 0, 0])
    j = g.element([0, 0, 1, 0])
    k = g.element([0, 0, 0, 1])
    assert np.allclose(g.op(i, j), k, atol=1e-15)


def test_circle_inverse():
    g = circle(2 * math.pi)
    x = g.element([1.3])
    assert g.inverse(x)[0] == pytest.approx(2 * math.pi - 1.3)


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: type(g).__name__)
def test_group_axioms(group):
    for _ in range(20):
        a, b, c = (group.random_element(RNG) for _ in range(3))
        assert group.distance(group.op(group.identity(), a), a) <= 1e-12
        assert group.distance(group.op(a, group.identity()), a) <= 1e-12
        assert group.distance(group.op(group.op(a, b), c),
                              group.op(a, group.op(b, c))) <= 1e-12
        assert group.distance(group.op(a, group.inverse(a)),
                              group.identity()) <= 1e-12


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: type(g).__name__)
def test_halve_is_square_root(group):
    for _ in range(20):
        a = group.random_element(RNG)
        h = group.halve(a)
        assert group.distance(group.op(h, h), a) <= 1e-9


def test_su2_rejects_non_unit():
    with pytest.raises(ValueError):
        SU2(1.0).element([1.0, 1.0, 0.0, 0.0])


# --------------------------------------------------------------------- nets

def test_circle_net_is_subgroup_grid():
    g = circle(2 * math.pi)
    elements, mesh = g.net(4)
    values = sorted(float(e[0]) for e in elements)
    assert values == pytest.approx([0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    assert mesh == pytest.approx(math.pi / 4)


def test_torus_net_count():
    elements, _ = Torus(2, 1.0).net(3)
    assert len(elements) == 9


def test_torus_mesh_halves_when_doubled():
    g = Torus(2, 1.0)
    _, mesh_q = g.net(5)
    _, mesh_2q = g.net(10)
    assert mesh_2q == pytest.approx(mesh_q / 2)


def test_su2_net_mesh_measured():
    g = SU2(1.0)
    elements, mesh = g.net(24, seed=0)
    assert len(elements) == 24
    # independent covering-radius measurement on a fresh dense sample
    sample = np.random.default_rng(999).standard_normal((100_000, 4))
    sample /= np.linalg.norm(sample, axis=1, keepdims=True)
    arr = np.stack(elements)
    gaps = np.arccos(np.clip(sample @ arr.T, -1, 1)).min(axis=1)
    independent = float(gaps.max())
    assert independent == pytest.approx(mesh, rel=0.05)


def test_su2_net_mesh_nonincreasing():
    g = SU2(1.0)
    meshes = [g.net(q, seed=0)[1] for q in (8, 16, 32)]
    assert meshes[0] >= meshes[1] >= meshes[2]


def test_su2_net_deterministic():
    a, _ = SU2(1.0).net(10, seed=3)
    b, _ = SU2(1.0).net(10, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_budget_net_respects_total():
    for group in GROUPS:
        elements, _ = budget_net(group, 16, seed=0)
        assert 1 <= len(elements) <= 16


# --------------------------------------------------------------- embeddings

def test_circle_embed_basepoint():
    g = circle(2 * math.pi)
    assert np.allclose(g.embed(g.element([0.0])), [1.0, 0.0], atol=1e-15)


def test_chord_shorter_than_arc():
    g = circle(2 * math.pi)
    chord = np.linalg.norm(g.embed(g.element([0.0])) - g.embed(g.element([math.pi])))
    assert chord == pytest.approx(2.0)
    assert chord < math.pi


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: type(g).__name__)
def test_embed_roundtrip(group):
    for _ in range(100):
        a = group.random_element(RNG)
        back = group.unembed(group.embed(a))
        assert group.distance(a, back) <= 1e-12


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: type(g).__name__)
def test_embed_is_one_lipschitz(group):
    for _ in range(100):
        a, b = group.random_element(RNG), group.random_element(RNG)
        chordal = float(np.linalg.norm(group.embed(a) - group.embed(b)))
        assert chordal <= group.distance(a, b) + 1e-12


def test_unembed_rejects_off_manifold():
    g = circle(2 * math.pi)
    with pytest.raises(OffManifoldError):
        g.unembed(np.array([2.0, 0.0]))
    s = SU2(1.0)
    with pytest.raises(OffManifoldError):
        s.unembed(np.array([1.1, 0.0, 0.0, 0.0]))


def test_scaled_embed_scales_coordinates():
    g = circle(2 * math.pi)
    sg = scaled(g, 5.0)
    x = g.element([1.0])
    assert np.allclose(sg.embed(x), 5.0 * g.embed(x), atol=0)
    assert g.distance(sg.unembed(sg.embed(x)), x) <= 1e-12


# -------------------------------------------------------- local distortion

def test_local_distortion_closed_form_at_pi():
    g = circle(2 * math.pi)
    assert g.local_embedding_distortion(math.pi) == pytest.approx(2 / math.pi)


def test_local_distortion_small_threshold():
    g = circle(2 * math.pi)
    expected = 2 * math.sin(0.05) / 0.1
    assert g.local_embedding_distortion(0.1) == pytest.approx(expected, rel=1e-12)
    assert g.local_embedding_distortion(0.001) > 0.99999


def test_local_distortion_monotone_to_one():
    g = SU2(1.0)
    values = [g.local_embedding_distortion(t) for t in (2.0, 1.0, 0.5, 0.25, 0.125)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] > 0.999


def test_local_distortion_deficit_quarters():
    g = circle(2 * math.pi)
    t = 0.4
    deficits = [1 - g.local_embedding_distortion(t / 2 ** k) for k in range(3)]
    for a, b in zip(deficits, deficits[1:]):
        assert a / b == pytest.approx(4.0, rel=0.05)


def test_local_distortion_rejects_bad_threshold():
    with pytest.raises(ValueError):
        circle().local_embedding_distortion(0.0)


# ----------------------------------------------------------------- diameter

def test_diameters():
    assert circle(2 * math.pi).diameter() == pytest.approx(math.pi)
    assert SU2(1.0).diameter() == pytest.approx(math.pi)
    assert Torus(2, 1.0).diameter() == pytest.approx(math.sqrt(0.25 + 0.25))
    assert scaled(circle(2 * math.pi), 2.0).diameter() == pytest.approx(2 * math.pi)


def test_diameter_is_attained():
    g = Torus(2, 1.0)
    half = g.element([0.5, 0.5])
    assert g.distance(g.identity(), half) == pytest.approx(g.diameter())


# ------------------------------------------------------------- serialization

def test_group_json_roundtrip():
    for group in GROUPS:
        back = group_from_dict(group.to_jsonable())
        assert back == group


def test_group_from_dict_example():
    g = group_from_dict({"kind": "product", "factors": [
        {"kind": "torus", "dims": 1, "circumference": 6.2831853},
        {"kind": "su2", "radius": 1.0}]})
    assert isinstance(g, ProductGroup)
    assert isinstance(g.factors[0], Torus) and isinstance(g.factors[1], SU2)


def test_scaled_normalizes_nesting():
    g = ScaledGroup(ScaledGroup(circle(), 2.0), 3.0)
    assert isinstance(g.base, Torus)
    assert g.factor == pytest.approx(6.0)


def test_element_json_roundtrip():
    for group in GROUPS:
        a = group.random_element(RNG)
        back = group.element_from_jsonable(group.element_to_jsonable(a))
        assert group.distance(a, back) <= 1e-12


# ------------------------------------------------------------ vectorization

def test_pairwise_matrix_matches_scalar_distance():
    for group in GROUPS:
        xs = [group.random_element(RNG) for _ in range(4)]
        ys = [group.random_element(RNG) for _ in range(3)]
        mat = pairwise_distance_matrix(group, xs, ys)
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                assert mat[i, j] == pytest.approx(group.distance(x, y), abs=1e-12)


def test_leaf_factors_accumulate_scale():
    g = scaled(ProductGroup((scaled(circle(), 2.0), SU2(1.0))), 3.0)
    leaves = leaf_factors(g)
    assert [s for _, s in leaves] == pytest.approx([6.0, 3.0])


# ---------------------------------------------------------------- hypothesis

@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_circle_distance_symmetric_and_bounded(a, b):
    g = circle(1.0)
    x, y = g.element([a]), g.element([b])
    d = g.distance(x, y)
    assert d == g.distance(y, x)
    assert 0 <= d <= 0.5 + 1e-15
