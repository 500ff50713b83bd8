import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from mixedvol.convex_core import (
    BodyFormatError,
    ConvexBody,
    DegenerateBodyError,
    DimensionMismatchError,
    LogSumExp,
    NewtonDivergence,
    Quadratic,
    body_potential,
    conjugate,
    cube,
    evaluate,
    gradient_map_check,
    legendre_transform,
    load_body,
    lse_potential,
    minkowski_sum,
    polytope_volume_exact,
    quadratic,
    segment,
    shipped_bodies,
    simplex,
)

points2 = st.lists(
    st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=3, max_size=9
).map(np.array)


def full_dim(P):
    P = np.asarray(P)
    return np.linalg.matrix_rank(P[1:] - P[0], tol=1e-6) == P.shape[1]


# -- bodies ---------------------------------------------------------------------


def test_canonical_vertices_drop_interior_points():
    body = ConvexBody([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5], [0.2, 0.7]])
    assert len(body) == 4
    np.testing.assert_array_equal(body.vertices, ConvexBody([[1, 1], [0, 0], [1, 0], [0, 1]]).vertices)


def test_degenerate_rejected_unless_allowed():
    with pytest.raises(DegenerateBodyError):
        ConvexBody([[0, 0], [1, 1], [2, 2]])
    seg = segment([1.0, 0.0])
    assert seg.degenerate and len(seg) == 2


def test_volume_named_bodies():
    assert polytope_volume_exact(cube(3)) == pytest.approx(1.0, abs=1e-14)
    assert polytope_volume_exact(simplex(3)) == pytest.approx(1 / 6, abs=1e-14)
    assert polytope_volume_exact(cube(2, 3.0)) == pytest.approx(9.0)


def test_volume_matches_monte_carlo_within_three_standard_errors():
    rng = np.random.default_rng(7)
    body = ConvexBody(rng.uniform(-1, 1, (12, 3)))
    exact = polytope_volume_exact(body)
    lo, hi = body.vertices.min(0), body.vertices.max(0)
    box = np.prod(hi - lo)
    Y = rng.uniform(lo, hi, (1_000_000, 3))
    p = body.contains(Y, slack=0.0).mean()
    se = box * math.sqrt(p * (1 - p) / len(Y))
    assert abs(box * p - exact) < 3 * se


@given(points2)
def test_volume_agrees_with_qhull(P):
    if not full_dim(P):
        return
    try:
        ref = ConvexHull(P).volume
    except Exception:
        return
    assert polytope_volume_exact(ConvexBody(P)) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_minkowski_examples():
    sq = cube(2)
    two = minkowski_sum([sq, sq])
    assert len(two) == 4 and polytope_volume_exact(two) == pytest.approx(4.0)
    z = minkowski_sum([segment([1.0, 0.0]), segment([0.0, 1.0])])
    assert not z.degenerate
    np.testing.assert_allclose(z.vertices, sq.vertices)
    with pytest.raises(DimensionMismatchError):
        minkowski_sum([sq, cube(3)])


def test_minkowski_mix_against_brute_force_hull():
    sq, tri = cube(2), simplex(2)
    mix = minkowski_sum([sq, tri], [0.5, 0.5])
    brute = (0.5 * sq.vertices[:, None] + 0.5 * tri.vertices[None]).reshape(-1, 2)
    hull = ConvexHull(brute)
    assert len(mix) == len(hull.vertices)
    assert polytope_volume_exact(mix) == pytest.approx(hull.volume, rel=1e-12)


@given(points2, points2)
def test_brunn_minkowski_and_monotonicity(P, Q):
    if not (full_dim(P) and full_dim(Q)):
        return
    A, B = ConvexBody(P), ConvexBody(Q)
    va, vb = polytope_volume_exact(A), polytope_volume_exact(B)
    vs = polytope_volume_exact(minkowski_sum([A, B]))
    assert vs >= max(va, vb) - 1e-12
    assert math.sqrt(vs) >= math.sqrt(va) + math.sqrt(vb) - 1e-9


def test_body_json_round_trip(tmp_path):
    body = shipped_bodies()["pentagon"]
    path = tmp_path / "b.json"
    path.write_text(json.dumps(body.to_dict()))
    again = load_body(path)
    np.testing.assert_array_equal(again.vertices, body.vertices)
    assert again.name == "pentagon"


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dim": 2,\n "vertices": [[0, 0], [1, 0]')
    with pytest.raises(BodyFormatError, match=r"bad.json:2:\d+"):
        load_body(path)


def test_shipped_corpus():
    bodies = shipped_bodies()
    assert len(bodies) >= 10
    assert {b.dim for b in bodies.values()} == {2, 3}
    for b in bodies.values():
        assert np.abs(b.vertices).max() <= 2.0


# -- potentials -----------------------------------------------------------------


def test_lse_square_value_at_origin():
    v, g, H = evaluate(body_potential(cube(2)), np.zeros(2))
    assert v == pytest.approx(2 * math.log(2))
    np.testing.assert_allclose(g, [0.5, 0.5])


def test_lse_logistic_gradient_and_no_overflow():
    phi = lse_potential([[0.0], [1.0]])
    x = np.array([[-3.0], [0.0], [2.0]])
    np.testing.assert_allclose(phi.gradient(x)[:, 0], 1 / (1 + np.exp(-x[:, 0])))
    v, g, H = phi.evaluate(np.array([1000.0]))
    assert v == pytest.approx(1000.0) and np.isfinite(H).all()


def test_quadratic_example():
    v, g, H = evaluate(quadratic(2), np.array([3.0, 4.0]))
    assert v == 12.5
    np.testing.assert_array_equal(g, [3, 4])
    np.testing.assert_array_equal(H, np.eye(2))


def test_lse_hessian_matches_finite_differences(rng):
    phi = body_potential(cube(3))
    h = 1e-5
    for x in rng.normal(size=(5, 3)):
        H = phi.hessian(x)
        fd = np.array([(phi.gradient(x + h * e) - phi.gradient(x - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.abs(fd - H).max() / np.abs(H).max() < 1e-6
        np.testing.assert_array_equal(H, H.T)


def test_degenerate_lse_rejected():
    with pytest.raises(DegenerateBodyError):
        lse_potential([[0.0, 0.0], [1.0, 0.0]])


def test_simplex_gradients_strictly_inside(rng):
    phi = body_potential(simplex(2))
    g = phi.gradient(rng.normal(scale=3, size=(10_000, 2)))
    assert (g > 0).all() and (g.sum(1) < 1).all()


def test_gradient_map_reports():
    rep = gradient_map_check(body_potential(cube(2)), cube(2), samples=500)
    assert rep.inside_fraction == 1.0 and rep.invertibility_residual < 1e-8
    seg = lse_potential([[0.0, 0.0], [1.0, 0.0]], allow_degenerate=True)
    assert gradient_map_check(seg, cube(2), samples=200).inside_fraction < 1.0
    assert gradient_map_check(quadratic(2), cube(2), samples=200).inside_fraction < 1.0


# -- Legendre -------------------------------------------------------------------


def test_quadratic_self_dual(rng):
    for y in rng.normal(size=(5, 3)):
        assert legendre_transform(quadratic(3), y).value == pytest.approx(0.5 * y @ y, abs=1e-12)


def test_logistic_dual_against_grid_search():
    phi = lse_potential([[0.0], [1.0]])
    xs = np.linspace(-5, 5, 2_000_001)
    ref = np.max(0.5 * xs - np.logaddexp(0, xs))
    res = legendre_transform(phi, [0.5])
    assert res.value == pytest.approx(-math.log(2), abs=1e-12)
    assert abs(res.value - ref) < 1e-8


def test_double_dual_returns_original(rng):
    phi = body_potential(simplex(2))
    dual = conjugate(phi)
    for x in rng.normal(size=(20, 2)):
        val = legendre_transform(dual, x, x0=phi.gradient(x), tol=1e-8).value
        assert abs(val - phi.value(x)) < 1e-6 * (1 + abs(phi.value(x)))


def test_outside_range_diverges():
    with pytest.raises(NewtonDivergence):
        legendre_transform(body_potential(cube(2)), [2.0, 0.5])
