import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixedvol.brascamp_lieb import DeformationFamily, g_t_value, g_value
from mixedvol.convex_core import cube, shipped_bodies, simplex
from mixedvol.t_hodge import AlternatingForm, OneOneForm, PositivityError, TContext, g_from_theta

seeds = st.integers(0, 2**32 - 1)
nm = st.sampled_from([(2, 2), (3, 2), (3, 3), (4, 2), (4, 3), (4, 4)])


def om_pow(ctx, r):
    return AlternatingForm(ctx.n, ctx.omega_vec_power(r))


def rel(a, b, ctx):
    ref = max(np.abs(ctx.wedge_T(b).coeffs).max(), 1e-300)
    return ctx.same_in_VT(a, b) / ref


def test_positivity_enforced():
    with pytest.raises(PositivityError):
        TContext(OneOneForm(np.diag([1.0, -1.0, 1.0])), [], 3)
    with pytest.raises(ValueError):
        TContext(OneOneForm.identity(3), [], 1)


def test_context_dict_round_trip(rng):
    ctx = TContext.random(3, 2, rng)
    again = TContext.from_dict(ctx.to_dict())
    np.testing.assert_allclose(again.T_vec, ctx.T_vec)
    assert again.normalizer == pytest.approx(ctx.normalizer)


def test_lefschetz_examples(rng):
    ctx = TContext(OneOneForm.identity(3), [], 3)
    one = AlternatingForm.scalar(3)
    u = one
    for k in range(1, 4):
        u = ctx.lefschetz_L(u)
        assert u.allclose(om_pow(ctx, k))
    ctx = TContext.random(3, 2, rng)
    top = AlternatingForm.random(3, 4, rng)
    assert not ctx.wedge_T(ctx.lefschetz_L(top)).coeffs.any()
    a, b = AlternatingForm.random(3, 2, rng), AlternatingForm.random(3, 2, rng)
    assert ctx.lefschetz_L(a * 2.5 + b).allclose(ctx.lefschetz_L(a) * 2.5 + ctx.lefschetz_L(b), atol=1e-13)


def test_hard_lefschetz_examples(rng):
    ctx = TContext.random(3, 2, rng)
    target = ctx.wedge_T(om_pow(ctx, 2))
    assert ctx.hard_lefschetz_solve(0, target).allclose(AlternatingForm.scalar(3), atol=1e-12)
    ctx = TContext(OneOneForm.identity(2), [], 2)
    v = AlternatingForm.random(2, 3, rng)
    u = ctx.hard_lefschetz_solve(1, v)
    assert (u ^ om_pow(ctx, 1)).allclose(v, atol=1e-10)


@given(seeds, nm)
def test_hard_lefschetz_round_trip(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    for k in range(m + 1):
        target = ctx.wedge_T(AlternatingForm.random(n, 2 * m - k, rng))
        u = ctx.hard_lefschetz_solve(k, target)
        back = ctx.wedge_T(u ^ om_pow(ctx, m - k))
        assert np.abs((back - target).coeffs).max() < 1e-9 * np.abs(target.coeffs).max()


def test_decomposition_examples(rng):
    ctx = TContext(OneOneForm.identity(2), [], 2)
    parts = ctx.lefschetz_decompose(om_pow(ctx, 1))
    assert np.abs(parts[0].coeffs).max() < 1e-14
    assert parts[1].allclose(AlternatingForm.scalar(2), atol=1e-14)
    ctx = TContext.random(3, 3, rng)
    prim = AlternatingForm.from_part(3, 2, ctx.prim(2) @ AlternatingForm.random(3, 2, rng).part(2))
    parts = ctx.lefschetz_decompose(prim)
    assert parts[0].allclose(prim, atol=1e-12) and np.abs(parts[1].coeffs).max() < 1e-12


@given(seeds, nm)
def test_decomposition_reconstructs_with_primitive_pieces(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    for k in range(m + 1):
        u = AlternatingForm.random(n, k, rng)
        parts = ctx.lefschetz_decompose(u)
        total = sum((om_pow(ctx, p) ^ up for p, up in enumerate(parts)), AlternatingForm(n))
        assert rel(total, u, ctx) < 1e-10
        scale = np.abs(ctx.wedge_T(u).coeffs).max()
        assert all(ctx.is_primitive(up) < 1e-10 * scale for up in parts)


def test_decomposition_is_unique(rng):
    ctx = TContext.random(4, 4, rng)
    pieces = [AlternatingForm.from_part(4, 4 - 2 * p, ctx.prim(4 - 2 * p) @ AlternatingForm.random(4, 4 - 2 * p, rng).part(4 - 2 * p))
              for p in range(3)]
    u = sum((om_pow(ctx, p) ^ up for p, up in enumerate(pieces)), AlternatingForm(4))
    for got, want in zip(ctx.lefschetz_decompose(u), pieces):
        assert rel(got, want, ctx) < 1e-9


def test_star_examples(rng):
    ctx = TContext.random(3, 2, rng)
    s = ctx.lefschetz_star(AlternatingForm.scalar(3))
    assert rel(s, om_pow(ctx, 2) / 2, ctx) < 1e-13


@given(seeds, nm)
def test_star_is_an_involution_and_commutes_with_weil(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    for k in range(2 * m + 1):
        u = AlternatingForm.random(n, k, rng)
        assert rel(ctx.lefschetz_star(ctx.lefschetz_star(u)), u, ctx) < 1e-10
    p = int(rng.integers(0, m + 1))
    q = int(rng.integers(0, m + 1 - p)) if p < m + 1 else 0
    u = AlternatingForm.random(n, p + q, rng, bidegree=(p, q))
    assert rel(ctx.weil(ctx.lefschetz_star(u)), ctx.lefschetz_star(ctx.weil(u)), ctx) < 1e-10


def test_lambda_examples(rng):
    ctx = TContext(OneOneForm.identity(2), [], 2)
    assert not ctx.lambda_op(AlternatingForm.scalar(2)).coeffs.any()
    lam = ctx.lambda_op(om_pow(ctx, 1))
    assert lam.allclose(AlternatingForm.scalar(2, 2.0), atol=1e-13)


@given(seeds, nm)
def test_sl2_commutator_is_diagonal(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    for k in range(2 * m + 1):
        u = AlternatingForm.random(n, k, rng)
        LL = ctx.lefschetz_L(ctx.lambda_op(u)) if k >= 2 else AlternatingForm(n)
        LR = ctx.lambda_op(ctx.lefschetz_L(u)) if k + 2 <= 2 * m else AlternatingForm(n)
        ref = max(np.abs(ctx.wedge_T(u).coeffs).max(), 1e-300)
        assert ctx.same_in_VT(LL - LR, u * (k - m)) < 1e-10 * max(1, abs(k - m)) * ref


@given(seeds, nm)
def test_lambda_is_adjoint_to_l(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    k = int(rng.integers(0, m - 1))
    u, v = AlternatingForm.random(n, k, rng), AlternatingForm.random(n, k + 2, rng)
    lhs = np.vdot(v.part(k + 2), ctx.gram(k + 2) @ ctx.lefschetz_L(u).part(k + 2))
    rhs = np.vdot(ctx.lambda_op(v).part(k), ctx.gram(k) @ u.part(k))
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_hodge_star_of_real_form_is_real(rng):
    ctx = TContext.random(3, 2, rng)
    theta = OneOneForm(rng.standard_normal((3, 3))).form()
    s = ctx.wedge_T(ctx.hodge_star_T(theta))
    assert np.abs((s - s.conj()).coeffs).max() < 1e-12
    u = AlternatingForm.random(3, 1, rng)
    assert rel(ctx.hodge_star_T(u.conj()), ctx.hodge_star_T(u).conj(), ctx) < 1e-13


def test_t_norm_examples(rng):
    ctx = TContext.random(4, 3, rng)
    assert ctx.t_norm_sq(AlternatingForm(4)) == 0.0
    assert ctx.t_norm_sq(AlternatingForm.scalar(4)) == pytest.approx(1.0, rel=1e-12)


@given(seeds, nm)
def test_t_norm_positive_and_matches_wedge_route(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    for k in range(m + 1):
        u = AlternatingForm.random(n, k, rng)
        val = ctx.t_norm_sq(u)
        assert val > 1e-14 * np.vdot(u.coeffs, u.coeffs).real
        direct = ctx.t_norm_sq_direct(u)
        assert abs(direct - val) < 1e-10 * val and abs(direct.imag) < 1e-10 * val


def test_g_examples(rng):
    ctx = TContext.random(3, 2, rng)
    res = g_from_theta(ctx, ctx.omega)
    assert res.G == pytest.approx(-2.0)
    assert np.abs(res.theta0.coeffs).max() < 1e-12
    res = g_from_theta(ctx, np.zeros((3, 3)))
    assert res.G == 0.0 and not res.theta0.coeffs.any()


@given(seeds, nm)
def test_g_identities(seed, shape):
    rng = np.random.default_rng(seed)
    n, m = shape
    ctx = TContext.random(n, m, rng)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    res = g_from_theta(ctx, (A + A.conj().T) / 2)
    scale = np.abs(ctx.T_vec).max() * max(1.0, abs(res.G))
    assert res.lambda_residual < 1e-10 * scale
    assert res.star_residual < 1e-10 * scale
    assert res.primitivity_residual < 1e-10 * scale


def test_g_and_g_t_match_brascamp_lieb_route(rng):
    B = shipped_bodies(3)
    for fam in (
        DeformationFamily.from_bodies(B["cube"], B["pyramid"], [B["octahedron"]], m=2),
        DeformationFamily.from_bodies(cube(3), simplex(3)),
    ):
        for x in rng.normal(size=(5, 1, 3)):
            t = float(rng.uniform(0.05, 0.95))
            H1, H2, Ks = fam.hessians(x)
            ctx = TContext(OneOneForm(t * H1[0] + (1 - t) * H2[0]), [OneOneForm(K[0]) for K in Ks], fam.m)
            res = g_from_theta(ctx, OneOneForm(H1[0] - H2[0]))
            assert res.G == pytest.approx(g_value(fam, t, x)[0], rel=1e-8)
            assert res.G_t == pytest.approx(g_t_value(fam, t, x)[0], rel=1e-8)
