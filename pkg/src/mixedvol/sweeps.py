"""Randomized instance generators and per-instance checks shared by the CLI and the tests.

Every instance i draws from its own stream ``rng_stream(seed, i)``, so results
do not depend on evaluation order or on how many instances are requested.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .monge_ampere import mixed_discriminant
from .parallel import ordered_map, rng_stream
from .t_hodge import AlternatingForm, OneOneForm, TContext, g_from_theta, norm_comparison_check

DIMS = (2, 3, 4)


def _rel(residual: np.ndarray, reference: np.ndarray) -> float:
    return float(np.abs(residual).max(initial=0.0) / max(np.abs(reference).max(initial=0.0), 1e-300))


def random_nm(rng: np.random.Generator, dims=DIMS) -> tuple[int, int]:
    n = int(rng.choice(dims))
    return n, int(rng.integers(2, n + 1))


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


@dataclass
class LefschetzRecord:
    index: int
    n: int
    m: int
    hard_lefschetz: float
    reconstruction: float
    primitivity: float
    star_involution: float

    def to_dict(self) -> dict:
        return asdict(self)


def lefschetz_instance(seed: int, index: int, dims=DIMS) -> LefschetzRecord:
    """Relative residuals of the hard-Lefschetz, decomposition and *_s round trips on one context."""
    rng = rng_stream(seed, index)
    n, m = random_nm(rng, dims)
    ctx = TContext.random(n, m, rng)
    hl = rec = prim = star = 0.0
    for k in range(m + 1):
        target = ctx.wedge_T(AlternatingForm.random(n, 2 * m - k, rng))
        u = ctx.hard_lefschetz_solve(k, target)
        back = ctx.wedge_T(u.wedge(AlternatingForm(n, ctx.omega_vec_power(m - k))))
        hl = max(hl, _rel((back - target).coeffs, target.coeffs))

        v = AlternatingForm.random(n, k, rng)
        Tv = ctx.wedge_T(v)
        parts = ctx.lefschetz_decompose(v)
        total = sum((AlternatingForm(n, ctx.omega_vec_power(p)).wedge(up) for p, up in enumerate(parts)),
                    AlternatingForm(n))
        rec = max(rec, _rel(ctx.wedge_T(total).coeffs - Tv.coeffs, Tv.coeffs))
        scale = max(np.abs(Tv.coeffs).max(), 1e-300)
        for up in parts:
            if up.coeffs.any():
                prim = max(prim, ctx.is_primitive(up) / scale)
    for k in range(2 * m + 1):
        v = AlternatingForm.random(n, k, rng)
        Tv = ctx.wedge_T(v)
        twice = ctx.lefschetz_star(ctx.lefschetz_star(v))
        star = max(star, ctx.same_in_VT(twice, v) / max(np.abs(Tv.coeffs).max(), 1e-300))
    return LefschetzRecord(index, n, m, hl, rec, prim, star)


@dataclass
class PositivityRecord:
    index: int
    n: int
    m: int
    degree: int
    t_norm_sq: float
    coeff_norm_sq: float

    @property
    def normalized(self) -> float:
        return self.t_norm_sq / self.coeff_norm_sq


def positivity_context(seed: int, index: int, forms: int, dims=DIMS) -> list[PositivityRecord]:
    """t_norm_sq of ``forms`` random nonzero forms of random degree <= m on one random context."""
    rng = rng_stream(seed, index)
    n, m = random_nm(rng, dims)
    ctx = TContext.random(n, m, rng)
    out = []
    for _ in range(forms):
        k = int(rng.integers(0, m + 1))
        u = AlternatingForm.random(n, k, rng)
        out.append(PositivityRecord(index, n, m, k, ctx.t_norm_sq(u), float(np.vdot(u.coeffs, u.coeffs).real)))
    return out


@dataclass
class DiscriminantRecord:
    """D(H1,H2,K)^2 >= D(H1,H1,K) D(H2,H2,K) and its T-norm counterpart on primitive theta_0."""

    index: int
    n: int
    margin: float
    scale: float
    t_norm_sq: float
    shadow: float

    @property
    def relative_margin(self) -> float:
        return self.margin / self.scale

    @property
    def consistency(self) -> float:
        return abs(self.t_norm_sq - self.shadow) / max(abs(self.t_norm_sq), abs(self.shadow), 1e-300)


def _spd(n: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((n, n))
    ev = np.exp(rng.uniform(-1.5, 1.5, n))
    Q, _ = np.linalg.qr(A)
    return (Q * ev) @ Q.T


def discriminant_instance(seed: int, index: int, dims=DIMS) -> DiscriminantRecord:
    """Real SPD tuple (H1, H2, K...); theta = H1 - H2 in the context omega = H2, T = K ^ ..."""
    rng = rng_stream(seed, index)
    n = int(rng.choice(dims))
    H1, H2 = _spd(n, rng), _spd(n, rng)
    Ks = [_spd(n, rng) for _ in range(n - 2)]

    def D(a, b):
        return float(np.real(mixed_discriminant([a, b, *Ks])))

    d12, d11, d22 = D(H1, H2), D(H1, H1), D(H2, H2)
    margin = d12 * d12 - d11 * d22
    ctx = TContext(OneOneForm(H2), [OneOneForm(K) for K in Ks], 2)
    theta = H1 - H2
    res = g_from_theta(ctx, OneOneForm(theta))
    Dtw, Dtt = D(theta, H2), D(theta, theta)
    shadow = 2 * (Dtw**2 - Dtt * d22) / d22**2
    return DiscriminantRecord(index, n, margin, max(abs(d12 * d12), abs(d11 * d22)), ctx.t_norm_sq(res.theta0), shadow)


@dataclass
class GIdentityRecord:
    index: int
    n: int
    m: int
    G: float
    lambda_residual: float
    star_residual: float
    primitivity_residual: float


def g_identity_instance(seed: int, index: int, dims=DIMS) -> GIdentityRecord:
    """T ^ G = -Lambda(T ^ theta) and *(T ^ theta) = T ^ theta' for a random Hermitian theta."""
    rng = rng_stream(seed, index)
    n, m = random_nm(rng, dims)
    ctx = TContext.random(n, m, rng)
    res = g_from_theta(ctx, OneOneForm(random_hermitian(n, rng)))
    scale = max(np.abs(ctx.T_vec).max(), 1e-300) * max(1.0, abs(res.G))
    return GIdentityRecord(
        index, n, m, res.G, res.lambda_residual / scale, res.star_residual / scale, res.primitivity_residual / scale
    )


def norm_bound_instance(seed: int, index: int, dims=DIMS, slack: float = 1e-10):
    """Both constant bounds for T = omega^{n-m} on a random form of random degree <= m."""
    rng = rng_stream(seed, index)
    n, m = random_nm(rng, dims)
    omega = OneOneForm.random_positive(n, rng)
    k = int(rng.integers(0, m + 1))
    return norm_comparison_check(n, m, omega, AlternatingForm.random(n, k, rng), slack=slack)


def run_instances(fn, seed: int, count: int, **kwargs) -> list:
    return ordered_map(lambda i: fn(seed, i, **kwargs), range(count))


def positivity_sweep(seed: int, forms: int, contexts: int, dims=DIMS) -> list[PositivityRecord]:
    per = [forms // contexts + (1 if i < forms % contexts else 0) for i in range(contexts)]
    blocks = ordered_map(lambda i: positivity_context(seed, i, per[i], dims), range(contexts))
    return [r for b in blocks for r in b]


__all__ = [
    "DiscriminantRecord",
    "GIdentityRecord",
    "LefschetzRecord",
    "PositivityRecord",
    "discriminant_instance",
    "g_identity_instance",
    "lefschetz_instance",
    "norm_bound_instance",
    "positivity_context",
    "positivity_sweep",
    "random_hermitian",
    "run_instances",
]
