"""Pointwise T-Hodge linear algebra.

Fix positive (1,1)-forms omega and alpha_{m+1}, ..., alpha_n on C^n and put
T = alpha_{m+1} ^ ... ^ alpha_n. Elements of V_T^k are T ^ u with u a k-form,
the cofactor. Every operator below acts on cofactors, so all of them are
matrices between the degree blocks V^k = span{e_S : |S| = k}.

For k <= m the cofactor is unique (u -> T ^ u is injective). For k > m it is
not; the canonical cofactor is omega^{k-m} ^ v with v in V^{2m-k}, which
exists and is unique by hard Lefschetz. Comparisons of elements of V_T are
always made after wedging with T.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .forms import (
    AlternatingForm,
    OneOneForm,
    _conj_perm,
    bidegree_table,
    degree_masks,
    dimension,
    left_mult_matrix,
    top_coefficient,
    vol_factor,
    wedge_vectors,
    weil_diagonal,
)

RANK_TOL = 1e-11


class PositivityError(ValueError):
    """The context is not positive, so hard Lefschetz fails."""


def bracket(j: int) -> int:
    """[j] = 1 + 2 + ... + j."""
    return j * (j + 1) // 2


def _as_one_one(x) -> OneOneForm:
    return x if isinstance(x, OneOneForm) else OneOneForm(x)


class _PivotedQR:
    """Column-pivoted QR with a relative rank tolerance."""

    def __init__(self, A: np.ndarray, label: str):
        Q, R, P = scipy.linalg.qr(A, pivoting=True)
        diag = np.abs(np.diag(R))
        scale = diag[0] if diag.size else 0.0
        if diag.size and (scale == 0 or diag[-1] <= RANK_TOL * scale):
            raise PositivityError(
                f"positivity violated: {label} is singular (|R_min|/|R_00| = {diag[-1] / max(scale, 1e-300):.3g})"
            )
        self.Q, self.R, self.P = Q, R, P

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = scipy.linalg.solve_triangular(self.R, self.Q.conj().T @ b)
        x = np.empty_like(y)
        x[self.P] = y
        return x


class TContext:
    """Pointwise data (omega, alpha_{m+1}, ..., alpha_n) with cached operator blocks."""

    def __init__(self, omega, factors: Sequence = (), m: int | None = None):
        self.omega = _as_one_one(omega)
        self.factors = [_as_one_one(f) for f in factors]
        n = self.omega.n
        self.n = n
        self.m = n - len(self.factors) if m is None else m
        if not 2 <= self.m <= n:
            raise ValueError(f"need 2 <= m <= n, got m={self.m}, n={n}")
        if len(self.factors) != n - self.m:
            raise ValueError(f"need n - m = {n - self.m} factors, got {len(self.factors)}")
        if any(f.n != n for f in self.factors):
            raise ValueError("factor dimensions differ from omega")
        for label, f in [("omega", self.omega)] + [(f"factor {j}", f) for j, f in enumerate(self.factors)]:
            if not f.positive:
                raise PositivityError(f"positivity violated: {label} is not positive definite")
        self.omega_vec = self.omega.vector()
        T = AlternatingForm.scalar(n).coeffs
        for f in self.factors:
            T = wedge_vectors(T, f.vector(), n)
        self.T_vec = T
        self._Lfull = left_mult_matrix(self.omega_vec, n)
        self._Tfull = left_mult_matrix(self.T_vec, n)
        top = self.omega_vec_power(self.m) / math.factorial(self.m)
        norm = complex(top_coefficient(wedge_vectors(top, T, n), n))
        if not norm.real > 0:
            raise PositivityError("positivity violated: omega^m/m! ^ T has non-positive volume")
        self.normalizer = norm.real
        self._cache: dict = {}

    @classmethod
    def from_dict(cls, data: dict) -> "TContext":
        try:
            omega = OneOneForm.from_list(data["omega"])
            factors = [OneOneForm.from_list(f) for f in data.get("factors", [])]
            m = data.get("m")
            ctx = cls(omega, factors, m)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed context record: {exc}") from None
        if "n" in data and int(data["n"]) != ctx.n:
            raise ValueError("context n disagrees with the omega table")
        return ctx

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "omega": self.omega.to_list(),
            "factors": [f.to_list() for f in self.factors],
        }

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator, spread: float = 1.0) -> "TContext":
        omega = OneOneForm.random_positive(n, rng, spread)
        factors = [OneOneForm.random_positive(n, rng, spread) for _ in range(n - m)]
        return cls(omega, factors, m)

    @property
    def T_degree(self) -> int:
        return 2 * (self.n - self.m)

    def omega_vec_power(self, r: int) -> np.ndarray:
        out = AlternatingForm.scalar(self.n).coeffs
        for _ in range(r):
            out = wedge_vectors(out, self.omega_vec, self.n)
        return out

    # -- operator blocks ---------------------------------------------------------

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def dim(self, k: int) -> int:
        return len(degree_masks(self.n, k)) if 0 <= k <= 2 * self.n else 0

    def _block(self, full: np.ndarray, k_out: int, k_in: int) -> np.ndarray:
        if self.dim(k_out) == 0 or self.dim(k_in) == 0:
            return np.zeros((self.dim(k_out), self.dim(k_in)), dtype=complex)
        return full[np.ix_(degree_masks(self.n, k_out), degree_masks(self.n, k_in))]

    def L(self, k: int) -> np.ndarray:
        """omega ^ . : V^k -> V^{k+2}."""
        return self._memo(("L", k), lambda: self._block(self._Lfull, k + 2, k))

    def Lpow(self, k: int, r: int) -> np.ndarray:
        """omega^r ^ . : V^k -> V^{k+2r}."""

        def build():
            M = np.eye(self.dim(k), dtype=complex)
            for s in range(r):
                M = self.L(k + 2 * s) @ M
            return M

        return self._memo(("Lpow", k, r), build)

    def W(self, k: int) -> np.ndarray:
        """T ^ . : V^k -> V^{k + 2(n-m)}."""
        return self._memo(("W", k), lambda: self._block(self._Tfull, k + self.T_degree, k))

    def A(self, k: int) -> np.ndarray:
        """u -> T ^ omega^{m-k} ^ u : V^k -> V^{2n-k}, square and invertible for k <= m."""
        if not 0 <= k <= self.m:
            raise ValueError(f"hard Lefschetz needs 0 <= k <= m = {self.m}")
        return self._memo(("A", k), lambda: self.W(2 * self.m - k) @ self.Lpow(k, self.m - k))

    def _solver(self, k: int) -> _PivotedQR:
        return self._memo(("qr", k), lambda: _PivotedQR(self.A(k), f"T ^ omega^{self.m - k} on V^{k}"))

    def solve_A(self, k: int, rhs: np.ndarray) -> np.ndarray:
        return self._solver(k).solve(rhs)

    def Q(self, j: int) -> np.ndarray:
        """u -> uhat with T ^ omega^{m-j+2} ^ uhat = T ^ omega^{m-j+1} ^ u, V^j -> V^{j-2}."""

        def build():
            rhs = self.W(2 * self.m - j + 2) @ self.Lpow(j, self.m - j + 1)
            return self.solve_A(j - 2, rhs)

        return self._memo(("Q", j), build)

    def prim(self, j: int) -> np.ndarray:
        """Primitive part u - omega ^ Q u on V^j (identity for j < 2)."""

        def build():
            I = np.eye(self.dim(j), dtype=complex)
            if j < 2:
                return I
            return I - self.L(j - 2) @ self.Q(j)

        return self._memo(("prim", j), build)

    def canonical(self, k: int) -> np.ndarray:
        """V^k -> V^{2m-k} for k > m: the v with T ^ omega^{k-m} ^ v = T ^ u."""
        if k <= self.m:
            raise ValueError("cofactors of degree <= m are already unique")
        if k > 2 * self.m:
            raise ValueError(f"V_T^{k} is zero for k > 2m")
        return self._memo(("canon", k), lambda: self.solve_A(2 * self.m - k, self.W(k)))

    def components(self, k: int) -> dict[int, np.ndarray]:
        """Lefschetz decomposition maps: T ^ u = sum_p L^p (T ^ u_p), u_p = C_p u in V^{k-2p}."""

        def build():
            if k <= self.m:
                out, acc, j, p = {}, np.eye(self.dim(k), dtype=complex), k, 0
                while j >= 0:
                    out[p] = self.prim(j) @ acc
                    if j < 2:
                        break
                    acc = self.Q(j) @ acc
                    j, p = j - 2, p + 1
                return out
            shift = k - self.m
            base = self.canonical(k)
            return {p + shift: C @ base for p, C in self.components(2 * self.m - k).items()}

        return self._memo(("comp", k), build)

    def canonical_cofactor(self, k: int) -> np.ndarray:
        """Projection onto the canonical cofactor: sum_p omega^p ^ u_p."""
        return self._memo(
            ("cofactor", k),
            lambda: sum(self.Lpow(k - 2 * p, p) @ C for p, C in self.components(k).items()),
        )

    def star_matrix(self, k: int) -> np.ndarray:
        """Lefschetz star *_s : V^k -> V^{2m-k}.

        L_p(T ^ v) with T ^ v primitive of degree j goes to (-1)^{[j]} L_{m-p-j}(T ^ v).
        """

        def build():
            out = np.zeros((self.dim(2 * self.m - k), self.dim(k)), dtype=complex)
            for p, C in self.components(k).items():
                j = k - 2 * p
                r = self.m - p - j
                coef = (-1) ** bracket(j) * math.factorial(p) / math.factorial(r)
                out += coef * self.Lpow(j, r) @ C
            return out

        if not 0 <= k <= 2 * self.m:
            raise ValueError(f"*_s is defined on V_T^k for 0 <= k <= 2m = {2 * self.m}")
        return self._memo(("star", k), build)

    def J(self, k: int) -> np.ndarray:
        """Weil operator i^{p-q} on the degree-k block (diagonal)."""
        return weil_diagonal(self.n)[degree_masks(self.n, k)]

    def hodge_matrix(self, k: int) -> np.ndarray:
        """* = *_s J on V^k."""
        return self._memo(("hodge", k), lambda: self.star_matrix(k) * self.J(k)[None, :])

    def lambda_matrix(self, k: int) -> np.ndarray:
        """Lambda = *_s^{-1} L *_s : V^k -> V^{k-2}, using *_s^{-1} = *_s."""
        if not 2 <= k <= 2 * self.m:
            raise ValueError(f"Lambda needs 2 <= k <= 2m = {2 * self.m}")
        j = 2 * self.m - k
        return self._memo(("Lambda", k), lambda: self.star_matrix(j + 2) @ self.L(j) @ self.star_matrix(k))

    def conj_block(self, k: int) -> np.ndarray:
        """Signed permutation with conj(v) = conj_block @ v.conj() on V^k."""

        def build():
            swapped, sign = _conj_perm(self.n)
            masks = degree_masks(self.n, k)
            pos = {int(s): i for i, s in enumerate(masks)}
            M = np.zeros((len(masks), len(masks)))
            for i, s in enumerate(masks):
                M[pos[int(swapped[s])], i] = sign[s]
            return M

        return self._memo(("conj", k), build)

    def pairing(self, k: int) -> np.ndarray:
        """P with top(T ^ a ^ c) = a^T P c, a in V^k, c in V^{2m-k} (relative to dx ^ dy ^ ...)."""

        def build():
            d1 = k + self.T_degree
            full = dimension(self.n) - 1
            m1, m2 = degree_masks(self.n, d1), degree_masks(self.n, 2 * self.m - k)
            pos = {int(s): i for i, s in enumerate(m2)}
            E = np.zeros((len(m1), len(m2)), dtype=complex)
            probe = np.zeros((2, dimension(self.n)))
            for i, s in enumerate(m1):
                probe[:] = 0
                probe[0, s] = 1
                probe[1, full ^ s] = 1
                E[i, pos[int(full ^ s)]] = wedge_vectors(probe[0], probe[1], self.n)[full]
            return self.W(k).T @ E / vol_factor(self.n)

        return self._memo(("pair", k), build)

    def gram(self, k: int) -> np.ndarray:
        """Hermitian M with |u|^2_{T,omega} = u^H M u on V^k, k <= m."""
        if not 0 <= k <= self.m:
            raise ValueError(f"T-norm is defined for 0 <= k <= m = {self.m}")

        def build():
            H = self.hodge_matrix(k)
            X = self.pairing(k) @ self.conj_block(2 * self.m - k) @ H.conj()
            return X.T / self.normalizer

        return self._memo(("gram", k), build)

    # -- operations on forms -----------------------------------------------------

    def _homogeneous(self, u: AlternatingForm) -> int:
        if u.n != self.n:
            raise ValueError("form and context dimensions differ")
        return u.degree()

    def wedge_T(self, u: AlternatingForm) -> AlternatingForm:
        return AlternatingForm(self.n, wedge_vectors(self.T_vec, u.coeffs, self.n))

    def same_in_VT(self, a: AlternatingForm, b: AlternatingForm) -> float:
        """max-abs residual of T ^ (a - b)."""
        return float(np.abs(self.wedge_T(a - b).coeffs).max(initial=0.0))

    def lefschetz_L(self, u: AlternatingForm) -> AlternatingForm:
        k = self._homogeneous(u)
        if k + 2 > 2 * self.n:
            raise ValueError("degree overflow: omega ^ u would exceed degree 2n")
        return AlternatingForm.from_part(self.n, k + 2, self.L(k) @ u.part(k))

    def hard_lefschetz_solve(self, k: int, target: AlternatingForm) -> AlternatingForm:
        """u in V^k with T ^ u ^ omega^{m-k} = target (target of degree 2n - k)."""
        d = target.degree()
        if target.coeffs.any() and d != 2 * self.n - k:
            raise ValueError(f"target must have degree {2 * self.n - k}, got {d}")
        return AlternatingForm.from_part(self.n, k, self.solve_A(k, target.part(2 * self.n - k)))

    def lefschetz_decompose(self, u: AlternatingForm) -> list[AlternatingForm]:
        """[u_0, u_1, ...] with T ^ u = sum_p omega^p ^ T ^ u_p and each T ^ u_p primitive."""
        k = self._homogeneous(u)
        comps = self.components(k)
        return [AlternatingForm.from_part(self.n, k - 2 * p, comps[p] @ u.part(k)) if p in comps
                else AlternatingForm(self.n) for p in range(max(comps) + 1)]

    def lefschetz_star(self, u: AlternatingForm) -> AlternatingForm:
        k = self._homogeneous(u)
        return AlternatingForm.from_part(self.n, 2 * self.m - k, self.star_matrix(k) @ u.part(k))

    def lambda_op(self, u: AlternatingForm) -> AlternatingForm:
        k = self._homogeneous(u)
        if k < 2:
            return AlternatingForm(self.n)
        return AlternatingForm.from_part(self.n, k - 2, self.lambda_matrix(k) @ u.part(k))

    def weil(self, u: AlternatingForm) -> AlternatingForm:
        return AlternatingForm(self.n, u.coeffs * weil_diagonal(self.n))

    def hodge_star_T(self, u: AlternatingForm) -> AlternatingForm:
        """* = *_s o J; returns the canonical cofactor of *(T ^ u)."""
        return self.lefschetz_star(self.weil(u))

    def is_primitive(self, u: AlternatingForm) -> float:
        """Residual of L^{m-k+1}(T ^ u) (0 for primitive u)."""
        k = self._homogeneous(u)
        if k > self.m:
            return math.inf
        v = self.Lpow(k, self.m - k + 1) @ u.part(k)
        w = self.W(k + 2 * (self.m - k + 1)) @ v if self.dim(k + 2 * (self.m - k + 1) + self.T_degree) else v[:0]
        return float(np.abs(w).max(initial=0.0))

    def t_norm_sq(self, u: AlternatingForm) -> float:
        """Pointwise |u|^2_{T,omega}: u ^ conj(*(T ^ u)) = |u|^2 omega^m/m! ^ T."""
        k = self._homogeneous(u)
        if not u.coeffs.any():
            return 0.0
        x = u.part(k)
        val = np.vdot(x, self.gram(k) @ x)
        return float(val.real)

    def t_norm_sq_direct(self, u: AlternatingForm) -> complex:
        """Same quantity assembled by wedging forms (no Gram matrix)."""
        star = self.hodge_star_T(u)
        top = self.wedge_T(u).wedge(star.conj())
        return complex(top.top()) / self.normalizer

    @cached_property
    def volume_form(self) -> AlternatingForm:
        """omega^m/m! ^ T."""
        v = wedge_vectors(self.omega_vec_power(self.m), self.T_vec, self.n) / math.factorial(self.m)
        return AlternatingForm(self.n, v)


# -- the G identities -------------------------------------------------------------


class GThetaResult:
    """G, theta_0, theta' and the residuals of the identities they satisfy."""

    def __init__(self, G, theta0, theta_prime, primitivity, lambda_residual, star_residual, G_t):
        self.G = G
        self.theta0 = theta0
        self.theta_prime = theta_prime
        self.primitivity_residual = primitivity
        self.lambda_residual = lambda_residual
        self.star_residual = star_residual
        self.G_t = G_t

    def __iter__(self):
        yield self.G
        yield self.theta0
        yield max(self.primitivity_residual, self.lambda_residual)


def g_from_theta(ctx: TContext, theta) -> GThetaResult:
    """G from theta ^ omega^{m-1}/(m-1)! ^ T = -G omega^m/m! ^ T, with theta_0, theta' and checks.

    Also returns G_t = top(theta ^ theta' ^ T) / top(omega^m/m! ^ T).
    """
    theta = _as_one_one(theta)
    if theta.n != ctx.n:
        raise ValueError("theta and context dimensions differ")
    n, m = ctx.n, ctx.m
    th = AlternatingForm(n, theta.vector())
    om = AlternatingForm(n, ctx.omega_vec)
    om_pow = lambda r: AlternatingForm(n, ctx.omega_vec_power(r)) / math.factorial(r)  # noqa: E731
    lhs = ctx.wedge_T(th.wedge(om_pow(m - 1)))
    G = -float(np.real(lhs.top())) / ctx.normalizer
    theta0 = th + om * (G / m)
    prim = float(np.abs(ctx.wedge_T(theta0.wedge(om_pow(m - 1))).coeffs).max())
    prim = max(prim, ctx.is_primitive(theta0))
    lam = ctx.lambda_op(th)
    lam_res = float(np.abs(ctx.wedge_T(lam + AlternatingForm.scalar(n, G)).coeffs).max())
    theta1 = -G / m
    theta_prime = -theta0.wedge(om_pow(m - 2)) + om_pow(m - 1) * theta1
    star_res = ctx.same_in_VT(ctx.hodge_star_T(th), theta_prime)
    G_t = float(np.real(ctx.wedge_T(th.wedge(theta_prime)).top())) / ctx.normalizer
    return GThetaResult(G, theta0, theta_prime, prim, lam_res, star_res, G_t)


def random_context(n: int, m: int, rng: np.random.Generator, spread: float = 1.0) -> TContext:
    return TContext.random(n, m, rng, spread)


def bidegree_pure_random(n: int, p: int, q: int, rng: np.random.Generator) -> AlternatingForm:
    return AlternatingForm.random(n, p + q, rng, bidegree=(p, q))


__all__ = [
    "PositivityError",
    "TContext",
    "GThetaResult",
    "bracket",
    "g_from_theta",
    "random_context",
    "bidegree_pure_random",
    "bidegree_table",
]
