"""Usual pointwise norms of forms and their comparison with T-norms.

The usual norm is computed without any Lefschetz machinery: write omega in a
unitary coframe d zeta = C^T dz (omega = (i/2) sum d zeta ^ d zetabar), change
basis with compound matrices, and weight every monomial of degree d by 2^d,
the squared length of a wedge of d orthogonal 1-forms of length sqrt 2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.linalg

from ..parallel import rng_stream
from .context import TContext, _as_one_one
from .forms import AlternatingForm, OneOneForm, degree_masks, haar_unitary


@lru_cache(maxsize=None)
def _slots(n: int, d: int) -> np.ndarray:
    """Slot lists (increasing) of the degree-d masks."""
    return np.array([[b for b in range(2 * n) if s >> b & 1] for s in degree_masks(n, d)], dtype=int).reshape(-1, d)


def usual_gram(h: np.ndarray, d: int) -> np.ndarray:
    """Hermitian Gram of the usual norm on degree-d forms for the metric with table h."""
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    Lc = np.linalg.cholesky(0.5 * (h + h.conj().T))
    G = np.linalg.inv(Lc.T)
    if d == 0:
        return np.ones((1, 1), dtype=complex)
    Phi = scipy.linalg.block_diag(G, G.conj())
    slots = _slots(n, d)
    # C[U, S] = det Phi[S, U]
    sub = Phi[slots[:, None, :, None], slots[None, :, None, :]]  # (S, U, d, d)
    C = np.linalg.det(sub).T
    return (2.0**d) * C.conj().T @ C


def usual_norm_sq(h: np.ndarray, w: AlternatingForm) -> float:
    d = w.degree()
    x = w.part(d)
    return float(np.vdot(x, usual_gram(h, d) @ x).real)


@dataclass
class NormComparison:
    n: int
    m: int
    degree: int
    t_norm_sq: float
    usual_norm_sq: float
    ratio: float
    lower_constant: float
    upper_constant: float
    lower_ok: bool
    upper_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def comparison_constants(n: int, m: int) -> tuple[float, float]:
    """(n!(n-m)!/m!, (n!/m!)^2)."""
    return (
        math.factorial(n) * math.factorial(n - m) / math.factorial(m),
        (math.factorial(n) / math.factorial(m)) ** 2,
    )


def norm_comparison_check(n: int, m: int, omega, u: AlternatingForm, slack: float = 1e-10) -> NormComparison:
    """Both pointwise norms of u for T = omega^{n-m} and the two constant bounds."""
    omega = _as_one_one(omega)
    if omega.n != n or u.n != n:
        raise ValueError("dimension mismatch")
    ctx = TContext(omega, [omega] * (n - m), m)
    k = u.degree()
    tn = ctx.t_norm_sq(u)
    Tu = ctx.wedge_T(u)
    us = usual_norm_sq(omega.h, Tu) if Tu.coeffs.any() else 0.0
    lo, hi = comparison_constants(n, m)
    scale = max(abs(us), abs(tn) * hi, 1e-300)
    return NormComparison(
        n=n, m=m, degree=k, t_norm_sq=tn, usual_norm_sq=us,
        ratio=us / tn if tn > 0 else math.nan,
        lower_constant=lo, upper_constant=hi,
        lower_ok=bool(us - lo * tn >= -slack * scale),
        upper_ok=bool(hi * tn - us >= -slack * scale),
    )


def ratio_extremes(ctx: TContext, k: int) -> tuple[float, float]:
    """(min, max) over nonzero u in V^k of |T ^ u|^2_omega / |u|^2_{T,omega}."""
    N = ctx.W(k).conj().T @ usual_gram(ctx.omega.h, k + ctx.T_degree) @ ctx.W(k)
    M = ctx.gram(k)
    M = 0.5 * (M + M.conj().T)
    N = 0.5 * (N + N.conj().T)
    ev = scipy.linalg.eigh(N, M, eigvals_only=True)
    return float(ev[0]), float(ev[-1])


def context_ratio(ctx: TContext) -> float:
    """max over k <= m of max(|T^u|/|u|_T, |u|_T/|T^u|)."""
    worst = 1.0
    for k in range(ctx.m + 1):
        lo, hi = ratio_extremes(ctx, k)
        worst = max(worst, math.sqrt(hi), 1.0 / math.sqrt(lo))
    return worst


def _factor(n: int, lam: np.ndarray, U: np.ndarray) -> OneOneForm:
    return OneOneForm(U @ np.diag(lam) @ U.conj().T)


def _context_from_params(n: int, m: int, log_lams: np.ndarray, unitaries) -> TContext:
    omega = OneOneForm.identity(n)
    return TContext(omega, [_factor(n, np.exp(l), U) for l, U in zip(log_lams, unitaries)], m)


@dataclass
class ProbeResult:
    n: int
    m: int
    C: float
    trials: int
    seed: int
    C1: float
    running_max: list[float] = field(repr=False)
    vertex_max: float = 0.0
    argmax: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("running_max")
        return d


def uniform_comparison_probe(
    n: int, m: int, C: float, trials: int, seed: int = 0, vertices: bool = True
) -> ProbeResult:
    """Empirical C_1 with C_1^{-1} |u|_T <= |T ^ u| <= C_1 |u|_T over sampled T-factors.

    omega is the identity; each factor is U diag(lam) U^* with Haar U and
    log lam uniform in [-log C, log C]. For each sampled context the sup over
    u is exact (generalized eigenvalues), so the only sampling is over the
    compact set of factors. With ``vertices`` every factor choice with
    eigenvalues in {1/C, C} and U = I is scanned first. Trial i draws from its
    own stream, so the running maximum is monotone and prefix-stable in
    ``trials``.
    """
    if C < 1:
        raise ValueError("C must be >= 1")
    nf = n - m
    logC = math.log(C)
    best, arg = 1.0, {}
    vmax = 1.0
    if vertices:
        eye = [np.eye(n)] * nf
        for signs in product((-1.0, 1.0), repeat=n * nf):
            ll = logC * np.array(signs).reshape(nf, n)
            r = context_ratio(_context_from_params(n, m, ll, eye))
            if r > vmax:
                vmax = r
                if r > best:
                    best, arg = r, {"kind": "vertex", "log_eigenvalues": ll.tolist()}
    running = []
    for i in range(trials):
        rng = rng_stream(seed, i)
        ll = rng.uniform(-logC, logC, size=(nf, n))
        Us = [haar_unitary(n, rng) for _ in range(nf)]
        r = context_ratio(_context_from_params(n, m, ll, Us))
        if r > best:
            best, arg = r, {"kind": "trial", "index": i, "log_eigenvalues": ll.tolist()}
        running.append(best)
    return ProbeResult(n, m, C, trials, seed, best, running, vmax, arg)


@dataclass
class HoldoutResult:
    samples: int
    contexts: int
    max_ratio: float
    violations: int

    def to_dict(self) -> dict:
        return asdict(self)


def probe_holdout(
    n: int, m: int, C: float, C1: float, samples: int, seed: int, forms_per_context: int = 100,
    slack: float = 1e-9,
) -> HoldoutResult:
    """Fresh (context, u) pairs: count ratios max(|T^u|/|u|_T, inverse) above C1."""
    nf = n - m
    logC = math.log(C)
    contexts = -(-samples // forms_per_context)
    worst, bad, done = 0.0, 0, 0
    for c in range(contexts):
        rng = rng_stream(seed, c)
        ll = rng.uniform(-logC, logC, size=(nf, n))
        Us = [haar_unitary(n, rng) for _ in range(nf)]
        ctx = _context_from_params(n, m, ll, Us)
        cnt = min(forms_per_context, samples - done)
        ks = rng.integers(0, m + 1, size=cnt)
        for k in range(m + 1):
            sel = int((ks == k).sum())
            if not sel:
                continue
            dim = ctx.dim(k)
            X = rng.standard_normal((dim, sel)) + 1j * rng.standard_normal((dim, sel))
            N = ctx.W(k).conj().T @ usual_gram(ctx.omega.h, k + ctx.T_degree) @ ctx.W(k)
            M = ctx.gram(k)
            us = np.einsum("is,ij,js->s", X.conj(), N, X).real
            tn = np.einsum("is,ij,js->s", X.conj(), M, X).real
            r = np.sqrt(np.maximum(us / tn, tn / us))
            worst = max(worst, float(r.max()))
            bad += int((r > C1 * (1 + slack)).sum())
        done += cnt
    return HoldoutResult(samples=done, contexts=contexts, max_ratio=worst, violations=bad)
