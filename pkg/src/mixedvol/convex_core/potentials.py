"""Smooth convex potentials on R^n with batched value/gradient/Hessian."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bodies import HULL_TOL, ConvexBody, DegenerateBodyError, affine_rank


class Potential:
    """Base class. ``evaluate`` accepts points of shape (..., n)."""

    kind = "custom"
    dim: int

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        return self.evaluate(x)[2]

    def gradient(self, x) -> np.ndarray:
        return self.evaluate(x)[1]

    def value(self, x) -> np.ndarray:
        return self.evaluate(x)[0]

    @property
    def degenerate(self) -> bool:
        """True when the Hessian is known to be singular everywhere."""
        return False

    def __add__(self, other: "Potential") -> "Potential":
        if not isinstance(other, Potential):
            return NotImplemented
        return SumPotential([self, other])

    def __rmul__(self, scale: float) -> "Potential":
        return ScaledPotential(float(scale), self)

    def __call__(self, x):
        return self.evaluate(x)


def _as_points(x, n: int) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.shape[-1:] != (n,):
        if n == 1 and X.ndim == 0:
            return X.reshape(1)
        raise ValueError(f"expected points with trailing dimension {n}, got shape {X.shape}")
    return X


def _symmetrize(H: np.ndarray) -> np.ndarray:
    return 0.5 * (H + np.swapaxes(H, -1, -2))


class LogSumExp(Potential):
    """phi(x) = log sum_j w_j exp(p_j . x); gradient range = interior of hull{p_j}.

    The Hessian is assembled as sum_j pi_j d_j d_j^T with deviations measured
    from the dominant exponent point, so it stays positive semidefinite and
    accurate far out where the softmax weights saturate.
    """

    kind = "log-sum-exp"

    def __init__(self, points, weights=None, allow_degenerate: bool = False):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.ndim != 2:
            raise ValueError("points must be an (N, n) array")
        w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (len(P),) or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive, one per point")
        self.points = P
        self.weights = w
        self.dim = P.shape[1]
        self.rank = affine_rank(P, HULL_TOL)
        if self.rank < self.dim and not allow_degenerate:
            raise DegenerateBodyError(
                f"exponent points span affine dimension {self.rank} < {self.dim};"
                " the Hessian would be singular everywhere"
            )
        self._logw = np.log(w)

    @property
    def degenerate(self) -> bool:
        return self.rank < self.dim

    def evaluate(self, x):
        X = _as_points(x, self.dim)
        z = X @ self.points.T + self._logw
        top = np.argmax(z, axis=-1)
        zmax = np.take_along_axis(z, top[..., None], axis=-1)
        e = np.exp(z - zmax)
        s = e.sum(axis=-1, keepdims=True)
        value = zmax[..., 0] + np.log(s[..., 0])
        pi = e / s
        pstar = self.points[top]
        dev = self.points - pstar[..., None, :]
        shift = np.einsum("...j,...ja->...a", pi, dev)
        grad = pstar + shift
        d = dev - shift[..., None, :]
        hess = _symmetrize(np.einsum("...j,...ja,...jb->...ab", pi, d, d))
        return value, grad, hess

    def hessian(self, x):
        return self.evaluate(x)[2]


class Quadratic(Potential):
    """0.5 x^T Q x + b.x + c."""

    kind = "quadratic"

    def __init__(self, Q=None, b=None, c: float = 0.0, dim: int | None = None):
        if Q is None:
            if dim is None:
                raise ValueError("need Q or dim")
            Q = np.eye(dim)
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.Q = _symmetrize(Q)
        self.dim = Q.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)

    def evaluate(self, x):
        X = _as_points(x, self.dim)
        QX = X @ self.Q
        value = 0.5 * np.einsum("...a,...a->...", QX, X) + X @ self.b + self.c
        grad = QX + self.b
        hess = np.broadcast_to(self.Q, X.shape[:-1] + self.Q.shape).copy()
        return value, grad, hess


class SumPotential(Potential):
    kind = "sum"

    def __init__(self, terms: Sequence[Potential]):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, SumPotential) else [t])
        dims = {t.dim for t in flat}
        if len(dims) != 1:
            raise ValueError(f"cannot add potentials of dimensions {sorted(dims)}")
        self.terms = flat
        self.dim = dims.pop()

    @property
    def degenerate(self) -> bool:
        # a sum of PSD Hessians is singular everywhere only if every term is
        return all(t.degenerate for t in self.terms)

    def evaluate(self, x):
        v, g, h = self.terms[0].evaluate(x)
        v, g, h = np.array(v, dtype=float), np.array(g, dtype=float), np.array(h, dtype=float)
        for t in self.terms[1:]:
            tv, tg, th = t.evaluate(x)
            v += tv
            g += tg
            h += th
        return v, g, h

    def hessian(self, x):
        h = np.array(self.terms[0].hessian(x), dtype=float)
        for t in self.terms[1:]:
            h += t.hessian(x)
        return h


class ScaledPotential(Potential):
    kind = "scaled"

    def __init__(self, scale: float, base: Potential):
        if scale <= 0:
            raise ValueError("scale must be positive to preserve convexity")
        self.scale = scale
        self.base = base
        self.dim = base.dim

    @property
    def degenerate(self) -> bool:
        return self.base.degenerate

    def evaluate(self, x):
        v, g, h = self.base.evaluate(x)
        return self.scale * v, self.scale * g, self.scale * h

    def hessian(self, x):
        return self.scale * self.base.hessian(x)


class CustomPotential(Potential):
    """Wraps a user callable returning (value, gradient, hessian) at one point."""

    kind = "custom"

    def __init__(self, dim: int, fn: Callable, vectorized: bool = False):
        self.dim = dim
        self.fn = fn
        self.vectorized = vectorized

    def evaluate(self, x):
        X = _as_points(x, self.dim)
        if self.vectorized:
            v, g, h = self.fn(X)
            return np.asarray(v, float), np.asarray(g, float), _symmetrize(np.asarray(h, float))
        flat = X.reshape(-1, self.dim)
        out = [self.fn(row) for row in flat]
        v = np.array([o[0] for o in out], dtype=float).reshape(X.shape[:-1])
        g = np.array([o[1] for o in out], dtype=float).reshape(X.shape)
        h = np.array([o[2] for o in out], dtype=float).reshape(X.shape + (self.dim,))
        return v, g, _symmetrize(h)


def lse_potential(points, weights=None, allow_degenerate: bool = False) -> LogSumExp:
    """Log-sum-exp potential whose gradient image is the open hull of ``points``."""
    return LogSumExp(points, weights, allow_degenerate=allow_degenerate)


def body_potential(body: ConvexBody) -> LogSumExp:
    """Canonical body -> potential map: unit-weight log-sum-exp over the vertices."""
    return LogSumExp(body.vertices, allow_degenerate=body.degenerate)


def quadratic(dim: int) -> Quadratic:
    return Quadratic(dim=dim)


def evaluate(potential: Potential, x):
    """(value, gradient, hessian) at ``x``; the Hessian is exactly symmetric."""
    return potential.evaluate(x)


@dataclass
class GradientMapReport:
    samples: int
    inside_fraction: float
    closed_fraction: float
    max_distance: float
    max_condition: float
    positive_definite_fraction: float
    invertibility_residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def gradient_map_check(
    potential: Potential,
    body: ConvexBody,
    samples: int = 1000,
    scales: Sequence[float] = (1.0, 4.0, 16.0, 64.0),
    seed: int = 0,
    slack: float = 1e-9,
    inversion_probes: int = 16,
) -> GradientMapReport:
    """Check that the gradient map lands in ``body`` and is locally invertible.

    Points are drawn as standard Gaussians rescaled by each entry of
    ``scales`` in turn, plus the origin. ``closed_fraction`` counts images in
    the closed body (facet slack ``slack``). ``inside_fraction`` additionally
    requires a positive definite Hessian: a local diffeomorphism whose image
    sits in a closed convex set maps into its interior. ``max_distance`` is the
    largest facet-plane violation (0 when every image is inside).
    """
    from .legendre import LegendreError, legendre_transform

    if samples < 1:
        raise ValueError("samples must be >= 1")
    if potential.dim != body.dim:
        raise ValueError("potential and body live in different dimensions")
    rng = np.random.default_rng(seed)
    n = body.dim
    z = rng.standard_normal((samples, n))
    scale_col = np.asarray(scales, float)[np.arange(samples) % len(scales)]
    X = z * scale_col[:, None]
    X[0] = 0.0
    _, grads, hess = potential.evaluate(X)
    viol = body.facet_violation(grads)
    inside = viol <= slack
    eig = np.linalg.eigvalsh(hess)
    pd = eig[:, 0] > 0
    with np.errstate(divide="ignore"):
        cond = np.where(pd, eig[:, -1] / np.where(pd, eig[:, 0], 1.0), np.inf)

    # round trips only where the Hessian is not exponentially flat
    probe_idx = np.flatnonzero(np.linalg.norm(X, axis=1) <= 8.0)[:inversion_probes]
    residual = 0.0
    for i in probe_idx:
        try:
            res = legendre_transform(potential, grads[i], x0=np.zeros(n))
            residual = max(residual, float(np.linalg.norm(res.argmax - X[i])))
        except (LegendreError, np.linalg.LinAlgError):
            residual = np.inf
    return GradientMapReport(
        samples=samples,
        inside_fraction=float((inside & pd).mean()),
        closed_fraction=float(inside.mean()),
        max_distance=float(max(viol.max(), 0.0)),
        max_condition=float(cond.max()),
        positive_definite_fraction=float(pd.mean()),
        invertibility_residual=residual,
    )
