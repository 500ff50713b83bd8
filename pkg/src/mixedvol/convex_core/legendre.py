"""Legendre transform by damped Newton with Armijo backtracking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potentials import Potential

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
ARMIJO_C = 1e-4
BLOWUP_NORM = 1e3


class LegendreError(ArithmeticError):
    def __init__(self, message: str, last_iterate: np.ndarray, grad_norm: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm


class NewtonNonConvergence(LegendreError):
    """Iteration budget exhausted before the gradient tolerance was met."""


class NewtonDivergence(LegendreError):
    """Iterates ran off to infinity: y is outside the gradient range."""


@dataclass
class LegendreResult:
    value: float
    argmax: np.ndarray
    iterations: int
    grad_norm: float

    def __iter__(self):
        # allows ``value, x = legendre_transform(...)``
        yield self.value
        yield self.argmax


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return -g
    step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
    if not np.all(np.isfinite(step)):
        return -g
    return step


def legendre_transform(
    potential: Potential,
    y,
    x0=None,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    blowup: float = BLOWUP_NORM,
) -> LegendreResult:
    """psi*(y) = sup_x x.y - psi(x), with the maximizer x where grad psi(x) = y.

    Minimizes psi(x) - x.y. Raises :class:`NewtonDivergence` when the iterate
    norm exceeds ``blowup * (1 + |x0|)`` and :class:`NewtonNonConvergence`
    when ``max_iter`` steps do not bring the gradient norm under ``tol``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = potential.dim
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},)")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).reshape(n)
    limit = blowup * (1.0 + np.linalg.norm(x))

    v, g, H = potential.evaluate(x)
    f = float(v) - x @ y
    r = g - y
    gnorm = float(np.linalg.norm(r))
    for it in range(max_iter + 1):
        if gnorm < tol:
            return LegendreResult(value=float(x @ y - v), argmax=x, iterations=it, grad_norm=gnorm)
        if it == max_iter:
            break
        p = _newton_direction(H, r)
        slope = float(r @ p)
        if slope >= 0:
            p, slope = -r, -gnorm**2
        alpha = 1.0
        for _ in range(60):
            xt = x + alpha * p
            vt, gt, Ht = potential.evaluate(xt)
            ft = float(vt) - xt @ y
            if ft <= f + ARMIJO_C * alpha * slope:
                break
            alpha *= 0.5
        else:
            # no decrease possible at machine precision; accept if already tiny
            break
        x, v, g, H, f = xt, vt, gt, Ht, ft
        r = g - y
        gnorm = float(np.linalg.norm(r))
        if not np.isfinite(gnorm) or np.linalg.norm(x) > limit:
            raise NewtonDivergence(
                f"iterate norm {np.linalg.norm(x):.3g} exceeded {limit:.3g}; y likely outside the gradient range",
                x,
                gnorm,
            )
    raise NewtonNonConvergence(
        f"gradient norm {gnorm:.3g} after {max_iter} iterations (tol {tol:g})", x, gnorm
    )


class LegendreDual(Potential):
    """psi* as a potential: gradient = maximizer, Hessian = inverse Hessian of psi there."""

    kind = "custom"

    def __init__(self, base: Potential, tol: float = NEWTON_TOL):
        self.base = base
        self.dim = base.dim
        self.tol = tol
        self._warm = np.zeros(base.dim)

    def evaluate(self, y):
        Y = np.asarray(y, dtype=float)
        flat = Y.reshape(-1, self.dim)
        vals = np.empty(len(flat))
        grads = np.empty_like(flat)
        hess = np.empty((len(flat), self.dim, self.dim))
        for i, row in enumerate(flat):
            try:
                res = legendre_transform(self.base, row, x0=self._warm, tol=self.tol)
            except LegendreError:
                res = legendre_transform(self.base, row, x0=np.zeros(self.dim), tol=self.tol)
            self._warm = res.argmax
            vals[i] = res.value
            grads[i] = res.argmax
            H = self.base.hessian(res.argmax)
            Hi = np.linalg.inv(H)
            hess[i] = 0.5 * (Hi + Hi.T)
        return (
            vals.reshape(Y.shape[:-1]),
            grads.reshape(Y.shape),
            hess.reshape(Y.shape + (self.dim,)),
        )


def conjugate(potential: Potential) -> LegendreDual:
    return LegendreDual(potential)
