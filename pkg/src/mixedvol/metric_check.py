"""Certification of an explicit complete potential on R^n x T^n.

    psi(x) = sum_j [ -log(1 + x_j^2) + C log(1 + e^{x_j}) ],
    C = 4 (1 + e^{sqrt 3})^2 e^{sqrt 3}.

psi is separable, so every claim reduces to one-variable inequalities:

* psi'' >= 1/(1 + x^2) > 0,
* psi' takes values in (-1, C + 1),
* |d log(1 + |x|^2)|_g <= n for the metric g = Hess psi (n >= 2).

``regularized_family`` builds the hat potential psi + sum of body potentials
used to regularize deformation families, and checks its domination and
finite-volume properties.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .convex_core.bodies import ConvexBody, cube, minkowski_sum, polytope_volume_exact
from .convex_core.potentials import Potential, SumPotential, _as_points, body_potential

C_FORMULA = "4*(1+exp(sqrt(3)))**2*exp(sqrt(3))"


def _psi_constant() -> float:
    with decimal.localcontext() as ctx:
        ctx.prec = 50
        e = decimal.Decimal(3).sqrt().exp()
        return float(4 * (1 + e) ** 2 * e)


C_PSI = _psi_constant()

BOUND_SLACK = 1e-12
AXIS_HALF_WIDTH = 50.0
AXIS_STEP = 1e-3
SHELL_RADIUS = 1e3


def psi_eval(x, C: float = C_PSI) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(value, gradient, diagonal of the Hessian) at points x of shape (..., n)."""
    X = np.asarray(x, dtype=float)
    sig = expit(X)
    value = (-np.log1p(X**2) + C * np.logaddexp(0.0, X)).sum(axis=-1)
    grad = -2 * X / (1 + X**2) + C * sig
    # sigma(1 - sigma) written as sigma(x) sigma(-x) keeps full relative accuracy in both tails
    diag = -2 * (1 - X**2) / (1 + X**2) ** 2 + C * sig * expit(-X)
    return value, grad, diag


class CompletePotential(Potential):
    """psi as a :class:`Potential` (diagonal Hessian)."""

    kind = "custom"

    def __init__(self, n: int, C: float = C_PSI):
        self.dim = n
        self.C = C

    def evaluate(self, x):
        X = _as_points(x, self.dim)
        v, g, d = psi_eval(X, self.C)
        H = d[..., :, None] * np.eye(self.dim)
        return v, g, H


@dataclass
class ClaimReport:
    claim: str
    checked_points: int
    violations: int
    min_margin: float
    max_margin: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _claim(name: str, margin: np.ndarray, slack: float, **details) -> ClaimReport:
    margin = np.asarray(margin, float).ravel()
    return ClaimReport(
        claim=name,
        checked_points=int(margin.size),
        violations=int(np.count_nonzero(~(margin >= -slack))),
        min_margin=float(margin.min()),
        max_margin=float(margin.max()),
        details=details,
    )


def axis_grid(half_width: float = AXIS_HALF_WIDTH, step: float = AXIS_STEP) -> np.ndarray:
    count = int(round(2 * half_width / step)) + 1
    return np.linspace(-half_width, half_width, count)


def log_shells(radius: float = SHELL_RADIUS, per_decade: int = 200, inner: float = 1e-3) -> np.ndarray:
    """Symmetric log-spaced radii in [inner, radius], both signs."""
    decades = math.log10(radius / inner)
    r = np.geomspace(inner, radius, int(per_decade * decades) + 1)
    return np.concatenate([-r[::-1], r])


def verify_convexity_and_lower_bounds(grid: np.ndarray | None = None, C: float = C_PSI) -> list[ClaimReport]:
    """psi'' > 0 and psi'' >= 1/(1 + x^2) on a 1-D grid (separability)."""
    x = np.concatenate([axis_grid(), [-math.sqrt(3), math.sqrt(3)], log_shells()]) if grid is None else np.asarray(grid, float)
    _, _, d = psi_eval(x[:, None], C)
    d = d[:, 0]
    lower = 1.0 / (1.0 + x**2)
    return [
        _claim("strict_convexity", np.where(d > 0, d, -np.inf), 0.0, C=C, C_formula=C_FORMULA,
               psi_xx_at_0=float(d[np.argmin(np.abs(x))])),
        _claim("lower_bound", d - lower, BOUND_SLACK, bound="psi_xx >= 1/(1+x^2)"),
    ]


def verify_gradient_range(samples: np.ndarray | None = None, C: float = C_PSI) -> list[ClaimReport]:
    """psi' in (-1, C + 1), and |psi'(x) - limit| <= 2/|x| + C e^{-|x|} for |x| >= 100."""
    if samples is None:
        x = np.concatenate([np.linspace(-100, 100, 200_001), log_shells()])
    else:
        x = np.asarray(samples, float).ravel()
    _, g, _ = psi_eval(x[:, None], C)
    g = g[:, 0]
    inside = np.minimum(g + 1.0, C + 1.0 - g)
    # open interval: zero margin counts as a violation
    open_margin = np.where(inside > 0, inside, -np.inf)
    far = np.abs(x) >= 100
    limit = np.where(x > 0, C, 0.0)
    dev = np.abs(g[far] - limit[far])
    allowed = 2.0 / np.abs(x[far]) + C * np.exp(-np.abs(x[far]))
    return [
        _claim("gradient_range", open_margin, 0.0, interval=[-1.0, C + 1.0],
               gradient_at_0=float(psi_eval(np.zeros((1, 1)), C)[1][0, 0])),
        _claim("gradient_asymptotics", (allowed - dev) / allowed, BOUND_SLACK,
               max_deviation_at_1e3=float(dev[np.argmax(np.abs(x[far]))]) if far.any() else None),
    ]


def completeness_norms(X: np.ndarray, C: float = C_PSI) -> dict[str, np.ndarray]:
    """Norms of d log(1 + |x|^2) in the metric Hess psi.

    ``exact`` is sqrt(sum a_j^2 / psi_jj); ``sum_form`` is sum |a_j| psi_jj^{-1/2},
    the quantity the <= n bound is stated for; ``chain`` replaces psi_jj^{-1/2}
    by its upper bound sqrt(1 + x_j^2).
    """
    X = np.asarray(X, float)
    _, _, d = psi_eval(X, C)
    a = 2 * X / (1 + (X**2).sum(axis=-1, keepdims=True))
    return {
        "exact": np.sqrt((a**2 / d).sum(axis=-1)),
        "sum_form": (np.abs(a) / np.sqrt(d)).sum(axis=-1),
        "chain": (np.abs(a) * np.sqrt(1 + X**2)).sum(axis=-1),
        "dx_g": 1 / np.sqrt(d),
        "dx_g0": np.sqrt(1 + X**2),
    }


def completeness_samples(n: int, samples: int = 100_000, radius: float = SHELL_RADIUS, seed: int = 0) -> np.ndarray:
    """Random directions at log-uniform radii in [1e-3, radius], plus axis rays and the origin."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(1e-3), math.log(radius), samples))
    X = u * r[:, None]
    ray = np.geomspace(1e-3, radius, 400)
    axes = [np.zeros((1, n))]
    for j in range(n):
        for sign in (1.0, -1.0):
            P = np.zeros((ray.size, n))
            P[:, j] = sign * ray
            axes.append(P)
    return np.concatenate([X, *axes])


def verify_completeness_bound(
    n: int, samples: int = 100_000, radius: float = SHELL_RADIUS, seed: int = 0, C: float = C_PSI
) -> list[ClaimReport]:
    """Sum form <= n + 1e-9, with the intermediate steps |dx^j|_g <= |dx^j|_{g0} and 2|x| <= 1 + x^2."""
    X = completeness_samples(n, samples, radius, seed)
    N = completeness_norms(X, C)
    return [
        _claim("completeness_bound", n - N["sum_form"], 1e-9, n=n,
               max_sum_form=float(N["sum_form"].max()), max_exact_norm=float(N["exact"].max()),
               max_chain=float(N["chain"].max())),
        _claim("metric_vs_euclidean_coframe", N["dx_g0"] - N["dx_g"], BOUND_SLACK),
        _claim("two_x_le_one_plus_x2", 1 + X**2 - 2 * np.abs(X), 0.0),
    ]


def finite_difference_errors(n: int = 3, samples: int = 200, seed: int = 0, scale: float = 10.0,
                             C: float = C_PSI) -> dict[str, float]:
    """Max relative error of the closed-form gradient and Hessian vs central differences."""
    rng = np.random.default_rng(seed)
    X = scale * rng.standard_normal((samples, n))
    v, g, d = psi_eval(X, C)
    h_g, h_h = 1e-5, 1e-4
    ge = he = 0.0
    for j in range(n):
        E = np.zeros(n)
        E[j] = 1.0
        vp, gp, _ = psi_eval(X + h_g * E, C)
        vm, gm, _ = psi_eval(X - h_g * E, C)
        fd_g = (vp - vm) / (2 * h_g)
        ge = max(ge, float((np.abs(fd_g - g[:, j]) / np.maximum(np.abs(g[:, j]), 1.0)).max()))
        _, gp, _ = psi_eval(X + h_h * E, C)
        _, gm, _ = psi_eval(X - h_h * E, C)
        fd_h = (gp[:, j] - gm[:, j]) / (2 * h_h)
        he = max(he, float((np.abs(fd_h - d[:, j]) / np.maximum(np.abs(d[:, j]), 1.0)).max()))
    return {"gradient": ge, "hessian": he}


def certify(n: int = 2, samples: int = 100_000, seed: int = 0) -> dict:
    """All claims as JSON-ready records keyed by claim name."""
    claims = (
        verify_convexity_and_lower_bounds()
        + verify_gradient_range()
        + verify_completeness_bound(n, samples, seed=seed)
    )
    fd = finite_difference_errors(seed=seed)
    out = {c.claim: c.to_dict() for c in claims}
    out["finite_differences"] = {
        "checked_points": 200,
        "violations": int(fd["gradient"] >= 1e-6) + int(fd["hessian"] >= 1e-6),
        "max_rel_error_gradient": fd["gradient"],
        "max_rel_error_hessian": fd["hessian"],
    }
    out["constant"] = {"C": C_PSI, "formula": C_FORMULA}
    return out


# -- hat metric for deformation families ---------------------------------------------


@dataclass
class HatMetricReport:
    nodes: int
    min_domination_eigenvalue: float
    range_volume_bound: float
    completeness_max: float
    completeness_radius: float

    def to_dict(self) -> dict:
        return asdict(self)


def hat_potential(bodies: Sequence[ConvexBody], include_psi: bool = True) -> Potential:
    n = bodies[0].dim
    terms = [body_potential(B) for B in bodies]
    if include_psi:
        terms = [CompletePotential(n)] + terms
    return SumPotential(terms)


def hat_completeness(hat: Potential, X: np.ndarray) -> np.ndarray:
    """|d log(1 + |x|^2)| in the metric Hess(hat), exactly: sqrt(a^T H^{-1} a)."""
    X = np.asarray(X, float)
    H = hat.hessian(X)
    a = 2 * X / (1 + (X**2).sum(axis=-1, keepdims=True))
    with np.errstate(all="ignore"):
        try:
            sol = np.linalg.solve(H, a[..., None])[..., 0]
        except np.linalg.LinAlgError:
            return np.full(X.shape[:-1], np.inf)
    val = np.einsum("...i,...i->...", a, sol)
    return np.sqrt(np.where(val >= 0, val, np.inf))


def regularized_family(
    bodies: Sequence[ConvexBody],
    m: int,
    epsilon: float = 1e-3,
    check_nodes: int = 10_000,
    seed: int = 0,
    include_psi: bool = True,
):
    """Regularized family for bodies (A1, A2, A_{m+1}, ..., A_n).

    The hat potential is psi + phi_1 + phi_2 + sum phi_j. Raises when some
    Hess phi_j exceeds Hess(hat) at a sampled node. The report (attached as
    ``family.certificate``) records the domination margin, a volume bound for
    the gradient range of the hat potential, and the completeness quantity at
    radius 1e3.
    """
    from .brascamp_lieb import DeformationFamily

    bodies = list(bodies)
    n = bodies[0].dim
    if len(bodies) != 2 + n - m:
        raise ValueError(f"need A1, A2 and {n - m} T-factor bodies")
    pots = [body_potential(B) for B in bodies]
    hat = hat_potential(bodies, include_psi)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((check_nodes, n)) * rng.choice([1.0, 4.0, 16.0], size=(check_nodes, 1))
    Hhat = hat.hessian(X)
    min_eig = math.inf
    for p in pots:
        ev = np.linalg.eigvalsh(Hhat - p.hessian(X))
        min_eig = min(min_eig, float(ev[:, 0].min()))
        scale = np.abs(np.linalg.eigvalsh(Hhat)[:, -1]).max()
        if ev[:, 0].min() < -1e-12 * scale:
            raise ArithmeticError(f"Hess phi_j exceeds the hat metric (eigenvalue {ev[:, 0].min():.3g})")
    # gradient range of the hat potential sits inside box + sum of bodies
    box = [cube(n, C_PSI + 2).translated(-np.ones(n))] if include_psi else []
    vol = polytope_volume_exact(minkowski_sum(box + bodies))
    far = np.zeros((1, n))
    far[0, 0] = SHELL_RADIUS
    comp = float(hat_completeness(hat, far)[0])
    fam = DeformationFamily(pots[0], pots[1], pots[2:], m, epsilon, hat,
                            name="+".join(b.name or "body" for b in bodies))
    fam.certificate = HatMetricReport(check_nodes, min_eig, vol, comp, SHELL_RADIUS)
    return fam
