"""Mixed discriminants, Monge-Ampere quadrature and mixed volumes.

Two independent routes to a mixed volume are provided:

* ``mixed_volume_quadrature`` integrates n! D(Hess phi_1, ..., Hess phi_n)
  over a truncated grid, phi_j being smooth potentials whose gradient images
  are the bodies.
* ``mixed_volume_polyfit`` fits the volume polynomial p(t) = |sum t_j A_j|
  from exact polytope volumes and reads off the t_1...t_n coefficient.

Mixed volumes use the derivative convention V = d^n p / dt_1...dt_n by
default, so V(A, ..., A) = n! |A|; pass ``convention="classical"`` for the
normalization with V(A, ..., A) = |A|.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np

from .convex_core.bodies import ConvexBody, minkowski_sum, polytope_volume_exact
from .convex_core.potentials import Potential
from .parallel import ordered_map

R = TypeVar("R")

DEFAULT_RADIUS = 40.0
DEFAULT_NODES = 161
DEFAULT_MC_SAMPLES = 200_000
DEFAULT_MC_SIGMA = 5.0
SHELL_FRACTION = 0.9
CHUNK = 1 << 16
PSD_JITTER = 1e-10

CONVENTIONS = ("polynomial", "classical")


class NonPositiveHessianError(ArithmeticError):
    """A Hessian used as a volume density is not positive (semi)definite."""


class RankDeficientGridError(ValueError):
    """The t-grid cannot determine every coefficient of the volume polynomial."""


# -- determinants and mixed discriminants --------------------------------------


def det_batch(M: np.ndarray) -> np.ndarray:
    """Determinant over the last two axes; closed forms up to 3x3."""
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, 0]
    if n == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if n == 3:
        a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 0, 2]
        d, e, f = M[..., 1, 0], M[..., 1, 1], M[..., 1, 2]
        g, h, i = M[..., 2, 0], M[..., 2, 1], M[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(M)


def _real_if_hermitian(x):
    if np.iscomplexobj(x):
        return np.real(x)
    return x


def mixed_discriminant(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Normalized mixed discriminant D(H_1, ..., H_n) with D(H, ..., H) = det H.

    Computed by polarization, D = (1/n!) sum_S (-1)^(n-|S|) det(sum_{j in S} H_j).
    Inputs may carry leading batch axes; the result has the batch shape.
    """
    mats = [np.asarray(m) for m in matrices]
    n = len(mats)
    if n == 0:
        raise ValueError("need at least one matrix")
    for m in mats:
        if m.shape[-2:] != (n, n):
            raise ValueError(f"{n} matrices must each be {n}x{n}, got {m.shape[-2:]}")
    return _real_if_hermitian(_multiset_md([(m, 1) for m in mats]))


def _multiset_md(groups: Sequence[tuple[np.ndarray, int]], cache: dict | None = None, keys=None):
    """Mixed discriminant with repeated arguments, D(M_1^{x k_1}, M_2^{x k_2}, ...).

    Polarization collapses to sum over counts a_g <= k_g with weights
    prod C(k_g, a_g). ``cache``/``keys`` let callers share determinant
    evaluations across several multiplicity patterns of the same matrices.
    """
    n = sum(k for _, k in groups)
    total = 0.0
    for counts in itertools.product(*[range(k + 1) for _, k in groups]):
        s = sum(counts)
        if s == 0:
            continue
        weight = math.prod(math.comb(k, a) for (_, k), a in zip(groups, counts))
        key = None if keys is None else tuple(
            (kk, a) for kk, a in zip(keys, counts) if a
        )
        if cache is not None and key in cache:
            d = cache[key]
        else:
            acc = sum(a * m for (m, _), a in zip(groups, counts) if a)
            d = det_batch(acc)
            if cache is not None:
                cache[key] = d
        total = total + ((-1) ** (n - s)) * weight * d
    return total / math.factorial(n)


def bernstein_table(H1: np.ndarray, H2: np.ndarray, others: Sequence[np.ndarray], m: int) -> np.ndarray:
    """b_k = D(H1^{x k}, H2^{x (m-k)}, others...) for k = 0..m, stacked on the last axis."""
    cache: dict = {}
    labels = ["H1", "H2"] + [f"K{j}" for j in range(len(others))]
    out = []
    for k in range(m + 1):
        groups = [(H1, k), (H2, m - k)] + [(K, 1) for K in others]
        out.append(_multiset_md(groups, cache=cache, keys=labels))
    return _real_if_hermitian(np.stack(out, axis=-1))


# -- quadrature grids ------------------------------------------------------------


def simpson_rule(radius: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError("composite Simpson needs an odd node count >= 3")
    x = np.linspace(-radius, radius, nodes)
    h = x[1] - x[0]
    w = np.full(nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w * h / 3.0


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor (composite Simpson) or Monte-Carlo node set over [-R, R]^n."""

    mode: str
    dim: int
    radius: float
    axis_nodes: tuple = ()
    axis_weights: tuple = ()
    points: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    seed: int | None = None
    sigma: float | None = None

    @property
    def size(self) -> int:
        if self.mode == "tensor":
            return math.prod(len(a) for a in self.axis_nodes)
        return len(self.points)

    def config(self) -> dict:
        cfg = {"mode": self.mode, "R": self.radius, "dim": self.dim}
        if self.mode == "tensor":
            cfg["nodes_per_axis"] = len(self.axis_nodes[0])
        else:
            cfg["samples"] = len(self.points)
            cfg["seed"] = self.seed
            cfg["sigma"] = self.sigma
        return cfg

    def block(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights with flat indices in [start, stop)."""
        if self.mode == "tensor":
            shape = tuple(len(a) for a in self.axis_nodes)
            idx = np.unravel_index(np.arange(start, min(stop, self.size)), shape)
            X = np.stack([a[i] for a, i in zip(self.axis_nodes, idx)], axis=-1)
            w = np.ones(len(idx[0]))
            for ws, i in zip(self.axis_weights, idx):
                w = w * ws[i]
            return X, w
        return self.points[start:stop], self.weights[start:stop]

    def block_ranges(self, chunk: int = CHUNK) -> list[tuple[int, int]]:
        return [(s, min(s + chunk, self.size)) for s in range(0, self.size, chunk)]

    def chunks(self, chunk: int = CHUNK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield (points, weights) blocks in a fixed order."""
        for start, stop in self.block_ranges(chunk):
            yield self.block(start, stop)

    def map_blocks(self, fn: Callable[[np.ndarray, np.ndarray, np.ndarray], R]) -> list[R]:
        """fn(points, weights, shell_mask) per block, in parallel, results in block order."""

        def run(rng):
            X, w = self.block(*rng)
            return fn(X, w, self.shell_mask(X))

        return ordered_map(run, self.block_ranges())

    def shell_mask(self, X: np.ndarray) -> np.ndarray:
        return np.abs(X).max(axis=-1) >= SHELL_FRACTION * self.radius


def tensor_grid(dim: int, radius: float = DEFAULT_RADIUS, nodes: int = DEFAULT_NODES) -> QuadratureGrid:
    x, w = simpson_rule(radius, nodes)
    return QuadratureGrid("tensor", dim, float(radius), (x,) * dim, (w,) * dim)


def monte_carlo_grid(
    dim: int,
    samples: int = DEFAULT_MC_SAMPLES,
    radius: float = DEFAULT_RADIUS,
    seed: int = 0,
    sigma: float = DEFAULT_MC_SIGMA,
) -> QuadratureGrid:
    """Gaussian importance sample restricted to the truncation box.

    Draws outside [-R, R]^n are discarded, so the weights estimate the same
    truncated integral as the tensor rule.
    """
    rng = np.random.default_rng(seed)
    X = sigma * rng.standard_normal((samples, dim))
    log_pdf = -0.5 * (X**2).sum(axis=1) / sigma**2 - dim * math.log(sigma * math.sqrt(2 * math.pi))
    w = np.exp(-log_pdf) / samples
    keep = np.abs(X).max(axis=1) <= radius
    return QuadratureGrid(
        "monte-carlo", dim, float(radius), points=X[keep], weights=w[keep], seed=seed, sigma=sigma
    )


def default_grid(dim: int, **overrides) -> QuadratureGrid:
    """Tensor grid up to n = 3, Monte-Carlo beyond."""
    if dim <= 3:
        return tensor_grid(dim, overrides.get("radius", DEFAULT_RADIUS), overrides.get("nodes", DEFAULT_NODES))
    return monte_carlo_grid(
        dim,
        overrides.get("samples", DEFAULT_MC_SAMPLES),
        overrides.get("radius", DEFAULT_RADIUS),
        overrides.get("seed", 0),
    )


def grid_from_config(cfg: dict) -> QuadratureGrid:
    mode = cfg.get("mode", "tensor")
    dim = int(cfg["dim"])
    R = float(cfg.get("R", cfg.get("radius", DEFAULT_RADIUS)))
    if mode == "tensor":
        return tensor_grid(dim, R, int(cfg.get("nodes_per_axis", cfg.get("nodes", DEFAULT_NODES))))
    if mode == "monte-carlo":
        return monte_carlo_grid(
            dim, int(cfg.get("samples", DEFAULT_MC_SAMPLES)), R, int(cfg.get("seed", 0)),
            float(cfg.get("sigma", DEFAULT_MC_SIGMA)),
        )
    raise ValueError(f"unknown grid mode {mode!r}")


def integrate(grid: QuadratureGrid, integrand: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """(integral, outer-shell part). Chunk partial sums are combined with fsum."""

    def block(X, w, shell):
        vals = integrand(X) * w
        return float(vals.sum()), float(vals[shell].sum())

    parts = grid.map_blocks(block)
    return math.fsum(p for p, _ in parts), math.fsum(s for _, s in parts)


def check_psd(H: np.ndarray, label: str = "Hessian") -> None:
    """Raise unless every matrix is positive semidefinite up to relative round-off."""
    n = H.shape[-1]
    tr = np.trace(H, axis1=-2, axis2=-1)
    if np.any(~np.isfinite(tr)):
        raise NonPositiveHessianError(f"{label}: non-finite entries")
    scale = np.maximum(np.abs(tr) / n, np.finfo(float).tiny)
    try:
        np.linalg.cholesky(H + (PSD_JITTER * scale)[..., None, None] * np.eye(n))
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(H)
        bad = np.unravel_index(np.argmin(eig[..., 0] / scale), eig.shape[:-1])
        raise NonPositiveHessianError(
            f"{label} is indefinite at node {bad}: eigenvalues {eig[bad]}"
        ) from None


# -- volumes ---------------------------------------------------------------------


@dataclass
class MixedVolumeResult:
    value: float
    method: str
    error_estimate: float
    convention: str = "polynomial"
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "error_estimate": self.error_estimate,
            "convention": self.convention,
            "note": self.note,
        }


def _convention_factor(convention: str, n: int) -> float:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    return 1.0 if convention == "polynomial" else 1.0 / math.factorial(n)


def ma_volume_detail(potential: Potential, grid: QuadratureGrid) -> tuple[float, float]:
    if potential.dim != grid.dim:
        raise ValueError("potential and grid dimensions differ")
    if potential.degenerate:
        raise NonPositiveHessianError("potential Hessian is singular everywhere (degenerate exponent set)")

    def integrand(X):
        H = potential.hessian(X)
        check_psd(H)
        return det_batch(H)

    return integrate(grid, integrand)


def ma_volume(potential: Potential, grid: QuadratureGrid) -> float:
    """Integral of det Hess phi over the grid: the volume of the gradient image."""
    return ma_volume_detail(potential, grid)[0]


def mixed_volumes_quadrature(
    potentials: Sequence[Potential],
    index_tuples: Sequence[Sequence[int]],
    grid: QuadratureGrid,
    convention: str = "polynomial",
) -> list[MixedVolumeResult]:
    """Several mixed volumes V(phi_{i_1}, ..., phi_{i_n}) sharing Hessian evaluations."""
    n = grid.dim
    if any(p.dim != n for p in potentials):
        raise ValueError("potential and grid dimensions differ")
    tuples = [tuple(t) for t in index_tuples]
    for t in tuples:
        if len(t) != n:
            raise ValueError(f"each mixed volume needs exactly {n} arguments")
    used = sorted({i for t in tuples for i in t})
    fact = math.factorial(n) * _convention_factor(convention, n)

    def block(X, w, shell):
        H = {}
        for i in used:
            H[i] = potentials[i].hessian(X)
            check_psd(H[i], f"Hessian of potential {i}")
        out = []
        for t in tuples:
            counts = {i: t.count(i) for i in dict.fromkeys(t)}
            vals = fact * _multiset_md([(H[i], k) for i, k in counts.items()]) * w
            out.append((float(vals.sum()), float(vals[shell].sum())))
        return out

    parts = grid.map_blocks(block)
    totals = [[p[j][0] for p in parts] for j in range(len(tuples))]
    shells = [[p[j][1] for p in parts] for j in range(len(tuples))]
    results = []
    for j in range(len(tuples)):
        results.append(
            MixedVolumeResult(
                value=math.fsum(totals[j]),
                method="quadrature",
                error_estimate=abs(math.fsum(shells[j])),
                convention=convention,
                note=f"grid {grid.config()}; error estimate = outer-shell integral (tail proxy)",
            )
        )
    return results


def mixed_volume_quadrature(
    potentials: Sequence[Potential], grid: QuadratureGrid, convention: str = "polynomial"
) -> MixedVolumeResult:
    """V = integral of n! D(Hess phi_1, ..., Hess phi_n) dx over the grid."""
    n = grid.dim
    if len(potentials) != n:
        raise ValueError(f"need {n} potentials in dimension {n}")
    return mixed_volumes_quadrature(potentials, [tuple(range(n))], grid, convention)[0]


# -- volume polynomial ------------------------------------------------------------


def monomials(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent tuples of total degree ``degree``, in lexicographic-descending order."""
    out = [
        c for c in itertools.product(range(degree, -1, -1), repeat=nvars) if sum(c) == degree
    ]
    return out


def default_t_grid(nvars: int, degree: int) -> list[tuple[float, ...]]:
    return [tuple(float(v) for v in t) for t in itertools.product(range(1, degree + 2), repeat=nvars)]


@dataclass
class VolumePolynomial:
    dim: int
    exponents: list[tuple[int, ...]]
    coefficients: np.ndarray
    residual: float

    def coefficient(self, alpha: Sequence[int]) -> float:
        return float(self.coefficients[self.exponents.index(tuple(alpha))])

    def __call__(self, t: Sequence[float]) -> float:
        t = np.asarray(t, float)
        return float(sum(c * np.prod(t ** np.array(e)) for e, c in zip(self.exponents, self.coefficients)))

    def mixed_volume(self, indices: Sequence[int], convention: str = "polynomial") -> float:
        """V(A_{i_1}, ..., A_{i_n}) = prod(alpha!) * coefficient of t^alpha."""
        if len(indices) != self.dim:
            raise ValueError(f"need {self.dim} body indices")
        nvars = len(self.exponents[0])
        alpha = [0] * nvars
        for i in indices:
            alpha[i] += 1
        val = math.prod(math.factorial(a) for a in alpha) * self.coefficient(alpha)
        return val * _convention_factor(convention, self.dim)

    def as_table(self) -> dict[str, float]:
        return {"*".join(f"t{j+1}^{e}" for j, e in enumerate(a) if e): float(c)
                for a, c in zip(self.exponents, self.coefficients)}


def volume_polynomial(
    bodies: Sequence[ConvexBody], t_grid: Sequence[Sequence[float]] | None = None
) -> VolumePolynomial:
    """Coefficients of p(t) = |t_1 A_1 + ... + t_N A_N| from exact volumes on a t-grid."""
    if not bodies:
        raise ValueError("need at least one body")
    n = bodies[0].dim
    N = len(bodies)
    exps = monomials(N, n)
    if t_grid is None:
        t_grid = default_t_grid(N, n)
    T = np.asarray(t_grid, dtype=float)
    if T.ndim != 2 or T.shape[1] != N or np.any(T <= 0):
        raise ValueError("t_grid must hold positive tuples, one entry per body")
    E = np.array(exps)
    A = np.prod(T[:, None, :] ** E[None, :, :], axis=-1)
    if np.linalg.matrix_rank(A) < len(exps):
        raise RankDeficientGridError(
            f"t-grid of {len(T)} points determines rank {np.linalg.matrix_rank(A)} < {len(exps)} monomials"
        )
    p = np.array([polytope_volume_exact(minkowski_sum(bodies, list(t))) for t in T])
    coef, *_ = np.linalg.lstsq(A, p, rcond=None)
    resid = float(np.abs(A @ coef - p).max() / max(np.abs(p).max(), 1e-300))
    scale = max(1.0, float(np.abs(coef).max()))
    if np.any(coef < -1e-9 * scale):
        raise ArithmeticError(f"negative volume-polynomial coefficient {coef.min():.3g}")
    return VolumePolynomial(dim=n, exponents=exps, coefficients=coef, residual=resid)


def mixed_volume_polyfit(
    bodies: Sequence[ConvexBody],
    t_grid: Sequence[Sequence[float]] | None = None,
    convention: str = "polynomial",
) -> MixedVolumeResult:
    """d^n p / dt_1...dt_n, i.e. the t_1...t_n coefficient of the volume polynomial."""
    n = bodies[0].dim
    if len(bodies) != n:
        raise ValueError(f"need {n} bodies in dimension {n}")
    poly = volume_polynomial(bodies, t_grid)
    value = poly.coefficient((1,) * n) * _convention_factor(convention, n)
    scale = max(abs(value), 1.0)
    return MixedVolumeResult(
        value=value,
        method="polyfit",
        error_estimate=poly.residual * scale,
        convention=convention,
        note="exact polytope volumes; error estimate = relative least-squares residual x scale",
    )
