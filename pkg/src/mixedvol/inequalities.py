"""Alexandrov-Fenchel, Brunn-Minkowski and torus-form checks on polytope families."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .convex_core import ConvexBody, body_potential, minkowski_sum, polytope_volume_exact
from .convex_core.bodies import affine_rank
from .monge_ampere import QuadratureGrid, default_grid, mixed_volumes_quadrature, volume_polynomial

AF_TOL = 1e-8
HOMOTHETY_TOL = 1e-3


@dataclass
class AFRecord:
    """V12^2 >= V11 V22 for V_ij = V(A_i, A_j, rest)."""

    name: str
    method: str
    V12: float
    V11: float
    V22: float
    lhs: float
    rhs: float
    margin: float
    scale: float
    tol: float
    passed: bool

    @property
    def relative_gap(self) -> float:
        return self.margin / self.scale if self.scale > 0 else 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _af_record(name, method, V12, V11, V22, tol) -> AFRecord:
    lhs, rhs = V12 * V12, V11 * V22
    scale = max(abs(lhs), abs(rhs), 1e-300)
    margin = lhs - rhs
    return AFRecord(name, method, V12, V11, V22, lhs, rhs, margin, scale, tol, bool(margin >= -tol * scale))


def _af_tuples(n: int) -> list[tuple[int, ...]]:
    rest = tuple(range(2, n))
    return [(0, 1) + rest, (0, 0) + rest, (1, 1) + rest]


def af_check(
    A1: ConvexBody,
    A2: ConvexBody,
    rest: Sequence[ConvexBody] = (),
    method: str = "polyfit",
    grid: QuadratureGrid | None = None,
    tol: float = AF_TOL,
    name: str = "",
) -> AFRecord:
    """Alexandrov-Fenchel with the mixed volumes from exact polytope volumes or from quadrature."""
    bodies = [A1, A2, *rest]
    n = A1.dim
    if len(bodies) != n or any(b.dim != n for b in bodies):
        raise ValueError(f"need two bodies plus {n - 2} more, all in dimension {n}")
    name = name or "|".join(b.name or "?" for b in bodies)
    tuples = _af_tuples(n)
    if method == "polyfit":
        # distinct bodies only, so the polynomial has one variable per body
        poly = volume_polynomial(bodies)
        V12, V11, V22 = (poly.mixed_volume(t) for t in tuples)
    elif method == "quadrature":
        grid = grid or default_grid(n)
        pots = [body_potential(b) for b in bodies]
        V12, V11, V22 = (r.value for r in mixed_volumes_quadrature(pots, tuples, grid))
    else:
        raise ValueError("method must be 'polyfit' or 'quadrature'")
    return _af_record(name, method, V12, V11, V22, tol)


def kt_check(A1, A2, rest=(), grid=None, tol=AF_TOL, name="") -> AFRecord:
    """The torus form: the same inequality with every mixed volume from Monge-Ampere quadrature."""
    return af_check(A1, A2, rest, "quadrature", grid, tol, name)


@dataclass
class BMRecord:
    name: str
    vol_a: float
    vol_b: float
    vol_sum: float
    margin: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def bm_check(A: ConvexBody, B: ConvexBody, tol: float = 1e-12, name: str = "") -> BMRecord:
    """|A+B|^{1/n} - |A|^{1/n} - |B|^{1/n} >= 0 with exact volumes."""
    n = A.dim
    va, vb = polytope_volume_exact(A), polytope_volume_exact(B)
    vs = polytope_volume_exact(minkowski_sum([A, B]))
    margin = vs ** (1 / n) - va ** (1 / n) - vb ** (1 / n)
    scale = vs ** (1 / n)
    return BMRecord(name or f"{A.name}+{B.name}", va, vb, vs, margin, tol, bool(margin >= -tol * scale))


def random_polytope(n: int, rng: np.random.Generator, points: int | None = None, name: str = "") -> ConvexBody:
    """Hull of uniform points in [-1, 1]^n, redrawn until full-dimensional."""
    k = points or int(rng.integers(n + 1, 3 * n + 3))
    while True:
        P = rng.uniform(-1.0, 1.0, size=(k, n))
        if affine_rank(P) == n:
            return ConvexBody(P, name=name)


def random_af_family(n: int, rng: np.random.Generator, name: str = "") -> list[ConvexBody]:
    return [random_polytope(n, rng, name=f"{name}#{j}") for j in range(n)]


def homothetic_pair(A: ConvexBody, scale: float, shift: Sequence[float]) -> ConvexBody:
    return ConvexBody(scale * A.vertices + np.asarray(shift, float), name=f"{scale:g}*{A.name}")


def corpus_af_cases(bodies: dict[str, ConvexBody]) -> list[tuple[str, list[ConvexBody]]]:
    """Every unordered pair per dimension, completed in 3D by each remaining body."""
    cases = []
    by_dim: dict[int, list[ConvexBody]] = {}
    for b in bodies.values():
        by_dim.setdefault(b.dim, []).append(b)
    for n in sorted(by_dim):
        group = by_dim[n]
        for i, j in itertools.combinations(range(len(group)), 2):
            others = [k for k in range(len(group)) if k not in (i, j)]
            for rest in itertools.combinations(others, n - 2):
                bodies_ = [group[i], group[j], *(group[k] for k in rest)]
                cases.append(("|".join(b.name for b in bodies_), bodies_))
    return cases


def corpus_bm_cases(bodies: dict[str, ConvexBody]) -> list[tuple[str, ConvexBody, ConvexBody]]:
    out = []
    items = list(bodies.values())
    for a, b in itertools.combinations_with_replacement(items, 2):
        if a.dim == b.dim:
            out.append((f"{a.name}+{b.name}", a, b))
    return out


__all__ = [
    "AFRecord",
    "BMRecord",
    "af_check",
    "bm_check",
    "corpus_af_cases",
    "corpus_bm_cases",
    "homothetic_pair",
    "kt_check",
    "random_af_family",
    "random_polytope",
]
