"""Convex polytopes stored as canonical vertex lists.

A :class:`ConvexBody` keeps only the extreme points of the hull of whatever
points it was built from, so two bodies built from different point clouds with
the same hull compare equal vertex-for-vertex (vertices are sorted
lexicographically after canonicalization).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

HULL_TOL = 1e-12
MAX_DIM = 4


class DegenerateBodyError(ValueError):
    """Point set does not span a full-dimensional hull."""


class DimensionMismatchError(ValueError):
    pass


class BodyFormatError(ValueError):
    """Malformed body file or record."""


def affine_rank(points: np.ndarray, tol: float = HULL_TOL) -> int:
    P = np.asarray(points, dtype=float)
    if P.shape[0] <= 1:
        return 0
    s = np.linalg.svd(P[1:] - P[0], compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0] * max(P.shape)))


def _sort_rows(P: np.ndarray) -> np.ndarray:
    order = np.lexsort(P.T[::-1])
    return P[order]


def _extreme_points(P: np.ndarray) -> np.ndarray:
    n = P.shape[1]
    if n == 1:
        return np.array([[P[:, 0].min()], [P[:, 0].max()]])
    try:
        hull = ConvexHull(P)
    except QhullError as exc:  # pragma: no cover - guarded by affine_rank
        raise DegenerateBodyError(str(exc)) from exc
    return P[np.sort(hull.vertices)]


def _extreme_points_in_span(P: np.ndarray, rank: int) -> np.ndarray:
    """Extreme points of a lower-dimensional point set (hull taken in its span)."""
    if rank == 0:
        return P[:1].copy()
    origin = P[0]
    _, _, vt = np.linalg.svd(P - origin)
    basis = vt[:rank]
    local = (P - origin) @ basis.T
    keep = _extreme_points(local)
    # map back through the original points to avoid round-off in the embedding
    idx = [int(np.argmin(np.linalg.norm(local - row, axis=1))) for row in keep]
    return P[sorted(set(idx))]


class ConvexBody:
    """Compact convex polytope given by its vertices.

    Lower-dimensional point sets are rejected unless ``allow_degenerate`` is
    set; degenerate bodies (segments, flat polygons) are only meaningful as
    Minkowski summands.
    """

    def __init__(
        self,
        vertices: Iterable[Sequence[float]],
        name: str = "",
        allow_degenerate: bool = False,
    ):
        P = np.asarray(vertices, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        if P.ndim != 2 or P.shape[0] == 0:
            raise BodyFormatError("vertices must be a non-empty list of points")
        if not np.all(np.isfinite(P)):
            raise BodyFormatError("vertex coordinates must be finite")
        n = P.shape[1]
        if n > MAX_DIM:
            raise ValueError(f"dimension {n} exceeds supported maximum {MAX_DIM}")
        rank = affine_rank(P)
        if rank < n:
            if not allow_degenerate:
                raise DegenerateBodyError(
                    f"{name or 'body'}: affine dimension {rank} < ambient dimension {n}"
                )
            V = _extreme_points_in_span(P, rank)
        else:
            V = _extreme_points(P)
        self._vertices = _sort_rows(V)
        self._vertices.setflags(write=False)
        self.name = name
        self.rank = rank
        self._equations: np.ndarray | None = None

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def dim(self) -> int:
        return self._vertices.shape[1]

    @property
    def degenerate(self) -> bool:
        return self.rank < self.dim

    def __len__(self) -> int:
        return len(self._vertices)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"ConvexBody{label}(dim={self.dim}, vertices={len(self)})"

    def scaled(self, factor: float) -> "ConvexBody":
        return ConvexBody(factor * self._vertices, name=self.name, allow_degenerate=self.degenerate)

    def translated(self, shift: Sequence[float]) -> "ConvexBody":
        return ConvexBody(
            self._vertices + np.asarray(shift, float), name=self.name, allow_degenerate=self.degenerate
        )

    @property
    def equations(self) -> np.ndarray:
        """Facet halfspaces ``a.y + b <= 0`` with unit normals, shape (F, n+1)."""
        if self.degenerate:
            raise DegenerateBodyError("halfspace description needs a full-dimensional body")
        if self._equations is None:
            if self.dim == 1:
                lo, hi = self._vertices[0, 0], self._vertices[-1, 0]
                eq = np.array([[-1.0, lo], [1.0, -hi]])
            else:
                eq = ConvexHull(self._vertices).equations
            self._equations = eq
        return self._equations

    def facet_violation(self, points: np.ndarray) -> np.ndarray:
        """Largest signed facet distance per point; <= 0 means inside."""
        Y = np.atleast_2d(np.asarray(points, float))
        eq = self.equations
        return (Y @ eq[:, :-1].T + eq[:, -1]).max(axis=1)

    def contains(self, points: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        return self.facet_violation(points) <= slack

    def to_dict(self) -> dict:
        return {"dim": self.dim, "vertices": self._vertices.tolist(), "name": self.name}


def polytope_volume_exact(body: ConvexBody) -> float:
    """Volume by a fan of simplices from the vertex centroid to the hull facets."""
    if body.degenerate:
        raise DegenerateBodyError("volume of a degenerate hull is not defined here")
    V = body.vertices
    n = body.dim
    if n == 1:
        return float(V[-1, 0] - V[0, 0])
    hull = ConvexHull(V)
    apex = V.mean(axis=0)
    edges = V[hull.simplices] - apex
    return float(np.abs(np.linalg.det(edges)).sum() / math.factorial(n))


def minkowski_sum(bodies: Sequence[ConvexBody], coeffs: Sequence[float] | None = None) -> ConvexBody:
    """Hull of all sums of scaled vertices, reduced after each summand."""
    if not bodies:
        raise ValueError("need at least one body")
    if coeffs is None:
        coeffs = [1.0] * len(bodies)
    if len(coeffs) != len(bodies):
        raise ValueError("one coefficient per body")
    if any(c <= 0 for c in coeffs):
        raise ValueError("Minkowski coefficients must be positive")
    n = bodies[0].dim
    if any(b.dim != n for b in bodies):
        raise DimensionMismatchError(f"bodies of dimensions {[b.dim for b in bodies]}")
    pts = coeffs[0] * bodies[0].vertices
    for body, c in zip(bodies[1:], coeffs[1:]):
        pts = (pts[:, None, :] + c * body.vertices[None, :, :]).reshape(-1, n)
        pts = ConvexBody(pts, allow_degenerate=True).vertices
    any_degenerate = any(b.degenerate for b in bodies)
    return ConvexBody(pts, allow_degenerate=any_degenerate)


# -- named bodies -------------------------------------------------------------


def cube(n: int, side: float = 1.0) -> ConvexBody:
    corners = np.array(np.meshgrid(*([[0.0, side]] * n), indexing="ij")).reshape(n, -1).T
    return ConvexBody(corners, name=f"cube{n}")


def simplex(n: int) -> ConvexBody:
    return ConvexBody(np.vstack([np.zeros(n), np.eye(n)]), name=f"simplex{n}")


def cross_polytope(n: int) -> ConvexBody:
    return ConvexBody(np.vstack([np.eye(n), -np.eye(n)]), name=f"cross{n}")


def segment(direction: Sequence[float], origin: Sequence[float] | None = None) -> ConvexBody:
    v = np.asarray(direction, float)
    o = np.zeros_like(v) if origin is None else np.asarray(origin, float)
    return ConvexBody([o, o + v], name="segment", allow_degenerate=True)


NAMED_BODIES = {
    "cube": cube,
    "simplex": simplex,
    "cross-polytope": cross_polytope,
    "segment": segment,
}


# -- JSON I/O -----------------------------------------------------------------


def body_from_dict(record: dict, allow_degenerate: bool = False) -> ConvexBody:
    if not isinstance(record, dict):
        raise BodyFormatError("body record must be a JSON object")
    missing = {"dim", "vertices"} - record.keys()
    if missing:
        raise BodyFormatError(f"body record missing keys {sorted(missing)}")
    dim = record["dim"]
    verts = record["vertices"]
    if not isinstance(dim, int) or dim < 1:
        raise BodyFormatError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(verts, list) or not all(isinstance(v, list) and len(v) == dim for v in verts):
        raise BodyFormatError(f"vertices must be a list of length-{dim} coordinate lists")
    return ConvexBody(verts, name=str(record.get("name", "")), allow_degenerate=allow_degenerate)


def load_body(path: str | Path, allow_degenerate: bool = False) -> ConvexBody:
    text = Path(path).read_text()
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BodyFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return body_from_dict(record, allow_degenerate=allow_degenerate)


def dump_body(body: ConvexBody, path: str | Path) -> None:
    Path(path).write_text(json.dumps(body.to_dict(), indent=2) + "\n")


def shipped_bodies(dim: int | None = None) -> dict[str, ConvexBody]:
    """Bodies bundled with the package, keyed by name."""
    folder = Path(__file__).resolve().parent.parent / "data" / "bodies"
    out = {}
    for path in sorted(folder.glob("*.json")):
        body = load_body(path)
        if dim is None or body.dim == dim:
            out[body.name or path.stem] = body
    return out
