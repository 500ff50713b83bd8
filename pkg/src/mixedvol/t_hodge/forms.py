"""Exterior algebra of C^n at a point, in the dz / dz-bar monomial basis.

A form is a dense complex vector of length 4^n indexed by a bitmask S over
2n slots: bit j (0 <= j < n) is dz^{j+1} and bit n + j is dzbar^{j+1}. The
basis element e_S is the wedge of its slots in increasing order, which is
exactly dz^I ^ dzbar^J with I, J strictly increasing.

A (1,1)-form with Hermitian table h is (i/2) sum_{j,k} h_{jk} dz^j ^ dzbar^k,
so h = I gives the Euclidean Kahler form and omega^n/n! = det(h) dx^1 ^ dy^1 ^ ...
"""

from __future__ import annotations

import json
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

MAX_N = 5


def _popcount(x: int) -> int:
    return bin(x).count("1")


def dimension(n: int) -> int:
    return 1 << (2 * n)


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise ValueError(f"n must be in 1..{MAX_N}, got {n}")


@lru_cache(maxsize=None)
def degree_masks(n: int, k: int) -> np.ndarray:
    """Masks of degree k, ordered lexicographically on (I, J)."""
    _check_n(n)
    masks = [s for s in range(dimension(n)) if _popcount(s) == k]
    masks.sort(key=lambda s: multi_index(n, s))
    out = np.array(masks, dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def bidegree_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(p, q) for every mask."""
    low = (1 << n) - 1
    s = np.arange(dimension(n))
    p = np.array([_popcount(x & low) for x in s])
    q = np.array([_popcount(x >> n) for x in s])
    return p, q


def multi_index(n: int, mask: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(I, J), 1-based, of the monomial dz^I ^ dzbar^J."""
    I = tuple(j + 1 for j in range(n) if mask >> j & 1)
    J = tuple(j + 1 for j in range(n) if mask >> (n + j) & 1)
    return I, J


def mask_of(n: int, I: Iterable[int], J: Iterable[int]) -> int:
    I, J = list(I), list(J)
    for idx in (I, J):
        if any(not 1 <= i <= n for i in idx):
            raise ValueError(f"indices must lie in 1..{n}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError("multi-indices must be strictly increasing")
    m = 0
    for i in I:
        m |= 1 << (i - 1)
    for j in J:
        m |= 1 << (n + j - 1)
    return m


def _inversions(S: int, T: int) -> int:
    """#{(s in S, t in T): s > t}."""
    count = 0
    t_bits = T
    while t_bits:
        t = t_bits & -t_bits
        count += _popcount(S & ~((t << 1) - 1))
        t_bits ^= t
    return count


@lru_cache(maxsize=None)
def wedge_table(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """All disjoint pairs (S, T) with union U and sign of e_S ^ e_T = sign e_U."""
    _check_n(n)
    full = dimension(n) - 1
    S_l, T_l, U_l, sg = [], [], [], []
    for S in range(dimension(n)):
        rest = full & ~S
        T = rest
        while True:
            S_l.append(S)
            T_l.append(T)
            U_l.append(S | T)
            sg.append(-1.0 if _inversions(S, T) % 2 else 1.0)
            if T == 0:
                break
            T = (T - 1) & rest
    arrs = tuple(np.array(a) for a in (S_l, T_l, U_l))
    sign = np.array(sg)
    for a in (*arrs, sign):
        a.setflags(write=False)
    return arrs[0], arrs[1], arrs[2], sign


def wedge_vectors(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """a ^ b for coefficient vectors; leading batch axes broadcast."""
    S, T, U, sign = wedge_table(n)
    a, b = np.asarray(a), np.asarray(b)
    batch = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    prod = (np.broadcast_to(a, batch + a.shape[-1:])[..., S] * np.broadcast_to(b, batch + b.shape[-1:])[..., T]) * sign
    flat = prod.reshape(-1, len(S))
    out = np.zeros((flat.shape[0], dimension(n)), dtype=np.result_type(a, b, float))
    np.add.at(out.T, U, flat.T)
    return out.reshape(batch + (dimension(n),))


def left_mult_matrix(form: np.ndarray, n: int) -> np.ndarray:
    """Dense matrix of b -> form ^ b on the full 4^n space."""
    S, T, U, sign = wedge_table(n)
    form = np.asarray(form)
    M = np.zeros((dimension(n), dimension(n)), dtype=np.result_type(form, float))
    np.add.at(M, (U, T), sign * form[S])
    return M


@lru_cache(maxsize=None)
def _conj_perm(n: int) -> tuple[np.ndarray, np.ndarray]:
    low = (1 << n) - 1
    s = np.arange(dimension(n))
    swapped = ((s & low) << n) | (s >> n)
    p, q = bidegree_table(n)
    return swapped, np.where((p * q) % 2, -1.0, 1.0)


def conj_vector(a: np.ndarray, n: int) -> np.ndarray:
    """Complex conjugate form: conj(dz^I ^ dzbar^J) = (-1)^{|I||J|} dz^J ^ dzbar^I."""
    swapped, sign = _conj_perm(n)
    a = np.asarray(a)
    out = np.zeros(a.shape, dtype=complex)
    out[..., swapped] = np.conj(a) * sign
    return out


def vol_factor(n: int) -> complex:
    """Coefficient of dz^1..dz^n ^ dzbar^1..dzbar^n in dx^1 ^ dy^1 ^ ... ^ dx^n ^ dy^n."""
    return (0.5j) ** n * (-1) ** (n * (n - 1) // 2)


def top_coefficient(a: np.ndarray, n: int) -> np.ndarray:
    """Coefficient of a top-degree form relative to dx^1 ^ dy^1 ^ ... ^ dx^n ^ dy^n."""
    return np.asarray(a)[..., dimension(n) - 1] / vol_factor(n)


def one_one_vector(h: np.ndarray) -> np.ndarray:
    """(i/2) sum h_jk dz^j ^ dzbar^k as a coefficient vector."""
    h = np.asarray(h)
    n = h.shape[-1]
    v = np.zeros(h.shape[:-2] + (dimension(n),), dtype=complex)
    for j in range(n):
        for k in range(n):
            v[..., (1 << j) | (1 << (n + k))] = 0.5j * h[..., j, k]
    return v


@lru_cache(maxsize=None)
def weil_diagonal(n: int) -> np.ndarray:
    """i^{p-q} per mask."""
    p, q = bidegree_table(n)
    out = (1j) ** ((p - q) % 4)
    out.setflags(write=False)
    return out


# -- user-facing wrappers --------------------------------------------------------


class AlternatingForm:
    """Complex form at a point of C^n, stored on the canonical monomial basis."""

    __array_priority__ = 20

    def __init__(self, n: int, coeffs=None):
        _check_n(n)
        self.n = n
        if coeffs is None:
            self.coeffs = np.zeros(dimension(n), dtype=complex)
        else:
            c = np.asarray(coeffs, dtype=complex)
            if c.shape != (dimension(n),):
                raise ValueError(f"expected {dimension(n)} coefficients")
            self.coeffs = c.copy()

    @classmethod
    def monomial(cls, n: int, I: Sequence[int] = (), J: Sequence[int] = (), coeff: complex = 1.0):
        """coeff dz^I ^ dzbar^J; unsorted indices are sorted with the matching sign."""
        I, J = list(I), list(J)
        sign = 1
        for idx in (I, J):
            if len(set(idx)) != len(idx):
                return cls(n)
            sign *= _perm_sign(idx)
        f = cls(n)
        f.coeffs[mask_of(n, sorted(I), sorted(J))] = sign * coeff
        return f

    @classmethod
    def scalar(cls, n: int, value: complex = 1.0):
        return cls.monomial(n, (), (), value)

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator, bidegree: tuple[int, int] | None = None):
        f = cls(n)
        idx = degree_masks(n, k)
        if bidegree is not None:
            p, q = bidegree_table(n)
            idx = idx[(p[idx] == bidegree[0]) & (q[idx] == bidegree[1])]
        f.coeffs[idx] = rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
        return f

    # algebra
    def wedge(self, other: "AlternatingForm") -> "AlternatingForm":
        self._same_n(other)
        return AlternatingForm(self.n, wedge_vectors(self.coeffs, other.coeffs, self.n))

    def __xor__(self, other):
        return self.wedge(other)

    def __add__(self, other):
        self._same_n(other)
        return AlternatingForm(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._same_n(other)
        return AlternatingForm(self.n, self.coeffs - other.coeffs)

    def __neg__(self):
        return AlternatingForm(self.n, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, AlternatingForm):
            return NotImplemented
        return AlternatingForm(self.n, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return AlternatingForm(self.n, self.coeffs / scalar)

    def conj(self) -> "AlternatingForm":
        return AlternatingForm(self.n, conj_vector(self.coeffs, self.n))

    def _same_n(self, other):
        if not isinstance(other, AlternatingForm) or other.n != self.n:
            raise ValueError("forms live over different dimensions")

    # inspection
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def support(self, tol: float = 0.0) -> list[int]:
        return [int(s) for s in np.flatnonzero(np.abs(self.coeffs) > tol)]

    def degrees(self, tol: float = 0.0) -> list[int]:
        return sorted({_popcount(s) for s in self.support(tol)})

    def bidegrees(self, tol: float = 0.0) -> list[tuple[int, int]]:
        p, q = bidegree_table(self.n)
        return sorted({(int(p[s]), int(q[s])) for s in self.support(tol)})

    def degree(self, tol: float = 0.0) -> int:
        """The single degree of a homogeneous form (0 for the zero form)."""
        d = self.degrees(tol)
        if len(d) > 1:
            raise ValueError(f"form is not homogeneous: degrees {d}")
        return d[0] if d else 0

    def part(self, k: int) -> np.ndarray:
        """Coefficients on the degree-k basis, in :func:`degree_masks` order."""
        return self.coeffs[degree_masks(self.n, k)]

    @classmethod
    def from_part(cls, n: int, k: int, values) -> "AlternatingForm":
        f = cls(n)
        f.coeffs[degree_masks(n, k)] = values
        return f

    def top(self) -> complex:
        return complex(top_coefficient(self.coeffs, self.n))

    def allclose(self, other: "AlternatingForm", atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= atol)

    def __repr__(self) -> str:
        terms = []
        for s in self.support(1e-15):
            I, J = multi_index(self.n, s)
            terms.append(f"({self.coeffs[s]:.6g}) dz{list(I)} dzbar{list(J)}")
        return f"AlternatingForm(n={self.n}: " + (" + ".join(terms) or "0") + ")"

    # I/O
    def to_dict(self, tol: float = 0.0) -> dict:
        coeffs = {}
        for s in sorted(self.support(tol), key=lambda s: multi_index(self.n, s)):
            I, J = multi_index(self.n, s)
            key = ",".join(map(str, I)) + "|" + ",".join(map(str, J))
            coeffs[key] = [float(self.coeffs[s].real), float(self.coeffs[s].imag)]
        return {"n": self.n, "degree_pairs": [list(b) for b in self.bidegrees(tol)], "coefficients": coeffs}

    @classmethod
    def from_dict(cls, data: dict) -> "AlternatingForm":
        try:
            n = int(data["n"])
            f = cls(n)
            for key, val in data["coefficients"].items():
                left, right = key.split("|")
                I = [int(x) for x in left.split(",") if x]
                J = [int(x) for x in right.split(",") if x]
                re, im = val
                f.coeffs[mask_of(n, I, J)] += complex(re, im)
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"malformed form record: {exc}") from None
        return f

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _perm_sign(seq: Sequence[int]) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class OneOneForm:
    """Hermitian table h of the real (1,1)-form (i/2) sum h_jk dz^j ^ dzbar^k."""

    def __init__(self, h):
        h = np.atleast_2d(np.asarray(h, dtype=complex))
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("Hermitian table must be square")
        self.h = 0.5 * (h + h.conj().T)
        self.n = h.shape[0]

    @property
    def positive(self) -> bool:
        try:
            np.linalg.cholesky(self.h)
        except np.linalg.LinAlgError:
            return False
        return True

    def vector(self) -> np.ndarray:
        return one_one_vector(self.h)

    def form(self) -> AlternatingForm:
        return AlternatingForm(self.n, self.vector())

    @classmethod
    def identity(cls, n: int) -> "OneOneForm":
        return cls(np.eye(n))

    @classmethod
    def random_positive(cls, n: int, rng: np.random.Generator, spread: float = 1.0) -> "OneOneForm":
        """U diag(lam) U^*, Haar U, log lam uniform in [-spread, spread]."""
        U = haar_unitary(n, rng)
        lam = np.exp(rng.uniform(-spread, spread, n))
        return cls(U @ np.diag(lam) @ U.conj().T)

    def to_list(self) -> list:
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.h]

    @classmethod
    def from_list(cls, rows) -> "OneOneForm":
        arr = np.array(rows, dtype=float)
        if arr.ndim == 3:
            return cls(arr[..., 0] + 1j * arr[..., 1])
        return cls(arr)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary."""
    if n == 1:
        return np.exp(2j * np.pi * rng.uniform(size=(1, 1)))
    return unitary_group.rvs(n, random_state=rng)
