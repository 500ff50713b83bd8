"""Log-concavity of t -> integral of omega_t^m/m! ^ T through the Brascamp-Lieb formula.

For potentials phi_1, phi_2 and T-factor potentials phi_{m+1}..phi_n on R^n,
the volume density at t is

    rho_t(x) = (n!/m!) D(H_t^{x m}, K_{m+1}, ..., K_n),  H_t = t H_1 + (1-t) H_2,

with K_j = Hess phi_j. Writing f(t) = -log Z(t), Z(t) = integral of rho_t,

    G   = -d_t rho / rho = -m D(H_th, H_t^{m-1}, K) / D(H_t^m, K),  H_th = H_1 - H_2
    f_t = E_mu G,   f_tt = E_mu G_t - Var_mu G,    d mu = rho_t dx / Z(t).

Grid evaluation stores the table b_k = D(H_1^{x k}, H_2^{x (m-k)}, K) per node;
rho, D(H_th, ...) and D(H_th, H_th, ...) are then Bernstein combinations of b,
so every t costs only arithmetic on the stored table. Single-node routines
(``density``, ``g_value``, ``g_t_value``) polarize directly and serve as the
independent route.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .convex_core.bodies import ConvexBody
from .convex_core.potentials import Potential, SumPotential, body_potential
from .monge_ampere import (
    NonPositiveHessianError,
    QuadratureGrid,
    _multiset_md,
    bernstein_table,
    check_psd,
    default_grid,
)

FD_STEP = 1e-3
MASS_DRIFT_TOL = 1e-3
PASS_TOL = 1e-6
NULL_DENSITY = 1e-14

CSV_COLUMNS = ("t", "f", "f_t_fd", "f_tt_quad", "f_tt_fd", "E_G", "int_Gt", "variance", "verdict")


class MassDriftWarning(UserWarning):
    """Too much density sits in the outer grid shell; enlarge the truncation radius."""


@dataclass
class DeformationFamily:
    """omega_t = t dd^c phi1 + (1-t) dd^c phi2 wedged against T = dd^c phi_{m+1} ^ ... ^ dd^c phi_n.

    With ``epsilon > 0`` every Hessian H is replaced by H + epsilon * Hess(hat),
    which makes all of them uniformly equivalent to Hess(hat).
    """

    phi1: Potential
    phi2: Potential
    factors: list[Potential] = field(default_factory=list)
    m: int = 2
    epsilon: float = 0.0
    hat: Potential | None = None
    name: str = ""

    def __post_init__(self):
        n = self.phi1.dim
        if self.phi2.dim != n or any(f.dim != n for f in self.factors):
            raise ValueError("all potentials must live in the same dimension")
        if not 2 <= self.m <= n:
            raise ValueError(f"need 2 <= m <= n, got m={self.m}, n={n}")
        if len(self.factors) != n - self.m:
            raise ValueError(f"need n - m = {n - self.m} T-factor potentials, got {len(self.factors)}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.epsilon > 0 and self.hat is None:
            raise ValueError("epsilon > 0 needs a hat potential")

    @property
    def dim(self) -> int:
        return self.phi1.dim

    @classmethod
    def from_bodies(
        cls,
        A1: ConvexBody,
        A2: ConvexBody,
        factor_bodies: Sequence[ConvexBody] = (),
        m: int | None = None,
        epsilon: float = 0.0,
        name: str = "",
    ) -> "DeformationFamily":
        """Family built from log-sum-exp potentials; the hat potential is psi + sum of all phi."""
        from .metric_check import CompletePotential

        n = A1.dim
        m = n - len(factor_bodies) if m is None else m
        p1, p2 = body_potential(A1), body_potential(A2)
        fs = [body_potential(B) for B in factor_bodies]
        hat = SumPotential([CompletePotential(n), p1, p2, *fs])
        return cls(p1, p2, fs, m, epsilon, hat, name or f"{A1.name}|{A2.name}")

    def hessians(self, X) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        """(H1, H2, [K_j]) at points X, regularized when epsilon > 0."""
        H1 = self.phi1.hessian(X)
        H2 = self.phi2.hessian(X)
        Ks = [f.hessian(X) for f in self.factors]
        if self.epsilon > 0:
            hat = self.epsilon * self.hat.hessian(X)
            H1, H2, Ks = H1 + hat, H2 + hat, [K + hat for K in Ks]
        for label, H in [("phi1", H1), ("phi2", H2)] + [(f"factor {j}", K) for j, K in enumerate(Ks)]:
            check_psd(H, f"Hessian of {label}")
        return H1, H2, Ks

    def equivalence_constant(self, X) -> float:
        """Smallest C with Hhat/C <= H <= C Hhat over the nodes X, for every regularized H."""
        if self.hat is None:
            raise ValueError("family has no hat potential")
        Hhat = self.hat.hessian(X)
        L = np.linalg.cholesky(Hhat)
        Linv = np.linalg.inv(L)
        H1, H2, Ks = self.hessians(X)
        C = 1.0
        for H in [H1, H2, *Ks]:
            ev = np.linalg.eigvalsh(Linv @ H @ np.swapaxes(Linv, -1, -2))
            C = max(C, float(ev[..., -1].max()), float((1.0 / ev[..., 0]).max()))
        return C

    def describe(self) -> dict:
        return {"name": self.name, "n": self.dim, "m": self.m, "epsilon": self.epsilon}


def _check_t(t: float) -> None:
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")


def _prefactor(fam: DeformationFamily) -> float:
    return math.factorial(fam.dim) / math.factorial(fam.m)


def _direct_parts(fam: DeformationFamily, t: float, X, theta_count: int):
    """D(H_th^{x j}, H_t^{x (m-j)}, K) for j = 0..theta_count by direct polarization."""
    H1, H2, Ks = fam.hessians(np.asarray(X, float))
    Ht = t * H1 + (1.0 - t) * H2
    Hth = H1 - H2
    out = []
    for j in range(theta_count + 1):
        groups = [(Hth, j), (Ht, fam.m - j)] + [(K, 1) for K in Ks]
        out.append(_multiset_md([g for g in groups if g[1] > 0]))
    return out


def density(fam: DeformationFamily, t: float, x) -> np.ndarray:
    """(n!/m!) D(H_t^{x m}, K...) at x; strictly positive."""
    _check_t(t)
    (d0,) = _direct_parts(fam, t, x, 0)
    if np.any(d0 <= 0):
        raise NonPositiveHessianError("density is not positive")
    return _prefactor(fam) * d0


def g_value(fam: DeformationFamily, t: float, x) -> np.ndarray:
    """G = -m D(H_th, H_t^{m-1}, K) / D(H_t^m, K)."""
    _check_t(t)
    d0, d1 = _direct_parts(fam, t, x, 1)
    return -fam.m * d1 / d0


def g_t_value(fam: DeformationFamily, t: float, x) -> np.ndarray:
    """dG/dt = -m(m-1) D(H_th, H_th, H_t^{m-2}, K)/D(H_t^m, K) + G^2."""
    _check_t(t)
    d0, d1, d2 = _direct_parts(fam, t, x, 2)
    G = -fam.m * d1 / d0
    return -fam.m * (fam.m - 1) * d2 / d0 + G**2


def trace_g(H: np.ndarray, Hth: np.ndarray) -> np.ndarray:
    """-tr(H^{-1} H_th): the m = n closed form of G."""
    return -np.trace(np.linalg.solve(H, Hth), axis1=-2, axis2=-1)


def trace_g_t(H: np.ndarray, Hth: np.ndarray) -> np.ndarray:
    """tr(H^{-1} H_th H^{-1} H_th): the m = n closed form of G_t."""
    A = np.linalg.solve(H, Hth)
    return np.einsum("...ij,...ji->...", A, A)


# -- grid evaluation via the Bernstein table ----------------------------------------


def bernstein_moments(table: np.ndarray, t: float, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(D0, D1, D2) = D(H_t^m,K), D(H_th,H_t^{m-1},K), D(H_th^2,H_t^{m-2},K) from b_0..b_m."""
    s = 1.0 - t

    def comb(coeffs, deg):
        return sum(math.comb(deg, k) * t**k * s ** (deg - k) * coeffs[..., k] for k in range(deg + 1))

    d1 = np.diff(table, axis=-1)
    d2 = np.diff(table, n=2, axis=-1)
    D0 = comb(table, m)
    D1 = comb(d1, m - 1)
    D2 = comb(d2, m - 2) if m >= 2 else np.zeros_like(D0)
    return D0, D1, D2


@dataclass
class _Block:
    table: np.ndarray
    weights: np.ndarray
    shell: np.ndarray
    direct: dict  # t -> direct D(H_t^m, K) sum over the block (weighted)
    direct_shell: dict


class BLQuadrature:
    """Per-node Bernstein tables of one family on one grid, reusable across t."""

    def __init__(self, fam: DeformationFamily, grid: QuadratureGrid, direct_ts: Sequence[float] = ()):
        if grid.dim != fam.dim:
            raise ValueError("grid and family dimensions differ")
        self.family = fam
        self.grid = grid
        self.m = fam.m
        self.pref = _prefactor(fam)
        ts = sorted(set(float(t) for t in direct_ts))

        def block(X, w, shell):
            H1, H2, Ks = fam.hessians(X)
            table = bernstein_table(H1, H2, Ks, fam.m)
            direct, direct_shell = {}, {}
            for t in ts:
                groups = [(t * H1 + (1 - t) * H2, fam.m)] + [(K, 1) for K in Ks]
                vals = _multiset_md(groups) * w
                direct[t] = float(vals.sum())
                direct_shell[t] = float(vals[shell].sum())
            return _Block(table, w, shell, direct, direct_shell)

        self.blocks: list[_Block] = grid.map_blocks(block)
        # linear integrals of the table fix Z(t) and E(G) for every t
        self.B = np.array(
            [math.fsum(float((b.table[:, k] * b.weights).sum()) for b in self.blocks) for k in range(self.m + 1)]
        )
        self.B_shell = np.array(
            [
                math.fsum(float((b.table[b.shell, k] * b.weights[b.shell]).sum()) for b in self.blocks)
                for k in range(self.m + 1)
            ]
        )

    def Z(self, t: float) -> float:
        """e^{-f(t)} from the table integrals (a polynomial of degree m in t)."""
        D0, _, _ = bernstein_moments(self.B, t, self.m)
        return float(self.pref * D0)

    def Z_direct(self, t: float) -> float:
        """e^{-f(t)} by direct polarization at every node (needs t among ``direct_ts``)."""
        return self.pref * math.fsum(b.direct[float(t)] for b in self.blocks)

    def shell_fraction(self, t: float) -> float:
        D0, _, _ = bernstein_moments(self.B, t, self.m)
        D0s, _, _ = bernstein_moments(self.B_shell, t, self.m)
        return float(abs(D0s) / D0)

    def moments(self, t: float) -> dict:
        """f, E_mu G, integral of G_t d mu and Var_mu G at t, all on the grid measure."""
        _check_t(t)
        m = self.m
        D0, D1, D2 = bernstein_moments(self.B, t, m)
        if D0 <= 0:
            raise NonPositiveHessianError("total mass is not positive")
        EG = float(-m * D1 / D0)
        per_block = [bernstein_moments(b.table, t, m) for b in self.blocks]
        peak = max(float(d0.max()) for d0, _, _ in per_block)
        floor = NULL_DENSITY * peak
        int_Gt_parts, var_parts, dropped = [], [], []
        for b, (d0, d1, d2) in zip(self.blocks, per_block):
            if np.any(d0 < -floor):
                raise NonPositiveHessianError("density is negative at some node")
            # below round-off the ratios D1/D0, D2/D0 are noise; such nodes carry no mass
            live = d0 > floor
            dropped.append(float((np.abs(d0[~live]) * b.weights[~live]).sum()))
            d0, d1, d2, w = d0[live], d1[live], d2[live], b.weights[live]
            G = -m * d1 / d0
            Gt = -m * (m - 1) * d2 / d0 + G**2
            wd = w * d0
            int_Gt_parts.append(float((Gt * wd).sum()))
            var_parts.append(float(((G - EG) ** 2 * wd).sum()))
        int_Gt = math.fsum(int_Gt_parts) / D0
        variance = math.fsum(var_parts) / D0
        return {
            "f": -math.log(self.pref * D0),
            "E_G": EG,
            "int_Gt": int_Gt,
            "variance": variance,
            "f_tt": int_Gt - variance,
            "shell_fraction": self.shell_fraction(t),
            "null_mass_fraction": math.fsum(dropped) / D0,
        }


@dataclass
class FttResult:
    f_tt: float
    E_G: float
    terms: dict


def _grid_for(fam: DeformationFamily, grid: QuadratureGrid | None) -> QuadratureGrid:
    return default_grid(fam.dim) if grid is None else grid


def _warn_drift(frac: float, t: float) -> str | None:
    if frac > MASS_DRIFT_TOL:
        msg = f"t={t:g}: {frac:.3g} of the mass lies in the outer grid shell (> {MASS_DRIFT_TOL:g})"
        warnings.warn(msg, MassDriftWarning, stacklevel=3)
        return msg
    return None


def f_tt_quadrature(fam: DeformationFamily, t: float, grid: QuadratureGrid | None = None) -> FttResult:
    """f_tt = integral of G_t d mu - integral of (G - E_mu G)^2 d mu on the grid."""
    q = BLQuadrature(fam, _grid_for(fam, grid))
    mom = q.moments(t)
    _warn_drift(mom["shell_fraction"], t)
    return FttResult(f_tt=mom["f_tt"], E_G=mom["E_G"], terms=mom)


def hormander_gap(fam: DeformationFamily, t: float, grid: QuadratureGrid | None = None) -> tuple[float, float]:
    """(Var_mu G, integral of G_t d mu); the first never exceeds the second."""
    mom = BLQuadrature(fam, _grid_for(fam, grid)).moments(t)
    return mom["variance"], mom["int_Gt"]


@dataclass
class ConvexityRow:
    t: float
    f: float
    f_t_fd: float
    f_tt_quad: float
    f_tt_fd: float
    E_G: float
    int_Gt: float
    variance: float
    verdict: str


@dataclass
class ConvexityReport:
    family: dict
    grid: dict
    fd_step: float
    rows: list[ConvexityRow]
    warnings: list[str]
    tolerance: float = PASS_TOL

    @property
    def passed(self) -> bool:
        return all(r.verdict == "PASS" for r in self.rows)

    @property
    def max_fd_rel_error(self) -> float:
        return max(
            (abs(r.f_tt_quad - r.f_tt_fd) / max(abs(r.f_tt_fd), 1e-300) for r in self.rows), default=0.0
        )

    @property
    def min_gap(self) -> float:
        """min over t of (integral of G_t d mu - variance)."""
        return min((r.int_Gt - r.variance for r in self.rows), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "family": self.family,
            "grid": self.grid,
            "fd_step": self.fd_step,
            "tolerance": self.tolerance,
            "verdict": "PASS" if self.passed else "FAIL",
            "min_f_tt": min((r.f_tt_quad for r in self.rows), default=None),
            "max_fd_rel_error": self.max_fd_rel_error,
            "min_hormander_gap": self.min_gap,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps({**self.summary(), "rows": [asdict(r) for r in self.rows]}, indent=2, sort_keys=True)


def _fmt(v) -> str:
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def convexity_report(
    fam: DeformationFamily,
    t_grid: Sequence[float] = tuple(np.round(np.linspace(0.1, 0.9, 9), 12)),
    grid: QuadratureGrid | None = None,
    fd_step: float = FD_STEP,
    tol: float = PASS_TOL,
) -> ConvexityReport:
    """f, f_t, f_tt per t; PASS at a node iff f_tt >= -tol (1 + |f_tt|).

    The finite-difference columns integrate the directly polarized density at
    t and t +- fd_step, independently of the Bernstein table.
    """
    grid = _grid_for(fam, grid)
    ts = [float(t) for t in t_grid]
    for t in ts:
        _check_t(t)
        if not fd_step < t < 1 - fd_step:
            raise ValueError(f"t={t} too close to the ends for step {fd_step}")
    direct_ts = sorted({round(t + s, 15) for t in ts for s in (-fd_step, 0.0, fd_step)})
    q = BLQuadrature(fam, grid, direct_ts)
    rows, notes = [], []
    for t in ts:
        mom = q.moments(t)
        fm, f0, fp = (-math.log(q.Z_direct(round(t + s, 15))) for s in (-fd_step, 0.0, fd_step))
        f_tt_fd = (fp - 2 * f0 + fm) / fd_step**2
        ok = mom["f_tt"] >= -tol * (1 + abs(mom["f_tt"]))
        rows.append(
            ConvexityRow(
                t=t,
                f=f0,
                f_t_fd=(fp - fm) / (2 * fd_step),
                f_tt_quad=mom["f_tt"],
                f_tt_fd=f_tt_fd,
                E_G=mom["E_G"],
                int_Gt=mom["int_Gt"],
                variance=mom["variance"],
                verdict="PASS" if ok else "FAIL",
            )
        )
        msg = _warn_drift(mom["shell_fraction"], t)
        if msg:
            notes.append(msg)
    return ConvexityReport(fam.describe(), grid.config(), fd_step, rows, notes, tol)
