"""Per-frequency Poisson symbol-kernels of the half-space model problem.

For fixed ``(xi', lambda)`` the problem ``(1+lambda) w + A(xi', D_1) w = 0``,
``B_j(xi', D_1) w(0) = h_j`` is reduced to ``D_1 V = rho A0(b, sigma) V`` in
the scaled state ``V_k = rho^{-k} D_1^k w`` (k < 2m).  Decaying solutions
live in the invariant subspace of eigenvalues with positive imaginary part.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import simpson

from .core_model import (
    BVSystem,
    FrequencyPoint,
    RescaledVars,
    boundary_normal_polynomial,
    model_bessel,
    normal_polynomial,
    rescale_vars,
)
from .errors import LeadingCoeffSingular, LopatinskiiSingular, SpectralGapTooSmall, WrongStableCount
from .parallel import parallel_map

GAP_TOL = 1e-8
SIGMA_TOL = 1e-10


@dataclass
class FirstOrderReduction:
    A0: np.ndarray
    rv: RescaledVars
    state_dim: int
    order: int


@dataclass
class StableDecomposition:
    eigvals: np.ndarray
    Q: np.ndarray          # orthonormal basis of the stable subspace
    T11: np.ndarray        # Q^H A0 Q (upper triangular)
    gap: float             # min |Im| over the whole spectrum
    stable_gap: float      # min Im over the stable part
    Z: np.ndarray          # full ordered Schur basis
    T: np.ndarray          # full ordered Schur form


def reduce_first_order(sys: BVSystem, rv: RescaledVars) -> FirstOrderReduction:
    """Block companion matrix ``A0(b, sigma)`` of size 2mN."""
    N, two_m = sys.state_dim, sys.order
    A = normal_polynomial(sys, rv.b)
    lead = A[two_m]
    if np.linalg.cond(lead) > 1e12:
        raise LeadingCoeffSingular("coefficient of D_1^{2m} is not invertible")
    lead_inv = np.linalg.inv(lead)
    A0 = np.zeros((two_m * N, two_m * N), dtype=complex)
    for k in range(two_m - 1):
        A0[k * N:(k + 1) * N, (k + 1) * N:(k + 2) * N] = np.eye(N)
    for k in range(two_m):
        ak = A[k] + (rv.sigma * np.eye(N) if k == 0 else 0)
        A0[(two_m - 1) * N:, k * N:(k + 1) * N] = -lead_inv @ ak
    return FirstOrderReduction(A0, rv, N, two_m)


def stable_projection(red: FirstOrderReduction, gap_tol: float = GAP_TOL) -> StableDecomposition:
    """Ordered complex Schur form with the ``Im > 0`` eigenvalues leading.

    The Schur basis is used throughout (rather than eigenvectors) so that
    near-coalescing roots do not degrade the stable basis.
    """
    A0 = red.A0
    expected = red.order // 2 * red.state_dim
    eig = np.linalg.eigvals(A0)
    gap = float(np.abs(eig.imag).min())
    if gap < gap_tol:
        raise SpectralGapTooSmall(f"spectral gap {gap:.3g} below {gap_tol:.3g}")
    T, Z, sdim = sla.schur(A0, output="complex", sort=lambda z: z.imag > 0)
    if sdim != expected or np.count_nonzero(eig.imag > 0) != expected:
        raise WrongStableCount(f"{sdim} stable eigenvalues, expected {expected}")
    stable_eigs = np.diag(T)[:sdim]
    return StableDecomposition(eig, Z[:, :sdim], T[:sdim, :sdim], gap,
                               float(stable_eigs.imag.min()), Z, T)


def spectral_projector(st: StableDecomposition) -> np.ndarray:
    """The (oblique) spectral projection onto the stable subspace along the unstable one."""
    k = st.Q.shape[1]
    T11, T12, T22 = st.T[:k, :k], st.T[:k, k:], st.T[k:, k:]
    Y = sla.solve_sylvester(T11, -T22, T12)
    d = st.T.shape[0]
    Pt = np.zeros((d, d), dtype=complex)
    Pt[:k, :k] = np.eye(k)
    Pt[:k, k:] = Y
    return st.Z @ Pt @ st.Z.conj().T


def boundary_rows(sys: BVSystem, b: np.ndarray) -> np.ndarray:
    """Rows expressing ``rho^{-m_j} B_{j,#}(xi', D_1) w(0)`` in the scaled state ``V(0)``."""
    N, two_m = sys.state_dim, sys.order
    rows = np.zeros((sys.m * N, two_m * N), dtype=complex)
    for j in range(sys.m):
        for k, c in enumerate(boundary_normal_polynomial(sys, j, b)):
            rows[j * N:(j + 1) * N, k * N:(k + 1) * N] = c
    return rows


@dataclass
class BoundarySolve:
    C: np.ndarray              # coefficients in the stable basis, one column per datum
    M: np.ndarray              # Q C, the maps M acting on stacked data (unscaled)
    sigma_min: float


def stable_boundary_solve(sys: BVSystem, rv: RescaledVars, st: StableDecomposition,
                          sigma_tol: float = SIGMA_TOL) -> BoundarySolve:
    """Solve ``(Rows Q) c = h`` for unit data; ``M = Q c`` so that ``Ran M`` is stable."""
    S = boundary_rows(sys, rv.b) @ st.Q
    smin = float(np.linalg.svd(S, compute_uv=False).min())
    if smin <= sigma_tol:
        raise LopatinskiiSingular(f"boundary system singular (sigma_min = {smin:.3g})")
    C = np.linalg.solve(S, np.eye(S.shape[0]))
    return BoundarySolve(C, st.Q @ C, smin)


@dataclass
class KernelEntry:
    """Everything needed to evaluate ``k_j(x_1, xi', lambda)`` at one frequency."""

    fp: FrequencyPoint
    rv: RescaledVars
    reduction: FirstOrderReduction
    stable: StableDecomposition
    solve: BoundarySolve
    boundary_orders: list[int]
    _diag: tuple | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.reduction.state_dim

    def _diagonalised(self):
        if self._diag is None:
            lam, W = np.linalg.eig(self.stable.T11)
            if np.linalg.cond(W) < 1e8:
                Winv = np.linalg.inv(W)
                self._diag = (lam, (self.stable.Q @ W), Winv)
            else:
                self._diag = ()
        return self._diag

    def eval(self, x1, j: int, deriv: int = 0) -> np.ndarray:
        """``D_1^deriv k_j`` at the points ``x1``; shape ``(len(x1), N, N)``."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        N, rho = self.N, self.rv.rho
        Cj = self.solve.C[:, j * N:(j + 1) * N] / rho ** self.boundary_orders[j]
        diag = self._diagonalised()
        if diag:
            lam, QW, Winv = diag
            mu = rho * lam
            phase = np.exp(1j * np.outer(x1, mu)) * mu ** deriv           # (X, k)
            left = QW[:N]                                                  # (N, k)
            right = Winv @ Cj                                              # (k, N)
            return np.einsum("ak,xk,kb->xab", left, phase, right)
        # Defective stable block: fall back to dense exponentials.
        T = rho * self.stable.T11
        Tk = np.linalg.matrix_power(T, deriv)
        out = np.empty((len(x1), N, N), dtype=complex)
        for i, x in enumerate(x1):
            out[i] = (self.stable.Q @ (Tk @ sla.expm(1j * x * T) @ Cj))[:N]
        return out


def kernel_entry(sys: BVSystem, fp: FrequencyPoint, shifted: bool = True,
                 gap_tol: float = GAP_TOL, sigma_tol: float = SIGMA_TOL) -> KernelEntry:
    rv = rescale_vars(fp, sys.order, homogeneous=not shifted)
    red = reduce_first_order(sys, rv)
    st = stable_projection(red, gap_tol)
    bs = stable_boundary_solve(sys, rv, st, sigma_tol)
    return KernelEntry(fp, rv, red, st, bs, sys.boundary_orders)


@dataclass
class PoissonKernelSet:
    entries: list[KernelEntry]
    order: int
    boundary_orders: list[int]

    @property
    def degree_tags(self) -> list[float]:
        return [-(mj + 1) / self.order for mj in self.boundary_orders]

    @property
    def decay_constant(self) -> float:
        """Measured ``c``: the smallest stable imaginary part of ``A0`` over the set."""
        return min(e.stable.stable_gap for e in self.entries)


def build_kernel_set(sys: BVSystem, points: Sequence[FrequencyPoint], shifted: bool = True,
                     threads: int | None = 1) -> PoissonKernelSet:
    entries = parallel_map(lambda fp: kernel_entry(sys, fp, shifted), points, threads)
    return PoissonKernelSet(entries, sys.order, sys.boundary_orders)


def kernel_eval(entry: KernelEntry, x1_grid, j: int, deriv: int = 0) -> np.ndarray:
    return entry.eval(x1_grid, j, deriv)


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------

def kernel_derivative(sys: BVSystem, fp: FrequencyPoint, x1, j: int, alpha_prime=(), gamma: int = 0,
                      deriv: int = 0, rel_step: float = 1e-4, shifted: bool = True) -> np.ndarray:
    """``d_{xi'}^{alpha'} d_lambda^gamma D_1^deriv k_j`` by nested central differences.

    Steps are ``rel_step * rho`` in xi' and ``rel_step * rho^{2m}`` in lambda.
    """
    rho = rescale_vars(fp, sys.order, homogeneous=not shifted).rho
    axes = [("xi", i) for i, a in enumerate(alpha_prime) for _ in range(a)] + [("lam", 0)] * gamma

    def f(xi, lam, todo):
        if not todo:
            return kernel_entry(sys, FrequencyPoint(xi, lam), shifted).eval(x1, j, deriv)
        kind, i = todo[0]
        if kind == "xi":
            h = rel_step * rho
            e = np.zeros_like(xi)
            e[i] = h
            return (f(xi + e, lam, todo[1:]) - f(xi - e, lam, todo[1:])) / (2 * h)
        h = rel_step * rho ** sys.order
        return (f(xi, lam + h, todo[1:]) - f(xi, lam - h, todo[1:])) / (2 * h)

    return f(np.array(fp.xi_prime, dtype=float), fp.lam, axes)


@dataclass
class EstimateRow:
    r: int
    k: int
    alpha_prime: tuple
    gamma: int
    values: list[float]
    flagged: list[bool]

    @property
    def min(self) -> float:
        return float(np.min(self.values))

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    @property
    def spread(self) -> float:
        return self.max / self.min if self.min > 0 else np.inf

    @property
    def bounded(self) -> bool:
        return not any(self.flagged) and np.all(np.isfinite(self.values))


def weighted_sup(values_fn: Callable[[np.ndarray], np.ndarray], rho: float, c: float,
                 exponent: float, r: int, t_max: float, samples: int = 6001):
    """``sup_x |x^r f(x)| e^{(c/2) rho x} rho^{-exponent}`` on ``x = t/rho``, ``t <= t_max``.

    Returns the sup and a flag that is set when the sup sits at the far end of
    the grid (the weighted function has not decayed there).
    """
    t = np.linspace(0.0, t_max, samples)
    x = t / rho
    vals = np.asarray(values_fn(x))
    mag = np.linalg.norm(vals.reshape(len(x), -1), axis=1) if vals.ndim > 1 else np.abs(vals)
    w = x ** r * mag * np.exp(0.5 * c * t) * rho ** (-exponent)
    i = int(np.argmax(w))
    flagged = i >= int(0.95 * (samples - 1)) or not np.isfinite(w[i])
    return float(w[i]), flagged


def decay_table(sys: BVSystem, points: Sequence[FrequencyPoint], j: int = 0, r_max: int = 2,
                k_max: int = 2, derivative_orders: Sequence[tuple] = (((), 0),),
                c: float | None = None, shifted: bool = True) -> tuple[list[EstimateRow], float]:
    """Decay ratios ``|x^r D^k d^alpha k_j| e^{(c/2) rho x} rho^{-(k-m_j-r-|alpha'|-2m|gamma|)}``."""
    kset = build_kernel_set(sys, points, shifted)
    if c is None:
        c = kset.decay_constant
    mj, two_m = sys.boundary_orders[j], sys.order
    rows = []
    for alpha, gamma in derivative_orders:
        for r in range(r_max + 1):
            for k in range(k_max + 1):
                vals, flags = [], []
                for entry in kset.entries:
                    rho = entry.rv.rho
                    expo = k - mj - r - sum(alpha) - two_m * gamma
                    if sum(alpha) or gamma:
                        fn = lambda x, e=entry: kernel_derivative(sys, e.fp, x, j, alpha, gamma, k,
                                                                  shifted=shifted)
                        samples = 1201
                    else:
                        fn = lambda x, e=entry: e.eval(x, j, k)
                        samples = 6001
                    t_max = 80.0 / c + 4.0 * r / c
                    v, fl = weighted_sup(fn, rho, c, expo, r, t_max, samples)
                    vals.append(v)
                    flags.append(fl)
                rows.append(EstimateRow(r, k, tuple(alpha), gamma, vals, flags))
    return rows, c


def l1_norm_x(values_fn, rho: float, decay: float, samples: int = 8001) -> float:
    """``int_0^inf |f(x)| dx`` for ``f`` decaying like ``exp(-decay rho x)``."""
    t_max = 60.0 / decay
    t = np.linspace(0.0, t_max, samples)
    x = t / rho
    vals = np.asarray(values_fn(x))
    mag = np.linalg.norm(vals.reshape(len(x), -1), axis=1)
    return float(simpson(mag, x=x))


def seminorm_table(sys: BVSystem, points: Sequence[FrequencyPoint], j: int = 0,
                   orders: Sequence[tuple] = ((0, 0, (), 0),), shifted: bool = True) -> list[EstimateRow]:
    """Symbol-kernel seminorm terms.

    For each ``(m, m', alpha', gamma)`` and grid point the value is
    ``<xi', lambda>^{-(d - a1 (m - m' + |alpha'|) - a2 |gamma|)}
    * || x^m D^{m'} d^{alpha'} d_lambda^gamma k_j ||_{L1}`` with
    ``d = -(m_j+1)/2m``, ``a1 = 1/2m``, ``a2 = 1``.
    """
    two_m = sys.order
    a1 = 1.0 / two_m
    d = -(sys.boundary_orders[j] + 1) / two_m
    kset = build_kernel_set(sys, points, shifted)
    rows = []
    for (mm, mp, alpha, gamma) in orders:
        vals = []
        for entry in kset.entries:
            rho = entry.rv.rho
            if sum(alpha) or gamma:
                base = lambda x, e=entry: kernel_derivative(sys, e.fp, x, j, alpha, gamma, mp,
                                                            shifted=shifted)
                samples = 2001
            else:
                base = lambda x, e=entry: e.eval(x, j, mp)
                samples = 8001
            fn = lambda x, base=base: (x ** mm)[:, None, None] * base(x)
            norm = l1_norm_x(fn, rho, entry.stable.stable_gap, samples)
            bracket = model_bessel(entry.fp, two_m)
            vals.append(norm * bracket ** (-(d - a1 * (mm - mp + sum(alpha)) - gamma)))
        rows.append(EstimateRow(mm, mp, tuple(alpha), gamma, vals, [False] * len(vals)))
    return rows


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def kernel_table_rows(kset: PoissonKernelSet, x1_grid) -> tuple[list[str], list[list[float]]]:
    """Header and rows ``(x1, xi'..., Re lambda, Im lambda, Re/Im k_j entries)``."""
    x1_grid = np.asarray(x1_grid, dtype=float)
    first = kset.entries[0]
    ntan, N, m = len(first.fp.xi_prime), first.N, len(kset.boundary_orders)
    header = ["x1"] + [f"xi{i + 2}" for i in range(ntan)] + ["re_lambda", "im_lambda"]
    for j in range(m):
        for a in range(N):
            for b in range(N):
                header += [f"re_k{j + 1}_{a + 1}{b + 1}", f"im_k{j + 1}_{a + 1}{b + 1}"]
    rows = []
    for e in kset.entries:
        vals = [e.eval(x1_grid, j) for j in range(m)]
        for ix, x in enumerate(x1_grid):
            row = [x, *e.fp.xi_prime, e.fp.lam.real, e.fp.lam.imag]
            for v in vals:
                for z in v[ix].ravel():
                    row += [z.real, z.imag]
            rows.append(row)
    return header, rows


def write_kernel_csv(kset: PoissonKernelSet, x1_grid, path: str | Path) -> Path:
    header, rows = kernel_table_rows(kset, x1_grid)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])
    return path
