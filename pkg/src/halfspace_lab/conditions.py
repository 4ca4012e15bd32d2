"""Grid-based certification of parameter-ellipticity and the Lopatinskii-Shapiro condition."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core_model import (
    BVSystem,
    FrequencyPoint,
    boundary_normal_polynomial,
    model_bessel,
    normal_polynomial,
    principal_symbol_grid,
    rescale_vars,
)
from .errors import InputError, LeadingCoeffSingular, NotElliptic, RealAxisRoot, WrongStableCount
from .parallel import parallel_map

SIGMA_TOL = 1e-10


@dataclass
class EllipticityCertificate:
    angle: float
    worst_xi: np.ndarray
    grid_size: int


@dataclass
class LSReport:
    satisfied: bool
    min_singular_value: float
    failure_points: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    def rows(self) -> list[list[float]]:
        """CSV rows ``(xi'_1, ..., Re lambda, Im lambda, min singular value)``."""
        return [list(xi) + [lam.real, lam.imag, sv] for xi, lam, sv in self.samples]


# ---------------------------------------------------------------------------
# (E)_phi
# ---------------------------------------------------------------------------

def sphere_points(n: int, samples: int) -> np.ndarray:
    """Tensor-product grid in hyperspherical angles on the unit sphere of R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    azim = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    polar = [np.linspace(0.0, np.pi, samples // 2 + 1) for _ in range(n - 2)]
    grids = np.meshgrid(*polar, azim, indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    pts = np.ones((angles.shape[0], n))
    for k in range(n - 1):
        pts[:, k] *= np.cos(angles[:, k])
        pts[:, k + 1:] *= np.sin(angles[:, k])[:, None]
    return pts


def _angle_on_grid(sys: BVSystem, samples: int, tol: float):
    pts = sphere_points(sys.dim, samples)
    eigs = np.linalg.eigvals(principal_symbol_grid(sys, pts))
    mods = np.abs(eigs)
    args = np.abs(np.angle(eigs))
    if mods.min() < tol or args.max() >= np.pi - tol:
        bad = np.unravel_index(np.argmin(np.where(mods < tol, -1, np.pi - args)), args.shape)[0]
        raise NotElliptic(f"principal symbol has spectrum at or across 0 near xi = {pts[bad]}")
    worst = int(np.argmax(args.max(axis=1)))
    return float(args.max()), pts[worst], len(pts)


def ellipticity_angle(sys: BVSystem, sphere_samples: int = 32, tol: float = 1e-10,
                      max_samples: int = 512) -> EllipticityCertificate:
    """Largest ``|arg|`` of the spectrum of ``A_#`` over a refined sphere grid."""
    if sphere_samples < 16:
        raise InputError("need at least 16 samples per angular dimension")
    samples = sphere_samples
    angle, worst, size = _angle_on_grid(sys, samples, tol)
    cap = max_samples if sys.dim <= 2 else min(max_samples, 96)
    while samples * 2 <= cap:
        samples *= 2
        new, worst_new, size = _angle_on_grid(sys, samples, tol)
        done = abs(new - angle) < 1e-3
        if new >= angle:
            angle, worst = new, worst_new
        if done:
            break
    return EllipticityCertificate(angle, worst, size)


# ---------------------------------------------------------------------------
# Characteristic roots
# ---------------------------------------------------------------------------

def characteristic_coefficients(sys: BVSystem, fp: FrequencyPoint, shift: float = 0.0) -> np.ndarray:
    """Coefficients (lowest degree first) of ``tau -> det(shift + lambda + A_#(xi', tau))``."""
    mats = normal_polynomial(sys, fp.xi_prime)
    mats[0] = mats[0] + (shift + fp.lam) * np.eye(sys.state_dim)
    deg = sys.order * sys.state_dim
    if sys.state_dim == 1:
        return np.array([m[0, 0] for m in mats])
    # Interpolate the determinant on a circle of roughly the root scale.
    radius = max(1.0, model_bessel(FrequencyPoint(fp.xi_prime, shift + fp.lam), sys.order)
                 ** (1.0 / sys.order))
    M = deg + 1
    z = radius * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.array([np.linalg.det(sum(c * zk ** k for k, c in enumerate(mats))) for zk in z])
    coeffs = np.fft.fft(vals) / M
    return coeffs / radius ** np.arange(M)


def companion_roots(coeffs_low_first: np.ndarray) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix of the monic normalisation."""
    c = np.asarray(coeffs_low_first, dtype=complex)
    lead = c[-1]
    if abs(lead) <= 1e-14 * max(1.0, np.abs(c).max()):
        raise LeadingCoeffSingular("leading normal coefficient is singular")
    c = c / lead
    d = len(c) - 1
    comp = np.zeros((d, d), dtype=complex)
    comp[1:, :-1] = np.eye(d - 1)
    comp[:, -1] = -c[:-1]
    return np.linalg.eigvals(comp)


def stable_roots(sys: BVSystem, fp: FrequencyPoint, shift: float = 0.0,
                 gap_tol: float | None = None) -> np.ndarray:
    """Roots ``tau`` of ``det(shift + lambda + A_#(xi', tau))`` with ``Im tau > 0``.

    ``shift = 0`` is the homogeneous problem of the LS condition; the model
    problem uses ``shift = 1``.
    """
    if gap_tol is None:
        gap_tol = 1e-8 * (1.0 + model_bessel(fp, sys.order))
    roots = companion_roots(characteristic_coefficients(sys, fp, shift))
    if np.any(np.abs(roots.imag) <= gap_tol):
        raise RealAxisRoot(f"characteristic root within {gap_tol:.3g} of the real axis")
    stable = roots[roots.imag > 0]
    expected = sys.m * sys.state_dim
    if len(stable) != expected:
        raise WrongStableCount(f"{len(stable)} stable roots, expected {expected}")
    return stable[np.argsort(np.angle(stable), kind="stable")]


# ---------------------------------------------------------------------------
# Lopatinskii matrix (scalar systems)
# ---------------------------------------------------------------------------

def poly_remainder(num_high_first: np.ndarray, monic_high_first: np.ndarray) -> np.ndarray:
    """Remainder of synthetic division by a monic polynomial, highest degree first."""
    a = np.array(num_high_first, dtype=complex)
    d = np.asarray(monic_high_first, dtype=complex)
    q = len(d) - 1
    if len(a) <= q:
        return np.concatenate([np.zeros(q - len(a), dtype=complex), a])
    for i in range(len(a) - q):
        coef = a[i]
        a[i:i + q + 1] -= coef * d
    return a[len(a) - q:]


def lopatinskii_matrix(sys: BVSystem, fp: FrequencyPoint, shift: float = 0.0) -> np.ndarray:
    """Row j: coefficients (in ``1, tau, ..., tau^{m-1}``) of ``B_{j,#}`` mod the stable factor."""
    if sys.state_dim != 1:
        raise InputError("the Lopatinskii matrix route is scalar only (N = 1)")
    roots = stable_roots(sys, fp, shift)
    stable_factor = np.poly(roots)
    L = np.zeros((sys.m, sys.m), dtype=complex)
    for j in range(sys.m):
        b = np.array([c[0, 0] for c in boundary_normal_polynomial(sys, j, fp.xi_prime)])
        rem = poly_remainder(b[::-1], stable_factor)
        L[j] = rem[::-1]
    return L


# ---------------------------------------------------------------------------
# (LS)_phi
# ---------------------------------------------------------------------------

def _stable_basis_matrix(sys, fp, shifted):
    from .poisson_kernels import boundary_rows, reduce_first_order, stable_projection

    rv = rescale_vars(fp, sys.order, homogeneous=not shifted)
    red = reduce_first_order(sys, rv)
    rows = boundary_rows(sys, rv.b)
    return red, rows


def _ls_matrix_mode(sys, fp, shifted):
    from .poisson_kernels import stable_projection

    red, rows = _stable_basis_matrix(sys, fp, shifted)
    st = stable_projection(red)
    return float(np.linalg.svd(rows @ st.Q, compute_uv=False).min())


def _orthonormalize(Y):
    q, _ = np.linalg.qr(Y)
    return q


def stable_subspace_by_integration(A0: np.ndarray, k: int, seed: int = 0, segment: float = 1.0,
                                   max_length: float = 4000.0, tol: float = 1e-12):
    """Span of the decaying solutions of ``V' = i A0 V`` via backward subspace iteration.

    Integrating backwards damps the growing modes, so repeated propagation over
    fixed segments converges to the stable subspace.  Uses no eigen-information.
    """
    d = A0.shape[0]
    rng = np.random.default_rng(seed)
    Y = _orthonormalize(rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k)))

    def rhs(_, y):
        return ((-1j * A0) @ y.reshape(d, k)).ravel()

    length, converged = 0.0, False
    while length < max_length:
        sol = solve_ivp(rhs, (0.0, segment), Y.ravel(), method="DOP853", rtol=1e-12, atol=1e-14)
        Ynew = _orthonormalize(sol.y[:, -1].reshape(d, k))
        # Distance between subspaces via the projector difference.
        change = np.linalg.norm(Ynew - Y @ (Y.conj().T @ Ynew), 2)
        Y = Ynew
        length += segment
        if change < tol:
            converged = True
            break
    return Y, converged


def _ls_ode_mode(sys, fp, shifted, seed=0):
    red, rows = _stable_basis_matrix(sys, fp, shifted)
    k = sys.m * sys.state_dim
    Y, converged = stable_subspace_by_integration(red.A0, k, seed=seed)
    S = rows @ Y
    sv = float(np.linalg.svd(S, compute_uv=False).min())
    if converged and sv > SIGMA_TOL:
        # Each unit datum must be matched by a decaying solution.
        C = np.linalg.solve(S, np.eye(k))
        V0 = Y @ C
        if np.linalg.norm(rows @ V0 - np.eye(k)) > 1e-8:
            sv = 0.0
    return sv, converged


def ls_condition(sys: BVSystem, fp: FrequencyPoint, mode: str = "matrix",
                 sigma_tol: float = SIGMA_TOL, shifted: bool = False) -> LSReport:
    """LS check at one frequency point.

    ``matrix`` mode takes the smallest singular value of the boundary rows
    restricted to an orthonormal basis of the stable subspace; ``ode_oracle``
    obtains that subspace by integrating the ODE instead.
    """
    if mode == "matrix":
        sv = _ls_matrix_mode(sys, fp, shifted)
    elif mode == "ode_oracle":
        sv, converged = _ls_ode_mode(sys, fp, shifted)
        if not converged:
            sv = min(sv, 0.0)
    else:
        raise InputError(f"unknown LS mode {mode!r}")
    ok = sv > sigma_tol
    pt = (tuple(float(v) for v in fp.xi_prime), fp.lam)
    return LSReport(ok, sv, [] if ok else [pt], [(pt[0], pt[1], sv)])


def ls_scan(sys: BVSystem, points: Sequence[FrequencyPoint], mode: str = "matrix",
            sigma_tol: float = SIGMA_TOL, shifted: bool = False, threads: int = 1) -> LSReport:
    """Reduce :func:`ls_condition` over a grid of frequency points."""
    parts = parallel_map(lambda fp: ls_condition(sys, fp, mode, sigma_tol, shifted), points, threads)
    samples = [s for p in parts for s in p.samples]
    failures = [f for p in parts for f in p.failure_points]
    smin = min(p.min_singular_value for p in parts)
    return LSReport(not failures, smin, failures, samples)


def sector_rays(phi: float, margin: float = 0.05) -> list[float]:
    """Argument rays ``{0, +-(pi - phi - margin)}`` of the lambda sector."""
    t = np.pi - phi - margin
    return [0.0, t, -t]


def ls_grid(n_tangential: int, phi: float, directions: int = 8,
            moduli: Sequence[float] = (0.25, 1.0, 4.0),
            radii: Sequence[float] = (0.0, 0.5, 1.0, 2.0)) -> list[FrequencyPoint]:
    """Frequency points for LS scans: the lambda = 0 slice plus sector rays.

    By homogeneity a bounded slice suffices; points with ``(xi', lambda) = 0``
    are excluded.
    """
    if n_tangential == 0:
        dirs = [np.zeros(0)]
    elif n_tangential == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    else:
        dirs = list(sphere_points(n_tangential, directions))
    pts = []
    for i, d in enumerate(dirs):
        if n_tangential:
            for r in radii:
                if r > 0:
                    pts.append(FrequencyPoint(r * d, 0.0))
        for mod in moduli:
            for ang in sector_rays(phi):
                for r in radii:
                    if r > 0 or i == 0:
                        pts.append(FrequencyPoint(r * d, mod * np.exp(1j * ang)))
    return pts
