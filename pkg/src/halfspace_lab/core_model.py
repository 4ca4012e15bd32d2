"""System definitions, anisotropy bookkeeping and symbol evaluation.

Conventions used throughout the package:

* ``D = -i d/dx`` so that the symbol of ``D^alpha`` is ``xi^alpha``.
* Fourier transform ``F f(xi) = int exp(-i x.xi) f(x) dx``.
* Multi-indices have length ``n``; entry 0 is the normal direction ``x_1``.
  The half-space is ``x_1 > 0`` and decaying modes behave like
  ``exp(i tau x_1)`` with ``Im tau > 0``.
* The model problem always carries the shift ``1 + lambda``; the
  homogeneous variant (no shift) is used for the Lopatinskii-Shapiro check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, InputError

MultiIndex = tuple[int, ...]


# ---------------------------------------------------------------------------
# Anisotropy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Anisotropy:
    """Block decomposition ``dims`` of R^n with scaling weights ``weights``.

    ``param_weight`` is the optional weight ``a_{l+1}`` attached to a
    complex parameter (lambda or mu) in :func:`aniso_bessel`.
    """

    dims: tuple[int, ...]
    weights: tuple[float, ...]
    param_weight: float | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        weights = tuple(float(a) for a in self.weights)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)
        if len(dims) != len(weights):
            raise InputError("dims and weights must have the same length")
        if any(d <= 0 for d in dims):
            raise InputError("block dimensions must be positive")
        if any(not a > 0 for a in weights):
            raise InputError("anisotropy weights must be positive")
        if self.param_weight is not None and not self.param_weight > 0:
            raise InputError("parameter weight must be positive")

    @property
    def n(self) -> int:
        return sum(self.dims)

    @property
    def nblocks(self) -> int:
        return len(self.dims)

    @classmethod
    def isotropic(cls, n: int, param_weight: float | None = None) -> "Anisotropy":
        return cls((n,), (1.0,), param_weight)

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for d in self.dims:
            out.append(slice(start, start + d))
            start += d
        return out

    def axis_weights(self) -> np.ndarray:
        """Weight of each coordinate axis (length n)."""
        return np.repeat(np.asarray(self.weights), self.dims)

    def axis_blocks(self) -> np.ndarray:
        """Block index of each coordinate axis (length n)."""
        return np.repeat(np.arange(self.nblocks), self.dims)

    def dilate(self, lam: float, x: np.ndarray) -> np.ndarray:
        """Anisotropic dilation ``delta_lam x = (lam^{a_j} x_j)_j``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionMismatch(f"expected {self.n} coordinates, got {x.shape[-1]}")
        return x * lam ** self.axis_weights()


def _block_moduli(x: np.ndarray, a: Anisotropy) -> list[np.ndarray]:
    x = np.asarray(x)
    if x.shape[-1] != a.n:
        raise DimensionMismatch(f"expected {a.n} coordinates, got {x.shape[-1]}")
    return [np.linalg.norm(x[..., s], axis=-1) for s in a.block_slices()]


def aniso_distance(x, a: Anisotropy):
    """``|x|_{d,a} = (sum_j |x_j|^{2/a_j})^{1/2}``; vectorised over leading axes."""
    mods = _block_moduli(x, a)
    total = sum(m ** (2.0 / w) for m, w in zip(mods, a.weights))
    return np.sqrt(total)


def aniso_bessel(xi, lam, a: Anisotropy):
    """``<xi, lam>_{d,a} = (1 + sum_j |xi_j|^{2/a_j} + |lam|^{2/a_{l+1}})^{1/2}``.

    ``lam=None`` drops the parameter term.
    """
    mods = _block_moduli(xi, a)
    total = 1.0 + sum(m ** (2.0 / w) for m, w in zip(mods, a.weights))
    if lam is not None:
        if a.param_weight is None:
            raise InputError("anisotropy has no parameter weight for lambda")
        total = total + np.abs(lam) ** (2.0 / a.param_weight)
    return np.sqrt(total)


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

def _as_matrix(value, N: int) -> np.ndarray:
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return arr * np.eye(N, dtype=complex)
    if arr.shape != (N, N):
        raise InputError(f"coefficient has shape {arr.shape}, expected {(N, N)}")
    return arr.copy()


def _check_index(alpha: Sequence[int], n: int) -> MultiIndex:
    alpha = tuple(int(v) for v in alpha)
    if len(alpha) != n or any(v < 0 for v in alpha):
        raise InputError(f"invalid multi-index {alpha} for dimension {n}")
    return alpha


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """Boundary operator ``B_j(D) = sum_{|beta| <= m_j} b_beta D^beta``."""

    order: int
    coeffs: Mapping[MultiIndex, np.ndarray]


@dataclass(frozen=True, eq=False)
class BVSystem:
    """Constant-coefficient boundary value system on the half-space.

    ``interior_coeffs`` maps multi-indices ``alpha`` (|alpha| <= 2m) to N x N
    matrices.  Only the top-order part enters the model problem; lower-order
    entries are kept for round-tripping but ignored by the solvers.
    """

    dim: int
    state_dim: int
    order: int
    interior_coeffs: Mapping[MultiIndex, np.ndarray]
    boundary_ops: tuple[BoundaryOperator, ...]

    def __post_init__(self):
        n, N, two_m = self.dim, self.state_dim, self.order
        if n < 1 or N < 1:
            raise InputError("dimension and state dimension must be positive")
        if two_m < 2 or two_m % 2:
            raise InputError("order must be a positive even integer")
        interior = {}
        for alpha, c in self.interior_coeffs.items():
            alpha = _check_index(alpha, n)
            if sum(alpha) > two_m:
                raise InputError(f"interior index {alpha} exceeds order {two_m}")
            interior[alpha] = _as_matrix(c, N)
        if not any(sum(al) == two_m and np.any(c != 0) for al, c in interior.items()):
            raise InputError("no nonzero top-order interior coefficient")
        ops = []
        for op in self.boundary_ops:
            if not 0 <= op.order <= two_m - 1:
                raise InputError(f"boundary order {op.order} outside [0, {two_m - 1}]")
            coeffs = {}
            for beta, c in op.coeffs.items():
                beta = _check_index(beta, n)
                if sum(beta) > op.order:
                    raise InputError(f"boundary index {beta} exceeds order {op.order}")
                coeffs[beta] = _as_matrix(c, N)
            ops.append(BoundaryOperator(op.order, coeffs))
        if len(ops) != two_m // 2:
            raise InputError(f"need {two_m // 2} boundary operators, got {len(ops)}")
        object.__setattr__(self, "interior_coeffs", interior)
        object.__setattr__(self, "boundary_ops", tuple(ops))

    @property
    def m(self) -> int:
        return self.order // 2

    @property
    def boundary_orders(self) -> list[int]:
        return [op.order for op in self.boundary_ops]

    @property
    def m_star(self) -> int:
        return max(self.boundary_orders)

    @property
    def m_lower(self) -> int:
        return min(self.boundary_orders)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "state_dim": self.state_dim,
            "order": self.order,
            "interior": _coeffs_to_json(self.interior_coeffs, self.state_dim),
            "boundary": [
                {"order": op.order, "coeffs": _coeffs_to_json(op.coeffs, self.state_dim)}
                for op in self.boundary_ops
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BVSystem":
        try:
            n, N, order = int(d["dim"]), int(d.get("state_dim", 1)), int(d["order"])
            interior = _coeffs_from_json(d["interior"], n)
            ops = tuple(
                BoundaryOperator(int(b["order"]), _coeffs_from_json(b["coeffs"], n))
                for b in d["boundary"]
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed system definition: {exc}") from exc
        return cls(n, N, order, interior, ops)


def index_key(alpha: MultiIndex) -> str:
    return ",".join(str(v) for v in alpha)


def parse_index_key(key: str, n: int) -> MultiIndex:
    try:
        alpha = tuple(int(v) for v in str(key).split(","))
    except ValueError as exc:
        raise InputError(f"bad multi-index key {key!r}") from exc
    return _check_index(alpha, n)


def _entry_to_json(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}


def _entry_from_json(v) -> complex:
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    return complex(v)


def _coeffs_to_json(coeffs: Mapping[MultiIndex, np.ndarray], N: int) -> dict:
    out = {}
    for alpha in sorted(coeffs):
        out[index_key(alpha)] = [[_entry_to_json(z) for z in row] for row in coeffs[alpha]]
    return out


def _coeffs_from_json(d: Mapping, n: int) -> dict:
    out = {}
    for key, val in d.items():
        if isinstance(val, list):
            val = [[_entry_from_json(z) for z in row] for row in val]
        else:
            val = _entry_from_json(val)
        out[parse_index_key(key, n)] = val
    return out


# ---------------------------------------------------------------------------
# Stock operators
# ---------------------------------------------------------------------------

def unit_index(n: int, i: int, k: int = 1) -> MultiIndex:
    alpha = [0] * n
    alpha[i] = k
    return tuple(alpha)


def laplacian_coeffs(n: int, scale=1.0) -> dict:
    """Coefficients of ``scale * (-Delta) = scale * sum_i D_i^2``."""
    return {unit_index(n, i, 2): scale for i in range(n)}


def bilaplacian_coeffs(n: int, scale=1.0) -> dict:
    """Coefficients of ``scale * Delta^2 = scale * (sum_i D_i^2)^2``."""
    out: dict[MultiIndex, complex] = {}
    for i, j in product(range(n), repeat=2):
        alpha = tuple(2 * (k == i) + 2 * (k == j) for k in range(n))
        out[alpha] = out.get(alpha, 0.0) + scale
    return out


def normal_derivative(n: int, k: int) -> BoundaryOperator:
    """``D_1^k``; ``k = 0`` is the Dirichlet trace."""
    return BoundaryOperator(k, {unit_index(n, 0, k): 1.0})


def dirichlet_family(n: int, m: int) -> tuple[BoundaryOperator, ...]:
    return tuple(normal_derivative(n, k) for k in range(m))


def laplace_system(n: int, boundary: str = "dirichlet") -> BVSystem:
    """``-Delta`` with Dirichlet, Neumann or the Cauchy-Riemann operator."""
    if boundary == "dirichlet":
        ops = (normal_derivative(n, 0),)
    elif boundary == "neumann":
        ops = (normal_derivative(n, 1),)
    elif boundary == "cauchy-riemann":
        if n < 2:
            raise InputError("Cauchy-Riemann operator needs n >= 2")
        ops = (BoundaryOperator(1, {unit_index(n, 0): 1.0, unit_index(n, 1): 1j}),)
    else:
        raise InputError(f"unknown boundary type {boundary!r}")
    return BVSystem(n, 1, 2, laplacian_coeffs(n), ops)


def clamped_plate(n: int) -> BVSystem:
    """``Delta^2`` with Dirichlet and Neumann data (clamped plate)."""
    return BVSystem(n, 1, 4, bilaplacian_coeffs(n), dirichlet_family(n, 2))


def diagonal_system(n: int, scales: Sequence[complex], boundary: str = "dirichlet") -> BVSystem:
    """``diag(c_1, ..., c_N) (-Delta)`` with componentwise Dirichlet or Neumann data."""
    N = len(scales)
    interior = {unit_index(n, i, 2): np.diag(np.asarray(scales, dtype=complex)) for i in range(n)}
    k = {"dirichlet": 0, "neumann": 1}[boundary]
    return BVSystem(n, N, 2, interior, (BoundaryOperator(k, {unit_index(n, 0, k): np.eye(N)}),))


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------

def _monomial(xi: np.ndarray, alpha: MultiIndex) -> complex:
    out = 1.0 + 0j
    for x, k in zip(xi, alpha):
        if k:
            out *= x ** k
    return out


def principal_symbol(sys: BVSystem, xi) -> np.ndarray:
    """``A_#(xi) = sum_{|alpha| = 2m} a_alpha xi^alpha``."""
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (sys.dim,):
        raise DimensionMismatch(f"expected xi in R^{sys.dim}")
    out = np.zeros((sys.state_dim, sys.state_dim), dtype=complex)
    for alpha, c in sys.interior_coeffs.items():
        if sum(alpha) == sys.order:
            out += c * _monomial(xi, alpha)
    return out


def principal_symbol_grid(sys: BVSystem, xis: np.ndarray) -> np.ndarray:
    """Vectorised :func:`principal_symbol` over xis of shape (..., n)."""
    xis = np.asarray(xis, dtype=complex)
    shape = xis.shape[:-1]
    out = np.zeros(shape + (sys.state_dim, sys.state_dim), dtype=complex)
    for alpha, c in sys.interior_coeffs.items():
        if sum(alpha) == sys.order:
            mono = np.prod(xis ** np.asarray(alpha), axis=-1)
            out += mono[..., None, None] * c
    return out


def normal_polynomial(sys: BVSystem, xi_prime) -> list[np.ndarray]:
    """Matrices ``A_k(xi')`` with ``A_#(xi', tau) = sum_k A_k(xi') tau^k``."""
    xi_prime = np.asarray(xi_prime, dtype=complex).reshape(-1)
    if xi_prime.shape != (sys.dim - 1,):
        raise DimensionMismatch(f"expected xi' in R^{sys.dim - 1}")
    N = sys.state_dim
    out = [np.zeros((N, N), dtype=complex) for _ in range(sys.order + 1)]
    for alpha, c in sys.interior_coeffs.items():
        if sum(alpha) == sys.order:
            out[alpha[0]] += c * _monomial(xi_prime, alpha[1:])
    return out


def boundary_normal_polynomial(sys: BVSystem, j: int, xi_prime) -> list[np.ndarray]:
    """Matrices ``B_k(xi')`` with ``B_{j,#}(xi', tau) = sum_k B_k(xi') tau^k``."""
    if not 0 <= j < len(sys.boundary_ops):
        raise IndexError(f"boundary operator index {j} out of range")
    xi_prime = np.asarray(xi_prime, dtype=complex).reshape(-1)
    if xi_prime.shape != (sys.dim - 1,):
        raise DimensionMismatch(f"expected xi' in R^{sys.dim - 1}")
    op = sys.boundary_ops[j]
    N = sys.state_dim
    out = [np.zeros((N, N), dtype=complex) for _ in range(op.order + 1)]
    for beta, c in op.coeffs.items():
        if sum(beta) == op.order:
            out[beta[0]] += c * _monomial(xi_prime, beta[1:])
    return out


def boundary_principal_symbol(sys: BVSystem, j: int, xi_prime, tau: complex) -> np.ndarray:
    """``B_{j,#}(xi', tau) = sum_{|beta| = m_j} b_beta xi'^{beta'} tau^{beta_1}``.

    ``j`` is zero-based.
    """
    coeffs = boundary_normal_polynomial(sys, j, xi_prime)
    return sum(c * tau ** k for k, c in enumerate(coeffs))


# ---------------------------------------------------------------------------
# Frequencies and rescaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrequencyPoint:
    xi_prime: np.ndarray
    lam: complex

    def __post_init__(self):
        object.__setattr__(self, "xi_prime", np.atleast_1d(np.asarray(self.xi_prime, dtype=float)))
        object.__setattr__(self, "lam", complex(self.lam))

    @classmethod
    def parabolic(cls, xi_prime, eta: float, tau: float) -> "FrequencyPoint":
        if eta < 0:
            raise InputError("eta must be nonnegative")
        return cls(xi_prime, complex(eta, tau))


@dataclass(frozen=True, eq=False)
class RescaledVars:
    rho: float
    b: np.ndarray
    sigma: complex


def model_anisotropy(order: int, n_tangential: int) -> Anisotropy:
    """The fixed choice ``a = (1/2m, 1)`` for ``(xi', lambda)``."""
    return Anisotropy((max(n_tangential, 1),), (1.0 / order,), 1.0)


def model_bessel(fp: FrequencyPoint, order: int) -> float:
    """``<xi', lambda>`` for the anisotropy ``(1/2m, 1)``."""
    r = float(np.linalg.norm(fp.xi_prime))
    return float(np.sqrt(1.0 + r ** (2 * order) + abs(fp.lam) ** 2))


def rescale_vars(fp: FrequencyPoint, order: int, homogeneous: bool = False) -> RescaledVars:
    """``rho = <xi', lambda>^{1/2m}``, ``b = xi'/rho``, ``sigma = (1+lambda)/rho^{2m}``.

    With ``homogeneous=True`` the leading 1 and the shift are dropped:
    ``rho = (|xi'|^{4m} + |lambda|^2)^{1/4m}`` and ``sigma = lambda/rho^{2m}``.
    """
    r = float(np.linalg.norm(fp.xi_prime))
    if homogeneous:
        rho = (r ** (2 * order) + abs(fp.lam) ** 2) ** (0.5 / order)
        if rho == 0:
            raise InputError("(xi', lambda) = (0, 0) has no homogeneous rescaling")
        shifted = fp.lam
    else:
        rho = model_bessel(fp, order) ** (1.0 / order)
        shifted = 1.0 + fp.lam
    return RescaledVars(rho, fp.xi_prime / rho, shifted / rho ** order)


def frequency_grid(counts: Sequence[int], extents: Sequence[float]) -> list[np.ndarray]:
    """Angular frequencies of periodic axes with the given sample counts and periods."""
    return [2 * np.pi * np.fft.fftfreq(c, d=L / c) for c, L in zip(counts, extents)]


def iter_multi_indices(n: int, total: int) -> Iterable[MultiIndex]:
    """All multi-indices of length n with |alpha| = total."""
    for alpha in product(range(total + 1), repeat=n):
        if sum(alpha) == total:
            yield alpha
