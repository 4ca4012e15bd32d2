"""Discrete anisotropic weighted function spaces.

Fields live on tensor grids.  Tangential and time axes are periodic boxes
(the torus surrogate of R); the normal axis, when present, is axis 0 on
``[0, X]``.  Fourier analysis on a half-line axis goes through the Seeley
extension, never through zero extension.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .core_model import Anisotropy, aniso_distance
from .errors import BandExceedsGrid, DimensionMismatch, IllConditioned, InputError, NonIntegrableWeight, TraceDivergence

ROLES = ("normal", "tangential", "time")


# ---------------------------------------------------------------------------
# Grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    """One grid axis.

    Periodic axes sample ``origin + i * extent / count``.  A half-line normal
    axis samples ``[0, extent]`` including both ends, either uniformly or
    graded as ``extent * (i / (count-1))**kappa``.
    """

    role: str
    count: int
    extent: float
    spacing: str = "uniform"
    kappa: float = 1.0
    periodic: bool = True
    origin: float = 0.0

    def __post_init__(self):
        if self.role not in ROLES:
            raise InputError(f"unknown axis role {self.role!r}")
        if self.count < 2 or not self.extent > 0:
            raise InputError("axis needs at least two points and a positive extent")
        if self.spacing not in ("uniform", "graded"):
            raise InputError(f"unknown spacing {self.spacing!r}")
        if self.periodic and self.spacing != "uniform":
            raise InputError("periodic axes must be uniform")

    @classmethod
    def normal(cls, count: int, extent: float, graded: bool = False, gamma: float = 0.0) -> "Axis":
        if graded:
            return cls("normal", count, extent, "graded", graded_kappa(gamma), periodic=False)
        return cls("normal", count, extent, periodic=False)

    @classmethod
    def torus(cls, role: str, count: int, extent: float = 2 * np.pi) -> "Axis":
        return cls(role, count, extent)

    @property
    def step(self) -> float:
        if self.periodic:
            return self.extent / self.count
        return self.extent / (self.count - 1)

    def points(self) -> np.ndarray:
        if self.periodic:
            return self.origin + np.arange(self.count) * self.step
        u = np.linspace(0.0, 1.0, self.count)
        if self.spacing == "graded":
            u = u ** self.kappa
        return self.extent * u

    def frequencies(self) -> np.ndarray:
        if not self.periodic:
            raise InputError("half-line axes have no discrete frequencies; extend first")
        return 2 * np.pi * np.fft.fftfreq(self.count, d=self.step)

    def scaled(self, factor: float) -> "Axis":
        return replace(self, extent=self.extent * factor, origin=self.origin * factor)


def graded_kappa(gamma: float) -> float:
    return max(2.0, 4.0 / (1.0 + gamma))


@dataclass(eq=False)
class DiscreteField:
    """Complex samples on a tensor grid; an optional trailing axis holds components."""

    values: np.ndarray
    axes: tuple[Axis, ...]
    anisotropy: Anisotropy | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.axes = tuple(self.axes)
        shape = tuple(a.count for a in self.axes)
        if self.values.shape[:len(shape)] != shape or self.values.ndim > len(shape) + 1:
            raise DimensionMismatch(f"values of shape {self.values.shape} do not fit grid {shape}")
        for i, a in enumerate(self.axes):
            if a.role == "normal" and i != 0:
                raise InputError("the normal axis must be axis 0")
        if self.anisotropy is not None and self.anisotropy.n != len(self.axes):
            raise DimensionMismatch("anisotropy dimension differs from the number of axes")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def has_normal(self) -> bool:
        return bool(self.axes) and self.axes[0].role == "normal" and not self.axes[0].periodic

    @property
    def has_components(self) -> bool:
        return self.values.ndim == len(self.axes) + 1

    def with_values(self, values) -> "DiscreteField":
        return DiscreteField(values, self.axes, self.anisotropy)

    def magnitude(self) -> np.ndarray:
        if self.has_components:
            return np.linalg.norm(self.values, axis=-1)
        return np.abs(self.values)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[a.points() for a in self.axes], indexing="ij")

    def get_anisotropy(self) -> Anisotropy:
        return self.anisotropy or Anisotropy.isotropic(self.ndim)


def field_from_function(fn, axes: Sequence[Axis], anisotropy: Anisotropy | None = None) -> DiscreteField:
    axes = tuple(axes)
    grids = np.meshgrid(*[a.points() for a in axes], indexing="ij")
    return DiscreteField(fn(*grids), axes, anisotropy)


def frequency_mesh(axes: Sequence[Axis]) -> np.ndarray:
    """Stacked angular frequencies, shape ``(*counts, len(axes))``."""
    return np.stack(np.meshgrid(*[a.frequencies() for a in axes], indexing="ij"), axis=-1)


def _fft(values, nax):
    return np.fft.fftn(values, axes=tuple(range(nax)))


def _ifft(values, nax):
    return np.fft.ifftn(values, axes=tuple(range(nax)))


def apply_multiplier(f: DiscreteField, mult: np.ndarray) -> DiscreteField:
    """Fourier multiplier on a fully periodic field."""
    if any(not a.periodic for a in f.axes):
        raise InputError("multipliers need periodic axes; extend the normal axis first")
    if f.has_components:
        mult = mult[..., None]
    return f.with_values(_ifft(_fft(f.values, f.ndim) * mult, f.ndim))


def random_band_limited(axes: Sequence[Axis], level: int, rng: np.random.Generator,
                        anisotropy: Anisotropy | None = None, A: float = 1.0,
                        real: bool = False) -> DiscreteField:
    """Field with uniformly random spectrum on the dyadic annulus of ``level``.

    Level 0 is the ball ``|xi| <= A``; level k >= 1 is ``2^{k-1} A < |xi| <= 2^k A``.
    """
    axes = tuple(axes)
    a = anisotropy or Anisotropy.isotropic(len(axes))
    r = aniso_distance(frequency_mesh(axes), a)
    lo, hi = (0.0, A) if level == 0 else (2.0 ** (level - 1) * A, 2.0 ** level * A)
    mask = (r <= hi) & ((r > lo) if level else True)
    if not mask.any():
        raise BandExceedsGrid(f"annulus {level} holds no grid frequencies")
    spec = mask * (rng.uniform(-1, 1, mask.shape) + 1j * rng.uniform(-1, 1, mask.shape))
    vals = _ifft(spec, len(axes)) * np.prod(mask.shape)
    if real:
        vals = vals.real
    vals = vals / np.sqrt(np.mean(np.abs(vals) ** 2))
    return DiscreteField(vals, axes, anisotropy)


# ---------------------------------------------------------------------------
# Seeley extension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeeleyData:
    K: int
    a: np.ndarray
    b: np.ndarray

    def moment_errors(self, lmax: int) -> np.ndarray:
        # b_k are powers of two, so every product a_k b_k^l is exact.
        return np.array([abs(math.fsum(float(ak) * float(bk) ** l for ak, bk in zip(self.a, self.b)) - 1.0)
                         for l in range(lmax + 1)])


def seeley_data(K: int = 10, allow_ill_conditioned: bool = False) -> SeeleyData:
    """``b_k = -2^k`` and ``a_k`` solving ``sum_k a_k b_k^l = 1`` for ``l < K`` (exactly, in rationals)."""
    if K < 1:
        raise InputError("need at least one Seeley term")
    b = [-(2 ** k) for k in range(K)]
    if K > 12 and not allow_ill_conditioned:
        cond = np.linalg.cond(np.vander(np.array(b, dtype=float), increasing=True).T)
        raise IllConditioned(f"Seeley Vandermonde system with K = {K} has condition {cond:.3g}")
    # Gauss-Jordan elimination over the rationals.
    M = [[Fraction(bk) ** l for bk in b] + [Fraction(1)] for l in range(K)]
    for col in range(K):
        piv = next(r for r in range(col, K) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(K):
            if r != col and M[r][col] != 0:
                fac = M[r][col]
                M[r] = [vr - fac * vc for vr, vc in zip(M[r], M[col])]
    a = np.array([float(M[k][K]) for k in range(K)])
    return SeeleyData(K, a, np.array(b, dtype=float))


def smooth_transition(u: np.ndarray, shape: str = "bump") -> np.ndarray:
    """C-infinity monotone step: 1 for ``u <= 0``, 0 for ``u >= 1``."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    if shape == "bump":
        return 1.0 - _bump_cdf(2.0 * u - 1.0)
    if shape == "logistic":
        with np.errstate(divide="ignore", over="ignore"):
            e1 = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
            e0 = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        return e1 / (e0 + e1)
    raise InputError(f"unknown transition shape {shape!r}")


_BUMP_T = np.linspace(-1.0, 1.0, 40001)
_BUMP_CDF = None


def _bump_cdf(t: np.ndarray) -> np.ndarray:
    """Normalised cumulative integral of ``exp(-1/(1-s^2))`` on ``[-1, t]``."""
    global _BUMP_CDF
    if _BUMP_CDF is None:
        s = _BUMP_T
        with np.errstate(divide="ignore"):
            bump = np.where(np.abs(s) < 1, np.exp(-1.0 / np.maximum(1.0 - s * s, 1e-300)), 0.0)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (bump[1:] + bump[:-1]) * np.diff(s))])
        _BUMP_CDF = cdf / cdf[-1]
    return np.interp(t, _BUMP_T, _BUMP_CDF)


def seeley_extend(f: DiscreteField, K: int = 10, cutoff: float | None = None) -> DiscreteField:
    """Extend a field on a uniform half-line normal axis to a periodic box ``[-X, X)``.

    ``(E f)(t) = sum_k a_k phi(b_k t) f(b_k t)`` for ``t < 0`` with the cutoff
    ``phi = 1`` on ``[0, c]`` and ``0`` beyond ``2c``; ``c = X/4`` by default.
    """
    if not f.has_normal:
        raise InputError("field has no half-line normal axis")
    ax = f.axes[0]
    if ax.spacing != "uniform":
        raise InputError("Seeley extension needs a uniform normal grid")
    J, h = ax.count, ax.step
    c = ax.extent / 4.0 if cutoff is None else cutoff
    if 2 * c > ax.extent:
        raise InputError("cutoff support exceeds the sampled half-line")
    sd = seeley_data(K)
    ext = np.zeros((2 * J,) + f.values.shape[1:], dtype=complex)
    ext[J:] = f.values
    i = np.arange(1, J + 1)          # t = -i h, stored at index J - i
    for ak, bk in zip(sd.a, sd.b):
        idx = (-bk * i).astype(int)   # sample f at |b_k| i h
        phi = smooth_transition((idx * h - c) / c, "bump")
        ok = (idx < J) & (phi > 0)
        contrib = np.zeros_like(ext[:J])
        rows = (J - i)[ok]
        contrib[rows] = ak * phi[ok].reshape((-1,) + (1,) * (f.values.ndim - 1)) * f.values[idx[ok]]
        ext[:J] += contrib
    new_axis = Axis("normal", 2 * J, 2 * J * h, periodic=True, origin=-J * h)
    return DiscreteField(ext, (new_axis,) + f.axes[1:], f.anisotropy)


def restrict_half(ext: DiscreteField, like: DiscreteField) -> DiscreteField:
    J = like.axes[0].count
    return DiscreteField(ext.values[J:], like.axes, like.anisotropy)


def _analysis_field(f: DiscreteField, K: int = 10) -> DiscreteField:
    return seeley_extend(f, K) if f.has_normal else f


# ---------------------------------------------------------------------------
# Littlewood-Paley families
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LPFamily:
    """Discretised anisotropic LP family on one periodic analysis grid."""

    anisotropy: Anisotropy
    A: float
    B: float
    K: int
    shape: str
    axes: tuple[Axis, ...]
    profiles: np.ndarray
    retained: np.ndarray
    requested_K: int | None = None

    def matches(self, axes: Sequence[Axis]) -> bool:
        return tuple(axes) == self.axes

    def for_axes(self, axes: Sequence[Axis], anisotropy: Anisotropy | None = None) -> "LPFamily":
        if self.matches(axes) and anisotropy in (None, self.anisotropy):
            return self
        return build_lp_family(anisotropy or self.anisotropy, axes, self.A, self.B,
                               self.requested_K, self.shape)


def build_lp_family(a: Anisotropy, axes: Sequence[Axis], A: float = 1.0, B: float = 2.0,
                    K: int | None = None, shape: str = "bump") -> LPFamily:
    """Profiles ``phi_0 = chi(|xi|)`` and ``phi_k = chi(2^{-k}|xi|) - chi(2^{1-k}|xi|)``."""
    axes = tuple(axes)
    if a.n != len(axes):
        raise DimensionMismatch("anisotropy does not match the grid")
    if not 0 < A < B:
        raise InputError("need 0 < A < B")
    r = aniso_distance(frequency_mesh(axes), a)
    rmax = float(r.max())
    if K is None:
        Kused = max(0, int(math.ceil(math.log2(max(rmax, A) / A))))
    else:
        if K > 0 and 2.0 ** (K - 1) * A > rmax:
            raise BandExceedsGrid(f"level {K} lies beyond the grid band (max |xi| = {rmax:.3g})")
        Kused = K
    chi = lambda s: smooth_transition((s - A) / (B - A), shape)
    prof = [chi(r)]
    for k in range(1, Kused + 1):
        prof.append(chi(2.0 ** (-k) * r) - chi(2.0 ** (1 - k) * r))
    return LPFamily(a, A, B, Kused, shape, axes, np.array(prof), r <= 2.0 ** Kused * A, K)


def lp_pieces(f: DiscreteField, fam: LPFamily, seeley_K: int = 10) -> list[DiscreteField]:
    """``S_k f`` for k = 0..K; half-line fields are Seeley-extended then restricted."""
    g = _analysis_field(f, seeley_K)
    fam = fam.for_axes(g.axes)
    fh = _fft(g.values, g.ndim)
    out = []
    for prof in fam.profiles:
        mult = prof[..., None] if g.has_components else prof
        piece = g.with_values(_ifft(fh * mult, g.ndim))
        out.append(restrict_half(piece, f) if f.has_normal else piece)
    return out


# ---------------------------------------------------------------------------
# Weighted mixed norms
# ---------------------------------------------------------------------------

def _power_moments(a, b, gamma):
    """``int_a^b |x|^gamma dx`` and ``int_a^b |x|^gamma x dx`` for ``a, b`` of one sign."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sgn = np.where(b <= 0, -1.0, 1.0)
    lo, hi = np.minimum(np.abs(a), np.abs(b)), np.maximum(np.abs(a), np.abs(b))
    m0 = (hi ** (gamma + 1) - lo ** (gamma + 1)) / (gamma + 1)
    m1 = sgn * (hi ** (gamma + 2) - lo ** (gamma + 2)) / (gamma + 2)
    return m0, m1


def _hat_weights(nodes: np.ndarray, gamma: float) -> np.ndarray:
    """Product-integration weights: exact for ``|x|^gamma`` times a piecewise-linear function."""
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    if gamma == 0:
        left = right = 0.5 * h
    else:
        m0, m1 = _power_moments(a, b, gamma)
        left = (b * m0 - m1) / h
        right = (m1 - a * m0) / h
    w = np.zeros(len(nodes))
    w[:-1] += left
    w[1:] += right
    return w


def axis_quadrature(axis: Axis, gamma: float | None = None) -> np.ndarray:
    """Weights ``w_i`` with ``sum_i w_i g_i ~ int |x|^gamma g(x) dx`` over the axis.

    The weight is singular at ``x = 0`` (the boundary for a half-line axis,
    the torus point 0 for periodic axes).
    """
    if gamma is not None and gamma <= -1:
        raise NonIntegrableWeight(f"power weight with gamma = {gamma} is not locally integrable")
    g = 0.0 if gamma is None else float(gamma)
    if not axis.periodic:
        return _hat_weights(axis.points(), g)
    if g == 0.0:
        return np.full(axis.count, axis.step)
    # Torus distance to 0: ascending centred coordinates, loop closed at +L/2.
    # Zero is a grid node, so no interval straddles the singularity.
    x = axis.points()
    L = axis.extent
    xc = (x + L / 2) % L - L / 2
    if np.abs(xc).min() > 1e-12 * L:
        raise InputError("power weights on a periodic axis need 0 as a grid node")
    order = np.argsort(xc)
    nodes = np.concatenate([xc[order], [xc[order][0] + L]])
    w_nodes = _hat_weights(nodes, g)
    w = np.zeros(axis.count)
    np.add.at(w, order, w_nodes[:-1])
    w[order[0]] += w_nodes[-1]
    return w


def _normalise_p(p, n):
    if np.isscalar(p):
        return [float(p)] * n
    p = [float(v) for v in p]
    if len(p) != n:
        raise DimensionMismatch("one integrability exponent per axis required")
    return p


def _normalise_weights(weights, n):
    if weights is None:
        return [None] * n
    if isinstance(weights, dict):
        return [weights.get(i) for i in range(n)]
    weights = list(weights)
    if len(weights) != n:
        raise DimensionMismatch("one weight entry per axis required")
    return weights


def weighted_mixed_norm(f: DiscreteField, p=2.0, weights=None) -> float:
    """Iterated ``L_p`` norm, innermost axis (axis 0) first, with power weights per axis."""
    n = f.ndim
    ps = _normalise_p(p, n)
    ws = _normalise_weights(weights, n)
    for gmm in ws:
        if gmm is not None and gmm <= -1:
            raise NonIntegrableWeight(f"power weight with gamma = {gmm} is not locally integrable")
    g = f.magnitude()
    for ax, pk, gmm in zip(f.axes, ps, ws):
        if math.isinf(pk):
            g = g.max(axis=0)
            continue
        w = axis_quadrature(ax, gmm)
        g = np.tensordot(w, g ** pk, axes=(0, 0)) ** (1.0 / pk)
    return float(g)


# ---------------------------------------------------------------------------
# Norm specifications and norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormSpec:
    kind: str                       # MixedLp | Besov | TriebelLizorkin | BesselSobolev
    s: float = 0.0
    p: float | tuple = 2.0
    q: float = 2.0
    weights: tuple | None = None    # per-axis gamma or None

    def __post_init__(self):
        if self.kind not in ("MixedLp", "Besov", "TriebelLizorkin", "BesselSobolev"):
            raise InputError(f"unknown norm kind {self.kind!r}")
        ps = [self.p] if np.isscalar(self.p) else list(self.p)
        if any(not 1 < v < np.inf for v in ps):
            raise InputError("integrability exponents must lie in (1, inf)")
        if not 1 <= self.q <= np.inf:
            raise InputError("microscopic exponent must lie in [1, inf]")
        for gmm in self.weights or ():
            if gmm is not None and gmm <= -1:
                raise NonIntegrableWeight(f"power weight with gamma = {gmm} is not locally integrable")

    def with_s(self, s: float) -> "NormSpec":
        return replace(self, s=s)


def _lq(values: list, q: float):
    arr = np.asarray(values)
    if math.isinf(q):
        return arr.max(axis=0)
    return (np.abs(arr) ** q).sum(axis=0) ** (1.0 / q)


def space_norm(f: DiscreteField, spec: NormSpec, fam: LPFamily) -> float:
    """Besov, Triebel-Lizorkin, Bessel-potential or mixed Lebesgue norm of ``f``."""
    if spec.kind == "MixedLp":
        return weighted_mixed_norm(f, spec.p, spec.weights)
    if spec.kind == "BesselSobolev":
        return weighted_mixed_norm(bessel_potential(f, spec.s, f.get_anisotropy()), spec.p, spec.weights)
    pieces = lp_pieces(f, fam)
    scale = [2.0 ** (k * spec.s) for k in range(len(pieces))]
    if spec.kind == "Besov":
        terms = [sc * weighted_mixed_norm(pc, spec.p, spec.weights) for sc, pc in zip(scale, pieces)]
        return float(_lq(terms, spec.q))
    mags = [sc * pc.magnitude() for sc, pc in zip(scale, pieces)]
    return weighted_mixed_norm(f.with_values(_lq(mags, spec.q)), spec.p, spec.weights)


def bessel_multiplier(xi: np.ndarray, sigma: float, a: Anisotropy) -> np.ndarray:
    """``sum_k (1 + |xi_k|^2)^{sigma / (2 a_k)}`` over anisotropy blocks."""
    out = 0.0
    for sl, w in zip(a.block_slices(), a.weights):
        out = out + (1.0 + np.sum(xi[..., sl] ** 2, axis=-1)) ** (sigma / (2.0 * w))
    return out


def bessel_potential(f: DiscreteField, sigma: float, a: Anisotropy | None = None) -> DiscreteField:
    """Anisotropic Bessel potential; ``sigma = 0`` returns ``l * f`` for ``l`` blocks."""
    a = a or f.get_anisotropy()
    g = _analysis_field(f)
    out = apply_multiplier(g, bessel_multiplier(frequency_mesh(g.axes), sigma, a))
    return restrict_half(out, f) if f.has_normal else out


def parameter_bracket(xi: np.ndarray, mu: float, a: Anisotropy) -> np.ndarray:
    """``<xi, mu> = (1 + sum_j |xi_j|^{2/a_j} + mu^2)^{1/2}``."""
    return np.sqrt(aniso_distance(xi, a) ** 2 + 1.0 + mu ** 2)


def dilate(f: DiscreteField, factor: float) -> DiscreteField:
    """``f(delta_{1/factor} x)``: same samples on a grid stretched by ``factor^{a_j}``."""
    a = f.get_anisotropy()
    axes = tuple(ax.scaled(factor ** w) for ax, w in zip(f.axes, a.axis_weights()))
    return DiscreteField(f.values, axes, f.anisotropy)


def pardep_norm(f: DiscreteField, s: float, s0: float, mu: float, spec: NormSpec, fam: LPFamily,
                variant: str = "xi") -> float:
    """Parameter-dependent norms.

    * ``xi``: ``|| Xi_mu^{s-s0} f ||_{s0}`` with multiplier ``<xi, mu>^{s-s0}``;
    * ``sum``: ``||f||_s + <mu>^{s-s0} ||f||_{s0}``;
    * ``dilation``: ``<mu>^{s - sum_j a_j/p_j} ||f(delta_{1/<mu>} .)||_{B^s}``.
    """
    bracket = math.sqrt(1.0 + mu * mu)
    a = f.get_anisotropy()
    if variant == "xi":
        g = _analysis_field(f)
        h = apply_multiplier(g, parameter_bracket(frequency_mesh(g.axes), mu, a) ** (s - s0))
        h = restrict_half(h, f) if f.has_normal else h
        return space_norm(h, spec.with_s(s0), fam)
    if variant == "sum":
        return space_norm(f, spec.with_s(s), fam) + bracket ** (s - s0) * space_norm(f, spec.with_s(s0), fam)
    if variant == "dilation":
        ps = _normalise_p(spec.p, f.ndim)
        hom = sum(w / pk for w, pk in zip(a.axis_weights(), ps))
        g = dilate(f, bracket)
        return bracket ** (s - hom) * space_norm(g, replace(spec, kind="Besov", s=s), fam)
    raise InputError(f"unknown parameter-dependent variant {variant!r}")


# ---------------------------------------------------------------------------
# Trace and extension
# ---------------------------------------------------------------------------

def trace(f: DiscreteField, fam: LPFamily, cauchy_tol: float = 1e-3) -> DiscreteField:
    """``sum_k (S_k f)|_{x_1 = 0}`` on the boundary grid.

    Raises :class:`TraceDivergence` when the top piece still carries more
    than ``cauchy_tol`` of the partial sum.
    """
    if not f.has_normal:
        raise InputError("trace needs a half-line normal axis")
    pieces = lp_pieces(f, fam)
    parts = [pc.values[0] for pc in pieces]
    total = np.sum(parts, axis=0)
    ref = np.linalg.norm(total)
    if len(parts) > 2 and ref > 0 and np.linalg.norm(parts[-1]) > cauchy_tol * ref:
        raise TraceDivergence("Littlewood-Paley partial sums of the trace do not settle")
    bnd_aniso = None
    if f.anisotropy is not None and f.anisotropy.dims[0] == 1 and f.anisotropy.nblocks > 1:
        bnd_aniso = Anisotropy(f.anisotropy.dims[1:], f.anisotropy.weights[1:])
    return DiscreteField(total, f.axes[1:], bnd_aniso)


def rho_profile(x: np.ndarray, nodes: int = 64) -> np.ndarray:
    """``rho(x) = int psi(xi) e^{i x xi} dxi / int psi`` with the bump ``psi`` on ``[1, 2]``.

    So ``rho(0) = 1`` and ``rho^`` is supported in ``[1, 2]``.
    """
    t, wt = np.polynomial.legendre.leggauss(nodes)
    xi = 1.5 + 0.5 * t
    psi = np.exp(-1.0 / (1.0 - t * t)) * 0.5 * wt
    psi = psi / psi.sum()
    return np.exp(1j * np.multiply.outer(x, xi)) @ psi


def extend(g: DiscreteField, fam: LPFamily, normal_axis: Axis, a1: float = 1.0) -> DiscreteField:
    """``ext g = sum_k rho(2^{k a1} x_1) (S_k g)(x')``, truncated at the family's top level."""
    fam = fam.for_axes(g.axes, g.get_anisotropy())
    x1 = normal_axis.points()
    pieces = lp_pieces(g, fam)
    out = 0.0
    for k, pc in enumerate(pieces):
        prof = rho_profile(2.0 ** (k * a1) * x1)
        prof = prof.reshape((-1,) + (1,) * pc.values.ndim)
        out = out + prof * pc.values[None]
    aniso = None
    if g.anisotropy is not None:
        aniso = Anisotropy((1,) + g.anisotropy.dims, (a1,) + g.anisotropy.weights)
    return DiscreteField(out, (normal_axis,) + g.axes, aniso)


# ---------------------------------------------------------------------------
# Muckenhoupt characteristic of power weights
# ---------------------------------------------------------------------------

def _power_average(a: np.ndarray, b: float, beta: float) -> np.ndarray:
    """Average of ``|x|^beta`` over ``[a, b]`` (``b > 0``), in closed form."""
    F = lambda x: np.sign(x) * np.abs(x) ** (beta + 1) / (beta + 1)
    return (F(b) - F(a)) / (b - a)


def ap_interval_family(refinement: int) -> np.ndarray:
    """Left endpoints ``a`` of intervals ``[a, 1]``; nested in ``refinement``.

    Up to dilation and reflection every interval is of this form, and the
    characteristic of a power weight is invariant under both.
    """
    R = int(refinement)
    lin = np.arange(0, 2 ** R + 1) / 2.0 ** R
    geo = 2.0 ** (-np.arange(0, 4 * R + 1))
    pts = np.unique(np.concatenate([lin, geo, -lin, -geo]))
    return pts[pts < 1.0]


def ap_characteristic(gamma: float, p: float, refinement: int = 8) -> float:
    """Lower estimate of ``[|x|^gamma]_{A_p(R)}``: sup of the A_p product over a refined family.

    The product is ``avg(w) * avg(w^{-1/(p-1)})^{p-1}``.  Returns ``inf`` when
    ``w`` or its dual weight is not locally integrable.
    """
    if not p > 1:
        raise InputError("p must exceed 1")
    dual = -gamma / (p - 1.0)
    if gamma <= -1 or dual <= -1:
        return math.inf
    a = ap_interval_family(refinement)
    vals = _power_average(a, 1.0, gamma) * _power_average(a, 1.0, dual) ** (p - 1.0)
    return float(vals.max())


# ---------------------------------------------------------------------------
# Binary I/O
# ---------------------------------------------------------------------------

def _axis_to_json(ax: Axis) -> dict:
    return {"role": ax.role, "count": ax.count, "extent": ax.extent, "spacing": ax.spacing,
            "kappa": ax.kappa, "periodic": ax.periodic, "origin": ax.origin}


def save_field(f: DiscreteField, path: str | Path) -> tuple[Path, Path]:
    """Little-endian complex64 samples plus a JSON sidecar describing the grid."""
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    meta_path = path.with_suffix(".json")
    f.values.astype("<c8").tofile(bin_path)
    meta = {
        "axes": [_axis_to_json(a) for a in f.axes],
        "shape": list(f.values.shape),
        "dtype": "<c8",
    }
    if f.anisotropy is not None:
        meta["anisotropy"] = {"dims": list(f.anisotropy.dims), "weights": list(f.anisotropy.weights)}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return bin_path, meta_path


def load_field(path: str | Path) -> DiscreteField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    vals = np.fromfile(path.with_suffix(".bin"), dtype="<c8").reshape(meta["shape"])
    axes = tuple(Axis(**a) for a in meta["axes"])
    an = meta.get("anisotropy")
    aniso = Anisotropy(an["dims"], an["weights"]) if an else None
    return DiscreteField(vals.astype(complex), axes, aniso)
