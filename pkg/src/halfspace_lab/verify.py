"""Ratio harness for the quantitative estimates.

Every check evaluates both sides of an estimate on a seeded corpus and
collects ``lhs/rhs`` in a :class:`RatioReport`.  Three verdict modes:

* ``absolute``: every ratio lies in ``[1/C, C]``;
* ``spread``: ``max ratio / min ratio <= C`` (the unknown constant is
  factored out, which suits one-sided embeddings);
* ``upper``: every ratio is finite and ``<= C``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .conditions import ellipticity_angle, stable_roots
from .core_model import (
    Anisotropy,
    BVSystem,
    FrequencyPoint,
    principal_symbol,
)
from .errors import HypothesisViolated, InputError
from .fnspace import (
    Axis,
    DiscreteField,
    NormSpec,
    _lq,
    axis_quadrature,
    build_lp_family,
    frequency_mesh,
    random_band_limited,
    seeley_extend,
    smooth_transition,
    space_norm,
    weighted_mixed_norm,
)
from .poisson_kernels import decay_table
from .solvers import halfspace_bvp_solve, halfspace_full_solve

MODES = ("absolute", "spread", "upper")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class RatioSample:
    params: dict
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return math.inf if self.lhs else math.nan
        return self.lhs / self.rhs


@dataclass
class RatioReport:
    claim_id: str
    bound: float
    mode: str = "absolute"
    seed: int | None = None
    negative_control: bool = False
    samples: list[RatioSample] = field(default_factory=list)
    skipped: int = 0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"unknown verdict mode {self.mode!r}")
        if not self.bound > 0:
            raise InputError("acceptance constants must be positive")

    def add(self, params: dict, lhs: float, rhs: float) -> None:
        """Record a sample; ``0/0`` samples are skipped."""
        if lhs == 0 and rhs == 0:
            self.skipped += 1
            return
        self.samples.append(RatioSample(dict(params), float(lhs), float(rhs)))

    @property
    def ratios(self) -> np.ndarray:
        return np.array([s.ratio for s in self.samples])

    @property
    def spread(self) -> float:
        r = self.ratios
        if r.size == 0 or not np.all(np.isfinite(r)) or r.min() <= 0:
            return math.inf
        return float(r.max() / r.min())

    @property
    def passed(self) -> bool:
        r = self.ratios
        if r.size == 0 or not np.all(np.isfinite(r)):
            return False
        if self.mode == "absolute":
            return bool(np.all((r >= 1.0 / self.bound) & (r <= self.bound)))
        if self.mode == "spread":
            return self.spread <= self.bound
        return bool(np.all(r <= self.bound))

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def as_expected(self) -> bool:
        """Positive checks should pass, negative controls should fail."""
        return self.passed != self.negative_control

    def rows(self) -> list[list]:
        return [[self.claim_id, json.dumps(s.params, sort_keys=True, default=_json_default),
                 s.lhs, s.rhs, s.ratio] for s in self.samples]

    def summary(self) -> dict:
        r = self.ratios
        return {
            "claim_id": self.claim_id,
            "mode": self.mode,
            "bound": self.bound,
            "seed": self.seed,
            "negative_control": self.negative_control,
            "samples": len(self.samples),
            "skipped": self.skipped,
            "min_ratio": float(r.min()) if r.size else None,
            "max_ratio": float(r.max()) if r.size else None,
            "spread": self.spread,
            "verdict": self.verdict,
            "as_expected": self.as_expected,
            "notes": self.notes,
        }


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_report_csv(rep: RatioReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["claim_id", "param_json", "lhs", "rhs", "ratio"])
        for cid, pj, lhs, rhs, ratio in rep.rows():
            w.writerow([cid, pj, f"{lhs:.17g}", f"{rhs:.17g}", f"{ratio:.17g}"])
    return path


def missing_negative_controls(reports: Iterable[RatioReport]) -> list[str]:
    """Families (claim id prefix before ``:``) without a failing negative control."""
    reports = list(reports)
    families = {r.claim_id.split(":")[0] for r in reports}
    ok = {r.claim_id.split(":")[0] for r in reports if r.negative_control and not r.passed}
    return sorted(families - ok)


# ---------------------------------------------------------------------------
# Grids and corpora
# ---------------------------------------------------------------------------

def sector_lambda_grid(moduli: Sequence[float], phi: float, margin: float = 0.05) -> list[complex]:
    """Moduli times the rays ``{0, +-(pi - phi - margin)}``."""
    theta = math.pi - phi - margin
    if theta <= 0:
        raise InputError("phi + margin must stay below pi")
    return [r * np.exp(1j * a) for r in moduli for a in (0.0, theta, -theta)]


def band_limited_corpus(axes: Sequence[Axis], count: int, max_level: int, seed: int,
                        anisotropy: Anisotropy | None = None) -> list[DiscreteField]:
    """``count`` fields, field ``i`` on annulus ``i mod (max_level + 1)``."""
    rng = np.random.default_rng(seed)
    return [random_band_limited(axes, i % (max_level + 1), rng, anisotropy) for i in range(count)]


def packet_corpus(axes: Sequence[Axis], scales: Sequence[float], weights: Sequence[float] | None = None,
                  localized: Sequence[int] | None = None) -> list[DiscreteField]:
    """Wave packets ``exp(-|y|^2/2) e^{i y_0}`` in ``y_j = x_j / eps^{w_j}``.

    Only the axes listed in ``localized`` are scaled; the others stay constant.
    Periodic axes use centred coordinates, so packets sit at the weight's singularity.
    """
    axes = tuple(axes)
    weights = [1.0] * len(axes) if weights is None else list(weights)
    localized = list(range(len(axes))) if localized is None else list(localized)
    coords = []
    for ax in axes:
        x = ax.points()
        if ax.periodic:
            x = (x + ax.extent / 2) % ax.extent - ax.extent / 2
        coords.append(x)
    mesh = np.meshgrid(*coords, indexing="ij")
    out = []
    for eps in scales:
        arg = 0.0
        phase = 0.0
        for i in localized:
            y = mesh[i] / eps ** weights[i]
            arg = arg + y * y
            if i == localized[0]:
                phase = y
        out.append(DiscreteField(np.exp(-arg / 2) * np.exp(1j * phase), axes))
    return out


def _normal_axis_for(sys: BVSystem, lam: complex, tangential: Sequence[Axis], decay_lengths: float,
                     points_per_width: float, max_points: int = 1 << 15) -> Axis:
    """Uniform normal axis resolving the slowest decay and the fastest layer."""
    if tangential:
        xis = frequency_mesh(tangential).reshape(-1, len(tangential))
    else:
        xis = np.zeros((1, 0))
    # Extreme tangential frequencies bound the root moduli.
    norms = np.linalg.norm(xis, axis=1)
    picks = {int(np.argmin(norms)), int(np.argmax(norms))}
    slow, fast = math.inf, 0.0
    for i in picks:
        xi = xis[i] if xis.shape[1] else np.zeros(max(sys.dim - 1, 1))
        roots = stable_roots(sys, FrequencyPoint(xi, lam), shift=1.0)
        slow = min(slow, float(roots.imag.min()))
        fast = max(fast, float(np.abs(roots).max()))
    extent = decay_lengths / slow
    count = int(math.ceil(extent * points_per_width * fast)) + 1
    if count > max_points:
        raise InputError(f"normal grid would need {count} points")
    return Axis.normal(count, extent)


# ---------------------------------------------------------------------------
# Partial Littlewood-Paley decompositions
# ---------------------------------------------------------------------------

def partial_pieces(values: np.ndarray, axes: Sequence[Axis], sub: Sequence[int],
                   anisotropy: Anisotropy) -> tuple[list[np.ndarray], int]:
    """LP pieces of ``values`` acting only along the periodic axes ``sub``."""
    sub = tuple(sub)
    prof = build_lp_family(anisotropy, [axes[i] for i in sub]).profiles
    fh = np.fft.fftn(values, axes=sub)
    shape = [1] * values.ndim
    for i in sub:
        shape[i] = axes[i].count
    out = [np.fft.ifftn(fh * p.reshape(shape), axes=sub) for p in prof]
    return out, len(prof)


def _lp_along(values: np.ndarray, axis: int, p: float, w: np.ndarray) -> np.ndarray:
    if math.isinf(p):
        return np.abs(values).max(axis=axis)
    return np.tensordot(w, np.abs(values) ** p, axes=(0, axis)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Parameter-dependent estimate
# ---------------------------------------------------------------------------

def check_pardep_estimate(sys: BVSystem, lambda_grid: Sequence[complex], t_values: Sequence[float],
                          s0: float, spec: NormSpec | None = None, seed: int = 0, bound: float = 50.0,
                          n_tangential: int = 16, max_level: int = 2, interior_data: bool = True,
                          boundary_shift: float = 0.0, decay_lengths: float = 35.0,
                          points_per_width: float = 24.0, claim_id: str = "pardep",
                          negative_control: bool = False, threads: int | None = 1) -> RatioReport:
    """Two-sided ratio of the parameter-dependent estimate.

    LHS ``||u||_{t+2m} + |l|^{(t+2m-s0)/2m} ||u||_{s0}``; RHS ``||f||_t +
    |l|^{(t-s0)/2m} ||f||_{s0} + sum_j (||g_j||_{t+2m-m_j-(1+g)/p} +
    |l|^{(t+2m-m_j-(1+g)/p)/2m} ||g_j||_{L_p})``.  ``boundary_shift`` is added
    to the last power of ``|l|`` (negative control).
    """
    spec = spec or NormSpec("TriebelLizorkin", 0.0, 2.0, 2.0)
    if not np.isscalar(spec.p):
        raise InputError("the parameter-dependent check uses a scalar p")
    n, two_m, m = sys.dim, sys.order, sys.m
    gamma = (spec.weights or (None,))[0] or 0.0
    p = float(spec.p)
    lo, hi = (1 + gamma) / p - 1, (1 + gamma) / p + sys.m_star
    if not lo < s0 < hi:
        raise HypothesisViolated(f"s0 = {s0} outside ({lo:.4g}, {hi:.4g})")
    if any(t < s0 for t in t_values):
        raise HypothesisViolated("need t >= s0")
    bspec = NormSpec(spec.kind, 0.0, p, spec.q, tuple(spec.weights[1:]) if spec.weights else None)
    aniso = Anisotropy.isotropic(n)
    tan = tuple(Axis.torus("tangential", n_tangential) for _ in range(n - 1))
    rep = RatioReport(claim_id, bound, "absolute", seed, negative_control,
                      notes={"s0": s0, "t": list(t_values), "boundary_shift": boundary_shift})
    rng = np.random.default_rng(seed)
    bfam = build_lp_family(Anisotropy.isotropic(n - 1), tan) if tan else None
    for i, lam in enumerate(lambda_grid):
        lam = complex(lam)
        g = [sum(random_band_limited(tan, lev, rng).values for lev in range(max_level + 1))
             for _ in range(m)]
        g = [DiscreteField(v, tan) for v in g]
        nax = _normal_axis_for(sys, lam, tan, decay_lengths, points_per_width)
        kappa = 12.0 / nax.extent
        x1 = nax.points().reshape((-1,) + (1,) * len(tan))
        fvals = np.exp(-(kappa * x1) ** 2) * random_band_limited(tan, 0, rng).values[None] \
            if interior_data else np.zeros((nax.count,) + tuple(a.count for a in tan))
        f = DiscreteField(fvals, (nax,) + tan)
        rep_solve = halfspace_full_solve(sys, lam, f, g, residuals=False, threads=threads)
        u = rep_solve.solution
        fam = build_lp_family(aniso, seeley_extend(u).axes)
        absl = abs(lam)
        for t in t_values:
            lhs = space_norm(u, spec.with_s(t + two_m), fam) \
                + absl ** ((t + two_m - s0) / two_m) * space_norm(u, spec.with_s(s0), fam)
            rhs = 0.0
            if interior_data:
                rhs += space_norm(f, spec.with_s(t), fam) \
                    + absl ** ((t - s0) / two_m) * space_norm(f, spec.with_s(s0), fam)
            for j, gj in enumerate(g):
                sb = t + two_m - sys.boundary_orders[j] - (1 + gamma) / p
                rhs += space_norm(gj, bspec.with_s(sb), bfam) if tan else abs(gj.values).sum()
                rhs += absl ** (sb / two_m + boundary_shift) * weighted_mixed_norm(gj, p, bspec.weights)
            rep.add({"lambda": lam, "t": t, "normal_points": nax.count}, lhs, rhs)
    return rep


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------

def embedding_hypothesis(s: float, gamma: float, s_tilde: float, gamma_tilde: float, p: float,
                         a1: float = 1.0) -> bool:
    if gamma == gamma_tilde:
        return s >= s_tilde
    return gamma > gamma_tilde and s >= s_tilde + a1 * (gamma - gamma_tilde) / p - 1e-12


def check_embedding(corpus: Sequence[DiscreteField], s: float, gamma: float, s_tilde: float,
                    gamma_tilde: float, p: float = 2.0, q: float = 2.0, q_tilde: float = 2.0,
                    kind: str = "TriebelLizorkin", bound: float = 2.0, claim_id: str = "embedding",
                    negative_control: bool = False, seed: int | None = None) -> RatioReport:
    """``||f||_{F^{s~}(w_g~)} / ||f||_{F^s(w_g)}`` with power weights on axis 0.

    Upper-mode report; ``notes["half_corpus_max"]`` records the sup over the
    first half of the corpus so growth under corpus extension is visible.
    """
    if not corpus:
        raise InputError("empty corpus")
    a = corpus[0].get_anisotropy()
    a1 = float(a.axis_weights()[0])
    if not embedding_hypothesis(s, gamma, s_tilde, gamma_tilde, p, a1) and not negative_control:
        raise HypothesisViolated("embedding exponents violate s >= s~ + a1 (g - g~)/p")
    nd = corpus[0].ndim
    src = NormSpec(kind, s, p, q, (gamma,) + (None,) * (nd - 1))
    tgt = NormSpec(kind, s_tilde, p, q_tilde, (gamma_tilde,) + (None,) * (nd - 1))
    rep = RatioReport(claim_id, bound, "upper", seed, negative_control,
                      notes={"s": s, "gamma": gamma, "s_tilde": s_tilde, "gamma_tilde": gamma_tilde, "p": p})
    fam = None
    for i, f in enumerate(corpus):
        if fam is None or not fam.matches(f.axes if not f.has_normal else seeley_extend(f).axes):
            fam = build_lp_family(f.get_anisotropy(), f.axes if not f.has_normal else seeley_extend(f).axes)
        rep.add({"index": i}, space_norm(f, tgt, fam), space_norm(f, src, fam))
    half = rep.ratios[:max(1, len(rep.samples) // 2)]
    rep.notes["half_corpus_max"] = float(half.max()) if half.size else None
    return rep


# ---------------------------------------------------------------------------
# Traces of space-time fields
# ---------------------------------------------------------------------------

def trace_exponent(s: float, rho: float, beta_order: int, gamma: float, p: float) -> float:
    """``(s + rho - |beta| - (1+gamma)/p) / rho``."""
    return (s + rho - beta_order - (1.0 + gamma) / p) / rho


def _spatial_tl(values: np.ndarray, axes: Sequence[Axis], nsp: int, s: float, p: float, q: float,
                micro: float, gamma: float | None) -> float:
    """``L_q(time; F^s_{p,micro}(space, w_gamma))``; ``values`` fully periodic in space."""
    pieces, _ = partial_pieces(values, axes, range(nsp), Anisotropy.isotropic(nsp))
    mags = [2.0 ** (k * s) * np.abs(pc) for k, pc in enumerate(pieces)]
    g = _lq(mags, micro)
    return _restricted_mixed(g, axes, nsp, p, q, gamma)


def _restricted_mixed(g: np.ndarray, axes: Sequence[Axis], nsp: int, p: float, q: float,
                      gamma: float | None) -> float:
    """Mixed norm of a Seeley-extended array, integrating the half ``x_1 >= 0`` only."""
    J = g.shape[0] // 2
    g = g[J:]
    half = Axis.normal(J, axes[0].step * (J - 1))
    for i in range(len(axes)):
        ax = half if i == 0 else axes[i]
        pk = p if i < nsp else q
        w = axis_quadrature(ax, gamma if i == 0 else None)
        g = _lp_along(g, 0, pk, w)
    return float(g)


def check_trace_estimate(corpus: Sequence[DiscreteField], beta: Sequence[int], s: float = 0.0,
                         gamma: float = 0.0, p: float = 2.0, q: float = 2.0, rho: float = 2.0,
                         micro: float = 2.0, exponent_shift: float = 0.0, bound: float = 10.0,
                         claim_id: str = "trace", negative_control: bool = False,
                         seed: int | None = None) -> RatioReport:
    """``||tr D^beta u||_{F^{sigma,(1/rho,1)}_{(p,q),p}} / ||u||_{W^1_q(F^s) cap L_q(F^{s+rho})}``.

    Fields carry axes ``(x_1 half-line, x' torus..., t torus)``;
    ``sigma = trace_exponent(...) + exponent_shift / rho``.
    """
    beta = tuple(int(b) for b in beta)
    order = sum(beta)
    if not s < (1 + gamma) / p:
        raise HypothesisViolated("need s < (1 + gamma)/p")
    if not s + rho - order > (1 + gamma) / p:
        raise HypothesisViolated(f"|beta| = {order} violates s + rho - |beta| > (1 + gamma)/p")
    if not corpus:
        raise InputError("empty corpus")
    sigma = trace_exponent(s, rho, order, gamma, p) + exponent_shift / rho
    rep = RatioReport(claim_id, bound, "spread", seed, negative_control,
                      notes={"beta": list(beta), "sigma": sigma, "s": s, "rho": rho})
    for i, u in enumerate(corpus):
        if not u.has_normal or u.axes[-1].role != "time":
            raise InputError("trace corpus needs (normal, ..., time) axes")
        nsp = u.ndim - 1
        if len(beta) != nsp:
            raise InputError("beta must have one entry per spatial axis")
        ext = seeley_extend(u)
        vh = np.fft.fftn(ext.values, axes=tuple(range(u.ndim)))
        xi = frequency_mesh(ext.axes)
        mono = np.prod(xi[..., :nsp] ** np.asarray(beta), axis=-1)
        tau = xi[..., -1]
        full = np.fft.ifftn(vh * mono, axes=tuple(range(u.ndim)))
        J = u.axes[0].count
        bvals = full[J]
        baxes = ext.axes[1:]
        ba = Anisotropy((nsp - 1, 1), (1.0 / rho, 1.0)) if nsp > 1 else Anisotropy((1,), (1.0,))
        bfield = DiscreteField(bvals, baxes, ba)
        bspec = NormSpec("TriebelLizorkin", sigma, (p,) * (nsp - 1) + (q,), p)
        lhs = space_norm(bfield, bspec, build_lp_family(ba, baxes))
        dt = np.fft.ifftn(vh * (1j * tau), axes=tuple(range(u.ndim)))
        rhs = (_spatial_tl(ext.values, ext.axes, nsp, s, p, q, micro, gamma)
               + _spatial_tl(dt, ext.axes, nsp, s, p, q, micro, gamma)
               + _spatial_tl(ext.values, ext.axes, nsp, s + rho, p, q, micro, gamma))
        rep.add({"index": i}, lhs, rhs)
    return rep


def spacetime_corpus(count: int, max_level: int, seed: int, normal: Axis, tangential: Sequence[Axis],
                     time: Axis, envelope: float | None = None) -> list[DiscreteField]:
    """Random band-limited space-time fields restricted to ``x_1 >= 0``.

    A smooth cutoff brings each field to zero before the end of the normal axis.
    """
    rng = np.random.default_rng(seed)
    h = normal.step
    box = Axis("normal", 2 * (normal.count - 1), 2 * (normal.count - 1) * h, origin=0.0)
    axes = (box,) + tuple(tangential) + (time,)
    aniso = Anisotropy((1 + len(tangential), 1), (0.5, 1.0))
    x1 = normal.points()
    cut = smooth_transition((x1 - 0.5 * normal.extent) / (0.4 * normal.extent), "bump")
    cut = cut.reshape((-1,) + (1,) * (len(axes) - 1))
    out = []
    for i in range(count):
        fld = random_band_limited(axes, i % (max_level + 1), rng, aniso)
        out.append(DiscreteField(fld.values[:normal.count] * cut, (normal,) + tuple(tangential) + (time,)))
    return out


def parabolic_packet_corpus(normal: Axis, tangential: Sequence[Axis], time: Axis, scales: Sequence[float],
                            rho: float = 2.0) -> list[DiscreteField]:
    """Packets ``exp(-y^2/2 - s^2/2) e^{i(y + s)}`` with ``y = x_1/eps``, ``s = t/eps^rho``.

    Constant in ``x'``; the time axis is centred at 0.
    """
    x1 = normal.points()
    t = (time.points() + time.extent / 2) % time.extent - time.extent / 2
    shape = (normal.count,) + tuple(a.count for a in tangential) + (time.count,)
    out = []
    for eps in scales:
        y = (x1 / eps).reshape((-1,) + (1,) * (len(shape) - 1))
        st = (t / eps ** rho).reshape((1,) * (len(shape) - 1) + (-1,))
        vals = np.exp(-(y * y + st * st) / 2 + 1j * (y + st))
        out.append(DiscreteField(np.broadcast_to(vals, shape).copy(), (normal,) + tuple(tangential) + (time,)))
    return out


# ---------------------------------------------------------------------------
# Intersection representation
# ---------------------------------------------------------------------------

def check_intersection_rep(corpus: Sequence[DiscreteField], s: float, a_space: float = 0.5,
                           a_time: float = 1.0, p: float = 2.0, q: float = 2.0,
                           space_shift: float = 0.0, bound: float = 20.0,
                           claim_id: str = "intersection", negative_control: bool = False,
                           seed: int | None = None) -> RatioReport:
    """One-shot ``F^{s,a}_{(p,q),p}`` over ``F^{s/a_t}_{q,p}(t; L_p) + L_q(t; F^{s/a_x}_{p,p})``.

    Fields are periodic with axes ``(x..., t)``.
    """
    if not s > 0:
        raise HypothesisViolated("need s > 0")
    if not corpus:
        raise InputError("empty corpus")
    rep = RatioReport(claim_id, bound, "spread", seed, negative_control,
                      notes={"s": s, "a_space": a_space, "a_time": a_time, "space_shift": space_shift})
    for i, f in enumerate(corpus):
        nx = f.ndim - 1
        axes = f.axes
        aniso = Anisotropy((nx, 1), (a_space, a_time))
        spec = NormSpec("TriebelLizorkin", s, (p,) * nx + (q,), p)
        lhs = space_norm(DiscreteField(f.values, axes, aniso), spec, build_lp_family(aniso, axes))
        wx = [axis_quadrature(ax) for ax in axes[:nx]]
        wt = axis_quadrature(axes[-1])

        def lp_space(arr):
            for w in wx:
                arr = _lp_along(arr, 0, p, w)
            return arr

        tp, _ = partial_pieces(f.values, axes, (nx,), Anisotropy.isotropic(1))
        per = np.array([2.0 ** (k * s / a_time) * lp_space(pc) for k, pc in enumerate(tp)])
        time_part = float(_lp_along(_lq(list(per), p), 0, q, wt))
        sp, _ = partial_pieces(f.values, axes, tuple(range(nx)), Anisotropy.isotropic(nx))
        per = np.array([2.0 ** (k * (s / a_space + space_shift)) * lp_space(pc) for k, pc in enumerate(sp)])
        space_part = float(_lp_along(_lq(list(per), p), 0, q, wt))
        rep.add({"index": i}, lhs, time_part + space_part)
    return rep


# ---------------------------------------------------------------------------
# Poisson operator mapping
# ---------------------------------------------------------------------------

def check_kernel_mapping(sys: BVSystem, lam: complex, corpus: Sequence[DiscreteField], spec: NormSpec,
                         j: int = 0, boundary_shift: float = 0.0, bound: float = 10.0,
                         decay_lengths: float = 35.0, points_per_width: float = 24.0,
                         claim_id: str = "kernel_mapping", negative_control: bool = False,
                         seed: int | None = None) -> RatioReport:
    """``||OPK(k_j) g||_{F^s} / ||g||_{F^{s - m_j - (1+gamma)/p}}`` at fixed lambda.

    The boundary index is the isotropic form of the order shift at fixed
    lambda; ``boundary_shift`` is added to it (negative control).
    """
    if not corpus:
        raise InputError("empty corpus")
    gamma = (spec.weights or (None,))[0] or 0.0
    p = float(spec.p)
    sb = spec.s - sys.boundary_orders[j] - (1 + gamma) / p + boundary_shift
    bspec = NormSpec(spec.kind, sb, p, spec.q, tuple(spec.weights[1:]) if spec.weights else None)
    tan = corpus[0].axes
    nax = _normal_axis_for(sys, lam, tan, decay_lengths, points_per_width)
    rep = RatioReport(claim_id, bound, "spread", seed, negative_control,
                      notes={"lambda": [complex(lam).real, complex(lam).imag], "s": spec.s,
                             "boundary_s": sb, "normal_points": nax.count})
    zero = DiscreteField(np.zeros(corpus[0].values.shape, dtype=complex), tan)
    fam = bfam = None
    for i, g in enumerate(corpus):
        data = [zero] * sys.m
        data[j] = g
        u = halfspace_bvp_solve(sys, lam, data, nax, residuals=False).solution
        if fam is None:
            fam = build_lp_family(Anisotropy.isotropic(sys.dim), seeley_extend(u).axes)
            bfam = build_lp_family(Anisotropy.isotropic(sys.dim - 1), tan)
        lhs = space_norm(u, spec, fam)
        rhs = space_norm(g, bspec, bfam)
        rep.add({"index": i}, lhs, rhs)
    return rep


# ---------------------------------------------------------------------------
# Symbol bounds and kernel decay
# ---------------------------------------------------------------------------

def _symbol_family(sys: BVSystem, svec, xi: np.ndarray, lam: complex) -> np.ndarray:
    N = sys.state_dim
    s1, s2, s3 = svec
    R = np.linalg.inv(np.eye(N) * (1.0 + lam) + principal_symbol(sys, xi))
    return (s1 + s2 * lam + s3 * float(np.dot(xi, xi)) ** sys.m) * R


def _fd_derivative(fn, xi: np.ndarray, alpha: Sequence[int], h: float):
    """Nested central differences ``d^alpha fn`` at ``xi``."""
    todo = [i for i, a in enumerate(alpha) for _ in range(a)]

    def rec(x, rest):
        if not rest:
            return fn(x)
        e = np.zeros_like(x)
        e[rest[0]] = h
        return (rec(x + e, rest[1:]) - rec(x - e, rest[1:])) / (2 * h)

    return rec(np.asarray(xi, dtype=float), todo)


def symbol_grid(n: int, radii: Sequence[float], directions: int, seed: int = 0) -> list[np.ndarray]:
    """Points ``r * omega`` for seeded unit directions (including the axes)."""
    rng = np.random.default_rng(seed)
    dirs = [np.eye(n)[i] for i in range(n)]
    for _ in range(max(0, directions - n)):
        v = rng.normal(size=n)
        dirs.append(v / np.linalg.norm(v))
    return [r * d for r in radii for d in dirs]


def check_symbol_bound(sys: BVSystem, phi: float, xi_grid: Sequence[np.ndarray], lambda_grid: Sequence[complex],
                       alpha_max: int = 2, tuples=((0, 1, 0), (1, 0, 1)), rel_step: float = 1e-3,
                       extra_power: float = 0.0, bound: float = math.inf, claim_id: str = "symbol",
                       negative_control: bool = False) -> RatioReport:
    """Sups of ``<xi>^{|alpha|+extra} |D^alpha_xi (s1 + s2 l + s3 |xi|^{2m})(1+l+A(xi))^{-1}|``.

    One sample per ``(s, alpha)``; the ``lhs`` is the measured sup.
    """
    angle = ellipticity_angle(sys).angle
    if not phi > angle:
        raise HypothesisViolated(f"phi = {phi:.4g} does not exceed the ellipticity angle {angle:.4g}")
    n = sys.dim
    alphas = [a for k in range(alpha_max + 1) for a in _indices(n, k)]
    rep = RatioReport(claim_id, bound, "upper", None, negative_control,
                      notes={"phi": phi, "ellipticity_angle": angle, "extra_power": extra_power})
    for svec in tuples:
        for alpha in alphas:
            sup, arg = 0.0, None
            for xi in xi_grid:
                br = math.sqrt(1.0 + float(np.dot(xi, xi)))
                h = rel_step * br
                for lam in lambda_grid:
                    M = _fd_derivative(lambda x: _symbol_family(sys, svec, x, lam), xi, alpha, h)
                    val = br ** (sum(alpha) + extra_power) * np.linalg.norm(M, 2)
                    if val > sup:
                        sup, arg = val, (xi, lam)
            rep.add({"s": list(svec), "alpha": list(alpha),
                     "argmax_xi": arg[0], "argmax_lambda": complex(arg[1])}, sup, 1.0)
    return rep


def _indices(n: int, total: int):
    from .core_model import iter_multi_indices
    return list(iter_multi_indices(n, total))


def check_kernel_decay(sys: BVSystem, points: Sequence[FrequencyPoint], j: int = 0, r_max: int = 2,
                       k_max: int = 2, bound: float = 1e3, claim_id: str = "decay") -> list[RatioReport]:
    """One spread report per ``(r, k)`` row of the decay table."""
    rows, c = decay_table(sys, points, j, r_max, k_max)
    out = []
    for row in rows:
        rep = RatioReport(f"{claim_id}:r{row.r}k{row.k}", bound, "spread", None, False, notes={"c": c})
        for fp, v, fl in zip(points, row.values, row.flagged):
            rep.add({"r": row.r, "k": row.k, "xi": fp.xi_prime, "lambda": fp.lam, "flagged": fl},
                    math.inf if fl else v, 1.0)
        out.append(rep)
    return out
