"""Batch front end.

Usage::

    halfspace-lab <task> --config <path> [--out <dir>] [--seed <n>] [--threads <n>]

Exit codes: 0 pass, 2 verification or certification failure, 3 input
error, 4 numerical guard.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from .conditions import ellipticity_angle, ls_grid, ls_scan
from .core_model import (
    BVSystem,
    FrequencyPoint,
    clamped_plate,
    diagonal_system,
    laplace_system,
)
from .errors import CertificationFailure, InputError, LabError, NumericalGuard
from .fnspace import Anisotropy, Axis, DiscreteField, NormSpec, build_lp_family, load_field, \
    random_band_limited, save_field, seeley_extend, space_norm
from .parallel import default_threads
from .poisson_kernels import build_kernel_set, write_kernel_csv
from .solvers import halfspace_bvp_solve, halfspace_full_solve, parabolic_solve, write_report_csv
from . import verify as V

log = logging.getLogger("halfspace_lab")

TASKS = ("check-ellipticity", "check-ls", "build-kernel", "solve-elliptic", "solve-parabolic", "norms", "verify")
EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_GUARD = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def load_schema() -> dict:
    text = resources.files("halfspace_lab").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


def resolve_config_path(path: str | Path) -> Path:
    """A filesystem path, or ``examples/<name>.json`` bundled with the package."""
    p = Path(path)
    if p.exists():
        return p
    if p.parent.name == "examples" or len(p.parts) == 1:
        bundled = resources.files("halfspace_lab").joinpath("examples", p.name)
        if bundled.is_file():
            return Path(str(bundled))
    raise InputError(f"config file {str(path)!r} not found")


@dataclass
class RunConfig:
    task: str
    system: dict | None = None
    grids: dict = field(default_factory=dict)
    norms: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            jsonschema.validate(d, load_schema())
        except jsonschema.ValidationError as exc:
            raise InputError(f"config does not match the schema: {exc.message}") from exc
        for key, val in d.get("tolerances", {}).items():
            if not val > 0:
                raise InputError(f"tolerance {key!r} must be positive")
        cfg = cls(**copy.deepcopy(d))
        if cfg.task != "norms" and cfg.task != "verify" and cfg.system is None:
            raise InputError(f"task {cfg.task!r} needs a system definition")
        if cfg.task == "norms" and not cfg.norms:
            raise InputError("task 'norms' needs at least one norm spec")
        if cfg.task == "verify" and not cfg.checks:
            raise InputError("task 'verify' needs at least one check")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        p = resolve_config_path(path)
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        out = {"task": self.task, "seed": self.seed}
        for key in ("system", "grids", "norms", "data", "checks", "tolerances", "output"):
            val = getattr(self, key)
            if val:
                out[key] = copy.deepcopy(val)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))


def _complex(v) -> complex:
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def system_from_config(d: dict) -> BVSystem:
    if "preset" not in d:
        return BVSystem.from_dict(d)
    name, n = d["preset"], int(d.get("dim", 2))
    if name == "laplace":
        return laplace_system(n, d.get("boundary", "dirichlet"))
    if name == "clamped_plate":
        return clamped_plate(n)
    if name == "diagonal":
        return diagonal_system(n, [_complex(s) for s in d.get("scales", [1.0, 2.0])], d.get("boundary", "dirichlet"))
    raise InputError(f"unknown system preset {name!r}")


def norm_spec_from_config(d: dict) -> NormSpec:
    w = d.get("weights")
    p = d.get("p", 2.0)
    return NormSpec(d.get("kind", "TriebelLizorkin"), float(d.get("s", 0.0)),
                    tuple(p) if isinstance(p, list) else float(p), float(d.get("q", 2.0)),
                    tuple(w) if w is not None else None)


def _lambdas(g: dict, phi: float) -> list[complex]:
    vals = [_complex(v) for v in g.get("values", [])]
    if "moduli" in g:
        vals += V.sector_lambda_grid(g["moduli"], phi, g.get("margin", 0.05))
    if not vals:
        raise InputError("lambda grid is empty")
    return vals


def _tangential_axes(cfg: RunConfig, n: int) -> tuple[Axis, ...]:
    t = cfg.grids.get("tangential", {})
    return tuple(Axis.torus("tangential", int(t.get("count", 16)), float(t.get("extent", 2 * math.pi)))
                 for _ in range(n - 1))


def _normal_axis(cfg: RunConfig, uniform: bool = False) -> Axis:
    g = cfg.grids.get("normal", {})
    return Axis.normal(int(g.get("count", 129)), float(g.get("extent", 10.0)),
                       graded=bool(g.get("graded", False)) and not uniform)


def _boundary_field(spec: dict, axes: Sequence[Axis], rng: np.random.Generator) -> DiscreteField:
    """Boundary datum from ``{"modes": [{"k": [...], "amp": ...}]}`` or ``{"random_level": L}``."""
    if "random_level" in spec:
        return random_band_limited(axes, int(spec["random_level"]), rng)
    mesh = np.meshgrid(*[a.points() for a in axes], indexing="ij")
    vals = np.zeros(tuple(a.count for a in axes), dtype=complex)
    for mode in spec.get("modes", []):
        phase = sum(k * x for k, x in zip(mode["k"], mesh))
        vals = vals + _complex(mode.get("amp", 1.0)) * np.exp(1j * phase)
    return DiscreteField(vals, axes)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _safe_name(claim_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", claim_id)


def emit_report(reports: Sequence[V.RatioReport], out_dir: str | Path, fmt: str = "csv",
                plots: bool = False) -> list[Path]:
    """One CSV per claim id (plus a JSON summary), or a sentinel when nothing survives."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    reports = [r for r in reports if r.samples]
    if not reports:
        p = out / "NO_SAMPLES"
        p.write_text("no samples\n")
        return [p]
    if fmt == "csv":
        for rep in reports:
            written.append(V.write_report_csv(rep, out / f"{_safe_name(rep.claim_id)}.csv"))
    elif fmt != "json":
        raise InputError(f"unknown report format {fmt!r}")
    summary = {"reports": [r.summary() for r in reports],
               "all_as_expected": all(r.as_expected for r in reports),
               "missing_negative_controls": V.missing_negative_controls(reports)}
    p = out / "summary.json"
    p.write_text(json.dumps(summary, sort_keys=True, indent=2, default=V._json_default, allow_nan=True) + "\n")
    written.append(p)
    if plots:
        from .plots import plot_ratio_report
        for rep in reports:
            written.append(plot_ratio_report(rep, out / f"{_safe_name(rep.claim_id)}.png"))
    return written


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=V._json_default) + "\n")
    return path


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------

@dataclass
class TaskResult:
    status: int
    artifacts: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _phi(cfg: RunConfig) -> float:
    return float(cfg.grids.get("phi", math.pi / 4))


def task_check_ellipticity(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    sys_ = system_from_config(cfg.system)
    cert = ellipticity_angle(sys_)
    phi = _phi(cfg)
    ok = cert.angle < phi
    summary = {"angle": cert.angle, "worst_xi": cert.worst_xi, "grid_size": cert.grid_size, "phi": phi,
               "verdict": "pass" if ok else "fail"}
    return TaskResult(EXIT_PASS if ok else EXIT_FAIL, [_write_json(out / "ellipticity.json", summary)], summary)


def task_check_ls(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    sys_ = system_from_config(cfg.system)
    g = cfg.grids.get("ls", {})
    pts = ls_grid(sys_.dim - 1, _phi(cfg), int(g.get("directions", 8)),
                  tuple(g.get("moduli", (0.25, 1.0, 4.0))), tuple(g.get("radii", (0.0, 0.5, 1.0, 2.0))))
    rep = ls_scan(sys_, pts, g.get("mode", "matrix"), cfg.tol("sigma_tol", 1e-10), threads=threads)
    p = out / "ls_scan.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"xi{i + 2}" for i in range(sys_.dim - 1)] + ["re_lambda", "im_lambda", "min_singular_value"])
        for row in rep.rows():
            w.writerow([_fmt(float(v)) for v in row])
    summary = {"satisfied": rep.satisfied, "min_singular_value": rep.min_singular_value,
               "failure_points": [[list(xi), [lam.real, lam.imag]] for xi, lam in rep.failure_points],
               "verdict": "pass" if rep.satisfied else "fail"}
    arts = [p, _write_json(out / "ls_summary.json", summary)]
    if cfg.output.get("plots", True):
        from .plots import plot_ls_scan
        arts.append(plot_ls_scan(rep, out / "ls_scan.png"))
    if not rep.satisfied:
        for xi, lam in rep.failure_points:
            print(f"LS failure at xi'={list(xi)} lambda={lam}", file=sys.stderr)
    return TaskResult(EXIT_PASS if rep.satisfied else EXIT_FAIL, arts, summary)


def task_build_kernel(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    sys_ = system_from_config(cfg.system)
    tan = _tangential_axes(cfg, sys_.dim)
    from .fnspace import frequency_mesh
    xis = frequency_mesh(tan).reshape(-1, sys_.dim - 1) if tan else np.zeros((1, 0))
    lams = _lambdas(cfg.grids.get("lambda", {"values": [1.0]}), _phi(cfg))
    pts = [FrequencyPoint(x, lam) for lam in lams for x in xis]
    kset = build_kernel_set(sys_, pts, threads=threads)
    x1 = _normal_axis(cfg).points()
    p = write_kernel_csv(kset, x1, out / "kernel.csv")
    summary = {"points": len(pts), "decay_constant": kset.decay_constant, "degree_tags": kset.degree_tags,
               "normal_points": len(x1), "verdict": "pass"}
    arts = [p, _write_json(out / "kernel_summary.json", summary)]
    if cfg.output.get("plots", True):
        from .plots import plot_kernel_profiles
        arts.append(plot_kernel_profiles(kset, x1, out / "kernel.png"))
    return TaskResult(EXIT_PASS, arts, summary)


def _solve_outputs(rep, out: Path, cfg: RunConfig, name: str) -> TaskResult:
    tol_i = cfg.tol("interior_residual", 1e-4)
    tol_b = cfg.tol("boundary_residual", 1e-6)
    ok = rep.interior_residual <= tol_i and all(b <= tol_b for b in rep.boundary_residuals)
    summary = dict(rep.summary(), verdict="pass" if ok else "fail",
                   tolerances={"interior_residual": tol_i, "boundary_residual": tol_b})
    arts = [write_report_csv(rep, out / f"{name}.csv"), _write_json(out / f"{name}_summary.json", summary)]
    arts += list(save_field(rep.solution, out / f"{name}_field"))
    if cfg.output.get("plots", True):
        from .plots import plot_field
        arts.append(plot_field(rep.solution, out / f"{name}.png"))
    return TaskResult(EXIT_PASS if ok else EXIT_FAIL, arts, summary)


def task_solve_elliptic(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    sys_ = system_from_config(cfg.system)
    rng = np.random.default_rng(cfg.seed)
    tan = _tangential_axes(cfg, sys_.dim)
    lam = _complex(cfg.data.get("lambda", 1.0))
    bspecs = cfg.data.get("boundary", [{"modes": [{"k": [1] * (sys_.dim - 1), "amp": 1.0}]}] * sys_.m)
    if len(bspecs) != sys_.m:
        raise InputError(f"need {sys_.m} boundary data entries")
    g = [_boundary_field(b, tan, rng) for b in bspecs]
    interior = cfg.data.get("interior")
    if interior:
        nax = _normal_axis(cfg, uniform=True)
        x1 = nax.points().reshape((-1,) + (1,) * len(tan))
        width = float(interior.get("width", 1.0))
        h = _boundary_field(interior, tan, rng)
        f = DiscreteField(np.exp(-(x1 / width) ** 2) * h.values[None], (nax,) + tan)
        rep = halfspace_full_solve(sys_, lam, f, g, threads=threads)
    else:
        rep = halfspace_bvp_solve(sys_, lam, g, _normal_axis(cfg), threads=threads)
    return _solve_outputs(rep, out, cfg, "solution")


def task_solve_parabolic(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    sys_ = system_from_config(cfg.system)
    rng = np.random.default_rng(cfg.seed)
    tan = _tangential_axes(cfg, sys_.dim)
    tg = cfg.grids.get("time", {})
    time = Axis.torus("time", int(tg.get("count", 16)), float(tg.get("extent", 2 * math.pi)))
    eta = float(cfg.data.get("eta", 0.0))
    bspecs = cfg.data.get("boundary", [{"modes": [{"k": [1] * (sys_.dim - 1) + [1], "amp": 1.0}]}] * sys_.m)
    if len(bspecs) != sys_.m:
        raise InputError(f"need {sys_.m} boundary data entries")
    g = [_boundary_field(b, tan + (time,), rng) for b in bspecs]
    rep = parabolic_solve(sys_, eta, g, _normal_axis(cfg), threads=threads)
    return _solve_outputs(rep, out, cfg, "parabolic")


def task_norms(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    specs = [norm_spec_from_config(d) for d in cfg.norms]
    fd = cfg.data.get("field", {})
    if "path" in fd:
        f = load_field(fd["path"])
    else:
        g = cfg.grids.get("field", {})
        counts = g.get("counts", [64, 64])
        axes = tuple(Axis.torus("tangential", int(c), float(g.get("extent", 2 * math.pi))) for c in counts)
        f = random_band_limited(axes, int(fd.get("random_level", 2)), np.random.default_rng(cfg.seed))
    analysis_axes = seeley_extend(f).axes if f.has_normal else f.axes
    fam = build_lp_family(f.get_anisotropy(), analysis_axes)
    rows = [[d.get("kind", "TriebelLizorkin"), spec.s, json.dumps(d, sort_keys=True), space_norm(f, spec, fam)]
            for d, spec in zip(cfg.norms, specs)]
    p = out / "norms.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "s", "spec_json", "norm"])
        for r in rows:
            w.writerow([r[0], _fmt(float(r[1])), r[2], _fmt(float(r[3]))])
    summary = {"norms": [r[3] for r in rows], "verdict": "pass"}
    return TaskResult(EXIT_PASS, [p, _write_json(out / "norms_summary.json", summary)], summary)


# -- verification checks -----------------------------------------------------

def _check_system(cfg: RunConfig, chk: dict) -> BVSystem:
    d = chk.get("system", cfg.system)
    if d is None:
        raise InputError(f"check {chk.get('id')!r} needs a system")
    return system_from_config(d)


def _run_pardep(cfg, chk, seed, threads):
    sys_ = _check_system(cfg, chk)
    phi = float(chk.get("phi", math.pi / 2))
    grid = V.sector_lambda_grid(chk.get("lambda_moduli", [1, 10, 100, 1000, 10000]), phi)
    spec = norm_spec_from_config(chk.get("norm", {}))
    return [V.check_pardep_estimate(
        sys_, grid, chk.get("t", [0.4, 1.4]), float(chk.get("s0", 0.4)), spec, seed=seed,
        bound=float(chk.get("bound", 50.0)), n_tangential=int(chk.get("n_tangential", 16)),
        max_level=int(chk.get("max_level", 2)), interior_data=bool(chk.get("interior_data", True)),
        boundary_shift=float(chk.get("boundary_shift", 0.0)), claim_id=chk["id"],
        negative_control=bool(chk.get("negative_control", False)), threads=threads)]


def _corpus_2d(chk: dict, seed: int) -> list[DiscreteField]:
    g = chk.get("grid", {})
    axes = (Axis("normal", int(g.get("normal_count", 256)), float(g.get("extent", 2 * math.pi))),
            Axis.torus("tangential", int(g.get("tangential_count", 16)), float(g.get("extent", 2 * math.pi))))
    c = chk.get("corpus", {})
    if c.get("kind", "random") == "packets":
        return V.packet_corpus(axes, [2.0 ** -k for k in range(int(c.get("scales", 6)))], localized=[0])
    return V.band_limited_corpus(axes, int(c.get("count", 100)), int(c.get("max_level", 5)), seed)


def _run_embedding(cfg, chk, seed, threads):
    corpus = _corpus_2d(chk, seed)
    return [V.check_embedding(corpus, float(chk["s"]), float(chk["gamma"]), float(chk["s_tilde"]),
                              float(chk["gamma_tilde"]), float(chk.get("p", 2.0)), bound=float(chk.get("bound", 2.0)),
                              claim_id=chk["id"], negative_control=bool(chk.get("negative_control", False)),
                              seed=seed)]


def _run_trace(cfg, chk, seed, threads):
    g = chk.get("grid", {})
    normal = Axis.normal(int(g.get("normal_count", 385)), float(g.get("normal_extent", 6.0)))
    te = float(g.get("time_extent", 12.0))
    time = Axis("time", int(g.get("time_count", 288)), te, origin=-te / 2)
    c = chk.get("corpus", {})
    corpus = []
    if c.get("random", 0):
        corpus += V.spacetime_corpus(int(c["random"]), int(c.get("max_level", 3)), seed, normal, (), time)
    if c.get("packets", 0):
        corpus += V.parabolic_packet_corpus(normal, (), time, [2 ** (-k / 2) for k in range(int(c["packets"]))])
    return [V.check_trace_estimate(corpus, chk.get("beta", [1]), float(chk.get("s", 0.0)),
                                   float(chk.get("gamma", 0.0)), exponent_shift=float(chk.get("exponent_shift", 0.0)),
                                   bound=float(chk.get("bound", 5.0)), claim_id=chk["id"],
                                   negative_control=bool(chk.get("negative_control", False)), seed=seed)]


def _run_intersection(cfg, chk, seed, threads):
    g = chk.get("grid", {})
    c = chk.get("corpus", {})
    if c.get("kind", "random") == "packets":
        axes = (Axis.torus("tangential", int(g.get("space_count", 512))), Axis.torus("time", int(g.get("time_count", 8))))
        corpus = V.packet_corpus(axes, [2.0 ** -k for k in range(int(c.get("scales", 8)))], localized=[0])
    else:
        axes = (Axis.torus("tangential", int(g.get("space_count", 64))), Axis.torus("time", int(g.get("time_count", 64))))
        corpus = V.band_limited_corpus(axes, int(c.get("count", 24)), int(c.get("max_level", 5)), seed,
                                       Anisotropy((1, 1), (0.5, 1.0)))
    return [V.check_intersection_rep(corpus, float(chk.get("s", 1.0)), space_shift=float(chk.get("space_shift", 0.0)),
                                     bound=float(chk.get("bound", 20.0)), claim_id=chk["id"],
                                     negative_control=bool(chk.get("negative_control", False)), seed=seed)]


def _run_kernel_mapping(cfg, chk, seed, threads):
    sys_ = _check_system(cfg, chk)
    tan = tuple(Axis.torus("tangential", int(chk.get("tangential_count", 32))) for _ in range(sys_.dim - 1))
    c = chk.get("corpus", {})
    corpus = V.band_limited_corpus(tan, int(c.get("count", 20)), int(c.get("max_level", 4)), seed)
    spec = norm_spec_from_config(chk.get("norm", {"s": 1.5}))
    return [V.check_kernel_mapping(sys_, _complex(chk.get("lambda", 10.0)), corpus, spec,
                                   boundary_shift=float(chk.get("boundary_shift", 0.0)),
                                   bound=float(chk.get("bound", 10.0)), claim_id=chk["id"],
                                   negative_control=bool(chk.get("negative_control", False)), seed=seed)]


def _run_symbol(cfg, chk, seed, threads):
    sys_ = _check_system(cfg, chk)
    phi = float(chk.get("phi", math.pi / 4))
    xi = V.symbol_grid(sys_.dim, np.logspace(*chk.get("radii_log10", [-2, 3]), int(chk.get("radii", 11))),
                       int(chk.get("directions", 4)), seed)
    lam = [0.0] + V.sector_lambda_grid(np.logspace(*chk.get("lambda_log10", [-2, 4]), int(chk.get("moduli", 13))), phi)
    bound = chk.get("bound")
    return [V.check_symbol_bound(sys_, phi, xi, lam, int(chk.get("alpha_max", 2)),
                                 extra_power=float(chk.get("extra_power", 0.0)),
                                 bound=math.inf if bound is None else float(bound), claim_id=chk["id"],
                                 negative_control=bool(chk.get("negative_control", False)))]


def _run_decay(cfg, chk, seed, threads):
    sys_ = _check_system(cfg, chk)
    phi = float(chk.get("phi", math.pi / 4))
    lams = V.sector_lambda_grid(chk.get("lambda_moduli", [1.0, 1e2, 1e4]), phi)
    xis = chk.get("xi", [0.0, 1.0, 10.0, 100.0])
    pts = [FrequencyPoint([x] + [0.0] * (sys_.dim - 2), lam) for x in xis for lam in lams]
    return V.check_kernel_decay(sys_, pts, bound=float(chk.get("bound", 1e3)), claim_id=chk["id"])


CHECKS = {
    "pardep": _run_pardep,
    "embedding": _run_embedding,
    "trace": _run_trace,
    "intersection": _run_intersection,
    "kernel_mapping": _run_kernel_mapping,
    "symbol": _run_symbol,
    "decay": _run_decay,
}


def run_checks(cfg: RunConfig, seed: int, threads: int) -> list[V.RatioReport]:
    reports = []
    for chk in cfg.checks:
        kind = chk["check"]
        if kind not in CHECKS:
            raise InputError(f"unknown check {kind!r}")
        log.info("running check %s", chk["id"])
        reports += CHECKS[kind](cfg, chk, int(chk.get("seed", seed)), threads)
    return reports


def task_verify(cfg: RunConfig, out: Path, threads: int) -> TaskResult:
    reports = run_checks(cfg, cfg.seed, threads)
    arts = emit_report(reports, out, "csv", plots=cfg.output.get("plots", True))
    ok = all(r.as_expected for r in reports)
    summary = {r.claim_id: r.summary() for r in reports}
    return TaskResult(EXIT_PASS if ok else EXIT_FAIL, arts, summary)


TASK_FUNCS = {
    "check-ellipticity": task_check_ellipticity,
    "check-ls": task_check_ls,
    "build-kernel": task_build_kernel,
    "solve-elliptic": task_solve_elliptic,
    "solve-parabolic": task_solve_parabolic,
    "norms": task_norms,
    "verify": task_verify,
}


def run_config(path: str | Path, task: str | None = None, out: str | Path | None = None,
               seed: int | None = None, threads: int | None = None) -> TaskResult:
    """Run one config; errors are mapped to exit codes, never raised."""
    try:
        cfg = RunConfig.load(path)
        if task is not None and task != cfg.task:
            raise InputError(f"config is for task {cfg.task!r}, not {task!r}")
        if seed is not None:
            cfg.seed = int(seed)
        out_dir = Path(out or cfg.output.get("dir", "halfspace_out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        threads = default_threads() if threads is None else int(threads)
        return TASK_FUNCS[cfg.task](cfg, out_dir, threads)
    except InputError as exc:
        return _error(EXIT_INPUT, exc)
    except NumericalGuard as exc:
        return _error(EXIT_GUARD, exc)
    except CertificationFailure as exc:
        return _error(EXIT_FAIL, exc)


def _error(code: int, exc: LabError) -> TaskResult:
    msg = f"{type(exc).__name__}: {exc}"
    print(msg, file=sys.stderr)
    return TaskResult(code, [], {"error": type(exc).__name__, "message": str(exc)})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfspace-lab", description=__doc__.split("\n\n")[0])
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    ap.add_argument("--threads", type=int, help="worker threads (default from HALFSPACE_LAB_THREADS)")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    res = run_config(args.config, args.task, args.out, args.seed, args.threads)
    for p in res.artifacts:
        print(p)
    verdict = res.summary.get("verdict")
    if verdict:
        print(f"verdict: {verdict}")
    return res.status


if __name__ == "__main__":
    sys.exit(main())
