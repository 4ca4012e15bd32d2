import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfspace_lab import verify as V
from halfspace_lab.core_model import clamped_plate, diagonal_system, laplace_system, FrequencyPoint
from halfspace_lab.errors import HypothesisViolated, InputError
from halfspace_lab.fnspace import Axis, NormSpec


# -- reports --------------------------------------------------------------------

def _report(mode, ratios, bound=10.0, negative=False):
    rep = V.RatioReport("x", bound, mode, negative_control=negative)
    for i, r in enumerate(ratios):
        rep.add({"i": i}, r, 1.0)
    return rep


def test_verdict_modes():
    assert _report("absolute", [0.2, 5.0]).passed
    assert not _report("absolute", [0.05, 1.0]).passed
    assert _report("spread", [100.0, 500.0]).passed
    assert not _report("spread", [1.0, 11.0]).passed
    assert _report("upper", [1e-9, 10.0]).passed
    assert not _report("upper", [10.5]).passed


def test_report_rejects_bad_config():
    with pytest.raises(InputError):
        V.RatioReport("x", 1.0, "median")
    with pytest.raises(InputError):
        V.RatioReport("x", 0.0)


def test_zero_over_zero_is_skipped():
    rep = V.RatioReport("x", 2.0)
    rep.add({}, 0.0, 0.0)
    assert rep.skipped == 1 and not rep.samples
    assert not rep.passed


def test_infinite_ratio_fails():
    rep = V.RatioReport("x", 1e9, "upper")
    rep.add({}, 1.0, 0.0)
    assert rep.ratios[0] == math.inf and not rep.passed and rep.spread == math.inf


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=20), st.floats(1.0, 1e4))
def test_spread_is_scale_invariant(ratios, scale):
    a = _report("spread", ratios, bound=1e9)
    b = _report("spread", [scale * r for r in ratios], bound=1e9)
    assert math.isclose(a.spread, b.spread, rel_tol=1e-12)
    assert a.spread >= 1.0


def test_negative_control_expectation():
    assert _report("upper", [20.0], negative=True).as_expected
    assert not _report("upper", [2.0], negative=True).as_expected
    assert _report("upper", [2.0]).as_expected


def test_missing_negative_controls():
    reps = [_report("upper", [1.0]), _report("upper", [20.0], negative=True)]
    reps[0].claim_id, reps[1].claim_id = "trace:beta0", "trace:negative"
    other = _report("upper", [1.0])
    other.claim_id = "embedding"
    assert V.missing_negative_controls(reps + [other]) == ["embedding"]
    # a negative control that passes does not count
    reps[1].samples[0].lhs = 1.0
    assert V.missing_negative_controls(reps) == ["trace"]


def test_report_csv_full_precision(tmp_path):
    rep = _report("upper", [1.0 / 3.0])
    lines = V.write_report_csv(rep, tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "claim_id,param_json,lhs,rhs,ratio"
    assert float(lines[1].split(",")[-1]) == 1.0 / 3.0


def test_summary_fields():
    s = _report("spread", [1.0, 2.0]).summary()
    assert s["spread"] == 2.0 and s["verdict"] == "pass" and s["samples"] == 2


# -- grids and helpers ------------------------------------------------------------

def test_sector_lambda_grid():
    grid = V.sector_lambda_grid([1.0, 10.0], math.pi / 2)
    assert len(grid) == 6
    assert max(abs(np.angle(z)) for z in grid) < math.pi / 2
    with pytest.raises(InputError):
        V.sector_lambda_grid([1.0], math.pi)


def test_trace_exponent_heat_scaling():
    # rho = 2m = 2, p = 2, gamma = 0: (s + 2 - 1/2) / 2
    assert V.trace_exponent(0.0, 2.0, 0, 0.0, 2.0) == 0.75
    assert V.trace_exponent(0.0, 2.0, 1, 0.0, 2.0) == 0.25
    # 1 - (1 + gamma)/(2p) at s = 0, rho = 2, |beta| = 0
    for gamma in (0.0, 0.5):
        assert math.isclose(V.trace_exponent(0.0, 2.0, 0, gamma, 2.0), 1 - (1 + gamma) / 4)


def test_embedding_hypothesis():
    assert V.embedding_hypothesis(1.5, 1.0, 1.0, 0.0, 2.0)
    assert not V.embedding_hypothesis(1.0, 1.0, 1.0, 0.0, 2.0)
    assert V.embedding_hypothesis(1.0, 0.0, 0.5, 0.0, 2.0)
    assert not V.embedding_hypothesis(1.0, 0.0, 1.0, 1.0, 2.0)


def test_band_limited_corpus_is_seeded():
    axes = (Axis.torus("tangential", 16),)
    a = V.band_limited_corpus(axes, 4, 2, seed=3)
    b = V.band_limited_corpus(axes, 4, 2, seed=3)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


# -- checks at small scale ----------------------------------------------------------

AXES2 = (Axis("normal", 128, 2 * math.pi), Axis.torus("tangential", 16))


def test_embedding_small():
    corpus = V.band_limited_corpus(AXES2, 6, 3, seed=1)
    rep = V.check_embedding(corpus, 1.5, 1.0, 1.0, 0.0)
    assert rep.passed and len(rep.samples) == 6
    assert rep.notes["half_corpus_max"] <= rep.ratios.max()


def test_embedding_hypothesis_violation():
    corpus = V.band_limited_corpus(AXES2, 2, 1, seed=1)
    with pytest.raises(HypothesisViolated):
        V.check_embedding(corpus, 1.0, 1.0, 1.0, 0.0)


def test_trace_hypotheses():
    with pytest.raises(HypothesisViolated):
        V.check_trace_estimate([], [0], s=0.6)
    with pytest.raises(HypothesisViolated):
        V.check_trace_estimate([], [2], s=0.0)
    with pytest.raises(InputError):
        V.check_trace_estimate([], [0])


def test_trace_small_run():
    normal = Axis.normal(193, 6.0)
    time = Axis("time", 96, 12.0, origin=-6.0)
    corpus = V.spacetime_corpus(3, 2, 5, normal, (), time)
    rep = V.check_trace_estimate(corpus, [0], bound=5.0)
    assert len(rep.samples) == 3 and np.all(np.isfinite(rep.ratios))
    assert rep.notes["sigma"] == 0.75


def test_intersection_small_run():
    axes = (Axis.torus("tangential", 32), Axis.torus("time", 32))
    corpus = V.band_limited_corpus(axes, 6, 3, seed=2)
    rep = V.check_intersection_rep(corpus, 1.0)
    assert rep.passed
    with pytest.raises(HypothesisViolated):
        V.check_intersection_rep(corpus, 0.0)


def test_kernel_mapping_small_run():
    tan = (Axis.torus("tangential", 16),)
    corpus = V.band_limited_corpus(tan, 4, 2, seed=4)
    rep = V.check_kernel_mapping(laplace_system(2), 10.0, corpus, NormSpec("TriebelLizorkin", 1.5, 2.0, 2.0))
    assert rep.passed and rep.notes["boundary_s"] == 1.0


def test_pardep_hypotheses():
    sys = laplace_system(2)
    with pytest.raises(HypothesisViolated):
        V.check_pardep_estimate(sys, [1.0], [0.4], s0=1.6)
    with pytest.raises(HypothesisViolated):
        V.check_pardep_estimate(sys, [1.0], [0.2], s0=0.4)


def test_pardep_small_run():
    rep = V.check_pardep_estimate(laplace_system(2), [1.0, 100.0], [0.4], 0.4, n_tangential=8, max_level=1)
    assert len(rep.samples) == 2 and rep.passed


def test_symbol_small_run():
    xi = V.symbol_grid(2, [0.1, 1.0, 10.0], 3)
    lams = [0.0] + V.sector_lambda_grid([0.1, 10.0, 1e3], math.pi / 4)
    rep = V.check_symbol_bound(diagonal_system(2, [1.0, 2.0]), math.pi / 4, xi, lams, alpha_max=1, bound=1e3)
    assert rep.passed and len(rep.samples) == 2 * 3
    neg = V.check_symbol_bound(laplace_system(2), math.pi / 4, xi, lams, alpha_max=0, extra_power=1.0, bound=5.0)
    assert not neg.passed


def test_symbol_needs_phi_above_angle():
    with pytest.raises(HypothesisViolated):
        V.check_symbol_bound(laplace_system(2), 0.0, [np.zeros(2)], [1.0])


def test_kernel_decay_reports():
    pts = [FrequencyPoint([x], lam) for x in (0.0, 10.0) for lam in (1.0, 100.0)]
    reps = V.check_kernel_decay(clamped_plate(2), pts, r_max=1, k_max=1)
    assert [r.claim_id for r in reps] == ["decay:r0k0", "decay:r0k1", "decay:r1k0", "decay:r1k1"]
    assert all(r.passed for r in reps)
