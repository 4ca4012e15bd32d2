import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from halfspace_lab.core_model import FrequencyPoint, RescaledVars, clamped_plate, diagonal_system, laplace_system
from halfspace_lab.errors import SpectralGapTooSmall
from halfspace_lab.poisson_kernels import (
    boundary_rows,
    build_kernel_set,
    decay_table,
    kernel_derivative,
    kernel_entry,
    reduce_first_order,
    seminorm_table,
    spectral_projector,
    stable_boundary_solve,
    stable_projection,
    write_kernel_csv,
)

X1 = np.array([0.5, 1.0, 2.0])
# Frozen from oracles.plate_kernel(X1, 2.0, h) for h = (1, 0) and (0, 1)
PLATE_K1 = np.array([0.8676196611841999, 0.6090446822072169, 0.16428785716325447])
PLATE_K2 = 1j * np.array([0.31878647532835347, 0.38225893904519614, 0.219878790223155])


def rv(b, sigma):
    return RescaledVars(1.0, np.atleast_1d(np.asarray(b, dtype=float)), complex(sigma))


@given(st.floats(-3, 3), st.floats(0.1, 5))
def test_laplacian_companion_matrix(b, sigma):
    red = reduce_first_order(laplace_system(2), rv(b, sigma))
    np.testing.assert_allclose(red.A0, [[0, 1], [-(sigma + b * b), 0]], atol=1e-14)
    ev = sorted(np.linalg.eigvals(red.A0), key=lambda z: z.imag)
    w = 1j * math.sqrt(sigma + b * b)
    np.testing.assert_allclose(ev, [-w, w], rtol=1e-12, atol=1e-14)


def test_biharmonic_companion_eigenvalues():
    red = reduce_first_order(clamped_plate(2), rv(0.6, 1.3))
    ev = np.linalg.eigvals(red.A0)
    # char. poly sigma + (b^2 + tau^2)^2; all four roots
    ref = np.roots([1, 0, 2 * 0.36, 0, 0.36 ** 2 + 1.3])
    dist = np.abs(ev[:, None] - ref[None, :])
    assert sorted(dist.argmin(axis=1)) == [0, 1, 2, 3]
    assert dist.min(axis=1).max() < 1e-12


def test_stable_eigenvector_laplacian():
    st_ = stable_projection(reduce_first_order(laplace_system(2), rv(0.0, 1.0)))
    v = st_.Q[:, 0] / st_.Q[0, 0]
    np.testing.assert_allclose(v, [1, 1j], atol=1e-14)
    P = spectral_projector(st_)
    assert np.linalg.matrix_rank(P, tol=1e-10) == 1
    np.testing.assert_allclose(P @ P, P, atol=1e-13)


def test_outside_sector_trips_guard():
    with pytest.raises(SpectralGapTooSmall):
        stable_projection(reduce_first_order(laplace_system(2), rv(0.0, -1.0)))


@pytest.mark.parametrize("sys", [laplace_system(2), laplace_system(2, "neumann"), clamped_plate(2)])
def test_boundary_solve_right_inverse(sys):
    r = rv(0.7, 1.1 + 0.3j)
    st_ = stable_projection(reduce_first_order(sys, r))
    bs = stable_boundary_solve(sys, r, st_)
    np.testing.assert_allclose(boundary_rows(sys, r.b) @ bs.M, np.eye(sys.m), atol=1e-12)
    P = spectral_projector(st_)
    np.testing.assert_allclose(P @ bs.M, bs.M, atol=1e-12)


def test_dirichlet_M_maps_to_stable_vector():
    sys = laplace_system(2)
    r = rv(0.0, 1.0)
    bs = stable_boundary_solve(sys, r, stable_projection(reduce_first_order(sys, r)))
    np.testing.assert_allclose(bs.M[:, 0], [1, 1j], atol=1e-14)


@pytest.mark.parametrize("mod", [1.0, 10.0, 1e2, 1e3, 1e4])
@pytest.mark.parametrize("arg", [0.0, 2.0, -2.0])
def test_heat_kernel_oracle(mod, arg):
    lam = mod * np.exp(1j * arg)
    x1 = np.linspace(0, 5, 128)
    for xi in (0.0, 3.0, -17.0):
        e = kernel_entry(laplace_system(2), FrequencyPoint([xi], lam))
        got = e.eval(x1, 0)[:, 0, 0]
        ref = oracles.heat_kernel(x1, [xi], lam)
        assert np.max(np.abs(got - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_plate_kernel_frozen():
    e = kernel_entry(clamped_plate(2), FrequencyPoint([0.0], 1.0))
    np.testing.assert_allclose(e.eval(X1, 0)[:, 0, 0], PLATE_K1, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(e.eval(X1, 1)[:, 0, 0], PLATE_K2, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(e.eval(X1, 0)[:, 0, 0], oracles.plate_kernel(X1, 2.0, [1, 0]), rtol=1e-10, atol=1e-14)


def test_kernel_boundary_values():
    e = kernel_entry(clamped_plate(2), FrequencyPoint([1.3], 2.0 + 1.0j))
    np.testing.assert_allclose(e.eval([0.0], 0, 0)[0], [[1.0]], atol=1e-12)
    np.testing.assert_allclose(e.eval([0.0], 0, 1)[0], [[0.0]], atol=1e-12)
    np.testing.assert_allclose(e.eval([0.0], 1, 0)[0], [[0.0]], atol=1e-12)
    np.testing.assert_allclose(e.eval([0.0], 1, 1)[0], [[1.0]], atol=1e-12)


def test_diagonal_system_kernel_is_diagonal():
    sys = diagonal_system(2, [1.0, 4.0])
    xi, lam = 0.8, 3.0
    k = kernel_entry(sys, FrequencyPoint([xi], lam)).eval(X1, 0)
    w1 = np.sqrt(1 + lam + xi ** 2)
    w2 = np.sqrt((1 + lam) / 4 + xi ** 2)
    np.testing.assert_allclose(k[:, 0, 0], np.exp(-w1 * X1), rtol=1e-11)
    np.testing.assert_allclose(k[:, 1, 1], np.exp(-w2 * X1), rtol=1e-11)
    np.testing.assert_allclose(k[:, 0, 1], 0, atol=1e-13)


def test_kernel_derivative_in_lambda():
    fp = FrequencyPoint([0.5], 2.0)
    d = kernel_derivative(laplace_system(2), fp, X1, 0, gamma=1)[:, 0, 0]
    w = math.sqrt(1 + 2.0 + 0.25)
    np.testing.assert_allclose(d, -X1 / (2 * w) * np.exp(-w * X1), rtol=1e-6)


def decade_points(order):
    pts = []
    for lam in (1.0, 1e2, 1e4):
        for arg in (0.0, 2.3, -2.3):
            for xi in (0.0, 1.0, 10.0, 100.0):
                pts.append(FrequencyPoint([xi], lam * np.exp(1j * arg)))
    return pts


@pytest.mark.parametrize("sys", [laplace_system(2), clamped_plate(2)])
def test_decay_table_bounded(sys):
    rows, c = decay_table(sys, decade_points(sys.order), 0, 2, 2)
    assert c > 0
    for row in rows:
        assert row.bounded
        assert row.spread <= 1e3


def test_heat_seminorm_spread():
    pts = [FrequencyPoint([0.0], 10.0 ** k) for k in range(7)]
    row = seminorm_table(laplace_system(2), pts)[0]
    # ||exp(-omega x)||_L1 = 1/Re omega against <xi', lambda>^{-1/2}
    for fp, v in zip(pts, row.values):
        omega = np.sqrt(1 + fp.lam)
        bracket = math.sqrt(1 + abs(fp.lam) ** 2)
        assert v == pytest.approx(bracket ** 0.5 / omega.real, rel=1e-4)
    assert row.spread <= 10


def test_weight_insertion_seminorm():
    pts = [FrequencyPoint([0.0], 10.0 ** k) for k in range(7)]
    row = seminorm_table(laplace_system(2), pts, orders=((1, 0, (), 0),))[0]
    for fp, v in zip(pts, row.values):
        omega = np.sqrt(1 + fp.lam).real
        bracket = math.sqrt(1 + abs(fp.lam) ** 2)
        assert v == pytest.approx(bracket ** 1.0 / omega ** 2, rel=1e-4)
    assert row.spread <= 10


def test_kernel_csv(tmp_path):
    kset = build_kernel_set(laplace_system(2), [FrequencyPoint([1.0], 1.0), FrequencyPoint([2.0], 3.0j)])
    p = write_kernel_csv(kset, [0.0, 0.5], tmp_path / "k.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "x1,xi2,re_lambda,im_lambda,re_k1_11,im_k1_11"
    assert len(lines) == 5
    assert float(lines[1].split(",")[4]) == 1.0
    assert kset.degree_tags == [-0.5]
