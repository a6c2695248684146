import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from cylscat import dec
from cylscat.complex import CellComplex, flat_cylinder, refine
from cylscat.dec import (assemble, boundary_spectrum, count_zero, hodge_pairing, richardson_error,
                         richardson_extrapolate, smallest_eigs, whitney_mass)
from cylscat.errors import AssemblyError, DegreeError, GenerationError

from conftest import fixture_ops


def circle(n, length=1.0):
    top = [[i, (i + 1) % n] for i in range(n)]
    return CellComplex(top, {tuple(sorted(e)): length / n for e in top})


def test_mass_matrices_spd(any_ops):
    _, ops = any_ops
    for p in range(ops.dim + 1):
        A = ops.mass[p].toarray()
        assert np.abs(A - A.T).max() < 1e-14
        np.linalg.cholesky(A)


def test_mass_of_constant_is_volume(any_ops):
    _, ops = any_ops
    one = np.ones(ops.complex.count(0))
    assert one @ ops.mass[0] @ one == pytest.approx(ops.complex.volume(), rel=1e-12)


@given(st.integers(0, 10 ** 6))
def test_codifferential_adjoint(seed):
    ops = fixture_ops("junction")
    rng = np.random.default_rng(seed)
    for p in (1, 2):
        a = rng.standard_normal(ops.complex.count(p - 1))
        b = rng.standard_normal(ops.complex.count(p))
        lhs = ops.inner(p, ops.D[p - 1] @ a, b)
        rhs = ops.inner(p - 1, a, ops.codifferential(p, b))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_laplacian_kernel_is_harmonic(flat_ops):
    L = flat_ops.laplacian(1)
    assert np.abs((L - L.T).toarray()).max() < 1e-12
    w, V = smallest_eigs(L, flat_ops.mass[1], 3)
    assert count_zero(w)[0] == 1
    h = V[:, 0]
    assert np.abs(flat_ops.D[1] @ h).max() < 1e-8
    assert np.abs(flat_ops.D[0].T @ (flat_ops.mass[1] @ h)).max() < 1e-8


def test_circle_first_eigenvalue(oracle):
    vals = []
    for n in (64, 128):
        ops = assemble(circle(n))
        vals.append(boundary_spectrum(ops, 0).nu1)
    ref = oracle["circle_nu1"]
    assert abs(vals[1] - ref) / ref < 1e-3
    assert abs(vals[1] - ref) < abs(vals[0] - ref)
    assert abs(richardson_extrapolate(vals[1], vals[0]) - ref) < 0.05 * abs(vals[1] - ref)
    assert richardson_error(vals[1], vals[0]) == pytest.approx(abs(vals[1] - ref), rel=0.05)


def test_boundary_spectrum_flat(flat_ops, oracle):
    s = boundary_spectrum(flat_ops, 0)
    assert s.zero_count == 2 and s.betti == 2
    assert s.nu1 == pytest.approx(oracle["circle_nu1"], rel=2e-2)
    assert s.mu1 == pytest.approx(math.sqrt(s.nu1))
    s1 = boundary_spectrum(flat_ops, 1)
    # kernel of the combined degree 0 and 1 operator
    assert s1.zero_count == 4
    assert s1.nu1 == pytest.approx(s.nu1, rel=1e-9)
    with pytest.raises(DegreeError):
        boundary_spectrum(flat_ops, 2)


def test_count_zero():
    assert count_zero(np.array([1e-15, 2e-14, 3.0, 4.0])) == (2, 3.0)
    assert count_zero(np.zeros(3))[0] == 3
    assert count_zero(np.zeros(0)) == (0, None)


def test_sparse_and_dense_eigs_agree(monkeypatch):
    ops = assemble(circle(60))
    A, B = ops.stiffness(0), ops.mass[0]
    wd, _ = smallest_eigs(A, B, 5)
    monkeypatch.setattr(dec, "DENSE_LIMIT", 10)
    ws, _ = smallest_eigs(A, B, 5)
    assert np.allclose(wd, ws, atol=1e-8)


def test_wedge_pairing_antisymmetry_on_circle(flat_ops):
    view = flat_ops.view
    Y = view.Y
    rng = np.random.default_rng(1)
    f = rng.standard_normal(Y.count(0))
    g = rng.standard_normal(Y.count(0))
    # int f dg = - int g df on a closed curve
    lhs = hodge_pairing(view, f, Y.coboundary(0) @ g, 0)
    rhs = hodge_pairing(view, g, Y.coboundary(0) @ f, 0)
    assert lhs == pytest.approx(-rhs, abs=1e-12)
    one = np.ones(Y.count(0))
    assert hodge_pairing(view, one, Y.coboundary(0) @ one, 0) == 0.0


def test_degenerate_cell_rejected():
    with pytest.raises((AssemblyError, GenerationError)):
        M = CellComplex([[0, 1, 2]], {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 2.0})
        assemble(M)


def test_dump(tmp_path, flat_ops):
    path = tmp_path / "m.txt"
    flat_ops.dump(path, 0)
    rows = np.loadtxt(path)
    A = sp.coo_matrix((rows[:, 2], (rows[:, 0].astype(int), rows[:, 1].astype(int))),
                      shape=flat_ops.mass[0].shape)
    assert np.abs((A - flat_ops.mass[0]).toarray()).max() == 0.0


def test_mass_refines_consistently():
    M = flat_cylinder(2.0, 1.0, 8)
    R = refine(M)
    for p in range(3):
        m = whitney_mass(R, p)
        assert m.shape[0] == R.count(p)
