import numpy as np
import pytest
from hypothesis import given, strategies as st

from cylscat.errors import RankError
from cylscat.les import (characteristic_coordinates, exactness_audit, image_of_restriction,
                         numerical_rank, s_zero, star_matrix)

from conftest import fixture_ops


def test_exactness_dims(any_ops, oracle):
    name, ops = any_ops
    rep = exactness_audit(ops)
    assert rep.exact
    want = oracle["les_dims"][name]
    assert list(rep.dims()[:len(want)]) == want
    for k, m in rep.maps.items():
        if "after_previous" in m:
            assert m["after_previous"] < 1e-8, k
    assert rep.to_csv().startswith("node,dim")


def test_s_zero_involution(any_ops):
    _, ops = any_ops
    for p in range(ops.dim):
        z = s_zero(ops, p)
        k = z.S0.shape[0]
        assert np.abs(z.S0 @ z.S0 - np.eye(k)).max() < 1e-12
        assert np.abs(z.S0 - z.S0.T).max() < 1e-12
        assert z.n_plus == image_of_restriction(ops, p).rank
        assert z.n_plus + z.n_minus == k


def test_star_relates_eigenspaces(any_ops):
    _, ops = any_ops
    for p in range(ops.dim):
        z = s_zero(ops, p)
        assert z.eps_star < 1e-8
        X, Xo, defect = star_matrix(ops, p)
        if Xo.size:
            assert np.abs(Xo.T @ Xo - np.eye(Xo.shape[1])).max() < 1e-10


def test_junction_characteristic_scattering(junction_ops, oracle):
    ops = junction_ops
    z = s_zero(ops, 0)
    C, _ = characteristic_coordinates(ops, 0)
    S = z.in_basis(C)
    assert S[0, 0] == pytest.approx(oracle["junction_r11"], abs=1e-10)
    # column i is the image of the characteristic function of component i
    assert S[1, 0] == pytest.approx(oracle["junction_r12"], abs=1e-10)
    assert S[0, 1] == pytest.approx(2 - oracle["junction_r12"], abs=1e-10)
    assert S[1, 1] == pytest.approx(-oracle["junction_r11"], abs=1e-10)


def test_numerical_rank_band():
    assert numerical_rank(np.diag([1.0, 1e-3, 0.0]))[0] == 2
    assert numerical_rank(np.zeros((0, 3)))[0] == 0
    with pytest.raises(RankError):
        numerical_rank(np.diag([1.0, 1e-8]))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10 ** 6))
def test_numerical_rank_of_products(m, n, seed):
    rng = np.random.default_rng(seed)
    r = min(m, n, int(rng.integers(0, min(m, n) + 1)))
    A = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    try:
        got, _ = numerical_rank(A)
    except RankError:
        return
    assert got == r
