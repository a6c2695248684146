import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from cylscat.complex import (CellComplex, CylinderSpec, _modp_rank, _signed_graph_rank,
                             attach_cylinder, betti_numbers, disk, flat_cylinder, generate_model,
                             integer_rank, les_ranks, read_mesh, refine, relative_betti_numbers,
                             write_mesh)
from cylscat.errors import (GenerationError, MeshParseError, ParameterError, StructureError)

from conftest import BUILDERS, fixture_ops

BETTI = {
    "flat_cylinder": ([1, 1, 0], [0, 1, 1]),
    "junction": ([1, 1, 0], [0, 1, 1]),
    "annulus": ([1, 1, 0], [0, 1, 1]),
    "disk": ([1, 0, 0], [0, 0, 1]),
    "genus1_one_hole": ([1, 2, 0], [0, 2, 1]),
}


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_betti_and_euler(name):
    M = fixture_ops(name).complex
    b, rel = BETTI[name]
    assert betti_numbers(M) == b
    assert relative_betti_numbers(M) == rel
    assert M.euler_characteristic() == b[0] - b[1] + b[2]
    assert M.orientable


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_boundary_of_boundary_is_zero(name):
    M = fixture_ops(name).complex
    for p in range(2, M.dim + 1):
        P = M.boundary_matrix(p - 1) @ M.boundary_matrix(p)
        assert P.count_nonzero() == 0 or np.abs(P.toarray()).max() == 0


def test_flat_cylinder_volumes():
    M = flat_cylinder(2.0, 1.0, 16)
    assert M.volume() == pytest.approx(2.0, abs=1e-13)
    assert M.boundary_volumes() == pytest.approx({"Y1": 1.0, "Y2": 1.0}, abs=1e-13)


def test_junction_area_is_exact():
    M = fixture_ops("junction").complex
    assert M.volume() == pytest.approx(3.0, abs=1e-12)
    assert M.boundary_volumes() == pytest.approx({"Y1": 2.0, "Y2": 1.0}, abs=1e-13)


def test_attach_cylinder_adds_volume():
    M = disk(1.0, 12)
    Ma = attach_cylinder(M, CylinderSpec(1.5, 6))
    vy = sum(M.boundary_volumes().values())
    assert Ma.volume() == pytest.approx(M.volume() + 1.5 * vy, rel=1e-13)
    assert betti_numbers(Ma) == betti_numbers(M)
    assert attach_cylinder(M, CylinderSpec(0.0)) is M


def test_attach_needs_collar():
    M = refine(flat_cylinder(2.0, 1.0, 8))
    with pytest.raises(StructureError):
        attach_cylinder(M, CylinderSpec(1.0, 2))


def test_cylinder_spec_validation():
    with pytest.raises(ParameterError):
        CylinderSpec(-1.0)
    with pytest.raises(ParameterError):
        CylinderSpec(1.0, 0)
    with pytest.raises(ParameterError):
        CylinderSpec(10.0, 1, max_thickness=1.0)


def test_generate_model_errors():
    with pytest.raises(ParameterError):
        generate_model("sphere")
    with pytest.raises(ParameterError):
        generate_model("disk", {"r": -1})
    with pytest.raises(ParameterError):
        generate_model("disk", {"bogus": 1})
    with pytest.raises(ParameterError):
        generate_model("disk", resolution=2)


def test_structure_errors():
    with pytest.raises(GenerationError):
        CellComplex([[0, 1, 2]], {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 5.0}).volumes(2)
    with pytest.raises(GenerationError):
        CellComplex([[0, 1, 2]], {(0, 1): 1.0, (1, 2): 1.0})
    with pytest.raises(GenerationError):
        # three triangles on one edge
        CellComplex([[0, 1, 2], [0, 1, 3], [0, 1, 4]],
                    {e: 1.0 for e in [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (0, 4), (1, 4)]})


def test_mesh_roundtrip(tmp_path):
    M = fixture_ops("junction").complex
    path = tmp_path / "j.mwce"
    write_mesh(M, path)
    R = read_mesh(path)
    for k in range(M.dim + 1):
        assert np.array_equal(R.cells[k], M.cells[k])
    assert np.allclose(R.edge_lengths, M.edge_lengths, rtol=0, atol=0)
    assert set(R.boundary) == set(M.boundary)
    assert set(R.collars) == set(M.collars)
    Ra = attach_cylinder(R, CylinderSpec(1.0, 4))
    Ma = attach_cylinder(M, CylinderSpec(1.0, 4))
    assert Ra.volume() == pytest.approx(Ma.volume(), rel=1e-14)


@pytest.mark.parametrize("text", [
    "mwce-mesh 2 2\n",
    "",
    "mwce-mesh 1 2\ncells 2 1\n0 1\n",
    "mwce-mesh 1 2\ncells 2 1\n0 1 2\nedgelen 3\n1\n1\n",
    "mwce-mesh 1 2\nfoo 1\n",
    "mwce-mesh 1 2\ncells 2 1\n0 1 2\ncells 1 3\n0 1\n0 2\n1 2\nedgelen 3\n1\n1\nx\n",
])
def test_mesh_parse_errors(tmp_path, text):
    path = tmp_path / "bad.mwce"
    path.write_text(text)
    with pytest.raises(MeshParseError):
        read_mesh(path)


def test_missing_mesh_file(tmp_path):
    with pytest.raises(MeshParseError):
        read_mesh(tmp_path / "nope.mwce")


def test_refine_keeps_topology_and_volume():
    M = flat_cylinder(2.0, 1.0, 8)
    R = refine(M)
    assert R.count(2) == 4 * M.count(2)
    assert betti_numbers(R) == betti_numbers(M)
    assert R.volume() == pytest.approx(M.volume(), rel=1e-13)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_integer_rank_methods_agree(m, n, seed):
    rng = np.random.default_rng(seed)
    # signed incidence-like matrices: at most two +-1 per column
    A = np.zeros((m, n), dtype=np.int64)
    for j in range(n):
        rows = rng.choice(m, size=min(m, rng.integers(0, 3)), replace=False)
        A[rows, j] = rng.choice([-1, 1], size=len(rows))
    S = sp.csc_matrix(A)
    r = np.linalg.matrix_rank(A.astype(float)) if A.any() else 0
    assert integer_rank(S) == r
    if A.any():
        assert _modp_rank(S) == r
        S.eliminate_zeros()
        assert _signed_graph_rank(S) == r


def test_les_rank_table_alternates():
    for name in sorted(BUILDERS):
        M = fixture_ops(name).complex
        tab = les_ranks(M)
        for row in tab:
            # dim H^k(M,Y) = rank(conn_{k-1}) + rank(j_k), dim H^k(M) = rank j + rank r
            assert row["b_abs"] == row["rank_j"] + row["rank_r"]
            assert row["b_Y"] == row["rank_r"] + row["rank_conn"]
        for k in range(1, len(tab)):
            assert tab[k]["b_rel"] == tab[k - 1]["rank_conn"] + tab[k]["rank_j"]
