import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cylscat.bounds import (EXACT, UPPER, boundary_class, boundary_distance, comass_constant,
                            comass_proxy, distance_extension, effective_volume, full_torus_bounds,
                            sandwich_audit, stable_norm, two_component_constants)
from cylscat.complex import CellComplex, flat_cylinder, refine
from cylscat.dec import assemble
from cylscat.errors import BoundViolation, DegreeError, ParameterError
from cylscat.pipeline import analyze


@pytest.mark.parametrize("n,p,want,exact", [
    (2, 0, 1, True), (2, 1, 1, True), (3, 1, 1, True), (3, 2, 1, True),
    (4, 2, 2, True), (5, 2, 2, True), (5, 3, 2, True), (6, 3, 20, False),
])
def test_comass_constants(n, p, want, exact):
    assert comass_constant(n, p) == (want, exact)


def test_comass_degree_error():
    with pytest.raises(DegreeError):
        comass_constant(2, 3)


def test_effective_volume(flat_ops, disk_ops, oracle):
    v, err, mu = effective_volume(flat_ops, mu1=2 * math.pi)
    assert v == pytest.approx(oracle["flat_effective_volume"], rel=1e-12)
    assert err == 0.0
    v, _, mu = effective_volume(flat_ops)
    assert mu == pytest.approx(2 * math.pi, rel=1e-2)
    v, _, _ = effective_volume(disk_ops, mu1=1.0)
    assert v == pytest.approx(oracle["disk_effective_volume"], rel=2e-2)


def test_distance_upper_bound_refines():
    M = flat_cylinder(2.0, 1.0, 8)
    d0 = boundary_distance(M, "Y1", "Y2")
    d1 = boundary_distance(refine(M), "Y1", "Y2")
    assert d0 >= d1 >= 2.0 - 1e-12
    with pytest.raises(ParameterError):
        boundary_distance(M, "Y1", "Z")


def test_junction_distance(junction_ops):
    M = junction_ops.complex
    # the ramp between the two widths shortens the straight 2 by at most a layer
    assert abs(boundary_distance(M, "Y1", "Y2") - 2.0) <= 1.0 / 16


@pytest.mark.parametrize("name", ["flat_ops", "junction_ops"])
def test_mincut_equals_lp(name, request):
    ops = request.getfixturevalue(name)
    M = ops.complex
    z = boundary_class(M, {"Y1": 1, "Y2": 0})
    v_cut, f1, info = stable_norm(M, z)
    v_lp, f2, _ = stable_norm(M, z, method="lp")
    assert f1 == f2 == EXACT
    assert v_cut == pytest.approx(v_lp, rel=1e-9)
    assert v_cut <= M.boundary_volumes()["Y2"] + 1e-12


def test_mincut_is_max_flow_on_graph():
    G = nx.DiGraph()
    rng = np.random.default_rng(0)
    for _ in range(40):
        a, b = rng.integers(0, 10, 2)
        if a != b:
            G.add_edge(int(a), int(b), capacity=int(rng.integers(1, 100)))
    G.add_nodes_from([0, 9])
    cut, _ = nx.minimum_cut(G, 0, 9)
    assert cut == nx.maximum_flow_value(G, 0, 9)


def test_flat_stable_norms(flat_ops):
    M = flat_ops.complex
    z = boundary_class(M, {"Y1": 1, "Y2": 0})
    v, flag, _ = stable_norm(M, z, method="dim1_shortest_cycle", ops=flat_ops)
    assert flag == UPPER
    v_lp, _, _ = stable_norm(M, z, method="lp")
    assert v >= v_lp - 1e-12
    assert v_lp == pytest.approx(1.0, rel=1e-12)


def test_null_class_and_non_cycle(flat_ops):
    M = flat_ops.complex
    z = boundary_class(M, {"Y1": 1, "Y2": 1})
    # Y1 + Y2 bounds M
    assert stable_norm(M, z, method="lp")[0] == pytest.approx(0.0, abs=1e-9)
    assert stable_norm(M, np.zeros(M.count(1)))[0] == 0.0
    bad = np.zeros(M.count(1))
    bad[0] = 1.0
    with pytest.raises(ParameterError):
        stable_norm(M, bad, method="lp")
    with pytest.raises(ParameterError):
        stable_norm(M, np.zeros(3))
    with pytest.raises(ParameterError):
        stable_norm(M, boundary_class(M, {"Y1": 2, "Y2": 0}))


def _square(n=4):
    xy = np.array([(i / n, j / n) for j in range(n + 1) for i in range(n + 1)])
    tris = []
    for j in range(n):
        for i in range(n):
            v = j * (n + 1) + i
            tris += [[v, v + 1, v + n + 2], [v, v + n + 2, v + n + 1]]
    edges = {tuple(sorted((t[a], t[b]))) for t in tris for a, b in ((0, 1), (1, 2), (0, 2))}
    lengths = {e: float(np.linalg.norm(xy[e[0]] - xy[e[1]])) for e in edges}
    return CellComplex(tris, lengths), xy


SQUARE = _square()


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_comass_of_exact_linear_form(a, b):
    M, xy = SQUARE
    u = a * xy[:, 0] + b * xy[:, 1]
    val = comass_proxy(M, M.coboundary(0) @ u, 1)
    assert val == pytest.approx(math.hypot(a, b), rel=1e-9, abs=1e-12)


def test_distance_extension(flat_ops):
    M = flat_ops.complex
    u = distance_extension(M, {"Y1": 0.0, "Y2": 1.0})
    assert u.min() >= 0.0 and u.max() <= 1.0
    y1 = np.unique(M.cells[1][M.boundary["Y1"]])
    assert np.all(u[y1] == 0.0)


def test_sandwich_flat(flat_ops, oracle):
    A = analyze(flat_ops.complex, 0, (1.0, 2.0, 3.0), ops=flat_ops, exactness=False)
    b = A.bounds
    assert b.ok and not b.warnings
    assert b.C2 == pytest.approx(oracle["flat_C2"], abs=1e-6)
    assert b.t2 == pytest.approx(oracle["flat_t2"], abs=1e-6)
    assert b.C1 == pytest.approx(oracle["flat_C1"], rel=1e-2)
    assert b.to_csv().startswith("quantity,value,flag,margin")
    assert '"ok": true' in b.to_json()


def test_sandwich_violation_raises(flat_ops):
    A = analyze(flat_ops.complex, 0, (1.0, 2.0, 3.0), ops=flat_ops, exactness=False, bounds=False)
    A.report.T0 = 100 * A.report.T0
    # exact inputs, so a violated lower bound is an error
    with pytest.raises(BoundViolation):
        sandwich_audit(A.report, flat_ops, A.z, mu1=2 * math.pi)


def test_sandwich_degree_check(flat_ops):
    A = analyze(flat_ops.complex, 0, (1.0, 2.0, 3.0), ops=flat_ops, exactness=False, bounds=False)
    A.report.degree = 5
    with pytest.raises(DegreeError):
        sandwich_audit(A.report, flat_ops, A.z)


def test_torus_arithmetic():
    lo, hi = full_torus_bounds(1.0, 2.0, 3.0, 1.0, 2.0, vstar=4.0)
    assert lo == pytest.approx(2 * 0.5 * 1.0 / 3.0)
    assert hi == pytest.approx(2 * 0.5 * 4.0 / 4.0)
    lo2, hi2 = full_torus_bounds(1.0, 2.0, 3.0, 1.0, 2.0)
    # V* = Vol + 4 pi^2 l1 l2 max(l1, l2)
    assert hi2 == pytest.approx(0.25 * (3.0 + 16 * math.pi ** 2))
    C1, C2 = two_component_constants(2.0, 2.0 + 1 / math.pi, 1.0, 1.0, 2.0, 1.0)
    assert (C1, C2) == pytest.approx((2 + 1 / math.pi, 2.0))
