"""Acceptance suite.  Each test prints one PASS/FAIL line and then asserts.

The lines are collected again in the terminal summary of every pytest run.
"""
import math
import sys
import time

import networkx as nx
import numpy as np
import pytest

from cylscat.bounds import boundary_class, boundary_distance, stable_norm
from cylscat.cli import _order
from cylscat.complex import annulus, disk, flat_cylinder, genus1_one_hole, junction, refine
from cylscat.dec import assemble
from cylscat.les import exactness_audit, image_of_restriction, s_zero
from cylscat.modes import PiecewiseCylinderModel, oracle_T0, s_matrix, time_delay, time_delay_fd
from cylscat.pipeline import analyze, component_thresholds
from cylscat.scatlen import q_monotone

JUNCTION_A = (0.5, 0.75, 1.0, 1.25, 2.0, 2.5, 3.0)
LES_DIMS = {
    "disk": [0, 1, 1, 0, 0, 1, 1, 0],
    "annulus": [0, 1, 2, 1, 1, 2, 1, 0],
    "genus1_one_hole": [0, 1, 1, 2, 2, 1, 1, 0],
}

_results = {}


def _emit(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    _results[n] = line
    print(line)
    return ok


@pytest.fixture(scope="module")
def junction32():
    t = time.perf_counter()
    M = junction(resolution=32)
    A = analyze(M, 0, JUNCTION_A, thickness=1 / 32, exactness=False)
    return A, time.perf_counter() - t


def random_models(seed=0, count=5):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        k = rng.integers(1, 5)
        segs = tuple((float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.5, 3.0))) for _ in range(k))
        out.append(PiecewiseCylinderModel(segs))
    return out


def test_flat_cylinder_exactness():
    t0 = time.perf_counter()
    M = flat_cylinder(2.0, 1.0, 32)
    A = analyze(M, 0, (1.0, 2.0, 3.0), bounds=False, exactness=False)
    elapsed = time.perf_counter() - t0
    r = A.report
    slope = abs(r.slope[0, 0] - 1.0)
    icpt = abs(r.intercept[0, 0] - 1.0)
    T = np.abs(r.T0 - 2.0 * np.eye(2)).max()
    ok = slope <= 1e-8 and icpt <= 1e-8 and T <= 1e-7 and elapsed < 10
    assert _emit(1, ok, f"slope err {slope:.1e}, intercept err {icpt:.1e}, "
                        f"|T0-2| {T:.1e}, {elapsed:.1f} s")


def test_disk_closed_form_and_order():
    ts, refs = [], []
    for res in (16, 32, 64):
        M = disk(1.0, res)
        A = analyze(M, 1, (1.0, 2.0, 3.0), bounds=False, exactness=False)
        ts.append(float(A.report.eigenvalues[0]))
        refs.append(2 * M.volume() / sum(M.boundary_volumes().values()))
    rel32 = abs(ts[1] - refs[1]) / refs[1]
    order = _order((16, 32, 64), ts)
    ok = rel32 <= 0.02 and order is not None and order >= 1
    assert _emit(2, ok, f"res 32 rel err {rel32:.1e}, self-convergence order {order:.2f}")


def test_junction_oracle(junction32):
    A, elapsed = junction32
    o = oracle_T0(PiecewiseCylinderModel(((1.0, 2.0), (1.0, 1.0))))
    ev = A.report.eigenvalues
    ref = np.sort([o.t1, o.t2])
    rel = float(np.max(np.abs(ev - ref) / ref))
    # t1 lives on the +1 eigenvector, the constant function
    c = A.z.frame[:, 0]
    t1_scat = float(c @ A.report.T0 @ c)
    ok = rel <= 5e-3 and abs(o.t1 - 2.0) <= 1e-6 and abs(t1_scat - 2.0) <= 1e-6
    assert _emit(3, ok, f"eigenvalues {ev.round(5).tolist()} vs oracle {ref.tolist()} "
                        f"(max rel {rel:.1e}); t1 modes {o.t1:.9f}, scatlen {t1_scat:.9f}")


def test_s_functional_equations():
    uni = fe = 0.0
    for m in random_models():
        for lam in np.linspace(0, 0.9 * m.mu1, 101)[1:]:
            S = s_matrix(m, lam, normalized=True)
            uni = max(uni, np.abs(S.conj().T @ S - np.eye(2)).max())
            fe = max(fe, np.linalg.norm(S @ s_matrix(m, -lam, normalized=True) - np.eye(2), 2))
    ok = uni <= 1e-12 and fe <= 1e-12
    assert _emit(4, ok, f"unitarity defect {uni:.1e}, |S(l)S(-l)-I| {fe:.1e}")


def test_time_delay_consistency():
    fd = herm = 0.0
    for m in random_models():
        for lam in np.linspace(0, 0.9 * m.mu1, 101)[1:]:
            T = time_delay(m, lam)
            fd = max(fd, np.abs(T - time_delay_fd(m, lam, h=1e-4)).max() / np.abs(T).max())
            herm = max(herm, np.abs(T - T.conj().T).max())
    ok = fd <= 1e-6 and herm <= 1e-10
    assert _emit(5, ok, f"FD rel err {fd:.1e}, Hermitian defect {herm:.1e}")


def test_cohomological_involution():
    fixtures = {"disk": disk(1.0, 16), "annulus": annulus(1.0, 2.0, 12),
                "genus1_one_hole": genus1_one_hole(1.0, 8)}
    ok = True
    worst = 0.0
    bad = []
    for name, M in fixtures.items():
        ops = assemble(M)
        for p in range(ops.dim):
            z = s_zero(ops, p)
            worst = max(worst, np.abs(z.S0 @ z.S0 - np.eye(len(z.S0))).max())
            if z.n_plus != image_of_restriction(ops, p).rank:
                bad.append(f"{name} p{p} multiplicity")
        dims = list(exactness_audit(ops).dims())
        if dims != LES_DIMS[name]:
            bad.append(f"{name} dims {dims}")
    ok = worst <= 1e-12 and not bad
    assert _emit(6, ok, f"max |S0^2-I| {worst:.1e}; rank tables "
                        f"{'match' if not bad else 'differ: ' + ', '.join(bad)}")


def test_sandwich_bounds(junction32):
    M = flat_cylinder(2.0, 1.0, 32)
    b = analyze(M, 0, (1.0, 2.0, 3.0), exactness=False).bounds
    jb = junction32[0].bounds
    t2_oracle = oracle_T0(PiecewiseCylinderModel(((1.0, 2.0), (1.0, 1.0)))).t2
    flat_ok = (abs(b.C2 - 2) <= 1e-6 and abs(b.t2 - 2) <= 1e-6
               and abs(b.C1 - (2 + 1 / math.pi)) <= 0.01 * (2 + 1 / math.pi)
               and b.C2 <= b.t2 * (1 + 1e-9) and b.t2 <= b.C1)
    junc_ok = jb.C2 <= t2_oracle <= jb.C1 and jb.C2 <= jb.t2 <= jb.C1
    exact_ok = b.ok and jb.ok
    ok = flat_ok and junc_ok and exact_ok
    assert _emit(7, ok, f"flat C2 {b.C2:.7f} <= t2 {b.t2:.7f} <= C1 {b.C1:.4f}; "
                        f"junction C2 {jb.C2:.4f} <= t2 {t2_oracle:.4f} (scatlen {jb.t2:.4f}) "
                        f"<= C1 {jb.C1:.4f}; exact-flag checks {'ok' if exact_ok else 'violated'}")


def test_remainder_decay(junction32):
    A = junction32[0]
    th = component_thresholds(A.ops)
    mu = th["Y2"]
    kappa = A.report.kappa
    rel = abs(kappa - mu) / mu
    ok = rel <= 0.25
    assert _emit(8, ok, f"kappa {kappa:.3f} vs unit-circumference threshold {mu:.3f} "
                        f"(2 pi = {2 * math.pi:.3f}): {100 * rel:.1f}%; global threshold "
                        f"{A.report.mu1:.3f}")


def test_property_suites():
    t0 = time.perf_counter()
    names = ("flat_cylinder", "junction", "disk", "annulus", "genus1_one_hole")
    Ms = [flat_cylinder(2.0, 1.0, 16), junction(resolution=16), disk(1.0, 16),
          annulus(1.0, 2.0, 12), genus1_one_hole(1.0, 8)]
    dd = 0
    adj = 0.0
    rng = np.random.default_rng(0)
    for M in Ms:
        for p in range(2, M.dim + 1):
            P = (M.boundary_matrix(p - 1) @ M.boundary_matrix(p)).tocoo()
            dd = max(dd, int(np.abs(P.data).max(initial=0)))
        ops = assemble(M)
        for _ in range(50):
            for p in range(1, M.dim + 1):
                # unit vectors: |Da| = |b| = 1 in the mass inner product
                a = rng.standard_normal(M.count(p - 1))
                a /= np.sqrt(ops.norm2(p, ops.D[p - 1] @ a))
                b = rng.standard_normal(M.count(p))
                b /= np.sqrt(ops.norm2(p, b))
                lhs = ops.inner(p, ops.D[p - 1] @ a, b)
                rhs = ops.inner(p - 1, a, ops.codifferential(p, b))
                adj = max(adj, abs(lhs - rhs))
    mono = -np.inf
    for M in Ms[:3]:
        for p in (0, 1):
            A = analyze(M, p, (0.5, 1.0, 1.5, 2.0, 3.0), bounds=False, exactness=False)
            if A.report.samples and not A.report.samples[0].empty:
                mono = max(mono, q_monotone(A.report.samples))
    flow_ok = True
    for M in Ms[:2]:
        z = boundary_class(M, {"Y1": 1, "Y2": 0})
        v, _, info = stable_norm(M, z)
        flow_ok &= info["cut"] == info["flow"]
        G = nx.gnm_random_graph(12, 40, seed=1, directed=True)
        for u, w in G.edges:
            G.edges[u, w]["capacity"] = int(rng.integers(1, 50))
        flow_ok &= nx.minimum_cut(G, 0, 11)[0] == nx.maximum_flow_value(G, 0, 11)
    dist_ok = True
    for M in (flat_cylinder(2.0, 1.0, 8), junction(resolution=8)):
        d0 = boundary_distance(M, "Y1", "Y2")
        d1 = boundary_distance(refine(M), "Y1", "Y2")
        dist_ok &= d1 <= d0 + 1e-12
    elapsed = time.perf_counter() - t0
    ok = dd == 0 and adj <= 1e-12 and mono <= 1e-10 and flow_ok and dist_ok and elapsed < 120
    assert _emit(9, ok, f"dd=0 max {dd}, adjointness {adj:.1e}, q monotonicity violation "
                        f"{mono:.1e}, min-cut=max-flow {flow_ok}, distance monotone {dist_ok}, "
                        f"{elapsed:.1f} s over {len(names)} fixtures")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
