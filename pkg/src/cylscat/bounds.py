"""Geometric bounds for scattering lengths: comass constants, effective
volume, boundary distances, stable norms and the sandwich checks."""
import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components, dijkstra

from .dec import boundary_spectrum
from .errors import (BoundViolation, DegreeError, ParameterError, SolverError,
                     SpectralGapError, StructureError)

EXACT = "exact"
UPPER = "upper-bound"
LOWER = "lower-bound"
APPROX = "discretized"

CUT_SCALE = 2 ** 40


def comass_constant(n, p):
    """C(n, p) and whether the value is exact (else a binomial upper bound)."""
    if not 0 <= p <= n:
        raise DegreeError(f"degree {p} outside 0..{n}")
    q = min(p, n - p)
    if q <= 1:
        return 1, True
    if q == 2:
        return n // 2, True
    return math.comb(n, p), False


def effective_volume(ops, p=None, mu1=None, coarse=None):
    """Vol(M) + Vol(Y)/mu1 and an error bar from the uncertainty of nu1.

    mu1 defaults to the square root of the smallest positive eigenvalue of
    the boundary Laplacian over all degrees (or degree p when given).
    """
    M = ops.complex
    volY = sum(M.boundary_volumes().values())
    err = 0.0
    if mu1 is None:
        degs = range(ops.boundary_ops.dim + 1) if p is None else [p]
        best = None
        for q in degs:
            c = coarse.get(q) if coarse else None
            s = boundary_spectrum(ops, q, coarse=c)
            if best is None or s.nu1 < best.nu1:
                best = s
        nu1 = best.nu1
        if not nu1 > 1e-10:
            raise SpectralGapError(f"boundary spectral gap {nu1} indistinguishable from 0")
        mu1 = math.sqrt(nu1)
        if best.error_estimate is not None:
            err = volY * best.error_estimate / (2 * mu1 * nu1)
    elif mu1 <= 0:
        raise SpectralGapError("threshold must be positive")
    return M.volume() + volY / mu1, err, mu1


def _edge_graph(M):
    e = M.cells[1]
    w = M.edge_lengths
    n = M.nverts
    return sp.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                         shape=(n, n)).tocsr()


def _component_vertices(M, name):
    return np.unique(M.cells[M.dim - 1][M.boundary[name]])


def vertex_distances(M, name):
    """Edge-path distance of every vertex to boundary component `name`."""
    return dijkstra(_edge_graph(M), indices=_component_vertices(M, name), min_only=True)


def boundary_distance(M, name1, name2):
    """Shortest edge-path length between two boundary components; an upper
    bound of the geodesic distance."""
    for nm in (name1, name2):
        if nm not in M.boundary:
            raise ParameterError(f"unknown boundary component {nm!r}")
    d = vertex_distances(M, name1)
    return float(d[_component_vertices(M, name2)].min())


# -- stable norms ---------------------------------------------------------------------

def boundary_class(M, coeffs):
    """Integer (n-1)-cycle representing iota_* sum c_i [Y_i] with the
    induced orientation."""
    z = np.zeros(M.count(M.dim - 1))
    for nm, c in coeffs.items():
        f = M.boundary[nm]
        z[f] = c * M.induced_orientation(f)
    return z


def _check_cycle(M, z, k):
    if k == 0:
        return
    r = M.boundary_matrix(k) @ z
    if np.abs(r).max(initial=0.0) > 1e-9 * max(np.abs(z).max(initial=0.0), 1.0):
        raise ParameterError("class representative is not a cycle")


def _boundary_coefficients(M, z):
    """Per-component coefficients if z is a sum of whole boundary cycles."""
    out = {}
    used = np.zeros(len(z), dtype=bool)
    for nm, f in M.boundary.items():
        c = z[f] * M.induced_orientation(f)
        if np.ptp(c) > 1e-12:
            return None
        out[nm] = float(c[0])
        used[f] = True
    if np.any(z[~used] != 0):
        return None
    return out


def _mincut(M, coeffs):
    n = M.dim
    B = M.boundary_matrix(n).tocsr()
    nt = M.count(n)
    s, t = nt, nt + 1
    lab = {}
    for nm, f in M.boundary.items():
        for i in f:
            lab[int(i)] = nm
    G = nx.DiGraph()
    G.add_nodes_from(range(nt + 2))
    caps = {}

    def add(u, v, c):
        for a, b in ((u, v), (v, u)):
            caps[(a, b)] = caps.get((a, b), 0) + c

    for e in range(B.shape[0]):
        cells = B.indices[B.indptr[e]:B.indptr[e + 1]]
        c = int(round(M.volumes(n - 1)[e] * CUT_SCALE))
        if len(cells) == 2:
            add(int(cells[0]), int(cells[1]), c)
        elif len(cells) == 1:
            add(int(cells[0]), s if coeffs.get(lab.get(e), 0) == 1 else t, c)
    for (a, b), c in caps.items():
        G.add_edge(a, b, capacity=c)
    flow, (S, T) = nx.minimum_cut(G, s, t)
    cut = sum(caps[(a, b)] for a in S for b in G.successors(a) if b in T)
    if cut != flow:
        raise SolverError(f"min-cut {cut} differs from max-flow {flow}")
    return flow / CUT_SCALE, dict(cut=cut, flow=flow, source_side=len(S) - 1)


def _lp_norm(M, z, k):
    """Discrete stable norm: min sum vol|x| over real chains x = z + d y."""
    B = M.boundary_matrix(k + 1).tocsc().astype(float)
    ne, ny = B.shape
    w = M.volumes(k)
    I = sp.identity(ne, format="csc")
    A = sp.vstack([sp.hstack([B, -I]), sp.hstack([-B, -I])]).tocsc()
    b = np.r_[-z, z]
    c = np.r_[np.zeros(ny), w]
    bounds = [(None, None)] * ny + [(0, None)] * ne
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"stable-norm LP failed: {res.message}")
    return float(res.fun), dict(iterations=int(getattr(res, "nit", 0)))


def _real_gcd(vals, tol=1e-7):
    vals = [abs(v) for v in vals if abs(v) > tol]
    if not vals:
        return None
    g = min(vals)
    for v in vals:
        r = Fraction(v / g).limit_denominator(64)
        if abs(float(r) - v / g) > tol * max(1.0, v / g):
            raise SolverError("period lattice is not discrete at working precision")
        g = g / r.denominator
    return g


def _shortest_cycle(M, z, ops):
    from .hodge import harmonic_basis
    H = harmonic_basis(ops, 1, "absolute")
    if H.betti == 0:
        return 0.0, dict(levels=0)
    if H.betti > 1:
        raise ParameterError("shortest-cycle search needs b1 = 1; use method 'lp'")
    h = H.vectors[:, 0]
    n = M.nverts
    E = M.cells[1]
    G = _edge_graph(M)
    # vertex potentials along a spanning tree
    _, pred = dijkstra(G, indices=0, return_predecessors=True, unweighted=True)
    order = np.argsort(dijkstra(G, indices=0, unweighted=True))
    P = np.zeros(n)
    for v in order[1:]:
        u = pred[v]
        if u < 0:
            continue
        e = M.lookup(1, np.sort([[u, v]], axis=1))[0]
        P[v] = P[u] + (h[e] if u < v else -h[e])
    jump = h + P[E[:, 0]] - P[E[:, 1]]
    g = _real_gcd(jump)
    m = int(round(float(h @ z) / g)) if g else 0
    if m == 0:
        return 0.0, dict(levels=0)
    J = np.rint(jump / g).astype(int)
    lo, hi = min(0, m) - 1, max(0, m) + 1
    K = hi - lo + 1
    rows, cols, vals = [], [], []
    for k in range(lo, hi + 1):
        k2 = k + J
        ok = (k2 >= lo) & (k2 <= hi)
        a = (k - lo) * n + E[ok, 0]
        b = (k2[ok] - lo) * n + E[ok, 1]
        rows += [a, b]
        cols += [b, a]
        vals += [M.edge_lengths[ok]] * 2
    C = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(K * n, K * n)).tocsr()
    starts = np.unique(E[J != 0])
    D = dijkstra(C, indices=(0 - lo) * n + starts)
    best = float(np.min(D[np.arange(len(starts)), (m - lo) * n + starts]))
    return best, dict(levels=K, multiple=m)


def stable_norm(M, z, k=None, method="codim1_mincut", ops=None):
    """Stable norm estimate of the class of the real k-cycle z.

    Returns (value, flag, info).  codim1_mincut and lp give the exact
    discrete stable norm; dim1_shortest_cycle gives the shortest homologous
    integer cycle, an upper bound.
    """
    z = np.asarray(z, dtype=float)
    if k is None:
        k = M.dim - 1
    if len(z) != M.count(k):
        raise ParameterError(f"cycle has {len(z)} entries, expected {M.count(k)}")
    _check_cycle(M, z, k)
    if not np.any(z):
        return 0.0, EXACT, {}
    if method == "codim1_mincut":
        if k != M.dim - 1:
            raise ParameterError("min-cut applies to classes of codimension 1")
        coeffs = _boundary_coefficients(M, z)
        if coeffs is not None and all(c == -1 or c == 0 for c in coeffs.values()):
            coeffs = {nm: -c for nm, c in coeffs.items()}
        if coeffs is None or any(c not in (0.0, 1.0) for c in coeffs.values()):
            raise ParameterError("min-cut needs a 0/1 sum of boundary components; use method 'lp'")
        v, info = _mincut(M, coeffs)
        return v, EXACT, info
    if method == "lp":
        v, info = _lp_norm(M, z, k)
        return v, EXACT, info
    if method == "dim1_shortest_cycle":
        if k != 1:
            raise ParameterError("shortest-cycle search applies to 1-cycles")
        if ops is None:
            from .dec import assemble
            ops = assemble(M)
        v, info = _shortest_cycle(M, z, ops)
        return v, UPPER, info
    raise ParameterError(f"unknown stable-norm method {method!r}")


# -- comass ---------------------------------------------------------------------------

def comass_proxy(M, omega, p):
    """Max over top cells of the pointwise norm of the cellwise-constant
    proxy of a closed Whitney p-form.  This is the comass for p in
    {0, 1, n-1, n} and an upper bound of it otherwise."""
    omega = np.asarray(omega, dtype=float)
    n = M.dim
    T = M.cells[n]
    if p == 0:
        return float(np.abs(omega).max())
    if p == n:
        return float(np.max(np.abs(omega) / M.volumes(n)))
    Ginv = np.linalg.inv(M.gram(n))
    subsets = list(itertools.combinations(range(1, n + 1), p))
    a = np.empty((len(T), len(subsets)))
    for j, I in enumerate(subsets):
        idx = M.lookup(p, T[:, (0,) + I])
        a[:, j] = math.factorial(p) * omega[idx]
    K = np.empty((len(T), len(subsets), len(subsets)))
    for i, I in enumerate(subsets):
        for j, J in enumerate(subsets):
            K[:, i, j] = np.linalg.det(Ginv[:, [x - 1 for x in I]][:, :, [x - 1 for x in J]])
    val = np.sqrt(np.maximum(np.einsum("ci,cij,cj->c", a, K, a), 0.0))
    return float(val.max())


def distance_extension(M, values):
    """0-cochain equal to values[name] on each boundary component,
    interpolated by inverse edge-path distance."""
    names = list(values)
    d = np.array([vertex_distances(M, nm) for nm in names])
    u = np.empty(M.nverts)
    zero = d == 0
    with np.errstate(divide="ignore"):
        w = np.where(zero, 0.0, 1.0 / d)
    vals = np.array([values[nm] for nm in names])
    hit = zero.any(axis=0)
    u[~hit] = (vals @ w[:, ~hit]) / w[:, ~hit].sum(axis=0)
    for i in range(len(names)):
        u[zero[i]] = vals[i]
    return u


# -- sandwich audit -------------------------------------------------------------------

@dataclass
class BoundReport:
    degree: int
    volume: float
    boundary_volumes: dict
    effective_volume: float
    effective_volume_error: float
    mu1: float
    comass_constants: dict
    distance: float = None
    stable_norms: list = field(default_factory=list)
    C1: float = None
    C2: float = None
    t2: float = None
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c["ok"] for c in self.checks)

    def to_dict(self):
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value", "flag", "margin"])
        w.writerow(["volume", repr(self.volume), EXACT, ""])
        for nm, v in sorted(self.boundary_volumes.items()):
            w.writerow([f"volume_{nm}", repr(v), EXACT, ""])
        w.writerow(["effective_volume", repr(self.effective_volume), APPROX, ""])
        if self.distance is not None:
            w.writerow(["distance", repr(self.distance), UPPER, ""])
        for s in self.stable_norms:
            w.writerow([f"stable_norm_{s['name']}", repr(s["value"]), s["flag"], ""])
        for c in self.checks:
            w.writerow([c["name"], repr(c["value"]), c["flag"], repr(c["margin"])])
        return buf.getvalue()


def _check(report, name, lower, value, upper, flag, tol):
    lo_ok = lower is None or lower <= value * (1 + tol) + tol
    up_ok = upper is None or value <= upper * (1 + tol) + tol
    margin = min(value - lower if lower is not None else np.inf,
                 upper - value if upper is not None else np.inf)
    ok = lo_ok and up_ok
    report.checks.append(dict(name=name, value=float(value), lower=lower, upper=upper,
                              flag=flag, margin=float(margin), ok=ok))
    if not ok:
        msg = f"{name}: {value} outside [{lower}, {upper}]"
        if flag == EXACT:
            raise BoundViolation(msg)
        report.warnings.append(msg)


def sandwich_audit(report, ops, z, mu1=None, tol=1e-9, coarse=None):
    """Evaluate the stable-norm/comass sandwich on the (-1)-eigenspace of S0.

    report: ScatteringReport with the full T0 in the boundary basis of z.
    Violations of bounds whose inputs are all exact raise BoundViolation;
    others are recorded as warnings.
    """
    M = ops.complex
    n = M.dim
    p = report.degree
    if p not in (0, n - 1):
        raise DegreeError("sandwich bounds implemented for p = 0 and p = n - 1")
    if connected_components(_edge_graph(M), directed=False)[0] != 1:
        raise StructureError("sandwich audit needs a connected complex")
    vol = M.volume()
    volY = M.boundary_volumes()
    vstar, verr, mu = effective_volume(ops, mu1=mu1, coarse=coarse)
    C, exact_C = comass_constant(n, p + 1)
    out = BoundReport(p, vol, volY, vstar, verr, mu, {f"C({n},{p + 1})": (C, exact_C)})
    cflag = EXACT if exact_C else UPPER
    vflag = EXACT if mu1 is not None else APPROX
    T0 = np.asarray(report.T0)
    Vm = z.minus_frame()
    if Vm.shape[1] == 0:
        return out
    w, U = np.linalg.eigh(Vm.T @ T0 @ Vm)
    Y = ops.view
    Hy = z.basis
    for i in range(len(w)):
        c = Vm @ U[:, i]
        phi = Hy @ c
        inv_form = float(c @ np.linalg.solve(T0, c))
        if p == 0:
            vals = {nm: float(phi[np.unique(Y.Y.cells[Y.Y.dim][Y.components[nm]])].mean())
                    for nm in Y.names}
            zc = boundary_class(M, vals)
            st, sflag, _ = stable_norm(M, zc, method="lp")
            u = distance_extension(M, vals)
            cm = comass_proxy(M, M.coboundary(0) @ u, 1)
            cm_flag = UPPER
        else:
            integral = float(np.sum(Y.orientation * phi))
            st, sflag = abs(integral), EXACT
            cm, cm_flag = abs(integral) / vol, EXACT
        out.stable_norms.append(dict(name=f"phi{i}", value=st, flag=sflag))
        lower = 0.5 / (C * vstar) * st ** 2
        upper = 0.5 * C * vol * cm ** 2
        lflag = EXACT if (sflag == EXACT and vflag == EXACT and cflag == EXACT) else APPROX
        _check(out, f"main_lower_phi{i}", lower, inv_form, None, lflag, tol)
        _check(out, f"main_upper_phi{i}", None, inv_form, upper,
               EXACT if (cm_flag == EXACT and cflag == EXACT) else UPPER, tol)
    if p == 0 and len(Y.names) == 2 and len(w) == 1:
        y1, y2 = Y.names
        V1, V2 = volY[y1], volY[y2]
        dist = boundary_distance(M, y1, y2)
        sn, sflag, _ = stable_norm(M, boundary_class(M, {y1: 1, y2: 0}))
        out.distance = dist
        out.stable_norms.append(dict(name=f"iota_{y1}", value=sn, flag=sflag))
        out.C1 = 2 * vstar * V1 * V2 / (sn ** 2 * (V1 + V2))
        out.C2 = 2 / vol * dist ** 2 * V1 * V2 / (V1 + V2)
        out.t2 = float(w[0])
        _check(out, "t2_two_component", out.C2, out.t2, None, UPPER, tol)
        _check(out, "t2_two_component_upper", None, out.t2, out.C1, vflag, tol)
    return out


def two_component_constants(vol, vstar, V1, V2, dist, iota_norm):
    """C1 and C2 of the two-component sandwich C2 <= t2 <= C1."""
    C1 = 2 * vstar * V1 * V2 / (iota_norm ** 2 * (V1 + V2))
    C2 = 2 / vol * dist ** 2 * V1 * V2 / (V1 + V2)
    return C1, C2


def full_torus_bounds(l1, l2, vol, alpha_norm, beta_norm, vstar=None):
    """Bounds for t on a solid torus whose boundary is the flat l1 x l2 torus."""
    if vstar is None:
        vstar = vol + 4 * math.pi ** 2 * l1 * l2 * max(l1, l2)
    lo = 2 * l1 / l2 * alpha_norm ** 2 / vol
    hi = 2 * l1 / l2 * vstar / beta_norm ** 2
    return lo, hi
