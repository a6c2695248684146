"""Simplicial complexes carrying an edge-length metric, labelled boundary
components and product collars.

Cells are stored as lexicographically sorted vertex tuples; the sorted order
of a tuple is its reference orientation and every sign in the package is
derived from it.  Geometry is given by edge lengths alone, so cross sections
need not embed in Euclidean space.
"""
import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (DegreeError, GenerationError, MeshParseError,
                     ParameterError, StructureError)


@dataclass
class Collar:
    """Product collar [0, layers*thickness] x Y next to one boundary component.

    ``levels[j]`` lists the M-vertex sitting over each Y vertex at depth j
    (row 0 is the boundary itself, in ascending vertex order).
    """
    layers: int
    thickness: float
    levels: np.ndarray = None


@dataclass(frozen=True)
class CylinderSpec:
    a: float
    layers: int = 1
    targets: tuple = None
    max_thickness: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a < 0:
            raise ParameterError(f"cylinder length must be >= 0, got {self.a}")
        if int(self.layers) != self.layers or self.layers < 1:
            raise ParameterError("cylinder needs at least one layer")
        if self.a > 0 and self.a / self.layers > self.max_thickness:
            raise ParameterError(
                f"layer thickness {self.a / self.layers:g} exceeds {self.max_thickness:g}")


@dataclass
class Cochain:
    degree: int
    values: np.ndarray
    complex: "CellComplex" = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.complex is not None and len(self.values) != self.complex.count(self.degree):
            raise DegreeError("cochain length does not match number of cells")


@dataclass
class BoundaryView:
    """A boundary sub-complex Y of M together with its injection maps."""
    Y: "CellComplex"
    maps: list            # maps[k][i] = index in M of the k-cell i of Y
    vertex_ids: np.ndarray
    names: tuple
    components: dict      # name -> indices of Y top cells
    orientation: np.ndarray  # induced orientation of the Y top cells


def _encode(rows, base):
    code = np.zeros(len(rows), dtype=np.int64)
    for j in range(rows.shape[1]):
        code = code * base + rows[:, j]
    return code


class CellComplex:
    def __init__(self, top, edge_lengths, boundary=None, collars=None,
                 coords=None, label=""):
        top = np.sort(np.asarray(top, dtype=np.int64), axis=1)
        if top.ndim != 2 or len(top) == 0:
            raise GenerationError("empty complex")
        self.dim = top.shape[1] - 1
        if np.any(top[:, 1:] == top[:, :-1]):
            raise GenerationError("repeated vertex in a simplex")
        self.label = label
        nv = int(top.max()) + 1
        if len(np.unique(top)) != nv:
            raise GenerationError("vertex ids must be contiguous and all used")
        if float(nv) ** (self.dim + 1) >= 2.0 ** 62:
            raise GenerationError("complex too large for index encoding")
        self._base = nv
        self.cells = []
        for k in range(self.dim + 1):
            faces = np.concatenate(
                [top[:, list(c)] for c in itertools.combinations(range(self.dim + 1), k + 1)])
            self.cells.append(np.unique(faces, axis=0))
        if len(self.cells[self.dim]) != len(top):
            raise GenerationError("duplicate top simplex")
        self._codes = [_encode(c, nv) for c in self.cells]
        self._bd = {}
        self.edge_lengths = self._assign_lengths(edge_lengths)
        if np.any(~np.isfinite(self.edge_lengths)) or np.any(self.edge_lengths <= 0):
            raise GenerationError("edge lengths must be positive")
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self._vol = {}
        self._check_pseudomanifold()
        self.orientation = self._orient()
        self.boundary = {}
        for name, faces in (boundary or {}).items():
            faces = np.asarray(faces, dtype=np.int64)
            if faces.ndim == 2:
                faces = self.lookup(self.dim - 1, faces)
            self.boundary[name] = np.sort(faces)
        self._check_boundary()
        self.collars = dict(collars or {})
        self.spacing = None
        for name in self.collars:
            if name not in self.boundary:
                raise StructureError(f"collar on unknown boundary component {name!r}")

    # -- indexing -------------------------------------------------------
    def count(self, k):
        return len(self.cells[k])

    @property
    def nverts(self):
        return self._base

    def lookup(self, k, rows):
        rows = np.sort(np.asarray(rows, dtype=np.int64).reshape(-1, k + 1), axis=1)
        code = _encode(rows, self._base)
        idx = np.searchsorted(self._codes[k], code)
        idx = np.minimum(idx, len(self._codes[k]) - 1)
        if np.any(self._codes[k][idx] != code):
            raise StructureError(f"{k}-cell not present in complex")
        return idx

    def _assign_lengths(self, edge_lengths):
        ne = self.count(1) if self.dim >= 1 else 0
        if self.dim == 0:
            return np.zeros(0)
        if isinstance(edge_lengths, dict):
            pairs = np.array(list(edge_lengths.keys()), dtype=np.int64).reshape(-1, 2)
            vals = np.array(list(edge_lengths.values()), dtype=float)
        elif isinstance(edge_lengths, tuple):
            pairs, vals = edge_lengths
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            vals = np.asarray(vals, dtype=float)
        else:
            vals = np.asarray(edge_lengths, dtype=float)
            if vals.shape != (ne,):
                raise GenerationError("edge length array has wrong size")
            return vals.copy()
        out = np.full(ne, np.nan)
        pairs = np.sort(pairs, axis=1)
        code = _encode(pairs, self._base)
        idx = np.searchsorted(self._codes[1], code)
        ok = (idx < ne)
        ok[ok] &= self._codes[1][idx[ok]] == code[ok]
        out[idx[ok]] = vals[ok]
        if np.any(np.isnan(out)):
            raise GenerationError("missing edge lengths")
        return out

    # -- combinatorics --------------------------------------------------
    def boundary_matrix(self, p):
        """Signed incidence matrix from p-cells to (p-1)-cells."""
        if not 1 <= p <= self.dim:
            raise DegreeError(f"boundary matrix degree {p} outside 1..{self.dim}")
        if p not in self._bd:
            cells = self.cells[p]
            m = len(cells)
            rows, cols, vals = [], [], []
            for i in range(p + 1):
                rows.append(self.lookup(p - 1, np.delete(cells, i, axis=1)))
                cols.append(np.arange(m))
                vals.append(np.full(m, (-1) ** i, dtype=np.int64))
            self._bd[p] = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.count(p - 1), m), dtype=np.int64)
        return self._bd[p]

    def coboundary(self, p):
        """d on p-cochains as a float matrix (transpose of the boundary)."""
        return self.boundary_matrix(p + 1).T.astype(float).tocsr()

    def euler_characteristic(self):
        return sum((-1) ** k * self.count(k) for k in range(self.dim + 1))

    def _check_pseudomanifold(self):
        if self.dim == 0:
            self._cofaces = None
            return
        B = self.boundary_matrix(self.dim)
        deg = np.diff(B.indptr)
        if np.any(deg > 2):
            raise GenerationError("a codimension-one face has more than two cofaces")
        self._face_degree = deg

    def _orient(self):
        n = self.dim
        m = self.count(n)
        if n == 0:
            return np.ones(m, dtype=np.int64)
        B = self.boundary_matrix(n).tocsr()
        adj = [[] for _ in range(m)]
        for f in np.flatnonzero(self._face_degree == 2):
            c = B.indices[B.indptr[f]:B.indptr[f + 1]]
            s = B.data[B.indptr[f]:B.indptr[f + 1]]
            rel = -int(s[0] * s[1])
            adj[c[0]].append((c[1], rel))
            adj[c[1]].append((c[0], rel))
        o = np.zeros(m, dtype=np.int64)
        for start in range(m):
            if o[start]:
                continue
            o[start] = 1
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for v, rel in adj[u]:
                    want = o[u] * rel
                    if o[v] == 0:
                        o[v] = want
                        queue.append(v)
                    elif o[v] != want:
                        return None
        return o

    @property
    def orientable(self):
        return self.orientation is not None

    def boundary_faces(self):
        if self.dim == 0:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self._face_degree == 1)

    def _check_boundary(self):
        free = set(self.boundary_faces().tolist())
        seen = set()
        for name, faces in self.boundary.items():
            fs = set(faces.tolist())
            if not fs <= free:
                raise StructureError(f"component {name!r} contains interior faces")
            if fs & seen:
                raise StructureError(f"component {name!r} overlaps another")
            seen |= fs
        if self.boundary and seen != free:
            raise StructureError("labelled components do not cover the boundary")

    # -- metric ---------------------------------------------------------
    def gram(self, k, cells=None):
        """Metric Gram matrices of the edge vectors v_i - v_0 of k-cells."""
        cells = self.cells[k] if cells is None else cells
        m = len(cells)
        L2 = np.zeros((m, k + 1, k + 1))
        for a, b in itertools.combinations(range(k + 1), 2):
            e = self.lookup(1, cells[:, [a, b]])
            L2[:, a, b] = L2[:, b, a] = self.edge_lengths[e] ** 2
        r = L2[:, 0, 1:]
        return 0.5 * (r[:, :, None] + r[:, None, :] - L2[:, 1:, 1:])

    def volumes(self, k):
        if k not in self._vol:
            if k == 0:
                v = np.ones(self.count(0))
            else:
                det = np.linalg.det(self.gram(k))
                if np.any(det <= 0):
                    raise GenerationError(f"degenerate {k}-cell (non-positive Gram determinant)")
                v = np.sqrt(det) / math.factorial(k)
            self._vol[k] = v
        return self._vol[k]

    def volume(self):
        return float(self.volumes(self.dim).sum())

    def boundary_volumes(self):
        vol = self.volumes(self.dim - 1)
        return {name: float(vol[f].sum()) for name, f in self.boundary.items()}

    # -- boundary ---------------------------------------------------------
    def induced_orientation(self, faces):
        """Orientation of boundary faces induced from the orientation of M."""
        if self.orientation is None:
            raise StructureError("complex is not orientable")
        Bf = self.boundary_matrix(self.dim).tocsr()
        out = np.empty(len(faces), dtype=np.int64)
        for i, f in enumerate(faces):
            lo, hi = Bf.indptr[f], Bf.indptr[f + 1]
            c = Bf.indices[lo]
            out[i] = self.orientation[c] * Bf.data[lo]
        return out

    def boundary_view(self, names=None):
        if names is None:
            names = tuple(self.boundary)
        names = tuple(names)
        if not names:
            raise StructureError("complex has no labelled boundary")
        key = ("view", names)
        if key in self._vol:
            return self._vol[key]
        faces = np.concatenate([self.boundary[nm] for nm in names])
        order = np.argsort(faces)
        faces = faces[order]
        fv = self.cells[self.dim - 1][faces]
        vids = np.unique(fv)
        local = np.searchsorted(vids, fv)
        if self.dim - 1 >= 1:
            pairs = []
            vals = []
            for a, b in itertools.combinations(range(fv.shape[1]), 2):
                pairs.append(local[:, [a, b]])
                e = self.lookup(1, fv[:, [a, b]])
                vals.append(self.edge_lengths[e])
            el = (np.concatenate(pairs), np.concatenate(vals))
        else:
            el = np.zeros(0)
        Y = CellComplex(local, el, label=f"{self.label}:boundary")
        maps = [self.lookup(k, vids[Y.cells[k]]) for k in range(Y.dim + 1)]
        comp = {}
        ytop = maps[Y.dim]
        for nm in names:
            comp[nm] = np.flatnonzero(np.isin(ytop, self.boundary[nm]))
        orient = self.induced_orientation(ytop) if self.orientable else None
        view = BoundaryView(Y, maps, vids, names, comp, orient)
        self._vol[key] = view
        return view

    def split_order(self, name):
        """Y top cells of one component as vertex tuples in splitting order."""
        faces = self.boundary[name]
        fv = self.cells[self.dim - 1][faces].copy()
        if self.dim - 1 == 1 and self.orientable:
            o = self.induced_orientation(faces)
            fv[o < 0] = fv[o < 0][:, ::-1]
        return fv


# -- restriction ------------------------------------------------------------

def restrict_to_boundary(omega, view):
    """Pull a cochain on M back to the boundary sub-complex."""
    M = omega.complex
    p = omega.degree
    if M is not None and p >= M.dim:
        raise DegreeError("cannot restrict top-degree cochains to the boundary")
    if p > view.Y.dim:
        raise DegreeError("degree exceeds boundary dimension")
    return Cochain(p, omega.values[view.maps[p]], view.Y)


def extend_from_boundary(phi, view, M):
    """Zero extension of a boundary cochain (values copied onto boundary cells)."""
    out = np.zeros(M.count(phi.degree))
    out[view.maps[phi.degree]] = phi.values
    return Cochain(phi.degree, out, M)


# -- cylinder attachment ------------------------------------------------------

def _extrude(M, name, length, layers):
    """Glue [0, length] x Y_name onto M, returning the pieces of the new complex."""
    tau = length / layers
    faces_ord = M.split_order(name)
    col = M.collars.get(name)
    if col is not None and col.levels is not None:
        vids = np.asarray(col.levels[0])
    else:
        vids = np.unique(faces_ord)
    loc = np.searchsorted(vids, faces_ord)
    ny = len(vids)
    ylen = {}
    fv_sorted = np.sort(faces_ord, axis=1)
    for a, b in itertools.combinations(range(faces_ord.shape[1]), 2):
        e = M.lookup(1, fv_sorted[:, [a, b]])
        la = np.searchsorted(vids, fv_sorted[:, a])
        lb = np.searchsorted(vids, fv_sorted[:, b])
        for u, w, l in zip(la, lb, M.edge_lengths[e]):
            ylen[(u, w)] = ylen[(w, u)] = l
    return vids, loc, ny, ylen, tau


def _cylinder_cells(vids, loc, ny, ylen, tau, layers, first_new):
    levels = [vids] + [first_new + j * ny + np.arange(ny) for j in range(layers)]
    k = loc.shape[1] - 1
    tops = []
    pairs = []
    vals = []
    for j in range(1, layers + 1):
        bot, top = levels[j - 1], levels[j]
        for i in range(k + 1):
            simp = np.concatenate([bot[loc[:, :i + 1]], top[loc[:, i:]]], axis=1)
            tops.append(simp)
        # edges created in this layer: tangential copies at level j,
        # verticals and diagonals between j-1 and j
        for (u, w), l in ylen.items():
            if u < w:
                pairs.append((top[u], top[w]))
                vals.append(l)
            pairs.append((bot[u], top[w]))
            vals.append(math.hypot(l, tau))
        for u in range(ny):
            pairs.append((bot[u], top[u]))
            vals.append(tau)
    return levels, np.concatenate(tops), pairs, vals


def attach_cylinder(M, spec, require_collar=True):
    """Return M_a = M with [0, a] x Y glued along the targeted components."""
    if spec.a == 0:
        return M
    targets = tuple(spec.targets) if spec.targets else tuple(M.boundary)
    for nm in targets:
        if nm not in M.boundary:
            raise StructureError(f"unknown boundary component {nm!r}")
        if require_collar:
            col = M.collars.get(nm)
            if col is None or col.levels is None:
                raise StructureError(f"component {nm!r} has no product collar")
    top = [M.cells[M.dim]]
    pairs = [M.cells[1]]
    vals = [M.edge_lengths]
    nxt = M.nverts
    boundary = {k: M.cells[M.dim - 1][v] for k, v in M.boundary.items()}
    collars = {}
    for nm in targets:
        vids, loc, ny, ylen, tau = _extrude(M, nm, spec.a, spec.layers)
        levels, tops, pr, vl = _cylinder_cells(vids, loc, ny, ylen, tau, spec.layers, nxt)
        nxt += spec.layers * ny
        top.append(tops)
        if pr:
            pairs.append(np.array(pr, dtype=np.int64))
            vals.append(np.array(vl))
        boundary[nm] = levels[-1][loc]
        collars[nm] = Collar(spec.layers, tau, np.array(levels[::-1]))
    for nm, col in M.collars.items():
        if nm not in collars:
            collars[nm] = col
    out = CellComplex(np.concatenate(top), (np.concatenate(pairs), np.concatenate(vals)),
                      boundary=boundary, collars=collars, label=M.label + f"+cyl({spec.a:g})")
    return out


def extrude_collar(M, layers, thickness, names=None):
    """Give every (or the named) boundary component a product collar by gluing
    `layers` product layers of the given thickness onto it."""
    names = tuple(names) if names else tuple(M.boundary)
    spec = CylinderSpec(layers * thickness, layers, names, max_thickness=np.inf)
    return attach_cylinder(M, spec, require_collar=False)


# -- model generators ---------------------------------------------------------

class _Builder:
    def __init__(self):
        self.tris = []
        self.lengths = {}
        self.nv = 0
        self.coords = []

    def verts(self, k, coords=None):
        ids = np.arange(self.nv, self.nv + k)
        self.nv += k
        if coords is not None:
            self.coords.extend(np.asarray(coords).tolist())
        return ids

    def edge(self, a, b, l):
        key = (int(min(a, b)), int(max(a, b)))
        old = self.lengths.get(key)
        if old is not None and abs(old - l) > 1e-12 * max(1.0, l):
            raise GenerationError(f"inconsistent length for edge {key}")
        self.lengths[key] = float(l)

    def strip(self, B, T, lb, lt, legs, diags):
        N = len(B)
        for k in range(N):
            k1 = (k + 1) % N
            self.tris.append((B[k], T[k], T[k1]))
            self.tris.append((B[k], B[k1], T[k1]))
            self.edge(B[k], B[k1], lb)
            self.edge(T[k], T[k1], lt)
            self.edge(B[k], T[k], legs[k])
            self.edge(B[k], T[k1], diags[k])


def _ring_faces(ring):
    return np.stack([ring, np.roll(ring, -1)], axis=1)


def _heron(a, b, c):
    s = 0.5 * (a + b + c)
    q = s * (s - a) * (s - b) * (s - c)
    if q <= 0:
        raise GenerationError("transition triangle violates the triangle inequality")
    return math.sqrt(q)


def flat_cylinder(L=2.0, circumference=1.0, resolution=32, collar_layers=2):
    N = int(resolution)
    h = circumference / N
    K = max(2 * collar_layers, int(round(L / h)))
    tau = L / K
    b = _Builder()
    rings = [b.verts(N) for _ in range(K + 1)]
    diag = math.hypot(h, tau)
    for i in range(K):
        b.strip(rings[i], rings[i + 1], h, h, [tau] * N, [diag] * N)
    boundary = {"Y1": _ring_faces(rings[0]), "Y2": _ring_faces(rings[K])}
    collars = {"Y1": Collar(collar_layers, tau, np.array(rings[:collar_layers + 1])),
               "Y2": Collar(collar_layers, tau, np.array(rings[K - collar_layers:][::-1]))}
    M = CellComplex(np.array(b.tris), b.lengths, boundary, collars, label="flat_cylinder")
    M.spacing = tau
    return M


def junction(segments=((1.0, 2.0), (1.0, 1.0)), resolution=16, tilt=0.5, collar_layers=2):
    """Chain of flat cylinders with circumferences w_k and lengths l_k.

    Where the circumference changes the rings are joined by one transition
    layer whose height varies with the angle by the factor (1 + tilt*cos);
    the adjacent segments are shortened so that the total area stays
    sum(w_k * l_k) exactly.
    """
    segs = [(float(l), float(w)) for l, w in segments]
    if any(l <= 0 or w <= 0 for l, w in segs):
        raise ParameterError("segment lengths and widths must be positive")
    if not 0 <= tilt < 1:
        raise ParameterError("tilt must lie in [0, 1)")
    N = int(resolution)
    tau = min(w for _, w in segs) / N
    ang = 2 * np.pi * np.arange(N) / N
    ramps = []
    for (l0, w0), (l1, w1) in zip(segs[:-1], segs[1:]):
        if w0 == w1:
            ramps.append(None)
            continue
        hk = tau * (1 + tilt * np.cos(ang))
        legs = np.sqrt(hk ** 2 + ((w0 - w1) / (2 * N)) ** 2)
        hmid = 0.5 * (hk + np.roll(hk, -1))
        diags = np.sqrt(((w0 + w1) / (2 * N)) ** 2 + hmid ** 2)
        area = 0.0
        for k in range(N):
            area += _heron(legs[k], w1 / N, diags[k])
            area += _heron(w0 / N, legs[(k + 1) % N], diags[k])
        ramps.append((legs, diags, area / (w0 + w1)))
    short = [0.0] * len(segs)
    for i, r in enumerate(ramps):
        if r is not None:
            short[i] += r[2]
            short[i + 1] += r[2]
    b = _Builder()
    first = None
    prev = None
    collars = {}
    all_rings = []
    for i, (l, w) in enumerate(segs):
        lk = l - short[i]
        K = max(1, int(round(lk / tau)))
        if i in (0, len(segs) - 1):
            K = max(K, collar_layers)
        t = lk / K
        if lk <= 0:
            raise GenerationError("segment too short for the transition layer")
        if prev is not None and ramps[i - 1] is None:
            rings = [prev]
        else:
            rings = [b.verts(N)]
            if prev is not None:
                legs, diags, _ = ramps[i - 1]
                b.strip(prev, rings[0], segs[i - 1][1] / N, w / N, legs, diags)
        for _ in range(K):
            rings.append(b.verts(N))
        for j in range(K):
            b.strip(rings[j], rings[j + 1], w / N, w / N, [t] * N, [math.hypot(w / N, t)] * N)
        if first is None:
            first = rings[0]
            collars["Y1"] = Collar(collar_layers, t, np.array(rings[:collar_layers + 1]))
        if i == len(segs) - 1:
            collars["Y2"] = Collar(collar_layers, t, np.array(rings[len(rings) - 1 - collar_layers:][::-1]))
        prev = rings[-1]
        all_rings.extend(rings)
    boundary = {"Y1": _ring_faces(first), "Y2": _ring_faces(prev)}
    M = CellComplex(np.array(b.tris), b.lengths, boundary, collars, label="junction")
    M.spacing = tau
    return M


def _merge_rings(b, inner, outer, coords):
    """Triangulate the band between two concentric polygons by angle merging."""
    ni, no = len(inner), len(outer)
    tris = []
    if ni == 1:
        for j in range(no):
            tris.append((inner[0], outer[j], outer[(j + 1) % no]))
        return tris
    i = j = 0
    while i < ni or j < no:
        ti = (i + 1) / ni
        to = (j + 1) / no
        if j < no and (i >= ni or to <= ti):
            tris.append((inner[i % ni], outer[j % no], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((inner[i % ni], inner[(i + 1) % ni], outer[j % no]))
            i += 1
    return tris


def _euclid(b, tris, xy):
    for t in tris:
        b.tris.append(t)
        for u, v in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
            b.edge(u, v, float(np.hypot(*(xy[u] - xy[v]))))


def disk(r=1.0, resolution=16, collar_layers=2, collar_thickness=None):
    """Polygonal disk of radius r - 2*collar with a product collar glued on.

    The default collar thickness r/res^2 keeps the collar's contribution to
    volumes at second order in the mesh size.
    """
    if r <= 0:
        raise ParameterError("radius must be positive")
    K = int(resolution)
    tc = r / K ** 2 if collar_thickness is None else float(collar_thickness)
    rho = r - collar_layers * tc
    if rho <= 0:
        raise ParameterError("collar thicker than the disk")
    b = _Builder()
    xy = [np.zeros(2)]
    rings = [b.verts(1)]
    for k in range(1, K + 1):
        n = 6 * k
        th = 2 * np.pi * np.arange(n) / n
        rings.append(b.verts(n))
        xy.extend(np.stack([rho * k / K * np.cos(th), rho * k / K * np.sin(th)], 1))
    xy = np.array(xy)
    for k in range(1, K + 1):
        _euclid(b, _merge_rings(b, rings[k - 1], rings[k], xy), xy)
    core = CellComplex(np.array(b.tris), b.lengths, {"Y": _ring_faces(rings[K])},
                       coords=xy, label="disk")
    out = extrude_collar(core, collar_layers, tc)
    out.label = "disk"
    out.spacing = r / K
    return out


def annulus(r_in=1.0, r_out=2.0, resolution=16, collar_layers=2, collar_thickness=None):
    if not 0 < r_in < r_out:
        raise ParameterError("need 0 < r_in < r_out")
    K = int(resolution)
    h = (r_out - r_in) / (K + 2 * collar_layers)
    tc = h if collar_thickness is None else float(collar_thickness)
    a, c = r_in + collar_layers * tc, r_out - collar_layers * tc
    if a >= c:
        raise ParameterError("collars overlap")
    N = max(8, int(round(np.pi * (a + c) / ((c - a) / K))))
    th = 2 * np.pi * np.arange(N) / N
    b = _Builder()
    rings = []
    xy = []
    for k in range(K + 1):
        rad = a + (c - a) * k / K
        rings.append(b.verts(N))
        xy.extend(np.stack([rad * np.cos(th), rad * np.sin(th)], 1))
    xy = np.array(xy)
    for k in range(K):
        B, T = rings[k], rings[k + 1]
        tris = []
        for j in range(N):
            j1 = (j + 1) % N
            tris += [(B[j], T[j], T[j1]), (B[j], B[j1], T[j1])]
        _euclid(b, tris, xy)
    core = CellComplex(np.array(b.tris), b.lengths,
                       {"Y1": _ring_faces(rings[0]), "Y2": _ring_faces(rings[K])},
                       coords=xy, label="annulus")
    out = extrude_collar(core, collar_layers, tc)
    out.label = "annulus"
    out.spacing = h
    return out


def genus1_one_hole(side=1.0, resolution=8, hole=None, collar_layers=2, collar_thickness=None):
    """Flat square torus with a square block of cells removed."""
    n = int(resolution)
    m = max(1, n // 4) if hole is None else int(hole)
    if not 1 <= m <= n - 3:
        raise ParameterError("hole size must leave at least three rows of cells")
    h = side / n
    tc = h if collar_thickness is None else float(collar_thickness)
    i0 = (n - m) // 2
    removed = {(i, j) for i in range(i0, i0 + m) for j in range(i0, i0 + m)}
    inside = {(i, j) for i in range(i0 + 1, i0 + m) for j in range(i0 + 1, i0 + m)}
    vid = {}
    for i in range(n):
        for j in range(n):
            if (i, j) not in inside:
                vid[(i, j)] = len(vid)
    b = _Builder()
    b.nv = len(vid)
    d = math.hypot(h, h)
    for i in range(n):
        for j in range(n):
            if (i, j) in removed:
                continue
            v00 = vid[(i, j)]
            v10 = vid[((i + 1) % n, j)]
            v11 = vid[((i + 1) % n, (j + 1) % n)]
            v01 = vid[(i, (j + 1) % n)]
            b.tris += [(v00, v10, v11), (v00, v01, v11)]
            b.edge(v00, v10, h)
            b.edge(v00, v01, h)
            b.edge(v10, v11, h)
            b.edge(v01, v11, h)
            b.edge(v00, v11, d)
    loop = []
    for i in range(i0, i0 + m):
        loop.append((vid[(i, i0)], vid[(i + 1, i0)]))
        loop.append((vid[(i, i0 + m)], vid[(i + 1, i0 + m)]))
    for j in range(i0, i0 + m):
        loop.append((vid[(i0, j)], vid[(i0, j + 1)]))
        loop.append((vid[(i0 + m, j)], vid[(i0 + m, j + 1)]))
    core = CellComplex(np.array(b.tris), b.lengths, {"Y": np.array(loop)}, label="genus1_one_hole")
    out = extrude_collar(core, collar_layers, tc)
    out.label = "genus1_one_hole"
    out.spacing = h
    return out


MODELS = {
    "flat_cylinder": flat_cylinder,
    "junction": junction,
    "disk": disk,
    "annulus": annulus,
    "genus1_one_hole": genus1_one_hole,
}


def generate_model(kind, params=None, resolution=16):
    if kind not in MODELS:
        raise ParameterError(f"unknown model {kind!r}; choose from {sorted(MODELS)}")
    if int(resolution) < 4:
        raise ParameterError("resolution must be at least 4")
    params = dict(params or {})
    for key, val in params.items():
        if isinstance(val, (int, float)) and key not in ("collar_layers", "hole", "tilt") and val <= 0:
            raise ParameterError(f"parameter {key} must be positive")
    try:
        M = MODELS[kind](resolution=int(resolution), **params)
    except TypeError as exc:
        raise ParameterError(str(exc)) from None
    for nm, col in M.collars.items():
        if col.layers < 2:
            raise GenerationError(f"collar at {nm!r} has fewer than two layers")
    M.volumes(M.dim)
    return M


# -- refinement ---------------------------------------------------------------

def refine(M):
    """Red (1 -> 4) subdivision of a 2-complex; boundary labels are kept,
    collar metadata is dropped."""
    if M.dim != 2:
        raise DegreeError("refinement implemented for 2-complexes only")
    nv = M.nverts
    E = M.cells[1]
    mid = nv + np.arange(len(E))
    pairs, vals = [], []
    for (a, b), mv, l in zip(E, mid, M.edge_lengths):
        pairs += [(a, mv), (mv, b)]
        vals += [l / 2, l / 2]
    tops = []
    for t in M.cells[2]:
        a, b, c = t
        eab, ebc, eac = M.lookup(1, np.array([[a, b], [b, c], [a, c]]))
        mab, mbc, mac = mid[[eab, ebc, eac]]
        lab, lbc, lac = M.edge_lengths[[eab, ebc, eac]]
        tops += [(a, mab, mac), (mab, b, mbc), (mac, mbc, c), (mab, mbc, mac)]
        pairs += [(mab, mac), (mab, mbc), (mac, mbc)]
        vals += [lbc / 2, lac / 2, lab / 2]
    boundary = {}
    for nm, faces in M.boundary.items():
        fv = E[faces]
        e = faces
        boundary[nm] = np.concatenate([np.stack([fv[:, 0], mid[e]], 1), np.stack([mid[e], fv[:, 1]], 1)])
    return CellComplex(np.array(tops), (np.array(pairs), np.array(vals)), boundary,
                       label=M.label + ":refined")


# -- mesh file format -----------------------------------------------------------

def write_mesh(M, path):
    lines = [f"mwce-mesh 1 {M.dim}"]
    for k in range(M.dim + 1):
        lines.append(f"cells {k} {M.count(k)}")
        lines += [" ".join(str(int(v)) for v in row) for row in M.cells[k]]
    lines.append(f"edgelen {M.count(1)}")
    lines += [repr(float(x)) for x in M.edge_lengths]
    for nm, faces in M.boundary.items():
        lines.append(f"boundary {nm} {len(faces)}")
        lines += [str(int(f)) for f in faces]
    if M.collars:
        first = next(iter(M.collars.values()))
        lines.append(f"collar {first.layers} {first.thickness!r}")
        for nm, col in M.collars.items():
            if col.levels is None:
                continue
            lv = np.asarray(col.levels)
            lines.append(f"collarmap {nm} {lv.shape[0]} {lv.shape[1]} {col.layers} {col.thickness!r}")
            lines += [" ".join(str(int(v)) for v in row) for row in lv]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    try:
        with open(path) as fh:
            toks = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise MeshParseError(f"cannot read mesh: {exc}") from None
    if not toks or toks[0][:2] != ["mwce-mesh", "1"] or len(toks[0]) != 3:
        raise MeshParseError("missing or corrupted 'mwce-mesh 1 <n>' header")
    try:
        n = int(toks[0][2])
        pos = 1
        cells = {}
        lengths = None
        boundary = {}
        collar = None
        cmaps = {}
        while pos < len(toks):
            head = toks[pos]
            kind = head[0]
            if kind == "cells":
                k, cnt = int(head[1]), int(head[2])
                rows = np.array([[int(x) for x in t] for t in toks[pos + 1:pos + 1 + cnt]], dtype=np.int64)
                if len(rows) != cnt or (cnt and rows.shape[1] != k + 1):
                    raise MeshParseError(f"cells {k}: bad row count or width")
                cells[k] = rows.reshape(cnt, k + 1)
                pos += 1 + cnt
            elif kind == "edgelen":
                cnt = int(head[1])
                lengths = np.array([float(t[0]) for t in toks[pos + 1:pos + 1 + cnt]])
                if len(lengths) != cnt:
                    raise MeshParseError("edgelen: truncated block")
                pos += 1 + cnt
            elif kind == "boundary":
                nm, cnt = head[1], int(head[2])
                boundary[nm] = np.array([int(t[0]) for t in toks[pos + 1:pos + 1 + cnt]], dtype=np.int64)
                if len(boundary[nm]) != cnt:
                    raise MeshParseError("boundary: truncated block")
                pos += 1 + cnt
            elif kind == "collar":
                collar = (int(head[1]), float(head[2]))
                pos += 1
            elif kind == "collarmap":
                nm, nl, cnt = head[1], int(head[2]), int(head[3])
                layers = int(head[4]) if len(head) > 4 else nl - 1
                thick = float(head[5]) if len(head) > 5 else None
                rows = np.array([[int(x) for x in t] for t in toks[pos + 1:pos + 1 + nl]], dtype=np.int64)
                if rows.shape != (nl, cnt):
                    raise MeshParseError("collarmap: bad shape")
                cmaps[nm] = (layers, thick, rows)
                pos += 1 + nl
            else:
                raise MeshParseError(f"unknown block {kind!r}")
    except (ValueError, IndexError) as exc:
        raise MeshParseError(f"malformed mesh: {exc}") from None
    if n not in cells or lengths is None:
        raise MeshParseError("mesh lacks top cells or edge lengths")
    try:
        M = CellComplex(cells[n], np.zeros(0) if n == 0 else (cells[1], lengths),
                        boundary={nm: cells[n - 1][f] for nm, f in boundary.items()} if n in cells and n - 1 in cells else None)
    except (StructureError, GenerationError) as exc:
        raise MeshParseError(f"inconsistent mesh: {exc}") from None
    except IndexError:
        raise MeshParseError("boundary index out of range") from None
    for k, rows in cells.items():
        if k > n or len(rows) != M.count(k) or not np.array_equal(np.sort(rows, axis=1), M.cells[k]):
            raise MeshParseError(f"cells {k} block is not the lexicographic closure of the top cells")
    collars = {}
    for nm, (layers, thick, rows) in cmaps.items():
        collars[nm] = Collar(layers, thick if thick is not None else collar[1], rows)
    if collar is not None and not cmaps:
        collars = {}
    M.collars = collars
    return M


# -- exact ranks and Betti numbers ------------------------------------------------

_PRIME = 2 ** 31 - 1


def _signed_graph_rank(A):
    """Rank of a matrix whose columns have at most two +-1 entries.

    Rows are nodes and columns signed edges; a connected component has full
    rank when it carries a single-entry column or an inconsistent cycle,
    otherwise rank one less than its size.
    """
    A = A.tocsc()
    m = A.shape[0]
    parent = np.arange(m)
    parity = np.ones(m, dtype=np.int64)
    full = np.zeros(m, dtype=bool)

    def find(i):
        par = 1
        path = []
        while parent[i] != i:
            path.append(i)
            par *= parity[i]
            i = parent[i]
        root = i
        # compress
        acc = par
        for node in path:
            old = parity[node]
            parent[node] = root
            parity[node] = acc
            acc *= old
        return root, par

    for j in range(A.shape[1]):
        lo, hi = A.indptr[j], A.indptr[j + 1]
        rows, vals = A.indices[lo:hi], A.data[lo:hi]
        if len(rows) == 0:
            continue
        if len(rows) == 1:
            full[find(rows[0])[0]] = True
            continue
        ri, pi = find(rows[0])
        rj, pj = find(rows[1])
        rel = -int(vals[0] * vals[1])
        if ri == rj:
            if pi * rel != pj:
                full[ri] = True
        else:
            parent[rj] = ri
            parity[rj] = pi * rel * pj
            full[ri] |= full[rj]
    roots = np.array([find(i)[0] for i in range(m)], dtype=np.int64)
    sizes = np.bincount(roots, minlength=m)
    comp = np.flatnonzero(sizes)
    return int(np.sum(sizes[comp] - 1 + full[comp]))


def _modp_rank(A, p=_PRIME):
    A = A.tocsc()
    pivots = {}
    rank = 0
    for j in range(A.shape[1]):
        lo, hi = A.indptr[j], A.indptr[j + 1]
        col = {int(i): int(v) % p for i, v in zip(A.indices[lo:hi], A.data[lo:hi]) if int(v) % p}
        while col:
            low = max(col)
            piv = pivots.get(low)
            if piv is None:
                inv = pow(col[low], p - 2, p)
                pivots[low] = {i: v * inv % p for i, v in col.items()}
                rank += 1
                break
            f = col[low]
            for i, v in piv.items():
                nv = (col.get(i, 0) - f * v) % p
                if nv:
                    col[i] = nv
                else:
                    col.pop(i, None)
    return rank


def integer_rank(A):
    """Exact rank over the rationals of an integer sparse matrix."""
    A = sp.csc_matrix(A)
    A.eliminate_zeros()
    if A.nnz == 0:
        return 0
    unit = np.all(np.abs(A.data) == 1)
    if unit and np.diff(A.indptr).max() <= 2:
        return _signed_graph_rank(A)
    At = A.T.tocsc()
    if unit and np.diff(At.indptr).max() <= 2:
        return _signed_graph_rank(At)
    return _modp_rank(A)


def _ranks(M):
    return [0] + [integer_rank(M.boundary_matrix(k)) for k in range(1, M.dim + 1)] + [0]


def betti_numbers(M):
    r = _ranks(M)
    return [M.count(k) - r[k] - r[k + 1] for k in range(M.dim + 1)]


def _relative_boundary(M, view, k):
    """d_k restricted to cells off the boundary (rows and columns)."""
    B = M.boundary_matrix(k).tocsr()
    keep_r = np.setdiff1d(np.arange(M.count(k - 1)), view.maps[k - 1]) if k - 1 <= view.Y.dim else np.arange(M.count(k - 1))
    keep_c = np.setdiff1d(np.arange(M.count(k)), view.maps[k]) if k <= view.Y.dim else np.arange(M.count(k))
    return B[keep_r][:, keep_c]


def relative_betti_numbers(M, view=None):
    view = view or M.boundary_view()
    r = [0] + [integer_rank(_relative_boundary(M, view, k)) for k in range(1, M.dim + 1)] + [0]
    ny = [view.Y.count(k) if k <= view.Y.dim else 0 for k in range(M.dim + 1)]
    return [M.count(k) - ny[k] - r[k] - r[k + 1] for k in range(M.dim + 1)]


def les_ranks(M, view=None):
    """Exact ranks of the maps of the long exact sequence of the pair (M, Y).

    Returns per degree k the Betti numbers of (M, Y), M, Y and the ranks of
    j: H^k(M,Y) -> H^k(M), r: H^k(M) -> H^k(Y) and the connecting map
    H^k(Y) -> H^{k+1}(M,Y), all computed from integer boundary matrices.
    """
    view = view or M.boundary_view()
    Y = view.Y
    n = M.dim
    rM = _ranks(M)
    rY = [0] + [integer_rank(Y.boundary_matrix(k)) for k in range(1, Y.dim + 1)] + [0, 0]
    rRel = [0] + [integer_rank(_relative_boundary(M, view, k)) for k in range(1, n + 1)] + [0]
    nY = [Y.count(k) if k <= Y.dim else 0 for k in range(n + 2)]
    out = []
    for k in range(n + 1):
        bM = M.count(k) - rM[k] - rM[k + 1]
        bY = nY[k] - rY[k] - rY[k + 1]
        bR = M.count(k) - nY[k] - rRel[k] - rRel[k + 1]
        # rank of [d_{k+1} | inclusion of Y k-chains]
        rBY = nY[k] + rRel[k + 1]
        rank_r = rBY - rY[k] - rM[k + 1]
        rank_j = M.count(k) - rM[k] + rY[k] - rBY
        rank_c = rM[k + 1] + nY[k] - rBY - rY[k + 1]
        out.append(dict(k=k, b_rel=bR, b_abs=bM, b_Y=bY, rank_j=rank_j,
                        rank_r=rank_r, rank_conn=rank_c))
    return out
