"""Galerkin exterior calculus with Whitney forms.

Mass matrices are exact integrals of products of Whitney forms under the
piecewise-flat metric.  The differential is the transposed boundary matrix.
Absolute conditions keep every cochain value; relative conditions drop the
values on boundary cells.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (AssemblyError, DegreeError, RankError, SolverError,
                     SpectralGapError, StructureError)

BCS = ("absolute", "relative")


def _local_faces(n, p):
    return list(itertools.combinations(range(n + 1), p + 1))


def _barycentric_gradients(G):
    """<dl_a, dl_b> for all barycentric coordinates, from edge Gram matrices."""
    m, n, _ = G.shape
    Ginv = np.linalg.inv(G)
    P = np.concatenate([-np.ones((n, 1)), np.eye(n)], axis=1)
    return np.einsum("ia,mij,jb->mab", P, Ginv, P)


def whitney_mass(M, p):
    """Mass matrix of Whitney p-forms on the complex M."""
    n = M.dim
    if not 0 <= p <= n:
        raise DegreeError(f"degree {p} outside 0..{n}")
    top = M.cells[n]
    vol = M.volumes(n)
    if n == 0:
        return sp.diags(np.ones(M.count(0))).tocsr()
    K = _barycentric_gradients(M.gram(n))
    faces = _local_faces(n, p)
    gidx = [M.lookup(p, top[:, list(f)]) for f in faces]
    c_off = vol * math.factorial(n) / math.factorial(n + 2)
    rows, cols, vals = [], [], []
    pf2 = math.factorial(p) ** 2
    for a, I in enumerate(faces):
        for b, J in enumerate(faces):
            if b < a:
                continue
            acc = np.zeros(len(top))
            for j, ij in enumerate(I):
                Ir = [x for x in I if x != ij]
                for k, jk in enumerate(J):
                    Jr = [x for x in J if x != jk]
                    c = c_off * (2.0 if ij == jk else 1.0)
                    if p == 0:
                        det = 1.0
                    else:
                        det = np.linalg.det(K[:, Ir][:, :, Jr])
                    acc += (-1) ** (j + k) * c * det
            acc *= pf2
            rows.append(gidx[a])
            cols.append(gidx[b])
            vals.append(acc)
            if b != a:
                rows.append(gidx[b])
                cols.append(gidx[a])
                vals.append(acc)
    N = M.count(p)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    return ((A + A.T) * 0.5).tocsr()


@dataclass
class BoundarySpectrum:
    degree: int
    eigenvalues: np.ndarray
    nu1: float
    mu1: float
    zero_count: int
    betti: int
    nu1_single: float = None     # smallest positive eigenvalue of the degree-p Laplacian alone
    error_estimate: float = None


class MetricOps:
    """Mass matrices, differentials and Laplacians of one complex."""

    def __init__(self, M):
        self.complex = M
        self.dim = M.dim
        try:
            self.mass = [whitney_mass(M, p) for p in range(M.dim + 1)]
        except np.linalg.LinAlgError as exc:
            raise AssemblyError(f"singular metric on a cell: {exc}") from None
        self.D = [M.coboundary(p) for p in range(M.dim)]
        self.view = M.boundary_view() if M.boundary else None
        self._boundary_ops = None
        self._cache = {}

    # -- boundary conditions ------------------------------------------------
    def dofs(self, p, bc="absolute"):
        if bc not in BCS:
            raise ValueError(f"unknown boundary condition {bc!r}")
        if not 0 <= p <= self.dim:
            raise DegreeError(f"degree {p} outside 0..{self.dim}")
        N = self.complex.count(p)
        if bc == "absolute" or self.view is None or p > self.view.Y.dim:
            return np.arange(N)
        key = ("dofs", p)
        if key not in self._cache:
            self._cache[key] = np.setdiff1d(np.arange(N), self.view.maps[p])
        return self._cache[key]

    def mass_bc(self, p, bc="absolute"):
        i = self.dofs(p, bc)
        return self.mass[p][i][:, i]

    def d_bc(self, p, bc="absolute"):
        if p == self.dim:
            return sp.csr_matrix((0, len(self.dofs(p, bc))))
        return self.D[p][self.dofs(p + 1, bc)][:, self.dofs(p, bc)]

    def stiffness(self, p, bc="absolute"):
        """D^T M D on p-cochains."""
        if p == self.dim:
            n = len(self.dofs(p, bc))
            return sp.csr_matrix((n, n))
        D = self.d_bc(p, bc)
        return (D.T @ self.mass_bc(p + 1, bc) @ D).tocsr()

    def laplacian(self, p, bc="absolute"):
        """Hodge Laplacian with the (p-1)-mass lumped in the gauge term.

        Its kernel is exactly the discrete harmonic space
        {w : Dw = 0, D^T M w = 0}; away from the kernel it is spectrally
        equivalent to the consistent Laplacian.
        """
        key = ("lap", p, bc)
        if key not in self._cache:
            L = self.stiffness(p, bc)
            if p > 0:
                Dm = self.d_bc(p - 1, bc)
                lam = np.asarray(self.mass_bc(p - 1, bc).diagonal())
                Mp = self.mass_bc(p, bc)
                L = L + Mp @ Dm @ sp.diags(1.0 / lam) @ Dm.T @ Mp
            self._cache[key] = ((L + L.T) * 0.5).tocsr()
        return self._cache[key]

    # -- solves ---------------------------------------------------------------
    def mass_factor(self, p, bc="absolute"):
        key = ("mlu", p, bc)
        if key not in self._cache:
            A = self.mass_bc(p, bc).tocsc()
            if A.shape[0] == 0:
                self._cache[key] = None
            else:
                try:
                    self._cache[key] = spla.splu(A)
                except RuntimeError as exc:
                    raise AssemblyError(f"singular mass matrix in degree {p}: {exc}") from None
        return self._cache[key]

    def mass_solve(self, p, rhs, bc="absolute"):
        lu = self.mass_factor(p, bc)
        if lu is None:
            return np.zeros_like(rhs)
        return lu.solve(np.asarray(rhs, dtype=float))

    def codifferential(self, p, beta, bc="absolute"):
        """delta_p beta = M_{p-1}^{-1} D^T M_p beta, via a cached factorization."""
        if p < 1:
            raise DegreeError("codifferential needs p >= 1")
        D = self.d_bc(p - 1, bc)
        return self.mass_solve(p - 1, D.T @ (self.mass_bc(p, bc) @ beta), bc)

    def inner(self, p, a, b, bc="absolute"):
        return float(a @ (self.mass_bc(p, bc) @ b))

    def norm2(self, p, a, bc="absolute"):
        return self.inner(p, a, a, bc)

    @property
    def boundary_ops(self):
        if self.view is None:
            raise StructureError("complex has no boundary")
        if self._boundary_ops is None:
            self._boundary_ops = MetricOps(self.view.Y)
        return self._boundary_ops

    def dump(self, path, p, which="mass"):
        """Write a matrix in coordinate text format (row col value)."""
        A = (self.mass[p] if which == "mass" else self.D[p]).tocoo()
        with open(path, "w") as fh:
            for i, j, v in zip(A.row, A.col, A.data):
                fh.write(f"{i} {j} {float(v)!r}\n")


def assemble(M):
    return MetricOps(M)


# -- generalized eigenproblems -----------------------------------------------

DENSE_LIMIT = 400
SEED = 0


def smallest_eigs(A, B, k, sigma=-1e-2, seed=None):
    """Smallest k eigenpairs of A v = t B v, A symmetric PSD, B SPD."""
    n = A.shape[0]
    k = min(k, n)
    if k == 0:
        return np.zeros(0), np.zeros((n, 0))
    if n <= DENSE_LIMIT:
        w, V = sla.eigh(A.toarray(), B.toarray())
        return w[:k], V[:, :k]
    if k >= n - 1:
        raise SolverError("too many eigenpairs requested for a sparse solve")
    rng = np.random.default_rng(SEED if seed is None else seed)
    try:
        w, V = spla.eigsh(A.tocsc(), k=k, M=B.tocsc(), sigma=sigma, which="LM",
                          v0=rng.standard_normal(n), tol=1e-13, maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"eigensolver did not converge ({len(exc.eigenvalues)} of {k})") from None
    order = np.argsort(w)
    return w[order], V[:, order]


def count_zero(w, tol=1e-6):
    """Number of numerically zero entries of an ascending spectrum."""
    w = np.asarray(w)
    if len(w) == 0:
        return 0, None
    top = max(abs(w[-1]), 1e-300)
    big = np.flatnonzero(w > np.sqrt(np.finfo(float).eps) * top)
    if len(big) == 0:
        return len(w), None
    ref = w[big[0]]
    return int(np.sum(w < tol * ref)), float(ref)


def _coexact_spectrum(ops, k, count, tol=1e-6):
    """Eigenvalues of D^T M D against M on k-cochains: (zero count, positives)."""
    A = ops.stiffness(k)
    B = ops.mass[k]
    n = A.shape[0]
    from .complex import integer_rank
    kdim = n - (integer_rank(ops.complex.boundary_matrix(k + 1)) if k < ops.dim else 0)
    if k == ops.dim:
        return n, np.zeros(0)
    want = kdim + count + 2
    if n > DENSE_LIMIT and want > 400:
        raise SolverError(f"kernel of dimension {kdim} too large for a sparse spectrum")
    w, _ = smallest_eigs(A, B, want)
    nz, _ = count_zero(w, tol)
    if nz != kdim:
        raise RankError(f"degree {k}: {nz} numerically closed modes, expected {kdim}")
    return kdim, np.sort(w[nz:])[:count]


def boundary_spectrum(ops, p, count=6, coarse=None, tol=1e-6):
    """Spectrum of the boundary Laplacian in degrees p and p-1 combined.

    ops may be the MetricOps of M (its boundary is used) or of a closed
    complex.  `coarse`, a BoundarySpectrum at half the resolution, enables a
    Richardson error estimate for nu1.
    """
    Yops = ops.boundary_ops if ops.view is not None else ops
    m = Yops.dim
    if not 0 <= p <= m:
        raise DegreeError(f"degree {p} outside 0..{m}")
    parts = {}
    for k in (p - 2, p - 1, p):
        if 0 <= k <= m:
            parts[k] = _coexact_spectrum(Yops, k, count, tol)
    from .complex import betti_numbers
    b = betti_numbers(Yops.complex)
    bp = b[p]
    bpm = b[p - 1] if p >= 1 else 0
    pos = []
    if p in parts:
        pos += list(parts[p][1])
    if p - 1 in parts:
        pos += 2 * list(parts[p - 1][1])
    if p - 2 in parts:
        pos += list(parts[p - 2][1])
    pos = np.sort(np.array(pos))
    single = np.sort(np.concatenate([parts[k][1] for k in (p - 1, p) if k in parts] or [np.zeros(0)]))
    zero = bp + bpm
    # numerical zero count of the combined operator from the closed-form split
    zc = sum(parts[k][0] for k in (p, p - 1) if k in parts) - sum(
        _exact_rank(Yops, k) for k in (p - 1, p - 2) if k >= 0)
    if zc != zero:
        raise RankError(f"boundary Laplacian kernel {zc} differs from Betti sum {zero}")
    if len(pos) == 0:
        raise SpectralGapError("no positive boundary eigenvalue found")
    nu1 = float(pos[0])
    if nu1 <= 0:
        raise SpectralGapError("first positive boundary eigenvalue is not positive")
    ev = np.concatenate([np.zeros(zero), pos])[:max(count, zero + 1)]
    err = None
    if coarse is not None:
        err = richardson_error(nu1, coarse.nu1)
    return BoundarySpectrum(p, ev, nu1, math.sqrt(nu1), zero, bp,
                            float(single[0]) if len(single) else None, err)


def _exact_rank(ops, k):
    from .complex import integer_rank
    if k + 1 > ops.dim:
        return 0
    return integer_rank(ops.complex.boundary_matrix(k + 1))


def richardson_error(fine, coarse, order=2.0):
    """Error estimate of the fine value from two resolutions a factor 2 apart."""
    return abs(fine - coarse) / (2.0 ** order - 1.0)


def richardson_extrapolate(fine, coarse, order=2.0):
    return fine + (fine - coarse) / (2.0 ** order - 1.0)


# -- wedge pairing on closed boundaries ---------------------------------------------

def _wedge_coeff(rows):
    """dl_A ^ dl_B as a multiple of dl_1 ^ ... ^ dl_m; rows are local indices."""
    m = len(rows)
    C = np.zeros((m, m))
    for r, a in enumerate(rows):
        if a == 0:
            C[r, :] = -1.0
        else:
            C[r, a - 1] = 1.0
    return np.linalg.det(C)


def hodge_pairing(view_or_ops, alpha, beta, p=None):
    """Integral over the closed boundary of alpha ^ beta for Whitney forms.

    alpha has degree p and beta degree m - p on the m-dimensional boundary.
    Both are value vectors indexed by the cells of the boundary complex.
    """
    view = view_or_ops.view if isinstance(view_or_ops, MetricOps) else view_or_ops
    Y = view.Y
    m = Y.dim
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float).T).T
    beta = np.atleast_2d(np.asarray(beta, dtype=float).T).T
    if p is None:
        cand = [k for k in range(m + 1) if Y.count(k) == alpha.shape[0]
                and Y.count(m - k) == beta.shape[0]]
        if not cand:
            raise DegreeError("cochain lengths do not match complementary degrees")
        p = cand[0]
    q = m - p
    if Y.count(p) != alpha.shape[0] or Y.count(q) != beta.shape[0]:
        raise DegreeError("degrees are not complementary on the boundary")
    if m >= 1 and np.any(Y._face_degree != 2):
        raise StructureError("boundary is not a closed pseudomanifold")
    if view.orientation is None:
        raise StructureError("boundary orientation undefined")
    key = ("wedge", p)
    W = view.__dict__.setdefault("_wedge", {}).get(key)
    if W is None:
        W = _wedge_matrix(Y, p, view.orientation)
        view._wedge[key] = W
    out = alpha.T @ (W @ beta)
    return float(out[0, 0]) if out.size == 1 else out


def _wedge_matrix(Y, p, orient):
    m = Y.dim
    q = m - p
    top = Y.cells[m]
    fa = _local_faces(m, p)
    fb = _local_faces(m, q)
    ga = [Y.lookup(p, top[:, list(f)]) for f in fa]
    gb = [Y.lookup(q, top[:, list(f)]) for f in fb]
    cnorm = math.factorial(p) * math.factorial(q) / math.factorial(m + 2)
    rows, cols, vals = [], [], []
    for a, I in enumerate(fa):
        for b, J in enumerate(fb):
            c = 0.0
            for j, ij in enumerate(I):
                Ir = [x for x in I if x != ij]
                for k, jk in enumerate(J):
                    Jr = [x for x in J if x != jk]
                    coef = _wedge_coeff(Ir + Jr) if m > 0 else 1.0
                    c += (-1) ** (j + k) * (2.0 if ij == jk else 1.0) * coef
            c *= cnorm
            if c == 0.0:
                continue
            rows.append(ga[a])
            cols.append(gb[b])
            vals.append(c * orient.astype(float))
    if not vals:
        return sp.csr_matrix((Y.count(p), Y.count(q)))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(Y.count(p), Y.count(q)))
