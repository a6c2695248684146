"""Harmonic spaces, coclosed extensions and the connecting map on
representatives."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .complex import Cochain, betti_numbers, relative_betti_numbers
from .dec import DENSE_LIMIT, count_zero, smallest_eigs
from .errors import DegreeError, ParameterError, RankError, SolverError


@dataclass
class HarmonicBasis:
    degree: int
    bc: str
    vectors: np.ndarray      # full-length cochains as columns, M-orthonormal
    residuals: np.ndarray
    betti: int
    eigenvalues: np.ndarray  # smallest computed Laplacian eigenvalues
    gap: float = None

    def cochains(self, complex=None):
        return [Cochain(self.degree, v, complex) for v in self.vectors.T]


def expected_betti(ops, p, bc):
    key = ("betti", bc)
    if key not in ops._cache:
        M = ops.complex
        if bc == "absolute" or ops.view is None:
            ops._cache[key] = betti_numbers(M)
        else:
            ops._cache[key] = relative_betti_numbers(M, ops.view)
    return ops._cache[key][p]


def _orthonormalize(H, B):
    if H.shape[1] == 0:
        return H
    G = H.T @ (B @ H)
    w, U = np.linalg.eigh((G + G.T) / 2)
    if w.min() <= 0:
        raise RankError("harmonic vectors are linearly dependent")
    H = H @ (U / np.sqrt(w)) @ U.T
    # fix signs deterministically
    for j in range(H.shape[1]):
        i = np.argmax(np.abs(H[:, j]))
        if H[i, j] < 0:
            H[:, j] = -H[:, j]
    return H


def harmonic_basis(ops, p, bc="absolute", tol_kernel=1e-6, extra=3):
    """M-orthonormal basis of the discrete harmonic p-forms under bc."""
    key = ("harm", p, bc)
    if key in ops._cache:
        return ops._cache[key]
    if not 0 <= p <= ops.dim:
        raise DegreeError(f"degree {p} outside 0..{ops.dim}")
    b = expected_betti(ops, p, bc)
    dofs = ops.dofs(p, bc)
    N = ops.complex.count(p)
    L = ops.laplacian(p, bc)
    B = ops.mass_bc(p, bc)
    n = len(dofs)
    if n == 0:
        hb = HarmonicBasis(p, bc, np.zeros((N, 0)), np.zeros(0), 0, np.zeros(0))
        ops._cache[key] = hb
        return hb
    if p == ops.dim and bc == "relative" and ops.complex.orientable:
        hb = _top_relative_basis(ops, b)
        ops._cache[key] = hb
        return hb
    k = min(n, b + extra)
    w, V = smallest_eigs(L, B, k)
    nz, ref = count_zero(w, tol_kernel)
    if n <= DENSE_LIMIT and nz == n:
        nz = n
    if nz != b:
        raise RankError(f"degree {p} {bc}: {nz} numerically harmonic modes, integer Betti number {b}")
    H = _orthonormalize(V[:, :b], B)
    full = np.zeros((N, b))
    full[dofs] = H
    res = np.linalg.norm(L @ H, axis=0) if b else np.zeros(0)
    hb = HarmonicBasis(p, bc, full, res, b, np.asarray(w), ref)
    ops._cache[key] = hb
    return hb


def _top_relative_basis(ops, b):
    """Relative harmonic top forms: the oriented volume form of each
    connected component (M D^T-kernel spanned by orientation vectors)."""
    M = ops.complex
    n = M.dim
    Bd = M.boundary_matrix(n).tocsr()
    inner = np.flatnonzero(np.diff(Bd.indptr) == 2)
    A = Bd[inner]
    adj = (abs(A).T @ abs(A)).tocsr()
    ncomp, lab = connected_components(adj, directed=False)
    if ncomp != b:
        raise RankError(f"{ncomp} components carry volume forms, integer Betti number {b}")
    vol = M.volumes(n)
    H = np.zeros((M.count(n), ncomp))
    H[np.arange(M.count(n)), lab] = M.orientation * vol
    H = H / np.sqrt(np.sum(H * (ops.mass[n] @ H), axis=0))
    Hr = H[ops.dofs(n, "relative")]
    res = np.linalg.norm(ops.laplacian(n, "relative") @ Hr, axis=0)
    return HarmonicBasis(n, "relative", H, res, b, np.zeros(b))


def boundary_basis(ops, p):
    """Harmonic basis of the closed boundary in degree p."""
    return harmonic_basis(ops.boundary_ops, p, "absolute")


# -- constrained solves -------------------------------------------------------------

def _shifted_solver(ops, p, bc):
    key = ("lapfac", p, bc)
    if key not in ops._cache:
        L = ops.laplacian(p, bc)
        B = ops.mass_bc(p, bc)
        if L.shape[0] == 0:
            ops._cache[key] = (L, None)
        else:
            scale = np.abs(L.diagonal()).mean() / max(np.abs(B.diagonal()).mean(), 1e-300)
            sigma = 1e-8 * scale
            try:
                lu = spla.splu((L + sigma * B).tocsc())
            except RuntimeError as exc:
                raise SolverError(f"factorization failed in degree {p}: {exc}") from None
            ops._cache[key] = (L, lu)
    return ops._cache[key]


def _solve_semidefinite(ops, p, bc, rhs, iters=8):
    """Solve L x = rhs for consistent rhs; the kernel component is arbitrary."""
    L, lu = _shifted_solver(ops, p, bc)
    if lu is None:
        return np.zeros(0)
    x = lu.solve(rhs)
    nr = np.linalg.norm(rhs)
    for _ in range(iters):
        r = rhs - L @ x
        if np.linalg.norm(r) <= 1e-14 * max(nr, 1e-300):
            break
        x = x + lu.solve(r)
    return x


def zero_extension(ops, phi, p):
    phi = np.asarray(getattr(phi, "values", phi), dtype=float)
    e = np.zeros(ops.complex.count(p))
    e[ops.view.maps[p]] = phi
    return e


def _extension_correction(ops, e, p):
    """Relative psi making e + psi coclosed and d-energy minimal."""
    rel = ops.dofs(p, "relative")
    Mp = ops.mass[p]
    rhs = (ops.D[p].T @ (ops.mass[p + 1] @ (ops.D[p] @ e)))[rel] if p < ops.dim else np.zeros(len(rel))
    if p > 0:
        Dr = ops.D[p - 1][:, ops.dofs(p - 1, "relative")]
        lam = np.asarray(ops.mass_bc(p - 1, "relative").diagonal())
        g = Dr.T @ (Mp @ e)
        rhs = rhs + (Mp @ (Dr @ (g / lam)))[rel]
    psi = _solve_semidefinite(ops, p, "relative", -rhs)
    return rel, psi


def coclosed_extension(ops, phi, p=None, basis=None):
    """Discrete minimizer of ||dw||^2 with trace phi, coclosed against
    relative test forms and M-orthogonal to the relative harmonic fields."""
    if p is None:
        p = phi.degree
    if p >= ops.dim:
        raise DegreeError("boundary data must have degree below the dimension")
    e = zero_extension(ops, phi, p)
    rel, psi = _extension_correction(ops, e, p)
    H = harmonic_basis(ops, p, "relative") if basis is None else basis
    w = e.copy()
    w[rel] += psi
    if H.betti:
        c = H.vectors.T @ (ops.mass[p] @ w)
        w = w - H.vectors @ c
    return Cochain(p, w, ops.complex)


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return 1.0 - 3.0 * x ** 2 + 2.0 * x ** 3


def collar_extension(ops, phi, p):
    """Pull phi back along the collar levels, damped by a C^1 cutoff."""
    phi = np.asarray(getattr(phi, "values", phi), dtype=float)
    M = ops.complex
    view = ops.view
    out = np.zeros(M.count(p))
    cells = view.vertex_ids[view.Y.cells[p]]
    for nm, col in M.collars.items():
        if col.levels is None:
            continue
        levels = np.asarray(col.levels)
        base = levels[0]
        mine = np.all(np.isin(cells, base), axis=1)
        if not mine.any():
            continue
        pos = np.searchsorted(base, cells[mine])
        vals = phi[mine]
        for j in range(col.layers + 1):
            s = smoothstep(j / col.layers)
            if s == 0.0:
                continue
            img = levels[j][pos]
            order = np.argsort(img, axis=1)
            sign = np.array([_perm_sign(o) for o in order]) if p > 0 else np.ones(len(img))
            idx = M.lookup(p, np.take_along_axis(img, order, axis=1))
            out[idx] = s * sign * vals
    return out


def _perm_sign(perm):
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def connecting_rep(ops, phi, p=None, method="auto", tol=1e-8):
    """Relative harmonic representative of the image of [phi] under the
    connecting map H^p(Y) -> H^{p+1}(M, Y).

    method "projection" projects d of the collar extension onto the relative
    harmonic basis; "solve" returns d of the coclosed extension, which is the
    same field and avoids the eigenproblem.  "auto" projects when the
    target degree is the top one (its harmonic basis is explicit) and
    solves otherwise.
    """
    if p is None:
        p = phi.degree
    vals = np.asarray(getattr(phi, "values", phi), dtype=float)
    Yops = ops.boundary_ops
    if p < Yops.dim:
        res = np.linalg.norm(Yops.D[p] @ vals)
        scale = max(np.linalg.norm(vals), 1e-300) * max(abs(Yops.D[p]).max(), 1.0)
        if res > tol * scale:
            raise ParameterError(f"boundary cochain is not closed (residual {res:.3e})")
    if method == "auto":
        method = "projection" if p + 1 == ops.dim else "solve"
    if method == "projection":
        H = harmonic_basis(ops, p + 1, "relative")
        ext = collar_extension(ops, vals, p)
        c = H.vectors.T @ (ops.mass[p + 1] @ (ops.D[p] @ ext))
        rep = H.vectors @ c
    elif method == "solve":
        e = zero_extension(ops, vals, p)
        rel, psi = _extension_correction(ops, e, p)
        w = e.copy()
        w[rel] += psi
        rep = ops.D[p] @ w
    else:
        raise ValueError(f"unknown method {method!r}")
    return Cochain(p + 1, rep, ops.complex)
