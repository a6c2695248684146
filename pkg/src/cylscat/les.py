"""The long exact sequence of the pair (M, Y) on harmonic representatives and
the zero-energy scattering matrix."""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .complex import les_ranks
from .dec import hodge_pairing
from .errors import AuditError, DegreeError, RankError
from .hodge import boundary_basis, collar_extension, harmonic_basis

RANK_TOL = 1e-8


def numerical_rank(A, tol=RANK_TOL, band=100.0):
    """Rank from singular values with a relative threshold.

    Raises RankError when a singular value falls within a factor `band` of
    the threshold tol * max(s_max, 1).
    """
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(A, compute_uv=False)
    scale = max(s[0] if len(s) else 0.0, 1.0)
    amb = (s > tol * scale / band) & (s < tol * scale * band)
    if np.any(amb):
        raise RankError(f"singular values straddle the rank threshold: {s[amb]}")
    return int(np.sum(s > tol * scale)), s


def _integer_table(ops):
    if "les" not in ops._cache:
        ops._cache["les"] = les_ranks(ops.complex, ops.view)
    return ops._cache["les"]


def restriction_matrix(ops, p):
    """Matrix of r: H^p(M) -> H^p(Y) in orthonormal harmonic bases."""
    Ha = harmonic_basis(ops, p, "absolute")
    Hy = boundary_basis(ops, p)
    My = ops.boundary_ops.mass[p]
    tr = Ha.vectors[ops.view.maps[p]]
    return Hy.vectors.T @ (My @ tr)


@dataclass
class Subspace:
    degree: int
    frame: np.ndarray        # orthonormal columns, coordinates in the boundary basis
    cochains: np.ndarray     # the same vectors as boundary cochains
    singular_values: np.ndarray

    @property
    def rank(self):
        return self.frame.shape[1]


def image_of_restriction(ops, p):
    if not 0 <= p < ops.dim:
        raise DegreeError(f"restriction needs 0 <= p < {ops.dim}")
    R = restriction_matrix(ops, p)
    r, s = numerical_rank(R)
    exact = _integer_table(ops)[p]["rank_r"]
    if r != exact:
        raise RankError(f"restriction rank {r} in degree {p} differs from integer rank {exact}")
    if R.size:
        U, _, _ = np.linalg.svd(R, full_matrices=True)
        U = U[:, :r]
    else:
        U = np.zeros((R.shape[0], 0))
    Hy = boundary_basis(ops, p)
    return Subspace(p, U, Hy.vectors @ U, s)


@dataclass
class ZeroEnergyScattering:
    degree: int
    basis: np.ndarray        # boundary harmonic basis (cochains as columns)
    frame: np.ndarray        # orthonormal frame of Im(r) in basis coordinates
    P_plus: np.ndarray
    S0: np.ndarray
    star: np.ndarray = None      # polar factor of the wedge pairing, degree p -> n-1-p
    star_raw: np.ndarray = None
    polar_defect: float = None
    eps_star: float = None
    extra: dict = field(default_factory=dict)

    @property
    def n_plus(self):
        return int(round(np.trace(self.P_plus)))

    @property
    def n_minus(self):
        return self.S0.shape[0] - self.n_plus

    def minus_frame(self):
        """Orthonormal frame of the (-1)-eigenspace in basis coordinates."""
        w, V = np.linalg.eigh(self.S0)
        return V[:, w < 0]

    def in_basis(self, C, A=None):
        """Matrix of A (default S0) in the basis whose coordinates are the
        columns of C."""
        A = self.S0 if A is None else A
        return np.linalg.solve(C, A @ C)


def star_matrix(ops, p):
    """Wedge pairing between orthonormal boundary harmonics of degrees p and
    n-1-p, X[j, i] = int alpha_i ^ beta_j, and its polar factor."""
    m = ops.dim - 1
    q = m - p
    A = boundary_basis(ops, p).vectors
    B = boundary_basis(ops, q).vectors
    if A.shape[1] == 0:
        return np.zeros((B.shape[1], 0)), np.zeros((B.shape[1], 0)), 0.0
    X = np.atleast_2d(hodge_pairing(ops.view, A, B, p)).reshape(A.shape[1], B.shape[1]).T
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    Xo = U @ Vt
    return X, Xo, float(np.linalg.norm(X - Xo, 2)) if X.size else 0.0


def s_zero(ops, p, with_star=True):
    key = ("s0", p, with_star)
    if key in ops._cache:
        return ops._cache[key]
    img = image_of_restriction(ops, p)
    b = boundary_basis(ops, p)
    P = img.frame @ img.frame.T
    S0 = 2 * P - np.eye(len(P))
    z = ZeroEnergyScattering(p, b.vectors, img.frame, P, S0)
    if with_star:
        q = ops.dim - 1 - p
        X, Xo, defect = star_matrix(ops, p)
        z.star_raw, z.star, z.polar_defect = X, Xo, defect
        if q != p:
            Sq = s_zero(ops, q, with_star=False).S0
        else:
            Sq = S0
        if Xo.size:
            z.eps_star = float(np.linalg.norm(Sq @ Xo + Xo @ S0, 2))
        else:
            z.eps_star = 0.0
    ops._cache[key] = z
    return z


def characteristic_coordinates(ops, p=0):
    """Coordinates in the boundary basis of the characteristic functions of
    the boundary components (p = 0) as columns, ordered as view.names."""
    if p != 0:
        raise DegreeError("characteristic functions are 0-cochains")
    view = ops.view
    Y = view.Y
    cols = []
    for nm in view.names:
        chi = np.zeros(Y.count(0))
        chi[np.unique(Y.cells[Y.dim][view.components[nm]])] = 1.0
        cols.append(chi)
    chi = np.array(cols).T
    Hy = boundary_basis(ops, 0).vectors
    return Hy.T @ (ops.boundary_ops.mass[0] @ chi), chi


# -- exactness of the long sequence ------------------------------------------------

def connecting_matrix(ops, k):
    """Matrix of H^k(Y) -> H^{k+1}(M, Y) in orthonormal harmonic bases."""
    Hy = boundary_basis(ops, k).vectors
    Hr = harmonic_basis(ops, k + 1, "relative").vectors
    out = np.zeros((Hr.shape[1], Hy.shape[1]))
    for i in range(Hy.shape[1]):
        ext = collar_extension(ops, Hy[:, i], k)
        out[:, i] = Hr.T @ (ops.mass[k + 1] @ (ops.D[k] @ ext))
    return out


def inclusion_matrix(ops, k):
    """Matrix of H^k(M, Y) -> H^k(M) in orthonormal harmonic bases."""
    Hr = harmonic_basis(ops, k, "relative").vectors
    Ha = harmonic_basis(ops, k, "absolute").vectors
    return Ha.T @ (ops.mass[k] @ Hr)


@dataclass
class ExactnessReport:
    rows: list
    maps: dict
    exact: bool

    def dims(self):
        return tuple(r["dim"] for r in self.rows)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "dim", "rank_in", "dim_ker_out", "defect"])
        for r in self.rows:
            w.writerow([r["node"], r["dim"], r["rank_in"], r["dim_ker_out"], r["defect"]])
        return buf.getvalue()


def exactness_audit(ops, raise_on_failure=True):
    n = ops.dim
    table = _integer_table(ops)
    nodes = []
    maps = {}
    for k in range(n + 1):
        nodes.append((f"H{k}(M,Y)", harmonic_basis(ops, k, "relative").betti))
        nodes.append((f"H{k}(M)", harmonic_basis(ops, k, "absolute").betti))
        if k < n:
            nodes.append((f"H{k}(Y)", boundary_basis(ops, k).betti))
    mats = []
    for k in range(n + 1):
        mats.append(("j", k, inclusion_matrix(ops, k)))
        if k < n:
            mats.append(("r", k, restriction_matrix(ops, k)))
            mats.append(("c", k, connecting_matrix(ops, k)))
    ranks = []
    for name, k, A in mats:
        r, s = numerical_rank(A)
        want = table[k]["rank_" + {"j": "j", "r": "r", "c": "conn"}[name]]
        if r != want:
            raise RankError(f"map {name}{k}: numerical rank {r}, integer rank {want}")
        ranks.append(r)
        maps[f"{name}{k}"] = dict(rank=r, singular_values=s.tolist())
    rows = []
    ok = True
    for i, (node, dim) in enumerate(nodes):
        rin = ranks[i - 1] if i > 0 else 0
        rout = ranks[i] if i < len(ranks) else 0
        ker = dim - rout
        defect = abs(rin - ker)
        ok &= defect == 0
        rows.append(dict(node=node, dim=dim, rank_in=rin, dim_ker_out=ker, defect=defect))
    for i in range(len(mats) - 1):
        comp = mats[i + 1][2] @ mats[i][2]
        maps[f"{mats[i + 1][0]}{mats[i + 1][1]}"]["after_previous"] = (
            float(np.abs(comp).max()) if comp.size else 0.0)
    rep = ExactnessReport(rows, maps, ok)
    if not ok and raise_on_failure:
        bad = [r["node"] for r in rows if r["defect"]]
        raise AuditError(f"sequence not exact at {bad}")
    return rep
