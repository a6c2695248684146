"""Transfer-matrix scattering for chains of flat cylinders.

Each transverse mode reduces to u'' + k^2 u = 0 on every segment, with u and
w u' continuous across interfaces (w the cross-sectional volume).  In
segment j, u = A_j e^{ikx} + B_j e^{-ikx} in a coordinate starting at the
segment's left end.  S[j, i] is the outgoing amplitude at end j for unit
incoming amplitude at end i, in the basis of the modes themselves; the
weight-normalized matrix W^{1/2} S W^{-1/2} is the unitary one.
"""
import cmath
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchError, ParameterError, SolverError


@dataclass(frozen=True)
class PiecewiseCylinderModel:
    segments: tuple          # ((length, weight), ...)
    nu: float = 0.0
    mu1: float = None        # first threshold; defaults to 2*pi / max weight

    def __post_init__(self):
        segs = tuple((float(l), float(w)) for l, w in self.segments)
        if not segs:
            raise ParameterError("model needs at least one segment")
        for l, w in segs:
            if l < 0 or w <= 0 or not (math.isfinite(l) and math.isfinite(w)):
                raise ParameterError("segment lengths must be >= 0 and weights > 0")
        if self.nu < 0:
            raise ParameterError("transverse eigenvalue must be >= 0")
        object.__setattr__(self, "segments", segs)
        if self.mu1 is None:
            object.__setattr__(self, "mu1", 2 * math.pi / max(w for _, w in segs))

    @property
    def wL(self):
        return self.segments[0][1]

    @property
    def wR(self):
        return self.segments[-1][1]

    @property
    def volume(self):
        return sum(l * w for l, w in self.segments)

    def scaled(self, s):
        return PiecewiseCylinderModel(tuple((l, w * s) for l, w in self.segments), self.nu, self.mu1)

    def concat(self, other):
        return PiecewiseCylinderModel(self.segments + other.segments, self.nu, self.mu1)


def branch_sqrt(z):
    """sqrt(r e^{i phi}) = sqrt(r) e^{i phi / 2} with 0 <= phi < 2 pi."""
    z = complex(z)
    r = abs(z)
    phi = cmath.phase(z)
    if phi < 0:
        phi += 2 * math.pi
    return math.sqrt(r) * cmath.exp(0.5j * phi)


def wavenumber(lam, nu):
    """k and dk/dlambda for a mode with transverse eigenvalue nu."""
    lam = complex(lam)
    if nu == 0:
        return lam, 1.0
    z = lam * lam - nu
    if abs(z) <= 1e-14 * max(nu, 1.0):
        raise BranchError(f"lambda = {lam} sits on the threshold sqrt({nu})")
    k = branch_sqrt(z)
    return k, lam / k


def _interface(wa, wb):
    rho = wa / wb
    return 0.5 * np.array([[1 + rho, 1 - rho], [1 - rho, 1 + rho]], dtype=complex)


def transfer(model, lam, derivative=False):
    """Chain transfer matrix (and its lambda-derivative)."""
    k, dk = wavenumber(lam, model.nu)
    Pi = np.eye(2, dtype=complex)
    dPi = np.zeros((2, 2), dtype=complex)
    prev = None
    for l, w in model.segments:
        if prev is not None and prev != w:
            J = _interface(prev, w)
            Pi = J @ Pi
            dPi = J @ dPi
        e = cmath.exp(1j * k * l)
        P = np.diag([e, 1 / e])
        dP = np.diag([1j * l * dk * e, -1j * l * dk / e])
        dPi = dP @ Pi + P @ dPi
        Pi = P @ Pi
        prev = w
    return (Pi, dPi) if derivative else Pi


def _s_from_transfer(Pi, dPi=None):
    p11, p12, p21, p22 = Pi[0, 0], Pi[0, 1], Pi[1, 0], Pi[1, 1]
    if abs(p22) < 1e-300:
        raise SolverError("singular transfer-to-scattering conversion")
    det = p11 * p22 - p12 * p21
    S = np.array([[-p21 / p22, 1 / p22], [det / p22, p12 / p22]], dtype=complex)
    if dPi is None:
        return S
    q11, q12, q21, q22 = dPi[0, 0], dPi[0, 1], dPi[1, 0], dPi[1, 1]
    ddet = q11 * p22 + p11 * q22 - q12 * p21 - p12 * q21
    d2 = p22 * p22
    dS = np.array([[-(q21 * p22 - p21 * q22) / d2, -q22 / d2],
                   [(ddet * p22 - det * q22) / d2, (q12 * p22 - p12 * q22) / d2]], dtype=complex)
    return S, dS


def s_matrix(model, lam, normalized=False):
    S = _s_from_transfer(transfer(model, lam))
    return normalize(model, S) if normalized else S


def normalize(model, A):
    h = np.sqrt([model.wL, model.wR])
    return (h[:, None] * A) / h[None, :]


def s_derivative(model, lam, normalized=False):
    S, dS = _s_from_transfer(*transfer(model, lam, derivative=True))
    if normalized:
        return normalize(model, S), normalize(model, dS)
    return S, dS


def time_delay(model, lam, normalized=True):
    """T(lambda) = -i S^{-1} S'(lambda)."""
    S, dS = s_derivative(model, lam, normalized)
    return -1j * np.linalg.solve(S, dS)


def time_delay_fd(model, lam, h=1e-4, normalized=True):
    S = s_matrix(model, lam, normalized)
    dS = (s_matrix(model, lam + h, normalized) - s_matrix(model, lam - h, normalized)) / (2 * h)
    return -1j * np.linalg.solve(S, dS)


@dataclass
class OracleT0:
    T0: np.ndarray           # weight-normalized, real symmetric
    S0: np.ndarray           # weight-normalized
    t1: float                # on the +1 eigenvector of S(0)
    t2: float                # on the -1 eigenvector
    v_plus: np.ndarray
    v_minus: np.ndarray
    t1_closed_form: float
    t2_closed_form: float


def closed_form_t1(model):
    return 2 * model.volume / (model.wL + model.wR)


def closed_form_t2(model):
    return 2 * model.wL * model.wR / (model.wL + model.wR) * sum(l / w for l, w in model.segments)


def oracle_T0(model, tol=1e-10):
    if model.nu != 0:
        raise ParameterError("the scattering-length oracle uses the constant mode (nu = 0)")
    T = time_delay(model, 0.0, normalized=True)
    S = s_matrix(model, 0.0, normalized=True)
    if np.abs(T.imag).max() > 1e-10 or np.abs(S.imag).max() > 1e-12:
        raise SolverError("T(0) or S(0) not real")
    T = 0.5 * (T.real + T.real.T)
    S = 0.5 * (S.real + S.real.T)
    w, V = np.linalg.eigh(S)
    vm, vp = V[:, 0], V[:, 1]
    t1 = float(vp @ T @ vp)
    t2 = float(vm @ T @ vm)
    c1 = closed_form_t1(model)
    if abs(t1 - c1) > tol * max(1.0, abs(c1)):
        raise SolverError(f"t1 = {t1} differs from closed form {c1}")
    return OracleT0(T, S, t1, t2, vp, vm, c1, closed_form_t2(model))


def junction_s(wa, wb):
    """Scattering matrix of a bare interface between weights wa and wb."""
    return _s_from_transfer(_interface(wa, wb))


def redheffer(a, b):
    """Star product of two-port scattering matrices joined at a's right end."""
    a11, a12, a21, a22 = a[0, 0], a[0, 1], a[1, 0], a[1, 1]
    b11, b12, b21, b22 = b[0, 0], b[0, 1], b[1, 0], b[1, 1]
    d = 1 - a22 * b11
    if abs(d) < 1e-300:
        raise SolverError("star product undefined (closed loop resonance)")
    return np.array([[a11 + a12 * b11 * a21 / d, a12 * b12 / d],
                     [b21 * a21 / d, b22 + b21 * a22 * b12 / d]], dtype=complex)


def chain_s(left, right, lam):
    """S of left.concat(right) assembled from the parts."""
    Sa = s_matrix(left, lam)
    Sb = s_matrix(right, lam)
    if left.wR != right.wL:
        Sa = redheffer(Sa, junction_s(left.wR, right.wL))
    return redheffer(Sa, Sb)


def mode_table(model, lams):
    """Rows (lambda, S entries, T entries) in the weight-normalized basis."""
    rows = []
    for lam in lams:
        S = s_matrix(model, lam, normalized=True)
        T = time_delay(model, lam, normalized=True)
        row = [float(lam)]
        for A in (S, T):
            for z in A.ravel():
                row += [float(z.real), float(z.imag)]
        rows.append(row)
    return rows


def mode_csv(model, lams):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["lambda"]
    for name in ("S", "T"):
        for i in range(2):
            for j in range(2):
                head += [f"re_{name}{i}{j}", f"im_{name}{i}{j}"]
    w.writerow(head)
    for row in mode_table(model, lams):
        w.writerow([repr(x) for x in row])
    return buf.getvalue()
