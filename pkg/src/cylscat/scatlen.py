"""Scattering lengths from cylinder elongation.

For each cylinder length a the connecting map on the elongated manifold M_a
gives the Gram form Q_a and q(a).  The inverse q(a)^{-1} is affine in a up to
an exponentially small remainder; twice its intercept is the scattering
length on the (-1)-eigenspace of S(0).  The Hodge star supplies the other
block.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .complex import CylinderSpec, attach_cylinder
from .dec import assemble
from .errors import FitError, StarDiscretizationError, StructureError
from .hodge import boundary_basis, connecting_rep
from .les import restriction_matrix, s_zero


@dataclass
class QSample:
    a: float
    q_matrix: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    residual: float
    mesh_id: str
    layers: int = 0

    @property
    def empty(self):
        return self.q_matrix.size == 0

    @property
    def q_inv(self):
        return np.linalg.inv(self.q_matrix)


def default_layer_thickness(M):
    """Layer thickness for cylinder samples: the generator's mesh spacing when
    known, otherwise the thinnest collar layer."""
    if getattr(M, "spacing", None):
        return M.spacing
    th = [c.thickness for c in M.collars.values()]
    return min(th) if th else 0.1


def elongate(M, a, thickness=None, max_thickness=np.inf):
    """M_a with layer count proportional to a at fixed layer thickness."""
    if a == 0:
        return M, 0
    tau = default_layer_thickness(M) if thickness is None else thickness
    x = a / tau
    layers = max(1, int(round(x)) if abs(x - round(x)) < 1e-6 else int(math.ceil(x)))
    return attach_cylinder(M, CylinderSpec(a, layers, max_thickness=max_thickness)), layers


def q_sample(M, ops, p, a, thickness=None, method="auto", frame=None):
    """Gram form of the connecting map on M_a for an orthonormal basis of the
    (-1)-eigenspace of S(0) (the orthocomplement of ker of the connecting map)."""
    if frame is None:
        frame = s_zero(ops, p, with_star=False).minus_frame()
    Hy = boundary_basis(ops, p).vectors
    Phi = Hy @ frame
    My = ops.boundary_ops.mass[p]
    G = Phi.T @ (My @ Phi)
    if Phi.shape[1] == 0:
        z = np.zeros((0, 0))
        return QSample(a, z, z, z, 0.0, M.label, 0)
    Ma, layers = elongate(M, a, thickness)
    opa = ops if Ma is M else assemble(Ma)
    Ya, Y = opa.view.Y, ops.view.Y
    if Ya.count(p) != Y.count(p) or not np.array_equal(Ya.cells[p], Y.cells[p]):
        raise StructureError("boundary of the elongated manifold does not match Y")
    reps = np.column_stack([connecting_rep(opa, Phi[:, i], p, method=method).values
                            for i in range(Phi.shape[1])])
    Q = reps.T @ (opa.mass[p + 1] @ reps)
    Q = 0.5 * (Q + Q.T)
    # coclosedness residual of the representatives against relative test forms
    rel = opa.dofs(p, "relative")
    g = opa.D[p][:, rel].T @ (opa.mass[p + 1] @ reps)
    resid = float(np.abs(g).max() / max(np.abs(Q).max(), 1e-300)) if g.size else 0.0
    q = np.linalg.solve(G, Q)
    return QSample(float(a), q, Q, G, resid, Ma.label, layers)


@dataclass
class ScatteringReport:
    degree: int
    T0_minus: np.ndarray
    minus_frame: np.ndarray
    slope: np.ndarray
    intercept: np.ndarray
    fit_a: list
    residuals: dict
    kappa: float = None
    kappa_c: float = None
    kappa_exp: float = None
    mu1: float = None
    T0: np.ndarray = None
    provenance: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)
    audit: dict = field(default_factory=dict)

    @property
    def eigenvalues(self):
        A = self.T0 if self.T0 is not None else self.T0_minus
        return np.linalg.eigvalsh(0.5 * (A + A.T)) if A.size else np.zeros(0)

    def to_dict(self):
        def mat(A):
            return None if A is None else np.asarray(A).tolist()
        return {
            "degree": self.degree,
            "T0": mat(self.T0),
            "T0_minus": mat(self.T0_minus),
            "minus_frame": mat(self.minus_frame),
            "eigenvalues": self.eigenvalues.tolist(),
            "fit": {
                "a": self.fit_a,
                "slope": mat(self.slope),
                "intercept": mat(self.intercept),
                "residuals": {repr(k): v for k, v in self.residuals.items()},
                "kappa": self.kappa,
                "kappa_c": self.kappa_c,
                "kappa_exp": self.kappa_exp,
                "mu1": self.mu1,
            },
            "provenance": self.provenance,
            "audit": self.audit,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = self.T0_minus.shape[0]
        w.writerow(["a"] + [f"qinv_{i}{j}" for i in range(k) for j in range(k)])
        for s in self.samples:
            if s.empty:
                continue
            w.writerow([repr(s.a)] + [repr(float(x)) for x in s.q_inv.ravel()])
        return buf.getvalue()


def extrapolate_T0(samples, mu1=None, degree=None, n_fit=3, tol_slope=1e-3,
                   noise=1e-11, frame=None):
    """Affine fit of q(a)^{-1} over the largest a, T0 = 2 * intercept."""
    samples = sorted(samples, key=lambda s: s.a)
    if len(samples) < 3 or len({s.a for s in samples}) != len(samples):
        raise FitError("need at least three samples with distinct a")
    if samples[0].empty:
        z = np.zeros((0, 0))
        return ScatteringReport(degree, z, frame if frame is not None else z, z, z,
                                [], {}, mu1=mu1, samples=samples,
                                provenance={"minus": "empty"})
    fit = samples[-n_fit:]
    a = np.array([s.a for s in fit])
    Y = np.array([s.q_inv for s in fit])
    k = Y.shape[1]
    X = np.column_stack([a, np.ones_like(a)])
    coef, *_ = np.linalg.lstsq(X, Y.reshape(len(a), -1), rcond=None)
    slope = coef[0].reshape(k, k)
    icpt = coef[1].reshape(k, k)
    icpt = 0.5 * (icpt + icpt.T)
    sdef = float(np.abs(slope - np.eye(k)).max())
    if sdef > tol_slope:
        raise FitError(f"slope defect {sdef:.3e} exceeds {tol_slope:g}")
    T0m = 2 * icpt
    resid = {}
    for s in samples:
        resid[s.a] = float(np.linalg.norm(s.q_inv - s.a * slope - coef[1].reshape(k, k)))
    rep = ScatteringReport(degree, T0m, frame, slope, icpt, a.tolist(), resid, mu1=mu1,
                           samples=samples, provenance={"minus": "q-fit"})
    rep.audit["slope_defect"] = sdef
    # decay of the remainder from the samples outside the fit window
    scale = max(np.abs(T0m).max(), 1.0)
    pts = [(s.a, resid[s.a]) for s in samples[:-n_fit] if s.a > 0 and resid[s.a] > noise * scale]
    if len(pts) >= 2:
        aa = np.array([x for x, _ in pts])
        rr = np.array([r for _, r in pts])
        A = np.column_stack([np.ones_like(aa), -aa])
        (logc, kappa), *_ = np.linalg.lstsq(A, np.log(rr / aa), rcond=None)
        rep.kappa, rep.kappa_c = float(kappa), float(math.exp(logc))
        # the same data without the linear prefactor
        (_, kexp), *_ = np.linalg.lstsq(A, np.log(rr), rcond=None)
        rep.kappa_exp = float(kexp)
    return rep


def complete_T0(rep_p, rep_q, z_p, z_q, tol=1e-6):
    """Full T0 in degree p: the (-1) block from the fit, the Im(r) block from
    the degree n-1-p fit conjugated by the discrete star."""
    Um = z_p.minus_frame()
    Up = z_p.frame
    X = z_p.star
    Vm = z_q.minus_frame()
    k = Um.shape[0]
    T = np.zeros((k, k))
    if Um.shape[1]:
        T += Um @ rep_p.T0_minus @ Um.T
    if Up.shape[1]:
        if Vm.shape[1] != Up.shape[1]:
            raise StarDiscretizationError(
                f"star image has dimension {Vm.shape[1]}, kernel block {Up.shape[1]}")
        XU = X @ Up
        leak = float(np.linalg.norm(XU - Vm @ (Vm.T @ XU)))
        if leak > tol:
            raise StarDiscretizationError(f"star does not map Im(r) to the (-1) space (defect {leak:.3e})")
        B = XU.T @ Vm @ rep_q.T0_minus @ Vm.T @ XU
        T += Up @ B @ Up.T
    else:
        leak = 0.0
    out = ScatteringReport(rep_p.degree, rep_p.T0_minus, rep_p.minus_frame, rep_p.slope,
                           rep_p.intercept, rep_p.fit_a, rep_p.residuals, rep_p.kappa,
                           rep_p.kappa_c, rep_p.kappa_exp, rep_p.mu1, 0.5 * (T + T.T), dict(rep_p.provenance),
                           rep_p.samples, dict(rep_p.audit))
    out.provenance["kernel"] = "star-conjugation" if Up.shape[1] else "empty"
    out.audit["star_leak"] = leak
    out.audit["commutator_S0"] = float(np.abs(out.T0 @ z_p.S0 - z_p.S0 @ out.T0).max()) if k else 0.0
    return out


def main3_audit(report, ops, z_p, report_q=None, z_q=None, tol=1e-3):
    """Checks of the scattering-length identities.

    * Q_a (a + T0/2) = G at the largest sample;
    * T0^{-1} = (E + star^T E_q star)/2 with E = 2 (q(a)^{-1} - a)^{-1} taken
      from the raw largest sample in each degree;
    * R^T T0 R / 2 is the orthogonal projector onto (ker r)^perp.
    """
    out = {}
    big = max(report.samples, key=lambda s: s.a) if report.samples else None
    if big is not None and not big.empty:
        k = big.Q.shape[0]
        lhs = big.Q @ (big.a * np.eye(k) + 0.5 * report.T0_minus)
        out["quadratic_defect"] = float(np.abs(lhs - big.G).max() / max(np.abs(big.G).max(), 1e-300))
    else:
        out["quadratic_defect"] = 0.0
    if report.T0 is not None:
        Tinv = np.linalg.pinv(report.T0)

        def ext(rep, z):
            if not rep.samples or rep.samples[-1].empty:
                return np.zeros((z.S0.shape[0],) * 2)
            s = max(rep.samples, key=lambda x: x.a)
            Em = np.linalg.inv(np.linalg.inv(s.q_matrix) - s.a * np.eye(s.q_matrix.shape[0]))
            U = z.minus_frame()
            return U @ Em @ U.T

        E = ext(report, z_p)
        if report_q is not None and z_q is not None and z_p.star.size:
            Eq = ext(report_q, z_q)
            rhs = 0.5 * (E + z_p.star.T @ Eq @ z_p.star)
        else:
            rhs = 0.5 * E
        out["corollary_defect"] = float(np.abs(Tinv - rhs).max() / max(np.abs(Tinv).max(), 1e-300))
        p = report.degree
        if p < ops.dim:
            R = restriction_matrix(ops, p)
            lhs = 0.5 * R.T @ report.T0 @ R
            if R.size:
                _, s, Vt = np.linalg.svd(R)
                r = int(np.sum(s > 1e-8 * max(s.max(), 1.0)))
                P = Vt[:r].T @ Vt[:r]
            else:
                P = lhs
            out["projector_defect"] = float(np.abs(lhs - P).max()) if lhs.size else 0.0
    out["passed"] = all(v <= tol for k, v in out.items() if k.endswith("defect"))
    report.audit.update(out)
    return out


def scattering_length(M, p, a_values, ops=None, thickness=None, mu1=None, method="auto",
                      tol_slope=1e-3):
    """q samples over a schedule and the fitted (-1) block of T0."""
    ops = ops or assemble(M)
    z = s_zero(ops, p, with_star=False)
    frame = z.minus_frame()
    samples = [q_sample(M, ops, p, a, thickness, method, frame) for a in a_values]
    rep = extrapolate_T0(samples, mu1, p, tol_slope=tol_slope, frame=frame)
    return rep


def q_monotone(samples, tol=1e-10):
    """Largest violation of q(a1) >= q(a2) (PD order) over pairs a1 < a2."""
    worst = -np.inf
    ss = sorted([s for s in samples if not s.empty], key=lambda s: s.a)
    for i in range(len(ss)):
        for j in range(i + 1, len(ss)):
            d = ss[i].q_matrix - ss[j].q_matrix
            worst = max(worst, -np.linalg.eigvalsh(0.5 * (d + d.T)).min())
    return worst
