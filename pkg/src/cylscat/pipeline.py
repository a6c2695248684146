"""End-to-end analysis of one complex: harmonic spaces, the long exact
sequence, scattering lengths in complementary degrees and the bounds."""
from dataclasses import dataclass, field

import numpy as np

from .bounds import sandwich_audit
from .dec import assemble, boundary_spectrum
from .les import exactness_audit, s_zero
from .scatlen import complete_T0, main3_audit, q_monotone, scattering_length


@dataclass
class Analysis:
    degree: int
    ops: object
    z: object
    z_dual: object
    report: object
    report_dual: object
    audit: dict
    exactness: object = None
    bounds: object = None
    spectrum: object = None
    timings: dict = field(default_factory=dict)


def _threshold(ops):
    m = ops.boundary_ops.dim
    return min(boundary_spectrum(ops, q).mu1 for q in range(m + 1))


def component_thresholds(ops):
    """First threshold of each boundary component on its own."""
    M = ops.complex
    out = {}
    for nm in ops.view.names:
        Yops = assemble(M.boundary_view((nm,)).Y)
        out[nm] = min(boundary_spectrum(Yops, q).mu1 for q in range(Yops.dim + 1))
    return out


def analyze(M, p, a_values, thickness=None, mu1=None, method="auto", tol_slope=1e-3,
            bounds=True, exactness=True, ops=None, audit_tol=1e-3):
    """Full T0 in degree p with audits.

    The (-1) block is fitted in degree p, the Im(r) block comes from the fit
    in degree n-1-p conjugated by the discrete star.
    """
    ops = ops or assemble(M)
    n = ops.dim
    q = n - 1 - p
    spec = boundary_spectrum(ops, p)
    if mu1 is None:
        mu1 = _threshold(ops)
    z = s_zero(ops, p)
    zq = s_zero(ops, q)
    rep = scattering_length(M, p, a_values, ops, thickness, mu1, method, tol_slope)
    repq = rep if q == p else scattering_length(M, q, a_values, ops, thickness, mu1, method, tol_slope)
    full = complete_T0(rep, repq, z, zq)
    aud = main3_audit(full, ops, z, repq, zq, tol=audit_tol)
    aud["q_monotone_violation"] = q_monotone(rep.samples)
    aud["eps_star"] = z.eps_star
    aud["S0_squared_defect"] = float(np.abs(z.S0 @ z.S0 - np.eye(len(z.S0))).max()) if z.S0.size else 0.0
    out = Analysis(p, ops, z, zq, full, repq, aud, spectrum=spec)
    if exactness:
        out.exactness = exactness_audit(ops, raise_on_failure=False)
    if bounds and p in (0, n - 1):
        out.bounds = sandwich_audit(full, ops, z)
    return out
