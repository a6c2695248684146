#!/usr/bin/env python3
"""Freeze reference values for the test suite.

Every value here comes from a closed form or from an exact symbolic solve
that shares no code with the package.  Run once; the JSON is checked in.
"""
import json
import math
import os

import sympy as sp


def chain_scattering(segments):
    """Exact S(lambda) of a chain of flat cylinders for the constant mode.

    Solves the matching problem directly: unknown amplitudes per segment,
    continuity of u and w u' at each interface, unit incoming wave at one
    end and none at the other.
    """
    lam = sp.symbols("lam")
    m = len(segments)
    xs = [0]
    for l, _ in segments:
        xs.append(xs[-1] + sp.nsimplify(l))
    S = sp.zeros(2, 2)
    for inc in (0, 1):
        A = sp.symbols(f"A0:{m}")
        B = sp.symbols(f"B0:{m}")
        eqs = []
        for j in range(m - 1):
            x = xs[j + 1]
            wa, wb = sp.nsimplify(segments[j][1]), sp.nsimplify(segments[j + 1][1])
            ua = A[j] * sp.exp(sp.I * lam * x) + B[j] * sp.exp(-sp.I * lam * x)
            ub = A[j + 1] * sp.exp(sp.I * lam * x) + B[j + 1] * sp.exp(-sp.I * lam * x)
            dua = sp.I * lam * (A[j] * sp.exp(sp.I * lam * x) - B[j] * sp.exp(-sp.I * lam * x))
            dub = sp.I * lam * (A[j + 1] * sp.exp(sp.I * lam * x) - B[j + 1] * sp.exp(-sp.I * lam * x))
            eqs += [sp.Eq(ua, ub), sp.Eq(sp.expand(wa * dua / lam), sp.expand(wb * dub / lam))]
        X = xs[-1]
        # incoming amplitude at the left end is A0, at the right end the
        # coefficient of e^{-i lam (x - X)}
        a_in_left = A[0]
        a_in_right = B[m - 1] * sp.exp(-sp.I * lam * X)
        a_out_left = B[0]
        a_out_right = A[m - 1] * sp.exp(sp.I * lam * X)
        eqs += [sp.Eq(a_in_left, 1 if inc == 0 else 0), sp.Eq(a_in_right, 1 if inc == 1 else 0)]
        sol = sp.solve(eqs, list(A) + list(B), dict=True)[0]
        S[0, inc] = sp.simplify(a_out_left.subs(sol))
        S[1, inc] = sp.simplify(a_out_right.subs(sol))
    return lam, S


def time_delay_at_zero(segments):
    lam, S = chain_scattering(segments)
    wl, wr = segments[0][1], segments[-1][1]
    W = sp.diag(sp.sqrt(sp.nsimplify(wl)), sp.sqrt(sp.nsimplify(wr)))
    Sn = W * S * W.inv()
    dS = Sn.diff(lam)
    T0 = sp.simplify((-sp.I * Sn.inv() * dS).subs(lam, 0))
    S0 = sp.simplify(Sn.subs(lam, 0))
    Su = sp.simplify(S.subs(lam, 0))
    ev = S0.eigenvects()
    t = {}
    for val, _, vecs in ev:
        v = vecs[0] / sp.sqrt((vecs[0].T * vecs[0])[0])
        t[int(val)] = float(sp.simplify((v.T * T0 * v)[0]))
    return t, [[float(x) for x in row] for row in Su.tolist()]


def main():
    out = {}
    t, S0 = time_delay_at_zero([(1, 2), (1, 1)])
    out["junction_t1"] = t[1]
    out["junction_t2"] = t[-1]
    out["junction_r11"] = S0[0][0]
    out["junction_r12"] = S0[1][0]
    t, _ = time_delay_at_zero([(2, 1)])
    out["flat_t1"] = t[1]
    out["flat_t2"] = t[-1]
    t, _ = time_delay_at_zero([(0.5, 1), (0.7, 3), (0.4, 2)])
    out["chain3_t1"] = t[1]
    out["chain3_t2"] = t[-1]
    # flat cylinder L = 2, circumference 1, cylinders over both ends
    out["flat_qinv"] = {str(a): a + 1.0 for a in (1, 2, 3)}
    out["flat_effective_volume"] = 2 + 1 / math.pi
    out["flat_C1"] = 2 + 1 / math.pi
    out["flat_C2"] = 2.0
    out["circle_nu1"] = 4 * math.pi ** 2
    out["disk_effective_volume"] = 3 * math.pi
    vol, v1, v2, dist = 3.0, 2.0, 1.0, 2.0
    vstar = vol + (v1 + v2) / math.pi
    out["junction_C1_ideal"] = 2 * vstar * v1 * v2 / (1.0 * (v1 + v2))
    out["junction_C2_ideal"] = 2 / vol * dist ** 2 * v1 * v2 / (v1 + v2)
    out["les_dims"] = {"annulus": [0, 1, 2, 1, 1, 2, 1, 0], "flat_cylinder": [0, 1, 2, 1, 1, 2, 1, 0],
                       "junction": [0, 1, 2, 1, 1, 2, 1, 0], "disk": [0, 1, 1, 0, 0, 1, 1, 0],
                       "genus1_one_hole": [0, 1, 1, 2, 2, 1, 1, 0]}
    path = os.path.join(os.path.dirname(__file__), "..", "tests", "oracle_values.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
