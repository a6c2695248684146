#!/usr/bin/env python3
"""Two-volume junction: fitted T0 against the transfer-matrix oracle,
remainder decay and the two-component sandwich."""
import argparse
from dataclasses import dataclass

from cylscat.complex import junction
from cylscat.modes import PiecewiseCylinderModel, oracle_T0
from cylscat.pipeline import analyze, component_thresholds


@dataclass
class Setup:
    resolution: int = 32
    a_values: tuple = (0.5, 0.75, 1.0, 1.25, 2.0, 2.5, 3.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=Setup.resolution)
    s = Setup(resolution=ap.parse_args().resolution)
    M = junction(resolution=s.resolution)
    A = analyze(M, 0, s.a_values, thickness=M.spacing)
    o = oracle_T0(PiecewiseCylinderModel(((1.0, 2.0), (1.0, 1.0))))
    ev = A.report.eigenvalues
    print("scatlen eigenvalues", ev, " oracle", sorted([o.t1, o.t2]))
    print("relative differences", ev / sorted([o.t1, o.t2]) - 1)
    mu = component_thresholds(A.ops)
    print("kappa", A.report.kappa, "kappa_exp", A.report.kappa_exp, "thresholds", mu)
    b = A.bounds
    print(f"C2 = {b.C2:.6f} <= t2 = {b.t2:.6f} <= C1 = {b.C1:.6f}  (distance {b.distance:.6f})")
    print("audit", A.audit)


if __name__ == "__main__":
    main()
