#!/usr/bin/env python3
"""q(a)^{-1} on the flat cylinder: exact affine law and T0 = L."""
import argparse
import time
from dataclasses import dataclass

import numpy as np

from cylscat.complex import flat_cylinder
from cylscat.pipeline import analyze


@dataclass
class Setup:
    L: float = 2.0
    circumference: float = 1.0
    resolution: int = 32
    a_values: tuple = (1.0, 2.0, 3.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=Setup.resolution)
    ap.add_argument("--L", type=float, default=Setup.L)
    s = Setup(L=ap.parse_args().L, resolution=ap.parse_args().resolution)
    t = time.perf_counter()
    M = flat_cylinder(s.L, s.circumference, s.resolution)
    A = analyze(M, 0, s.a_values, bounds=True)
    r = A.report
    print("a, q^-1 (-1 block):")
    for smp in r.samples:
        print(f"  {smp.a:5.2f}  {smp.q_inv.ravel()}")
    print("slope", r.slope.ravel(), "intercept", r.intercept.ravel())
    print("T0 =\n", np.array2string(r.T0, precision=14))
    print("C2 <= t2 <= C1:", A.bounds.C2, A.bounds.t2, A.bounds.C1)
    print(f"{time.perf_counter() - t:.2f} s")


if __name__ == "__main__":
    main()
