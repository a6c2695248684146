#!/usr/bin/env python3
"""Unit disk, degree 1: t against 2 Vol(M)/Vol(Y) across a resolution ladder."""
import argparse
from dataclasses import dataclass

from cylscat.cli import _order
from cylscat.complex import disk
from cylscat.pipeline import analyze


@dataclass
class Ladder:
    radius: float = 1.0
    resolutions: tuple = (16, 32, 64)
    a_values: tuple = (1.0, 2.0, 3.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", default="16,32,64")
    cfg = Ladder(resolutions=tuple(int(x) for x in ap.parse_args().resolutions.split(",")))
    ts = []
    for res in cfg.resolutions:
        M = disk(cfg.radius, res)
        A = analyze(M, 1, cfg.a_values, bounds=False, exactness=False)
        t = float(A.report.eigenvalues[0])
        ref = 2 * M.volume() / sum(M.boundary_volumes().values())
        ts.append(t)
        print(f"res {res:3d}  t = {t:.12f}  2Vol/Vol(Y) = {ref:.12f}  diff = {t - ref:.2e}")
    print("self-convergence order", _order(cfg.resolutions, ts))


if __name__ == "__main__":
    main()
