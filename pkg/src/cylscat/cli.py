"""Command line front end.

Exit codes: 0 ok, 2 configuration, 3 mesh, 4 solver, 5 audit failure.
Outputs are collected in memory and written only after the command
finished, so a failing run leaves no partial files behind.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import dec
from .complex import (betti_numbers, generate_model, les_ranks, read_mesh,
                      relative_betti_numbers, write_mesh)
from .config import load
from .errors import AuditError, ConfigError, CylscatError
from .modes import PiecewiseCylinderModel, mode_csv, oracle_T0

COMMANDS = ("mesh-info", "hodge", "scatlen", "modes", "bounds", "convergence", "run")


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    raise TypeError(f"not serializable: {type(x)}")


def build(cfg, resolution=None):
    if cfg.mesh:
        return read_mesh(cfg.mesh)
    params = {k: v for k, v in cfg.params.items() if k not in ("nu", "lmax", "npts", "write")}
    return generate_model(cfg.model, params, resolution or cfg.resolution)


def mesh_summary(M):
    out = dict(label=M.label, dim=M.dim, counts=[M.count(k) for k in range(M.dim + 1)],
               euler_characteristic=M.euler_characteristic(), orientable=M.orientable,
               volume=M.volume(), boundary_volumes=M.boundary_volumes(),
               betti=list(betti_numbers(M)))
    if M.boundary:
        out["relative_betti"] = list(relative_betti_numbers(M))
    return out


def cmd_mesh_info(cfg, files):
    M = build(cfg)
    info = mesh_summary(M)
    files["mesh.json"] = _json(info)
    if cfg.params.get("write"):
        files["__mesh__"] = M
    return info, True


def cmd_hodge(cfg, files):
    from .dec import assemble, boundary_spectrum
    from .hodge import harmonic_basis
    from .les import exactness_audit
    M = build(cfg)
    ops = assemble(M)
    info = dict(harmonic={}, spectrum={})
    for bc in ("absolute", "relative"):
        for p in range(M.dim + 1):
            H = harmonic_basis(ops, p, bc)
            info["harmonic"][f"{bc}_{p}"] = dict(betti=H.betti, max_residual=float(H.residuals.max(initial=0.0)))
    for p in range(M.dim):
        s = boundary_spectrum(ops, p)
        info["spectrum"][str(p)] = dict(nu1=s.nu1, mu1=s.mu1, eigenvalues=s.eigenvalues.tolist())
    rep = exactness_audit(ops, raise_on_failure=False)
    info["exact"] = rep.exact
    info["ranks"] = les_ranks(M)
    files["hodge.json"] = _json(info)
    files["ranks.csv"] = rep.to_csv()
    return info, rep.exact


def _oracle_model(cfg):
    prm = cfg.params
    if "segments" in prm:
        segs = prm["segments"]
    elif cfg.model == "flat_cylinder" and not cfg.mesh:
        segs = ((float(prm.get("L", 2.0)), float(prm.get("circumference", 1.0))),)
    elif cfg.model == "junction" and not cfg.mesh:
        segs = ((1.0, 2.0), (1.0, 1.0))
    else:
        return None
    return PiecewiseCylinderModel(segs, float(prm.get("nu", 0.0)))


def cmd_scatlen(cfg, files, bounds=False):
    from .pipeline import analyze
    M = build(cfg)
    ok = True
    info = {}
    for p in cfg.degrees:
        A = analyze(M, p, cfg.a_values, cfg.thickness, cfg.mu1, cfg.method, cfg.tol_slope,
                    bounds=bounds, exactness=False, audit_tol=cfg.audit_tol)
        d = A.report.to_dict()
        d["audit"] = A.audit
        info[f"p{p}"] = dict(eigenvalues=A.report.eigenvalues.tolist(), passed=bool(A.audit["passed"]))
        files[f"scatlen_p{p}.json"] = _json(d)
        files[f"qinv_p{p}.csv"] = A.report.to_csv()
        ok &= bool(A.audit["passed"])
        if A.bounds is not None:
            files[f"bounds_p{p}.json"] = A.bounds.to_json() + "\n"
            files[f"bounds_p{p}.csv"] = A.bounds.to_csv()
            info[f"p{p}"]["bounds_ok"] = A.bounds.ok
            info[f"p{p}"]["bound_warnings"] = A.bounds.warnings
        if cfg.oracle and p == 0:
            om = _oracle_model(cfg)
            if om is not None:
                o = oracle_T0(om)
                ev = A.report.eigenvalues
                ref = np.sort([o.t1, o.t2])
                rel = float(np.max(np.abs(ev - ref) / ref)) if len(ev) == 2 else None
                cmp = dict(t1=o.t1, t2=o.t2, t1_closed_form=o.t1_closed_form,
                           t2_closed_form=o.t2_closed_form, scatlen_eigenvalues=ev.tolist(),
                           max_relative_difference=rel)
                files["oracle.json"] = _json(cmp)
                info["oracle"] = cmp
    return info, ok


def cmd_bounds(cfg, files):
    return cmd_scatlen(cfg, files, bounds=True)


def cmd_modes(cfg, files):
    om = _oracle_model(cfg)
    if om is None:
        raise ConfigError("modes needs --segments l:w,... or a cylinder/junction model")
    lmax = float(cfg.params.get("lmax", 0.9 * om.mu1))
    npts = int(cfg.params.get("npts", 100))
    grid = np.linspace(0.0, lmax, npts + 1)[1:]
    files["modes.csv"] = mode_csv(om, grid)
    info = dict(segments=om.segments, nu=om.nu, mu1=om.mu1)
    if om.nu == 0:
        o = oracle_T0(om)
        info.update(t1=o.t1, t2=o.t2, T0=o.T0, S0=o.S0,
                    t1_closed_form=o.t1_closed_form, t2_closed_form=o.t2_closed_form)
    files["oracle.json"] = _json(info)
    return info, True


def _order(res, vals):
    """Self-convergence order fitted to successive differences."""
    vals = np.asarray(vals, dtype=float)
    if len(vals) < 3:
        return None
    d = np.abs(np.diff(vals))
    h = 1.0 / np.asarray(res[1:], dtype=float)
    if np.any(d <= 1e-13 * max(np.abs(vals).max(), 1.0)):
        return None
    slope = np.polyfit(np.log(h), np.log(d), 1)[0]
    return float(slope)


def convergence_table(cfg, resolutions=None):
    from .pipeline import analyze
    res = list(resolutions or cfg.resolutions)
    if len(res) < 3:
        raise ConfigError("convergence needs at least three resolutions")
    rows = []
    for r in res:
        M = build(cfg, r)
        for p in cfg.degrees:
            A = analyze(M, p, cfg.a_values, cfg.thickness, cfg.mu1, cfg.method, cfg.tol_slope,
                        bounds=False, exactness=False, audit_tol=cfg.audit_tol)
            vy = sum(M.boundary_volumes().values())
            rows.append(dict(resolution=r, degree=p, nu1=A.spectrum.nu1,
                             t=A.report.eigenvalues.tolist(),
                             closed_form=2 * M.volume() / vy,
                             eps_star=A.audit["eps_star"],
                             quadratic_defect=A.audit["quadratic_defect"],
                             corollary_defect=A.audit.get("corollary_defect"),
                             passed=bool(A.audit["passed"])))
    orders = {}
    for p in cfg.degrees:
        rr = [r for r in rows if r["degree"] == p]
        rs = [r["resolution"] for r in rr]
        orders[f"p{p}_nu1"] = _order(rs, [r["nu1"] for r in rr])
        k = len(rr[0]["t"])
        for i in range(k):
            orders[f"p{p}_t{i}"] = _order(rs, [r["t"][i] for r in rr])
    return rows, orders


def cmd_convergence(cfg, files):
    rows, orders = convergence_table(cfg)
    k = max(len(r["t"]) for r in rows)
    head = ["resolution", "degree", "nu1"] + [f"t{i}" for i in range(k)] + [
        "closed_form", "eps_star", "quadratic_defect", "corollary_defect"]
    lines = [",".join(head)]
    for r in rows:
        t = r["t"] + [""] * (k - len(r["t"]))
        vals = [r["resolution"], r["degree"], r["nu1"]] + t + [
            r["closed_form"], r["eps_star"], r["quadratic_defect"], r["corollary_defect"]]
        lines.append(",".join("" if v is None or v == "" else repr(v) for v in vals))
    files["convergence.csv"] = "\n".join(lines) + "\n"
    files["orders.json"] = _json(orders)
    return dict(rows=rows, orders=orders), all(r["passed"] for r in rows)


def cmd_run(cfg, files):
    info, ok = cmd_mesh_info(cfg, files)
    h, ok_h = cmd_hodge(cfg, files)
    s, ok_s = cmd_scatlen(cfg, files, bounds=True)
    summary = dict(mesh=info, exact=h["exact"], scatlen=s)
    files["summary.json"] = _json(summary)
    return summary, ok and ok_h and ok_s


HANDLERS = {"mesh-info": cmd_mesh_info, "hodge": cmd_hodge, "scatlen": cmd_scatlen,
            "modes": cmd_modes, "bounds": cmd_bounds, "convergence": cmd_convergence,
            "run": cmd_run}


def _pairs(extra):
    out = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            val = extra[i + 1]
            i += 2
        else:
            val = "true"
            i += 1
        out.append((key, val))
    return out


def parser():
    ap = argparse.ArgumentParser(prog="cylscat", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--quiet", action="store_true")
    ap.epilog = ("Any other --key value pair overrides a configuration entry "
                 "(model, mesh, resolution, p, a, thickness, out, seed, ...) or sets a "
                 "model parameter (L, circ, r, segments, ...).")
    return ap


def write_outputs(outdir, files):
    os.makedirs(outdir, exist_ok=True)
    for name, content in sorted(files.items()):
        if name == "__mesh__":
            write_mesh(content, os.path.join(outdir, "mesh.mwce"))
            continue
        with open(os.path.join(outdir, name), "w") as fh:
            fh.write(content)


def main(argv=None):
    ap = parser()
    args, extra = ap.parse_known_args(argv)
    files = {}
    try:
        cfg = load(args.config, _pairs(extra))
        dec.SEED = cfg.seed
        info, ok = HANDLERS[args.command](cfg, files)
    except CylscatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    write_outputs(cfg.output, files)
    if not args.quiet:
        sys.stdout.write(_json(info))
    if not ok:
        print("error: audit failure", file=sys.stderr)
        return AuditError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
