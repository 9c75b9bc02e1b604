"""Command-line front end.

Subcommands: solve, curvature, verify-convex, scan-annulus, cap-check,
star-scan, selftest.  Flags mirror config keys and a --config file can be
merged with flag overrides (flags win).  Artifacts are written once at the
end of a run with locale-independent 17-significant-digit floats, so
identical configs produce byte-identical outputs.

Exit codes: 0 success, 1 parse/solver error, 2 theorem-predicate violation.

Grid fields are serialized as plain text: a header line `n h dims origin`
followed by one non-exterior node per line `i j k mask v` (mask codes:
1 interior, 2 cut; exterior nodes are implied).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, config, curvature, geometry, grid, kernels, pde, radial

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="ylab",
                                description="conformal-factor laboratory")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, domain=True, solver=True):
        sp.add_argument("--config", type=Path, help="config file to merge")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--formats", help="comma list: csv,json,field")
        if domain:
            sp.add_argument("--domain", choices=[k.replace("_", "-") for k in
                                                 config.DOMAIN_KINDS])
            sp.add_argument("--n", type=int)
            sp.add_argument("--R", type=float)
            sp.add_argument("--r0", help="radius (or comma list for scans)")
            sp.add_argument("--axes", help="comma list of semi-axes")
            sp.add_argument("--center", help="comma list")
            sp.add_argument("--normal", help="comma list")
            sp.add_argument("--offset", type=float)
            sp.add_argument("--smoothing-radius", type=float, dest="smoothing_radius")
        if solver:
            sp.add_argument("--path", choices=config.SOLVER_PATHS)
            sp.add_argument("--h", type=float)
            sp.add_argument("--tol", type=float)
            sp.add_argument("--M", type=float)
            sp.add_argument("--nodes", type=int)
            sp.add_argument("--preconditioner", choices=("auto", "jacobi", "mg"))

    add_common(sub.add_parser("solve", help="solve the factor equation"))
    cur = sub.add_parser("curvature", help="solve and report curvature")
    add_common(cur)
    cur.add_argument("--per-node", action="store_true", dest="per_node",
                     help="also write a per-node CSV")
    add_common(sub.add_parser("verify-convex",
                              help="check the convex-domain inequalities"))
    scan = sub.add_parser("scan-annulus", help="sweep annulus parameters")
    add_common(scan)
    scan.add_argument("--R-list", dest="R_list", help="comma list of outer radii")
    cap = sub.add_parser("cap-check", help="sphere-cap correspondence check")
    add_common(cap, domain=False)
    cap.add_argument("--i", type=int, help="cap size parameter")
    cap.add_argument("--n", type=int, default=None)
    star = sub.add_parser("star-scan", help="star-shaped slab family scan")
    add_common(star, domain=False)
    star.add_argument("--members", type=int)
    sub.add_parser("selftest", help="run quick internal checks")
    return p


def _merge_config(args) -> config.RunConfig:
    if getattr(args, "config", None):
        cfg = config.parse_config(Path(args.config).read_text())
    else:
        cfg = config.RunConfig()
    cfg.task = args.command

    if getattr(args, "domain", None):
        cfg.domain["kind"] = args.domain.replace("-", "_")
    dom = cfg.domain
    if getattr(args, "n", None) is not None and args.n:
        dom["n"] = args.n
    if getattr(args, "R", None) is not None:
        dom["R"] = args.R
    if getattr(args, "axes", None):
        dom["axes"] = _float_list(args.axes)
    if getattr(args, "center", None):
        dom["center"] = _float_list(args.center)
    if getattr(args, "normal", None):
        dom["normal"] = _float_list(args.normal)
    if getattr(args, "offset", None) is not None:
        dom["offset"] = args.offset
    if getattr(args, "smoothing_radius", None) is not None:
        dom["smoothing_radius"] = args.smoothing_radius

    if args.command == "scan-annulus":
        if getattr(args, "r0", None):
            cfg.scan["r0"] = _float_list(args.r0)
        if getattr(args, "R_list", None):
            cfg.scan["R"] = _float_list(args.R_list)
        elif getattr(args, "R", None) is not None:
            cfg.scan["R"] = [args.R]
    elif getattr(args, "r0", None):
        dom["r0"] = float(args.r0)

    for key in ("path", "h", "tol", "M", "nodes", "preconditioner"):
        val = getattr(args, key, None)
        if val is not None:
            cfg.solver[key] = val
    if getattr(args, "out", None):
        cfg.output["dir"] = str(args.out)
    if getattr(args, "formats", None):
        cfg.output["formats"] = [f.strip() for f in args.formats.split(",")]
    if getattr(args, "per_node", False):
        cfg.output["per_node"] = True
    if args.command == "cap-check" and getattr(args, "i", None):
        cfg.cap["i"] = args.i
        if args.n:
            cfg.domain["n"] = args.n
    if args.command == "star-scan" and getattr(args, "members", None):
        cfg.star["members"] = args.members
    return cfg


def _outdir(cfg) -> Path:
    out = Path(cfg.output.get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    print(f"wrote {path}")


def _radial_summary(sol, curv):
    k = int(np.argmax(sol.v))
    return json.dumps({
        "kind": sol.domain_kind,
        "n": sol.n,
        "r0": sol.r0,
        "R": sol.R,
        "v_origin": float(sol.v[0]) if sol.domain_kind == "ball" else None,
        "v_max": float(sol.v[k]),
        "argmax_r": float(sol.r[k]),
        "max_ricci": curv.max_ricci,
        "min_sectional": curv.min_sectional,
        "endpoint_fit": sol.endpoint_data,
    }, indent=2, sort_keys=True)


def cmd_solve(cfg) -> int:
    out = _outdir(cfg)
    formats = cfg.output.get("formats", ["csv", "json"])
    path = cfg.solver.get("path", "radial")
    dom = config.domain_from_block(cfg.domain)
    if path == "radial":
        sol = radial.solve_domain(dom, cfg.solver.get("tol", radial.TOL_PDE),
                                  cfg.solver.get("nodes", radial.DEFAULT_NODES))
        curv = radial.curvature_radial(sol)
        if "csv" in formats:
            _write(out / "solution.csv", radial.radial_csv(sol, curv))
        if "json" in formats:
            _write(out / "summary.json", _radial_summary(sol, curv))
        return EXIT_OK
    h = cfg.solver.get("h", geometry.diameter(dom) / 64.0)
    tol = cfg.solver.get("tol", pde.DEFAULT_TOL)
    if path == "grid":
        fld, report = pde.solve_v(dom, h, tol,
                                  cfg.solver.get("preconditioner", "auto"))
    else:
        fld = pde.solve_u_truncated(dom, h, cfg.solver.get("M", 1e3), tol)
        report = fld.report
    if "field" in formats or "csv" in formats:
        _write(out / "field.txt", grid.field_text(fld))
    if "csv" in formats:
        _write(out / "field.csv", grid.field_csv(fld))
    if "json" in formats:
        _write(out / "report.json", json.dumps({
            "path": path, "h": h, "iterations": report.iterations,
            "final_residual": report.final_residual,
            "preconditioner": report.preconditioner,
            "backend": report.backend,
            "num_interior": fld.table.num_interior,
        }, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_curvature(cfg) -> int:
    out = _outdir(cfg)
    dom = config.domain_from_block(cfg.domain)
    h = cfg.solver.get("h", geometry.diameter(dom) / 64.0)
    fld, _ = pde.solve_v(dom, h, cfg.solver.get("tol", pde.DEFAULT_TOL))
    report = curvature.curvature_report(fld)
    _write(out / "curvature.json", report.to_json())
    if cfg.output.get("per_node"):
        cf = curvature.hessian_field(fld)
        eigs = curvature.ricci_eigenvalues(cf)
        lo, hi = curvature.sectional_extremes(cf)
        lines = ["idx,v,min_sectional,max_sectional,"
                 + ",".join(f"ricci_{k}" for k in range(cf.n))]
        for row in range(cf.v.size):
            lines.append(",".join(
                [str(int(cf.index[row])), f"{cf.v[row]:.17g}",
                 f"{lo[row]:.17g}", f"{hi[row]:.17g}"]
                + [f"{e:.17g}" for e in eigs[row]]))
        _write(out / "nodes.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify_convex(cfg) -> int:
    out = _outdir(cfg)
    dom = config.domain_from_block(cfg.domain)
    h = cfg.solver.get("h", geometry.diameter(dom) / 48.0)
    result = analysis.verify_convex(dom, h, cfg.solver.get("tol", pde.DEFAULT_TOL))
    _write(out / "verify.json", result.to_json())
    return EXIT_OK if result.passed else EXIT_VIOLATION


def cmd_scan_annulus(cfg) -> int:
    out = _outdir(cfg)
    n = int(cfg.domain.get("n", 3))
    scan = analysis.scan_annulus(
        n, cfg.scan["r0"], cfg.scan.get("R", [cfg.domain.get("R", 4.0)]),
        path=cfg.solver.get("path", "radial"), h=cfg.solver.get("h"),
        tol=cfg.solver.get("tol", radial.TOL_PDE))
    formats = cfg.output.get("formats", ["csv", "json"])
    if "csv" in formats:
        _write(out / "scan.csv", scan.to_csv())
    if "json" in formats:
        _write(out / "scan.json", scan.to_json())
    return EXIT_ERROR if scan.any_failed else EXIT_OK


def cmd_cap_check(cfg) -> int:
    out = _outdir(cfg)
    result = analysis.cap_complement_check(
        int(cfg.cap.get("i", 2)), int(cfg.domain.get("n", 3)),
        cfg.solver.get("h", 1 / 32))
    _write(out / "cap.json", result.to_json())
    return EXIT_OK if result.passed else EXIT_VIOLATION


def cmd_star_scan(cfg) -> int:
    out = _outdir(cfg)
    members = int(cfg.star.get("members", 2))
    h = cfg.solver.get("h", 1 / 8)
    family = analysis.star_shaped_slab(members)
    rows = []
    for k, dom in enumerate(family):
        fld, rep = pde.solve_v(dom, h, cfg.solver.get("tol", 1e-8))
        report = curvature.curvature_report(fld)
        rows.append({
            "member": k,
            "outer_radius": dom.shape.outer.radius,
            "holes": len(dom.shape.holes),
            "max_ricci": report.max_ricci,
            "min_ricci": report.min_ricci,
            "min_sectional": report.min_sectional,
            "residual": rep.final_residual,
            "star_shaped_sampled": analysis.is_star_shaped(dom, seed=cfg.seed or 7),
        })
    lines = ["member,outer_radius,holes,max_ricci,min_ricci,min_sectional,"
             "residual,star_shaped_sampled"]
    for r in rows:
        lines.append(",".join([
            str(r["member"]), f"{r['outer_radius']:.17g}", str(r["holes"]),
            f"{r['max_ricci']:.17g}", f"{r['min_ricci']:.17g}",
            f"{r['min_sectional']:.17g}", f"{r['residual']:.17g}",
            str(int(r["star_shaped_sampled"]))]))
    _write(_outdir(cfg) / "star.csv", "\n".join(lines) + "\n")
    _write(out / "star.json", json.dumps(rows, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_selftest(cfg) -> int:
    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    sol = radial.solve_ball(3, 1.0)
    check("ball profile center value", abs(sol.v[0] - 0.5) < 1e-14)
    curv = radial.curvature_radial(sol)
    check("ball Ricci components", np.abs(curv.Ric_rad + 2).max() < 1e-10
          and np.abs(curv.Ric_tan + 2).max() < 1e-10)
    fld, rep = pde.solve_v(geometry.ball(3, 1.0), 1 / 8)
    pts = fld.interior_points()
    err = np.abs(fld.interior_values - (1 - (pts ** 2).sum(axis=1)) / 2).max()
    check(f"grid ball solve (backend={kernels.BACKEND})", err < 1e-9)
    rng = np.random.default_rng(0)
    x = rng.uniform(-10, 10, size=(100, 3))
    rt = analysis.stereographic_drop(analysis.stereographic_lift(x))
    check("stereographic round trip", np.abs(rt - x).max() < 1e-12)
    text = ('task = "solve"\n'
            'domain = { kind = "annulus", r0 = 0.5, R = 2.0, n = 3 }\n'
            'solver = { path = "radial", tol = 1e-10 }\n')
    canon = config.serialize_config(config.parse_config(text))
    check("config round trip",
          config.serialize_config(config.parse_config(canon)) == canon)
    return EXIT_OK if failures == 0 else EXIT_ERROR


COMMANDS = {
    "solve": cmd_solve,
    "curvature": cmd_curvature,
    "verify-convex": cmd_verify_convex,
    "scan-annulus": cmd_scan_annulus,
    "cap-check": cmd_cap_check,
    "star-scan": cmd_star_scan,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        return COMMANDS[args.command](cfg)
    except config.ConfigError as err:
        for d in err.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_ERROR
    except (geometry.GeometryError, analysis.PreconditionError, grid.GridError,
            radial.RadialSolveError, pde.PdeSolveError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
