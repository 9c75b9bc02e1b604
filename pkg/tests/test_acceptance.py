"""Acceptance suite: one test and one printed verdict line per criterion.

Run with output visible:  pytest tests/test_acceptance.py -v -s
Budget note: the whole module performs the large production solves (unit
ball down to h = 1/64, the 1.|1.5|2 ellipsoid at h = 1/48, the sphere-cap
ball at h = 1/32) and takes some minutes on one core.
"""

import time

import numpy as np
import pytest

from conftest import center_value, exact_ball_values
from ylab import analysis, curvature, geometry, grid, pde, radial


def verdict(num, ok, detail):
    line = f"CRITERION {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print("\n" + line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def ball_fields():
    out = {}
    for h in (1 / 16, 1 / 32, 1 / 64):
        t0 = time.perf_counter()
        fld, report = pde.solve_v(geometry.ball(3, 1.0), h)
        wall = time.perf_counter() - t0
        err = float(np.abs(fld.interior_values - exact_ball_values(fld)).max())
        out[h] = dict(field=fld, report=report, err=err, wall=wall)
    return out


@pytest.fixture(scope="module")
def annulus_grid():
    fld, report = pde.solve_v(geometry.annulus(3, 0.5, 2.0), 1 / 32)
    return fld, report


def test_criterion_1_poincare_ball_exactness():
    t0 = time.perf_counter()
    sol = radial.solve_ball(3, 1.0)
    curv = radial.curvature_radial(sol)
    wall = time.perf_counter() - t0
    sec_dev = max(np.abs(curv.K_rad_tan + 1).max(), np.abs(curv.K_tan_tan + 1).max())
    ric_dev = max(np.abs(curv.Ric_rad + 2).max(), np.abs(curv.Ric_tan + 2).max())
    verdict(1, sec_dev <= 1e-10 and ric_dev <= 1e-10 and wall < 1.0,
            f"radial ball: |sectional+1| = {sec_dev:.2e}, "
            f"|ricci+2| = {ric_dev:.2e}, runtime {wall:.3f}s < 1s")


def test_criterion_2_grid_accuracy_and_order(ball_fields):
    errs = {h: ball_fields[h]["err"] for h in ball_fields}
    e16, e32, e64 = errs[1 / 16], errs[1 / 32], errs[1 / 64]
    wall64 = ball_fields[1 / 64]["wall"]
    if e32 < 1e-9 and e64 < 1e-9:
        # the scheme is exact on the quadratic ball profile (boundary data
        # included), so the error sits at rounding level and any order bound
        # holds; report it as exact instead of dividing noise by noise
        order_txt = "exact to rounding (order unbounded)"
        order_ok = True
    else:
        o1, o2 = np.log2(e16 / e32), np.log2(e32 / e64)
        order_txt = f"orders {o1:.2f}, {o2:.2f}"
        order_ok = min(o1, o2) >= 1.8
    verdict(2, e32 <= 5e-3 and order_ok and wall64 < 300.0,
            f"ball errors h=1/16..1/64: {e16:.2e}, {e32:.2e}, {e64:.2e}; "
            f"{order_txt}; runtime(1/64) {wall64:.0f}s < 300s")


def test_criterion_3_trace_identity(ball_fields, annulus_grid):
    worst = -np.inf
    fields = [(ball_fields[h]["field"], ball_fields[h]["report"])
              for h in ball_fields]
    fields.append(annulus_grid)
    for fld, report in fields:
        cf = curvature.hessian_field(fld)
        eigs = curvature.ricci_eigenvalues(cf)
        defect = curvature.trace_defect(eigs, fld.n).max()
        bound = 10.0 * max(report.final_residual, 1e-10) + 5e-3
        worst = max(worst, defect - bound)
        if defect > bound:
            break
    verdict(3, worst < 0,
            f"max (trace defect - bound) over solved fields = {worst:.2e} < 0")


def test_criterion_4_boundary_expansion_fit():
    ball_fit = radial.solve_ball(3, 1.0).endpoint_data["outer"]
    ann = radial.solve_annulus(3, 0.5, 2.0).endpoint_data
    checks = [
        ("ball outer", ball_fit["quad_coeff"], -0.5),
        ("annulus outer", ann["outer"]["quad_coeff"], -0.25),
        ("annulus inner", ann["inner"]["quad_coeff"], +1.0),
    ]
    ok = all(abs(got - want) <= 0.05 * abs(want) for _, got, want in checks)
    detail = "; ".join(f"{name}: {got:+.4f} vs {want:+g}"
                       for name, got, want in checks)
    verdict(4, ok, f"quadratic fit coefficients within 5%: {detail}")


def test_criterion_5_convex_negativity_ellipsoid():
    res = analysis.verify_convex(geometry.ellipsoid([1.0, 1.5, 2.0]), 1 / 48)
    verdict(5, res.passed,
            f"ellipsoid h=1/48 margins: lap {res.max_lap:.3e}, "
            f"|grad|-1 {res.max_grad_excess:.3e}, "
            f"hess eig {res.max_hess_eig:.3e} (tol {res.concavity_tol:.1e}), "
            f"sectional {res.max_sectional:.3e}, "
            f"ricci+n/2 {res.max_ricci_margin:.3e}")


def test_criterion_6_annulus_positive_ricci_scan():
    t0 = time.perf_counter()
    scan = analysis.scan_annulus(3, [0.4, 0.2, 0.1, 0.05, 0.025], [4.0])
    wall = time.perf_counter() - t0
    mr = [row.max_ricci for row in scan.rows]
    increasing = all(a < b for a, b in zip(mr, mr[1:]))
    flip = scan.first_positive()
    verdict(6, increasing and flip is not None and wall < 10.0,
            f"max ricci {['%.3f' % v for v in mr]} strictly increasing; "
            f"sign flip recorded at r0 = {flip.r0 if flip else None} "
            f"(threshold recorded, not asserted); runtime {wall:.2f}s < 10s")


def test_criterion_7_nested_annuli_monotone():
    tol = radial.TOL_PDE
    sols = [radial.solve_annulus(3, r0, R) for r0, R in
            ((0.7, 1.8), (0.5, 2.0), (0.35, 2.4))]
    r = np.linspace(0.72, 1.78, 400)
    v = [s.interpolate(r) for s in sols]
    worst = max(float((v[0] - v[1]).max()), float((v[1] - v[2]).max()))
    verdict(7, worst <= 10 * tol,
            f"nested annuli pointwise ordered: max violation {worst:.2e} "
            f"<= 10 tol = {10 * tol:.0e}")


def test_criterion_8_cap_complement():
    res = analysis.cap_complement_check(2, 3, 1 / 32)
    verdict(8, res.passed,
            f"cap i=2 -> ball R={res.ball_radius:.4f}: sectional dev "
            f"{res.max_sectional_dev:.2e} <= 5e-3, ricci dev "
            f"{res.max_ricci_dev:.2e} <= 5e-3")


def test_criterion_9_cross_solver_agreement(annulus_grid):
    fld, _ = annulus_grid
    sol = radial.solve_annulus(3, 0.5, 2.0)
    rr = np.linalg.norm(fld.interior_points(), axis=1)
    ref = sol.interpolate(np.clip(rr, sol.r[0], sol.r[-1]))
    diff = float(np.abs(fld.interior_values - ref).max())
    verdict(9, diff <= 5e-3,
            f"annulus grid(1/32) vs radial node-wise max diff {diff:.2e} <= 5e-3")


def test_criterion_10_u_truncation_ladder():
    dom = geometry.ball(3, 1.0)
    centers = []
    prev = None
    monotone_u = True
    for M in (1e2, 1e3, 1e4):
        uf = pde.solve_u_truncated(dom, 1 / 16, M)
        if prev is not None:
            monotone_u &= bool(np.all(prev <= uf.interior_values + 1e-9))
        prev = uf.interior_values
        centers.append(center_value(pde.u_to_v(uf)))
    d1, d2 = centers[0] - centers[1], centers[1] - centers[2]
    near = abs(centers[-1] - 0.5)
    verdict(10, monotone_u and d1 > 0 and d2 > 0 and d1 / d2 >= 2.0
            and near <= 0.02,
            f"v_M(0) = {['%.6f' % c for c in centers]} monotone toward 0.5 "
            f"(|v-0.5| = {near:.1e}); successive gaps {d1:.2e}, {d2:.2e} "
            f"shrink {d1 / d2:.0f}x >= 2x; u_M node-wise monotone: {monotone_u}")
