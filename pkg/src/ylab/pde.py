"""Full-grid Newton solver for the conformal-factor equation.

Primary unknown is the bounded factor v with

    v lap(v) = (n/2) (|grad v|^2 - 1)     on interior nodes,

closed at the boundary by shortened stencil arms (value 0 at the exact
boundary intersection along each crossing axis) and by expansion-valued
anchors inside the safety band; see `ylab.grid`.  The blow-up unknown u is
kept as an independent cross-check path via the truncated problem

    lap(u) = (n(n-2)/4) u^((n+2)/(n-2)),    u = M on the cut closure.

Newton steps solve the exact (quadratic-form) Jacobian matrix-free with
BiCGStab; preconditioning is diagonal or a geometric multigrid V-cycle on
the masked lattice Laplacian for large node sets.  Linear-solve tolerances
follow an Eisenstat-Walker-style forcing sequence floored at 1e-10.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, bicgstab

from . import geometry, grid, kernels

__all__ = [
    "SolveReport",
    "PdeSolveError",
    "solve_v",
    "solve_u_truncated",
    "residual",
    "u_to_v",
    "PoissonVcycle",
]

DEFAULT_TOL = 1e-10
MAX_NEWTON = 60
MAX_HALVINGS = 30
STALL_WINDOW = 10
MG_THRESHOLD = 100_000
PRESMOOTH_SWEEPS = 40


class PdeSolveError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    iterations: int = 0
    final_residual: float = math.inf
    damping_history: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    h: float = 0.0
    wall_time: float = 0.0
    backend: str = kernels.BACKEND
    preconditioner: str = ""
    converged: bool = False


# -- geometric multigrid preconditioner ----------------------------------------


class PoissonVcycle:
    """V-cycle for -lap z = rhs with z = 0 off the interior mask.

    Used purely as a preconditioner; plain injection coarsening of the mask
    and damped-Jacobi smoothing are accurate enough for that role.  Level
    masks carry a forced one-cell false ring so the stencil kernels never
    read across the box edge.
    """

    def __init__(self, mask, h, omega=0.8, nu=2, coarse_sweeps=60, min_dim=6):
        self.omega = omega
        self.nu = nu
        self.coarse_sweeps = coarse_sweeps
        self.levels = []
        m = mask.copy()
        hh = float(h)
        while True:
            for ax in range(m.ndim):
                edge = [slice(None)] * m.ndim
                edge[ax] = 0
                m[tuple(edge)] = False
                edge[ax] = -1
                m[tuple(edge)] = False
            self.levels.append((np.ascontiguousarray(m, dtype=float), hh))
            if min(m.shape) < 2 * min_dim or len(self.levels) >= 12:
                break
            mc = m[tuple(slice(None, None, 2) for _ in m.shape)]
            if not mc.any():
                break
            m = mc.copy()
            hh *= 2.0

    def _cycle(self, lvl, rhs):
        m, h = self.levels[lvl]
        z = np.zeros_like(rhs)
        if lvl == len(self.levels) - 1:
            return kernels.mg_sweep(z, rhs, m, h, self.omega, self.coarse_sweeps)
        z = kernels.mg_sweep(z, rhs, m, h, self.omega, self.nu)
        r = kernels.mg_residual(z, rhs, m, h)
        mc = self.levels[lvl + 1][0]
        rc = np.ascontiguousarray(kernels.mg_restrict(r)) * mc
        ec = self._cycle(lvl + 1, rc)
        kernels.mg_prolong_add(z, ec, m)
        return kernels.mg_sweep(z, rhs, m, h, self.omega, self.nu)

    def apply(self, rhs):
        return self._cycle(0, np.ascontiguousarray(rhs) * self.levels[0][0])


# -- Newton-Krylov driver -------------------------------------------------------


def _forcing(norm2, prev2, tol, norm_inf, first):
    if first:
        eta = 0.1
    else:
        eta = min(0.5, max(1e-8, 0.9 * (norm2 / prev2) ** 2))
    # do not oversolve once the outer residual is almost there
    eta = max(eta, min(0.5, 0.3 * tol / max(norm_inf, 1e-300)))
    return max(eta, 1e-10)


def _newton_krylov(x0, eval_fn, jv_factory, prec_factory, tol, report,
                   positivity=False, pos_floor=0.0, lin_cap=2000,
                   tol_scale_fn=None):
    """Damped matrix-free Newton iteration.

    eval_fn(x) -> (F, cache); jv_factory(x, cache) -> matvec;
    prec_factory(x, cache) -> preconditioner matvec or None.

    With positivity="strict" a step is rejected while any component is
    nonpositive; with "project" the iterate is clamped at pos_floor before
    the decrease test (the equation is quadratic and has spurious
    sign-changing roots whose basins a plain descent path can enter).

    tol_scale_fn(x), when given, supplies per-node magnitudes so the stop
    test is relative; needed where the residual terms are huge (the
    truncated blow-up path) and an absolute norm is below rounding.
    """
    x = x0
    F, cache = eval_fn(x)
    norm2 = float(np.linalg.norm(F))
    norm_inf = float(np.max(np.abs(F)))
    history2 = [norm2]
    prev2 = math.inf
    t0 = time.perf_counter()

    def _converged(x, F):
        if tol_scale_fn is None:
            return norm_inf <= tol
        return bool(np.all(np.abs(F) <= tol * tol_scale_fn(x)))

    lam_prev, eta_prev = 1.0, None
    for it in range(MAX_NEWTON):
        report.iterations = it
        report.final_residual = norm_inf
        if _converged(x, F):
            report.converged = True
            break
        if len(history2) > STALL_WINDOW and history2[-1] > 0.5 * history2[-STALL_WINDOW - 1]:
            report.wall_time = time.perf_counter() - t0
            raise PdeSolveError(
                f"Newton stalled: residual plateau over {STALL_WINDOW} damped steps "
                f"(|F|_inf = {norm_inf:.3e})", report)
        eta = _forcing(norm2, prev2, tol, norm_inf, it == 0)
        # undersolving recovery: a heavily damped step means the last linear
        # solve was too loose to give a useful direction, so tighten
        if eta_prev is not None and lam_prev <= 0.125:
            eta = min(eta, max(1e-10, 0.1 * eta_prev))
        N = x.size
        counter = {"its": 0}

        def _count(_):
            counter["its"] += 1

        A = LinearOperator((N, N), matvec=jv_factory(x, cache))
        prec = prec_factory(x, cache)
        M = None if prec is None else LinearOperator((N, N), matvec=prec)
        delta, info = bicgstab(A, -F, rtol=eta, atol=0.0, maxiter=lin_cap,
                               M=M, callback=_count)
        report.linear_iterations.append(counter["its"])
        if not np.all(np.isfinite(delta)):
            raise PdeSolveError("linear solver produced non-finite step", report)

        lam, accepted = 1.0, False
        for _ in range(MAX_HALVINGS):
            x_try = x + lam * delta
            if positivity == "strict" and np.min(x_try) <= 0.0:
                lam *= 0.5
                continue
            if positivity == "project":
                x_try = np.maximum(x_try, pos_floor)
            F_try, cache_try = eval_fn(x_try)
            n2 = float(np.linalg.norm(F_try))
            if np.isfinite(n2) and n2 < norm2:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            report.wall_time = time.perf_counter() - t0
            raise PdeSolveError("Newton line search failed to reduce the residual",
                                report)
        report.damping_history.append(lam)
        lam_prev, eta_prev = lam, eta
        x, F, cache = x_try, F_try, cache_try
        prev2, norm2 = norm2, n2
        norm_inf = float(np.max(np.abs(F)))
        history2.append(norm2)
    else:
        report.final_residual = norm_inf
        report.wall_time = time.perf_counter() - t0
        raise PdeSolveError("Newton did not converge within the iteration cap",
                            report)
    report.final_residual = norm_inf
    report.wall_time = time.perf_counter() - t0
    return x, cache


def _choose_prec(preconditioner, num_interior, domain):
    if preconditioner != "auto":
        return preconditioner
    # the V-cycle earns its keep only on large ball-shaped masks; shells lose
    # their structure under coarsening and flatter convex shapes have shown
    # fragile preconditioned directions at fine meshes, so everything else
    # stays on the always-robust diagonal path
    if isinstance(domain.shape, geometry.Ball) and num_interior > MG_THRESHOLD:
        return "mg"
    return "jacobi"


def solve_v(domain: geometry.DomainSpec, h: float, tol: float = DEFAULT_TOL,
            preconditioner: str = "auto", field_cache: grid.GridField | None = None):
    """Solve the conformal-factor equation; returns (GridField, SolveReport)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    fld = field_cache if field_cache is not None else grid.build_grid(domain, h)
    table = fld.table
    n = domain.dim
    N = table.num_interior
    box = np.zeros(int(np.prod(fld.dims)))
    pbox = np.zeros_like(box)
    d_int = fld.distance.ravel()[table.interior]

    lap_w0, grad_w0 = kernels.stencil_diag(table)
    zero_m = table.zero_anchors()

    def eval_fn(x):
        box[table.interior] = x
        lap, grad = kernels.lap_grad(box, table, table.anc_m, table.anc_p)
        F = x * lap - 0.5 * n * ((grad * grad).sum(axis=0) - 1.0)
        return F, (lap, grad)

    def jv_factory(x, cache):
        lap_v, grad_v = cache

        def jv(p):
            pbox[table.interior] = p
            lap_p, grad_p = kernels.lap_grad(pbox, table, zero_m, zero_m)
            return x * lap_p + p * lap_v - n * (grad_v * grad_p).sum(axis=0)

        return jv

    prec_kind = _choose_prec(preconditioner, N, domain)
    vcycle = None
    if prec_kind == "mg":
        vcycle = PoissonVcycle(fld.mask == grid.MASK_INTERIOR, h)

    def prec_factory(x, cache):
        lap_v, grad_v = cache
        if prec_kind == "jacobi":
            diag = lap_v + x * lap_w0 - n * (grad_v * grad_w0).sum(axis=0)
            diag = np.where(np.abs(diag) > 1e-300, diag, 1.0)
            return lambda r: r / diag
        if prec_kind == "mg":
            def apply_mg(r):
                rhs = np.zeros(fld.dims)
                rhs.ravel()[table.interior] = r / x
                z = vcycle.apply(rhs)
                return -z.ravel()[table.interior]
            return apply_mg
        return None

    report = SolveReport(h=h, preconditioner=prec_kind)
    # the distance function has O(1/h) Laplacian spikes along the medial
    # axis; a few damped diffusion sweeps against the true closure remove
    # them, otherwise the first Newton linearization is poisoned
    x0 = d_int.copy()
    w = 0.8 * h * h / (2.0 * n)
    for _ in range(PRESMOOTH_SWEEPS):
        box[table.interior] = x0
        lap0, _ = kernels.lap_grad(box, table, table.anc_m, table.anc_p,
                                   skip_grad=True)
        x0 += w * lap0
    x0 = np.maximum(x0, 1e-3 * h)
    x, cache = _newton_krylov(x0, eval_fn, jv_factory, prec_factory, tol, report,
                              positivity="project", pos_floor=1e-3 * h)

    if np.min(x) <= 0.0:
        raise PdeSolveError("solution lost positivity on interior nodes", report)
    fld.values.ravel()[table.interior] = x
    grid.fill_cut_values(fld)
    fld.report = report
    return fld, report


def _u_closure(domain, fld, M):
    """Resolvable closure for the truncated blow-up unknown.

    Raw u = M data at the boundary is unrepresentable on the lattice: u grows
    like d^{-(n-2)/2} across the last cell and the interior answer then
    tracks M^{1/stencil} instead of the truncation level.  Anchors therefore
    carry the truncation-shifted boundary expansion

        u(d) = (delta + d - H d^2/(2(n-1)))^{-(n-2)/2},  delta = M^{-2/(n-2)},

    which equals M exactly at d = 0.  Band arms keep the cut node as anchor
    point; crossing arms pull the anchor strictly inside the domain (a
    quarter cell back from the intersection) where the expansion is smooth.

    Returns (table_variant, anc_m, anc_p).
    """
    import dataclasses

    table = fld.table
    n = domain.dim
    h = table.h
    delta = M ** (-2.0 / (n - 2))
    pts = fld.node_points(table.interior[table.irr_rows])

    arms, ancs = [], []
    for sign, idx, arm, d_nb, H_nb in (
            (-1, table.idx_m, table.arm_m, table.anc_d_m, table.anc_H_m),
            (+1, table.idx_p, table.arm_p, table.anc_d_p, table.anc_H_p)):
        new_arm = arm.copy()
        new_anc = np.zeros_like(arm)
        for k in range(n):
            anchored = idx[:, k] < 0
            if not anchored.any():
                continue
            band = anchored & (d_nb[:, k] > 0.0)
            if band.any():
                new_arm[band, k] = h
                new_anc[band, k] = (delta + grid.expansion_value(
                    d_nb[band, k], H_nb[band, k], n)) ** (-(n - 2) / 2.0)
            crossing = anchored & ~band
            if crossing.any():
                theta = arm[crossing, k]
                pull = np.minimum(0.25 * h, 0.5 * theta)
                a = theta - pull
                anchor_pts = pts[crossing].copy()
                anchor_pts[:, k] += sign * a
                d_a, _, _, H_a = geometry.nearest_boundary(domain, anchor_pts)
                vexp = np.maximum(grid.expansion_value(d_a, H_a, n), 0.0)
                new_arm[crossing, k] = a
                new_anc[crossing, k] = (delta + vexp) ** (-(n - 2) / 2.0)
        arms.append(new_arm)
        ancs.append(new_anc)

    variant = dataclasses.replace(table, arm_m=arms[0], arm_p=arms[1],
                                  anc_zero=None)
    return variant, ancs[0], ancs[1]


def solve_u_truncated(domain: geometry.DomainSpec, h: float, M: float,
                      tol: float = DEFAULT_TOL) -> grid.GridField:
    """Truncated blow-up problem: lap u = (n(n-2)/4) u^((n+2)/(n-2)) with
    boundary data u = M, anchored through the shifted expansion of
    `_u_closure`.  Returns the u field (report attached)."""
    if M <= 0:
        raise ValueError("M must be positive")
    n = domain.dim
    expo = (n + 2) / (n - 2)
    if expo * math.log10(M) > 300.0:
        raise PdeSolveError(f"M^((n+2)/(n-2)) overflows for M = {M:g}")
    c = 0.25 * n * (n - 2)

    fld = grid.build_grid(domain, h)
    table, anc_m, anc_p = _u_closure(domain, fld, M)
    N = table.num_interior
    box = np.zeros(int(np.prod(fld.dims)))
    pbox = np.zeros_like(box)
    zero_m = table.zero_anchors()
    lap_w0, _ = kernels.stencil_diag(table)

    def eval_fn(x):
        box[table.interior] = x
        lap, _ = kernels.lap_grad(box, table, anc_m, anc_p, skip_grad=True)
        return lap - c * x ** expo, (lap,)

    def jv_factory(x, cache):
        w = c * expo * x ** (expo - 1.0)

        def jv(p):
            pbox[table.interior] = p
            lap_p, _ = kernels.lap_grad(pbox, table, zero_m, zero_m, skip_grad=True)
            return lap_p - w * p

        return jv

    def prec_factory(x, cache):
        diag = lap_w0 - c * expo * x ** (expo - 1.0)
        return lambda r: r / diag

    def tol_scale_fn(x):
        # the two residual terms are O(M/h^2) and O(M^expo) near the closure,
        # so an absolute tolerance sits below the rounding floor for large M
        return 1.0 + c * x ** expo + (4.0 * n / (h * h)) * x

    report = SolveReport(h=h, preconditioner="jacobi")
    x0 = np.full(N, float(M))
    x, _ = _newton_krylov(x0, eval_fn, jv_factory, prec_factory, tol, report,
                          positivity="strict", tol_scale_fn=tol_scale_fn)
    fld.values.ravel()[table.interior] = x
    cut_flat = np.flatnonzero((fld.mask == grid.MASK_CUT).ravel())
    if cut_flat.size:
        pts = fld.node_points(cut_flat)
        d_b, _, _, H_b = geometry.nearest_boundary(domain, pts)
        delta = M ** (-2.0 / (n - 2))
        shifted = np.maximum(delta + grid.expansion_value(d_b, H_b, n), delta)
        fld.values.ravel()[cut_flat] = shifted ** (-(n - 2) / 2.0)
    fld.report = report
    return fld


def u_to_v(u_field: grid.GridField) -> grid.GridField:
    """Convert a truncated blow-up solution to its conformal factor."""
    n = u_field.n
    out = grid.GridField(u_field.domain, n, u_field.h, u_field.origin,
                         u_field.dims, u_field.values.copy(), u_field.mask,
                         u_field.distance, u_field.table, u_field.report)
    sel = u_field.mask != grid.MASK_EXTERIOR
    out.values[sel] = u_field.values[sel] ** (-2.0 / (n - 2))
    return out


def residual(fld: grid.GridField, domain: geometry.DomainSpec | None = None,
             where: str = "all") -> float:
    """Infinity norm of the discrete residual of a field (pure evaluation).

    where="regular" restricts to nodes with full-length stencil arms, the
    right norm for truncation studies of smooth interpolants (closure rows
    carry first-order local truncation by construction).
    """
    domain = domain or fld.domain
    table = fld.table
    if table is None:
        rebuilt = grid.build_grid(domain, fld.h)
        table = rebuilt.table
        fld.table = table
    n = domain.dim
    box = fld.values.ravel().copy()
    # non-interior box values must not leak into the stencil reads
    keep = np.zeros_like(box)
    keep[table.interior] = box[table.interior]
    lap, grad = kernels.lap_grad(keep, table, table.anc_m, table.anc_p)
    x = keep[table.interior]
    F = x * lap - 0.5 * n * ((grad * grad).sum(axis=0) - 1.0)
    if where == "regular":
        F = np.delete(F, table.irr_rows)
    elif where != "all":
        raise ValueError("where must be 'all' or 'regular'")
    return float(np.max(np.abs(F)))
