"""Campaign-level checks: convex-domain negativity, annulus scans, the
sphere-cap correspondence, and star-shaped slab families.

The convex verdicts restate the negativity statement as machine-checkable
inequalities on every reported node: lap v < 0, |grad v| < 1, concavity of v
up to a mesh tolerance, all sectional curvatures negative, and all Ricci
eigenvalues below -n/2, each with its worst margin recorded.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import curvature, geometry, pde, radial

__all__ = [
    "VerifyConvexResult",
    "ScanRow",
    "ScanResult",
    "CapCheckResult",
    "verify_convex",
    "scan_annulus",
    "stereographic_lift",
    "stereographic_drop",
    "cap_complement_radius",
    "cap_complement_check",
    "star_shaped_slab",
    "is_star_shaped",
    "PreconditionError",
]


class PreconditionError(ValueError):
    pass


def _worker_count(rows: int) -> int:
    env = os.environ.get("YLAB_THREADS", "").strip()
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(rows, cap))


# -- convex-domain verification --------------------------------------------------


@dataclass
class VerifyConvexResult:
    domain: str
    h: float
    num_nodes: int
    max_lap: float                 # want < 0
    max_grad_excess: float         # max |grad v| - 1, want < 0
    max_hess_eig: float            # want <= concavity_tol
    concavity_tol: float
    max_sectional: float           # want < 0
    max_ricci_margin: float        # max ricci eigenvalue + n/2, want < 0
    passed: bool
    residual: float

    def to_json(self) -> str:
        d = dict(self.__dict__)
        return json.dumps(d, indent=2, sort_keys=True)


def verify_convex(domain: geometry.DomainSpec, h: float,
                  tol: float = pde.DEFAULT_TOL) -> VerifyConvexResult:
    """Check the negative-curvature assertions on a convex domain.

    A violated inequality is a finding (passed=False with margins), not an
    exception; a non-convex domain is a precondition error.
    """
    if geometry.classify(domain) != "convex":
        raise PreconditionError(
            f"verify_convex needs a convex domain, got {geometry.classify(domain)}")
    fld, report = pde.solve_v(domain, h, tol)
    cf = curvature.hessian_field(fld)
    n = domain.dim

    lap = cf.hess_diag.sum(axis=0)
    grad_norm = np.sqrt((cf.grad ** 2).sum(axis=0))
    hess_eigs = (curvature.eigvalsh_sym3(cf.hessian_matrices()) if n == 3
                 else np.linalg.eigvalsh(cf.hessian_matrices()))
    eps_concave = 10.0 * h * h * max(1.0, float(np.abs(cf.v).max()))
    _, sec_hi = curvature.sectional_extremes(cf)
    ric_hi = curvature.ricci_eigenvalues(cf)[:, -1]

    res = VerifyConvexResult(
        domain=type(domain.shape).__name__,
        h=h,
        num_nodes=int(cf.v.size),
        max_lap=float(lap.max()),
        max_grad_excess=float(grad_norm.max() - 1.0),
        max_hess_eig=float(hess_eigs.max()),
        concavity_tol=eps_concave,
        max_sectional=float(sec_hi.max()),
        max_ricci_margin=float(ric_hi.max() + 0.5 * n),
        passed=False,
        residual=report.final_residual,
    )
    res.passed = (res.max_lap < 0.0 and res.max_grad_excess < 0.0
                  and res.max_hess_eig <= eps_concave
                  and res.max_sectional < 0.0 and res.max_ricci_margin < 0.0)
    return res


# -- annulus scans ----------------------------------------------------------------


@dataclass
class ScanRow:
    r0: float
    R: float
    max_ricci: float = math.nan
    min_ricci: float = math.nan
    min_sectional: float = math.nan
    residual: float = math.nan
    positive_found: bool = False
    failed: bool = False
    error: str = ""


@dataclass
class ScanResult:
    n: int
    path: str
    rows: list[ScanRow] = field(default_factory=list)

    @property
    def any_positive(self) -> bool:
        return any(r.positive_found for r in self.rows)

    @property
    def any_failed(self) -> bool:
        return any(r.failed for r in self.rows)

    def first_positive(self) -> ScanRow | None:
        for row in self.rows:
            if row.positive_found:
                return row
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r0,R,max_ricci,min_ricci,min_sectional,residual,"
                  "positive_found,failed\n")
        for r in self.rows:
            buf.write(f"{r.r0:.17g},{r.R:.17g},{r.max_ricci:.17g},"
                      f"{r.min_ricci:.17g},{r.min_sectional:.17g},"
                      f"{r.residual:.17g},{int(r.positive_found)},{int(r.failed)}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "path": self.path,
            "any_positive": self.any_positive,
            "any_failed": self.any_failed,
            "rows": [r.__dict__ for r in self.rows],
        }, indent=2, sort_keys=True)


def _scan_row_radial(n, r0, R, tol):
    row = ScanRow(r0=r0, R=R)
    try:
        sol = radial.solve_annulus(n, r0, R, tol)
        curv = radial.curvature_radial(sol)
        row.max_ricci = curv.max_ricci
        row.min_ricci = curv.min_ricci
        row.min_sectional = curv.min_sectional
        row.residual = float(np.abs(sol.residual).max())
        row.positive_found = row.max_ricci > 0.0
    except Exception as err:  # solver failure marks the row, scan continues
        row.failed = True
        row.error = str(err)
    return row


def _scan_row_grid(n, r0, R, h, tol):
    row = ScanRow(r0=r0, R=R)
    try:
        fld, rep = pde.solve_v(geometry.annulus(n, r0, R), h, tol)
        report = curvature.curvature_report(fld)
        row.max_ricci = report.max_ricci
        row.min_ricci = report.min_ricci
        row.min_sectional = report.min_sectional
        row.residual = rep.final_residual
        row.positive_found = row.max_ricci > 0.0
    except Exception as err:
        row.failed = True
        row.error = str(err)
    return row


def scan_annulus(n: int, r0_list, R_list, path: str = "radial",
                 h: float | None = None, tol: float = radial.TOL_PDE,
                 workers: int | None = None) -> ScanResult:
    """Sweep annulus parameters; rows ordered by growing R, then shrinking r0
    (the nested-family direction along which the maximal Ricci eigenvalue
    must not decrease)."""
    pairs = sorted({(float(R), float(r0)) for R in R_list for r0 in r0_list
                    if 0 < r0 < R}, key=lambda t: (t[0], -t[1]))
    if not pairs:
        raise PreconditionError("empty or invalid (r0, R) family")
    result = ScanResult(n=n, path=path)
    if path == "radial":
        jobs = [(n, r0, R, tol) for R, r0 in pairs]
        fn = _scan_row_radial
    elif path == "grid":
        if h is None:
            raise PreconditionError("grid path needs a mesh width h")
        jobs = [(n, r0, R, h, tol) for R, r0 in pairs]
        fn = _scan_row_grid
    else:
        raise PreconditionError(f"unknown scan path {path!r}")
    workers = workers if workers is not None else _worker_count(len(jobs))
    if workers == 1:
        result.rows = [fn(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            result.rows = list(pool.map(lambda j: fn(*j), jobs))
    return result


# -- stereographic correspondence -------------------------------------------------


def stereographic_lift(x):
    """Lift x in R^n to the unit sphere in R^(n+1):
    T(x) = (2x, |x|^2 - 1) / (1 + |x|^2)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    s = (pts * pts).sum(axis=-1, keepdims=True)
    out = np.concatenate([2.0 * pts, s - 1.0], axis=-1) / (1.0 + s)
    return out[0] if single else out


def stereographic_drop(y):
    """Inverse of the lift; undefined at the north pole (0, ..., 0, 1).

    Uses x = y' (1 + y_last) / |y'|^2 (equivalent to y'/(1 - y_last) on the
    sphere), which avoids the 1 - y_last cancellation for points far from
    the origin and keeps the round trip at rounding level out to |x| ~ 1e3.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = np.atleast_2d(y)
    last = pts[:, -1:]
    head2 = (pts[:, :-1] ** 2).sum(axis=-1, keepdims=True)
    if np.any((head2 < 1e-30) & (last > 0.0)):
        raise ValueError("point at infinity: north pole has no preimage")
    # two algebraically equal forms, each cancellation-free on its
    # hemisphere: 1 - y_last degrades near the north pole, (1 + y_last)
    # near the south pole
    south = pts[:, :-1] / np.maximum(1.0 - last, 1e-300)
    north = pts[:, :-1] * (1.0 + last) / np.maximum(head2, 1e-300)
    out = np.where(last <= 0.0, south, north)
    return out[0] if single else out


def cap_complement_radius(i: int) -> float:
    """Radius of the origin-centered ball that is the image, under the
    stereographic drop, of the sphere minus a geodesic cap of radius 1/i
    around the north pole."""
    if i < 1:
        raise PreconditionError("cap parameter i must be a positive integer")
    return 1.0 / math.tan(0.5 / i)


@dataclass
class CapCheckResult:
    i: int
    n: int
    h: float
    ball_radius: float
    max_sectional_dev: float
    max_ricci_dev: float
    residual: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps(dict(self.__dict__), indent=2, sort_keys=True)


def cap_complement_check(i: int, n: int, h: float, tol_curv: float = 5e-3,
                         tol_solver: float = pde.DEFAULT_TOL) -> CapCheckResult:
    """Drop the cap complement to a ball, solve, and check constant curvature.

    The image of the sphere minus a small polar cap is an origin-centered
    ball, so the solved metric must have sectional curvature -1 and Ricci
    eigenvalues -(n-1) up to discretization error.
    """
    R = cap_complement_radius(i)
    fld, rep = pde.solve_v(geometry.ball(n, R), h, tol_solver)
    cf = curvature.hessian_field(fld)
    lo, hi = curvature.sectional_extremes(cf)
    eigs = curvature.ricci_eigenvalues(cf)
    sec_dev = float(max(abs(lo.min() + 1.0), abs(hi.max() + 1.0)))
    ric_dev = float(np.abs(eigs + (n - 1)).max())
    return CapCheckResult(
        i=i, n=n, h=h, ball_radius=R,
        max_sectional_dev=sec_dev,
        max_ricci_dev=ric_dev,
        residual=rep.final_residual,
        passed=sec_dev <= tol_curv and ric_dev <= tol_curv,
    )


# -- star-shaped slab family (n = 4) ----------------------------------------------


def star_shaped_slab(members: int, n: int = 4, beta0: float = 0.15,
                     outer0: float = 2.5) -> list[geometry.DomainSpec]:
    """Nested-in-the-limit family converging to R^4 minus the axis rays
    |x_4| >= 1, realized as balls minus chains of holes along the axis.

    Hole radii are proportional to the center distance (shadow cones stay
    thin) and shrink with the family index while the outer radius grows.
    """
    if n != 4:
        raise PreconditionError("the slab construction is a 4-d device")
    out = []
    for m in range(members):
        beta = beta0 / (1.0 + m)
        R_out = outer0 * (1.0 + 0.5 * m)
        holes = []
        z = 1.0005 / (1.0 - beta)       # first hole starts just beyond x4 = 1
        ratio = (1.0 + beta) / (1.0 - beta) * 1.001
        while z * (1.0 + beta) < 0.995 * R_out:
            for sign in (+1.0, -1.0):
                center = tuple(0.0 if k < n - 1 else sign * z for k in range(n))
                holes.append(geometry.Ball(center, beta * z))
            z *= ratio
        out.append(geometry.ball_minus_balls(
            n, geometry.Ball(tuple(0.0 for _ in range(n)), R_out), holes))
    return out


def is_star_shaped(domain: geometry.DomainSpec, rays: int = 200,
                   samples: int = 60, seed: int = 7) -> bool:
    """Sampled segment test: for in-domain sample points x, checks that the
    whole segment from the origin to x stays inside."""
    rng = np.random.default_rng(seed)
    n = domain.dim
    dirs = rng.normal(size=(rays, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    _, hi = geometry.bounding_box(domain)
    tmax = float(np.max(np.abs(hi))) * 1.2
    ts = np.linspace(1e-3, tmax, samples)
    pts = dirs[:, None, :] * ts[None, :, None]
    inside = geometry.signed_distance(domain, pts.reshape(-1, n)).reshape(rays, samples) > 0
    for k in range(rays):
        idx = np.flatnonzero(inside[k])
        if idx.size and np.any(~inside[k][: idx.max() + 1]):
            return False
    return True
