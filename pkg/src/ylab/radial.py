"""Rotationally symmetric solutions of the conformal-factor equation.

The radial profile v(r) of the factor in g = v^-2 g_E satisfies

    v (v'' + (n-1) v'/r) = (n/2) (v'^2 - 1),      v = 0 at the boundary radii,

with unit normal slope at each boundary.  Balls have the closed form
v(r) = (R^2 - r^2) / (2R); annuli are solved as a two-point boundary value
problem with damped-Newton collocation on a Chebyshev grid clustered at the
endpoints, closed by the two-term boundary expansion
v = d - H d^2 / (2(n-1)) at nodes offset a first-mesh-width into the domain.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import geometry

__all__ = [
    "RadialSolution",
    "RadialCurvature",
    "RadialSolveError",
    "solve_ball",
    "solve_annulus",
    "curvature_radial",
    "boundary_fit",
    "radial_csv",
    "DEFAULT_NODES",
    "TOL_PDE",
]

DEFAULT_NODES = 4096
TOL_PDE = 1e-10
MAX_NEWTON = 60
MAX_HALVINGS = 30


class RadialSolveError(RuntimeError):
    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


@dataclass
class RadialSolution:
    n: int
    domain_kind: str                     # "ball" | "annulus"
    r: np.ndarray
    v: np.ndarray
    v_prime: np.ndarray
    v_double_prime: np.ndarray
    r0: float
    R: float
    residual: np.ndarray = field(repr=False, default=None)
    residual_tolerance: np.ndarray = field(repr=False, default=None)
    endpoint_data: dict = field(default_factory=dict)

    def interpolate(self, radii):
        """Cubic interpolation of v onto new radii inside the solved range."""
        from scipy.interpolate import CubicSpline

        return CubicSpline(self.r, self.v)(radii)


@dataclass
class RadialCurvature:
    r: np.ndarray
    K_rad_tan: np.ndarray
    K_tan_tan: np.ndarray
    Ric_rad: np.ndarray
    Ric_tan: np.ndarray

    @property
    def max_ricci(self) -> float:
        return float(max(self.Ric_rad.max(), self.Ric_tan.max()))

    @property
    def min_ricci(self) -> float:
        return float(min(self.Ric_rad.min(), self.Ric_tan.min()))

    @property
    def min_sectional(self) -> float:
        return float(min(self.K_rad_tan.min(), self.K_tan_tan.min()))

    @property
    def max_sectional(self) -> float:
        return float(max(self.K_rad_tan.max(), self.K_tan_tan.max()))


def _chebyshev(a: float, b: float, num: int) -> np.ndarray:
    j = np.arange(num)
    t = 0.5 * (1.0 - np.cos(np.pi * j / (num - 1)))
    return a + (b - a) * t


def solve_ball(n: int, R: float, num_nodes: int = 513) -> RadialSolution:
    """Closed-form ball profile sampled on a Chebyshev grid (no iteration)."""
    if R <= 0 or n < 3:
        raise ValueError(f"need R > 0 and n >= 3, got R={R}, n={n}")
    r = _chebyshev(0.0, R, num_nodes)
    v = (R * R - r * r) / (2.0 * R)
    vp = -r / R
    vpp = np.full_like(r, -1.0 / R)
    res = _pde_residual(n, r, v, vp, vpp)
    sol = RadialSolution(n, "ball", r, v, vp, vpp, 0.0, R, res)
    sol.endpoint_data = boundary_fit(sol)
    return sol


def _pde_residual(n, r, v, vp, vpp):
    # v'/r -> v'' as r -> 0 by interior smoothness
    ratio = np.where(r > 0, vp / np.where(r > 0, r, 1.0), vpp)
    return v * (vpp + (n - 1) * ratio) - 0.5 * n * (vp * vp - 1.0)


def _nonuniform_d1_d2(r):
    """Three-point first/second derivative weights on a nonuniform grid.

    Returns (wm, wc, wp) pairs for D1 and D2 at interior nodes 1..N-2; both
    are exact on quadratics.
    """
    am = r[1:-1] - r[:-2]
    ap = r[2:] - r[1:-1]
    den = am * ap * (am + ap)
    d1m = -ap * ap / den
    d1c = (ap * ap - am * am) / den
    d1p = am * am / den
    d2m = 2.0 * ap / den
    d2c = -2.0 * (am + ap) / den
    d2p = 2.0 * am / den
    return (d1m, d1c, d1p), (d2m, d2c, d2p)


def _expansion_value(d, H, n):
    return d - H * d * d / (2.0 * (n - 1))


def solve_annulus(n: int, r0: float, R: float, tol: float = TOL_PDE,
                  num_nodes: int = DEFAULT_NODES) -> RadialSolution:
    """Two-point BVP solve of the radial equation on (r0, R)."""
    if not 0 < r0 < R:
        raise ValueError(f"need 0 < r0 < R, got r0={r0}, R={R}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n < 3:
        raise ValueError("n must be >= 3")

    # endpoint nodes sit one first-mesh-width inside; the equation degenerates
    # at v = 0, the expansion supplies the closure values there
    eps = (R - r0) * 0.5 * (1.0 - math.cos(math.pi / (num_nodes - 1)))
    r = _chebyshev(r0 + eps, R - eps, num_nodes)
    H_in = -(n - 1) / r0
    H_out = (n - 1) / R
    v_lo = _expansion_value(r[0] - r0, H_in, n)
    v_hi = _expansion_value(R - r[-1], H_out, n)

    (d1m, d1c, d1p), (d2m, d2c, d2p) = _nonuniform_d1_d2(r)
    rc = r[1:-1]

    def residual(v):
        d1 = d1m * v[:-2] + d1c * v[1:-1] + d1p * v[2:]
        d2 = d2m * v[:-2] + d2c * v[1:-1] + d2p * v[2:]
        F = np.empty_like(v)
        F[0] = v[0] - v_lo
        F[-1] = v[-1] - v_hi
        F[1:-1] = v[1:-1] * (d2 + (n - 1) * d1 / rc) - 0.5 * n * (d1 * d1 - 1.0)
        return F, d1, d2

    def residual_threshold(v, d1, d2):
        # tolerance is relative to the O(1) magnitude of the residual terms,
        # plus a rounding floor that carries the O(1/h^2) weight amplification
        # of the clustered grid (otherwise 1e-10 is unreachable at 4096 nodes)
        av = np.abs(v)
        ad2 = np.abs(d2m) * av[:-2] + np.abs(d2c) * av[1:-1] + np.abs(d2p) * av[2:]
        ad1 = np.abs(d1m) * av[:-2] + np.abs(d1c) * av[1:-1] + np.abs(d1p) * av[2:]
        amplification = av[1:-1] * (ad2 + (n - 1) * ad1 / rc)
        magnitude = (av[1:-1] * (np.abs(d2) + (n - 1) * np.abs(d1) / rc)
                     + 0.5 * n * (d1 * d1 + 1.0))
        return tol * magnitude + 64.0 * np.finfo(float).eps * amplification

    def converged(F, v, d1, d2):
        if abs(F[0]) > tol or abs(F[-1]) > tol:
            return False
        return bool(np.all(np.abs(F[1:-1]) <= residual_threshold(v, d1, d2)))

    def jacobian_banded(v, d1, d2):
        # rows: superdiag, diag, subdiag for solve_banded
        ab = np.zeros((3, v.size))
        ab[1, 0] = 1.0
        ab[1, -1] = 1.0
        lin = d2 + (n - 1) * d1 / rc
        coef_m = d2m + (n - 1) * d1m / rc
        coef_c = d2c + (n - 1) * d1c / rc
        coef_p = d2p + (n - 1) * d1p / rc
        ab[0, 2:] = v[1:-1] * coef_p - n * d1 * d1p          # superdiagonal
        ab[1, 1:-1] = v[1:-1] * coef_c - n * d1 * d1c + lin  # diagonal
        ab[2, :-2] = v[1:-1] * coef_m - n * d1 * d1m         # subdiagonal
        return ab

    guesses = [
        np.minimum(r - r0, R - r),
        # matched-asymptotics composite: steep hole layer glued to the
        # hole-free ball profile, correct unit slopes at both boundaries
        np.minimum((r * r - r0 * r0) / (2.0 * r0), (R * R - r * r) / (2.0 * R)),
    ]

    def newton(v, history):
        F, d1, d2 = residual(v)
        norm = np.linalg.norm(F)
        history.append(float(norm))
        for _ in range(MAX_NEWTON):
            if converged(F, v, d1, d2):
                return v, F, d1, d2
            ab = jacobian_banded(v, d1, d2)
            delta = solve_banded((1, 1), ab, -F)
            lam, accepted = 1.0, False
            for _ in range(MAX_HALVINGS):
                v_try = v + lam * delta
                F_try, d1_try, d2_try = residual(v_try)
                norm_try = np.linalg.norm(F_try)
                # positivity guard: the equation is quadratic and admits
                # spurious sign-changing roots along a plain descent path
                if (norm_try < norm and np.all(np.isfinite(F_try))
                        and np.all(v_try > 0)):
                    v, F, d1, d2, norm = v_try, F_try, d1_try, d2_try, norm_try
                    accepted = True
                    break
                lam *= 0.5
            history.append(float(norm))
            if not accepted:
                raise RadialSolveError(
                    "damped Newton failed to reduce the residual", history)
        if not converged(F, v, d1, d2):
            raise RadialSolveError("Newton did not converge", history)
        return v, F, d1, d2

    history: list[float] = []
    last_error = None
    for guess in guesses:
        try:
            v, F, d1, d2 = newton(guess.copy(), history)
            break
        except RadialSolveError as err:
            last_error = err
    else:
        raise last_error

    vp = np.empty_like(v)
    vpp = np.empty_like(v)
    vp[1:-1] = d1m * v[:-2] + d1c * v[1:-1] + d1p * v[2:]
    vpp[1:-1] = d2m * v[:-2] + d2c * v[1:-1] + d2p * v[2:]
    for idx, sl in ((0, slice(0, 3)), (-1, slice(-3, None))):
        c = np.polyfit(r[sl] - r[idx], v[sl], 2)
        vp[idx] = c[1]
        vpp[idx] = 2.0 * c[0]

    res = np.zeros_like(v)
    res[1:-1] = F[1:-1]
    thresh = np.full_like(v, tol)
    thresh[1:-1] = residual_threshold(v, d1, d2)
    sol = RadialSolution(n, "annulus", r, v, vp, vpp, float(r0), float(R),
                         res, thresh)
    sol.endpoint_data = boundary_fit(sol)
    return sol


def curvature_radial(sol: RadialSolution) -> RadialCurvature:
    """Sectional/Ricci components of g = v^-2 g_E along the radial profile.

    In the frame (radial, tangential) the Hessian of v has eigenvalues v''
    and v'/r, so the curvature formulas specialize to

        K_rad_tan = v v'' + v v'/r - v'^2
        K_tan_tan = 2 v v'/r - v'^2
        Ric_rad   = (n-2) v v'' - (n-2)/2 v'^2 - n/2
        Ric_tan   = (n-2) v v'/r - (n-2)/2 v'^2 - n/2
    """
    n = sol.n
    r, v, vp, vpp = sol.r, sol.v, sol.v_prime, sol.v_double_prime
    ratio = np.where(r > 0, vp / np.where(r > 0, r, 1.0), vpp)
    k_rt = v * vpp + v * ratio - vp * vp
    k_tt = 2.0 * v * ratio - vp * vp
    ric_rad = (n - 2) * v * vpp - 0.5 * (n - 2) * vp * vp - 0.5 * n
    ric_tan = (n - 2) * v * ratio - 0.5 * (n - 2) * vp * vp - 0.5 * n
    return RadialCurvature(r, k_rt, k_tt, ric_rad, ric_tan)


def boundary_fit(sol: RadialSolution, window: int = 24) -> dict:
    """Least-squares fit of v against d and d^2 near each boundary.

    Returns per-boundary {"slope", "quad_coeff"}; slope should be 1 and
    quad_coeff should be -H/(2(n-1)) when the expansion closure holds.
    """
    out = {}
    boundaries = [("outer", sol.R, -1.0)]
    if sol.domain_kind == "annulus":
        boundaries.append(("inner", sol.r0, 1.0))
    for name, rb, orient in boundaries:
        d = orient * (sol.r - rb)
        order = np.argsort(d)
        take = order[(d[order] > 0)][:window]
        if take.size < 4:
            raise RadialSolveError("too few nodes in the boundary fit window")
        dd = d[take]
        A = np.column_stack([dd, dd * dd])
        coef, *_ = np.linalg.lstsq(A, sol.v[take], rcond=None)
        out[name] = {"slope": float(coef[0]), "quad_coeff": float(coef[1])}
    return out


def radial_csv(sol: RadialSolution, curv: RadialCurvature | None = None) -> str:
    """CSV text with columns r, v, v', v'', residual and the curvature set."""
    if curv is None:
        curv = curvature_radial(sol)
    buf = io.StringIO()
    buf.write("r,v,v_prime,v_double_prime,residual,"
              "K_rad_tan,K_tan_tan,Ric_rad,Ric_tan\n")
    res = sol.residual if sol.residual is not None else np.zeros_like(sol.r)
    for row in zip(sol.r, sol.v, sol.v_prime, sol.v_double_prime, res,
                   curv.K_rad_tan, curv.K_tan_tan, curv.Ric_rad, curv.Ric_tan):
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return buf.getvalue()


def solve_domain(domain: geometry.DomainSpec, tol: float = TOL_PDE,
                 num_nodes: int = DEFAULT_NODES) -> RadialSolution:
    """Radial solve for a rotationally symmetric domain spec."""
    s = domain.shape
    if isinstance(s, geometry.Ball):
        if any(c != 0.0 for c in s.center):
            raise ValueError("radial path needs a ball centered at the origin")
        return solve_ball(domain.dim, s.radius, min(num_nodes, 1025))
    if isinstance(s, geometry.Annulus):
        return solve_annulus(domain.dim, s.r0, s.R, tol, num_nodes)
    raise ValueError("radial path supports balls and annuli only")
