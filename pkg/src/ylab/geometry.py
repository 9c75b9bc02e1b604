"""Catalog of bounded domains with signed distance and boundary curvature.

Sign conventions, fixed once for every consumer:

* signed distance is positive inside the domain, zero on the boundary and
  negative outside;
* the mean curvature H is the SUM of the principal curvatures taken with
  respect to the interior unit normal.  A ball of radius R therefore has
  H = (n-1)/R on its boundary, and a spherical hole of radius r has
  H = -(n-1)/r (the interior normal points away from the hole's center).

All point-valued queries accept arrays of shape (..., n) and broadcast;
scalars come back for single points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "Ball",
    "Annulus",
    "Ellipsoid",
    "BallMinusBalls",
    "HalfSpaceCap",
    "DomainSpec",
    "BoundaryPoint",
    "ball",
    "annulus",
    "ellipsoid",
    "ball_minus_balls",
    "half_space_cap",
    "signed_distance",
    "nearest_boundary",
    "mean_curvature",
    "classify",
    "bounding_box",
    "diameter",
]

TOL_GEOM = 1e-12
PROJECTION_MAX_ITER = 80


class GeometryError(ValueError):
    """Invalid domain parameters or an ill-posed boundary query."""


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class Annulus:
    """Spherical shell r0 < |x| < R centered at the origin."""

    r0: float
    R: float


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid sum((x_i/a_i)^2) < 1 centered at the origin."""

    semi_axes: tuple[float, ...]


@dataclass(frozen=True)
class BallMinusBalls:
    outer: Ball
    holes: tuple[Ball, ...]


@dataclass(frozen=True)
class HalfSpaceCap:
    """Ball cut by the half-space x . normal <= offset, edge rounded."""

    ball: Ball
    normal: tuple[float, ...]
    offset: float


@dataclass(frozen=True)
class DomainSpec:
    dim: int
    shape: Ball | Annulus | Ellipsoid | BallMinusBalls | HalfSpaceCap
    smoothing_radius: float = 0.0

    def __post_init__(self):
        if self.dim < 3:
            raise GeometryError(f"dimension must be >= 3, got {self.dim}")
        _validate_shape(self)


@dataclass(frozen=True)
class BoundaryPoint:
    position: tuple[float, ...]
    interior_normal: tuple[float, ...]
    mean_curvature_H: float


def _unit(vec):
    vec = np.asarray(vec, dtype=float)
    nrm = float(np.linalg.norm(vec))
    if nrm == 0.0:
        raise GeometryError("zero-length normal vector")
    return vec / nrm


def _validate_shape(domain: DomainSpec) -> None:
    n, s = domain.dim, domain.shape
    if isinstance(s, Ball):
        if len(s.center) != n:
            raise GeometryError("ball center dimension mismatch")
        if s.radius <= 0:
            raise GeometryError("ball radius must be positive")
    elif isinstance(s, Annulus):
        if not 0 < s.r0 < s.R:
            raise GeometryError(f"annulus needs 0 < r0 < R, got r0={s.r0}, R={s.R}")
    elif isinstance(s, Ellipsoid):
        if len(s.semi_axes) != n:
            raise GeometryError("ellipsoid semi-axis count mismatch")
        if any(a <= 0 for a in s.semi_axes):
            raise GeometryError("ellipsoid semi-axes must all be positive")
    elif isinstance(s, BallMinusBalls):
        co = np.asarray(s.outer.center)
        if len(s.outer.center) != n or s.outer.radius <= 0:
            raise GeometryError("invalid outer ball")
        for h in s.holes:
            if len(h.center) != n or h.radius <= 0:
                raise GeometryError("invalid hole")
            if np.linalg.norm(np.asarray(h.center) - co) + h.radius >= s.outer.radius:
                raise GeometryError("hole not strictly inside the outer ball")
        for i, a in enumerate(s.holes):
            for b in s.holes[i + 1 :]:
                gap = np.linalg.norm(np.asarray(a.center) - np.asarray(b.center))
                if gap <= a.radius + b.radius:
                    raise GeometryError("hole closures are not pairwise disjoint")
    elif isinstance(s, HalfSpaceCap):
        if len(s.ball.center) != n or len(s.normal) != n:
            raise GeometryError("cap dimension mismatch")
        if abs(np.linalg.norm(np.asarray(s.normal)) - 1.0) > 1e-9:
            raise GeometryError("cap normal must be a unit vector")
        rho = domain.smoothing_radius
        if rho < 0 or rho >= s.ball.radius:
            raise GeometryError("smoothing radius must lie in [0, R)")
        beta = s.offset - float(np.dot(s.normal, s.ball.center))
        if not -(s.ball.radius - rho) < beta - rho < s.ball.radius - rho:
            raise GeometryError("half-space does not cut the (shrunk) ball properly")
    else:
        raise GeometryError(f"unknown shape {type(s).__name__}")


# -- convenience constructors -------------------------------------------------


def ball(n: int, radius: float, center=None) -> DomainSpec:
    c = tuple(0.0 for _ in range(n)) if center is None else tuple(float(x) for x in center)
    return DomainSpec(n, Ball(c, float(radius)))


def annulus(n: int, r0: float, R: float) -> DomainSpec:
    return DomainSpec(n, Annulus(float(r0), float(R)))


def ellipsoid(semi_axes) -> DomainSpec:
    axes = tuple(float(a) for a in semi_axes)
    return DomainSpec(len(axes), Ellipsoid(axes))


def ball_minus_balls(n: int, outer: Ball, holes) -> DomainSpec:
    return DomainSpec(n, BallMinusBalls(outer, tuple(holes)))


def half_space_cap(n: int, radius: float, center=None, normal=None, offset=0.0,
                   smoothing_radius=None) -> DomainSpec:
    c = tuple(0.0 for _ in range(n)) if center is None else tuple(float(x) for x in center)
    m = tuple(1.0 if i == n - 1 else 0.0 for i in range(n)) if normal is None else \
        tuple(float(x) for x in _unit(normal))
    rho = 0.05 * radius if smoothing_radius is None else float(smoothing_radius)
    return DomainSpec(n, HalfSpaceCap(Ball(c, float(radius)), m, float(offset)), rho)


# -- signed distance ----------------------------------------------------------


def signed_distance(domain: DomainSpec, x):
    """Signed distance to the domain boundary, positive inside.

    Exact for ball/annulus/ball-with-holes; accurate to TOL_GEOM for the
    ellipsoid (iterative nearest-point projection) and the smoothed cap.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    if not np.all(np.isfinite(pts)):
        raise GeometryError("query point must be finite")
    if pts.shape[-1] != domain.dim:
        raise GeometryError("query point dimension mismatch")
    d = _sd_dispatch(domain, pts)
    return float(d[0]) if scalar else d.reshape(x.shape[:-1])


def _sd_dispatch(domain, pts):
    s = domain.shape
    if isinstance(s, Ball):
        return s.radius - np.linalg.norm(pts - np.asarray(s.center), axis=-1)
    if isinstance(s, Annulus):
        r = np.linalg.norm(pts, axis=-1)
        return np.minimum(r - s.r0, s.R - r)
    if isinstance(s, BallMinusBalls):
        d = s.outer.radius - np.linalg.norm(pts - np.asarray(s.outer.center), axis=-1)
        for h in s.holes:
            d = np.minimum(d, np.linalg.norm(pts - np.asarray(h.center), axis=-1) - h.radius)
        return d
    if isinstance(s, Ellipsoid):
        d, _ = _ellipsoid_distance(np.asarray(s.semi_axes), pts)
        return d
    if isinstance(s, HalfSpaceCap):
        return _sd_cap(domain, pts)
    raise GeometryError(f"unknown shape {type(s).__name__}")


def _cap_params(domain):
    s = domain.shape
    rho = domain.smoothing_radius
    c = np.asarray(s.ball.center)
    m = np.asarray(s.normal)
    # Hard core: the smoothed cap is the rho-dilation of ball(R-rho) cut at
    # offset reduced by rho, which keeps the signed distance exact.
    Rp = s.ball.radius - rho
    betap = s.offset - float(np.dot(m, c)) - rho
    s_rim = math.sqrt(max(Rp * Rp - betap * betap, 0.0))
    return c, m, rho, Rp, betap, s_rim


def _sd_cap(domain, pts):
    c, m, rho, Rp, betap, s_rim = _cap_params(domain)
    q = pts - c
    zeta = q @ m
    r = np.linalg.norm(q, axis=-1)
    rperp = np.sqrt(np.maximum(r * r - zeta * zeta, 0.0))

    inside = (r < Rp) & (zeta < betap)
    d_in = np.minimum(Rp - r, betap - zeta)

    d_rim = np.hypot(rperp - s_rim, zeta - betap)
    # beyond the cutting plane: disk foot when under the rim radius, else rim
    d_plane_side = np.where(rperp <= s_rim, zeta - betap, d_rim)
    # inside the half-space but outside the ball: radial foot when it stays on
    # the spherical patch, else rim
    with np.errstate(invalid="ignore", divide="ignore"):
        on_patch = zeta * Rp <= betap * np.maximum(r, 1e-300)
    d_ball_side = np.where(on_patch, r - Rp, d_rim)
    d_out = np.where(zeta >= betap, d_plane_side, d_ball_side)
    return np.where(inside, d_in, -d_out) + rho


# -- ellipsoid nearest point --------------------------------------------------


def _ellipsoid_distance(axes, pts):
    """Distance and nearest boundary point for the axis-aligned ellipsoid.

    Solves sum((a_i w_i / (a_i^2 + t))^2) = 1 for the largest root by
    bracketed bisection with a Newton polish.  Points on symmetry planes of
    the shortest axis take the degenerate branch t = -a_min^2, which is where
    the naive parametrization loses the true nearest point.
    """
    axes = np.asarray(axes, dtype=float)
    w = np.abs(pts)
    signs = np.where(pts < 0, -1.0, 1.0)
    m, n = w.shape
    a2 = axes * axes
    amin2 = float(a2.min())
    scale = float(axes.max())
    zero = w <= 1e-14 * scale

    foot = np.zeros_like(w)
    dist = np.zeros(m)

    patterns = {}
    for key in {tuple(row) for row in zero}:
        patterns[key] = np.nonzero((zero == np.asarray(key, bool)).all(axis=1))[0]

    for key, rows in patterns.items():
        zmask = np.asarray(key, bool)
        sub = w[rows]
        if zmask.all():
            # domain center: nearest point sits on the shortest axis
            j = int(np.argmin(axes))
            foot[rows, j] = axes[j]
            dist[rows] = axes[j]
            continue
        act = ~zmask
        a2a = a2[act]
        t = _largest_ellipsoid_root(a2a, sub[:, act])
        f_act = a2a * sub[:, act] / (a2a + t[:, None])
        d2 = ((sub[:, act] - f_act) ** 2).sum(axis=1)
        ft = np.zeros_like(sub)
        ft[:, act] = f_act
        # degenerate branch: only competitive when a shortest-axis
        # coordinate vanishes and the reduced point is interior enough
        if zmask[np.argmin(a2)]:
            denom = a2a - amin2
            ok = denom > 0
            if ok.all():
                g = ((a2a * sub[:, act] / denom) ** 2 / a2a).sum(axis=1)
                use = g < 1.0
                if use.any():
                    f_deg = a2a * sub[use][:, act] / denom
                    slack2 = amin2 * (1.0 - g[use])
                    d2_deg = ((sub[use][:, act] - f_deg) ** 2).sum(axis=1) + slack2
                    better = d2_deg < d2[use]
                    upd = np.nonzero(use)[0][better]
                    d2[upd] = d2_deg[better]
                    ftu = np.zeros((len(upd), n))
                    ftu[:, act] = f_deg[better]
                    ftu[:, int(np.argmin(a2))] = np.sqrt(slack2[better])
                    ft[upd] = ftu
        foot[rows] = ft
        dist[rows] = np.sqrt(d2)

    inside = ((pts / axes) ** 2).sum(axis=1) < 1.0
    return np.where(inside, dist, -dist), foot * signs


def _largest_ellipsoid_root(a2, w):
    """Largest root of f(t) = sum((a_i w_i/(a_i^2+t))^2) - 1, w > 0 rowwise."""
    pole = -a2.min()
    aw = a2 * w * w
    eps = np.finfo(float).eps
    lo = np.full(w.shape[0], pole + 4 * eps * abs(pole) + 1e-300)
    hi = np.sqrt(aw.sum(axis=1))  # f(hi) <= sum(aw)/hi^2 = 1, strictly below
    hi = np.maximum(hi, lo + 1e-30)

    def f(t):
        return (aw / (a2 + t[:, None]) ** 2).sum(axis=1) - 1.0

    # expand the bracket defensively, then bisect
    bad = f(hi) > 0
    while bad.any():
        hi[bad] = hi[bad] * 2 + 1.0
        bad = f(hi) > 0
    for _ in range(PROJECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        high = f(mid) > 0
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    t = 0.5 * (lo + hi)
    for _ in range(3):
        ft = (aw / (a2 + t[:, None]) ** 2).sum(axis=1) - 1.0
        dft = (-2 * aw / (a2 + t[:, None]) ** 3).sum(axis=1)
        step = np.where(dft != 0, ft / dft, 0.0)
        t = np.clip(t - step, lo, hi)
    return t


# -- nearest boundary data ----------------------------------------------------


def nearest_boundary(domain: DomainSpec, x):
    """Per-point (signed distance, foot point, interior normal, H).

    The interior normal points into the domain at the foot point; H follows
    the trace convention fixed in the module docstring.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x.reshape(-1, domain.dim) if x.ndim > 2 else x)
    d, foot, normal, H = _nearest_dispatch(domain, pts)
    if scalar:
        return float(d[0]), foot[0], normal[0], float(H[0])
    return d, foot, normal, H


def _sphere_piece(pts, center, radius, inward: bool):
    q = pts - center
    r = np.linalg.norm(q, axis=-1)
    qh = q / np.maximum(r, 1e-300)[..., None]
    qh = np.where(r[..., None] < 1e-300, _e1_like(qh), qh)
    foot = center + radius * qh
    if inward:
        # outer sphere: domain is inside, normal points to the center
        return radius - r, foot, -qh, np.full(r.shape, (pts.shape[-1] - 1) / radius)
    return r - radius, foot, qh, np.full(r.shape, -(pts.shape[-1] - 1) / radius)


def _e1_like(arr):
    e = np.zeros_like(arr)
    e[..., 0] = 1.0
    return e


def _nearest_dispatch(domain, pts):
    s = domain.shape
    n = domain.dim
    if isinstance(s, Ball):
        return _sphere_piece(pts, np.asarray(s.center), s.radius, inward=True)
    if isinstance(s, Annulus):
        d_o, f_o, n_o, H_o = _sphere_piece(pts, np.zeros(n), s.R, inward=True)
        d_i, f_i, n_i, H_i = _sphere_piece(pts, np.zeros(n), s.r0, inward=False)
        return _piece_min([(d_o, f_o, n_o, H_o), (d_i, f_i, n_i, H_i)])
    if isinstance(s, BallMinusBalls):
        pieces = [_sphere_piece(pts, np.asarray(s.outer.center), s.outer.radius, inward=True)]
        for h in s.holes:
            pieces.append(_sphere_piece(pts, np.asarray(h.center), h.radius, inward=False))
        return _piece_min(pieces)
    if isinstance(s, Ellipsoid):
        axes = np.asarray(s.semi_axes)
        d, foot = _ellipsoid_distance(axes, pts)
        grad = foot / (axes * axes)
        nrm = np.linalg.norm(grad, axis=-1, keepdims=True)
        normal = -grad / np.maximum(nrm, 1e-300)
        H = _ellipsoid_mean_curvature(axes, foot)
        return d, foot, normal, H
    if isinstance(s, HalfSpaceCap):
        return _nearest_cap(domain, pts)
    raise GeometryError(f"unknown shape {type(s).__name__}")


def _piece_min(pieces):
    d = np.stack([p[0] for p in pieces])
    k = np.argmin(d, axis=0)
    rows = np.arange(d.shape[1])
    foot = np.stack([p[1] for p in pieces])[k, rows]
    normal = np.stack([p[2] for p in pieces])[k, rows]
    H = np.stack([p[3] for p in pieces])[k, rows]
    return d[k, rows], foot, normal, H


def _ellipsoid_mean_curvature(axes, foot):
    # H = div(grad F/|grad F|) for F = sum(x^2/a^2) - 1, which is the trace
    # convention with respect to the interior normal (ball check: (n-1)/R)
    a2 = axes * axes
    g = 2 * foot / a2
    g2 = (g * g).sum(axis=-1)
    lapF = 2 * (1.0 / a2).sum()
    gHg = (g * g * (2.0 / a2)).sum(axis=-1)
    return (lapF * g2 - gHg) / np.maximum(g2, 1e-300) ** 1.5


def _nearest_cap(domain, pts):
    c, m, rho, Rp, betap, s_rim = _cap_params(domain)
    n = domain.dim
    q = pts - c
    zeta = q @ m
    w = q - zeta[:, None] * m
    rperp = np.linalg.norm(w, axis=-1)
    r = np.linalg.norm(q, axis=-1)
    what = w / np.maximum(rperp, 1e-300)[:, None]
    what = np.where(rperp[:, None] < 1e-300, _perp_basis_vec(m)[None, :], what)

    if rho == 0.0:
        d_rim = np.hypot(rperp - s_rim, zeta - betap)
        if np.any(d_rim < 1e-9 * max(Rp, 1.0)):
            raise GeometryError("non-smooth boundary point (cap seam, "
                                "smoothing_radius = 0)")

    # classify against the hard core: sphere patch, plane patch, or rim tube
    inside = (r < Rp) & (zeta < betap)
    sphere_in = inside & (Rp - r <= betap - zeta)
    plane_in = inside & ~sphere_in
    on_patch = zeta * Rp <= betap * np.maximum(r, 1e-300)
    sphere_out = ~inside & (zeta < betap) & on_patch
    plane_out = ~inside & (zeta >= betap) & (rperp <= s_rim)
    rim = ~(inside | sphere_out | plane_out)
    sphere = sphere_in | sphere_out
    plane = plane_in | plane_out

    d = _sd_cap(domain, pts)
    foot = np.zeros_like(pts)
    normal = np.zeros_like(pts)
    H = np.zeros(len(pts))

    if sphere.any():
        qh = q[sphere] / np.maximum(r[sphere], 1e-300)[:, None]
        foot[sphere] = c + (Rp + rho) * qh
        normal[sphere] = -qh
        H[sphere] = (n - 1) / (Rp + rho)
    if plane.any():
        foot[plane] = pts[plane] + (betap + rho - zeta[plane])[:, None] * m
        normal[plane] = -m
        H[plane] = 0.0
    if rim.any():
        if rho == 0.0:
            raise GeometryError("non-smooth boundary point")
        rim_pt = c + betap * m + s_rim * what[rim]
        off = pts[rim] - rim_pt
        off_n = np.linalg.norm(off, axis=-1)
        u = off / np.maximum(off_n, 1e-300)[:, None]
        # points exactly on the rim circle: offset toward the corner bisector
        deg = off_n < 1e-300
        if deg.any():
            u[deg] = (what[rim][deg] + m) / math.sqrt(2.0)
        foot[rim] = rim_pt + rho * u
        normal[rim] = -u
        cphi = (u * what[rim]).sum(axis=-1)
        H[rim] = 1.0 / rho + (n - 2) * cphi / (s_rim + rho * cphi)
    return d, foot, normal, H


def _perp_basis_vec(m):
    k = int(np.argmin(np.abs(m)))
    e = np.zeros_like(m)
    e[k] = 1.0
    v = e - (e @ m) * m
    return v / np.linalg.norm(v)


def mean_curvature(domain: DomainSpec, p, tol: float = 1e-9) -> BoundaryPoint:
    """Boundary data at a point p lying on (or very near) the boundary."""
    p = np.asarray(p, dtype=float)
    d = signed_distance(domain, p)
    if abs(d) > max(tol, TOL_GEOM):
        raise GeometryError(f"point is not on the boundary (signed distance {d:g})")
    _, foot, normal, H = nearest_boundary(domain, p)
    return BoundaryPoint(tuple(foot), tuple(normal), float(H))


def classify(domain: DomainSpec) -> str:
    s = domain.shape
    if isinstance(s, (Ball, Ellipsoid, HalfSpaceCap)):
        return "convex"
    if isinstance(s, Annulus):
        return "annular"
    if isinstance(s, BallMinusBalls):
        return "multi_hole" if s.holes else "convex"
    return "other"


def bounding_box(domain: DomainSpec):
    s = domain.shape
    n = domain.dim
    if isinstance(s, Ball):
        c = np.asarray(s.center)
        return c - s.radius, c + s.radius
    if isinstance(s, Annulus):
        return np.full(n, -s.R), np.full(n, s.R)
    if isinstance(s, Ellipsoid):
        a = np.asarray(s.semi_axes)
        return -a, a
    if isinstance(s, BallMinusBalls):
        c = np.asarray(s.outer.center)
        return c - s.outer.radius, c + s.outer.radius
    if isinstance(s, HalfSpaceCap):
        c = np.asarray(s.ball.center)
        return c - s.ball.radius, c + s.ball.radius
    raise GeometryError(f"unknown shape {type(s).__name__}")


def diameter(domain: DomainSpec) -> float:
    lo, hi = bounding_box(domain)
    return float(np.max(hi - lo))
