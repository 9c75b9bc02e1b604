"""Pointwise curvature of the metric g = v^-2 g_E from a solved field.

In the orthonormal frame of g (coordinate vectors scaled by v) the
curvatures reduce to polynomial expressions in v and its derivatives:

    sectional(i, j) = v v_ii + v v_jj - |grad v|^2          (i != j)
    ricci           = (n-2) v Hess(v) - [ (n-2)/2 |grad v|^2 + n/2 ] Id

Their trace obeys  sum(ricci eigenvalues) = -n(n-1) + (n-2) * residual,
which is the per-node exactness check carried in every report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import geometry, grid, kernels

__all__ = [
    "CurvatureField",
    "CurvaturePoint",
    "CurvatureReport",
    "point_at",
    "hessian_field",
    "sectional",
    "sectional_extremes",
    "ricci",
    "hessian_from_u",
    "ricci_eigenvalues",
    "eigvalsh_sym3",
    "trace_defect",
    "curvature_report",
    "boundary_asymptotics_check",
    "MobiusInversion",
    "mobius_pushforward",
    "image_ball_of_inversion",
]

REPORT_DEPTH = 2.0      # nodes closer than this many h to the boundary are
                        # excluded from eigen-reporting (one-sided noise)


@dataclass
class CurvatureField:
    """Derivatives of v at a set of lattice nodes (packed)."""

    n: int
    h: float
    index: np.ndarray          # flat box indices
    v: np.ndarray              # [K]
    grad: np.ndarray           # [n, K]
    hess_diag: np.ndarray      # [n, K]
    hess_off: np.ndarray       # [n(n-1)/2, K] pairs (i<j) lexicographic

    def hessian_matrices(self) -> np.ndarray:
        K = self.v.size
        H = np.empty((K, self.n, self.n))
        for i in range(self.n):
            H[:, i, i] = self.hess_diag[i]
        pos = 0
        for i in range(self.n):
            for j in range(i + 1, self.n):
                H[:, i, j] = H[:, j, i] = self.hess_off[pos]
                pos += 1
        return H


@dataclass
class CurvaturePoint:
    """Single-node view of the packed curvature data."""

    position: np.ndarray
    v: float
    grad: np.ndarray
    hess: np.ndarray
    ricci_matrix: np.ndarray
    ricci_eigenvalues: np.ndarray
    min_sectional: float
    max_sectional: float
    trace_defect: float


def point_at(cf: "CurvatureField", k: int, fld=None) -> CurvaturePoint:
    """Assemble the per-node record for packed index k."""
    H = cf.hessian_matrices()[k]
    g2 = float((cf.grad[:, k] ** 2).sum())
    n = cf.n
    ric = (n - 2) * cf.v[k] * H - (0.5 * (n - 2) * g2 + 0.5 * n) * np.eye(n)
    eigs = eigvalsh_sym3(ric) if n == 3 else np.linalg.eigvalsh(ric)
    secs = [cf.v[k] * (H[i, i] + H[j, j]) - g2
            for i in range(n) for j in range(i + 1, n)]
    pos = (fld.node_points(np.array([cf.index[k]]))[0] if fld is not None
           else np.full(n, np.nan))
    return CurvaturePoint(pos, float(cf.v[k]), cf.grad[:, k].copy(), H, ric,
                          eigs, float(min(secs)), float(max(secs)),
                          float(abs(eigs.sum() + n * (n - 1))))


@dataclass
class CurvatureReport:
    domain: str
    h: float
    num_nodes: int
    min_ricci: float
    max_ricci: float
    min_sectional: float
    max_sectional: float
    trace_defect_max: float
    argmax_ricci: tuple
    backend: str = kernels.BACKEND

    def to_json(self) -> str:
        return json.dumps({
            "domain": self.domain,
            "h": self.h,
            "num_nodes": self.num_nodes,
            "min_ricci": self.min_ricci,
            "max_ricci": self.max_ricci,
            "sectional_range": [self.min_sectional, self.max_sectional],
            "trace_defect_max": self.trace_defect_max,
            "argmax": list(self.argmax_ricci),
        }, indent=2, sort_keys=True)


def hessian_field(fld: grid.GridField, min_depth: float = REPORT_DEPTH) -> CurvatureField:
    """Gradient and Hessian of the field at nodes deeper than min_depth * h.

    Central differences throughout; at depth > 1 the stencil reads only
    interior and expansion-filled cut values, both second-order data.
    """
    idx = fld.reported_index(min_depth)
    if idx.size == 0:
        raise ValueError("no nodes at the requested interior depth; refine h")
    vflat = np.ascontiguousarray(fld.values.ravel())
    g, hd, ho = kernels.hessian(vflat, idx, fld.table.strides, fld.h, fld.n)
    return CurvatureField(fld.n, fld.h, idx, vflat[idx], g, hd, ho)


def shell_field(fld: grid.GridField, lo: float, hi: float) -> CurvatureField:
    """Hessian data on the near-boundary shell lo*h < d < hi*h."""
    d = fld.distance.ravel()[fld.table.interior]
    sel = (d > lo * fld.h) & (d < hi * fld.h)
    idx = fld.table.interior[sel]
    if idx.size == 0:
        raise ValueError("empty near-boundary shell at this mesh width")
    vflat = np.ascontiguousarray(fld.values.ravel())
    g, hd, ho = kernels.hessian(vflat, idx, fld.table.strides, fld.h, fld.n)
    return CurvatureField(fld.n, fld.h, idx, vflat[idx], g, hd, ho)


def sectional(v, grad, hess_diag, i: int, j: int):
    """Plane curvature sectional(i, j) = v v_ii + v v_jj - |grad|^2."""
    if i == j:
        raise ValueError("sectional curvature needs two distinct axes")
    g2 = (np.asarray(grad) ** 2).sum(axis=0)
    return v * hess_diag[i] + v * hess_diag[j] - g2


def sectional_extremes(cf: CurvatureField):
    """(min, max) over all coordinate planes i < j, per node."""
    g2 = (cf.grad ** 2).sum(axis=0)
    lo = np.full(cf.v.size, np.inf)
    hi = np.full(cf.v.size, -np.inf)
    for i in range(cf.n):
        for j in range(i + 1, cf.n):
            k = cf.v * (cf.hess_diag[i] + cf.hess_diag[j]) - g2
            np.minimum(lo, k, out=lo)
            np.maximum(hi, k, out=hi)
    return lo, hi


def ricci(cf: CurvatureField, ambient_ricci=None, ambient_scalar=0.0) -> np.ndarray:
    """Ricci matrices [K, n, n] in the conformal orthonormal frame.

    The ambient terms v^2 R_kl and v^2 S_g / (2(n-1)) of the curved-background
    formula are carried for completeness but this package only ever evaluates
    them at zero (flat background).
    """
    n = cf.n
    H = cf.hessian_matrices()
    g2 = (cf.grad ** 2).sum(axis=0)
    out = (n - 2) * cf.v[:, None, None] * H
    shift = 0.5 * (n - 2) * g2 + 0.5 * n
    if ambient_scalar != 0.0:
        shift = shift + cf.v ** 2 * ambient_scalar / (2.0 * (n - 1))
    if np.ndim(shift) == 0:
        shift = np.full(cf.v.size, float(shift))
    for i in range(n):
        out[:, i, i] -= shift
    if ambient_ricci is not None:
        out += cf.v[:, None, None] ** 2 * np.asarray(ambient_ricci)
    return out


def hessian_from_u(u, grad_u, hess_u, n):
    """Convert blow-up-unknown derivatives to factor derivatives.

    With v = u^(-2/(n-2)):

        v_ij = -2/(n-2) u^(-2/(n-2)) ( u_ij/u - n/(n-2) u_i u_j / u^2 )

    Inputs are packed ([K], [n, K], [K, n, n]); returns (v, grad_v, hess_v).
    """
    u = np.asarray(u, dtype=float)
    p = -2.0 / (n - 2)
    v = u ** p
    grad_v = p * (u ** (p - 1.0))[None, :] * np.asarray(grad_u)
    outer = np.einsum("ik,jk->kij", grad_u, grad_u)
    hess_v = p * v[:, None, None] * (
        np.asarray(hess_u) / u[:, None, None]
        - (n / (n - 2.0)) * outer / (u ** 2)[:, None, None])
    return v, grad_v, hess_v


def eigvalsh_sym3(mats: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of symmetric 3x3 matrices, closed form.

    Trigonometric method; vectorized over the leading axis and
    deterministic, unlike iterative eigensolvers.
    """
    m = np.asarray(mats)
    single = m.ndim == 2
    if single:
        m = m[None]
    a00, a11, a22 = m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]
    a01, a02, a12 = m[:, 0, 1], m[:, 0, 2], m[:, 1, 2]
    q = (a00 + a11 + a22) / 3.0
    p1 = a01 ** 2 + a02 ** 2 + a12 ** 2
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    safe = p > 0
    ps = np.where(safe, p, 1.0)
    b00, b11, b22 = (a00 - q) / ps, (a11 - q) / ps, (a22 - q) / ps
    b01, b02, b12 = a01 / ps, a02 / ps, a12 / ps
    detb = (b00 * (b11 * b22 - b12 * b12)
            - b01 * (b01 * b22 - b12 * b02)
            + b02 * (b01 * b12 - b11 * b02))
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    eig = np.stack([lo, mid, hi], axis=-1)
    eig[~safe] = np.stack([q, q, q], axis=-1)[~safe]
    return eig[0] if single else eig


def ricci_eigenvalues(cf: CurvatureField) -> np.ndarray:
    """Sorted Ricci eigenvalues [K, n]; closed form for n = 3, LAPACK above."""
    mats = ricci(cf)
    if cf.n == 3:
        return eigvalsh_sym3(mats)
    return np.linalg.eigvalsh(mats)


def trace_defect(eigs: np.ndarray, n: int) -> np.ndarray:
    return np.abs(eigs.sum(axis=-1) + n * (n - 1))


def curvature_report(fld: grid.GridField, min_depth: float = REPORT_DEPTH) -> CurvatureReport:
    cf = hessian_field(fld, min_depth)
    eigs = ricci_eigenvalues(cf)
    lo, hi = sectional_extremes(cf)
    defect = trace_defect(eigs, cf.n)
    kmax = int(np.argmax(eigs[:, -1]))
    arg = tuple(int(x) for x in np.unravel_index(cf.index[kmax], fld.dims))
    return CurvatureReport(
        domain=type(fld.domain.shape).__name__,
        h=fld.h,
        num_nodes=int(cf.v.size),
        min_ricci=float(eigs[:, 0].min()),
        max_ricci=float(eigs[:, -1].max()),
        min_sectional=float(lo.min()),
        max_sectional=float(hi.max()),
        trace_defect_max=float(defect.max()),
        argmax_ricci=arg,
    )


def boundary_asymptotics_check(fld: grid.GridField, lo: float = 1.0,
                               hi: float = 4.0) -> float:
    """Sup over the shell lo*h < d < hi*h of |ricci eigenvalue + (n-1)|.

    The deviation is O(d) for a solved field, so it must shrink under mesh
    refinement at fixed shell multipliers.
    """
    cf = shell_field(fld, lo, hi)
    eigs = ricci_eigenvalues(cf)
    return float(np.abs(eigs + (fld.n - 1)).max())


# -- Mobius pushforward ---------------------------------------------------------


@dataclass(frozen=True)
class MobiusInversion:
    """Sphere inversion x -> center + radius^2 (x - center)/|x - center|^2."""

    center: tuple[float, ...]
    radius: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        q = x - np.asarray(self.center)
        r2 = (q * q).sum(axis=-1, keepdims=True)
        return np.asarray(self.center) + self.radius ** 2 * q / r2

    def conformal_factor(self, x):
        """|d phi| at x (isotropic scale factor)."""
        x = np.asarray(x, dtype=float)
        q = x - np.asarray(self.center)
        return self.radius ** 2 / (q * q).sum(axis=-1)


@dataclass(frozen=True)
class MobiusSimilarity:
    scale: float = 1.0
    shift: tuple[float, ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shift = np.asarray(self.shift) if self.shift else 0.0
        return self.scale * x + shift

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(self.scale))


def image_ball_of_inversion(ball: geometry.Ball, inv: MobiusInversion) -> geometry.Ball:
    """Image of a ball (not through the inversion center) under an inversion."""
    a = np.asarray(ball.center, dtype=float)
    c = np.asarray(inv.center, dtype=float)
    s = (a - c) @ (a - c) - ball.radius ** 2
    if abs(s) < 1e-14:
        raise ValueError("ball passes through the inversion center")
    center = c + inv.radius ** 2 * (a - c) / s
    radius = inv.radius ** 2 * ball.radius / abs(s)
    return geometry.Ball(tuple(center), float(radius))


def mobius_pushforward(ball_domain: geometry.DomainSpec, mob, points):
    """Predicted factor on the image domain: v_img(phi(x)) = |dphi(x)| v(x).

    `points` sample the source ball; returns (phi(points), predicted values).
    """
    s = ball_domain.shape
    if not isinstance(s, geometry.Ball):
        raise ValueError("pushforward starts from a ball solution")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(s.center)
    r2 = ((points - c) ** 2).sum(axis=-1)
    v = (s.radius ** 2 - r2) / (2.0 * s.radius)
    return mob(points), mob.conformal_factor(points) * v


def ball_closed_form(ball: geometry.Ball, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r2 = ((points - np.asarray(ball.center)) ** 2).sum(axis=-1)
    return (ball.radius ** 2 - r2) / (2.0 * ball.radius)
