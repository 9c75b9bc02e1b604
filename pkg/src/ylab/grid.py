"""Regular-lattice discretization with cut-cell boundary closure.

Nodes are classified against the signed distance d:

  * interior: d > safety * h (unknowns of the solver);
  * cut:      -h < d <= safety * h (closure ring, filled from the boundary
              expansion  v = d - H d^2 / (2(n-1))  after a solve);
  * exterior: the rest.

Interior nodes with a non-interior axis neighbor get irregular stencil arms:
if the neighbor lies outside the domain the arm shortens to the boundary
intersection along that axis (value 0 there); if the neighbor is inside but
within the safety band, the arm keeps length h and anchors on the expansion
value at the neighbor.  Both the second-derivative and the gradient use the
three-point unequal-arm formulas, which are exact on quadratics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import geometry

__all__ = [
    "GridField",
    "StencilTable",
    "GridError",
    "MASK_EXTERIOR",
    "MASK_INTERIOR",
    "MASK_CUT",
    "build_grid",
    "expansion_value",
    "field_text",
    "parse_field_text",
    "field_csv",
]

MASK_EXTERIOR = 0
MASK_INTERIOR = 1
MASK_CUT = 2

SAFETY = 0.25
CUT_BAND = 1.0          # cut ring reaches d > -CUT_BAND * h
PAD_NODES = 3
CROSSING_ITERS = 52


class GridError(RuntimeError):
    pass


@dataclass
class StencilTable:
    n: int
    h: float
    shape: tuple[int, ...]
    strides: np.ndarray                  # flat-index step per axis
    interior: np.ndarray                 # int64 [N] sorted flat indices
    irr_of: np.ndarray                   # int32 [N], -1 regular, else irregular row
    irr_rows: np.ndarray                 # int64 [m] positions into the packed arrays
    arm_m: np.ndarray                    # float64 [m, n]
    arm_p: np.ndarray
    idx_m: np.ndarray                    # int64 [m, n], -1 where the arm anchors
    idx_p: np.ndarray
    anc_m: np.ndarray                    # float64 [m, n] anchored closure values
    anc_p: np.ndarray
    anc_d_m: np.ndarray = None           # signed distance at the anchored node
    anc_d_p: np.ndarray = None
    anc_H_m: np.ndarray = None           # boundary mean curvature seen by it
    anc_H_p: np.ndarray = None
    anc_zero: np.ndarray = field(default=None, repr=False)

    @property
    def num_interior(self) -> int:
        return int(self.interior.size)

    def zero_anchors(self):
        if self.anc_zero is None:
            self.anc_zero = np.zeros_like(self.anc_m)
        return self.anc_zero


@dataclass
class GridField:
    domain: geometry.DomainSpec
    n: int
    h: float
    origin: np.ndarray
    dims: tuple[int, ...]
    values: np.ndarray                   # box-shaped float64
    mask: np.ndarray                     # box-shaped int8
    distance: np.ndarray                 # box-shaped float64 signed distance
    table: StencilTable = field(default=None, repr=False)
    report: object = None

    @property
    def interior_values(self) -> np.ndarray:
        return self.values.ravel()[self.table.interior]

    def node_points(self, flat_idx) -> np.ndarray:
        ijk = np.stack(np.unravel_index(flat_idx, self.dims), axis=-1)
        return self.origin + self.h * ijk

    def interior_points(self) -> np.ndarray:
        return self.node_points(self.table.interior)

    def reported_index(self, min_depth: float = 2.0) -> np.ndarray:
        """Interior flat indices at depth d > min_depth * h."""
        d = self.distance.ravel()[self.table.interior]
        return self.table.interior[d > min_depth * self.h]


def expansion_value(d, H, n):
    """Two-term boundary expansion of the conformal factor at distance d."""
    return d - H * d * d / (2.0 * (n - 1))


def _signed_distance_box(domain, origin, dims, h, chunk=262144):
    n = domain.dim
    total = int(np.prod(dims))
    out = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        ijk = np.stack(np.unravel_index(idx, dims), axis=-1)
        out[idx] = geometry.signed_distance(domain, origin + h * ijk)
    return out.reshape(dims)


def _axis_crossing(domain, pts, axis, sign, h):
    """Fraction t in (0, h] with d(x + t sign e_axis) = 0, by bisection.

    Assumes d(pts) > 0 and d(pts + h sign e_axis) <= 0.
    """
    lo = np.zeros(len(pts))
    hi = np.full(len(pts), h)
    step = np.zeros_like(pts)
    step[:, axis] = sign
    for _ in range(CROSSING_ITERS):
        mid = 0.5 * (lo + hi)
        inside = geometry.signed_distance(domain, pts + mid[:, None] * step) > 0.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def build_grid(domain: geometry.DomainSpec, h: float, safety: float = SAFETY) -> GridField:
    """Classify lattice nodes and assemble the stencil closure tables."""
    if h <= 0:
        raise GridError("mesh width must be positive")
    n = domain.dim
    lo, hi = geometry.bounding_box(domain)
    i_lo = np.floor(lo / h).astype(np.int64) - PAD_NODES
    i_hi = np.ceil(hi / h).astype(np.int64) + PAD_NODES
    dims = tuple(int(b - a + 1) for a, b in zip(i_lo, i_hi))
    origin = i_lo * h

    dist = _signed_distance_box(domain, origin, dims, h)
    interior = dist > safety * h
    if not interior.any():
        raise GridError("mesh too coarse: no interior nodes")
    labels, ncomp = ndimage.label(interior, ndimage.generate_binary_structure(n, 1))
    if ncomp != 1:
        raise GridError(f"interior node set is disconnected ({ncomp} components); "
                        "refine the mesh")
    mask = np.zeros(dims, dtype=np.int8)
    mask[interior] = MASK_INTERIOR
    cut = ~interior & (dist > -CUT_BAND * h)
    mask[cut] = MASK_CUT

    strides = np.array(
        [int(np.prod(dims[k + 1:], dtype=np.int64)) for k in range(n)], dtype=np.int64)
    int_flat = np.flatnonzero(interior.ravel()).astype(np.int64)
    int_box = interior

    # irregular nodes: any axis neighbor not interior
    irregular = np.zeros(dims, dtype=bool)
    for k in range(n):
        sl_lo = [slice(None)] * n
        sl_hi = [slice(None)] * n
        sl_lo[k] = slice(1, None)
        sl_hi[k] = slice(None, -1)
        nb = np.zeros(dims, dtype=bool)
        nb[tuple(sl_hi)] |= ~int_box[tuple(sl_lo)]
        nb2 = np.zeros(dims, dtype=bool)
        nb2[tuple(sl_lo)] |= ~int_box[tuple(sl_hi)]
        irregular |= int_box & (nb | nb2)
    irr_flat = np.flatnonzero(irregular.ravel()).astype(np.int64)
    m = irr_flat.size

    irr_of = np.full(int_flat.size, -1, dtype=np.int32)
    pos = np.searchsorted(int_flat, irr_flat)
    irr_of[pos] = np.arange(m, dtype=np.int32)
    irr_rows = pos.astype(np.int64)

    arm_m = np.full((m, n), h)
    arm_p = np.full((m, n), h)
    idx_m = np.empty((m, n), dtype=np.int64)
    idx_p = np.empty((m, n), dtype=np.int64)
    anc_m = np.zeros((m, n))
    anc_p = np.zeros((m, n))
    anc_d_m = np.zeros((m, n))
    anc_d_p = np.zeros((m, n))
    anc_H_m = np.zeros((m, n))
    anc_H_p = np.zeros((m, n))

    dflat = dist.ravel()
    int_flag = int_box.ravel()
    irr_pts = np.stack(np.unravel_index(irr_flat, dims), axis=-1) * h + origin

    for k in range(n):
        for sign, idx_arr, arm_arr, anc_arr, and_arr, anh_arr in (
                (-1, idx_m, arm_m, anc_m, anc_d_m, anc_H_m),
                (+1, idx_p, arm_p, anc_p, anc_d_p, anc_H_p)):
            nbr = irr_flat + sign * strides[k]
            is_int = int_flag[nbr]
            idx_arr[:, k] = np.where(is_int, nbr, -1)
            anchored = ~is_int
            if not anchored.any():
                continue
            out_rows = np.flatnonzero(anchored)
            nb_pts = irr_pts[out_rows].copy()
            nb_pts[:, k] += sign * h
            d_b, _, _, H_b = geometry.nearest_boundary(domain, nb_pts)
            and_arr[out_rows, k] = d_b
            anh_arr[out_rows, k] = H_b
            crossing = d_b <= 0.0
            if crossing.any():
                rows = out_rows[crossing]
                t = _axis_crossing(domain, irr_pts[rows], k, sign, h)
                arm_arr[rows, k] = np.maximum(t, 1e-3 * h)
                anc_arr[rows, k] = 0.0
            band = ~crossing
            if band.any():
                rows = out_rows[band]
                anc_arr[rows, k] = expansion_value(d_b[band], H_b[band], n)

    table = StencilTable(n, h, dims, strides, int_flat, irr_of, irr_rows,
                         arm_m, arm_p, idx_m, idx_p, anc_m, anc_p,
                         anc_d_m, anc_d_p, anc_H_m, anc_H_p)

    values = np.zeros(dims)
    fieldobj = GridField(domain, n, h, np.asarray(origin, dtype=float), dims,
                         values, mask, dist, table)
    return fieldobj


def fill_cut_values(field: GridField) -> None:
    """Write the boundary-expansion values onto the cut ring of the field."""
    cut_flat = np.flatnonzero((field.mask == MASK_CUT).ravel())
    if cut_flat.size == 0:
        return
    pts = field.node_points(cut_flat)
    d, _, _, H = geometry.nearest_boundary(field.domain, pts)
    field.values.ravel()[cut_flat] = expansion_value(d, H, field.n)


# -- serialization -------------------------------------------------------------


def field_text(field: GridField) -> str:
    """Plain-text node dump: header `n h dims origin`, then one non-exterior
    node per line `i j k mask v` (index tuple, mask code, value)."""
    lines = [
        " ".join(["%d" % field.n, "%.17g" % field.h,
                  " ".join(str(d) for d in field.dims),
                  " ".join("%.17g" % x for x in field.origin)])
    ]
    flat = np.flatnonzero((field.mask != MASK_EXTERIOR).ravel())
    ijk = np.stack(np.unravel_index(flat, field.dims), axis=-1)
    vals = field.values.ravel()[flat]
    msk = field.mask.ravel()[flat]
    for row, mk, v in zip(ijk, msk, vals):
        lines.append(" ".join(str(i) for i in row) + f" {mk} {v:.17g}")
    return "\n".join(lines) + "\n"


def parse_field_text(text: str):
    """Inverse of field_text; returns (n, h, dims, origin, nodes) with nodes
    as an array of records (index tuple, mask, value)."""
    lines = text.strip().split("\n")
    head = lines[0].split()
    n = int(head[0])
    h = float(head[1])
    dims = tuple(int(x) for x in head[2:2 + n])
    origin = np.array([float(x) for x in head[2 + n:2 + 2 * n]])
    idx = np.empty((len(lines) - 1, n), dtype=np.int64)
    msk = np.empty(len(lines) - 1, dtype=np.int8)
    val = np.empty(len(lines) - 1)
    for j, ln in enumerate(lines[1:]):
        parts = ln.split()
        idx[j] = [int(x) for x in parts[:n]]
        msk[j] = int(parts[n])
        val[j] = float(parts[n + 1])
    return n, h, dims, origin, (idx, msk, val)


def field_csv(field: GridField) -> str:
    """CSV dump of non-exterior nodes: coordinates, mask, value."""
    n = field.n
    header = ",".join(f"x{k}" for k in range(n)) + ",mask,v\n"
    flat = np.flatnonzero((field.mask != MASK_EXTERIOR).ravel())
    pts = field.node_points(flat)
    vals = field.values.ravel()[flat]
    msk = field.mask.ravel()[flat]
    rows = [header]
    for p, mk, v in zip(pts, msk, vals):
        rows.append(",".join(f"{x:.17g}" for x in p) + f",{mk},{v:.17g}\n")
    return "".join(rows)
