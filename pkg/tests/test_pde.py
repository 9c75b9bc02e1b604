import numpy as np
import pytest

from conftest import center_value, exact_ball_values
from ylab import geometry as g
from ylab import grid, pde, radial


class TestSolveBall:
    def test_matches_closed_form(self, ball_field_8):
        fld, report = ball_field_8
        err = np.abs(fld.interior_values - exact_ball_values(fld)).max()
        assert err < 1e-9          # quadratic profile, scheme exact on quadratics
        assert report.converged
        assert report.final_residual <= 1e-10

    def test_positive_interior(self, ball_field_8):
        fld, _ = ball_field_8
        assert fld.interior_values.min() > 0

    def test_cut_ring_carries_expansion(self, ball_field_8):
        fld, _ = ball_field_8
        cut = np.flatnonzero((fld.mask == grid.MASK_CUT).ravel())
        pts = fld.node_points(cut)
        d = 1.0 - np.linalg.norm(pts, axis=1)
        expected = d - d * d / 2.0     # H = 2, n = 3
        assert np.abs(fld.values.ravel()[cut] - expected).max() < 1e-12

    def test_report_contents(self, ball_field_8):
        _, report = ball_field_8
        assert report.iterations >= 1
        assert len(report.damping_history) == report.iterations
        assert report.h == 1 / 8
        assert report.wall_time > 0


class TestResidual:
    def test_exact_profile(self):
        fld = grid.build_grid(g.ball(3, 1.0), 1 / 8)
        fld.values.ravel()[fld.table.interior] = exact_ball_values(fld)
        assert pde.residual(fld) <= 1e-12

    def test_zero_field(self):
        fld = grid.build_grid(g.ball(3, 1.0), 1 / 8)
        assert pde.residual(fld) == pytest.approx(1.5)   # n/2

    def test_oracle_interpolant_refines(self):
        # the radial solution restricted to the lattice has O(h^2) residual
        # on regular interior nodes
        sol = radial.solve_annulus(3, 0.5, 2.0)
        norms = []
        for h in (1 / 8, 1 / 16):
            fld = grid.build_grid(g.annulus(3, 0.5, 2.0), h)
            r = np.linalg.norm(fld.interior_points(), axis=1)
            fld.values.ravel()[fld.table.interior] = sol.interpolate(
                np.clip(r, sol.r[0], sol.r[-1]))
            norms.append(pde.residual(fld, where="regular"))
        assert norms[0] / norms[1] >= 3.0


class TestCrossChecks:
    def test_annulus_vs_radial(self):
        fld, _ = pde.solve_v(g.annulus(3, 0.5, 2.0), 1 / 16)
        sol = radial.solve_annulus(3, 0.5, 2.0)
        r = np.linalg.norm(fld.interior_points(), axis=1)
        ref = sol.interpolate(np.clip(r, sol.r[0], sol.r[-1]))
        assert np.abs(fld.interior_values - ref).max() < 5e-3

    def test_scaling_invariance(self):
        base, _ = pde.solve_v(g.ball(3, 1.0), 1 / 8)
        scaled, _ = pde.solve_v(g.ball(3, 2.0), 1 / 4)
        # lattices scale exactly by 2, so fields correspond node-for-node
        assert base.dims == scaled.dims
        sel = base.mask == grid.MASK_INTERIOR
        assert np.array_equal(sel, scaled.mask == grid.MASK_INTERIOR)
        assert np.abs(scaled.values[sel] - 2.0 * base.values[sel]).max() < 1e-9

    def test_domain_inclusion_monotonicity(self):
        small, _ = pde.solve_v(g.ball(3, 1.0), 1 / 8)
        big, _ = pde.solve_v(g.ball(3, 1.25), 1 / 8)
        sel = np.flatnonzero((small.mask == grid.MASK_INTERIOR).ravel())
        pts = small.node_points(sel)
        ijk_big = np.round((pts - big.origin) / big.h).astype(int)
        flat_big = np.ravel_multi_index(ijk_big.T, big.dims)
        inside_big = big.mask.ravel()[flat_big] == grid.MASK_INTERIOR
        v_small = small.values.ravel()[sel][inside_big]
        v_big = big.values.ravel()[flat_big][inside_big]
        assert np.all(v_small <= v_big + 1e-9)

    def test_convex_distance_bound(self):
        fld, _ = pde.solve_v(g.ellipsoid([1, 1.5, 2]), 1 / 12)
        d = fld.distance.ravel()[fld.table.interior]
        assert np.all(fld.interior_values <= d + 1e-9)

    def test_boundary_slope(self):
        fld, _ = pde.solve_v(g.ellipsoid([1, 1.5, 2]), 1 / 16)
        d = fld.distance.ravel()[fld.table.interior]
        sel = d < 2.5 * fld.h
        slope = float((fld.interior_values[sel] * d[sel]).sum()
                      / (d[sel] * d[sel]).sum())
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_axis_permutation_equivariance(self):
        fld_a, _ = pde.solve_v(g.ellipsoid([1, 1.5, 2]), 1 / 8, tol=1e-11)
        fld_b, _ = pde.solve_v(g.ellipsoid([2, 1, 1.5]), 1 / 8, tol=1e-11)
        va = fld_a.values
        vb = np.transpose(fld_b.values, (1, 2, 0))   # axes map (0,1,2)->(2,0,1)
        assert va.shape == vb.shape
        sel = fld_a.mask == grid.MASK_INTERIOR
        assert np.abs(va[sel] - vb[sel]).max() < 1e-7


class TestUPath:
    def test_ladder_monotone_and_convergent(self):
        dom = g.ball(3, 1.0)
        centers, fields = [], []
        for M in (1e2, 1e3, 1e4):
            uf = pde.solve_u_truncated(dom, 1 / 8, M)
            fields.append(uf)
            centers.append(center_value(pde.u_to_v(uf)))
        assert np.all(fields[0].interior_values
                      <= fields[1].interior_values + 1e-9)
        assert np.all(fields[1].interior_values
                      <= fields[2].interior_values + 1e-9)
        d1, d2 = centers[0] - centers[1], centers[1] - centers[2]
        assert d1 > 0 and d2 > 0
        assert d1 / d2 >= 2.0
        assert centers[-1] == pytest.approx(0.5, abs=0.05)

    def test_overflow_guard(self):
        with pytest.raises(pde.PdeSolveError, match="overflow"):
            pde.solve_u_truncated(g.ball(3, 1.0), 1 / 8, 1e80)

    def test_bad_M(self):
        with pytest.raises(ValueError):
            pde.solve_u_truncated(g.ball(3, 1.0), 1 / 8, -1.0)

    def test_u_positive(self):
        uf = pde.solve_u_truncated(g.ball(3, 1.0), 1 / 8, 100.0)
        assert uf.interior_values.min() > 0


class TestGridPreconditions:
    def test_too_coarse(self):
        with pytest.raises(grid.GridError):
            grid.build_grid(g.ball(3, 1.0), 5.0)

    def test_disconnected_interior(self):
        # a shell thinner than the lattice leaves scattered interior islands
        dom = g.ball_minus_balls(3, g.Ball((0, 0, 0), 1.0),
                                 [g.Ball((0, 0, 0), 0.9)])
        with pytest.raises(grid.GridError, match="disconnected"):
            grid.build_grid(dom, 1 / 8)

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            pde.solve_v(g.ball(3, 1.0), 1 / 8, tol=0.0)


def test_field_text_roundtrip(ball_field_8):
    fld, _ = ball_field_8
    text = grid.field_text(fld)
    n, h, dims, origin, (idx, msk, val) = grid.parse_field_text(text)
    assert n == 3 and h == fld.h and dims == fld.dims
    assert np.allclose(origin, fld.origin)
    flat = np.ravel_multi_index(idx.T, dims)
    assert np.array_equal(msk, fld.mask.ravel()[flat])
    assert np.allclose(val, fld.values.ravel()[flat], atol=0, rtol=0)


def test_field_csv_header(ball_field_8):
    fld, _ = ball_field_8
    lines = grid.field_csv(fld).splitlines()
    assert lines[0] == "x0,x1,x2,mask,v"
