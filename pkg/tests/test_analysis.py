import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ylab import analysis as A
from ylab import geometry as g
from ylab import radial

vec3 = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).map(np.array)


class TestStereographic:
    def test_south_pole(self):
        assert np.allclose(A.stereographic_lift(np.zeros(3)), [0, 0, 0, -1])

    def test_equator(self):
        assert np.allclose(A.stereographic_lift(np.array([1.0, 0, 0])),
                           [1, 0, 0, 0])

    @given(x=vec3)
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_and_unit_norm(self, x):
        y = A.stereographic_lift(x)
        assert abs(np.linalg.norm(y) - 1.0) < 1e-12
        assert np.abs(A.stereographic_drop(y) - x).max() <= 1e-12 * max(
            1.0, np.abs(x).max())

    def test_north_pole_rejected(self):
        with pytest.raises(ValueError, match="infinity"):
            A.stereographic_drop(np.array([0.0, 0.0, 0.0, 1.0]))

    def test_cap_image_is_origin_ball(self):
        # boundary circle of the polar cap maps to a sphere about the origin
        i = 3
        theta = 1.0 / i
        phis = np.linspace(0, 2 * np.pi, 50, endpoint=False)
        ring = np.stack([np.sin(theta) * np.cos(phis),
                         np.sin(theta) * np.sin(phis),
                         np.zeros_like(phis),
                         np.full_like(phis, np.cos(theta))], axis=-1)
        dropped = A.stereographic_drop(ring)
        radii = np.linalg.norm(dropped, axis=1)
        assert np.abs(radii - A.cap_complement_radius(i)).max() < 1e-9

    def test_cap_radius_monotone(self):
        rads = [A.cap_complement_radius(i) for i in range(1, 12)]
        assert all(a < b for a, b in zip(rads, rads[1:]))


class TestVerifyConvex:
    def test_ball_passes(self):
        res = A.verify_convex(g.ball(3, 1.0), 1 / 12)
        assert res.passed
        assert res.max_sectional < 0
        assert res.max_ricci_margin < 0
        assert res.max_lap < 0
        assert res.max_grad_excess < 0
        assert res.max_hess_eig <= res.concavity_tol

    def test_annulus_precondition(self):
        with pytest.raises(A.PreconditionError):
            A.verify_convex(g.annulus(3, 0.5, 2.0), 1 / 8)

    def test_json_roundtrip(self):
        import json

        res = A.verify_convex(g.ball(3, 1.0), 1 / 10)
        data = json.loads(res.to_json())
        assert data["passed"] is True


class TestScan:
    def test_rows_and_monotonicity(self):
        scan = A.scan_annulus(3, [0.4, 0.2, 0.1, 0.05], [4.0])
        assert len(scan.rows) == 4
        assert [r.r0 for r in scan.rows] == [0.4, 0.2, 0.1, 0.05]
        mr = [r.max_ricci for r in scan.rows]
        assert all(a < b for a, b in zip(mr, mr[1:]))
        assert scan.any_positive
        assert scan.first_positive().r0 == 0.05

    def test_deterministic_reruns(self):
        a = A.scan_annulus(3, [0.3, 0.15], [3.0]).to_csv()
        b = A.scan_annulus(3, [0.3, 0.15], [3.0]).to_csv()
        assert a == b

    def test_failed_row_marked_and_scan_continues(self, monkeypatch):
        calls = {"k": 0}
        orig = radial.solve_annulus

        def flaky(n, r0, R, tol=radial.TOL_PDE, num_nodes=radial.DEFAULT_NODES):
            calls["k"] += 1
            if r0 == 0.2:
                raise radial.RadialSolveError("synthetic failure")
            return orig(n, r0, R, tol, num_nodes)

        monkeypatch.setattr(radial, "solve_annulus", flaky)
        scan = A.scan_annulus(3, [0.4, 0.2, 0.1], [2.0], workers=1)
        assert [r.failed for r in scan.rows] == [False, True, False]
        assert scan.any_failed
        assert "synthetic failure" in scan.rows[1].error

    def test_invalid_family(self):
        with pytest.raises(A.PreconditionError):
            A.scan_annulus(3, [2.0], [1.0])

    def test_csv_shape(self):
        scan = A.scan_annulus(3, [0.3], [2.0])
        lines = scan.to_csv().splitlines()
        assert lines[0].startswith("r0,R,max_ricci")
        assert len(lines) == 2

    def test_grid_path(self):
        scan = A.scan_annulus(3, [0.5], [1.5], path="grid", h=1 / 8, tol=1e-9)
        assert not scan.any_failed
        rad = A.scan_annulus(3, [0.5], [1.5]).rows[0]
        assert scan.rows[0].max_ricci == pytest.approx(rad.max_ricci, abs=5e-2)


class TestCapCheck:
    def test_small_case_passes(self):
        res = A.cap_complement_check(2, 3, 1 / 8)
        assert res.passed
        assert res.ball_radius == pytest.approx(1 / np.tan(0.25))
        assert res.max_sectional_dev < 5e-3
        assert res.max_ricci_dev < 5e-3

    def test_bad_parameter(self):
        with pytest.raises(A.PreconditionError):
            A.cap_complement_check(0, 3, 1 / 8)


class TestStarSlab:
    def test_family_structure(self):
        fam = A.star_shaped_slab(3)
        outer = [d.shape.outer.radius for d in fam]
        assert all(a < b for a, b in zip(outer, outer[1:]))
        for dom in fam:
            for hole in dom.shape.holes:
                assert abs(hole.center[3]) - hole.radius >= 1.0 - 1e-12
                assert hole.center[:3] == (0.0, 0.0, 0.0)

    def test_sampled_star_shape(self):
        for dom in A.star_shaped_slab(2):
            assert A.is_star_shaped(dom)

    def test_needs_dimension_four(self):
        with pytest.raises(A.PreconditionError):
            A.star_shaped_slab(2, n=3)

    def test_star_test_detects_violation(self):
        # single shadowing hole with nothing behind it
        dom = g.ball_minus_balls(4, g.Ball((0.0,) * 4, 3.0),
                                 [g.Ball((0.0, 0.0, 0.0, 1.2), 0.4)])
        assert not A.is_star_shaped(dom)


class TestStarScanPipeline:
    def test_family_trend_via_cli(self, tmp_path):
        from ylab import cli

        rc = cli.main(["star-scan", "--members", "2", "--h", "0.25",
                       "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "star.csv").read_text().splitlines()
        assert len(lines) == 3
        rows = [ln.split(",") for ln in lines[1:]]
        max_ric = [float(r[3]) for r in rows]
        assert max_ric[0] < max_ric[1]
        assert all(r[7] == "1" for r in rows)    # sampled star test
