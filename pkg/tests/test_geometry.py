"""Geometry tests: every expected value is hand-computed in the test body.

Projection oracle (pitch=0):
    camera at (0, 0, h); ground point (x, y, z)
    camera frame: x_c = x,  y_c = h - z,  z_c = y
    u = cx + fx*x_c/z_c,  v = cy + fy*y_c/z_c
"""

import math

import numpy as np
import pytest

from lane3d.errors import (
    BehindCamera,
    DegenerateLane,
    NoGroundIntersection,
    SingularRow,
    Underdetermined,
)
from lane3d.geometry import (
    CameraModel,
    Curve2D,
    Lane3D,
    SampleGrid,
    curve_eval,
    fit_curves,
    interpolate_lane,
    project_ground_to_image,
    resample_at_y,
    sample_curve,
    unproject_to_ground,
)

from conftest import curved_lane, straight_lane


def make_curve(rho=(0.0, 0.0, 0.0, 0.0), bp=0.0, bpp=0.0,
               v_low=0.0, v_up=720.0, form="rational") -> Curve2D:
    return Curve2D(rho=rho, beta_prime=bp, beta_dprime=bpp,
                   v_low=v_low, v_up=v_up, form=form)


class TestCurveEval:
    def test_constant_curve(self):
        c = make_curve(bpp=100.0)
        assert curve_eval(c, 500.0) == 100.0

    def test_identity_line(self):
        c = make_curve(bp=1.0)
        assert curve_eval(c, 123.0) == 123.0

    def test_reciprocal_terms(self):
        # u = 1000/(10 - (-10))^2 + 0 + 50 = 1000/400 + 50 = 52.5
        c = make_curve(rho=(1000.0, -10.0, 0.0, 50.0))
        assert curve_eval(c, 10.0) == pytest.approx(52.5, abs=1e-12)

    def test_poly3_form(self):
        # u = 1 + 2v + 3v^2 + 4v^3 + 5v + 6 at v=2: 1+4+12+32+10+6 = 65
        c = make_curve(rho=(1.0, 2.0, 3.0, 4.0), bp=5.0, bpp=6.0,
                       form="poly3")
        assert curve_eval(c, 2.0) == pytest.approx(65.0, abs=1e-12)

    def test_singular_row(self):
        c = make_curve(rho=(1.0, 100.0, 0.0, 0.0))
        with pytest.raises(SingularRow):
            curve_eval(c, 100.0 + 1e-9)

    def test_vectorized(self):
        c = make_curve(bp=2.0, bpp=1.0)
        v = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(curve_eval(c, v), [1.0, 3.0, 5.0])


class TestSampleCurve:
    def test_constant_curve_valid_in_range(self, camera):
        c = make_curve(bpp=100.0, v_low=0.0, v_up=720.0)
        u, v, m = sample_curve(c, camera, SampleGrid(j_prime=20))
        assert np.all(m == 1)
        assert np.all(u == 100.0)
        # rows uniformly spaced over [0, H): (j + 0.5) * 720/20
        np.testing.assert_allclose(v, (np.arange(20) + 0.5) * 36.0)

    def test_row_outside_bounds_invalid(self, camera):
        c = make_curve(bpp=100.0, v_low=300.0, v_up=700.0)
        u, v, m = sample_curve(c, camera, SampleGrid(j_prime=20))
        outside = (v < 300.0) | (v > 700.0)
        assert np.all(m[outside] == 0)
        assert np.all(u[outside] == -1.0)
        assert np.all(m[~outside] == 1)

    def test_u_out_of_image_invalid(self):
        # u = v with W = 480: rows below 480 valid, rows above invalid.
        cam = CameraModel(fx=1000.0, fy=1000.0, cx=240.0, cy=480.0,
                          height=1.5, pitch=0.0, image_size=(960, 480))
        c = make_curve(bp=1.0, v_low=0.0, v_up=960.0)
        u, v, m = sample_curve(c, cam, SampleGrid(j_prime=960))
        # rows are at 0.5, 1.5, ..., 959.5
        assert m[479] == 1 and u[479] == 479.5
        assert m[480] == 0 and u[480] == -1.0

    def test_validity_reevaluation(self, camera):
        """Every m flag must agree with re-applying the validity rule."""
        rng = np.random.default_rng(7)
        grid = SampleGrid(j_prime=20)
        for _ in range(50):
            c = make_curve(rho=(rng.uniform(-1e4, 1e4), rng.uniform(-400, 200),
                                rng.uniform(-500, 500), 0.0),
                           bp=rng.uniform(-0.5, 0.5), bpp=rng.uniform(0, 960),
                           v_low=rng.uniform(0, 300), v_up=rng.uniform(400, 720))
            u, v, m = sample_curve(c, camera, grid)
            for j in range(grid.j_prime):
                try:
                    uj = curve_eval(c, float(v[j]))
                except SingularRow:
                    assert m[j] == 0
                    continue
                expected = int(c.v_low <= v[j] <= c.v_up and 0.0 <= uj < 960)
                assert m[j] == expected
                if expected:
                    assert u[j] == pytest.approx(uj, abs=1e-12)

    def test_singular_row_yields_invalid_not_error(self, camera):
        grid = SampleGrid(j_prime=20)
        # horizon row exactly on the first sample row (v = 18)
        c = make_curve(rho=(1.0, 18.0, 0.0, 0.0), bpp=100.0)
        u, v, m = sample_curve(c, camera, grid)
        assert m[0] == 0 and u[0] == -1.0


class TestProjection:
    def test_hand_computed_point(self, camera):
        # p = (0, 10, 0): x_c=0, y_c=1.5, z_c=10 -> (480, 360 + 1000*0.15)
        uv = project_ground_to_image(camera, np.array([0.0, 10.0, 0.0]))
        np.testing.assert_allclose(uv, [480.0, 510.0], atol=1e-12)

    def test_principal_point(self, camera):
        # On the optical axis: pitch=0 means (0, d, h) for any depth d.
        uv = project_ground_to_image(camera, np.array([0.0, 25.0, 1.5]))
        np.testing.assert_allclose(uv, [480.0, 360.0], atol=1e-12)

    def test_behind_camera(self, camera):
        with pytest.raises(BehindCamera):
            project_ground_to_image(camera, np.array([0.0, -1.0, 0.0]))

    def test_unproject_hand_computed(self, camera):
        p = unproject_to_ground(camera, 480.0, 360.0 + 1000.0 * 0.15)
        np.testing.assert_allclose(p, [0.0, 10.0, 0.0], atol=1e-9)

    def test_horizon_has_no_ground_intersection(self, camera):
        # pitch=0: rays at or above v = cy never descend to the ground
        with pytest.raises(NoGroundIntersection):
            unproject_to_ground(camera, 480.0, 360.0)

    @pytest.mark.parametrize("pitch", [0.0, 0.05, 0.3])
    def test_round_trip_both_ways(self, pitch):
        cam = CameraModel(fx=1000.0, fy=1100.0, cx=480.0, cy=360.0,
                          height=1.5, pitch=pitch, image_size=(720, 960))
        rng = np.random.default_rng(42)
        pts = np.stack([rng.uniform(-10, 10, 100),
                        rng.uniform(2.0, 100.0, 100),
                        np.zeros(100)], axis=1)
        uv = project_ground_to_image(cam, pts)
        back = unproject_to_ground(cam, uv[:, 0], uv[:, 1])
        assert np.max(np.abs(back - pts)) < 1e-6
        again = project_ground_to_image(cam, back)
        assert np.max(np.abs(again - uv)) < 1e-6


class TestInterpolateLane:
    def test_two_point_straight(self):
        lane = Lane3D(points=np.array([[0.0, 0.0, 0.0], [0.0, 99.0, 0.0]]),
                      visibility=np.ones(2))
        out = interpolate_lane(lane, 100)
        np.testing.assert_allclose(out[:, 1], np.arange(100.0), atol=1e-9)
        assert np.all(out[:, 0] == 0.0) and np.all(out[:, 2] == 0.0)

    def test_identity_on_uniform_lane(self):
        lane = straight_lane(x=1.0, y0=0.0, y1=9.0, n=10)
        out = interpolate_lane(lane, 10)
        np.testing.assert_allclose(out, lane.points, atol=1e-12)

    def test_endpoints_exact_and_on_polyline(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            lane = curved_lane(rng)
            out = interpolate_lane(lane, 100)
            assert np.array_equal(out[0], lane.points[0])
            assert np.array_equal(out[-1], lane.points[-1])
            # never extrapolates: all y values inside the lane's span
            assert out[:, 1].min() >= lane.points[0, 1] - 1e-12
            assert out[:, 1].max() <= lane.points[-1, 1] + 1e-12

    def test_straight_lane_arc_length_exact(self):
        lane = straight_lane(x=-2.0, y0=0.0, y1=80.0, n=17)
        out = interpolate_lane(lane, 100)
        seg = np.diff(out, axis=0)
        length = np.sqrt((seg * seg).sum(axis=1)).sum()
        assert abs(length - 80.0) / 80.0 < 1e-9

    def test_chord_length_never_exceeds_arc_length(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            lane = curved_lane(rng)
            seg = np.diff(lane.points, axis=0)
            arc = np.sqrt((seg * seg).sum(axis=1)).sum()
            out = interpolate_lane(lane, 100)
            seg_o = np.diff(out, axis=0)
            chord = np.sqrt((seg_o * seg_o).sum(axis=1)).sum()
            assert chord <= arc + 1e-12

    def test_invisible_gap_bridged(self):
        vis = np.ones(5)
        vis[2] = 0.0  # drop the middle point entirely
        pts = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 2.0, 0.0],
                        [0.0, 3.0, 0.0], [0.0, 4.0, 0.0]])
        lane = Lane3D(points=pts, visibility=vis)
        out = interpolate_lane(lane, 5)
        # visible polyline is a straight segment x=0, y in [0, 4]
        np.testing.assert_allclose(out[:, 0], 0.0, atol=1e-12)
        np.testing.assert_allclose(out[:, 1], np.arange(5.0), atol=1e-12)

    def test_degenerate_lane(self):
        lane = Lane3D(points=np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
                      visibility=np.array([1.0, 0.0]))
        with pytest.raises(DegenerateLane):
            interpolate_lane(lane, 10)


class TestResampleAtY:
    def test_linear_lane(self):
        lane = straight_lane(x=2.0, y0=0.0, y1=10.0, n=11)
        x, z, vis = resample_at_y(lane, np.array([0.0, 5.5, 10.0, 12.0]))
        np.testing.assert_allclose(x, 2.0)
        np.testing.assert_allclose(z, 0.0)
        np.testing.assert_allclose(vis, [1.0, 1.0, 1.0, 0.0])

    def test_interpolates_between_points(self):
        pts = np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 4.0]])
        lane = Lane3D(points=pts, visibility=np.ones(2))
        x, z, vis = resample_at_y(lane, np.array([1.0]))
        assert x[0] == pytest.approx(1.0) and z[0] == pytest.approx(2.0)
        assert vis[0] == 1.0


class TestLaneValidation:
    def test_y_must_increase(self):
        with pytest.raises(ValueError):
            Lane3D(points=np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
                   visibility=np.ones(2))

    def test_visibility_length(self):
        with pytest.raises(ValueError):
            Lane3D(points=np.array([[0.0, 1.0, 0.0], [0.0, 2.0, 0.0]]),
                   visibility=np.ones(3))

    def test_score_range(self):
        with pytest.raises(ValueError):
            Lane3D(points=np.array([[0.0, 1.0, 0.0], [0.0, 2.0, 0.0]]),
                   visibility=np.ones(2), score=1.5)


class TestFitCurves:
    IMAGE = (720, 960)

    @staticmethod
    def synth_frame(rho, betas, rows):
        """Sample exact curve points for each (beta', beta'') pair."""
        lanes = []
        for bp, bpp in betas:
            den = rows - rho[1]
            u = rho[0] / den**2 + rho[2] / den + rho[3] + bp * rows + bpp
            lanes.append(np.stack([u, rows], axis=1))
        return lanes

    def test_round_trip_recovery(self):
        rho = (1e5, 250.0, 2000.0, 0.0)
        betas = [(0.05, 300.0), (-0.1, 500.0), (0.2, 150.0)]
        rows = np.linspace(320.0, 700.0, 24)
        lanes = self.synth_frame(rho, betas, rows)
        fit = fit_curves(lanes, self.IMAGE)
        assert fit.rms < 1e-6
        for curve, (bp, bpp) in zip(fit.curves, betas):
            assert curve.beta_prime == pytest.approx(bp, abs=1e-6)
            assert curve.beta_dprime == pytest.approx(bpp, abs=1e-6)
            assert curve.v_low == 320.0 and curve.v_up == 700.0

    def test_poly3_round_trip(self):
        rows = np.linspace(100.0, 700.0, 15)
        lanes = []
        for bp, bpp in [(0.1, 50.0), (-0.2, 400.0)]:
            u = 1e-6 * rows**3 - 5e-4 * rows**2 + bp * rows + bpp
            lanes.append(np.stack([u, rows], axis=1))
        fit = fit_curves(lanes, self.IMAGE, form="poly3")
        assert fit.rms < 1e-6
        assert fit.curves[0].beta_prime == pytest.approx(0.1, abs=1e-6)
        assert fit.curves[1].beta_dprime == pytest.approx(400.0, abs=1e-6)

    def test_single_vertical_lane(self):
        rows = np.linspace(300.0, 700.0, 12)
        lane = np.stack([np.full(12, 333.0), rows], axis=1)
        fit = fit_curves([lane], self.IMAGE)
        curve = fit.curves[0]
        assert abs(curve.beta_prime) < 1e-6
        assert curve.beta_dprime == pytest.approx(333.0, abs=1e-4)
        assert fit.rms < 1e-6

    def test_three_point_lane_underdetermined(self):
        lane = np.array([[100.0, 300.0], [110.0, 400.0], [120.0, 500.0]])
        with pytest.raises(Underdetermined):
            fit_curves([lane], self.IMAGE)

    def test_residual_history_non_increasing(self):
        rng = np.random.default_rng(11)
        rows = np.linspace(320.0, 700.0, 20)
        lanes = self.synth_frame((5e4, 260.0, -800.0, 0.0),
                                 [(0.0, 400.0), (0.1, 200.0)], rows)
        for lane in lanes:  # perturb so the fit cannot be exact
            lane[:, 0] += rng.normal(0.0, 2.0, lane.shape[0])
        fit = fit_curves(lanes, self.IMAGE)
        hist = fit.rms_history
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))

    def test_points_outside_image_rejected(self):
        lane = np.array([[1000.0, 300.0], [1000.0, 400.0],
                         [1000.0, 500.0], [1000.0, 600.0]])
        with pytest.raises(ValueError):
            fit_curves([lane], self.IMAGE)
