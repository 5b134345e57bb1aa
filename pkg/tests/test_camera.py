import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from fishcal.camera import (
    FOCAL_RANGE_MM,
    K1_RANGE,
    CameraParameters,
    DomainError,
    Projection,
    ProjectionModel,
    bearings_from_angles,
    image_to_world,
    incident_angle,
    lift_pixels,
    radial_distance,
    rotation_matrix,
    world_to_image,
)

ETA_MAX_96 = math.radians(96.0)


def bisect_root(f, k1, gamma, hi, iters=200):
    """Independent oracle: bisection on the forward cubic over [0, hi]."""
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f * (mid + k1 * mid**3) < gamma:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cubic_grid():
    for f in np.linspace(*FOCAL_RANGE_MM, 20):
        for k1 in np.linspace(*K1_RANGE, 20):
            model = ProjectionModel.generic(float(f), float(k1))
            lim = model.valid_angle(ETA_MAX_96)
            yield model, lim, np.linspace(0.0, lim, 50)


class TestRadialDistance:
    def test_linear_case(self):
        assert radial_distance(ProjectionModel.generic(10.0, 0.0), 0.5) == pytest.approx(5.0, abs=1e-15)

    @pytest.mark.parametrize("kind", list(Projection))
    def test_axis_ray_maps_to_center(self, kind):
        model = ProjectionModel(kind, 10.5, 0.1 if kind is Projection.GENERIC else 0.0)
        assert radial_distance(model, 0.0) == 0.0

    def test_generic_without_distortion_is_equidistance(self):
        eta = np.linspace(0.0, math.radians(96.0), 1001)
        gen = radial_distance(ProjectionModel.generic(10.5, 0.0), eta)
        eqd = radial_distance(ProjectionModel.equidistance(10.5), eta)
        np.testing.assert_array_equal(gen, eqd)

    @pytest.mark.parametrize("eta", [-1e-6, 2.0])
    def test_domain_errors(self, eta):
        with pytest.raises(DomainError):
            radial_distance(ProjectionModel.generic(10.5, 0.1), eta, ETA_MAX_96)

    def test_negative_k1_limited_to_monotone_branch(self):
        model = ProjectionModel.generic(10.0, -1.0 / 6.0)
        assert model.valid_angle(ETA_MAX_96) == pytest.approx(math.sqrt(2.0))
        with pytest.raises(DomainError):
            radial_distance(model, math.sqrt(2.0) + 1e-6)

    @settings(max_examples=200, deadline=None)
    @given(f=st.floats(*FOCAL_RANGE_MM), k1=st.floats(*K1_RANGE),
           max_deg=st.floats(84.0, 96.0))
    def test_strictly_increasing(self, f, k1, max_deg):
        model = ProjectionModel.generic(f, k1)
        lim = model.valid_angle(math.radians(max_deg))
        # stop just short of a k1 < 0 turning point where the slope reaches zero
        eta = np.linspace(0.0, lim * (1 - 1e-6), 2000)
        assert np.all(np.diff(radial_distance(model, eta)) > 0)


class TestIncidentAngle:
    def test_linear_case(self):
        assert incident_angle(ProjectionModel.generic(10.0, 0.0), 5.0) == pytest.approx(0.5)

    def test_forward_roundtrip_at_strong_distortion(self):
        model = ProjectionModel.generic(10.5, 1.0 / 3.0)
        gamma = radial_distance(model, 0.9)
        assert abs(incident_angle(model, gamma) - 0.9) < 1e-9

    def test_grid_roundtrip(self):
        worst = 0.0
        for model, _, eta in cubic_grid():
            gamma = radial_distance(model, eta, ETA_MAX_96)
            worst = max(worst, np.max(np.abs(incident_angle(model, gamma, ETA_MAX_96) - eta)))
        assert worst < 1e-9

    def test_matches_bisection_off_turning_point(self):
        for model, lim, eta in cubic_grid():
            if lim < ETA_MAX_96:
                # the slope vanishes at a k1 < 0 turning point, which limits any
                # double-precision root there to about sqrt(eps); checked below
                eta = eta[:-1]
            gamma = radial_distance(model, eta, ETA_MAX_96)
            ref = [bisect_root(model.f, model.k1, g, lim) for g in gamma]
            assert np.max(np.abs(incident_angle(model, gamma, ETA_MAX_96) - ref)) < 1e-9

    def test_turning_point(self):
        model = ProjectionModel.generic(10.5, -1.0 / 6.0)
        lim = model.valid_angle(ETA_MAX_96)
        gamma = radial_distance(model, lim)
        assert abs(incident_angle(model, gamma) - lim) < 1e-12
        ref = bisect_root(model.f, model.k1, float(gamma), lim)
        assert abs(incident_angle(model, gamma) - ref) < 1e-7

    def test_tiny_k1_is_stable(self):
        for k1 in (1e-12, -1e-12, 1e-8, -1e-8):
            model = ProjectionModel.generic(10.0, k1)
            gamma = radial_distance(model, 1.2)
            assert abs(incident_angle(model, gamma) - 1.2) < 1e-12

    @pytest.mark.parametrize("kind", [Projection.STEREOGRAPHIC, Projection.EQUIDISTANCE,
                                      Projection.EQUISOLID, Projection.ORTHOGONAL])
    def test_trigonometric_inverses(self, kind):
        model = ProjectionModel(kind, 10.5)
        eta = np.linspace(0.0, math.pi / 2, 101)
        np.testing.assert_allclose(incident_angle(model, radial_distance(model, eta)), eta,
                                   atol=1e-7 if kind is Projection.ORTHOGONAL else 1e-12)

    def test_radius_beyond_circle(self):
        model = ProjectionModel.generic(10.5, 0.1)
        gmax = radial_distance(model, ETA_MAX_96, ETA_MAX_96)
        with pytest.raises(DomainError):
            incident_angle(model, gmax * 1.001, ETA_MAX_96)
        with pytest.raises(DomainError):
            incident_angle(model, -0.1)


class TestRotation:
    def test_identity(self):
        np.testing.assert_array_equal(rotation_matrix(0, 0, 0), np.eye(3))

    def test_tilt_up_brings_world_up_to_axis(self):
        up = np.array([0.0, -1.0, 0.0])
        np.testing.assert_allclose(rotation_matrix(0, 90, 0) @ up, [0, 0, 1], atol=1e-15)

    def test_positive_pan_turns_right(self):
        # the optical axis in world coordinates is the third row of R
        axis = rotation_matrix(90, 0, 0)[2]
        np.testing.assert_allclose(axis, [1, 0, 0], atol=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(pan=st.floats(0, 360), tilt=st.floats(-90, 90), roll=st.floats(-90, 90))
    def test_composition_matches_independent_product(self, pan, tilt, roll):
        # scipy's active intrinsic Y-X-Z sequence, transposed to world-to-camera
        ref = Rotation.from_euler("YXZ", [pan, tilt, roll], degrees=True).as_matrix().T
        np.testing.assert_allclose(rotation_matrix(pan, tilt, roll), ref, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(pan=st.floats(0, 360), tilt=st.floats(-90, 90), roll=st.floats(-90, 90))
    def test_orthonormal(self, pan, tilt, roll):
        r = rotation_matrix(pan, tilt, roll)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(r) - 1.0) < 1e-12


class TestPixelMapping:
    def test_axis_to_principal_point(self):
        cam = CameraParameters(k1=0.2)
        np.testing.assert_allclose(world_to_image(cam, [0, 0, 1]), cam.principal_point_px)

    def test_equidistance_offset(self):
        cam = CameraParameters(focal_mm=10.5, k1=0.0)
        cu, cv = cam.principal_point_px
        uv = world_to_image(cam, bearings_from_angles(0.2, 0.0))
        np.testing.assert_allclose(uv, [cu + 19.6, cv], atol=1e-12)

    def test_beyond_cone_is_outside_marker(self):
        cam = CameraParameters(k1=-1.0 / 6.0, max_incident_deg=96)
        assert np.all(np.isnan(world_to_image(cam, bearings_from_angles(
            cam.valid_incident_rad + 0.01, 0.3))))

    def test_principal_point_lifts_to_axis(self):
        cam = CameraParameters(pan_deg=0)
        np.testing.assert_allclose(image_to_world(cam, cam.principal_point_px), [0, 0, 1])

    def test_tilted_principal_point(self):
        cam = CameraParameters(tilt_deg=30.0)
        t = math.radians(30.0)
        # optical axis rotated by +30 degrees about the horizontal axis, toward world up
        expected = [0.0, -math.sin(t), math.cos(t)]
        np.testing.assert_allclose(image_to_world(cam, cam.principal_point_px), expected,
                                   atol=1e-15)

    def test_outside_circle_raises(self):
        cam = CameraParameters(focal_mm=6.0, k1=-1.0 / 6.0, image_width_px=398)
        with pytest.raises(DomainError):
            image_to_world(cam, [0.0, 0.0])

    def test_clamped_lift(self):
        cam = CameraParameters(focal_mm=6.0, k1=0.0, image_width_px=398)
        rays, inside = lift_pixels(cam, np.array([[0.0, 0.0]]), clamp=True)
        assert not inside[0]
        assert math.acos(rays[0, 2]) == pytest.approx(cam.valid_incident_rad)

    @settings(max_examples=60, deadline=None)
    @given(pan=st.floats(0, 359.9), tilt=st.floats(-90, 90), roll=st.floats(-90, 90),
           f=st.floats(*FOCAL_RANGE_MM), k1=st.floats(*K1_RANGE), max_deg=st.floats(84, 96),
           aspect=st.sampled_from([224, 280, 299, 336, 398]))
    def test_pixel_roundtrip(self, pan, tilt, roll, f, k1, max_deg, aspect):
        cam = CameraParameters(pan, tilt, roll, f, k1, max_deg, image_width_px=aspect)
        u, v = np.meshgrid(np.linspace(0, aspect - 1, 25), np.linspace(0, 223, 21))
        uv = np.stack([u, v], axis=-1).reshape(-1, 2)
        cu, cv = cam.principal_point_px
        radius = cam.image_circle_radius_px
        uv = uv[np.hypot(uv[:, 0] - cu, uv[:, 1] - cv) <= radius]
        a = np.linspace(0, 2 * np.pi, 16)
        rim = np.stack([cu + radius * np.cos(a), cv + radius * np.sin(a)], axis=-1)
        uv = np.concatenate([uv, rim])
        back = world_to_image(cam, image_to_world(cam, uv))
        assert np.all(np.isfinite(back))
        assert np.max(np.abs(back - uv)) < 1e-6


class TestCameraParameters:
    def test_defaults_and_pitch(self):
        cam = CameraParameters()
        assert cam.pixel_pitch_mm == 24.0 / 224
        assert cam.principal_point_px == (111.5, 111.5)

    def test_pan_wraps(self):
        assert CameraParameters(pan_deg=390.0).pan_deg == pytest.approx(30.0)
        assert CameraParameters(pan_deg=-30.0).pan_deg == pytest.approx(330.0)

    @pytest.mark.parametrize("field,value", [("tilt_deg", 91), ("roll_deg", -91),
                                             ("focal_mm", 5.9), ("k1", 0.34),
                                             ("max_incident_deg", 97)])
    def test_range_checks(self, field, value):
        with pytest.raises(ValueError):
            CameraParameters(**{field: value})

    def test_json_roundtrip(self, tmp_path):
        cam = CameraParameters(12.3456789, -4.5, 7.25, 9.87654321, -0.123456789, 85.5,
                               image_width_px=299)
        assert CameraParameters.from_json(cam.to_json()) == cam
        path = tmp_path / "cam.json"
        cam.save(path)
        assert CameraParameters.load(path) == cam
        keys = set(json.loads(path.read_text()))
        assert keys == {"pan_deg", "tilt_deg", "roll_deg", "focal_mm", "k1",
                        "max_incident_deg", "sensor_height_mm", "image_height_px",
                        "image_width_px", "principal_point_px"}

    def test_rejects_off_center_principal_point(self):
        d = CameraParameters().to_dict()
        d["principal_point_px"] = [100.0, 111.5]
        with pytest.raises(ValueError):
            CameraParameters.from_dict(d)

    def test_rotation_is_read_only(self):
        with pytest.raises(ValueError):
            CameraParameters().rotation[0, 0] = 2.0
