import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from trimfit.errors import DegenerateGeometryError, InvalidArgumentError
from trimfit.models import CameraModel, Correspondence, CorrespondenceSet, Pose
from trimfit.services.geom import (
    build_bearing_D_batch,
    build_D,
    build_D_batch,
    control_points,
    monomials,
    monomials_batch,
    phi,
    quaternion_to_rotation,
    reprojection_error,
    reprojection_errors,
    rotation_error,
    umeyama_align,
)


def random_quaternion(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


def test_control_points_reconstruct_tetrahedron():
    vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    system = control_points(vertices)
    np.testing.assert_allclose(system.control[0], vertices.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(system.reconstruct(), vertices, atol=1e-12)


def test_alphas_sum_to_one(rng):
    points = rng.uniform([-2, -2, 4], [2, 2, 8], size=(100, 3))
    system = control_points(points)
    np.testing.assert_allclose(system.alphas.sum(axis=1), 1.0, atol=1e-9)


def test_control_points_translate_with_points(rng):
    points = rng.uniform(-1, 1, size=(30, 3))
    v = np.array([3.0, -2.0, 7.0])
    a = control_points(points)
    b = control_points(points + v)
    np.testing.assert_allclose(b.control, a.control + v, atol=1e-9)
    np.testing.assert_allclose(b.alphas, a.alphas, atol=1e-9)


def test_control_points_reject_degenerate(rng):
    with pytest.raises(DegenerateGeometryError):
        control_points(np.ones((10, 3)))
    planar = rng.uniform(-1, 1, size=(20, 3))
    planar[:, 2] = 5.0
    with pytest.raises(DegenerateGeometryError):
        control_points(planar)
    with pytest.raises(InvalidArgumentError):
        control_points(rng.uniform(size=(3, 3)))


def test_build_D_on_axis():
    D = build_D(np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    expected = np.zeros((2, 12))
    expected[0, 0] = 1.0
    expected[1, 1] = 1.0
    np.testing.assert_array_equal(D, expected)


def test_build_D_matches_explicit_kronecker(rng):
    for _ in range(20):
        alpha = rng.standard_normal(4)
        f = rng.standard_normal(3)
        f[2] = abs(f[2]) + 0.1
        f /= np.linalg.norm(f)
        u, v = f[0] / f[2], f[1] / f[2]
        expected = np.hstack([a * np.array([[1, 0, -u], [0, 1, -v]]) for a in alpha])
        np.testing.assert_allclose(build_D(alpha, f), expected, atol=1e-15)
        batch, valid = build_D_batch(alpha[None, :], f[None, :])
        assert valid.all()
        np.testing.assert_allclose(batch[0], expected, atol=1e-15)


def test_build_D_rejects_sideways_bearing():
    with pytest.raises(DegenerateGeometryError):
        build_D(np.ones(4) / 4, np.array([1.0, 0.0, 0.0]))
    _, valid = build_D_batch(np.ones((1, 4)) / 4, np.array([[1.0, 0.0, 0.0]]))
    assert not valid[0]


def test_bearing_scaled_rows_match_design_matrices(rng):
    alphas = rng.standard_normal((30, 4))
    bearings = rng.standard_normal((30, 3))
    bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
    bearings[0] = [1.0, 0.0, 0.0]

    scaled, usable = build_bearing_D_batch(alphas, bearings)
    D, _ = build_D_batch(alphas, bearings)
    forward = bearings[:, 2] > 1e-6
    np.testing.assert_array_equal(usable, forward)
    np.testing.assert_allclose(scaled[forward], D[forward] * bearings[forward, 2][:, None, None], atol=1e-12)
    assert not scaled[~forward].any()
    assert np.abs(scaled).max() <= np.abs(alphas).max() + 1e-12


def test_ground_truth_theta_has_zero_algebraic_residual(make_scene):
    scene = make_scene(n=50)
    system = control_points(scene.correspondences.points)
    theta = scene.pose_gt.transform(system.control).reshape(12)
    D, _ = build_D_batch(system.alphas, scene.correspondences.bearings)
    assert np.max(np.linalg.norm(D @ theta, axis=1)) < 1e-9


def test_phi_identity_and_half_turn():
    p = np.array([0.3, -1.2, 4.0])
    np.testing.assert_allclose(phi(p) @ monomials(np.array([1.0, 0.0, 0.0, 0.0])), p, atol=1e-15)
    half_turn_z = np.array([0.0, 0.0, 0.0, 1.0])
    np.testing.assert_allclose(phi(np.array([1.0, 0.0, 0.0])) @ monomials(half_turn_z), [-1.0, 0.0, 0.0], atol=1e-15)


def test_phi_matches_rotation_matrix(rng):
    for _ in range(1000):
        q = random_quaternion(rng)
        p = rng.uniform(-5, 5, 3)
        np.testing.assert_allclose(phi(p) @ monomials(q), quaternion_to_rotation(q) @ p, atol=1e-12)


def test_quaternion_to_rotation_agrees_with_scipy(rng):
    q = random_quaternion(rng)
    expected = Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()
    np.testing.assert_allclose(quaternion_to_rotation(q), expected, atol=1e-12)


def test_monomials(rng):
    np.testing.assert_array_equal(monomials(np.array([1.0, 0.0, 0.0, 0.0])), np.eye(10)[0])
    q = random_quaternion(rng)
    np.testing.assert_array_equal(monomials(-q), monomials(q))
    m = monomials(q)
    assert m[0] + m[4] + m[7] + m[9] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(monomials_batch(q[None, :])[0], m)
    with pytest.raises(InvalidArgumentError):
        monomials(np.array([1.0, 1.0, 0.0, 0.0]))


def test_umeyama_identity(rng):
    source = rng.standard_normal((4, 3))
    pose, scale = umeyama_align(source, source)
    np.testing.assert_allclose(pose.R, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(pose.t, 0.0, atol=1e-12)
    assert scale == pytest.approx(1.0, abs=1e-12)


def test_umeyama_recovers_similarity(rng):
    source = rng.standard_normal((4, 3))
    R = Rotation.from_rotvec([0.4, -0.7, 1.1]).as_matrix()
    t = np.array([0.5, -1.0, 2.0])
    pose, scale = umeyama_align(source, 2.5 * source @ R.T + t)
    np.testing.assert_allclose(pose.R, R, atol=1e-9)
    np.testing.assert_allclose(pose.t, t, atol=1e-9)
    assert scale == pytest.approx(2.5, abs=1e-9)


def test_umeyama_on_negated_target_stays_proper(rng):
    source = rng.standard_normal((4, 3))
    pose, scale = umeyama_align(source, -source)
    assert np.linalg.det(pose.R) == pytest.approx(1.0, abs=1e-9)
    assert scale > 0


def test_umeyama_rejects_collinear_source():
    source = np.outer(np.arange(4.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateGeometryError):
        umeyama_align(source, source)


def test_rotation_error_values():
    R = Rotation.from_rotvec([0.2, 0.1, -0.3]).as_matrix()
    assert rotation_error(R, R) == pytest.approx(0.0, abs=1e-12)
    half_turn = Rotation.from_rotvec([0.0, 0.0, np.pi]).as_matrix()
    assert rotation_error(np.eye(3), half_turn) == pytest.approx(2 * np.sqrt(2), abs=1e-12)
    small = Rotation.from_rotvec([0.01, 0.0, 0.0]).as_matrix()
    assert rotation_error(np.eye(3), small) == pytest.approx(0.014142, abs=1e-6)


def test_reprojection_error_at_ground_truth(make_scene, cam):
    scene = make_scene(n=50)
    errors = reprojection_errors(scene.pose_gt, scene.correspondences, cam)
    assert np.max(errors) < 1e-9


def test_reprojection_error_one_pixel_shift():
    cam = CameraModel()
    p = np.array([0.5, -0.25, 5.0])
    pixel = cam.project(p)[0] + np.array([1.0, 0.0])
    corr = Correspondence(f=cam.back_project(pixel)[0], p=p)
    assert reprojection_error(Pose.identity(), corr, cam) == pytest.approx(1.0, abs=1e-9)


def test_reprojection_error_behind_camera():
    cam = CameraModel()
    corr = Correspondence(f=np.array([0.0, 0.0, 1.0]), p=np.array([0.0, 0.0, -3.0]))
    assert reprojection_error(Pose.identity(), corr, cam) == 1e6
    points = CorrespondenceSet(bearings=np.array([[0.0, 0.0, -1.0]]), points=np.array([[0.0, 0.0, 3.0]]))
    assert reprojection_errors(Pose.identity(), points, cam)[0] == 1e6
