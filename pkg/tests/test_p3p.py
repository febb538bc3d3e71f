import numpy as np
import pytest

from trimfit.errors import InvalidArgumentError, TooFewPointsError
from trimfit.models import CorrespondenceSet, SolverConfig
from trimfit.services.geom import position_error, rotation_error
from trimfit.services.solvers import p3p, ransac_p3p


def test_ground_truth_among_candidates(make_scene):
    for trial in range(10):
        scene = make_scene(n=12, trial=trial)
        poses = p3p(scene.correspondences.subset([0, 1, 2]))

        assert 1 <= len(poses) <= 4
        errors = [rotation_error(pose.R, scene.pose_gt.R) + position_error(pose.t, scene.pose_gt.t) for pose in poses]
        assert min(errors) < 1e-6


def test_candidates_reproduce_the_bearings(make_scene):
    scene = make_scene(n=12, seed=2)
    triple = scene.correspondences.subset([3, 7, 9])
    for pose in p3p(triple):
        camera_points = pose.transform(triple.points)
        # positive depth along every bearing
        assert np.all(np.sum(camera_points * triple.bearings, axis=1) > 0)
        projected = camera_points / np.linalg.norm(camera_points, axis=1, keepdims=True)
        assert np.max(np.linalg.norm(projected - triple.bearings, axis=1)) < 1e-9


def test_collinear_points_give_no_pose():
    bearings = np.array([[0.0, 0.0, 1.0], [0.1, 0.0, 1.0], [0.2, 0.0, 1.0]])
    bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
    points = np.array([[0.0, 0.0, 5.0], [1.0, 1.0, 5.0], [2.0, 2.0, 5.0]])
    assert p3p(CorrespondenceSet(bearings=bearings, points=points)) == []


def test_p3p_takes_exactly_three(make_scene):
    scene = make_scene(n=12)
    with pytest.raises(TooFewPointsError):
        p3p(scene.correspondences.subset([0, 1]))
    with pytest.raises(InvalidArgumentError):
        p3p(scene.correspondences.subset([0, 1, 2, 3]))


def test_ransac_exact_on_clean_scene(make_scene, cam):
    scene = make_scene(n=100, seed=3)
    result = ransac_p3p(scene.correspondences, cam, SolverConfig(ransac_iterations=50))

    assert result.converged
    assert result.inlier_count == 100
    assert rotation_error(result.pose.R, scene.pose_gt.R) < 1e-6
    assert position_error(result.pose.t, scene.pose_gt.t) < 1e-6


def test_ransac_with_outliers(make_scene, cam):
    scene = make_scene(n=300, noise=3.0, outlier_frac=0.3, seed=4)
    result = ransac_p3p(scene.correspondences, cam, SolverConfig(seed=1))

    assert result.converged
    assert rotation_error(result.pose.R, scene.pose_gt.R) < 0.05
    assert scene.outlier_mask[result.inlier_ids].mean() < 0.05


def test_ransac_is_deterministic(make_scene, cam):
    scene = make_scene(n=200, noise=3.0, outlier_frac=0.3, seed=5)
    config = SolverConfig(seed=42, ransac_iterations=100)
    a = ransac_p3p(scene.correspondences, cam, config)
    b = ransac_p3p(scene.correspondences, cam, config)

    np.testing.assert_array_equal(a.pose.R, b.pose.R)
    np.testing.assert_array_equal(a.pose.t, b.pose.t)
    np.testing.assert_array_equal(a.inlier_ids, b.inlier_ids)


def test_ransac_without_consensus_is_not_converged(cam):
    rng = np.random.default_rng(6)
    bearings = rng.standard_normal((40, 3))
    bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
    noise_only = CorrespondenceSet(bearings=bearings, points=rng.uniform(-2, 2, (40, 3)))

    result = ransac_p3p(noise_only, cam, SolverConfig(ransac_iterations=30, ransac_threshold_px=1e-3))
    assert not result.converged


def test_ransac_requires_four_points(make_scene):
    scene = make_scene(n=12)
    with pytest.raises(TooFewPointsError):
        ransac_p3p(scene.correspondences.subset([0, 1, 2]))


@pytest.mark.slow
def test_ransac_success_rate_at_thirty_percent_outliers(make_scene, cam):
    successes = 0
    for trial in range(200):
        scene = make_scene(n=2000, noise=3.0, outlier_frac=0.3, seed=21, trial=trial)
        result = ransac_p3p(scene.correspondences, cam, SolverConfig(seed=trial))
        successes += rotation_error(result.pose.R, scene.pose_gt.R) < 0.05
    assert successes >= 190
