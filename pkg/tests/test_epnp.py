import numpy as np
import pytest

from trimfit.errors import TooFewPointsError
from trimfit.models import CorrespondenceSet, SolverConfig
from trimfit.services.geom import position_error, rotation_error
from trimfit.services.solvers import epnp, reppnp, reppnp_incr
from trimfit.services.solvers.epnp import UNUSABLE_SCORE, ReppnpProblem


def test_epnp_exact_on_noise_free_scene(make_scene):
    scene = make_scene(n=50)
    pose = epnp(scene.correspondences)
    assert rotation_error(pose.R, scene.pose_gt.R) < 1e-6
    assert position_error(pose.t, scene.pose_gt.t) < 1e-6


def test_epnp_requires_six_points(make_scene):
    scene = make_scene(n=12)
    with pytest.raises(TooFewPointsError):
        epnp(scene.correspondences.subset(np.arange(5)))


def test_epnp_minimum_set_is_enough(make_scene):
    scene = make_scene(n=12, seed=3)
    pose = epnp(scene.correspondences.subset(np.arange(6)))
    assert rotation_error(pose.R, scene.pose_gt.R) < 1e-6


def test_reppnp_rejects_outliers_on_noise_free_scene(make_scene):
    for seed in range(10):
        scene = make_scene(n=200, outlier_frac=0.3, seed=1, trial=seed)
        result = reppnp_incr(scene.correspondences)

        assert rotation_error(result.pose.R, scene.pose_gt.R) < 1e-6, seed
        assert not scene.outlier_mask[result.inlier_ids].any(), seed


def test_reppnp_recovers_pose_at_thirty_percent_outliers(make_scene):
    errors = []
    for trial in range(7):
        scene = make_scene(n=1000, noise=3.0, outlier_frac=0.3, seed=12, trial=trial)
        result = reppnp_incr(scene.correspondences)
        errors.append(rotation_error(result.pose.R, scene.pose_gt.R))
    assert np.median(errors) < 0.05


def test_grazing_and_backward_bearings_stay_bounded(make_scene):
    scene = make_scene(n=40, seed=9)
    bearings = scene.correspondences.bearings.copy()
    bearings[0] = [1.0, 0.0, 0.0]
    bearings[1] = [0.6, 0.0, -0.8]
    bearings[2] = [np.sqrt(1.0 - 1e-10), 0.0, 1e-5]
    problem = ReppnpProblem(CorrespondenceSet(bearings=bearings, points=scene.correspondences.points))

    assert np.abs(problem.rows).max() <= np.abs(problem.system.alphas).max() + 1e-12
    assert problem.usable.tolist()[:3] == [False, False, True]
    scores = problem.scores(problem.initial())
    assert scores[0] == UNUSABLE_SCORE
    assert scores[1] == UNUSABLE_SCORE
    assert scores[2] < UNUSABLE_SCORE

    result = reppnp_incr(CorrespondenceSet(bearings=bearings, points=scene.correspondences.points))
    assert 0 not in result.inlier_ids
    assert 1 not in result.inlier_ids


def test_reppnp_without_outliers_agrees_with_epnp(make_scene):
    scene = make_scene(n=500, noise=1.0, seed=2)
    result = reppnp(scene.correspondences)
    reference = epnp(scene.correspondences)

    assert result.inlier_count == 250
    assert rotation_error(result.pose.R, reference.R) < 1e-3


def test_full_and_incremental_variants_agree(make_scene, cam):
    for seed in range(10):
        scene = make_scene(n=500, noise=3.0, outlier_frac=0.3, seed=seed)
        full = reppnp(scene.correspondences, cam, SolverConfig(seed=seed))
        incr = reppnp_incr(scene.correspondences, cam, SolverConfig(seed=seed))

        np.testing.assert_array_equal(full.inlier_ids, incr.inlier_ids)
        assert rotation_error(full.pose.R, incr.pose.R) < 1e-9
        assert full.journal_sizes == incr.journal_sizes


def test_incremental_work_equals_journal_sizes(make_scene):
    scene = make_scene(n=400, noise=3.0, outlier_frac=0.3, seed=4)
    incr = reppnp_incr(scene.correspondences)
    full = reppnp(scene.correspondences)

    assert incr.term_evaluations == incr.journal_sizes
    assert all(count == 200 for count in full.term_evaluations)


def test_converged_run_ends_with_empty_journal(make_scene):
    scene = make_scene(n=100, outlier_frac=0.2, seed=5)
    result = reppnp_incr(scene.correspondences)
    assert result.converged
    assert result.journal_sizes[-1] == 0
    assert result.iterations == len(result.journal_sizes)


def test_trim_keeps_half_of_the_samples(make_scene):
    scene = make_scene(n=101, noise=3.0, outlier_frac=0.1, seed=6)
    assert reppnp_incr(scene.correspondences).inlier_count == 50


def test_score_history_is_partitioned(make_scene):
    scene = make_scene(n=120, noise=3.0, outlier_frac=0.3, seed=7)
    result = reppnp_incr(scene.correspondences, config=SolverConfig(record_scores=True))

    assert len(result.score_history) == result.iterations
    for snapshot in result.score_history:
        assert snapshot.after[:60].max() <= snapshot.after[60:].min()


def test_iteration_limit_reports_nonconvergence(make_scene):
    scene = make_scene(n=300, noise=3.0, outlier_frac=0.4, seed=8)
    result = reppnp(scene.correspondences, config=SolverConfig(max_iterations=1))
    assert result.iterations == 1
    if result.journal_sizes[0] > 0:
        assert not result.converged


def test_trim_solvers_require_twelve_points(make_scene):
    scene = make_scene(n=12)
    with pytest.raises(TooFewPointsError):
        reppnp(scene.correspondences.subset(np.arange(11)))
    with pytest.raises(TooFewPointsError):
        reppnp_incr(scene.correspondences.subset(np.arange(11)))


@pytest.mark.slow
def test_journal_sizes_decay_quickly(make_scene):
    first, third = [], []
    for trial in range(100):
        scene = make_scene(n=2000, noise=3.0, outlier_frac=0.3, seed=11, trial=trial)
        sizes = reppnp_incr(scene.correspondences).journal_sizes + [0, 0, 0]
        first.append(sizes[0])
        third.append(sizes[2])
    assert np.mean(third) < 0.25 * np.mean(first)
