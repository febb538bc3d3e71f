import time

import numpy as np
import pytest

from trimfit.errors import InvalidArgumentError
from trimfit.models import ScenarioConfig, SolverConfig, TrialRecord
from trimfit.services.geom import reprojection_errors, rotation_error
from trimfit.services.solvers import SOLVERS, solve
from trimfit.services.synthbench import (
    SyntheticBenchmark,
    aggregate,
    generate_scene,
    outlier_count,
    sort_microbench,
)


def test_noise_free_scene_is_exact(make_scene):
    scene = make_scene(n=200)
    X = scene.pose_gt.transform(scene.correspondences.points)
    f = scene.correspondences.bearings
    np.testing.assert_allclose(np.cross(f, X), 0.0, atol=1e-12)
    assert (np.sum(f * X, axis=1) > 0).all()


def test_points_lie_in_the_camera_volume(make_scene):
    scene = make_scene(n=500, noise=3.0, outlier_frac=0.3)
    X = scene.pose_gt.transform(scene.correspondences.points)
    assert (X >= np.array([-2, -2, 4]) - 1e-9).all()
    assert (X <= np.array([2, 2, 8]) + 1e-9).all()


def test_uniform_noise_bound(make_scene, cam):
    scene = make_scene(n=500, noise=3.0)
    errors = reprojection_errors(scene.pose_gt, scene.correspondences, cam)
    assert errors.max() <= 3.0 * np.sqrt(2) + 1e-9
    assert errors.max() > 1.0


def test_gaussian_noise_model(make_scene, cam):
    scene = make_scene(n=2000, noise=1.0, noise_model="gaussian")
    errors = reprojection_errors(scene.pose_gt, scene.correspondences, cam)
    # the norm of 2-D gaussian noise with sigma 1 has mean sqrt(pi/2)
    assert np.mean(errors) == pytest.approx(np.sqrt(np.pi / 2), rel=0.1)


def test_outlier_count(make_scene):
    scene = make_scene(n=2000, noise=3.0, outlier_frac=0.3)
    assert scene.outlier_count == 600
    np.testing.assert_allclose(np.linalg.norm(scene.correspondences.bearings, axis=1), 1.0, atol=1e-12)
    assert outlier_count(2000, 0.3) == 600
    assert outlier_count(13, 0.5) == 6


def test_scene_is_deterministic(cam):
    scenario = ScenarioConfig(n=300, noise=3.0, outlier_frac=0.3, seed=9)
    a = generate_scene(scenario, cam, trial=4)
    b = generate_scene(scenario, cam, trial=4)
    c = generate_scene(scenario, cam, trial=5)

    np.testing.assert_array_equal(a.correspondences.bearings, b.correspondences.bearings)
    np.testing.assert_array_equal(a.correspondences.points, b.correspondences.points)
    np.testing.assert_array_equal(a.pose_gt.R, b.pose_gt.R)
    np.testing.assert_array_equal(a.outlier_mask, b.outlier_mask)
    assert not np.array_equal(a.correspondences.points, c.correspondences.points)


def test_aggregate_statistics():
    records = [TrialRecord("x", rot, rot * 10, 0.5, 3, True) for rot in (0.01, 0.02, 0.3, 0.04)]
    row = aggregate("x", ScenarioConfig(n=100), records)

    assert row.trials == 4
    assert row.mean_rot_err == np.mean([0.01, 0.02, 0.3, 0.04])
    assert row.median_rot_err == np.median([0.01, 0.02, 0.3, 0.04])
    assert row.mean_pos_err == pytest.approx(np.mean([0.1, 0.2, 3.0, 0.4]), rel=1e-12)
    assert row.mean_time_s == 0.5
    assert row.success_rate == 0.75
    with pytest.raises(InvalidArgumentError):
        aggregate("x", ScenarioConfig(n=100), [])


def test_aggregates_agree_with_an_independent_pass():
    bench = SyntheticBenchmark(timing=False)
    scenario = ScenarioConfig(n=100, noise=3.0, outlier_frac=0.2, seed=3)
    records = bench.run_trials(scenario, ["epnp"], 6)["epnp"]
    row = aggregate("epnp", scenario, records)

    rot = sorted(r.rot_err for r in records)
    total = 0.0
    for value in (r.rot_err for r in records):
        total += value
    assert row.median_rot_err == pytest.approx((rot[2] + rot[3]) / 2, rel=1e-15)
    assert row.mean_rot_err == pytest.approx(total / 6, rel=1e-14)


def test_sweep_rows_are_ordered_and_deterministic():
    base = ScenarioConfig(n=100, noise=3.0, outlier_frac=0.2, seed=7)
    solvers = ["epnp", "reppnp_incr"]
    rows = SyntheticBenchmark(timing=False).run_sweep("outliers", [0.1, 0.3], 3, solvers, base)

    assert [(r.outlier_frac, r.solver) for r in rows] == [(0.1, "epnp"), (0.1, "reppnp_incr"), (0.3, "epnp"), (0.3, "reppnp_incr")]
    assert all(r.mean_time_s == 0.0 for r in rows)

    again = SyntheticBenchmark(timing=False, workers=2).run_sweep("outliers", [0.1, 0.3], 3, solvers, base)
    assert [r.csv_row() for r in rows] == [r.csv_row() for r in again]


def test_noise_free_sweep_is_exact_for_every_solver():
    base = ScenarioConfig(n=50, noise=0.0, outlier_frac=0.0, seed=1)
    rows = SyntheticBenchmark(timing=False).run_sweep("n", [30, 60], 2, list(SOLVERS), base)
    assert len(rows) == 2 * len(SOLVERS)
    for row in rows:
        assert row.median_rot_err < 1e-6, row.solver
        assert row.median_pos_err < 1e-6, row.solver


def test_sweep_rejects_bad_input():
    bench = SyntheticBenchmark(timing=False)
    with pytest.raises(InvalidArgumentError):
        bench.run_sweep("focal", [1.0], 1, ["epnp"])
    with pytest.raises(InvalidArgumentError):
        bench.run_trials(ScenarioConfig(n=50), ["nope"], 1)
    with pytest.raises(ValueError):
        bench.run_sweep("outliers", [0.7], 1, ["epnp"])
    with pytest.raises(InvalidArgumentError):
        SyntheticBenchmark(workers=0)


def test_timing_study_rows():
    rows = SyntheticBenchmark(timing=True).run_timing_study([20, 40], 2, ["epnp", "upnp"], outlier_fracs=(0.1,), noise=1.0)
    assert [(r.n, r.solver) for r in rows] == [(20, "epnp"), (20, "upnp"), (40, "epnp"), (40, "upnp")]
    assert all(r.mean_time_s > 0 for r in rows)


def test_sort_microbench_without_perturbation_does_no_work():
    result = sort_microbench(n=2000, perturb=0.0, trials=5)
    assert result.op_fractions.tolist() == [0.0] * 5
    assert result.journal_sizes.tolist() == [0] * 5


def test_sort_microbench_operation_fraction():
    coarse = sort_microbench(n=10000, perturb=1.0, trials=20, seed=1)
    fine = sort_microbench(n=10000, perturb=0.2, trials=20, seed=1)
    assert coarse.mean_op_fraction <= 0.30
    assert fine.mean_op_fraction <= 0.15
    assert fine.mean_op_fraction < coarse.mean_op_fraction

    histogram = coarse.histogram(bins=10)
    assert len(histogram["edges"]) == 11
    assert sum(histogram["incremental_sort"]) == 20
    assert coarse.summary()["trials"] == 20


def test_sort_microbench_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        sort_microbench(n=1)
    with pytest.raises(InvalidArgumentError):
        sort_microbench(perturb=-1.0)
    with pytest.raises(InvalidArgumentError):
        sort_microbench(trials=0)


# ─────────────────────────────────────────────────────────────────────────────
# Desk-scale acceptance runs (pytest -m slow)
# ─────────────────────────────────────────────────────────────────────────────
@pytest.mark.slow
def test_operation_fraction_over_1000_trials():
    assert sort_microbench(n=10000, perturb=1.0, trials=1000).mean_op_fraction <= 0.30
    assert sort_microbench(n=10000, perturb=0.2, trials=1000).mean_op_fraction <= 0.15


@pytest.mark.slow
def test_incremental_partial_sort_beats_full_sort():
    result = sort_microbench(n=10000, perturb=1.0, trials=1000)
    assert np.mean(result.incremental_sort_s) < np.mean(result.full_sort_s)


@pytest.mark.slow
def test_all_solvers_exact_on_clean_scenes(cam):
    for trial in range(100):
        scene = generate_scene(ScenarioConfig(n=50, noise=0.0, outlier_frac=0.0, seed=31), cam, trial)
        for name in SOLVERS:
            result = solve(name, scene.correspondences, cam, SolverConfig(seed=trial))
            assert rotation_error(result.pose.R, scene.pose_gt.R) < 1e-6, (name, trial)


def test_full_and_incremental_results_identical_over_seeds(cam):
    for trial in range(10):
        scene = generate_scene(ScenarioConfig(n=400, noise=3.0, outlier_frac=0.3, seed=43), cam, trial)
        config = SolverConfig(seed=trial)
        for full_name, incr_name in (("reppnp", "reppnp_incr"), ("robust_upnp", "robust_upnp_incr")):
            full = solve(full_name, scene.correspondences, cam, config)
            incr = solve(incr_name, scene.correspondences, cam, config)
            np.testing.assert_array_equal(full.inlier_ids, incr.inlier_ids)
            np.testing.assert_array_equal(full.pose.R, incr.pose.R)
            assert full.journal_sizes == incr.journal_sizes


@pytest.mark.slow
def test_full_and_incremental_results_identical(cam):
    for trial in range(100):
        scene = generate_scene(ScenarioConfig(n=2000, noise=3.0, outlier_frac=0.3, seed=41), cam, trial)
        config = SolverConfig(seed=trial)
        for full_name, incr_name in (("reppnp", "reppnp_incr"), ("robust_upnp", "robust_upnp_incr")):
            full = solve(full_name, scene.correspondences, cam, config)
            incr = solve(incr_name, scene.correspondences, cam, config)
            np.testing.assert_array_equal(full.inlier_ids, incr.inlier_ids)
            assert rotation_error(full.pose.R, incr.pose.R) < 1e-9
            assert full.journal_sizes == incr.journal_sizes


@pytest.mark.slow
def test_incremental_variants_are_faster(cam):
    totals = {name: 0.0 for name in ("reppnp", "reppnp_incr", "robust_upnp", "robust_upnp_incr")}
    warm = generate_scene(ScenarioConfig(n=100, seed=50), cam)
    for name in totals:
        solve(name, warm.correspondences, cam, SolverConfig())
    for trial in range(200):
        scene = generate_scene(ScenarioConfig(n=2000, noise=3.0, outlier_frac=0.3, seed=51), cam, trial)
        for name in totals:
            start = time.perf_counter()
            solve(name, scene.correspondences, cam, SolverConfig(seed=trial))
            totals[name] += time.perf_counter() - start
    assert totals["reppnp_incr"] <= 0.5 * totals["reppnp"]
    assert totals["robust_upnp_incr"] < totals["robust_upnp"]


@pytest.mark.slow
def test_robustness_ordering():
    bench = SyntheticBenchmark(timing=False)
    base = ScenarioConfig(n=2000, noise=3.0, outlier_frac=0.3, seed=61)
    solvers = ["epnp", "upnp", "reppnp_incr", "robust_upnp_incr"]
    rows = {row.solver: row for row in bench.run_sweep("outliers", [0.3], 100, solvers, base)}

    assert rows["robust_upnp_incr"].mean_rot_err < rows["epnp"].mean_rot_err
    assert rows["robust_upnp_incr"].mean_rot_err < rows["upnp"].mean_rot_err
    ratio = rows["reppnp_incr"].median_rot_err / rows["robust_upnp_incr"].median_rot_err
    assert 0.5 <= ratio <= 2.0
    skew = {name: rows[name].mean_rot_err / rows[name].median_rot_err for name in ("reppnp_incr", "robust_upnp_incr")}
    assert skew["reppnp_incr"] > skew["robust_upnp_incr"]

    broken = {row.solver: row for row in bench.run_sweep("outliers", [0.5], 100, ["reppnp_incr", "robust_upnp_incr"], base)}
    assert broken["reppnp_incr"].success_rate < 0.5
    assert broken["robust_upnp_incr"].success_rate < 0.5
