"""
Synthetic benchmark: scene generation, solver sweeps, aggregation and the
sorting microbenchmark.

Every trial draws from its own PCG64 stream, split off the run seed by trial
index, so a trial reproduces bit for bit regardless of worker count or order.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from trimfit.config.settings import config
from trimfit.errors import InvalidArgumentError, TrimFitError
from trimfit.models.benchmark import NoiseModel, ScenarioConfig, Scene, SweepAxis, SweepRow, TrialRecord
from trimfit.models.correspondence import CorrespondenceSet
from trimfit.models.pose import CameraModel, Pose
from trimfit.models.results import SolverConfig
from trimfit.models.scoring import ScoreArray, TrimBoundary
from trimfit.services.geom import position_error, rotation_error
from trimfit.services.solvers import SOLVERS, solve
from trimfit.services.trimsort import IncrementalSum, quicksort4trim

logger = logging.getLogger(__name__)

# camera-frame volume the points are drawn from, meters
POINT_BOX_LOW = np.array([-2.0, -2.0, 4.0])
POINT_BOX_HIGH = np.array([2.0, 2.0, 8.0])
TRANSLATION_RANGE = 2.0
SORT_VALUE_RANGE = 10.0


def trial_seed_sequence(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(trial,))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent, portable stream for one trial"""
    return np.random.Generator(np.random.PCG64(trial_seed_sequence(seed, trial)))


def solver_seed(seed: int, trial: int) -> int:
    """Seed handed to the solver (RANSAC sampling, minimiser restarts) for one trial"""
    return int(trial_seed_sequence(seed, trial).generate_state(1)[0])


def outlier_count(n: int, outlier_frac: float) -> int:
    # guard against 0.3 * 2000 landing just below 600
    return int(np.floor(outlier_frac * n + 1e-9))


def generate_scene(scenario: ScenarioConfig, cam: Optional[CameraModel] = None, trial: int = 0) -> Scene:
    """
    Random points in front of the camera, noisy bearings, random outliers and a
    random world frame.

    Args:
        scenario: Point count, pixel noise, outlier fraction, noise model, seed
        cam: Camera the noise is applied in
        trial: Trial index selecting the RNG stream

    Returns:
        Scene with correspondences, ground-truth pose and outlier mask
    """
    cam = cam or CameraModel(config.bench.focal, config.bench.principal_point)
    rng = trial_rng(scenario.seed, trial)
    n = scenario.n

    q = rng.standard_normal(4)
    pose_gt = Pose.from_quaternion(q / np.linalg.norm(q), rng.uniform(-TRANSLATION_RANGE, TRANSLATION_RANGE, 3))

    p_cam = rng.uniform(POINT_BOX_LOW, POINT_BOX_HIGH, size=(n, 3))
    if scenario.noise_model == "gaussian":
        unit_noise = rng.standard_normal((n, 2))
    else:
        unit_noise = rng.uniform(-1.0, 1.0, size=(n, 2))
    bearings = cam.back_project(cam.project(p_cam) + scenario.noise * unit_noise)

    outliers = np.zeros(n, dtype=bool)
    count = outlier_count(n, scenario.outlier_frac)
    if count:
        chosen = rng.choice(n, size=count, replace=False)
        random_dirs = rng.standard_normal((count, 3))
        bearings[chosen] = random_dirs / np.linalg.norm(random_dirs, axis=1, keepdims=True)
        outliers[chosen] = True

    # x_cam = R x_world + t  =>  x_world = R^T (x_cam - t), written row-wise
    p_world = (p_cam - pose_gt.t) @ pose_gt.R
    return Scene(
        correspondences=CorrespondenceSet(bearings=bearings, points=p_world),
        pose_gt=pose_gt,
        outlier_mask=outliers,
    )


def aggregate(solver: str, scenario: ScenarioConfig, records: Sequence[TrialRecord], success_threshold: float = None) -> SweepRow:
    """Mean and median errors and mean time over the trial records of one solver"""
    if not records:
        raise InvalidArgumentError(f"no trial records to aggregate for {solver}")
    threshold = config.solver.success_rot_err if success_threshold is None else success_threshold
    rot = np.array([r.rot_err for r in records])
    pos = np.array([r.pos_err for r in records])
    times = np.array([r.time_s for r in records])
    return SweepRow(
        solver=solver,
        n=scenario.n,
        noise_px=scenario.noise,
        outlier_frac=scenario.outlier_frac,
        trials=len(records),
        mean_rot_err=float(np.mean(rot)),
        median_rot_err=float(np.median(rot)),
        mean_pos_err=float(np.mean(pos)),
        median_pos_err=float(np.median(pos)),
        mean_time_s=float(np.mean(times)),
        success_rate=float(np.mean(rot < threshold)),
    )


@dataclass
class SortBenchResult:
    """Per-trial timings of the three sorting conditions and the incremental operation fraction"""
    n: int
    perturb: float
    full_sort_s: np.ndarray
    partial_sort_s: np.ndarray
    incremental_sort_s: np.ndarray
    op_fractions: np.ndarray
    journal_sizes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def trials(self) -> int:
        return int(self.op_fractions.shape[0])

    @property
    def mean_op_fraction(self) -> float:
        return float(np.mean(self.op_fractions))

    def histogram(self, bins: int = 20) -> Dict[str, Dict[str, list]]:
        """Shared-edge time histograms of the three conditions"""
        all_times = np.concatenate([self.full_sort_s, self.partial_sort_s, self.incremental_sort_s])
        edges = np.histogram_bin_edges(all_times, bins=bins)
        return {
            "edges": edges.tolist(),
            "full_sort": np.histogram(self.full_sort_s, bins=edges)[0].tolist(),
            "partial_sort": np.histogram(self.partial_sort_s, bins=edges)[0].tolist(),
            "incremental_sort": np.histogram(self.incremental_sort_s, bins=edges)[0].tolist(),
        }

    def summary(self) -> Dict[str, float]:
        return {
            "n": self.n,
            "perturb": self.perturb,
            "trials": self.trials,
            "mean_full_sort_s": float(np.mean(self.full_sort_s)),
            "mean_partial_sort_s": float(np.mean(self.partial_sort_s)),
            "mean_incremental_sort_s": float(np.mean(self.incremental_sort_s)),
            "mean_op_fraction": self.mean_op_fraction,
        }

    def __str__(self) -> str:
        s = self.summary()
        return (
            f"n={self.n} perturb={self.perturb:g} trials={self.trials} | "
            f"full {s['mean_full_sort_s'] * 1e6:.1f}us, partial {s['mean_partial_sort_s'] * 1e6:.1f}us, "
            f"incremental {s['mean_incremental_sort_s'] * 1e6:.1f}us | op fraction {self.mean_op_fraction:.3f}"
        )


class SyntheticBenchmark:
    """Runs solvers over generated scenes and aggregates the outcome."""

    def __init__(self, cam: Optional[CameraModel] = None, workers: Optional[int] = None, timing: bool = True):
        """
        Args:
            cam: Camera for scene generation and reprojection; defaults from ``config.bench``
            workers: Threads for trials; defaults to ``config.bench.workers``
            timing: Record wall time; when False every time is 0 so output is byte-stable
        """
        self.cam = cam or CameraModel(config.bench.focal, config.bench.principal_point)
        self.workers = config.bench.workers if workers is None else workers
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be at least 1, got {self.workers}")
        self.timing = timing

    def generate_scene(self, scenario: ScenarioConfig, trial: int = 0) -> Scene:
        return generate_scene(scenario, self.cam, trial)

    def run_trial(self, scene: Scene, solver: str, seed: int) -> TrialRecord:
        """Solve one scene with one solver; a failed solve scores as the identity pose"""
        solver_config = SolverConfig(seed=seed)
        start = time.perf_counter()
        try:
            result = solve(solver, scene.correspondences, self.cam, solver_config)
            pose, iterations, converged = result.pose, result.iterations, result.converged
        except TrimFitError as e:
            logger.warning(f"{solver} failed on a generated scene: {e}")
            pose, iterations, converged = Pose.identity(), 0, False
        elapsed = time.perf_counter() - start

        return TrialRecord(
            solver=solver,
            rot_err=rotation_error(pose.R, scene.pose_gt.R),
            pos_err=position_error(pose.t, scene.pose_gt.t),
            time_s=elapsed if self.timing else 0.0,
            iterations=iterations,
            converged=converged,
        )

    def _run_paired(self, scenario: ScenarioConfig, trial: int, solvers: Sequence[str]) -> List[TrialRecord]:
        scene = self.generate_scene(scenario, trial)
        seed = solver_seed(scenario.seed, trial)
        return [self.run_trial(scene, name, seed) for name in solvers]

    def run_trials(self, scenario: ScenarioConfig, solvers: Sequence[str], trials: int) -> Dict[str, List[TrialRecord]]:
        """All solvers on the same ``trials`` scenes, records in trial order"""
        unknown = [name for name in solvers if name not in SOLVERS]
        if unknown:
            raise InvalidArgumentError(f"unknown solver(s): {', '.join(unknown)}")
        if trials < 1:
            raise InvalidArgumentError(f"trials must be at least 1, got {trials}")

        if self.workers == 1:
            per_trial = [self._run_paired(scenario, trial, solvers) for trial in range(trials)]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                per_trial = list(pool.map(lambda trial: self._run_paired(scenario, trial, solvers), range(trials)))

        records: Dict[str, List[TrialRecord]] = {name: [] for name in solvers}
        for trial_records in per_trial:
            for record in trial_records:
                records[record.solver].append(record)
        return records

    def run_sweep(
        self,
        axis: SweepAxis,
        values: Sequence[float],
        trials: int,
        solvers: Sequence[str],
        base: Optional[ScenarioConfig] = None,
    ) -> List[SweepRow]:
        """
        Vary one scenario field and aggregate every solver at every value.

        Returns:
            Rows ordered by sweep value, then by the given solver order
        """
        if axis not in ("n", "noise", "outliers"):
            raise InvalidArgumentError(f"unknown sweep axis {axis!r}")
        base = base or ScenarioConfig()
        rows = []
        for value in values:
            scenario = base.with_axis(axis, value)
            logger.info(f"sweep {axis}={value:g}: {trials} trials, solvers {', '.join(solvers)}")
            records = self.run_trials(scenario, solvers, trials)
            rows.extend(aggregate(name, scenario, records[name]) for name in solvers)
        return rows

    def run_timing_study(
        self,
        ns: Sequence[int],
        trials: int,
        solvers: Sequence[str],
        outlier_fracs: Sequence[float] = (0.1, 0.3),
        noise: float = 3.0,
        seed: int = 0,
        noise_model: NoiseModel = "uniform",
    ) -> List[SweepRow]:
        """Running time against correspondence count at fixed outlier fractions"""
        rows = []
        for frac in outlier_fracs:
            base = ScenarioConfig(n=max(ns), noise=noise, outlier_frac=frac, seed=seed, noise_model=noise_model)
            rows.extend(self.run_sweep("n", ns, trials, solvers, base))
        return rows


def _warm_up() -> None:
    # first call compiles the numba kernels
    array = ScoreArray.from_scores(np.arange(16, dtype=np.float64)[::-1].copy())
    quicksort4trim(array, TrimBoundary.from_percentile(16))


def sort_microbench(n: int = 10000, perturb: float = 1.0, trials: int = 1000, seed: int = 0) -> SortBenchResult:
    """
    Time full sort, partial sort from scratch and incremental partial sort after
    a perturbation, and count incremental summation operations.

    Each trial draws values uniformly from [-10, 10], ranks them, perturbs every
    value by U[-perturb, perturb] and re-ranks the already partitioned array.

    Args:
        n: Array size
        perturb: Half-width of the perturbation interval
        trials: Number of independent arrays
        seed: RNG seed

    Returns:
        SortBenchResult with per-trial times and operation fractions
    """
    if n < 2:
        raise InvalidArgumentError(f"array size must be at least 2, got {n}")
    if perturb < 0:
        raise InvalidArgumentError(f"perturbation must be non-negative, got {perturb}")
    if trials < 1:
        raise InvalidArgumentError(f"trials must be at least 1, got {trials}")

    _warm_up()
    rng = np.random.default_rng(seed)
    boundary = TrimBoundary.from_percentile(n)
    full, partial, incremental = np.empty(trials), np.empty(trials), np.empty(trials)
    fractions = np.empty(trials)
    sizes = np.empty(trials, dtype=np.int64)

    for trial in range(trials):
        values = rng.uniform(-SORT_VALUE_RANGE, SORT_VALUE_RANGE, n)
        perturbed = values + rng.uniform(-perturb, perturb, n)

        start = time.perf_counter()
        np.sort(values)
        full[trial] = time.perf_counter() - start

        array = ScoreArray.from_scores(values)
        start = time.perf_counter()
        quicksort4trim(array, boundary)
        partial[trial] = time.perf_counter() - start

        total = IncrementalSum(values, array.retained_ids(boundary.k))
        array.update_scores(perturbed)
        start = time.perf_counter()
        journal = quicksort4trim(array, boundary)
        incremental[trial] = time.perf_counter() - start

        total.apply(journal)
        sizes[trial] = journal.size
        fractions[trial] = total.operations / boundary.k

    result = SortBenchResult(
        n=n,
        perturb=perturb,
        full_sort_s=full,
        partial_sort_s=partial,
        incremental_sort_s=incremental,
        op_fractions=fractions,
        journal_sizes=sizes,
    )
    logger.info(f"sort microbenchmark: {result}")
    return result
