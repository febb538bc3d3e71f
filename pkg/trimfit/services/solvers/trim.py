"""
The trim-fitting loop shared by the robust solvers.

One iteration: re-rank the samples by their residual under the current
parameters, refresh the accumulators over the lowest-residual half, re-solve,
re-score. ``incremental=True`` ranks with quicksort4trim and updates the
accumulators from the swap journal; ``incremental=False`` is the reference
variant with a full sort and naive re-accumulation. Both see exactly the same
inlier sets and the accumulators are exact, so their results are identical.
"""
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np

from trimfit.models.pose import Pose
from trimfit.models.results import ScoreSnapshot, SolverConfig, SolverResult
from trimfit.models.scoring import ScoreArray, SwapJournal, TrimBoundary
from trimfit.services.accum import AccumulatorGroup
from trimfit.services.trimsort import quicksort4trim

logger = logging.getLogger(__name__)


class TrimProblem(ABC):
    """What a robust solver plugs into ``run_trim_fit``"""

    name: str = "trim"

    def __init__(self, n: int, group: AccumulatorGroup):
        self.n = n
        self.group = group

    @abstractmethod
    def initial(self) -> Any:
        """Starting hypothesis from every usable sample with weight 1"""

    @abstractmethod
    def solve(self, values: Dict[str, np.ndarray], previous: Any) -> Any:
        """Parameters minimising the energy held by the accumulator values"""

    @abstractmethod
    def scores(self, params: Any) -> np.ndarray:
        """Per-sample residual magnitudes, indexed by id"""

    @abstractmethod
    def energy(self, params: Any, values: Dict[str, np.ndarray]) -> float:
        """Trimmed energy of ``params`` over the accumulated set"""

    @abstractmethod
    def change(self, new: Any, old: Any) -> float:
        """Size of a parameter update"""

    @abstractmethod
    def to_pose(self, params: Any) -> Pose:
        """Final pose from the converged parameters"""


def _full_sort(array: ScoreArray) -> None:
    order = np.lexsort((array.ids, array.scores))
    array.scores[:] = array.scores[order]
    array.ids[:] = array.ids[order]


def run_trim_fit(problem: TrimProblem, config: SolverConfig, incremental: bool) -> SolverResult:
    """
    Alternate ranking and re-solving until the retained set stops changing.

    Args:
        problem: Residuals, accumulators and inner solver of one robust method
        config: Iteration limit, tolerance, percentile, instrumentation switches
        incremental: Partial incremental sorting + journal updates when True

    Returns:
        SolverResult with the final pose, retained ids and per-iteration journal sizes
    """
    boundary = TrimBoundary.from_percentile(problem.n, config.percentile)
    group = problem.group
    for acc in group.accumulators.values():
        acc.rebuild_every = config.rebuild_every

    params = problem.initial()
    array = ScoreArray.from_scores(problem.scores(params))

    # first floor(N/2) positions, before any ranking
    inliers = array.retained_ids(boundary.k)
    group.rebuild(inliers)

    result_sizes, energies, energies_before, evaluations = [], [], [], []
    history = [] if config.record_scores else None
    converged = False
    iterations = 0

    for iteration in range(1, config.max_iterations + 1):
        iterations = iteration
        before = array.scores.copy() if history is not None else None

        if incremental:
            applied = group.applications
            journal = quicksort4trim(array, boundary)
            group.apply_journal(journal)
            evaluations.append(group.applications - applied)
        else:
            _full_sort(array)
            retained = array.retained_ids(boundary.k)
            journal = SwapJournal.between(inliers, retained)
            group.rebuild(retained)
            evaluations.append(boundary.k)
        inliers = array.retained_ids(boundary.k)

        if history is not None:
            history.append(ScoreSnapshot(before=before, after=array.scores.copy()))

        values = group.read()
        energies_before.append(problem.energy(params, values))
        new_params = problem.solve(values, params)
        energies.append(problem.energy(new_params, values))
        step = problem.change(new_params, params)
        params = new_params
        result_sizes.append(journal.size)

        logger.debug(
            f"{problem.name} it={iteration} journal=+{journal.plus.size}/-{journal.minus.size} "
            f"change={step:.3e} energy={energies[-1]:.6e}"
        )

        if journal.is_empty and step < config.tolerance:
            converged = True
            break
        array.update_scores(problem.scores(params))

    if not converged:
        logger.warning(f"{problem.name}: no convergence after {iterations} iterations, returning best effort")

    return SolverResult(
        pose=problem.to_pose(params),
        inlier_ids=inliers,
        iterations=iterations,
        converged=converged,
        journal_sizes=result_sizes,
        energies=energies,
        energies_before=energies_before,
        term_evaluations=evaluations,
        score_history=history,
    )
