"""
Partial incremental sorting around a fixed percentile boundary.

The score array persists across iterations. Each call re-partitions it so that
positions [0, k) hold the k smallest (score, id) keys and reports which ids
crossed the boundary since the previous call.
"""
import logging
from typing import Tuple

import numba
import numpy as np

from trimfit.errors import InvalidArgumentError
from trimfit.models.scoring import ScoreArray, SwapJournal, TrimBoundary

logger = logging.getLogger(__name__)


@numba.njit(cache=True)
def _key_less(score_a, id_a, score_b, id_b):
    # Ties on score are broken by ascending id, which makes keys distinct
    return score_a < score_b or (score_a == score_b and id_a < id_b)


@numba.njit(cache=True)
def _dual_swap(scores, ids, a, b):
    tmp_score = scores[a]
    scores[a] = scores[b]
    scores[b] = tmp_score

    tmp_id = ids[a]
    ids[a] = ids[b]
    ids[b] = tmp_id


@numba.njit(cache=True)
def _order(scores, ids, a, b):
    if _key_less(scores[b], ids[b], scores[a], ids[a]):
        _dual_swap(scores, ids, a, b)
        return 1
    return 0


@numba.njit(cache=True)
def _select(scores, ids, target):
    """Quickselect placing the key of rank ``target`` at position ``target``.

    Only the side that contains ``target`` is processed further; the loop ends
    as soon as a pivot lands exactly on it. Returns the number of swaps.
    """
    lo = 0
    hi = scores.shape[0] - 1
    swaps = 0
    while hi > lo:
        if hi - lo == 1:
            swaps += _order(scores, ids, lo, hi)
            break

        # median of three, which also leaves sentinels at lo and hi
        mid = (lo + hi) // 2
        swaps += _order(scores, ids, lo, mid)
        swaps += _order(scores, ids, lo, hi)
        swaps += _order(scores, ids, mid, hi)
        _dual_swap(scores, ids, mid, hi - 1)
        pivot_score = scores[hi - 1]
        pivot_id = ids[hi - 1]

        i = lo
        j = hi - 1
        while True:
            i += 1
            while _key_less(scores[i], ids[i], pivot_score, pivot_id):
                i += 1
            j -= 1
            while _key_less(pivot_score, pivot_id, scores[j], ids[j]):
                j -= 1
            if i >= j:
                break
            _dual_swap(scores, ids, i, j)
            swaps += 1
        _dual_swap(scores, ids, i, hi - 1)

        if i == target:
            break
        elif i > target:
            hi = i - 1
        else:
            lo = i + 1
    return swaps


@numba.njit(cache=True)
def _partition_with_journal(scores, ids, k):
    n = scores.shape[0]
    was_inside = np.zeros(n, dtype=np.bool_)
    for pos in range(k):
        was_inside[ids[pos]] = True

    swaps = _select(scores, ids, k - 1)

    plus = np.empty(n - k if n - k < k else k, dtype=np.int64)
    minus = np.empty_like(plus)
    n_plus = 0
    n_minus = 0
    for pos in range(k):
        if not was_inside[ids[pos]]:
            plus[n_plus] = ids[pos]
            n_plus += 1
    for pos in range(k, n):
        if was_inside[ids[pos]]:
            minus[n_minus] = ids[pos]
            n_minus += 1
    return plus[:n_plus], minus[:n_minus], swaps


def _check(entries: ScoreArray, boundary: TrimBoundary) -> None:
    if len(entries) == 0:
        raise InvalidArgumentError("cannot partition an empty score array")
    if boundary.n != len(entries):
        raise InvalidArgumentError(f"boundary was built for n={boundary.n}, array has {len(entries)} entries")
    if not 1 <= boundary.k < len(entries):
        raise InvalidArgumentError(f"boundary k={boundary.k} out of range for {len(entries)} entries")


def partition(entries: ScoreArray, boundary: TrimBoundary) -> Tuple[SwapJournal, int]:
    """Partition ``entries`` in place at ``boundary.k``.

    Returns:
        The swap journal and the raw number of swaps the partitioning performed
    """
    _check(entries, boundary)
    if np.isnan(entries.scores).any():
        raise InvalidArgumentError("NaN scores cannot be sorted")
    if not np.isfinite(entries.scores).all():
        raise InvalidArgumentError("scores must be finite")

    plus, minus, swaps = _partition_with_journal(entries.scores, entries.ids, boundary.k)
    journal = SwapJournal(plus=np.sort(plus), minus=np.sort(minus))
    logger.debug(f"partitioned {len(entries)} entries at k={boundary.k}: {journal}, {swaps} swaps")
    return journal, int(swaps)


def quicksort4trim(entries: ScoreArray, boundary: TrimBoundary) -> SwapJournal:
    """
    Re-partition a score array around the percentile boundary.

    Args:
        entries: Persistent score array, modified in place
        boundary: Percentile boundary (k retained samples)

    Returns:
        Journal of ids that entered (plus) and left (minus) positions [0, k)
    """
    journal, _ = partition(entries, boundary)
    return journal


def percentile_score(entries: ScoreArray, boundary: TrimBoundary) -> float:
    """Largest retained score, i.e. the trimming threshold tau.

    The array must already be partitioned at ``boundary.k``; that cannot be
    checked cheaply and is left to the caller.
    """
    _check(entries, boundary)
    return float(entries.scores[boundary.k - 1])


class IncrementalSum:
    """Scalar accumulator: sum of a fixed per-id term over the retained ids.

    The counterpart of the matrix accumulators in ``accum`` for the sorting
    microbenchmark. Counts the term operations it performs so they can be
    compared with naive summation (k operations per refresh).
    """

    def __init__(self, terms: np.ndarray, retained_ids: np.ndarray):
        self.terms = np.asarray(terms, dtype=np.float64)
        self.value = float(self.terms[np.asarray(retained_ids, dtype=np.int64)].sum())
        self.operations = 0

    def apply(self, journal: SwapJournal) -> float:
        if journal.is_empty:
            return self.value
        self.value += float(self.terms[journal.plus].sum()) - float(self.terms[journal.minus].sum())
        self.operations += journal.size
        return self.value
