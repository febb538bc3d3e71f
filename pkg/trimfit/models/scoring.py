"""Score array, swap journal and percentile boundary models"""
import math
from dataclasses import dataclass, field
from typing import Iterator, Set

import numpy as np

from trimfit.errors import InvalidArgumentError


@dataclass(frozen=True)
class ScoredEntry:
    """One element of a score array: a residual magnitude and its sample id"""
    score: float
    id: int

    def __str__(self) -> str:
        return f"#{self.id}: {self.score:.6g}"


@dataclass
class ScoreArray:
    """Persistent array of (score, id) pairs kept as two parallel numpy arrays.

    Positions change as the array gets partitioned; ids stay attached to their
    scores. ``update_scores`` rewrites every score in place by id, which keeps the
    previous ordering as the starting point for the next partial sort.
    """
    scores: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int64)
        if self.scores.ndim != 1 or self.scores.shape != self.ids.shape:
            raise InvalidArgumentError(
                f"scores and ids must be 1-D arrays of equal length, got {self.scores.shape} and {self.ids.shape}"
            )

    @classmethod
    def from_scores(cls, scores) -> "ScoreArray":
        """Build an array whose ids are the positions of ``scores``"""
        scores = np.asarray(scores, dtype=np.float64)
        return cls(scores=scores.copy(), ids=np.arange(scores.shape[0], dtype=np.int64))

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    def __getitem__(self, position: int) -> ScoredEntry:
        return ScoredEntry(score=float(self.scores[position]), id=int(self.ids[position]))

    def __iter__(self) -> Iterator[ScoredEntry]:
        for position in range(len(self)):
            yield self[position]

    def update_scores(self, scores_by_id: np.ndarray) -> None:
        """Replace every score with ``scores_by_id[id]``, positions unchanged"""
        scores_by_id = np.asarray(scores_by_id, dtype=np.float64)
        if scores_by_id.shape != (len(self),):
            raise InvalidArgumentError(f"expected {len(self)} scores, got shape {scores_by_id.shape}")
        self.scores[:] = scores_by_id[self.ids]

    def retained_ids(self, k: int) -> np.ndarray:
        """Ids at positions [0, k), sorted ascending"""
        return np.sort(self.ids[:k])

    def copy(self) -> "ScoreArray":
        return ScoreArray(scores=self.scores.copy(), ids=self.ids.copy())


@dataclass(frozen=True)
class TrimBoundary:
    """Percentile boundary: k retained samples out of n"""
    k: int
    n: int

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise InvalidArgumentError(f"boundary k={self.k} out of range for n={self.n} (need 1 <= k < n)")

    @classmethod
    def from_percentile(cls, n: int, percentile: float = 50.0) -> "TrimBoundary":
        """k = floor(percentile/100 * n)"""
        if not 0.0 < percentile < 100.0:
            raise InvalidArgumentError(f"percentile must lie in (0, 100), got {percentile}")
        return cls(k=int(math.floor(percentile / 100.0 * n)), n=n)

    def __str__(self) -> str:
        return f"{self.k}/{self.n}"


@dataclass(frozen=True)
class SwapJournal:
    """Net crossings of the percentile boundary during one re-sort.

    ``plus`` holds ids that entered the retained side, ``minus`` ids that left it.
    Both are sorted int64 arrays.
    """
    plus: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    minus: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @classmethod
    def between(cls, before: np.ndarray, after: np.ndarray) -> "SwapJournal":
        """Journal turning the id set ``before`` into ``after``"""
        before = np.asarray(before, dtype=np.int64)
        after = np.asarray(after, dtype=np.int64)
        return cls(
            plus=np.setdiff1d(after, before, assume_unique=True),
            minus=np.setdiff1d(before, after, assume_unique=True),
        )

    @property
    def size(self) -> int:
        """Number of term applications the journal implies"""
        return int(self.plus.shape[0] + self.minus.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    @property
    def plus_set(self) -> Set[int]:
        return {int(i) for i in self.plus}

    @property
    def minus_set(self) -> Set[int]:
        return {int(i) for i in self.minus}

    def reversed(self) -> "SwapJournal":
        """The journal that undoes this one"""
        return SwapJournal(plus=self.minus, minus=self.plus)

    def apply_to(self, inlier_ids) -> Set[int]:
        """(inliers - minus) | plus, for shadow copies of an inlier set"""
        return (set(int(i) for i in inlier_ids) - self.minus_set) | self.plus_set

    def __str__(self) -> str:
        return f"SwapJournal(+{self.plus.shape[0]}, -{self.minus.shape[0]})"
