"""Bearing / world point correspondence models"""
from dataclasses import dataclass
from typing import Iterator, List

import numpy as np

from trimfit.errors import InvalidArgumentError

UNIT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Correspondence:
    """A unit bearing in the camera frame paired with a world point (meters)"""
    f: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.float64).reshape(3)
        p = np.asarray(self.p, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(p))):
            raise InvalidArgumentError("correspondence components must be finite")
        if abs(np.linalg.norm(f) - 1.0) > UNIT_TOLERANCE:
            raise InvalidArgumentError(f"bearing must be unit length, got norm {np.linalg.norm(f):.15g}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "p", p)

    def __str__(self) -> str:
        return f"f={np.array2string(self.f, precision=6)} p={np.array2string(self.p, precision=4)}"


@dataclass
class CorrespondenceSet:
    """N correspondences stored column-wise as (N, 3) bearing and point arrays"""
    bearings: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.bearings = np.ascontiguousarray(self.bearings, dtype=np.float64)
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.bearings.ndim != 2 or self.bearings.shape[1] != 3 or self.bearings.shape != self.points.shape:
            raise InvalidArgumentError(
                f"bearings and points must both be (N, 3), got {self.bearings.shape} and {self.points.shape}"
            )
        if not (np.all(np.isfinite(self.bearings)) and np.all(np.isfinite(self.points))):
            raise InvalidArgumentError("correspondence components must be finite")
        norms = np.linalg.norm(self.bearings, axis=1)
        if norms.size and np.max(np.abs(norms - 1.0)) > UNIT_TOLERANCE:
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise InvalidArgumentError(f"bearing {worst} is not unit length (norm {norms[worst]:.15g})")

    @classmethod
    def from_correspondences(cls, items: List[Correspondence]) -> "CorrespondenceSet":
        if not items:
            return cls(bearings=np.empty((0, 3)), points=np.empty((0, 3)))
        return cls(
            bearings=np.stack([c.f for c in items]),
            points=np.stack([c.p for c in items]),
        )

    def __len__(self) -> int:
        return int(self.bearings.shape[0])

    def __getitem__(self, i: int) -> Correspondence:
        return Correspondence(f=self.bearings[i], p=self.points[i])

    def __iter__(self) -> Iterator[Correspondence]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, ids) -> "CorrespondenceSet":
        ids = np.asarray(ids, dtype=np.int64)
        return CorrespondenceSet(bearings=self.bearings[ids], points=self.points[ids])
