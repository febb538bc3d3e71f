"""
Incremental accumulators.

An accumulator is a sum of per-sample terms over the currently retained ids.
Instead of being rebuilt every iteration it is updated from a SwapJournal,
touching only the ids that crossed the percentile boundary.

Sums are held in 64-bit fixed point. Every term is rounded once to a multiple
of 2**-e, where e is derived from a bound on the term magnitudes so that no
partial sum can overflow. Integer addition is exact and order-free: a value
carried through any sequence of journals is bit-identical to the naive sum
over the same ids.
"""
import logging
from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from trimfit.config.settings import config
from trimfit.errors import InvalidArgumentError
from trimfit.models.scoring import SwapJournal

logger = logging.getLogger(__name__)

TermSource = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

# headroom below the int64 limit for n terms of the declared bound
FIXED_POINT_BITS = 61
MAX_EXPONENT = 1000


def fixed_point_exponent(bound: float, n: int) -> int:
    """
    Largest e with n * bound * 2**e <= 2**61.

    Args:
        bound: Upper bound on the absolute value of any term entry
        n: Number of terms that may be summed

    Returns:
        Binary exponent of the fixed-point scale
    """
    if not np.isfinite(bound) or bound < 0:
        raise InvalidArgumentError(f"term bound must be finite and non-negative, got {bound}")
    if bound == 0.0:
        return 0
    exponent = int(np.floor(FIXED_POINT_BITS - np.log2(bound) - np.log2(max(n, 1))))
    return int(np.clip(exponent, -MAX_EXPONENT, MAX_EXPONENT))


class AccumulatorContract(ABC):
    """Interface every accumulator honours"""

    @abstractmethod
    def add(self, sample_id: int) -> None:
        """Add the term of one sample"""

    @abstractmethod
    def remove(self, sample_id: int) -> None:
        """Remove the term of one sample"""

    @abstractmethod
    def rebuild(self, ids) -> None:
        """Replace the value with the naive sum over ``ids``"""

    @abstractmethod
    def apply_journal(self, journal: SwapJournal) -> "AccumulatorContract":
        """Subtract the minus terms and add the plus terms"""

    @abstractmethod
    def read(self):
        """Current value"""


class SumAccumulator(AccumulatorContract):
    """Matrix-valued sum of per-sample terms, exact in fixed point.

    Terms come either from a precomputed (n, *shape) array, quantised once, or
    from a function mapping an id array to stacked float terms. A function is
    evaluated on every application and must declare ``bound``, the largest
    absolute entry any of its terms can have.
    """

    def __init__(
        self,
        terms: TermSource,
        n: Optional[int] = None,
        shape: Optional[Tuple[int, ...]] = None,
        bound: Optional[float] = None,
        symmetric: bool = False,
        rebuild_every: int = config.solver.rebuild_every,
        name: str = "accumulator",
    ):
        if rebuild_every <= 0:
            raise InvalidArgumentError(f"rebuild_every must be positive, got {rebuild_every}")
        self.name = name

        if callable(terms):
            if n is None or shape is None or bound is None:
                raise InvalidArgumentError(f"{name}: n, shape and bound are required when terms is a function")
            self._term_fn = terms
            self._table = None
            self.n = int(n)
            self.shape = tuple(shape)
            self._set_exponent(fixed_point_exponent(float(bound), self.n))
        else:
            table = np.asarray(terms, dtype=np.float64)
            if table.ndim < 1:
                raise InvalidArgumentError(f"{name}: terms must be an array of per-sample contributions")
            self._term_fn = None
            self.n = int(table.shape[0])
            self.shape = tuple(table.shape[1:])
            self._set_exponent(fixed_point_exponent(float(np.abs(table).max()) if table.size else 0.0, self.n))
            self._table = self._quantize(table)

        self.symmetric = symmetric
        self.rebuild_every = rebuild_every
        self._total = np.zeros(self.shape, dtype=np.int64)
        self.members = np.zeros(self.n, dtype=bool)
        self.applications = 0
        self.evaluations = 0
        self.journals_since_rebuild = 0
        self.rebuilds = 0

    def _set_exponent(self, exponent: int) -> None:
        self.exponent = exponent
        self._scale = float(np.ldexp(1.0, exponent))
        self._unit = float(np.ldexp(1.0, -exponent))
        self._limit = float(np.ldexp(1.0, FIXED_POINT_BITS)) / max(self.n, 1) + 1.0

    def _quantize(self, terms: np.ndarray) -> np.ndarray:
        scaled = np.rint(terms * self._scale)
        if scaled.size and not np.abs(scaled).max() <= self._limit:
            raise InvalidArgumentError(f"{self.name}: a term exceeds the declared bound or is not finite")
        return scaled.astype(np.int64)

    def _validate_ids(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n):
            bad = ids[(ids < 0) | (ids >= self.n)]
            raise InvalidArgumentError(f"{self.name}: no term for id(s) {bad[:5].tolist()} (n={self.n})")
        return ids

    def _fixed_terms(self, ids: np.ndarray) -> np.ndarray:
        self.evaluations += int(ids.size)
        if self._table is not None:
            return self._table[ids]
        computed = np.asarray(self._term_fn(ids), dtype=np.float64)
        if computed.shape != (ids.size, *self.shape):
            raise InvalidArgumentError(
                f"{self.name}: term function returned {computed.shape}, expected {(ids.size, *self.shape)}"
            )
        return self._quantize(computed)

    def _fixed_sum(self, ids: np.ndarray) -> np.ndarray:
        if not ids.size:
            return np.zeros(self.shape, dtype=np.int64)
        return self._fixed_terms(ids).sum(axis=0)

    def _to_float(self, total: np.ndarray) -> np.ndarray:
        value = total.astype(np.float64) * self._unit
        if self.symmetric:
            value = 0.5 * (value + value.T)
        return value

    def add(self, sample_id: int) -> None:
        ids = self._validate_ids([sample_id])
        if self.members[ids[0]]:
            raise InvalidArgumentError(f"{self.name}: id {sample_id} is already accumulated")
        self._total += self._fixed_terms(ids)[0]
        self.members[ids[0]] = True
        self.applications += 1

    def remove(self, sample_id: int) -> None:
        ids = self._validate_ids([sample_id])
        if not self.members[ids[0]]:
            raise InvalidArgumentError(f"{self.name}: id {sample_id} is not accumulated")
        self._total -= self._fixed_terms(ids)[0]
        self.members[ids[0]] = False
        self.applications += 1

    def apply_journal(self, journal: SwapJournal) -> "SumAccumulator":
        if journal.is_empty:
            return self
        plus = self._validate_ids(journal.plus)
        minus = self._validate_ids(journal.minus)
        if self.members[plus].any():
            raise InvalidArgumentError(f"{self.name}: journal adds ids that are already accumulated")
        if not self.members[minus].all():
            raise InvalidArgumentError(f"{self.name}: journal removes ids that are not accumulated")

        if minus.size:
            self._total -= self._fixed_sum(minus)
        if plus.size:
            self._total += self._fixed_sum(plus)
        self.members[minus] = False
        self.members[plus] = True
        self.applications += journal.size
        self.journals_since_rebuild += 1

        if self.journals_since_rebuild >= self.rebuild_every:
            journaled = self._total
            self.rebuild(self.member_ids())
            if not np.array_equal(journaled, self._total):
                logger.error(f"{self.name}: journaled sum differs from its rebuild; the term function is not deterministic")
        return self

    def rebuild(self, ids) -> None:
        ids = self._validate_ids(ids)
        members = np.zeros(self.n, dtype=bool)
        members[ids] = True
        if np.count_nonzero(members) != ids.size:
            raise InvalidArgumentError(f"{self.name}: rebuild ids must be unique")
        self._total = self._fixed_sum(ids)
        self.members = members
        self.journals_since_rebuild = 0
        self.rebuilds += 1

    def naive_sum(self, ids) -> np.ndarray:
        """Sum over ``ids`` without touching the accumulator state"""
        return self._to_float(self._fixed_sum(self._validate_ids(ids)))

    def member_ids(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    @property
    def value(self) -> np.ndarray:
        return self._to_float(self._total)

    def read(self) -> np.ndarray:
        value = self._to_float(self._total)
        value.flags.writeable = False
        return value


class NormalAccumulator12(SumAccumulator):
    """The 12x12 normal matrix sum_i D_i^T D_i of the control-point system"""

    def __init__(self, terms: TermSource, n: Optional[int] = None, bound: Optional[float] = None, **kwargs):
        super().__init__(terms, n=n, shape=(12, 12), bound=bound, symmetric=True, name="normal12", **kwargs)
        if self.shape != (12, 12):
            raise InvalidArgumentError(f"normal accumulator terms must be 12x12, got {self.shape}")


class AccumulatorGroup:
    """Several accumulators driven by the same journals"""

    def __init__(self, accumulators: Dict[str, SumAccumulator]):
        sizes = {acc.n for acc in accumulators.values()}
        if len(sizes) != 1:
            raise InvalidArgumentError(f"accumulators disagree on sample count: {sorted(sizes)}")
        self.accumulators = accumulators

    def apply_journal(self, journal: SwapJournal) -> "AccumulatorGroup":
        for acc in self.accumulators.values():
            acc.apply_journal(journal)
        return self

    def rebuild(self, ids) -> None:
        for acc in self.accumulators.values():
            acc.rebuild(ids)

    def read(self) -> Dict[str, np.ndarray]:
        return {name: acc.read() for name, acc in self.accumulators.items()}

    @property
    def applications(self) -> int:
        """Per-sample term applications (journal ids), counted once per id"""
        first = next(iter(self.accumulators.values()))
        return first.applications

    def __getitem__(self, name: str) -> SumAccumulator:
        return self.accumulators[name]


def apply_journal(acc: AccumulatorContract, journal: SwapJournal):
    """Update ``acc`` from ``journal``: minus terms out, plus terms in"""
    return acc.apply_journal(journal)


def rebuild(acc: AccumulatorContract, ids: Sequence[int]):
    """Recompute ``acc`` as the naive sum over ``ids``"""
    acc.rebuild(ids)
    return acc


def relative_frobenius(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b||_F / max(||b||_F, tiny)"""
    denom = max(float(np.linalg.norm(b)), np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / denom)
