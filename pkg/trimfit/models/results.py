"""Solver configuration and result models"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from trimfit.config.settings import config
from trimfit.errors import InvalidArgumentError
from trimfit.models.pose import Pose


@dataclass
class SolverConfig:
    """Knobs shared by every solver. Defaults come from ``config.solver``."""
    max_iterations: int = config.solver.max_iterations
    tolerance: float = config.solver.tolerance
    restarts: int = config.solver.restarts
    seed: int = 1
    percentile: float = config.solver.percentile
    rebuild_every: int = config.solver.rebuild_every
    gradient_tolerance: float = config.solver.gradient_tolerance
    newton_steps: int = config.solver.newton_steps
    ransac_iterations: int = config.solver.ransac_iterations
    ransac_threshold_px: float = config.solver.ransac_threshold_px
    record_scores: bool = False

    def __post_init__(self):
        positive = {
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "restarts": self.restarts,
            "rebuild_every": self.rebuild_every,
            "gradient_tolerance": self.gradient_tolerance,
            "newton_steps": self.newton_steps,
            "ransac_iterations": self.ransac_iterations,
            "ransac_threshold_px": self.ransac_threshold_px,
        }
        for name, value in positive.items():
            if not value > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {value}")
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {self.seed}")
        if not 0.0 < self.percentile < 100.0:
            raise InvalidArgumentError(f"percentile must lie in (0, 100), got {self.percentile}")


@dataclass
class ScoreSnapshot:
    """Scores of one iteration, by position, before and after re-sorting"""
    before: np.ndarray
    after: np.ndarray


@dataclass
class SolverResult:
    """Pose estimate plus the instrumentation of the run that produced it"""
    pose: Pose
    inlier_ids: np.ndarray
    iterations: int = 0
    converged: bool = True
    journal_sizes: List[int] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    # energy of the previous parameters over the same retained set
    energies_before: List[float] = field(default_factory=list)
    term_evaluations: List[int] = field(default_factory=list)
    score_history: Optional[List[ScoreSnapshot]] = None

    @property
    def inlier_count(self) -> int:
        return int(self.inlier_ids.shape[0])

    def __str__(self) -> str:
        status = "converged" if self.converged else "NOT converged"
        return f"{self.pose} | inliers={self.inlier_count} iterations={self.iterations} ({status})"
