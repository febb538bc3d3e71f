"""Benchmark scenario, trial and run models"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from trimfit.models.correspondence import CorrespondenceSet
from trimfit.models.pose import Pose

CSV_HEADER = [
    "solver",
    "n",
    "noise_px",
    "outlier_frac",
    "trials",
    "mean_rot_err",
    "median_rot_err",
    "mean_pos_err",
    "median_pos_err",
    "mean_time_s",
]

SweepAxis = Literal["n", "noise", "outliers"]
NoiseModel = Literal["uniform", "gaussian"]


class ScenarioConfig(BaseModel):
    """One synthetic scene family"""
    n: int = Field(2000, ge=12)
    noise: float = Field(3.0, ge=0.0)
    outlier_frac: float = Field(0.3, ge=0.0, le=0.5)
    seed: int = Field(0, ge=0)
    noise_model: NoiseModel = "uniform"

    def with_axis(self, axis: SweepAxis, value: float) -> "ScenarioConfig":
        """Validated copy with the swept field replaced"""
        if axis == "n":
            update = {"n": int(value)}
        elif axis == "noise":
            update = {"noise": float(value)}
        else:
            update = {"outlier_frac": float(value)}
        return ScenarioConfig(**(self.model_dump() | update))


class RunSpec(BaseModel):
    """Validated command-line request"""
    command: Literal["bench-sort", "bench-pnp", "sweep", "solve"]
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    solvers: List[str] = Field(default_factory=list)
    out: Optional[Path] = None
    seed: int = Field(0, ge=0)

    @field_validator("solvers")
    @classmethod
    def known_solvers(cls, names: List[str]) -> List[str]:
        # Imported lazily: the registry pulls in every solver module
        from trimfit.services.solvers import SOLVERS

        unknown = [name for name in names if name not in SOLVERS]
        if unknown:
            raise ValueError(f"unknown solver(s): {', '.join(unknown)}; choose from {', '.join(SOLVERS)}")
        return names


@dataclass
class Scene:
    """Generated correspondences plus ground truth"""
    correspondences: CorrespondenceSet
    pose_gt: Pose
    outlier_mask: np.ndarray

    @property
    def outlier_count(self) -> int:
        return int(np.count_nonzero(self.outlier_mask))


@dataclass
class TrialRecord:
    """Outcome of one solver on one scene"""
    solver: str
    rot_err: float
    pos_err: float
    time_s: float
    iterations: int
    converged: bool


@dataclass
class SweepRow:
    """Aggregate of the trial records of one solver at one sweep value"""
    solver: str
    n: int
    noise_px: float
    outlier_frac: float
    trials: int
    mean_rot_err: float
    median_rot_err: float
    mean_pos_err: float
    median_pos_err: float
    mean_time_s: float
    success_rate: float = 0.0

    def csv_row(self) -> List[str]:
        """Values in CSV_HEADER order, formatted deterministically"""
        return [
            self.solver,
            str(self.n),
            repr(float(self.noise_px)),
            repr(float(self.outlier_frac)),
            str(self.trials),
            f"{self.mean_rot_err:.12e}",
            f"{self.median_rot_err:.12e}",
            f"{self.mean_pos_err:.12e}",
            f"{self.median_pos_err:.12e}",
            f"{self.mean_time_s:.6e}",
        ]

    def as_dict(self) -> dict:
        return {name: value for name, value in zip(CSV_HEADER, self.csv_row())} | {
            "success_rate": round(self.success_rate, 4)
        }

    def __str__(self) -> str:
        return (
            f"{self.solver:<18} n={self.n:<5} noise={self.noise_px:<4g} out={self.outlier_frac:<5g} "
            f"rot mean/med={self.mean_rot_err:.3e}/{self.median_rot_err:.3e} "
            f"pos mean/med={self.mean_pos_err:.3e}/{self.median_pos_err:.3e} "
            f"t={self.mean_time_s * 1e3:.2f}ms ok={self.success_rate:.0%}"
        )
