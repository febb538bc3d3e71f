"""Data models for trimfit"""
from .benchmark import CSV_HEADER, RunSpec, ScenarioConfig, Scene, SweepRow, TrialRecord
from .correspondence import Correspondence, CorrespondenceSet
from .pose import CameraModel, Pose, canonical_quaternion
from .results import ScoreSnapshot, SolverConfig, SolverResult
from .scoring import ScoreArray, ScoredEntry, SwapJournal, TrimBoundary

__all__ = [
    "CSV_HEADER",
    "CameraModel",
    "Correspondence",
    "CorrespondenceSet",
    "Pose",
    "RunSpec",
    "ScenarioConfig",
    "Scene",
    "ScoreArray",
    "ScoreSnapshot",
    "ScoredEntry",
    "SolverConfig",
    "SolverResult",
    "SwapJournal",
    "SweepRow",
    "TrialRecord",
    "TrimBoundary",
    "canonical_quaternion",
]
