"""
Control-point solvers: EPnP and the trimmed REPPnP in its full-sort and
incremental forms.
"""
import logging
from typing import Dict, Optional

import numpy as np

from trimfit.errors import DegenerateGeometryError, TooFewPointsError
from trimfit.models.correspondence import CorrespondenceSet
from trimfit.models.pose import CameraModel, Pose
from trimfit.models.results import SolverConfig, SolverResult
from trimfit.services.accum import AccumulatorGroup, NormalAccumulator12
from trimfit.services.geom import (
    ControlPointSystem,
    build_bearing_D_batch,
    build_D_batch,
    control_points,
    umeyama_align,
)
from trimfit.services.solvers.trim import TrimProblem, run_trim_fit

logger = logging.getLogger(__name__)

MIN_POINTS_EPNP = 6
MIN_POINTS_TRIM = 12
# score for correspondences whose bearing cannot enter the linear system
UNUSABLE_SCORE = 1e300


def nullspace(A: np.ndarray) -> np.ndarray:
    """Right singular vector of the smallest singular value"""
    _, _, Vh = np.linalg.svd(A)
    return Vh[-1]


def orient(theta: np.ndarray, system: ControlPointSystem) -> np.ndarray:
    """Fix the sign of a nullspace vector so the mean depth of the points is positive"""
    depths = system.reconstruct(theta.reshape(4, 3))[:, 2]
    return -theta if depths.mean() < 0 else theta


def pose_from_control_points(theta: np.ndarray, system: ControlPointSystem) -> Pose:
    """Align world control points with their (scaled) camera-frame estimate"""
    camera_control = orient(theta, system).reshape(4, 3)
    similarity, scale = umeyama_align(system.control, camera_control)
    return Pose(R=similarity.R, t=similarity.t / scale)


def epnp(correspondences: CorrespondenceSet, cam: Optional[CameraModel] = None) -> Pose:
    """
    Non-robust EPnP: nullspace of sum_i D_i^T D_i over all correspondences.

    Args:
        correspondences: At least 6 correspondences, non-coplanar world points
        cam: Unused; bearings are already calibrated. Accepted for a uniform solver signature

    Returns:
        Pose with positive mean depth
    """
    n = len(correspondences)
    if n < MIN_POINTS_EPNP:
        raise TooFewPointsError("epnp", MIN_POINTS_EPNP, n)

    system = control_points(correspondences.points)
    D, _ = build_D_batch(system.alphas, correspondences.bearings)
    stacked = D.reshape(-1, 12)
    theta = nullspace(stacked.T @ stacked)
    return pose_from_control_points(theta, system)


class ReppnpProblem(TrimProblem):
    """Algebraic trim fitting over the 12-dimensional control-point nullspace.

    Rows are the design matrices scaled by f_z, so a residual is the algebraic
    error of a unit bearing and stays bounded for grazing or random bearings.
    Bearings that do not point forward never enter the system.
    """

    name = "reppnp"

    def __init__(self, correspondences: CorrespondenceSet):
        n = len(correspondences)
        self.system = control_points(correspondences.points)
        self.rows, self.usable = build_bearing_D_batch(self.system.alphas, correspondences.bearings)
        usable = int(np.count_nonzero(self.usable))
        if usable < MIN_POINTS_EPNP:
            raise DegenerateGeometryError(f"reppnp: only {usable} bearings point into the image")
        if usable < n:
            logger.debug(f"reppnp: {n - usable} bearings do not point forward and are never retained")

        # |sum_r D_ri D_rj| <= sum_r max_j D_rj^2 per sample
        bound = float((np.abs(self.rows).max(axis=2) ** 2).sum(axis=1).max())
        group = AccumulatorGroup({"normal": NormalAccumulator12(self.normal_terms, n=n, bound=bound)})
        super().__init__(n, group)

    def normal_terms(self, ids: np.ndarray) -> np.ndarray:
        """D_i^T D_i for each id"""
        D = self.rows[ids]
        return D[:, 0, :, None] * D[:, 0, None, :] + D[:, 1, :, None] * D[:, 1, None, :]

    def initial(self) -> np.ndarray:
        stacked = self.rows.reshape(-1, 12)
        return self.solve({"normal": stacked.T @ stacked}, None)

    def solve(self, values: Dict[str, np.ndarray], previous) -> np.ndarray:
        return orient(nullspace(values["normal"]), self.system)

    def scores(self, theta: np.ndarray) -> np.ndarray:
        residuals = np.linalg.norm((self.rows.reshape(-1, 12) @ theta).reshape(-1, 2), axis=1)
        residuals[~self.usable] = UNUSABLE_SCORE
        return residuals

    def energy(self, theta: np.ndarray, values: Dict[str, np.ndarray]) -> float:
        return float(theta @ values["normal"] @ theta)

    def change(self, new: np.ndarray, old: np.ndarray) -> float:
        return float(min(np.linalg.norm(new - old), np.linalg.norm(new + old)))

    def to_pose(self, theta: np.ndarray) -> Pose:
        return pose_from_control_points(theta, self.system)


def _reppnp(correspondences: CorrespondenceSet, config: Optional[SolverConfig], incremental: bool) -> SolverResult:
    n = len(correspondences)
    if n < MIN_POINTS_TRIM:
        raise TooFewPointsError("reppnp_incr" if incremental else "reppnp", MIN_POINTS_TRIM, n)
    return run_trim_fit(ReppnpProblem(correspondences), config or SolverConfig(), incremental=incremental)


def reppnp(
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """REPPnP with full sorting and naive accumulation in every iteration"""
    return _reppnp(correspondences, config, incremental=False)


def reppnp_incr(
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """REPPnP with quicksort4trim ranking and journal-driven accumulator updates"""
    return _reppnp(correspondences, config, incremental=True)
