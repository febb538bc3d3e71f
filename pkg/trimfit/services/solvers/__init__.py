"""
Pose solvers and the name registry the CLI, benchmark and tool server use.

Every registered entry takes ``(correspondences, cam, config)`` and returns a
SolverResult; the non-robust solvers report all ids as inliers and a single
iteration.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from trimfit.errors import DegenerateGeometryError, InvalidArgumentError
from trimfit.models.correspondence import CorrespondenceSet
from trimfit.models.pose import CameraModel, Pose
from trimfit.models.results import SolverConfig, SolverResult

from .epnp import epnp, reppnp, reppnp_incr
from .p3p import p3p, ransac_p3p
from .upnp import (
    assemble_energy,
    build_upnp_accumulators,
    minimize_quartic,
    robust_upnp,
    robust_upnp_incr,
    translation_from_rotation,
    upnp,
)

logger = logging.getLogger(__name__)

SolverFn = Callable[[CorrespondenceSet, CameraModel, SolverConfig], SolverResult]


@dataclass(frozen=True)
class SolverInfo:
    name: str
    description: str
    fn: SolverFn
    robust: bool


def _all_inliers(pose_fn: Callable[[CorrespondenceSet, CameraModel, SolverConfig], Pose]) -> SolverFn:
    def run(correspondences: CorrespondenceSet, cam: CameraModel, config: SolverConfig) -> SolverResult:
        pose = pose_fn(correspondences, cam, config)
        return SolverResult(pose=pose, inlier_ids=np.arange(len(correspondences), dtype=np.int64), iterations=1)

    return run


SOLVERS: Dict[str, SolverInfo] = {
    info.name: info
    for info in [
        SolverInfo("epnp", "EPnP over all correspondences (non-robust)", _all_inliers(lambda c, cam, _: epnp(c, cam)), False),
        SolverInfo("reppnp", "Trimmed EPnP, full sort every iteration", reppnp, True),
        SolverInfo("reppnp_incr", "Trimmed EPnP, incremental partial sort and journal updates", reppnp_incr, True),
        SolverInfo("upnp", "Optimal object-space PnP over all correspondences (non-robust)", _all_inliers(upnp), False),
        SolverInfo("robust_upnp", "Trimmed UPnP, full sort every iteration", robust_upnp, True),
        SolverInfo("robust_upnp_incr", "Trimmed UPnP, incremental partial sort and journal updates", robust_upnp_incr, True),
        SolverInfo("ransac_p3p", "RANSAC over P3P hypotheses, EPnP refinement", ransac_p3p, True),
    ]
}


def solve(
    name: str,
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """
    Run a registered solver by name.

    Args:
        name: One of SOLVERS
        correspondences: Input correspondences
        cam: Camera model, default 800 px focal length
        config: Solver settings

    Returns:
        SolverResult
    """
    if name not in SOLVERS:
        raise InvalidArgumentError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
    try:
        return SOLVERS[name].fn(correspondences, cam or CameraModel(), config or SolverConfig())
    except DegenerateGeometryError as e:
        logger.error(f"{name}: degenerate input ({len(correspondences)} correspondences): {e}")
        raise


__all__ = [
    "SOLVERS",
    "SolverInfo",
    "assemble_energy",
    "build_upnp_accumulators",
    "epnp",
    "minimize_quartic",
    "p3p",
    "ransac_p3p",
    "reppnp",
    "reppnp_incr",
    "robust_upnp",
    "robust_upnp_incr",
    "solve",
    "translation_from_rotation",
    "upnp",
]
