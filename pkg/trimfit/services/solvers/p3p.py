"""
Minimal three-point pose and the RANSAC baseline built on it.

The depths of the three points follow from the law of cosines on the three
world-point distances. Eliminating the depth ratios leaves a quartic in one
ratio, built here by polynomial arithmetic and solved with numpy; every real
root is polished by Newton on the distance equations and checked.
"""
import logging
from typing import List, Optional

import numpy as np
from numpy.polynomial import Polynomial

from trimfit.errors import DegenerateGeometryError, InvalidArgumentError, TooFewPointsError
from trimfit.models.correspondence import CorrespondenceSet
from trimfit.models.pose import CameraModel, Pose
from trimfit.models.results import SolverConfig, SolverResult
from trimfit.services.geom import reprojection_errors, umeyama_align
from trimfit.services.solvers.epnp import MIN_POINTS_EPNP, epnp

logger = logging.getLogger(__name__)

MIN_POINTS_RANSAC = 4
MIN_CONSENSUS = 4
VERIFY_TOLERANCE = 1e-9
IMAG_TOLERANCE = 1e-6
POLISH_STEPS = 8


def _distance_residuals(s, cosines, squared):
    s1, s2, s3 = s
    ca, cb, cg = cosines
    a2, b2, c2 = squared
    return np.array([
        s2 * s2 + s3 * s3 - 2 * s2 * s3 * ca - a2,
        s1 * s1 + s3 * s3 - 2 * s1 * s3 * cb - b2,
        s1 * s1 + s2 * s2 - 2 * s1 * s2 * cg - c2,
    ])


def _polish(s, cosines, squared):
    """Newton on the three distance equations"""
    ca, cb, cg = cosines
    for _ in range(POLISH_STEPS):
        s1, s2, s3 = s
        F = _distance_residuals(s, cosines, squared)
        J = 2.0 * np.array([
            [0.0, s2 - s3 * ca, s3 - s2 * ca],
            [s1 - s3 * cb, 0.0, s3 - s1 * cb],
            [s1 - s2 * cg, s2 - s1 * cg, 0.0],
        ])
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        s = s - step
        if np.max(np.abs(step)) <= 1e-15 * max(1.0, np.max(np.abs(s))):
            break
    return s


def _depth_candidates(f: np.ndarray, P: np.ndarray) -> List[np.ndarray]:
    a = np.linalg.norm(P[1] - P[2])
    b = np.linalg.norm(P[0] - P[2])
    c = np.linalg.norm(P[0] - P[1])
    ca, cb, cg = f[1] @ f[2], f[0] @ f[2], f[0] @ f[1]
    a2, b2, c2 = a * a, b * b, c * c

    # unknowns: s1, u = s2 / s1, v = s3 / s1
    v = Polynomial([0.0, 1.0])
    Q = 1.0 + v ** 2 - 2.0 * cb * v
    numerator = b2 * v ** 2 - b2 + (c2 - a2) * Q
    denominator = 2.0 * b2 * (ca * v - cg)
    quartic = b2 * numerator ** 2 - 2.0 * b2 * cg * numerator * denominator + (b2 - c2 * Q) * denominator ** 2

    coef = quartic.coef
    if coef.size == 0 or np.max(np.abs(coef)) <= 1e-300:
        return []
    quartic = quartic.trim(tol=1e-14 * np.max(np.abs(coef)))
    if quartic.degree() < 1:
        return []

    depths = []
    for root in quartic.roots():
        if abs(root.imag) > IMAG_TOLERANCE * max(1.0, abs(root.real)):
            continue
        vr = float(root.real)
        qv, dv = Q(vr), denominator(vr)
        if qv <= 0.0 or abs(dv) <= 1e-12 * b2:
            continue
        s1 = b / np.sqrt(qv)
        u = numerator(vr) / dv
        s = _polish(np.array([s1, u * s1, vr * s1]), (ca, cb, cg), (a2, b2, c2))
        if np.all(np.isfinite(s)) and np.all(s > 0.0):
            depths.append(s)
    return depths


def p3p_arrays(bearings: np.ndarray, points: np.ndarray, tolerance: float = VERIFY_TOLERANCE) -> List[Pose]:
    """
    Up to four poses for three bearing / world-point pairs.

    Args:
        bearings: (3, 3) unit bearings
        points: (3, 3) world points
        tolerance: Largest accepted ||normalize(R p_i + t) - f_i||

    Returns:
        Verified candidate poses; empty for degenerate configurations
    """
    f = np.asarray(bearings, dtype=np.float64)
    P = np.asarray(points, dtype=np.float64)
    scale = max(np.linalg.norm(P[1] - P[0]), np.linalg.norm(P[2] - P[0]))
    if scale <= 0.0 or np.linalg.norm(np.cross(P[1] - P[0], P[2] - P[0])) <= 1e-9 * scale * scale:
        return []

    poses: List[Pose] = []
    for s in _depth_candidates(f, P):
        X = f * s[:, None]
        try:
            rigid, _ = umeyama_align(P, X)
        except DegenerateGeometryError:
            continue
        R = rigid.R
        t = X.mean(axis=0) - R @ P.mean(axis=0)
        Y = P @ R.T + t
        projected = Y / np.linalg.norm(Y, axis=1, keepdims=True)
        if np.max(np.linalg.norm(projected - f, axis=1)) >= tolerance:
            continue
        if any(np.allclose(R, other.R, atol=1e-9) and np.allclose(t, other.t, atol=1e-9) for other in poses):
            continue
        poses.append(Pose(R=R, t=t))
    return poses[:4]


def p3p(correspondences: CorrespondenceSet) -> List[Pose]:
    """All poses consistent with exactly three correspondences"""
    if len(correspondences) < 3:
        raise TooFewPointsError("p3p", 3, len(correspondences))
    if len(correspondences) > 3:
        raise InvalidArgumentError(f"p3p takes exactly 3 correspondences, got {len(correspondences)}")
    return p3p_arrays(correspondences.bearings, correspondences.points)


def ransac_p3p(
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """
    Fixed-iteration RANSAC over P3P hypotheses, refined with EPnP.

    Args:
        correspondences: At least 4 correspondences
        cam: Camera used to measure reprojection error in pixels
        config: ``ransac_iterations``, ``ransac_threshold_px`` and ``seed``

    Returns:
        SolverResult; ``converged`` is False when no hypothesis reached 4 inliers
    """
    n = len(correspondences)
    if n < MIN_POINTS_RANSAC:
        raise TooFewPointsError("ransac_p3p", MIN_POINTS_RANSAC, n)
    cam = cam or CameraModel()
    config = config or SolverConfig()
    rng = np.random.default_rng(config.seed)

    best_pose: Optional[Pose] = None
    best_mask = np.zeros(n, dtype=bool)
    best_count = 0
    for _ in range(config.ransac_iterations):
        sample = rng.choice(n, size=3, replace=False)
        # hypotheses are scored with a looser self-check: noisy triples are still exactly solvable
        for pose in p3p_arrays(correspondences.bearings[sample], correspondences.points[sample], tolerance=1e-6):
            mask = reprojection_errors(pose, correspondences, cam) < config.ransac_threshold_px
            count = int(np.count_nonzero(mask))
            if count > best_count:
                best_pose, best_mask, best_count = pose, mask, count

    inliers = np.flatnonzero(best_mask).astype(np.int64)
    if best_pose is None or best_count < MIN_CONSENSUS:
        logger.warning(f"ransac_p3p: best consensus {best_count} < {MIN_CONSENSUS} after {config.ransac_iterations} iterations")
        return SolverResult(
            pose=best_pose or Pose.identity(),
            inlier_ids=inliers,
            iterations=config.ransac_iterations,
            converged=False,
        )

    pose = best_pose
    if best_count >= MIN_POINTS_EPNP:
        try:
            pose = epnp(correspondences.subset(inliers), cam)
        except DegenerateGeometryError as e:
            logger.debug(f"ransac_p3p: keeping the P3P hypothesis, refinement failed: {e}")

    return SolverResult(pose=pose, inlier_ids=inliers, iterations=config.ransac_iterations, converged=True)
