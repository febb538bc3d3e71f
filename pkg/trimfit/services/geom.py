"""
Geometry shared by all solvers: control points, the per-correspondence
design matrices, quaternion monomial algebra, similarity alignment, error
metrics and reprojection.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from trimfit.errors import DegenerateGeometryError, InvalidArgumentError
from trimfit.models.correspondence import Correspondence, CorrespondenceSet
from trimfit.models.pose import CameraModel, Pose

logger = logging.getLogger(__name__)

MIN_BEARING_Z = 1e-6
COPLANAR_RATIO = 1e-6
BEHIND_CAMERA_PX = 1e6

# Degree-2 monomials of q = (q1, q2, q3, q4), q1 the scalar part:
# q1^2, q1q2, q1q3, q1q4, q2^2, q2q3, q2q4, q3^2, q3q4, q4^2
MONOMIAL_PAIRS = np.array(
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)],
    dtype=np.int64,
)


def _monomial_hessians() -> np.ndarray:
    hessians = np.zeros((10, 4, 4))
    for k, (a, b) in enumerate(MONOMIAL_PAIRS):
        hessians[k, a, b] += 1.0
        hessians[k, b, a] += 1.0
    return hessians


# d^2 m_k / dq_a dq_b, constant because every monomial is quadratic
MONOMIAL_HESSIANS = _monomial_hessians()


@dataclass
class ControlPointSystem:
    """Four world-frame control points and the barycentric weights of every point"""
    control: np.ndarray
    alphas: np.ndarray

    def reconstruct(self, control: np.ndarray = None) -> np.ndarray:
        """sum_j alpha_ij c_j, for the world control points or any other frame"""
        return self.alphas @ (self.control if control is None else control)


# ─────────────────────────────────────────────────────────────────────────────
# Control points
# ─────────────────────────────────────────────────────────────────────────────
def control_points(points: np.ndarray) -> ControlPointSystem:
    """
    Centroid plus the three principal axes scaled by the standard deviation along each.

    Args:
        points: (N, 3) world points, N >= 4

    Returns:
        ControlPointSystem whose alphas reproduce every point exactly
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] < 4:
        raise InvalidArgumentError(f"control points need at least 4 points of shape (N, 3), got {points.shape}")

    centroid = points.mean(axis=0)
    centered = points - centroid
    covariance = centered.T @ centered / points.shape[0]
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    sigmas = np.sqrt(np.clip(eigenvalues[order], 0.0, None))
    axes = eigenvectors[:, order]

    scale = max(1.0, float(np.abs(centroid).max()))
    if sigmas[0] <= 1e-12 * scale:
        raise DegenerateGeometryError("all points coincide")
    if sigmas[2] < COPLANAR_RATIO * sigmas[0]:
        raise DegenerateGeometryError(
            f"points are (near-)coplanar: sigma ratio {sigmas[2] / sigmas[0]:.3e}; the planar variant is not supported"
        )

    control = np.vstack([centroid, centroid + (axes * sigmas).T])
    return ControlPointSystem(control=control, alphas=barycentric(points, control))


def barycentric(points: np.ndarray, control: np.ndarray) -> np.ndarray:
    """Solve [c_1..c_4; 1 1 1 1] alpha_i = [p_i; 1] for every point"""
    system = np.vstack([control.T, np.ones(4)])
    rhs = np.vstack([np.asarray(points, dtype=np.float64).T, np.ones(len(points))])
    return np.linalg.solve(system, rhs).T


# ─────────────────────────────────────────────────────────────────────────────
# Design matrices
# ─────────────────────────────────────────────────────────────────────────────
def build_D(alpha_row: np.ndarray, f: np.ndarray) -> np.ndarray:
    """[a_1 a_2 a_3 a_4] kron [[1, 0, -u], [0, 1, -v]] with u = f_x/f_z, v = f_y/f_z"""
    f = np.asarray(f, dtype=np.float64)
    if abs(f[2]) <= MIN_BEARING_Z:
        raise DegenerateGeometryError(f"bearing {f} is at infinity in the image plane (|f_z| <= {MIN_BEARING_Z})")
    u, v = f[0] / f[2], f[1] / f[2]
    return np.kron(np.asarray(alpha_row, dtype=np.float64).reshape(1, 4), np.array([[1.0, 0.0, -u], [0.0, 1.0, -v]]))


def build_D_batch(alphas: np.ndarray, bearings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked (N, 2, 12) design matrices.

    Returns:
        The matrices and a validity mask; rows whose bearing has |f_z| <= 1e-6
        are flagged invalid and left zero
    """
    bearings = np.asarray(bearings, dtype=np.float64)
    valid = np.abs(bearings[:, 2]) > MIN_BEARING_Z
    safe_z = np.where(valid, bearings[:, 2], 1.0)
    u = np.where(valid, bearings[:, 0] / safe_z, 0.0)
    v = np.where(valid, bearings[:, 1] / safe_z, 0.0)

    kernel = np.zeros((bearings.shape[0], 2, 3))
    kernel[:, 0, 0] = 1.0
    kernel[:, 1, 1] = 1.0
    kernel[:, 0, 2] = -u
    kernel[:, 1, 2] = -v
    D = np.einsum("nj,nab->najb", alphas, kernel).reshape(-1, 2, 12)
    D[~valid] = 0.0
    return D, valid


def build_bearing_D_batch(alphas: np.ndarray, bearings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Design matrices multiplied through by f_z: alpha kron [[f_z, 0, -f_x], [0, f_z, -f_y]].

    Every entry is bounded by |alpha|, so grazing bearings cannot dominate a
    sum. Only forward bearings (f_z > 1e-6) are usable; the rest stay zero.
    """
    bearings = np.asarray(bearings, dtype=np.float64)
    usable = bearings[:, 2] > MIN_BEARING_Z

    kernel = np.zeros((bearings.shape[0], 2, 3))
    kernel[:, 0, 0] = bearings[:, 2]
    kernel[:, 1, 1] = bearings[:, 2]
    kernel[:, 0, 2] = -bearings[:, 0]
    kernel[:, 1, 2] = -bearings[:, 1]
    D = np.einsum("nj,nab->najb", alphas, kernel).reshape(-1, 2, 12)
    D[~usable] = 0.0
    return D, usable


# ─────────────────────────────────────────────────────────────────────────────
# Quaternion monomials
# ─────────────────────────────────────────────────────────────────────────────
def monomials(q: np.ndarray) -> np.ndarray:
    """The ten degree-2 monomials of a unit quaternion, in MONOMIAL_PAIRS order"""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    if abs(np.linalg.norm(q) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"quaternion must be unit length, got norm {np.linalg.norm(q):.12g}")
    return q[MONOMIAL_PAIRS[:, 0]] * q[MONOMIAL_PAIRS[:, 1]]


def monomials_batch(Q: np.ndarray) -> np.ndarray:
    """(S, 4) quaternions to (S, 10) monomials, no normalisation check"""
    return Q[:, MONOMIAL_PAIRS[:, 0]] * Q[:, MONOMIAL_PAIRS[:, 1]]


def monomial_jacobian(Q: np.ndarray) -> np.ndarray:
    """(S, 10, 4) derivatives dm_k/dq_c = delta_ac q_b + delta_bc q_a"""
    # m_k = q^T H_k q / 2 with H_k symmetric
    return np.einsum("kcd,sd->skc", MONOMIAL_HESSIANS, Q)


def phi(p: np.ndarray) -> np.ndarray:
    """3x10 matrix with phi(p) @ monomials(q) = R(q) @ p"""
    return phi_batch(np.asarray(p, dtype=np.float64).reshape(1, 3))[0]


def phi_batch(points: np.ndarray) -> np.ndarray:
    """(N, 3) points to (N, 3, 10) phi matrices"""
    px, py, pz = points[:, 0], points[:, 1], points[:, 2]
    zero = np.zeros_like(px)
    rows = [
        [px, zero, 2 * pz, -2 * py, px, 2 * py, 2 * pz, -px, zero, -px],
        [py, -2 * pz, zero, 2 * px, -py, 2 * px, zero, py, 2 * pz, -py],
        [pz, 2 * py, -2 * px, zero, -pz, zero, 2 * px, -pz, 2 * py, pz],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=1)


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a scalar-first unit quaternion"""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


# ─────────────────────────────────────────────────────────────────────────────
# Alignment and error metrics
# ─────────────────────────────────────────────────────────────────────────────
def umeyama_align(source: np.ndarray, target: np.ndarray) -> Tuple[Pose, float]:
    """
    Similarity transform with target ~ s * R @ source + t.

    Args:
        source: (n, 3) points, n >= 3, not collinear
        target: (n, 3) corresponding points

    Returns:
        (Pose(R, t), s) with det R = +1
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3 or source.shape[0] < 3:
        raise InvalidArgumentError(f"alignment needs matching (n>=3, 3) arrays, got {source.shape} and {target.shape}")

    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    centered_s = source - mu_s
    centered_t = target - mu_t

    spread = np.linalg.svd(centered_s, compute_uv=False)
    if spread[0] <= 1e-12 or spread[1] <= 1e-9 * spread[0]:
        raise DegenerateGeometryError("alignment source points are coincident or collinear")

    cov = centered_t.T @ centered_s / source.shape[0]
    U, D, Vh = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vh) < 0:
        S[2, 2] = -1.0

    var_s = np.square(centered_s).sum(axis=1).mean()
    scale = float(np.trace(np.diag(D) @ S) / var_s)
    R = U @ S @ Vh
    t = mu_t - scale * R @ mu_s
    return Pose(R=R, t=t), scale


def rotation_error(R: np.ndarray, R_gt: np.ndarray) -> float:
    """||R^T R_gt - I||_F, which equals 2*sqrt(2)*sin(phi/2) for residual angle phi"""
    return float(np.linalg.norm(np.asarray(R).T @ np.asarray(R_gt) - np.eye(3)))


def position_error(t: np.ndarray, t_gt: np.ndarray) -> float:
    """Euclidean translation error in meters"""
    return float(np.linalg.norm(np.asarray(t) - np.asarray(t_gt)))


def reprojection_errors(pose: Pose, correspondences: CorrespondenceSet, cam: CameraModel) -> np.ndarray:
    """Pixel distance between the projected point and the projected bearing.

    Points with non-positive depth and bearings not pointing forward get the
    1e6 px sentinel, which pushes them out of any percentile.
    """
    X = pose.transform(correspondences.points)
    f = correspondences.bearings
    valid = (X[:, 2] > 1e-12) & (f[:, 2] > MIN_BEARING_Z)

    safe_xz = np.where(valid, X[:, 2], 1.0)[:, None]
    safe_fz = np.where(valid, f[:, 2], 1.0)[:, None]
    delta = X[:, :2] / safe_xz - f[:, :2] / safe_fz
    errors = cam.focal * np.linalg.norm(delta, axis=1)
    errors[~valid] = BEHIND_CAMERA_PX
    return np.minimum(errors, BEHIND_CAMERA_PX)


def reprojection_error(pose: Pose, corr: Correspondence, cam: CameraModel) -> float:
    """Single-correspondence form of reprojection_errors"""
    single = CorrespondenceSet(bearings=corr.f.reshape(1, 3), points=corr.p.reshape(1, 3))
    return float(reprojection_errors(pose, single, cam)[0])
