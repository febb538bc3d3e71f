"""Camera pose and camera model"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from trimfit.errors import InvalidArgumentError

ROTATION_TOLERANCE = 1e-9


def canonical_quaternion(q: np.ndarray) -> np.ndarray:
    """Flip sign so that the first nonzero component is positive"""
    q = np.asarray(q, dtype=np.float64)
    nonzero = np.flatnonzero(np.abs(q) > 0.0)
    if nonzero.size and q[nonzero[0]] < 0.0:
        return -q
    return q


@dataclass
class Pose:
    """World-to-camera transform: x_cam = R @ x_world + t"""
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if np.max(np.abs(self.R.T @ self.R - np.eye(3))) > ROTATION_TOLERANCE:
            raise InvalidArgumentError("R is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > ROTATION_TOLERANCE:
            raise InvalidArgumentError(f"R must be a proper rotation, det={np.linalg.det(self.R):.12g}")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(R=np.eye(3), t=np.zeros(3))

    @classmethod
    def from_quaternion(cls, q, t) -> "Pose":
        """Build from a scalar-first unit quaternion (w, x, y, z)"""
        q = np.asarray(q, dtype=np.float64)
        return cls(R=Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix(), t=t)

    @property
    def quaternion(self) -> np.ndarray:
        """Scalar-first unit quaternion with canonical sign"""
        x, y, z, w = Rotation.from_matrix(self.R).as_quat()
        return canonical_quaternion(np.array([w, x, y, z]))

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) world points into the camera frame"""
        return np.asarray(points) @ self.R.T + self.t

    def __str__(self) -> str:
        q = self.quaternion
        return (
            f"q=({q[0]:.9f}, {q[1]:.9f}, {q[2]:.9f}, {q[3]:.9f}) "
            f"t=({self.t[0]:.6f}, {self.t[1]:.6f}, {self.t[2]:.6f})"
        )


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: focal length and principal point in pixels"""
    focal: float = 800.0
    principal_point: Tuple[float, float] = field(default=(320.0, 240.0))

    def __post_init__(self):
        if not self.focal > 0:
            raise InvalidArgumentError(f"focal must be positive, got {self.focal}")

    def project(self, directions: np.ndarray) -> np.ndarray:
        """Perspective division of (N, 3) camera-frame directions to (N, 2) pixels"""
        directions = np.atleast_2d(directions)
        uv = directions[:, :2] / directions[:, 2:3]
        return self.focal * uv + np.asarray(self.principal_point)

    def back_project(self, pixels: np.ndarray) -> np.ndarray:
        """(N, 2) pixels to (N, 3) unit bearings"""
        pixels = np.atleast_2d(pixels)
        xy = (pixels - np.asarray(self.principal_point)) / self.focal
        rays = np.hstack([xy, np.ones((xy.shape[0], 1))])
        return rays / np.linalg.norm(rays, axis=1, keepdims=True)

    def __str__(self) -> str:
        cx, cy = self.principal_point
        return f"Camera(f={self.focal:g}, c=({cx:g}, {cy:g}))"
