"""
Geometrically optimal PnP over unit quaternions, plain and trimmed.

The sum of squared object-space errors, with the translation eliminated, is a
quartic form m(q)^T A m(q) in the quaternion. A is assembled from five
accumulators (H, A0..A3), which is what makes the trimmed variant incremental.
The quartic is minimised over the unit sphere by a multi-start Riemannian
Newton method. Object-space errors measure distances to lines, so among the
minima the solver keeps the best one that puts the points in front of the
camera.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from trimfit.errors import DegenerateGeometryError, InvalidArgumentError, TooFewPointsError
from trimfit.models.correspondence import CorrespondenceSet
from trimfit.models.pose import CameraModel, Pose, canonical_quaternion
from trimfit.models.results import SolverConfig, SolverResult
from trimfit.services.accum import AccumulatorGroup, SumAccumulator
from trimfit.services.geom import (
    MIN_BEARING_Z,
    MONOMIAL_HESSIANS,
    MONOMIAL_PAIRS,
    monomial_jacobian,
    monomials,
    monomials_batch,
    phi_batch,
    quaternion_to_rotation,
    reprojection_errors,
)
from trimfit.services.solvers.trim import TrimProblem, run_trim_fit

logger = logging.getLogger(__name__)

MIN_POINTS_UPNP = 4
MIN_POINTS_TRIM = 12
MAX_CONDITION = 1e12
LINE_SEARCH_STEPS = 2.0 ** -np.arange(0, 40, 2)
EIGEN_STARTS = 4
# two minima closer than this (1 - |<q, q'>|) are the same rotation
DISTINCT_MINIMUM = 1e-6
MIN_FRONT_FRACTION = 0.5

ACCUMULATOR_SHAPES = {
    "H": (3, 3),
    "A0": (3, 10),
    "A1": (10, 10),
    "A2": (10, 3),
    "A3": (3, 3),
}
SYMMETRIC_ACCUMULATORS = ("H", "A1", "A3")


@dataclass
class UpnpAccumulators:
    """The five sums from which the 10x10 energy matrix is assembled"""
    H: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray

    def condition(self) -> float:
        return float(np.linalg.cond(self.H))


class UpnpTerms:
    """Per-sample contributions, evaluated elementwise from bearings and phi matrices.

    With P_i = I - f_i f_i^T (a projector for unit f_i):
    H_i = A3_i = P_i, A0_i = -P_i Phi_i, A1_i = (P_i Phi_i)^T (P_i Phi_i), A2_i = (P_i Phi_i)^T.
    """

    def __init__(self, correspondences: CorrespondenceSet):
        self.n = len(correspondences)
        self.f = correspondences.bearings
        self.phi = phi_batch(correspondences.points)
        phi_max = float(np.abs(self.phi).max()) if self.n else 0.0
        # entries of P are at most 1; a projected phi column is no longer than the column
        self.bounds = {
            "H": 1.0,
            "A0": np.sqrt(3.0) * phi_max,
            "A1": 3.0 * phi_max ** 2,
            "A2": np.sqrt(3.0) * phi_max,
            "A3": 1.0,
        }

    def projected(self, ids: np.ndarray) -> np.ndarray:
        """(I - f f^T) Phi per id"""
        f = self.f[ids]
        phi = self.phi[ids]
        along = f[:, 0, None] * phi[:, 0] + f[:, 1, None] * phi[:, 1] + f[:, 2, None] * phi[:, 2]
        return phi - f[:, :, None] * along[:, None, :]

    def H(self, ids: np.ndarray) -> np.ndarray:
        f = self.f[ids]
        return np.eye(3) - f[:, :, None] * f[:, None, :]

    def A0(self, ids: np.ndarray) -> np.ndarray:
        return -self.projected(ids)

    def A1(self, ids: np.ndarray) -> np.ndarray:
        Q = self.projected(ids)
        return (
            Q[:, 0, :, None] * Q[:, 0, None, :]
            + Q[:, 1, :, None] * Q[:, 1, None, :]
            + Q[:, 2, :, None] * Q[:, 2, None, :]
        )

    def A2(self, ids: np.ndarray) -> np.ndarray:
        return np.transpose(self.projected(ids), (0, 2, 1))

    def A3(self, ids: np.ndarray) -> np.ndarray:
        return self.H(ids)

    def summed(self, ids: np.ndarray) -> UpnpAccumulators:
        """Plain floating-point sums over ``ids``"""
        return UpnpAccumulators(**{
            name: getattr(self, name)(ids).sum(axis=0) if ids.size else np.zeros(shape)
            for name, shape in ACCUMULATOR_SHAPES.items()
        })

    def group(self) -> AccumulatorGroup:
        return AccumulatorGroup({
            name: SumAccumulator(
                getattr(self, name),
                n=self.n,
                shape=shape,
                bound=self.bounds[name],
                symmetric=name in SYMMETRIC_ACCUMULATORS,
                name=name,
            )
            for name, shape in ACCUMULATOR_SHAPES.items()
        })


def build_upnp_accumulators(correspondences: CorrespondenceSet, weights: Optional[np.ndarray] = None) -> UpnpAccumulators:
    """
    Naive weighted sums H, A0..A3 over the correspondences with w_i = 1.

    Args:
        correspondences: Bearings and world points
        weights: 0/1 indicator per correspondence; all ones when omitted

    Returns:
        UpnpAccumulators with an invertible H
    """
    n = len(correspondences)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise InvalidArgumentError(f"expected {n} weights, got shape {weights.shape}")
    if not np.all((weights == 0.0) | (weights == 1.0)):
        raise InvalidArgumentError("weights must be 0 or 1")

    acc = UpnpTerms(correspondences).summed(np.flatnonzero(weights))
    _check_h(acc.H)
    return acc


def _check_h(H: np.ndarray) -> None:
    if np.linalg.matrix_rank(H) < 3:
        raise DegenerateGeometryError("H is singular: bearings are (anti-)parallel or too few")
    condition = np.linalg.cond(H)
    if not condition < MAX_CONDITION:
        raise DegenerateGeometryError(f"H is ill-conditioned (cond={condition:.3e})")


def assemble_energy(acc: UpnpAccumulators) -> np.ndarray:
    """A = A1 + A2 H^-1 A0 + A0^T H^-1 A2^T + A0^T H^-1 A3 H^-1 A0, symmetrised"""
    _check_h(acc.H)
    H_inv = np.linalg.inv(acc.H)
    energy = (
        acc.A1
        + acc.A2 @ H_inv @ acc.A0
        + acc.A0.T @ H_inv @ acc.A2.T
        + acc.A0.T @ H_inv @ acc.A3 @ H_inv @ acc.A0
    )
    return 0.5 * (energy + energy.T)


def translation_from_rotation(acc: UpnpAccumulators, q: np.ndarray) -> np.ndarray:
    """t = H^-1 A0 m(q), the optimal translation for a fixed rotation"""
    _check_h(acc.H)
    return np.linalg.solve(acc.H, acc.A0 @ monomials(q))


def quartic_energy(energy: np.ndarray, q: np.ndarray) -> float:
    m = monomials(q)
    return float(m @ energy @ m)


def object_space_energy(correspondences: CorrespondenceSet, q: np.ndarray, t: np.ndarray, ids=None) -> float:
    """sum_i ||(I - f_i f_i^T)(R(q) p_i + t)||^2 computed sample by sample"""
    ids = np.arange(len(correspondences)) if ids is None else np.asarray(ids)
    f = correspondences.bearings[ids]
    X = correspondences.points[ids] @ quaternion_to_rotation(q).T + t
    residual = X - f * np.sum(f * X, axis=1, keepdims=True)
    return float(np.sum(residual ** 2))




def front_fraction(points: np.ndarray, q: np.ndarray, t: np.ndarray) -> float:
    """Share of points with positive depth under the pose (q, t)"""
    depths = np.asarray(points) @ quaternion_to_rotation(q)[2] + t[2]
    return float(np.mean(depths > 0.0)) if depths.size else 1.0


# ─────────────────────────────────────────────────────────────────────────────
# Quartic minimisation on the unit quaternion sphere
# ─────────────────────────────────────────────────────────────────────────────
def _structured_starts() -> np.ndarray:
    """Axes, axis pairs and cube corners of the quaternion sphere, one per antipodal pair"""
    axes = np.eye(4)
    pairs = [
        (axes[a] + sign * axes[b]) / np.sqrt(2.0)
        for a, b in itertools.combinations(range(4), 2)
        for sign in (1.0, -1.0)
    ]
    corners = [np.array([1.0, *signs]) / 2.0 for signs in itertools.product((1.0, -1.0), repeat=3)]
    return np.vstack([axes, pairs, corners])


STRUCTURED_STARTS = _structured_starts()


def _tangent_basis(Q: np.ndarray) -> np.ndarray:
    """(S, 4, 3) orthonormal tangent vectors q * i, q * j, q * k"""
    w, x, y, z = Q.T
    return np.stack([
        np.stack([-x, w, z, -y], axis=-1),
        np.stack([-y, -z, w, x], axis=-1),
        np.stack([-z, y, -x, w], axis=-1),
    ], axis=-1)


def _energies(energy: np.ndarray, Q: np.ndarray) -> np.ndarray:
    m = monomials_batch(Q)
    return np.einsum("sk,kl,sl->s", m, energy, m)


def _riemannian_derivatives(energy: np.ndarray, Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tangent bases, Riemannian gradients (S, 3) and Hessians (S, 3, 3) at unit quaternions"""
    m = monomials_batch(Q)
    Am = m @ energy
    J = monomial_jacobian(Q)
    gradient = 2.0 * np.einsum("ski,sk->si", J, Am)
    hessian = 2.0 * (
        np.einsum("ski,kl,slj->sij", J, energy, J)
        + np.einsum("sk,kij->sij", Am, MONOMIAL_HESSIANS)
    )

    B = _tangent_basis(Q)
    g = np.einsum("sia,si->sa", B, gradient)
    radial = np.einsum("si,si->s", Q, gradient)
    H = np.einsum("sia,sij,sjb->sab", B, hessian, B) - radial[:, None, None] * np.eye(3)
    return B, g, H


def _eigen_starts(energy: np.ndarray, count: int = EIGEN_STARTS) -> np.ndarray:
    """Relaxed starts: the smallest eigenvectors of A, each read back as q q^T"""
    _, vectors = np.linalg.eigh(energy)
    starts = []
    for v in vectors[:, :count].T:
        outer = np.zeros((4, 4))
        for k, (a, b) in enumerate(MONOMIAL_PAIRS):
            outer[a, b] = v[k]
            outer[b, a] = v[k]
        values, basis = np.linalg.eigh(outer)
        starts.append(basis[:, np.argmax(np.abs(values))])
    return np.array(starts)


def random_starts(count: int, seed: int) -> np.ndarray:
    """``count`` uniformly distributed unit quaternions, deterministic in ``seed``"""
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((count, 4))
    return Q / np.linalg.norm(Q, axis=1, keepdims=True)


def quartic_minima(
    energy: np.ndarray,
    config: Optional[SolverConfig] = None,
    warm_start: Optional[np.ndarray] = None,
    starts: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Local minima of m(q)^T A m(q) over unit quaternions, best first.

    Every start descends at once. Each step line-searches both a shifted
    Newton direction and a scaled gradient direction and keeps the lowest
    energy found; a start stops when its gradient is below tolerance or no
    step lowers its energy. Starts: ``config.restarts`` random quaternions,
    the axis, pair and corner quaternions, the relaxed eigenvector starts and
    ``warm_start`` when given.

    Args:
        energy: Symmetric 10x10 matrix
        config: Restarts, seed, gradient tolerance and step limit
        warm_start: Previous estimate, if any
        starts: Explicit random starts, overriding ``config.restarts``

    Returns:
        (M, 4) sign-canonical quaternions, distinct as rotations, and their (M,) energies ascending
    """
    config = config or SolverConfig()
    energy = np.asarray(energy, dtype=np.float64)
    if energy.shape != (10, 10):
        raise InvalidArgumentError(f"energy matrix must be 10x10, got {energy.shape}")
    if np.max(np.abs(energy - energy.T)) > 1e-9 * max(1.0, np.max(np.abs(energy))):
        raise InvalidArgumentError("energy matrix must be symmetric")

    seeds = [random_starts(config.restarts, config.seed) if starts is None else np.asarray(starts, dtype=np.float64)]
    seeds.append(STRUCTURED_STARTS)
    seeds.append(_eigen_starts(energy))
    if warm_start is not None:
        seeds.append(np.asarray(warm_start, dtype=np.float64).reshape(1, 4))
    Q = np.vstack(seeds)
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)

    tolerance = config.gradient_tolerance * max(1.0, float(np.linalg.norm(energy)))
    values = _energies(energy, Q)
    active = np.ones(Q.shape[0], dtype=bool)

    for _ in range(config.newton_steps):
        rows = np.flatnonzero(active)
        if not rows.size:
            break
        B, g, H = _riemannian_derivatives(energy, Q[rows])
        moving = np.linalg.norm(g, axis=1) > tolerance
        active[rows[~moving]] = False
        rows, B, g, H = rows[moving], B[moving], g[moving], H[moving]
        if not rows.size:
            break

        # shift indefinite Hessians until positive definite
        eigenvalues = np.linalg.eigvalsh(H)
        lowest = eigenvalues[:, 0]
        scale = np.abs(eigenvalues).max(axis=1) + 1e-300
        shift = np.where(lowest > 1e-12 * scale, 0.0, 1e-6 * scale - lowest)
        newton = -np.linalg.solve(H + shift[:, None, None] * np.eye(3), g[:, :, None])[:, :, 0]
        descent = -g / scale[:, None]
        directions = np.einsum("sia,sda->sdi", B, np.stack([newton, descent], axis=1))

        candidates = Q[rows, None, None, :] + LINE_SEARCH_STEPS[None, None, :, None] * directions[:, :, None, :]
        candidates = candidates.reshape(rows.size, -1, 4)
        candidates /= np.linalg.norm(candidates, axis=2, keepdims=True)
        trial = _energies(energy, candidates.reshape(-1, 4)).reshape(rows.size, -1)

        best = np.argmin(trial, axis=1)
        best_values = trial[np.arange(rows.size), best]
        improved = best_values < values[rows]
        moved = rows[improved]
        Q[moved] = candidates[improved, best[improved]]
        values[moved] = best_values[improved]
        active[rows[~improved]] = False

    order = np.argsort(values, kind="stable")
    kept = []
    for index in order:
        q = canonical_quaternion(Q[index] / np.linalg.norm(Q[index]))
        if all(1.0 - abs(float(q @ other)) > DISTINCT_MINIMUM for other in kept):
            kept.append(q)
    minima = np.array(kept)
    minimum_values = _energies(energy, minima)

    _, g_best, _ = _riemannian_derivatives(energy, minima[:1])
    if np.linalg.norm(g_best) > tolerance:
        logger.debug(f"quartic minimiser stopped with gradient {np.linalg.norm(g_best):.3e} > {tolerance:.3e}")
    return minima, minimum_values


def minimize_quartic(
    energy: np.ndarray,
    config: Optional[SolverConfig] = None,
    warm_start: Optional[np.ndarray] = None,
    starts: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Lowest-energy unit quaternion of m(q)^T A m(q), sign-canonical"""
    minima, _ = quartic_minima(energy, config, warm_start=warm_start, starts=starts)
    return minima[0]


def select_pose(acc: UpnpAccumulators, minima: np.ndarray, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lowest-energy minimum that puts at least half of the points in front of the camera.

    Args:
        acc: Accumulators the minima were computed from
        minima: Candidate quaternions, best energy first
        points: World points used for the depth test

    Returns:
        (q, t); the candidate with the most points in front when none reaches half
    """
    fallback = None
    for q in minima:
        t = translation_from_rotation(acc, q)
        fraction = front_fraction(points, q, t)
        if fraction >= MIN_FRONT_FRACTION:
            return q, t
        if fallback is None or fraction > fallback[2]:
            fallback = (q, t, fraction)
    logger.warning(f"no quartic minimum puts half of the points in front of the camera (best {fallback[2]:.2f})")
    return fallback[0], fallback[1]


# ─────────────────────────────────────────────────────────────────────────────
# Solvers
# ─────────────────────────────────────────────────────────────────────────────
def upnp(
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> Pose:
    """Non-robust geometrically optimal PnP over all correspondences"""
    n = len(correspondences)
    if n < MIN_POINTS_UPNP:
        raise TooFewPointsError("upnp", MIN_POINTS_UPNP, n)
    acc = build_upnp_accumulators(correspondences)
    minima, _ = quartic_minima(assemble_energy(acc), config)
    q, t = select_pose(acc, minima, correspondences.points)
    return Pose(R=quaternion_to_rotation(q), t=t)


class UpnpProblem(TrimProblem):
    """Trim fitting of the object-space energy, ranked by reprojection error"""

    name = "robust_upnp"

    def __init__(self, correspondences: CorrespondenceSet, cam: CameraModel, config: SolverConfig):
        self.correspondences = correspondences
        self.cam = cam
        self.config = config
        # the same random starts in every iteration keep re-solves reproducible
        self.starts = random_starts(config.restarts, config.seed)
        self.terms = UpnpTerms(correspondences)
        # bearings that cannot be scored never carry weight
        self.usable = correspondences.bearings[:, 2] > MIN_BEARING_Z
        super().__init__(len(correspondences), self.terms.group())

    def initial(self) -> Tuple[np.ndarray, np.ndarray]:
        acc = self.terms.summed(np.flatnonzero(self.usable))
        _check_h(acc.H)
        return self._solve(acc, None)

    def solve(self, values: Dict[str, np.ndarray], previous) -> Tuple[np.ndarray, np.ndarray]:
        return self._solve(UpnpAccumulators(**values), previous)

    def _solve(self, acc: UpnpAccumulators, previous) -> Tuple[np.ndarray, np.ndarray]:
        warm = None if previous is None else previous[0]
        minima, _ = quartic_minima(assemble_energy(acc), self.config, warm_start=warm, starts=self.starts)
        return select_pose(acc, minima, self.correspondences.points)

    def scores(self, params) -> np.ndarray:
        return reprojection_errors(self.to_pose(params), self.correspondences, self.cam)

    def energy(self, params, values: Dict[str, np.ndarray]) -> float:
        return quartic_energy(assemble_energy(UpnpAccumulators(**values)), params[0])

    def change(self, new, old) -> float:
        return float(max(np.linalg.norm(new[0] - old[0]), np.linalg.norm(new[1] - old[1])))

    def to_pose(self, params) -> Pose:
        q, t = params
        return Pose(R=quaternion_to_rotation(q), t=t)


def _robust_upnp(correspondences, cam, config, incremental: bool) -> SolverResult:
    n = len(correspondences)
    if n < MIN_POINTS_TRIM:
        raise TooFewPointsError("robust_upnp_incr" if incremental else "robust_upnp", MIN_POINTS_TRIM, n)
    config = config or SolverConfig()
    problem = UpnpProblem(correspondences, cam or CameraModel(), config)
    return run_trim_fit(problem, config, incremental=incremental)


def robust_upnp(
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """Trimmed UPnP with full sorting and naive accumulation"""
    return _robust_upnp(correspondences, cam, config, incremental=False)


def robust_upnp_incr(
    correspondences: CorrespondenceSet,
    cam: Optional[CameraModel] = None,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """Trimmed UPnP with quicksort4trim and journal updates of all five accumulators"""
    return _robust_upnp(correspondences, cam, config, incremental=True)
