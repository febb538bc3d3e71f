# mcp_server.py
"""
trimfit tools over MCP.

Runs on the stdio transport only:
    python mcp_server.py
"""
import logging
from typing import Dict, List, Optional

import numpy as np
from fastmcp import FastMCP

from trimfit.config import config
from trimfit.models import ScenarioConfig, SolverConfig
from trimfit.services.geom import position_error, rotation_error
from trimfit.services.solvers import SOLVERS, solve
from trimfit.services.synthbench import SyntheticBenchmark, solver_seed, sort_microbench

# Logging
logging.basicConfig(level=config.log_level, format="%(asctime)s %(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

mcp = FastMCP("trimfit")


def list_solvers() -> List[Dict[str, object]]:
    """List the available pose solvers with a one-line description each."""
    return [
        {"name": info.name, "description": info.description, "robust": info.robust}
        for info in SOLVERS.values()
    ]


def solve_scene(
    solver: str = "robust_upnp_incr",
    n: int = 200,
    noise_px: float = 3.0,
    outlier_frac: float = 0.3,
    seed: int = 0,
) -> Dict[str, object]:
    """
    Generate a synthetic scene and solve it.

    Args:
        solver: Solver name (see list_solvers)
        n: Number of correspondences (>= 12)
        noise_px: Pixel noise magnitude
        outlier_frac: Fraction of random bearings, in [0, 0.5]
        seed: Scene seed

    Returns:
        Estimated pose, errors against ground truth and solver statistics
    """
    scenario = ScenarioConfig(n=n, noise=noise_px, outlier_frac=outlier_frac, seed=seed)
    bench = SyntheticBenchmark(workers=1)
    scene = bench.generate_scene(scenario)
    result = solve(solver, scene.correspondences, bench.cam, SolverConfig(seed=solver_seed(seed, 0)))
    inliers = result.inlier_ids
    logger.info(f"✅ solve_scene {solver}: {result}")
    return {
        "solver": solver,
        "quaternion": result.pose.quaternion.tolist(),
        "rotation": result.pose.R.tolist(),
        "translation": result.pose.t.tolist(),
        "rot_err": rotation_error(result.pose.R, scene.pose_gt.R),
        "pos_err": position_error(result.pose.t, scene.pose_gt.t),
        "iterations": result.iterations,
        "converged": result.converged,
        "inlier_count": result.inlier_count,
        "outliers_retained": int(np.count_nonzero(scene.outlier_mask[inliers])),
    }


def run_sweep(
    axis: str = "outliers",
    values: Optional[List[float]] = None,
    solvers: Optional[List[str]] = None,
    n: int = 500,
    noise_px: float = 3.0,
    outlier_frac: float = 0.3,
    trials: int = 10,
    seed: int = 0,
) -> List[Dict[str, object]]:
    """
    Run a solver sweep and return one aggregated row per (value, solver).

    Rows carry the CSV columns plus the success rate (rotation error < 0.05 rad).
    """
    values = values or [0.1, 0.3]
    solvers = solvers or ["reppnp_incr", "robust_upnp_incr"]
    base = ScenarioConfig(n=n, noise=noise_px, outlier_frac=outlier_frac, seed=seed)
    bench = SyntheticBenchmark(workers=config.bench.workers)
    rows = bench.run_sweep(axis, values, trials, solvers, base)
    return [row.as_dict() for row in rows]


def bench_sort(n: int = 10000, perturb: float = 1.0, trials: int = 100, seed: int = 0) -> Dict[str, object]:
    """Sorting microbenchmark summary: mean times of the three conditions and the operation fraction."""
    return sort_microbench(n=n, perturb=perturb, trials=trials, seed=seed).summary()


for tool in (list_solvers, solve_scene, run_sweep, bench_sort):
    mcp.tool(tool)


if __name__ == "__main__":
    valid, errors = config.validate()
    if not valid:
        raise SystemExit("Invalid configuration: " + "; ".join(errors))
    logger.info("🚀 Starting trimfit MCP server on stdio")
    mcp.run()
