#!/usr/bin/env python3
"""
trimfit command line.

Usage:
    # Sorting microbenchmark: full sort vs. partial vs. incremental partial sort
    python cli.py bench-sort --n 10000 --perturb 1.0 --trials 1000

    # Solver sweep over outlier fractions, CSV to r.csv
    python cli.py sweep --axis outliers --values 0.1,0.3 --n 2000 --noise 3 --trials 100 \\
        --solvers reppnp_incr,robust_upnp_incr --seed 7 --out r.csv

    # Running time against number of correspondences
    python cli.py bench-pnp --ns 100,500,1000,2000 --trials 100

    # Solve a scene file (one "fx fy fz px py pz" correspondence per line)
    python cli.py solve --scene scene.txt --solver robust_upnp_incr --seed 1

Exit codes: 0 success, 1 runtime failure, 2 bad flags.
"""
import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from trimfit.config import config
from trimfit.errors import SceneFormatError, TrimFitError
from trimfit.models import CSV_HEADER, CameraModel, CorrespondenceSet, RunSpec, ScenarioConfig, SolverConfig, SolverResult, SweepRow
from trimfit.services.solvers import SOLVERS, solve
from trimfit.services.synthbench import SyntheticBenchmark, sort_microbench

logger = logging.getLogger("trimfit.cli")

# bearings further than this from unit length are rejected, closer ones renormalised
SCENE_UNIT_TOLERANCE = 1e-6
SCENE_EXACT_TOLERANCE = 1e-12
SORT_CSV_HEADER = ["trial", "full_sort_s", "partial_sort_s", "incremental_sort_s", "op_fraction", "journal_size"]


# ─────────────────────────────────────────────────────────────────────────────
# Scene files
# ─────────────────────────────────────────────────────────────────────────────
def load_scene(path: Path) -> CorrespondenceSet:
    """
    Parse a scene file: one correspondence ``fx fy fz px py pz`` per line.

    Blank lines and lines starting with ``#`` are skipped.

    Raises:
        SceneFormatError: with the 1-based line number of the first bad line
    """
    bearings, points = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 6:
                raise SceneFormatError(f"expected 6 values, got {len(fields)}", line_number)
            try:
                values = np.array([float(v) for v in fields])
            except ValueError as e:
                raise SceneFormatError(f"not a number ({e})", line_number) from None
            if not np.all(np.isfinite(values)):
                raise SceneFormatError("non-finite value", line_number)

            f = values[:3]
            norm = np.linalg.norm(f)
            if abs(norm - 1.0) > SCENE_UNIT_TOLERANCE:
                raise SceneFormatError(f"bearing is not unit length (norm {norm:.9g})", line_number)
            if abs(norm - 1.0) > SCENE_EXACT_TOLERANCE:
                f = f / norm
            bearings.append(f)
            points.append(values[3:])

    if not bearings:
        raise SceneFormatError(f"scene file {path} holds no correspondences")
    return CorrespondenceSet(bearings=np.array(bearings), points=np.array(points))


def dump_scene(correspondences: CorrespondenceSet, path: Path) -> None:
    """Write a scene in the format ``load_scene`` reads, losslessly"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for f, p in zip(correspondences.bearings, correspondences.points):
            fh.write(" ".join(repr(float(v)) for v in (*f, *p)) + "\n")


def solve_from_file(path: Path, solver: str = "robust_upnp_incr", seed: int = 1, cam: Optional[CameraModel] = None) -> SolverResult:
    """Load a scene file and solve it"""
    correspondences = load_scene(path)
    logger.info(f"Loaded {len(correspondences)} correspondences from {path}")
    return solve(solver, correspondences, cam, SolverConfig(seed=seed))


def format_report(solver: str, result: SolverResult) -> str:
    q = result.pose.quaternion
    R = result.pose.R
    t = result.pose.t
    lines = [
        f"solver: {solver}",
        f"quaternion (w, x, y, z): {q[0]:.12f} {q[1]:.12f} {q[2]:.12f} {q[3]:.12f}",
        "rotation:",
        *(f"  {row[0]: .12f} {row[1]: .12f} {row[2]: .12f}" for row in R),
        f"translation: {t[0]:.12f} {t[1]:.12f} {t[2]:.12f}",
        f"inliers: {result.inlier_count}",
        f"iterations: {result.iterations}",
        f"converged: {'yes' if result.converged else 'no'}",
    ]
    return "\n".join(lines)


# ─────────────────────────────────────────────────────────────────────────────
# Output
# ─────────────────────────────────────────────────────────────────────────────
def write_rows(rows: Sequence[SweepRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(row.csv_row() for row in rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")


def _output_path(out: Optional[Path], command: str) -> Path:
    return out if out is not None else config.bench.results_dir / f"{command}.csv"


# ─────────────────────────────────────────────────────────────────────────────
# Commands
# ─────────────────────────────────────────────────────────────────────────────
def cmd_bench_sort(args: argparse.Namespace) -> int:
    result = sort_microbench(n=args.n, perturb=args.perturb, trials=args.trials, seed=args.seed)
    print(result)
    histogram = result.histogram(bins=args.bins)
    print("time histogram (seconds, shared bin edges):")
    print("  edges:            " + " ".join(f"{e:.3e}" for e in histogram["edges"]))
    for condition in ("full_sort", "partial_sort", "incremental_sort"):
        print(f"  {condition + ':':<18}" + " ".join(str(c) for c in histogram[condition]))
    print(f"operation fraction: mean {result.mean_op_fraction:.4f}, median {np.median(result.op_fractions):.4f}")

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SORT_CSV_HEADER)
            for trial in range(result.trials):
                writer.writerow([
                    trial,
                    f"{result.full_sort_s[trial]:.6e}",
                    f"{result.partial_sort_s[trial]:.6e}",
                    f"{result.incremental_sort_s[trial]:.6e}",
                    repr(float(result.op_fractions[trial])),
                    int(result.journal_sizes[trial]),
                ])
        logger.info(f"Wrote {result.trials} trials to {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace, spec: RunSpec) -> int:
    bench = SyntheticBenchmark(workers=args.workers, timing=not args.no_timing)
    if args.dump_scene is not None:
        first = spec.scenario.with_axis(args.axis, args.values[0])
        dump_scene(bench.generate_scene(first).correspondences, args.dump_scene)
        logger.info(f"Dumped the first scene to {args.dump_scene}")

    rows = bench.run_sweep(args.axis, args.values, args.trials, spec.solvers, spec.scenario)
    for row in rows:
        print(row)
    write_rows(rows, _output_path(spec.out, "sweep"))
    return 0


def cmd_bench_pnp(args: argparse.Namespace, spec: RunSpec) -> int:
    bench = SyntheticBenchmark(workers=args.workers, timing=not args.no_timing)
    rows = bench.run_timing_study(
        ns=[int(n) for n in args.ns],
        trials=args.trials,
        solvers=spec.solvers,
        outlier_fracs=args.outliers,
        noise=args.noise,
        noise_model=spec.scenario.noise_model,
        seed=spec.seed,
    )
    for row in rows:
        print(row)
    write_rows(rows, _output_path(spec.out, "bench_pnp"))
    return 0


def cmd_solve(args: argparse.Namespace, spec: RunSpec) -> int:
    cam = CameraModel(focal=args.focal, principal_point=config.bench.principal_point)
    result = solve_from_file(args.scene, spec.solvers[0], spec.seed, cam)
    print(format_report(spec.solvers[0], result))
    return 0


# ─────────────────────────────────────────────────────────────────────────────
# Parsing
# ─────────────────────────────────────────────────────────────────────────────
def _float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _name_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trimfit",
        description="Robust trim fitting with incremental partial sorting: benchmarks and pose solves",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    all_solvers = ",".join(SOLVERS)
    defaults = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("bench-sort", help="Sorting microbenchmark", formatter_class=defaults)
    p.add_argument("--n", type=int, default=10000, help="Array size")
    p.add_argument("--perturb", type=float, default=1.0, help="Perturbation half-width")
    p.add_argument("--trials", type=int, default=1000, help="Number of arrays")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--bins", type=int, default=20, help="Histogram bins")
    p.add_argument("--out", type=Path, default=None, help="Optional per-trial CSV")

    def scenario_flags(p: argparse.ArgumentParser, point_count: bool = True) -> None:
        if point_count:
            p.add_argument("--n", type=int, default=2000, help="Correspondences per scene")
        p.add_argument("--noise", type=float, default=3.0, help="Pixel noise magnitude")
        p.add_argument("--noise-model", choices=["uniform", "gaussian"], default="uniform", help="Pixel noise distribution")
        p.add_argument("--trials", type=int, default=config.bench.trials, help="Trials per sweep value")
        p.add_argument("--solvers", type=_name_list, default=list(SOLVERS), help=f"Comma-separated subset of {all_solvers}")
        p.add_argument("--seed", type=int, default=0, help="Run seed")
        p.add_argument("--out", type=Path, default=None, help=f"CSV path (default: {config.bench.results_dir}/<command>.csv)")
        p.add_argument("--workers", type=int, default=config.bench.workers, help="Trial threads")
        p.add_argument("--no-timing", action="store_true", help="Write 0 for times so the CSV is byte-stable")

    p = sub.add_parser("sweep", help="Solver accuracy sweep", formatter_class=defaults)
    p.add_argument("--axis", choices=["n", "noise", "outliers"], required=True, help="Swept scenario field")
    p.add_argument("--values", type=_float_list, required=True, help="Comma-separated sweep values")
    p.add_argument("--outliers", type=float, default=0.3, help="Outlier fraction")
    p.add_argument("--dump-scene", type=Path, default=None, help="Write the first generated scene to this path")
    scenario_flags(p)

    p = sub.add_parser("bench-pnp", help="Solver running time against correspondence count", formatter_class=defaults)
    p.add_argument("--ns", type=_float_list, default=[100, 500, 1000, 2000], help="Comma-separated correspondence counts")
    p.add_argument("--outliers", type=_float_list, default=[0.1, 0.3], help="Comma-separated outlier fractions")
    scenario_flags(p, point_count=False)

    p = sub.add_parser("solve", help="Solve a scene file", formatter_class=defaults)
    p.add_argument("--scene", type=Path, required=True, help="Scene file, one 'fx fy fz px py pz' per line")
    p.add_argument("--solver", default="robust_upnp_incr", help=f"One of {all_solvers}")
    p.add_argument("--seed", type=int, default=1, help="Solver seed")
    p.add_argument("--focal", type=float, default=config.bench.focal, help="Focal length in pixels")
    return parser


def _check_bench_sort(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.n < 2:
        parser.error(f"argument --n: array size must be at least 2, got {args.n}")
    if not args.perturb >= 0:
        parser.error(f"argument --perturb: must be non-negative, got {args.perturb}")
    if args.trials < 1:
        parser.error(f"argument --trials: must be at least 1, got {args.trials}")
    if args.bins < 1:
        parser.error(f"argument --bins: must be at least 1, got {args.bins}")


def _run_spec(args: argparse.Namespace) -> RunSpec:
    if args.command == "solve":
        return RunSpec(command="solve", solvers=[args.solver], seed=args.seed)
    outliers = args.outliers if args.command == "sweep" else max(args.outliers)
    scenario = ScenarioConfig(
        n=args.n if args.command == "sweep" else int(max(args.ns)),
        noise=args.noise,
        outlier_frac=outliers,
        seed=args.seed,
        noise_model=args.noise_model,
    )
    # every swept scenario must be valid before any work starts
    if args.command == "sweep":
        for value in args.values:
            scenario.with_axis(args.axis, value)
    else:
        for frac in args.outliers:
            for n in args.ns:
                scenario.model_copy(update={"outlier_frac": frac}).with_axis("n", n)
    return RunSpec(command=args.command, scenario=scenario, solvers=args.solvers, out=args.out, seed=args.seed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "bench-sort":
            _check_bench_sort(parser, args)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else config.log_level,
        format="%(asctime)s %(levelname)s: %(message)s",
    )

    valid, errors = config.validate()
    if not valid:
        for error in errors:
            logger.error(f"❌ {error}")
        return 1

    spec = None
    if args.command != "bench-sort":
        try:
            spec = _run_spec(args)
        except ValidationError as e:
            parser.print_usage(sys.stderr)
            message = "; ".join(err["msg"] for err in e.errors())
            print(f"{parser.prog}: error: {message}", file=sys.stderr)
            return 2

    logger.info(f"🚀 trimfit {args.command}")
    try:
        if args.command == "bench-sort":
            return cmd_bench_sort(args)
        if args.command == "sweep":
            return cmd_sweep(args, spec)
        if args.command == "bench-pnp":
            return cmd_bench_pnp(args, spec)
        return cmd_solve(args, spec)
    except (TrimFitError, ValidationError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
