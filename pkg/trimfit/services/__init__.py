"""Algorithms for trimfit"""
from .accum import AccumulatorGroup, NormalAccumulator12, SumAccumulator
from .synthbench import SyntheticBenchmark, generate_scene, sort_microbench
from .trimsort import IncrementalSum, percentile_score, quicksort4trim

__all__ = [
    "AccumulatorGroup",
    "IncrementalSum",
    "NormalAccumulator12",
    "SumAccumulator",
    "SyntheticBenchmark",
    "generate_scene",
    "percentile_score",
    "quicksort4trim",
    "sort_microbench",
]
