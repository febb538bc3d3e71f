"""
Centralized configuration management for trimfit
"""
import os
from pathlib import Path
from typing import Tuple
from dotenv import load_dotenv

# Load environment variables
project_root = Path(__file__).parent.parent.parent
env_path = project_root / ".env"
load_dotenv(env_path)


class SolverDefaults:
    """Numeric solver defaults. Not read from the environment."""

    def __init__(self):
        self.max_iterations = 20
        self.tolerance = 1e-10
        self.restarts = 20
        self.percentile = 50.0
        self.rebuild_every = 32
        self.gradient_tolerance = 1e-8
        self.newton_steps = 50
        self.ransac_iterations = 500
        self.ransac_threshold_px = 6.0
        self.success_rot_err = 0.05

    def validate(self) -> bool:
        """Validate that all defaults are positive"""
        values = [
            self.max_iterations,
            self.tolerance,
            self.restarts,
            self.rebuild_every,
            self.gradient_tolerance,
            self.newton_steps,
            self.ransac_iterations,
            self.ransac_threshold_px,
        ]
        return all(v > 0 for v in values) and 0.0 < self.percentile < 100.0


class BenchDefaults:
    """Synthetic benchmark configuration"""

    def __init__(self):
        self.focal = 800.0
        self.principal_point = (320.0, 240.0)
        self.trials = 100
        self.workers = int(os.getenv("TRIMFIT_WORKERS", "1"))
        self.results_dir = Path(os.getenv("TRIMFIT_RESULTS_DIR", "results"))

    def validate(self) -> bool:
        """Validate benchmark settings"""
        return self.focal > 0 and self.trials > 0 and self.workers > 0


class AppConfig:
    """Main application configuration"""

    def __init__(self):
        self.debug = os.getenv("TRIMFIT_DEBUG", "false").lower() == "true"
        self.log_level = os.getenv("TRIMFIT_LOG_LEVEL", "DEBUG" if self.debug else "INFO")
        self.environment = os.getenv("TRIMFIT_ENVIRONMENT", "development")

        # Sub-configs
        self.solver = SolverDefaults()
        self.bench = BenchDefaults()

    def validate(self) -> Tuple[bool, list]:
        """Validate all configurations"""
        errors = []

        if not self.solver.validate():
            errors.append("Solver defaults must be positive and percentile in (0, 100)")
        if not self.bench.validate():
            errors.append("Benchmark settings invalid (focal, trials and TRIMFIT_WORKERS must be positive)")

        return len(errors) == 0, errors


# Global config instance
config = AppConfig()
