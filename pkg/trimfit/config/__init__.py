"""Core configuration module"""
from .settings import config, AppConfig, BenchDefaults, SolverDefaults

__all__ = ["config", "AppConfig", "BenchDefaults", "SolverDefaults"]
