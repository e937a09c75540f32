"""Configuration management for the quantum robot simulator.

This module handles all configuration settings for the application, including:
- Basis enumeration limits and numerical thresholds
- Time-evolution defaults (coupling constant, method, tolerances)
- Validator behaviour
- Eigendecomposition caching
- Logging
"""
import logging
import sys
from functools import lru_cache
from pathlib import Path
from typing import Literal

import structlog
from pydantic import BaseModel, Field


class BasisConfig(BaseModel):
    """Configuration for configuration-basis handling."""

    max_dim: int = Field(
        default=4096,
        ge=1,
        description="Largest basis a reachable-closure or full enumeration may build",
    )
    prune_threshold: float = Field(
        default=1e-14,
        gt=0,
        description="Amplitudes with smaller modulus are dropped after arithmetic",
    )
    normalize_tolerance: float = Field(
        default=1e-6,
        gt=0,
        description="Largest deviation from unit norm accepted by evolution",
    )


class EvolutionConfig(BaseModel):
    """Defaults for Hamiltonian time evolution."""

    coupling: float = Field(
        default=1.0,
        gt=0,
        description="Coupling constant K in H = K(2 - T - T^dagger), hbar = 1",
    )
    method: Literal["auto", "dense_eigen", "krylov", "scaled_taylor"] = Field(
        default="auto",
        description="Propagation method; auto picks dense_eigen up to dense_cutoff",
    )
    dense_cutoff: int = Field(
        default=4096,
        ge=1,
        description="Largest dimension propagated by dense eigendecomposition",
    )
    krylov_dim: int = Field(
        default=30,
        ge=2,
        description="Lanczos subspace size per Krylov substep",
    )
    krylov_max_substeps: int = Field(
        default=10_000,
        ge=1,
        description="Substep budget before Krylov propagation gives up",
    )
    taylor_step: float = Field(
        default=1.0,
        gt=0,
        description="Largest time slice handed to the scaled Taylor propagator",
    )
    tolerance: float = Field(
        default=1e-9,
        gt=0,
        description="Target accuracy of propagated states",
    )


class ValidatorConfig(BaseModel):
    """Configuration for structural validators."""

    check_on_compile: bool = Field(
        default=True,
        description="Validate every matrix produced from rule sets",
    )
    check_homogeneity: bool = Field(
        default=True,
        description="Include environment homogeneity in compile-time validation",
    )
    distinct_path_tolerance: float = Field(
        default=1e-12,
        gt=0,
        description="Amplitude below which a component counts as absent on a path",
    )
    strict_memory: bool = Field(
        default=False,
        description="Reject action rules that read the memory register",
    )


class CacheConfig(BaseModel):
    """Configuration for the eigendecomposition cache."""

    enabled: bool = Field(
        default=False,
        description="Persist dense eigendecompositions on disk between runs",
    )
    directory: Path = Field(
        default=Path(".qrobot-cache"),
        description="Directory holding the disk cache",
    )
    size_limit: int = Field(
        default=1024 * 1024 * 1024,
        ge=1,
        description="Maximum disk cache size in bytes",
    )


class LoggingConfig(BaseModel):
    """Logging output settings."""

    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO",
        description="Minimum level of emitted events",
    )
    json_output: bool = Field(
        default=False,
        description="Render events as JSON instead of console text",
    )


class Config(BaseModel):
    """Root configuration class combining all settings."""

    basis: BasisConfig = Field(default_factory=BasisConfig)
    evolution: EvolutionConfig = Field(default_factory=EvolutionConfig)
    validators: ValidatorConfig = Field(default_factory=ValidatorConfig)
    cache: CacheConfig = Field(default_factory=CacheConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


@lru_cache()
def get_config() -> Config:
    """Get the application configuration.

    Returns:
        Config: Application configuration object

    Note:
        This function is cached to avoid building the configuration multiple times.
    """
    return Config()


def _stderr_logger(*args: object) -> structlog.PrintLogger:
    return structlog.PrintLogger(file=sys.stderr)


def configure_logging(settings: LoggingConfig) -> None:
    """Route structlog events to stderr at the configured level.

    Args:
        settings: Logging section of the configuration
    """
    renderer = (
        structlog.processors.JSONRenderer()
        if settings.json_output
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(settings.level)
        ),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
