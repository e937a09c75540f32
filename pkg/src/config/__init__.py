"""Configuration package for the quantum robot simulator."""

from .settings import Config, configure_logging, get_config

__all__ = ["Config", "configure_logging", "get_config"]
