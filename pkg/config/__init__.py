"""Configuration module for tensorheston."""

from .settings import HestonConfig, create_default_config, get_config

__all__ = ["get_config", "create_default_config", "HestonConfig"]
