"""
tensorheston CLI package.

Command-line interface for scenario runs, path simulation and validation.
"""

__version__ = "0.1.0"
