from __future__ import annotations

"""
Version declaration for the ownet command line.

Kept equal to ``ownet_core.__version__`` and the version in pyproject.toml.
"""

__all__ = ["__version__"]

from ownet_core import __version__  # noqa: F401
