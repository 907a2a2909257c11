"""
Ownership network analysis library.

Builds direct-control matrices from ownership shares, propagates control
through the network and reports topology and concentration of control.
"""

__all__ = ["__version__"]

__version__ = "0.1.0"
