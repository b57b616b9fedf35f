"""
Interpolatory cubature on attractors of affine iterated function systems.
"""

__version__ = "0.1.0"
