"""Linear and weakly nonlinear pattern analysis plus PDE simulation for urban crime models."""

__version__ = "0.1.0"
