"""Finite-scale tools for large-girth box spaces, negative-type kernels,
tree embeddings, coarse maps and congruence-representation spectra."""

from ._accel import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
